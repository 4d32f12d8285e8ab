// Shared helpers for the unit and acceptance suites.

#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "af/dprtf.hpp"
#include "af/geometry.hpp"

namespace af::test {

// Scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string profile_dir() {
#ifdef AF_PROFILE_DIR
  return AF_PROFILE_DIR;
#else
  return "profiles";
#endif
}

// Simple 2-mic geometry along +x with the reference at the origin.
inline ArrayGeometry pair_geometry(double baseline = 0.05) {
  ArrayGeometry g;
  g.mic_positions.resize(3, 2);
  g.mic_positions.col(0) = Eigen::Vector3d(0, 0, 0);
  g.mic_positions.col(1) = Eigen::Vector3d(baseline, 0, 0);
  g.reference = 0;
  return g;
}

// Compact 4-mic planar array (center reference plus a 120-degree triangle).
inline ArrayGeometry quad_geometry(double radius = 0.0425) {
  ArrayGeometry g;
  g.mic_positions.resize(3, 4);
  g.mic_positions.col(0) = Eigen::Vector3d(0, 0, 0);
  for (int i = 0; i < 3; ++i) {
    double a = 2.0 * kPi * i / 3.0;
    g.mic_positions.col(i + 1) = Eigen::Vector3d(radius * std::cos(a), radius * std::sin(a), 0);
  }
  g.reference = 0;
  return g;
}

// Reduced CTF vector (the RLS unknown) from per-channel taps, normalized by
// the reference channel's first tap.
inline Eigen::VectorXcd reduced_ctf(const Eigen::MatrixXcd& taps /*M x Q*/, int reference) {
  const int channels = static_cast<int>(taps.rows());
  const int q = static_cast<int>(taps.cols());
  Eigen::VectorXcd out(channels * q - 1);
  std::complex<double> norm = taps(reference, 0);
  int idx = 0;
  for (int c = 0; c < channels; ++c)
    for (int tap = 0; tap < q; ++tap) {
      if (c == reference && tap == 0) continue;
      out(idx++) = taps(c, tap) / norm;
    }
  return out;
}

// Per-bin frame history stream for a scripted CTF: y_m[p] = sum_q
// taps(m, q) x[p - q] with a random complex excitation sequence.
class CtfFrameSource {
 public:
  CtfFrameSource(Eigen::MatrixXcd taps, unsigned seed)
      : taps_(std::move(taps)), rng_(seed) {}

  // Returns the M x Q history matrix after advancing one frame.
  Eigen::MatrixXcd next() {
    std::normal_distribution<double> g;
    x_.push_back({g(rng_), g(rng_)});
    const int channels = static_cast<int>(taps_.rows());
    const int q = static_cast<int>(taps_.cols());
    Eigen::MatrixXcd history = Eigen::MatrixXcd::Zero(channels, q);
    for (int back = 0; back < q; ++back) {
      long p = static_cast<long>(x_.size()) - 1 - back;
      for (int m = 0; m < channels; ++m) {
        std::complex<double> y{0.0, 0.0};
        for (int tap = 0; tap < q; ++tap)
          if (p - tap >= 0) y += taps_(m, tap) * x_[static_cast<std::size_t>(p - tap)];
        history(m, back) = y;
      }
    }
    return history;
  }

 private:
  Eigen::MatrixXcd taps_;
  std::mt19937_64 rng_;
  std::vector<std::complex<double>> x_;
};

// Independent batch least-squares oracle over dense cross-relation rows.
inline Eigen::VectorXcd batch_least_squares(const std::vector<Eigen::VectorXcd>& rows,
                                            const std::vector<std::complex<double>>& targets) {
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index l = rows.empty() ? 0 : rows[0].size();
  Eigen::MatrixXcd a(n, l);
  Eigen::VectorXcd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    a.row(i) = rows[static_cast<std::size_t>(i)].transpose();
    b(i) = targets[static_cast<std::size_t>(i)];
  }
  return a.colPivHouseholderQr().solve(b);
}

}  // namespace af::test
