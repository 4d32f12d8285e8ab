// Microphone-array geometry, the candidate direction grid and the
// precomputed steering table of theoretical direct-path relative transfer
// functions used as clustering means.

#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "af/common.hpp"
#include "af/toml.hpp"

namespace af {

struct ArrayGeometry {
  Eigen::Matrix3Xd mic_positions;  // meters, one column per microphone
  int reference = 0;
  double speed_of_sound = 343.0;

  int mic_count() const { return static_cast<int>(mic_positions.cols()); }

  // Largest inter-microphone distance, meters.
  double aperture() const;

  // Throws ConfigError on M < 2, duplicate positions, non-finite
  // coordinates, reference out of range or non-positive speed of sound.
  void validate() const;
};

ArrayGeometry parse_geometry(const toml::Table& doc);
ArrayGeometry load_geometry(const std::string& path);

class CandidateGrid {
 public:
  // Uniform circular grid covering (-180, 180]; the last angle is 180.
  static CandidateGrid uniform(int count);

  CandidateGrid(Eigen::VectorXd azimuths_deg, double spacing_deg);

  int size() const { return static_cast<int>(azimuths_deg_.size()); }
  double spacing_deg() const { return spacing_deg_; }
  double azimuth_deg(int d) const { return azimuths_deg_(d); }
  const Eigen::VectorXd& azimuths_deg() const { return azimuths_deg_; }

  // Grid index whose azimuth is circularly closest to `azimuth_deg`.
  int nearest(double azimuth_deg) const;

  void validate() const;

 private:
  Eigen::VectorXd azimuths_deg_;
  double spacing_deg_ = 0.0;
};

// Plane-wave far-field time difference of arrival of channel m relative to
// the reference channel, seconds: tau = u(az) . (pos_r - pos_m) / c.
double far_field_tdoa(const ArrayGeometry& geometry, double azimuth_deg, int channel);

// Theoretical DP-RTF means, exp(-j 2 pi f_k tau^{m,d}), per frequency bin,
// non-reference channel and candidate direction. All entries unit modulus.
class SteeringTable {
 public:
  SteeringTable() = default;
  SteeringTable(std::vector<Eigen::MatrixXcd> means, std::vector<int> channels,
                Eigen::VectorXd freqs_hz, int reference);

  int bins() const { return static_cast<int>(means_.size()); }
  int directions() const { return bins() == 0 ? 0 : static_cast<int>(means_[0].cols()); }
  int feature_size() const { return static_cast<int>(channels_.size()); }
  int reference() const { return reference_; }

  // (M-1) x D matrix of means for bin k; row order = non-reference channels
  // ascending.
  const Eigen::MatrixXcd& at(int k) const { return means_[k]; }
  double freq_hz(int k) const { return freqs_hz_(k); }
  const std::vector<int>& channels() const { return channels_; }

 private:
  std::vector<Eigen::MatrixXcd> means_;  // per bin
  std::vector<int> channels_;            // non-reference channel ids
  Eigen::VectorXd freqs_hz_;
  int reference_ = 0;
};

// f_k = k * sample_rate / (2 (K - 1)), i.e. the bin centers of a real STFT
// with window length 2 (K - 1).
SteeringTable compute_steering_table(const ArrayGeometry& geometry,
                                     const CandidateGrid& grid, int bins,
                                     double sample_rate);

}  // namespace af
