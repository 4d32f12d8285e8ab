#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

namespace af {

using Complex = std::complex<double>;

// Multichannel sample buffer, one channel per row (each channel contiguous).
using ChannelMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Raised by configuration / input validation problems (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised by processing failures on otherwise valid configuration (exit code 3).
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr double kPi = 3.141592653589793238462643383279502884;

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

// Wraps an angle into (-180, 180].
inline double wrap_degrees(double deg) {
  double w = std::fmod(deg, 360.0);
  if (w <= -180.0) w += 360.0;
  if (w > 180.0) w -= 360.0;
  return w;
}

// Absolute circular distance between two azimuths, in [0, 180].
inline double circular_distance_deg(double a, double b) {
  return std::abs(wrap_degrees(a - b));
}

// Horizontal unit vector for an azimuth: 0 deg = +x (forward), counter-
// clockwise positive viewed from above (+z up).
inline Eigen::Vector3d azimuth_direction(double azimuth_deg) {
  double rad = deg_to_rad(azimuth_deg);
  return {std::cos(rad), std::sin(rad), 0.0};
}

}  // namespace af
