#include "af/geometry.hpp"

#include <cmath>

namespace af {

double ArrayGeometry::aperture() const {
  double best = 0.0;
  for (int a = 0; a < mic_count(); ++a)
    for (int b = a + 1; b < mic_count(); ++b)
      best = std::max(best, (mic_positions.col(a) - mic_positions.col(b)).norm());
  return best;
}

void ArrayGeometry::validate() const {
  const int m = mic_count();
  if (m < 2) throw ConfigError("geometry: need at least 2 microphones, got " + std::to_string(m));
  if (reference < 0 || reference >= m)
    throw ConfigError("geometry: reference index " + std::to_string(reference) +
                      " out of range [0, " + std::to_string(m) + ")");
  if (!mic_positions.allFinite()) throw ConfigError("geometry: non-finite microphone coordinate");
  if (!(speed_of_sound > 0.0)) throw ConfigError("geometry: speed_of_sound must be positive");
  for (int a = 0; a < m; ++a)
    for (int b = a + 1; b < m; ++b)
      if ((mic_positions.col(a) - mic_positions.col(b)).norm() == 0.0)
        throw ConfigError("geometry: microphones " + std::to_string(a) + " and " +
                          std::to_string(b) + " share identical coordinates");
}

ArrayGeometry parse_geometry(const toml::Table& doc) {
  ArrayGeometry g;
  const auto& mics = doc.at("mics").as_array();
  g.mic_positions.resize(3, static_cast<Eigen::Index>(mics.size()));
  for (std::size_t i = 0; i < mics.size(); ++i) {
    std::vector<double> p = mics[i].as_double_array();
    if (p.size() != 3)
      throw ConfigError("geometry: mic " + std::to_string(i) + " must have 3 coordinates");
    g.mic_positions.col(static_cast<Eigen::Index>(i)) = Eigen::Vector3d(p[0], p[1], p[2]);
  }
  g.reference = static_cast<int>(doc.get_int("reference", 0));
  g.speed_of_sound = doc.get_double("speed_of_sound", 343.0);
  g.validate();
  return g;
}

ArrayGeometry load_geometry(const std::string& path) {
  try {
    return parse_geometry(toml::parse_file(path));
  } catch (const toml::ParseError& e) {
    throw ConfigError("geometry '" + path + "': " + e.what());
  }
}

CandidateGrid::CandidateGrid(Eigen::VectorXd azimuths_deg, double spacing_deg)
    : azimuths_deg_(std::move(azimuths_deg)), spacing_deg_(spacing_deg) {
  validate();
}

CandidateGrid CandidateGrid::uniform(int count) {
  if (count < 1) throw ConfigError("grid: need at least one direction");
  double spacing = 360.0 / count;
  Eigen::VectorXd az(count);
  for (int d = 0; d < count; ++d) az(d) = 180.0 - spacing * (count - 1 - d);
  return CandidateGrid(std::move(az), spacing);
}

void CandidateGrid::validate() const {
  const int d = size();
  if (d < 1) throw ConfigError("grid: empty");
  for (int i = 0; i < d; ++i) {
    double a = azimuths_deg_(i);
    if (!(a > -180.0 && a <= 180.0))
      throw ConfigError("grid: azimuth " + std::to_string(a) + " outside (-180, 180]");
  }
  for (int i = 1; i < d; ++i) {
    double step = azimuths_deg_(i) - azimuths_deg_(i - 1);
    if (step <= 0.0) throw ConfigError("grid: azimuths not strictly increasing");
    if (std::abs(step - spacing_deg_) > 1e-9) throw ConfigError("grid: non-uniform spacing");
  }
  // Circular closure: last + spacing wraps to first.
  double wrapped = wrap_degrees(azimuths_deg_(d - 1) + spacing_deg_);
  if (d > 1 && std::abs(wrapped - azimuths_deg_(0)) > 1e-9)
    throw ConfigError("grid: spacing does not close the circle");
}

int CandidateGrid::nearest(double azimuth_deg) const {
  int best = 0;
  double best_dist = 1e300;
  for (int i = 0; i < size(); ++i) {
    double dist = circular_distance_deg(azimuth_deg, azimuths_deg_(i));
    if (dist < best_dist) {
      best_dist = dist;
      best = i;
    }
  }
  return best;
}

double far_field_tdoa(const ArrayGeometry& geometry, double azimuth_deg, int channel) {
  if (channel < 0 || channel >= geometry.mic_count())
    throw std::out_of_range("far_field_tdoa: channel out of range");
  Eigen::Vector3d u = azimuth_direction(azimuth_deg);
  Eigen::Vector3d baseline =
      geometry.mic_positions.col(geometry.reference) - geometry.mic_positions.col(channel);
  return u.dot(baseline) / geometry.speed_of_sound;
}

SteeringTable::SteeringTable(std::vector<Eigen::MatrixXcd> means, std::vector<int> channels,
                             Eigen::VectorXd freqs_hz, int reference)
    : means_(std::move(means)),
      channels_(std::move(channels)),
      freqs_hz_(std::move(freqs_hz)),
      reference_(reference) {}

SteeringTable compute_steering_table(const ArrayGeometry& geometry, const CandidateGrid& grid,
                                     int bins, double sample_rate) {
  if (bins < 1) throw ConfigError("steering table: need at least one bin");
  if (!(sample_rate > 0.0)) throw ConfigError("steering table: sample rate must be positive");
  geometry.validate();

  const int m = geometry.mic_count();
  const int d = grid.size();

  std::vector<int> channels;
  channels.reserve(m - 1);
  for (int c = 0; c < m; ++c)
    if (c != geometry.reference) channels.push_back(c);

  // TDOA per (non-reference channel, direction); frequency only scales phase.
  Eigen::MatrixXd tdoa(m - 1, d);
  for (std::size_t row = 0; row < channels.size(); ++row)
    for (int j = 0; j < d; ++j)
      tdoa(static_cast<Eigen::Index>(row), j) =
          far_field_tdoa(geometry, grid.azimuth_deg(j), channels[row]);

  Eigen::VectorXd freqs(bins);
  for (int k = 0; k < bins; ++k)
    freqs(k) = (bins == 1) ? 0.0 : k * sample_rate / (2.0 * (bins - 1));

  std::vector<Eigen::MatrixXcd> means(static_cast<std::size_t>(bins));
  for (int k = 0; k < bins; ++k) {
    const double omega = -2.0 * kPi * freqs(k);
    means[static_cast<std::size_t>(k)] =
        (Complex(0.0, 1.0) * omega * tdoa.array()).exp().matrix();
  }
  return SteeringTable(std::move(means), std::move(channels), std::move(freqs),
                       geometry.reference);
}

}  // namespace af
