#include "af/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace af {

namespace {

// Adds the posterior responsibilities of one feature to `accum` and returns
// its log-marginal, log sum_d exp(log w_d + ll_d). Shared by the batch and
// recursive paths so that both produce identical arithmetic.
double accumulate_responsibilities(const Eigen::VectorXd& log_weights,
                                   const Eigen::VectorXd& log_lik, Eigen::VectorXd& accum,
                                   Eigen::VectorXd& scratch) {
  scratch = log_weights + log_lik;
  double peak = scratch.maxCoeff();
  if (!std::isfinite(peak)) return -std::numeric_limits<double>::infinity();
  scratch = (scratch.array() - peak).exp();
  double total = scratch.sum();
  accum += scratch / total;
  return peak + std::log(total);
}

Eigen::VectorXd safe_log(const Eigen::VectorXd& w) {
  return w.array().max(0.0).log().matrix();  // log(0) = -inf is intended
}

}  // namespace

Eigen::VectorXd feature_log_likelihoods(const DpRtfFeature& feature, const SteeringTable& table,
                                        double sigma2) {
  if (!(sigma2 > 0.0)) throw ConfigError("clustering: sigma2 must be positive");
  if (feature.bin < 0 || feature.bin >= table.bins())
    throw std::out_of_range("clustering: feature bin outside steering table");
  const Eigen::MatrixXcd& means = table.at(feature.bin);
  if (feature.values.size() != means.rows())
    throw ConfigError("clustering: feature size does not match steering table");

  Eigen::VectorXd dist2 =
      (means.colwise() - feature.values).colwise().squaredNorm().transpose();
  const double channels = static_cast<double>(means.rows());
  return (-dist2.array() / sigma2 - channels * std::log(kPi * sigma2)).matrix();
}

BatchEmResult em_batch(const std::vector<DpRtfFeature>& features, const SteeringTable& table,
                       double sigma2, int iterations, const Eigen::VectorXd* initial_weights) {
  const int dirs = table.directions();
  BatchEmResult result;

  std::vector<const DpRtfFeature*> usable;
  usable.reserve(features.size());
  for (const DpRtfFeature& f : features)
    if (f.reliable) usable.push_back(&f);

  if (initial_weights) {
    if (initial_weights->size() != dirs) throw ConfigError("em: initial weight size mismatch");
    result.weights = *initial_weights;
  } else {
    result.weights = Eigen::VectorXd::Constant(dirs, 1.0 / dirs);
  }

  if (usable.empty()) {
    result.silent = true;
    return result;
  }

  Eigen::MatrixXd log_lik(dirs, static_cast<Eigen::Index>(usable.size()));
  for (std::size_t i = 0; i < usable.size(); ++i)
    log_lik.col(static_cast<Eigen::Index>(i)) =
        feature_log_likelihoods(*usable[i], table, sigma2);

  Eigen::VectorXd accum(dirs), scratch(dirs), col(dirs);
  for (int it = 0; it < iterations; ++it) {
    Eigen::VectorXd log_w = safe_log(result.weights);
    accum.setZero();
    double objective = 0.0;
    for (Eigen::Index i = 0; i < log_lik.cols(); ++i) {
      col = log_lik.col(i);
      objective += accumulate_responsibilities(log_w, col, accum, scratch);
    }
    result.log_likelihood.push_back(objective);
    result.weights = accum / static_cast<double>(usable.size());
    result.weights /= result.weights.sum();
  }
  return result;
}

MixtureState::MixtureState(int directions, double sigma2, double rho)
    : sigma2_(sigma2), rho_(rho) {
  if (directions < 1) throw ConfigError("mixture: need at least one direction");
  if (!(sigma2 > 0.0)) throw ConfigError("mixture: sigma2 must be positive");
  if (!(rho > 0.0 && rho <= 1.0)) throw ConfigError("mixture: rho must be in (0, 1]");
  weights_ = Eigen::VectorXd::Constant(directions, 1.0 / directions);
  frame_stats_.resize(directions);
}

void MixtureState::set_weights(const Eigen::VectorXd& w) {
  if (w.size() != weights_.size()) throw ConfigError("mixture: weight size mismatch");
  weights_ = w;
  weights_ /= weights_.sum();
}

int MixtureState::update(const std::vector<DpRtfFeature>& frame_features,
                         const SteeringTable& table) {
  if (table.directions() != weights_.size())
    throw ConfigError("mixture: steering table direction count mismatch");

  Eigen::VectorXd log_w = safe_log(weights_);
  Eigen::VectorXd accum = Eigen::VectorXd::Zero(weights_.size());
  Eigen::VectorXd scratch(weights_.size());
  int used = 0;
  for (const DpRtfFeature& f : frame_features) {
    if (!f.reliable) continue;
    Eigen::VectorXd ll = feature_log_likelihoods(f, table, sigma2_);
    double lm = accumulate_responsibilities(log_w, ll, accum, scratch);
    if (std::isfinite(lm)) ++used;
  }
  if (used == 0) return 0;

  frame_stats_ = accum / static_cast<double>(used);
  weights_ = (1.0 - rho_) * weights_ + rho_ * frame_stats_;
  weights_ /= weights_.sum();
  ++frames_absorbed_;
  return used;
}

std::vector<int> detect_peaks(const Eigen::VectorXd& weights, double threshold,
                              double min_separation_deg, const CandidateGrid& grid) {
  const int dirs = static_cast<int>(weights.size());
  if (grid.size() != dirs) throw ConfigError("detect_peaks: grid size mismatch");

  std::vector<int> candidates;
  for (int d = 0; d < dirs; ++d) {
    double w = weights(d);
    if (w < threshold) continue;
    if (dirs > 1) {
      double prev = weights((d + dirs - 1) % dirs);
      double next = weights((d + 1) % dirs);
      if (w < prev || w < next) continue;
    }
    candidates.push_back(d);
  }

  std::sort(candidates.begin(), candidates.end(), [&](int a, int b) {
    if (weights(a) != weights(b)) return weights(a) > weights(b);
    return a < b;  // deterministic tie-break toward the lower index
  });

  std::vector<int> kept;
  for (int d : candidates) {
    bool ok = true;
    for (int other : kept) {
      if (circular_distance_deg(grid.azimuth_deg(d), grid.azimuth_deg(other)) <
          min_separation_deg) {
        ok = false;
        break;
      }
    }
    if (ok) kept.push_back(d);
  }
  return kept;
}

AngularRegion region_boundaries(const Eigen::VectorXd& weights, int peak, double delta,
                                int max_steps) {
  const int dirs = static_cast<int>(weights.size());
  if (peak < 0 || peak >= dirs) throw std::out_of_range("region: peak index out of range");
  if (!(delta >= 0.0 && delta <= 1.0)) throw ConfigError("region: delta must be in [0, 1]");
  const int bound = std::min(max_steps, dirs / 2);  // at most half the circle per side
  const double floor_w = delta * weights(peak);

  AngularRegion region;
  region.peak = peak;

  int d = peak;
  for (int step = 0; step < bound; ++step) {
    int next = (d + 1) % dirs;
    if (weights(next) >= weights(d) || weights(next) < floor_w) break;
    d = next;
  }
  region.right = d;

  d = peak;
  for (int step = 0; step < bound; ++step) {
    int prev = (d + dirs - 1) % dirs;
    if (weights(prev) >= weights(d) || weights(prev) < floor_w) break;
    d = prev;
  }
  region.left = d;
  return region;
}

}  // namespace af
