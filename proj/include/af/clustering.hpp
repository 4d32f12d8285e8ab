// Clustering of DP-RTF features with a complex Gaussian mixture over the
// candidate direction grid: per-feature likelihoods, batch and recursive
// EM weight estimation, circular peak detection and the weight-profile
// stopping rule that turns a peak into an angular obstacle region.

#pragma once

#include <Eigen/Dense>
#include <vector>

#include "af/common.hpp"
#include "af/dprtf.hpp"
#include "af/geometry.hpp"

namespace af {

// Log-likelihood of one feature under each candidate direction: the product
// over non-reference channels of isotropic complex Gaussians with the
// steering means, log N_c(a; abar, sigma2) = -|a - abar|^2/sigma2 -
// log(pi sigma2) per channel. Computed in the log domain.
Eigen::VectorXd feature_log_likelihoods(const DpRtfFeature& feature, const SteeringTable& table,
                                        double sigma2);

struct BatchEmResult {
  Eigen::VectorXd weights;
  std::vector<double> log_likelihood;  // objective after each iteration
  bool silent = false;                 // no reliable features: uniform prior
};

// Batch EM on a feature window: E-step responsibilities proportional to
// w_d N_c, M-step replaces weights with mean responsibilities.
BatchEmResult em_batch(const std::vector<DpRtfFeature>& features, const SteeringTable& table,
                       double sigma2, int iterations,
                       const Eigen::VectorXd* initial_weights = nullptr);

// Recursive EM: responsibilities of each frame are blended into the weight
// statistics with smoothing factor rho. With rho = 1 a single frame equals
// one batch EM iteration started from the current weights.
class MixtureState {
 public:
  MixtureState(int directions, double sigma2, double rho);

  // One frame of features; unreliable features are ignored, an empty frame
  // leaves the weights unchanged. Returns the number of features used.
  int update(const std::vector<DpRtfFeature>& frame_features, const SteeringTable& table);

  const Eigen::VectorXd& weights() const { return weights_; }
  double sigma2() const { return sigma2_; }
  double rho() const { return rho_; }
  long frames_absorbed() const { return frames_absorbed_; }

  void set_weights(const Eigen::VectorXd& w);

 private:
  Eigen::VectorXd weights_;
  double sigma2_;
  double rho_;
  long frames_absorbed_ = 0;
  Eigen::VectorXd frame_stats_;  // scratch
};

// Circular local maxima of the weight vector with w >= threshold, kept
// greedily in descending weight under a minimum angular separation. Ties
// break toward the lower direction index.
std::vector<int> detect_peaks(const Eigen::VectorXd& weights, double threshold,
                              double min_separation_deg, const CandidateGrid& grid);

struct AngularRegion {
  int peak = 0;   // direction index of the region center
  int left = 0;   // direction index of the left boundary (may wrap)
  int right = 0;  // direction index of the right boundary (may wrap)
};

// Walks outward from the peak until the weight profile stops decreasing or
// falls below delta * w[peak]; each scan is circular and bounded by
// `max_steps` grid cells (at most half the circle).
AngularRegion region_boundaries(const Eigen::VectorXd& weights, int peak, double delta,
                                int max_steps);

struct DetectedPeak {
  int direction = 0;
  double azimuth_deg = 0.0;
  double weight = 0.0;
};

struct SslFrame {
  long frame = 0;
  double t = 0.0;
  Eigen::VectorXd weights;
  std::vector<DetectedPeak> peaks;
  std::vector<AngularRegion> regions;
  int feature_count = 0;  // reliable features absorbed at this frame
};

}  // namespace af
