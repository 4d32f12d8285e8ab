// Direct-path relative transfer function estimation.
//
// Per frequency bin, the convolutive transfer functions of all channels are
// estimated blindly from pairwise cross-relations between microphone
// signals, solved by exponentially-forgetting recursive least squares under
// the constraint that the reference channel's first CTF tap equals one. The
// first-tap entries of the non-reference channels are the DP-RTF
// localization features.

#pragma once

#include <Eigen/Dense>
#include <vector>

#include "af/common.hpp"
#include "af/stft.hpp"

namespace af {

struct DpRtfFeature {
  long frame = 0;
  int bin = 0;
  Eigen::VectorXcd values;  // M-1 entries, non-reference channels ascending
  bool reliable = false;
};

// One pairwise cross-relation equation at a single bin, in reduced form:
// regressor . h_tilde = target, with the reference channel's first-tap
// entry removed from the regressor and moved (negated) to the target.
// The regressor is nonzero only on the two channel blocks of the pair.
struct CrossRelationRow {
  int size = 0;           // M*Q - 1
  int start_a = 0;        // reduced-vector offsets of the two blocks
  int start_b = 0;
  Eigen::VectorXcd block_a;  // values at the pair's first channel block
  Eigen::VectorXcd block_b;  // values at the pair's second channel block
  Complex target{0.0, 0.0};

  Eigen::VectorXcd dense() const;
  bool zero() const { return block_a.isZero(0.0) && block_b.isZero(0.0); }
};

// Reduced-vector offset of channel `c`'s block once the reference first tap
// is removed, and its length (Q - 1 for the reference channel).
int reduced_block_start(int channel, int taps, int reference);
int reduced_block_length(int channel, int taps, int reference);

// Builds the cross-relation row for pair (m, n) from the Q most recent
// frames of one bin. `history` is M x Q with column q holding frame p - q.
// Throws std::invalid_argument for m == n and ConfigError when fewer than Q
// frames are available (history has fewer columns).
CrossRelationRow build_cross_relation_row(const Eigen::Ref<const Eigen::MatrixXcd>& history,
                                          int m, int n, int reference);

// Exponentially-forgetting RLS over cross-relation rows of one bin.
class RlsState {
 public:
  RlsState(int channels, int taps, int reference, double lambda, double epsilon = 1e-2);

  // One row, classic RLS step with per-row discount (1 = no forgetting).
  void update_row(const CrossRelationRow& row, double discount = 1.0);

  // One frame: applies the forgetting factor once, then feeds all
  // M(M-1)/2 pairs in lexicographic order. All-zero history is a no-op.
  // Recomputes the frame's normalized residual with the updated estimate.
  void update_frame(const Eigen::Ref<const Eigen::MatrixXcd>& history);

  const Eigen::VectorXcd& estimate() const { return h_; }
  const Eigen::MatrixXcd& inverse_covariance() const { return p_; }

  // DP-RTF feature: first-tap entries of the non-reference channels.
  Eigen::VectorXcd dp_rtf() const;

  // Sum |e|^2 / sum |z|^2 over the last processed frame's rows, with the
  // post-update estimate; +inf before any frame or on a silent frame.
  double last_fit_error() const { return fit_error_; }

  long frames_seen() const { return frames_seen_; }
  int reset_count() const { return resets_; }
  double lambda() const { return lambda_; }

  void reset();

 private:
  void rank_one_update(const CrossRelationRow& row);
  bool healthy() const;

  int channels_;
  int taps_;
  int reference_;
  int size_;
  double lambda_;
  double epsilon_;
  Eigen::VectorXcd h_;
  Eigen::MatrixXcd p_;
  Eigen::VectorXcd scratch_;
  Eigen::VectorXcd conj_a_, conj_b_;
  double fit_error_ = std::numeric_limits<double>::infinity();
  long frames_seen_ = 0;
  int resets_ = 0;
};

// Per-bin estimator bank with signal history management. Bins are fully
// independent; disjoint bin ranges may be processed concurrently.
class DpRtfEstimator {
 public:
  DpRtfEstimator(int channels, int bins, int taps, int reference, double lambda,
                 double residual_threshold, double epsilon = 1e-2);

  // Advances bins [k0, k1) with the new frame (history shift + RLS update).
  void process_bins(const SpectrogramFrame& frame, int k0, int k1);

  // Emits one feature per selected bin once enough history has accumulated;
  // reliability = fit error within threshold.
  void extract_features(long frame_index, const std::vector<char>& bin_mask,
                        std::vector<DpRtfFeature>& out) const;

  const RlsState& state(int k) const { return states_[static_cast<std::size_t>(k)]; }
  int bins() const { return static_cast<int>(states_.size()); }
  int total_resets() const;

 private:
  int channels_;
  int taps_;
  double residual_threshold_;
  std::vector<RlsState> states_;
  std::vector<Eigen::MatrixXcd> history_;  // per bin, M x Q
  long frames_fed_ = 0;
};

}  // namespace af
