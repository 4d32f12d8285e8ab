#include "af/dprtf.hpp"

#include <limits>

namespace af {

namespace {

// Fills `row` for pair (m, n) without allocating when the blocks already
// have the right size. Blocks are ordered by channel index.
void fill_row(const Eigen::Ref<const Eigen::MatrixXcd>& history, int m, int n, int reference,
              CrossRelationRow& row) {
  if (m == n) throw std::invalid_argument("cross-relation: pair (m, m) is degenerate");
  const int channels = static_cast<int>(history.rows());
  const int taps = static_cast<int>(history.cols());
  if (m < 0 || n < 0 || m >= channels || n >= channels)
    throw std::out_of_range("cross-relation: channel index out of range");
  if (taps < 1) throw ConfigError("cross-relation: insufficient history");

  row.size = channels * taps - 1;

  // Block at channel m carries +y^n, block at channel n carries -y^m; the
  // entry multiplying the reference channel's first tap is moved, negated,
  // to the target.
  int c1 = m, c2 = n;
  double s1 = 1.0, s2 = -1.0;
  int src1 = n, src2 = m;
  if (c1 > c2) {
    std::swap(c1, c2);
    std::swap(s1, s2);
    std::swap(src1, src2);
  }

  row.start_a = reduced_block_start(c1, taps, reference);
  row.start_b = reduced_block_start(c2, taps, reference);
  const int len_a = reduced_block_length(c1, taps, reference);
  const int len_b = reduced_block_length(c2, taps, reference);
  row.block_a.resize(len_a);
  row.block_b.resize(len_b);

  row.target = Complex(0.0, 0.0);
  if (c1 == reference) {
    row.target = -s1 * history(src1, 0);
    row.block_a = s1 * history.row(src1).tail(len_a).transpose();
  } else {
    row.block_a = s1 * history.row(src1).transpose();
  }
  if (c2 == reference) {
    row.target = -s2 * history(src2, 0);
    row.block_b = s2 * history.row(src2).tail(len_b).transpose();
  } else {
    row.block_b = s2 * history.row(src2).transpose();
  }
}

}  // namespace

int reduced_block_start(int channel, int taps, int reference) {
  return channel * taps - (channel > reference ? 1 : 0);
}

int reduced_block_length(int channel, int taps, int reference) {
  return taps - (channel == reference ? 1 : 0);
}

Eigen::VectorXcd CrossRelationRow::dense() const {
  Eigen::VectorXcd full = Eigen::VectorXcd::Zero(size);
  full.segment(start_a, block_a.size()) = block_a;
  full.segment(start_b, block_b.size()) = block_b;
  return full;
}

CrossRelationRow build_cross_relation_row(const Eigen::Ref<const Eigen::MatrixXcd>& history,
                                          int m, int n, int reference) {
  CrossRelationRow row;
  fill_row(history, m, n, reference, row);
  return row;
}

RlsState::RlsState(int channels, int taps, int reference, double lambda, double epsilon)
    : channels_(channels),
      taps_(taps),
      reference_(reference),
      size_(channels * taps - 1),
      lambda_(lambda),
      epsilon_(epsilon) {
  if (channels < 2) throw ConfigError("rls: need at least 2 channels");
  if (taps < 1) throw ConfigError("rls: need at least 1 CTF tap");
  if (reference < 0 || reference >= channels) throw ConfigError("rls: reference out of range");
  if (!(lambda > 0.0 && lambda <= 1.0)) throw ConfigError("rls: lambda must be in (0, 1]");
  if (!(epsilon > 0.0)) throw ConfigError("rls: epsilon must be positive");
  h_ = Eigen::VectorXcd::Zero(size_);
  p_ = Eigen::MatrixXcd::Identity(size_, size_) * (1.0 / epsilon_);
  scratch_.resize(size_);
}

void RlsState::reset() {
  h_.setZero();
  p_ = Eigen::MatrixXcd::Identity(size_, size_) * (1.0 / epsilon_);
  fit_error_ = std::numeric_limits<double>::infinity();
  ++resets_;
}

void RlsState::rank_one_update(const CrossRelationRow& row) {
  // u = conj(regressor); pi = P u exploiting the two-block sparsity.
  conj_a_ = row.block_a.conjugate();
  conj_b_ = row.block_b.conjugate();
  scratch_.noalias() = p_.middleCols(row.start_a, conj_a_.size()) * conj_a_;
  scratch_.noalias() += p_.middleCols(row.start_b, conj_b_.size()) * conj_b_;

  // regressor . pi = u^H P u, real and nonnegative for Hermitian PSD P.
  Complex ypi = conj_a_.dot(scratch_.segment(row.start_a, conj_a_.size()));
  ypi += conj_b_.dot(scratch_.segment(row.start_b, conj_b_.size()));
  const double denom = 1.0 + ypi.real();

  Complex pred = conj_a_.dot(h_.segment(row.start_a, conj_a_.size()));
  pred += conj_b_.dot(h_.segment(row.start_b, conj_b_.size()));
  const Complex err = row.target - pred;

  h_.noalias() += scratch_ * (err / denom);
  p_.noalias() -= scratch_ * (scratch_.adjoint() / denom);
}

void RlsState::update_row(const CrossRelationRow& row, double discount) {
  if (row.size != size_) throw ConfigError("rls: row size mismatch");
  if (!(discount > 0.0 && discount <= 1.0))
    throw std::invalid_argument("rls: discount must be in (0, 1]");
  if (discount != 1.0) p_ *= 1.0 / discount;
  if (row.zero()) return;
  rank_one_update(row);
}

void RlsState::update_frame(const Eigen::Ref<const Eigen::MatrixXcd>& history) {
  if (history.rows() != channels_) throw ConfigError("rls: channel count mismatch");
  if (history.cols() != taps_) throw ConfigError("rls: insufficient history");

  if (history.isZero(0.0)) {
    // Silence: leaves both the estimate and the covariance untouched, so
    // long gaps cannot inflate P through pure forgetting.
    fit_error_ = std::numeric_limits<double>::infinity();
    return;
  }

  if (lambda_ != 1.0 && frames_seen_ > 0) p_ *= 1.0 / lambda_;

  CrossRelationRow row;
  for (int m = 0; m < channels_; ++m) {
    for (int n = m + 1; n < channels_; ++n) {
      fill_row(history, m, n, reference_, row);
      if (row.zero()) continue;
      rank_one_update(row);
    }
  }
  ++frames_seen_;

  if (!healthy()) {
    reset();
    return;
  }

  // Normalized residual of this frame's rows under the updated estimate.
  double err_sum = 0.0, target_sum = 0.0;
  for (int m = 0; m < channels_; ++m) {
    for (int n = m + 1; n < channels_; ++n) {
      fill_row(history, m, n, reference_, row);
      Complex pred =
          (row.block_a.transpose() * h_.segment(row.start_a, row.block_a.size())).value();
      pred += (row.block_b.transpose() * h_.segment(row.start_b, row.block_b.size())).value();
      err_sum += std::norm(pred - row.target);
      target_sum += std::norm(row.target);
    }
  }
  fit_error_ = target_sum > 0.0 ? err_sum / target_sum
                                : std::numeric_limits<double>::infinity();
}

bool RlsState::healthy() const {
  if (!h_.allFinite()) return false;
  for (int i = 0; i < size_; ++i) {
    double d = p_(i, i).real();
    if (!std::isfinite(d) || d <= 0.0) return false;
  }
  return true;
}

Eigen::VectorXcd RlsState::dp_rtf() const {
  Eigen::VectorXcd out(channels_ - 1);
  int idx = 0;
  for (int c = 0; c < channels_; ++c) {
    if (c == reference_) continue;
    out(idx++) = h_(reduced_block_start(c, taps_, reference_));
  }
  return out;
}

DpRtfEstimator::DpRtfEstimator(int channels, int bins, int taps, int reference, double lambda,
                               double residual_threshold, double epsilon)
    : channels_(channels), taps_(taps), residual_threshold_(residual_threshold) {
  if (bins < 1) throw ConfigError("dprtf: need at least one bin");
  states_.reserve(static_cast<std::size_t>(bins));
  history_.reserve(static_cast<std::size_t>(bins));
  for (int k = 0; k < bins; ++k) {
    states_.emplace_back(channels, taps, reference, lambda, epsilon);
    history_.emplace_back(Eigen::MatrixXcd::Zero(channels, taps));
  }
}

void DpRtfEstimator::process_bins(const SpectrogramFrame& frame, int k0, int k1) {
  if (frame.coeffs.rows() != channels_) throw ConfigError("dprtf: channel count mismatch");
  if (frame.coeffs.cols() != bins()) throw ConfigError("dprtf: bin count mismatch");
  for (int k = k0; k < k1; ++k) {
    Eigen::MatrixXcd& hist = history_[static_cast<std::size_t>(k)];
    if (taps_ > 1) {
      for (int q = taps_ - 1; q > 0; --q) hist.col(q) = hist.col(q - 1);
    }
    hist.col(0) = frame.coeffs.col(k);
    if (frame.index >= taps_ - 1) states_[static_cast<std::size_t>(k)].update_frame(hist);
  }
}

void DpRtfEstimator::extract_features(long frame_index, const std::vector<char>& bin_mask,
                                      std::vector<DpRtfFeature>& out) const {
  if (frame_index < taps_ - 1) return;  // not enough history buffered yet
  const int n = bins();
  for (int k = 0; k < n; ++k) {
    if (k >= static_cast<int>(bin_mask.size()) || !bin_mask[static_cast<std::size_t>(k)])
      continue;
    const RlsState& st = states_[static_cast<std::size_t>(k)];
    DpRtfFeature f;
    f.frame = frame_index;
    f.bin = k;
    f.values = st.dp_rtf();
    f.reliable = std::isfinite(st.last_fit_error()) &&
                 st.last_fit_error() <= residual_threshold_ && f.values.allFinite();
    out.push_back(std::move(f));
  }
}

int DpRtfEstimator::total_resets() const {
  int n = 0;
  for (const RlsState& s : states_) n += s.reset_count();
  return n;
}

}  // namespace af
