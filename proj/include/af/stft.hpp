// Streaming multichannel STFT analysis and the per-bin noise-floor gate
// that selects usable time-frequency bins.

#pragma once

#include <Eigen/Dense>
#include <deque>
#include <vector>

#include "af/common.hpp"
#include "af/wav.hpp"

namespace af {

struct SpectrogramFrame {
  long index = 0;
  double t = 0.0;            // seconds at the window center
  Eigen::MatrixXcd coeffs;   // M channels x K bins
};

// Periodic Hann analysis window of the given length.
Eigen::VectorXd hann_window(int length);

class StftAnalyzer {
 public:
  StftAnalyzer(int channels, int window, int hop, double sample_rate);

  // Appends samples (M x n); frames become available once a full window has
  // accumulated, advancing by `hop` samples each.
  void push(const Eigen::Ref<const ChannelMatrix>& chunk);

  // Pops the next completed frame in order; false when none is pending.
  bool pop(SpectrogramFrame& out);

  int bins() const { return window_ / 2 + 1; }
  int window() const { return window_; }
  int hop() const { return hop_; }
  double frame_rate() const { return sample_rate_ / hop_; }
  long frames_emitted() const { return next_frame_; }

 private:
  void analyze_ready();

  int channels_;
  int window_;
  int hop_;
  double sample_rate_;
  Eigen::VectorXd window_fn_;
  ChannelMatrix buffer_;  // grows by hop multiples, trimmed as consumed
  long buffer_start_ = 0;  // absolute sample index of buffer_ column 0
  long next_frame_ = 0;
  std::deque<SpectrogramFrame> ready_;
};

// Whole-clip analysis. Frame count = floor((T - window)/hop) + 1; throws
// ConfigError if the clip is shorter than one window.
std::vector<SpectrogramFrame> stft_stream(const AudioClip& clip, int window, int hop);

// Recursive per-bin noise-floor estimate with a slow-rise / fast-fall
// characteristic; a bin is usable when its channel-averaged power exceeds
// `factor` times the floor.
class NoiseFloorGate {
 public:
  NoiseFloorGate(int bins, double factor);

  // Updates the floor with this frame and returns the usable-bin mask.
  std::vector<char> select(const SpectrogramFrame& frame);

  const Eigen::ArrayXd& noise_floor() const { return floor_; }
  double factor() const { return factor_; }

 private:
  double factor_;
  Eigen::ArrayXd smoothed_;
  Eigen::ArrayXd floor_;
  bool primed_ = false;
};

// One-shot form of the gate for a caller-managed floor estimate.
std::vector<char> select_reliable_bins(const SpectrogramFrame& frame, double factor,
                                       const Eigen::ArrayXd& noise_floor);

}  // namespace af
