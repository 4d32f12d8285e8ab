#include "af/stft.hpp"

#include <unsupported/Eigen/FFT>

namespace af {

Eigen::VectorXd hann_window(int length) {
  Eigen::VectorXd w(length);
  for (int t = 0; t < length; ++t)
    w(t) = 0.5 - 0.5 * std::cos(2.0 * kPi * t / length);  // periodic form
  return w;
}

StftAnalyzer::StftAnalyzer(int channels, int window, int hop, double sample_rate)
    : channels_(channels), window_(window), hop_(hop), sample_rate_(sample_rate) {
  if (channels < 1) throw ConfigError("stft: need at least one channel");
  if (hop < 1) throw ConfigError("stft: hop must be >= 1");
  if (window < hop) throw ConfigError("stft: window must be >= hop");
  if (!(sample_rate > 0)) throw ConfigError("stft: sample rate must be positive");
  window_fn_ = hann_window(window);
  buffer_.resize(channels, 0);
}

void StftAnalyzer::push(const Eigen::Ref<const ChannelMatrix>& chunk) {
  if (chunk.rows() != channels_) throw ConfigError("stft: channel count mismatch on push");
  Eigen::Index old = buffer_.cols();
  buffer_.conservativeResize(Eigen::NoChange, old + chunk.cols());
  buffer_.rightCols(chunk.cols()) = chunk;
  analyze_ready();
}

void StftAnalyzer::analyze_ready() {
  static thread_local Eigen::FFT<double> fft;  // keeps plan cache across frames
  const int bins_n = bins();
  std::vector<std::complex<double>> spectrum;
  std::vector<std::complex<double>> input(static_cast<std::size_t>(window_));

  for (;;) {
    long frame_start = next_frame_ * static_cast<long>(hop_);
    long have_until = buffer_start_ + static_cast<long>(buffer_.cols());
    if (frame_start + window_ > have_until) break;

    SpectrogramFrame frame;
    frame.index = next_frame_;
    frame.t = (frame_start + window_ / 2.0) / sample_rate_;
    frame.coeffs.resize(channels_, bins_n);
    Eigen::Index off = static_cast<Eigen::Index>(frame_start - buffer_start_);
    for (int c = 0; c < channels_; ++c) {
      for (int t = 0; t < window_; ++t)
        input[static_cast<std::size_t>(t)] =
            static_cast<double>(buffer_(c, off + t)) * window_fn_(t);
      fft.fwd(spectrum, input);
      for (int k = 0; k < bins_n; ++k) frame.coeffs(c, k) = spectrum[static_cast<std::size_t>(k)];
    }
    ready_.push_back(std::move(frame));
    ++next_frame_;

    // Drop samples no longer needed by any future frame.
    long needed_from = next_frame_ * static_cast<long>(hop_);
    if (needed_from > buffer_start_) {
      Eigen::Index drop = static_cast<Eigen::Index>(needed_from - buffer_start_);
      if (drop > 0 && drop <= buffer_.cols()) {
        ChannelMatrix rest = buffer_.rightCols(buffer_.cols() - drop);
        buffer_ = rest;
        buffer_start_ = needed_from;
      }
    }
  }
}

bool StftAnalyzer::pop(SpectrogramFrame& out) {
  if (ready_.empty()) return false;
  out = std::move(ready_.front());
  ready_.pop_front();
  return true;
}

std::vector<SpectrogramFrame> stft_stream(const AudioClip& clip, int window, int hop) {
  if (clip.sample_count() < window)
    throw ConfigError("stft: clip shorter than one analysis window");
  StftAnalyzer analyzer(clip.channels(), window, hop, clip.sample_rate);
  analyzer.push(clip.samples);
  std::vector<SpectrogramFrame> frames;
  SpectrogramFrame f;
  while (analyzer.pop(f)) frames.push_back(std::move(f));
  return frames;
}

NoiseFloorGate::NoiseFloorGate(int bins, double factor) : factor_(factor) {
  if (bins < 1) throw ConfigError("noise gate: need at least one bin");
  if (factor < 0) throw ConfigError("noise gate: factor must be >= 0");
  smoothed_ = Eigen::ArrayXd::Zero(bins);
  floor_ = Eigen::ArrayXd::Zero(bins);
}

std::vector<char> NoiseFloorGate::select(const SpectrogramFrame& frame) {
  const int bins_n = static_cast<int>(smoothed_.size());
  if (frame.coeffs.cols() != bins_n) throw ConfigError("noise gate: bin count mismatch");

  Eigen::ArrayXd power = frame.coeffs.cwiseAbs2().colwise().mean().transpose().array();

  if (!primed_) {
    smoothed_ = power;
    // Start the floor well below the first frame so early signal onsets are
    // not absorbed into the noise estimate.
    floor_ = 0.05 * power;
    primed_ = true;
  } else {
    smoothed_ += 0.25 * (power - smoothed_);
    for (int k = 0; k < bins_n; ++k) {
      if (smoothed_(k) < floor_(k))
        floor_(k) = smoothed_(k);
      else
        floor_(k) = std::min(smoothed_(k),
                             std::max(floor_(k) * 1.008, floor_(k) + 0.002 * smoothed_(k)));
    }
  }

  std::vector<char> mask(static_cast<std::size_t>(bins_n), 0);
  for (int k = 0; k < bins_n; ++k)
    mask[static_cast<std::size_t>(k)] = power(k) > factor_ * floor_(k) ? 1 : 0;
  return mask;
}

std::vector<char> select_reliable_bins(const SpectrogramFrame& frame, double factor,
                                       const Eigen::ArrayXd& noise_floor) {
  const int bins_n = static_cast<int>(noise_floor.size());
  Eigen::ArrayXd power = frame.coeffs.cwiseAbs2().colwise().mean().transpose().array();
  std::vector<char> mask(static_cast<std::size_t>(bins_n), 0);
  for (int k = 0; k < bins_n; ++k)
    mask[static_cast<std::size_t>(k)] = power(k) > factor * noise_floor(k) ? 1 : 0;
  return mask;
}

}  // namespace af
