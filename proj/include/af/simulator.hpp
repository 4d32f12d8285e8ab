// Synthetic acoustic scenes with ground truth: multichannel rendering of
// moving sources by plane-wave fractional delays, optional reverberation as
// scripted per-frequency CTF taps applied in the STFT domain, and diffuse
// noise at a scripted SNR. Deterministic for a fixed seed.

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "af/common.hpp"
#include "af/geometry.hpp"
#include "af/toml.hpp"
#include "af/wav.hpp"

namespace af {

struct TrajectoryPoint {
  double t = 0.0;
  double azimuth_deg = 0.0;
  double distance_m = 1.0;
};

struct SourceSpec {
  enum class Signal { WhiteNoise, SpeechLike, WavFile };

  Signal signal = Signal::SpeechLike;
  std::string wav_path;    // for Signal::WavFile
  double onset = 0.0;      // seconds
  double offset = 1e30;    // seconds
  double level_db = 0.0;
  std::vector<TrajectoryPoint> trajectory;  // >= 1 point; piecewise linear

  // Reverberation: 0 = anechoic (time-domain fractional delays);
  // > 0 = that many synthetic CTF taps per frequency, applied in the STFT
  // domain (tap 0 is the theoretical direct path).
  int reverb_taps = 0;
  double reverb_decay = 0.6;  // per-tap magnitude decay
  double reverb_level = 0.5;  // first echo level relative to direct path

  double azimuth_at(double t) const;
  double distance_at(double t) const;
};

struct SceneScript {
  double duration = 10.0;
  double sample_rate = 16000.0;
  std::uint64_t seed = 0;
  double snr_db = std::numeric_limits<double>::infinity();  // diffuse noise
  std::vector<SourceSpec> sources;

  void validate() const;
};

SceneScript parse_scene(const toml::Table& doc);
SceneScript load_scene(const std::string& path);

struct GroundTruthEntry {
  long frame = 0;
  double t = 0.0;
  int source = 0;
  double azimuth_deg = 0.0;
  double distance_m = 0.0;
  bool voiced = false;  // amplitude envelope active at the frame center
};

struct GroundTruth {
  std::vector<GroundTruthEntry> entries;

  std::vector<const GroundTruthEntry*> at_frame(long frame) const;
  void write_csv(const std::string& path) const;
};

// Renders the scene into an M-channel clip plus per-frame ground truth
// sampled at the STFT frame centers of the given window/hop.
std::pair<AudioClip, GroundTruth> render_scene(const SceneScript& script,
                                               const ArrayGeometry& geometry,
                                               int stft_window = 256, int stft_hop = 128);

// Independent cross-correlation TDOA estimate (test oracle): the delay of
// channel m relative to channel n, seconds, with parabolic sub-sample
// interpolation. Throws RuntimeFailure on silent input.
double oracle_tdoa(const AudioClip& clip, int m, int n, double max_lag_s = 0.002);

// Deterministic Gaussian generator used by the simulator.
class GaussianRng {
 public:
  explicit GaussianRng(std::uint64_t seed) : state_(seed) {}
  double uniform();   // [0, 1)
  double gaussian();  // standard normal, Box-Muller
  std::uint64_t raw();

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace af
