// End-to-end orchestration: configuration, the streaming audio-to-SSL
// engine, camera-rate fusion, output writing and throughput reporting.

#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "af/clustering.hpp"
#include "af/common.hpp"
#include "af/dprtf.hpp"
#include "af/fusion.hpp"
#include "af/geometry.hpp"
#include "af/io.hpp"
#include "af/stft.hpp"
#include "af/toml.hpp"

namespace af {

struct PipelineParams {
  int window = 256;
  int hop = 128;
  int ctf_taps = 8;             // Q
  double lambda = 0.995;        // RLS forgetting factor
  double epsilon = 1e-2;        // RLS inverse-covariance prior 1/epsilon
  double residual_threshold = 0.5;
  double sigma2 = 0.5;          // mixture component variance
  double rho = 0.05;            // recursive EM smoothing
  double delta = 0.3;           // region stopping-rule factor
  int grid_size = 72;           // candidate directions
  double noise_floor_factor = 3.0;
  double peak_threshold = -1.0;  // < 0: defaults to 2/D
  double min_separation_deg = 15.0;
  double max_half_width_deg = 180.0;
  double freq_min_hz = 200.0;    // feature band
  double freq_max_hz = 7800.0;
  double default_range_m = 2.0;  // source range when no depth is available
  int threads = 0;               // 0: hardware concurrency (capped at 8)

  void validate() const;
  double resolved_peak_threshold() const {
    return peak_threshold >= 0.0 ? peak_threshold : 2.0 / grid_size;
  }
  int resolved_threads() const;
};

struct PipelineConfig {
  std::string audio_path;
  std::string geometry_path;
  std::string camera_path;         // optional
  std::string camera_stream_path;  // optional, requires camera_path
  std::string output_dir = "out";
  bool write_weights_csv = true;
  std::string feature_dump_path;  // optional debug CSV
  PipelineParams params;

  static PipelineConfig load(const std::string& path);
  void validate() const;  // existence of referenced files, parameter ranges
};

struct StageTimings {
  double stft_s = 0, dprtf_s = 0, clustering_s = 0, fusion_s = 0, io_s = 0, total_s = 0;
};

struct RunReport {
  long frames = 0;
  double audio_seconds = 0;
  double ssl_output_rate_hz = 0;
  double real_time_factor = 0;
  StageTimings timings;
  int rls_resets = 0;
  long camera_frames = 0;
  long rejected_camera_frames = 0;
  int threads = 1;
  int repetitions = 1;

  std::string to_json() const;
};

// Streaming audio-to-SSL engine; one SslFrame per STFT hop.
class SslEngine {
 public:
  SslEngine(const ArrayGeometry& geometry, const CandidateGrid& grid,
            const PipelineParams& params, double sample_rate);
  ~SslEngine();

  // Appends samples and forwards every completed SslFrame to the sink.
  void push_audio(const Eigen::Ref<const ChannelMatrix>& chunk,
                  const std::function<void(const SslFrame&)>& sink);

  const SteeringTable& steering() const { return table_; }
  const CandidateGrid& grid() const { return grid_; }
  int rls_resets() const { return estimator_.total_resets(); }
  double frame_rate() const { return stft_.frame_rate(); }
  StageTimings& timings() { return timings_; }

  // Per-feature debug rows (frame, bin, channel, re, im, reliable).
  void enable_feature_dump(const std::string& path);

 private:
  void process_frame(const SpectrogramFrame& frame, const std::function<void(const SslFrame&)>&);

  PipelineParams params_;
  CandidateGrid grid_;
  SteeringTable table_;
  StftAnalyzer stft_;
  NoiseFloorGate gate_;
  DpRtfEstimator estimator_;
  MixtureState mixture_;
  int band_min_bin_ = 0;
  int band_max_bin_ = 0;
  int region_max_steps_ = 0;
  StageTimings timings_;
  std::vector<DpRtfFeature> features_;  // scratch
  std::unique_ptr<class BinWorkerPool> pool_;
  std::unique_ptr<std::ofstream> feature_dump_;
};

// Camera-rate fusion against the most recent SslFrame at-or-before each
// camera timestamp.
class FusionStage {
 public:
  FusionStage(const CameraModel& camera, const CandidateGrid& grid, double default_range_m);

  void observe(const SslFrame& frame);

  struct Output {
    long camera_index = 0;
    double t = 0;
    long ssl_frame = -1;  // -1: no SSL frame yet
    ObstacleMask mask;
    std::vector<PixelRect> rects;
    std::vector<double> center_deg, left_deg, right_deg;
    std::vector<Keypoint> kept, rejected;
    bool had_keypoints = false;
  };

  Output process(const CameraStreamEntry& entry, long camera_index);

 private:
  double pick_range(const std::optional<DepthImage>& depth, double center_deg) const;

  CameraModel camera_;
  CandidateGrid grid_;
  double default_range_m_;
  std::optional<SslFrame> latest_;
};

RunReport run_offline(const PipelineConfig& config);
RunReport run_streaming(const PipelineConfig& config, bool realtime_pace = false);
RunReport benchmark(const PipelineConfig& config, int repetitions);

}  // namespace af
