#include "af/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

#include "af/bin_worker_pool.hpp"
#include "af/simulator.hpp"
#include "json.hpp"

namespace af {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

class StageTimer {
 public:
  explicit StageTimer(double& sink) : sink_(sink), t0_(Clock::now()) {}
  ~StageTimer() { sink_ += seconds_since(t0_); }

 private:
  double& sink_;
  Clock::time_point t0_;
};

std::string resolve_path(const fs::path& base, const std::string& p) {
  if (p.empty()) return p;
  fs::path q(p);
  return q.is_absolute() ? q.string() : (base / q).string();
}

nlohmann::json ssl_frame_json(const SslFrame& f, const CandidateGrid& grid) {
  nlohmann::json peaks = nlohmann::json::array();
  for (const DetectedPeak& p : f.peaks)
    peaks.push_back({{"d", p.direction}, {"deg", p.azimuth_deg}, {"w", p.weight}});
  nlohmann::json regions = nlohmann::json::array();
  for (const AngularRegion& r : f.regions)
    regions.push_back({{"d", r.peak},
                       {"left", r.left},
                       {"right", r.right},
                       {"center_deg", grid.azimuth_deg(r.peak)},
                       {"left_deg", grid.azimuth_deg(r.left)},
                       {"right_deg", grid.azimuth_deg(r.right)}});
  std::vector<double> w(f.weights.data(), f.weights.data() + f.weights.size());
  return nlohmann::json{{"frame", f.frame}, {"t", f.t},       {"n", f.feature_count},
                        {"weights", w},     {"peaks", peaks}, {"regions", regions}};
}

}  // namespace

void PipelineParams::validate() const {
  if (hop < 1) throw ConfigError("params: hop must be >= 1");
  if (window < hop) throw ConfigError("params: window must be >= hop");
  if (ctf_taps < 1) throw ConfigError("params: ctf_taps must be >= 1");
  if (!(lambda > 0.0 && lambda <= 1.0)) throw ConfigError("params: lambda must be in (0, 1]");
  if (!(epsilon > 0.0)) throw ConfigError("params: epsilon must be positive");
  if (!(sigma2 > 0.0)) throw ConfigError("params: sigma2 must be positive");
  if (!(rho > 0.0 && rho <= 1.0)) throw ConfigError("params: rho must be in (0, 1]");
  if (!(delta >= 0.0 && delta <= 1.0)) throw ConfigError("params: delta must be in [0, 1]");
  if (grid_size < 1) throw ConfigError("params: grid_size must be >= 1");
  if (noise_floor_factor < 0) throw ConfigError("params: noise_floor_factor must be >= 0");
  if (min_separation_deg < 0) throw ConfigError("params: min_separation_deg must be >= 0");
  if (max_half_width_deg < 0) throw ConfigError("params: max_half_width_deg must be >= 0");
  if (!(default_range_m > 0)) throw ConfigError("params: default_range_m must be positive");
  if (threads < 0) throw ConfigError("params: threads must be >= 0");
  if (residual_threshold < 0) throw ConfigError("params: residual_threshold must be >= 0");
}

int PipelineParams::resolved_threads() const {
  if (threads > 0) return threads;
  unsigned hw = std::thread::hardware_concurrency();
  return static_cast<int>(std::min(8u, std::max(1u, hw)));
}

PipelineConfig PipelineConfig::load(const std::string& path) {
  toml::Table doc;
  try {
    doc = toml::parse_file(path);
  } catch (const toml::ParseError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  fs::path base = fs::path(path).parent_path();

  PipelineConfig cfg;
  if (doc.has_table("input")) {
    const toml::Table& in = doc.table("input");
    cfg.audio_path = resolve_path(base, in.get_string("audio", ""));
    cfg.geometry_path = resolve_path(base, in.get_string("geometry", ""));
    cfg.camera_path = resolve_path(base, in.get_string("camera", ""));
    cfg.camera_stream_path = resolve_path(base, in.get_string("camera_stream", ""));
  }
  if (doc.has_table("params")) {
    const toml::Table& p = doc.table("params");
    PipelineParams& par = cfg.params;
    par.window = static_cast<int>(p.get_int("window", par.window));
    par.hop = static_cast<int>(p.get_int("hop", par.hop));
    par.ctf_taps = static_cast<int>(p.get_int("ctf_taps", par.ctf_taps));
    par.lambda = p.get_double("lambda", par.lambda);
    par.epsilon = p.get_double("epsilon", par.epsilon);
    par.residual_threshold = p.get_double("residual_threshold", par.residual_threshold);
    par.sigma2 = p.get_double("sigma2", par.sigma2);
    par.rho = p.get_double("rho", par.rho);
    par.delta = p.get_double("delta", par.delta);
    par.grid_size = static_cast<int>(p.get_int("grid_size", par.grid_size));
    par.noise_floor_factor = p.get_double("noise_floor_factor", par.noise_floor_factor);
    par.peak_threshold = p.get_double("peak_threshold", par.peak_threshold);
    par.min_separation_deg = p.get_double("min_separation_deg", par.min_separation_deg);
    par.max_half_width_deg = p.get_double("max_half_width_deg", par.max_half_width_deg);
    par.freq_min_hz = p.get_double("freq_min_hz", par.freq_min_hz);
    par.freq_max_hz = p.get_double("freq_max_hz", par.freq_max_hz);
    par.default_range_m = p.get_double("default_range_m", par.default_range_m);
    par.threads = static_cast<int>(p.get_int("threads", par.threads));
  }
  if (doc.has_table("output")) {
    const toml::Table& o = doc.table("output");
    cfg.output_dir = resolve_path(base, o.get_string("dir", cfg.output_dir));
    cfg.write_weights_csv = o.get_bool("weights_csv", cfg.write_weights_csv);
    cfg.feature_dump_path = resolve_path(base, o.get_string("feature_dump", ""));
  }
  return cfg;
}

void PipelineConfig::validate() const {
  params.validate();
  if (audio_path.empty()) throw ConfigError("config: input.audio is required");
  if (!fs::exists(audio_path)) throw ConfigError("config: audio file '" + audio_path + "' not found");
  if (geometry_path.empty()) throw ConfigError("config: input.geometry is required");
  if (!fs::exists(geometry_path))
    throw ConfigError("config: geometry file '" + geometry_path + "' not found");
  if (!camera_path.empty() && !fs::exists(camera_path))
    throw ConfigError("config: camera file '" + camera_path + "' not found");
  if (!camera_stream_path.empty()) {
    if (camera_path.empty())
      throw ConfigError("config: camera_stream requires a camera model");
    if (!fs::exists(camera_stream_path))
      throw ConfigError("config: camera stream '" + camera_stream_path + "' not found");
  }
  if (output_dir.empty()) throw ConfigError("config: output.dir is required");
}

std::string RunReport::to_json() const {
  nlohmann::json j{{"frames", frames},
                   {"audio_seconds", audio_seconds},
                   {"ssl_output_rate_hz", ssl_output_rate_hz},
                   {"real_time_factor", real_time_factor},
                   {"timings",
                    {{"stft_s", timings.stft_s},
                     {"dprtf_s", timings.dprtf_s},
                     {"clustering_s", timings.clustering_s},
                     {"fusion_s", timings.fusion_s},
                     {"io_s", timings.io_s},
                     {"total_s", timings.total_s}}},
                   {"rls_resets", rls_resets},
                   {"camera_frames", camera_frames},
                   {"rejected_camera_frames", rejected_camera_frames},
                   {"threads", threads},
                   {"repetitions", repetitions}};
  return j.dump(2);
}

SslEngine::SslEngine(const ArrayGeometry& geometry, const CandidateGrid& grid,
                     const PipelineParams& params, double sample_rate)
    : params_(params),
      grid_(grid),
      table_(compute_steering_table(geometry, grid, params.window / 2 + 1, sample_rate)),
      stft_(geometry.mic_count(), params.window, params.hop, sample_rate),
      gate_(params.window / 2 + 1, params.noise_floor_factor),
      estimator_(geometry.mic_count(), params.window / 2 + 1, params.ctf_taps,
                 geometry.reference, params.lambda, params.residual_threshold, params.epsilon),
      mixture_(grid.size(), params.sigma2, params.rho) {
  const int bins = params.window / 2 + 1;
  const double nyquist = sample_rate / 2.0;
  band_min_bin_ = std::max(
      0, static_cast<int>(std::ceil(params.freq_min_hz / nyquist * (bins - 1))));
  band_max_bin_ = bins - 1;
  if (params.freq_max_hz > 0 && params.freq_max_hz < nyquist)
    band_max_bin_ = static_cast<int>(std::floor(params.freq_max_hz / nyquist * (bins - 1)));
  band_min_bin_ = std::min(band_min_bin_, bins - 1);
  band_max_bin_ = std::max(band_max_bin_, band_min_bin_);

  region_max_steps_ = std::min(
      grid.size() / 2,
      static_cast<int>(std::lround(params.max_half_width_deg / grid.spacing_deg())));

  int threads = params.resolved_threads();
  if (threads > 1) pool_ = std::make_unique<BinWorkerPool>(threads, bins);
}

SslEngine::~SslEngine() = default;

void SslEngine::enable_feature_dump(const std::string& path) {
  feature_dump_ = std::make_unique<std::ofstream>(path);
  if (!*feature_dump_) throw RuntimeFailure("cannot write feature dump '" + path + "'");
  *feature_dump_ << "frame,bin,channel,re,im,reliable\n";
}

void SslEngine::push_audio(const Eigen::Ref<const ChannelMatrix>& chunk,
                           const std::function<void(const SslFrame&)>& sink) {
  {
    StageTimer timer(timings_.stft_s);
    stft_.push(chunk);
  }
  SpectrogramFrame frame;
  for (;;) {
    {
      StageTimer timer(timings_.stft_s);
      if (!stft_.pop(frame)) break;
    }
    process_frame(frame, sink);
  }
}

void SslEngine::process_frame(const SpectrogramFrame& frame,
                              const std::function<void(const SslFrame&)>& sink) {
  std::vector<char> mask;
  {
    StageTimer timer(timings_.stft_s);
    mask = gate_.select(frame);
    for (int k = 0; k < static_cast<int>(mask.size()); ++k)
      if (k < band_min_bin_ || k > band_max_bin_) mask[static_cast<std::size_t>(k)] = 0;
  }

  {
    StageTimer timer(timings_.dprtf_s);
    if (pool_) {
      pool_->run([&](int k0, int k1) { estimator_.process_bins(frame, k0, k1); });
    } else {
      estimator_.process_bins(frame, 0, estimator_.bins());
    }
  }

  SslFrame out;
  {
    StageTimer timer(timings_.clustering_s);
    features_.clear();
    estimator_.extract_features(frame.index, mask, features_);

    if (feature_dump_) {
      char buf[128];
      for (const DpRtfFeature& f : features_) {
        for (int c = 0; c < f.values.size(); ++c) {
          std::snprintf(buf, sizeof(buf), "%ld,%d,%d,%.9g,%.9g,%d\n", f.frame, f.bin, c,
                        f.values(c).real(), f.values(c).imag(), f.reliable ? 1 : 0);
          *feature_dump_ << buf;
        }
      }
    }

    out.feature_count = mixture_.update(features_, table_);
    out.frame = frame.index;
    out.t = frame.t;
    out.weights = mixture_.weights();

    std::vector<int> peaks = detect_peaks(out.weights, params_.resolved_peak_threshold(),
                                          params_.min_separation_deg, grid_);
    for (int d : peaks) {
      out.peaks.push_back({d, grid_.azimuth_deg(d), out.weights(d)});
      out.regions.push_back(
          region_boundaries(out.weights, d, params_.delta, region_max_steps_));
    }
  }
  sink(out);
}

FusionStage::FusionStage(const CameraModel& camera, const CandidateGrid& grid,
                         double default_range_m)
    : camera_(camera), grid_(grid), default_range_m_(default_range_m) {
  camera_.validate();
}

void FusionStage::observe(const SslFrame& frame) { latest_ = frame; }

double FusionStage::pick_range(const std::optional<DepthImage>& depth,
                               double center_deg) const {
  if (!depth) return default_range_m_;
  ColumnProjection far_proj = azimuth_to_column(center_deg, camera_);
  if (far_proj.clamped) return default_range_m_;
  int u0 = static_cast<int>(std::lround(far_proj.column));
  int v0 = camera_.height / 2;
  std::vector<float> vals;
  for (int dv = -2; dv <= 2; ++dv)
    for (int du = -2; du <= 2; ++du) {
      int u = u0 + du, v = v0 + dv;
      if (u < 0 || v < 0 || u >= depth->width || v >= depth->height) continue;
      float z = depth->at(u, v);
      if (z > 0.0f) vals.push_back(z);
    }
  if (vals.empty()) return default_range_m_;
  std::nth_element(vals.begin(), vals.begin() + vals.size() / 2, vals.end());
  return vals[vals.size() / 2];
}

FusionStage::Output FusionStage::process(const CameraStreamEntry& entry, long camera_index) {
  Output out;
  out.camera_index = camera_index;
  out.t = entry.t;

  std::optional<DepthImage> depth;
  if (!entry.depth_path.empty()) {
    DepthImage d = read_depth_pgm(entry.depth_path);
    if (d.width != camera_.width || d.height != camera_.height)
      throw ConfigError("camera frame " + std::to_string(camera_index) +
                        ": depth size does not match the camera model");
    depth = std::move(d);
  }

  std::vector<PixelRect> rects;
  if (latest_) {
    out.ssl_frame = latest_->frame;
    for (const AngularRegion& region : latest_->regions) {
      double center = grid_.azimuth_deg(region.peak);
      double left = grid_.azimuth_deg(region.left);
      double right = grid_.azimuth_deg(region.right);
      double range = pick_range(depth, center);
      rects.push_back(region_to_rectangle(center, left, right, camera_, range));
      out.center_deg.push_back(center);
      out.left_deg.push_back(left);
      out.right_deg.push_back(right);
    }
  }
  out.rects = rects;
  out.mask = ObstacleMask::from_rects(camera_index, camera_.width, camera_.height, rects);

  if (!entry.keypoints_path.empty()) {
    out.had_keypoints = true;
    std::vector<Keypoint> kps = read_keypoints_csv(entry.keypoints_path);
    out.kept = filter_features(kps, out.mask);
    for (const Keypoint& kp : kps) {
      bool was_kept = false;
      for (const Keypoint& k2 : out.kept)
        if (k2.u == kp.u && k2.v == kp.v) {
          was_kept = true;
          break;
        }
      if (!was_kept) out.rejected.push_back(kp);
    }
  }
  return out;
}

namespace {

struct CameraStream {
  std::vector<CameraStreamEntry> entries;
  long rejected = 0;
};

CameraStream load_camera_stream_checked(const std::string& path) {
  CameraStream out;
  if (path.empty()) return out;
  double prev = -std::numeric_limits<double>::infinity();
  for (CameraStreamEntry& e : read_camera_stream(path)) {
    if (e.t < prev) {
      std::fprintf(stderr, "warning: rejected out-of-order camera frame at t=%.6f\n", e.t);
      ++out.rejected;
      continue;
    }
    prev = e.t;
    out.entries.push_back(std::move(e));
  }
  return out;
}

RunReport run_core(const PipelineConfig& config, bool streaming, bool realtime_pace) {
  config.validate();

  ArrayGeometry geometry = load_geometry(config.geometry_path);
  CandidateGrid grid = CandidateGrid::uniform(config.params.grid_size);
  AudioClip clip = read_wav(config.audio_path);
  if (clip.channels() != geometry.mic_count())
    throw ConfigError("audio has " + std::to_string(clip.channels()) +
                      " channels but the geometry defines " +
                      std::to_string(geometry.mic_count()) + " microphones");
  if (clip.sample_count() < config.params.window)
    throw ConfigError("audio is shorter than one analysis window");

  std::optional<CameraModel> camera;
  if (!config.camera_path.empty()) camera = load_camera(config.camera_path);
  CameraStream cam_stream = load_camera_stream_checked(config.camera_stream_path);

  fs::create_directories(config.output_dir);
  fs::path out_dir(config.output_dir);
  std::ofstream ssl_out(out_dir / "ssl.jsonl");
  if (!ssl_out) throw RuntimeFailure("cannot write ssl.jsonl");
  std::ofstream weights_out;
  std::ofstream rects_out;
  std::ofstream keypoints_out;

  SslEngine engine(geometry, grid, config.params, clip.sample_rate);
  if (!config.feature_dump_path.empty()) engine.enable_feature_dump(config.feature_dump_path);

  if (config.write_weights_csv) {
    weights_out.open(out_dir / "weights.csv");
    weights_out << "frame,t";
    for (int d = 0; d < grid.size(); ++d) weights_out << ",w" << d;
    weights_out << "\n";
  }

  std::optional<FusionStage> fusion;
  if (camera) {
    fusion.emplace(*camera, grid, config.params.default_range_m);
    if (!cam_stream.entries.empty()) {
      fs::create_directories(out_dir / "masks");
      rects_out.open(out_dir / "rects.jsonl");
      keypoints_out.open(out_dir / "keypoints_filtered.csv");
      keypoints_out << "camera_frame,t,u,v,score\n";
    }
  }

  RunReport report;
  report.threads = config.params.resolved_threads();
  report.audio_seconds = clip.duration();
  report.ssl_output_rate_hz = engine.frame_rate();
  report.rejected_camera_frames = cam_stream.rejected;

  Clock::time_point wall0 = Clock::now();
  std::size_t cam_next = 0;
  char buf[64];

  auto process_camera = [&](const CameraStreamEntry& entry, long index) {
    if (!fusion) return;
    FusionStage::Output fo;
    {
      StageTimer timer(engine.timings().fusion_s);
      try {
        fo = fusion->process(entry, index);
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception& e) {
        throw RuntimeFailure("camera frame " + std::to_string(index) + ": " + e.what());
      }
    }
    StageTimer timer(engine.timings().io_s);
    std::snprintf(buf, sizeof(buf), "%06ld.pgm", index);
    write_mask_pgm((out_dir / "masks" / buf).string(), fo.mask);

    nlohmann::json rects = nlohmann::json::array();
    for (std::size_t i = 0; i < fo.rects.size(); ++i) {
      const PixelRect& r = fo.rects[i];
      rects.push_back({{"center_deg", fo.center_deg[i]},
                       {"left_deg", fo.left_deg[i]},
                       {"right_deg", fo.right_deg[i]},
                       {"center_col", r.center_col},
                       {"col_min", r.col_min},
                       {"col_max", r.col_max},
                       {"row_min", r.row_min},
                       {"row_max", r.row_max},
                       {"out_of_view", r.out_of_view}});
    }
    rects_out << nlohmann::json{{"frame", index},
                                {"t", entry.t},
                                {"ssl_frame", fo.ssl_frame},
                                {"rects", rects}}
                     .dump()
              << "\n";
    if (fo.had_keypoints) {
      char row[96];
      for (const Keypoint& kp : fo.kept) {
        std::snprintf(row, sizeof(row), "%ld,%.6f,%.3f,%.3f,%.6g\n", index, entry.t, kp.u,
                      kp.v, kp.has_score ? kp.score : 0.0);
        keypoints_out << row;
      }
    }
    ++report.camera_frames;
  };

  auto on_ssl_frame = [&](const SslFrame& f) {
    while (cam_next < cam_stream.entries.size() && cam_stream.entries[cam_next].t < f.t) {
      process_camera(cam_stream.entries[cam_next], static_cast<long>(cam_next));
      ++cam_next;
    }
    if (fusion) {
      StageTimer timer(engine.timings().fusion_s);
      fusion->observe(f);
    }
    StageTimer timer(engine.timings().io_s);
    ssl_out << ssl_frame_json(f, grid).dump() << "\n";
    if (weights_out.is_open()) {
      char head[48];
      std::snprintf(head, sizeof(head), "%ld,%.6f", f.frame, f.t);
      weights_out << head;
      char cell[32];
      for (int d = 0; d < f.weights.size(); ++d) {
        std::snprintf(cell, sizeof(cell), ",%.9g", f.weights(d));
        weights_out << cell;
      }
      weights_out << "\n";
    }
    ++report.frames;
  };

  if (!streaming) {
    engine.push_audio(clip.samples, on_ssl_frame);
  } else {
    const int hop = config.params.hop;
    const long total = clip.sample_count();
    Clock::time_point pace0 = Clock::now();
    for (long pos = 0; pos < total; pos += hop) {
      long len = std::min<long>(hop, total - pos);
      if (realtime_pace) {
        auto target = pace0 + std::chrono::duration_cast<Clock::duration>(
                                  std::chrono::duration<double>(pos / clip.sample_rate));
        std::this_thread::sleep_until(target);
        double lag = seconds_since(pace0) - pos / clip.sample_rate;
        if (lag > 0.25)
          std::fprintf(stderr, "heartbeat: stream lagging %.3f s behind real time\n", lag);
      }
      engine.push_audio(clip.samples.middleCols(pos, len), on_ssl_frame);
    }
  }

  // Remaining camera frames observe the final SSL frame.
  while (cam_next < cam_stream.entries.size()) {
    process_camera(cam_stream.entries[cam_next], static_cast<long>(cam_next));
    ++cam_next;
  }

  report.timings = engine.timings();
  report.timings.total_s = seconds_since(wall0);
  report.real_time_factor =
      report.timings.total_s > 0 ? report.audio_seconds / report.timings.total_s : 0.0;
  report.rls_resets = engine.rls_resets();

  {
    std::ofstream report_out(out_dir / "report.json");
    report_out << report.to_json() << "\n";
  }
  return report;
}

}  // namespace

RunReport run_offline(const PipelineConfig& config) { return run_core(config, false, false); }

RunReport run_streaming(const PipelineConfig& config, bool realtime_pace) {
  return run_core(config, true, realtime_pace);
}

RunReport benchmark(const PipelineConfig& config, int repetitions) {
  if (repetitions < 1) throw ConfigError("benchmark: repetitions must be >= 1");
  std::vector<RunReport> reports;
  reports.reserve(static_cast<std::size_t>(repetitions));
  for (int i = 0; i < repetitions; ++i) reports.push_back(run_offline(config));
  std::sort(reports.begin(), reports.end(), [](const RunReport& a, const RunReport& b) {
    return a.real_time_factor < b.real_time_factor;
  });
  RunReport median = reports[reports.size() / 2];
  median.repetitions = repetitions;
  std::ofstream report_out(fs::path(config.output_dir) / "report.json");
  report_out << median.to_json() << "\n";
  return median;
}

}  // namespace af
