// acoustic-fusion: sound-source localization and audio-visual fusion CLI.
//
//   acoustic-fusion run      --config cfg.toml [--stream] [overrides]
//   acoustic-fusion simulate --scene s.toml --geometry g.toml --out dir/
//   acoustic-fusion bench    --config cfg.toml --repetitions 3
//
// Exit codes: 0 success, 2 configuration error, 3 runtime error.

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "af/pipeline.hpp"
#include "af/simulator.hpp"

namespace {

struct RunOptions {
  std::string config_path;
  std::string out_dir;
  bool stream = false;
  bool realtime = false;
  int repetitions = 3;
  std::string dump_features;

  // Parameter overrides; NaN/INT_MIN = keep config value.
  double lambda = -1, sigma2 = -1, delta = -1, rho = -1, noise_floor = -1, peak_threshold = -2,
         min_separation = -1, max_half_width = -1, residual_threshold = -1;
  int window = 0, hop = 0, ctf_taps = 0, grid_size = 0, threads = -1;
};

void apply_overrides(af::PipelineConfig& cfg, const RunOptions& opt) {
  af::PipelineParams& p = cfg.params;
  if (opt.window > 0) p.window = opt.window;
  if (opt.hop > 0) p.hop = opt.hop;
  if (opt.ctf_taps > 0) p.ctf_taps = opt.ctf_taps;
  if (opt.grid_size > 0) p.grid_size = opt.grid_size;
  if (opt.threads >= 0) p.threads = opt.threads;
  if (opt.lambda >= 0) p.lambda = opt.lambda;
  if (opt.sigma2 >= 0) p.sigma2 = opt.sigma2;
  if (opt.delta >= 0) p.delta = opt.delta;
  if (opt.rho >= 0) p.rho = opt.rho;
  if (opt.noise_floor >= 0) p.noise_floor_factor = opt.noise_floor;
  if (opt.peak_threshold >= -1) p.peak_threshold = opt.peak_threshold;
  if (opt.min_separation >= 0) p.min_separation_deg = opt.min_separation;
  if (opt.max_half_width >= 0) p.max_half_width_deg = opt.max_half_width;
  if (opt.residual_threshold >= 0) p.residual_threshold = opt.residual_threshold;
  if (!opt.out_dir.empty()) cfg.output_dir = opt.out_dir;
  if (!opt.dump_features.empty()) cfg.feature_dump_path = opt.dump_features;
}

void add_param_flags(CLI::App* cmd, RunOptions& opt) {
  cmd->add_option("--window", opt.window, "STFT window length, samples");
  cmd->add_option("--hop", opt.hop, "STFT hop size, samples");
  cmd->add_option("--ctf-taps,-Q", opt.ctf_taps, "CTF length Q");
  cmd->add_option("--lambda", opt.lambda, "RLS forgetting factor (0, 1]");
  cmd->add_option("--sigma2", opt.sigma2, "mixture component variance");
  cmd->add_option("--delta", opt.delta, "region stopping-rule factor [0, 1]");
  cmd->add_option("--rho", opt.rho, "recursive EM smoothing factor (0, 1]");
  cmd->add_option("--grid-size", opt.grid_size, "number of candidate directions");
  cmd->add_option("--noise-floor-factor", opt.noise_floor, "bin gate factor");
  cmd->add_option("--peak-threshold", opt.peak_threshold, "peak detection threshold");
  cmd->add_option("--min-separation", opt.min_separation, "minimum peak separation, degrees");
  cmd->add_option("--max-half-width", opt.max_half_width, "region half-width clamp, degrees");
  cmd->add_option("--residual-threshold", opt.residual_threshold,
                  "feature reliability residual threshold");
  cmd->add_option("--threads", opt.threads, "worker threads (0 = auto)");
  cmd->add_option("--out", opt.out_dir, "output directory (overrides config)");
  cmd->add_option("--dump-features", opt.dump_features, "debug CSV of DP-RTF features");
}

void print_report(const af::RunReport& report) {
  std::printf("frames            %ld\n", report.frames);
  std::printf("audio seconds     %.3f\n", report.audio_seconds);
  std::printf("ssl output rate   %.3f Hz\n", report.ssl_output_rate_hz);
  std::printf("real-time factor  %.3f\n", report.real_time_factor);
  std::printf("timings (s)       stft %.3f | dprtf %.3f | clustering %.3f | fusion %.3f | io %.3f | total %.3f\n",
              report.timings.stft_s, report.timings.dprtf_s, report.timings.clustering_s,
              report.timings.fusion_s, report.timings.io_s, report.timings.total_s);
  if (report.rls_resets > 0) std::printf("rls resets        %d\n", report.rls_resets);
  if (report.camera_frames > 0) std::printf("camera frames     %ld\n", report.camera_frames);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sound-source localization and audio-visual fusion front end"};
  app.require_subcommand(1);

  RunOptions run_opt;
  CLI::App* run = app.add_subcommand("run", "process a recording through the pipeline");
  run->add_option("--config", run_opt.config_path, "pipeline config (toml)")->required();
  run->add_flag("--stream", run_opt.stream, "streaming mode (incremental per-hop input)");
  run->add_flag("--realtime", run_opt.realtime, "pace streaming input at real time");
  add_param_flags(run, run_opt);

  RunOptions bench_opt;
  CLI::App* bench = app.add_subcommand("bench", "repeat the offline run and report timings");
  bench->add_option("--config", bench_opt.config_path, "pipeline config (toml)")->required();
  bench->add_option("--repetitions", bench_opt.repetitions, "number of runs (median reported)");
  add_param_flags(bench, bench_opt);

  std::string scene_path, geometry_path, sim_out = "out";
  std::int64_t seed = -1;
  int sim_window = 256, sim_hop = 128;
  CLI::App* sim = app.add_subcommand("simulate", "render a synthetic scene with ground truth");
  sim->add_option("--scene", scene_path, "scene script (toml)")->required();
  sim->add_option("--geometry", geometry_path, "array geometry (toml)")->required();
  sim->add_option("--seed", seed, "override the script's seed");
  sim->add_option("--out", sim_out, "output directory");
  sim->add_option("--window", sim_window, "STFT window for ground-truth framing");
  sim->add_option("--hop", sim_hop, "STFT hop for ground-truth framing");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (run->parsed()) {
      af::PipelineConfig cfg = af::PipelineConfig::load(run_opt.config_path);
      apply_overrides(cfg, run_opt);
      af::RunReport report = run_opt.stream ? af::run_streaming(cfg, run_opt.realtime)
                                            : af::run_offline(cfg);
      print_report(report);
    } else if (bench->parsed()) {
      af::PipelineConfig cfg = af::PipelineConfig::load(bench_opt.config_path);
      apply_overrides(cfg, bench_opt);
      af::RunReport report = af::benchmark(cfg, bench_opt.repetitions);
      print_report(report);
    } else if (sim->parsed()) {
      af::SceneScript script = af::load_scene(scene_path);
      if (seed >= 0) script.seed = static_cast<std::uint64_t>(seed);
      af::ArrayGeometry geometry = af::load_geometry(geometry_path);
      auto [clip, truth] = af::render_scene(script, geometry, sim_window, sim_hop);
      std::filesystem::create_directories(sim_out);
      std::filesystem::path dir(sim_out);
      af::write_wav((dir / "scene.wav").string(), clip);
      truth.write_csv((dir / "ground_truth.csv").string());
      std::printf("rendered %.2f s, %d channels -> %s\n", clip.duration(), clip.channels(),
                  sim_out.c_str());
    }
  } catch (const af::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const af::toml::ParseError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
