#include "doctest.h"

#include <map>
#include <random>

#include "af/simulator.hpp"
#include "af/stft.hpp"
#include "af/dprtf.hpp"
#include "support.hpp"

using namespace af;

namespace {

SceneScript single_source(double azimuth, double distance, double duration,
                          SourceSpec::Signal sig = SourceSpec::Signal::WhiteNoise,
                          std::uint64_t seed = 1) {
  SceneScript script;
  script.duration = duration;
  script.seed = seed;
  SourceSpec src;
  src.signal = sig;
  src.trajectory = {{0.0, azimuth, distance}};
  script.sources.push_back(src);
  return script;
}

}  // namespace

TEST_CASE("scene: parsing and validation") {
  SceneScript script = parse_scene(toml::parse(
      "duration = 2.0\n"
      "seed = 9\n"
      "snr_db = 20.0\n"
      "[[sources]]\n"
      "signal = \"white\"\n"
      "azimuth_deg = 30.0\n"
      "distance_m = 1.5\n"
      "[[sources]]\n"
      "signal = \"speech\"\n"
      "onset = 0.5\n"
      "offset = 1.5\n"
      "trajectory = [[0.0, -90.0, 2.0], [2.0, -30.0, 2.0]]\n"));
  CHECK(script.sources.size() == 2);
  CHECK(script.sources[1].azimuth_at(1.0) == doctest::Approx(-60.0));
  CHECK(script.sources[1].distance_at(1.7) == doctest::Approx(2.0));

  CHECK_THROWS_AS(parse_scene(toml::parse("duration = -1\n")), ConfigError);
  CHECK_THROWS_AS(parse_scene(toml::parse("[[sources]]\ndistance_m = 0\n")), ConfigError);
  CHECK_THROWS_AS(parse_scene(toml::parse("[[sources]]\nonset = 2\noffset = 1\n")),
                  ConfigError);
  CHECK_THROWS_AS(parse_scene(toml::parse("[[sources]]\nsignal = \"chirp\"\n")), ConfigError);
}

TEST_CASE("render: symmetric pair hears a forward source identically") {
  ArrayGeometry g;
  g.mic_positions.resize(3, 2);
  g.mic_positions.col(0) = Eigen::Vector3d(0, 0.025, 0);
  g.mic_positions.col(1) = Eigen::Vector3d(0, -0.025, 0);
  g.reference = 0;
  auto [clip, gt] = render_scene(single_source(0.0, 2.0, 0.5), g);
  double diff = (clip.samples.row(0) - clip.samples.row(1)).cwiseAbs().maxCoeff();
  CHECK(diff < 1e-6);
}

TEST_CASE("render: broadside source on a 5 cm pair gives the analytic delay") {
  ArrayGeometry g;
  g.mic_positions.resize(3, 2);
  g.mic_positions.col(0) = Eigen::Vector3d(0, 0, 0);
  g.mic_positions.col(1) = Eigen::Vector3d(0, 0.05, 0);
  g.reference = 0;
  auto [clip, gt] = render_scene(single_source(90.0, 2.0, 1.0), g);

  double tdoa = oracle_tdoa(clip, 1, 0);
  double expected = far_field_tdoa(g, 90.0, 1);  // 0.05/343 with the sign convention
  CHECK(std::abs(expected) == doctest::Approx(1.458e-4).epsilon(5e-3));
  CHECK(tdoa == doctest::Approx(expected).epsilon(0.05));
  // Inter-channel delay of about 2.33 samples at 16 kHz.
  CHECK(std::abs(tdoa) * 16000.0 == doctest::Approx(2.33).epsilon(0.05));
}

TEST_CASE("oracle: identical channels, antisymmetry, silence") {
  ArrayGeometry g = test::pair_geometry();
  auto [clip, gt] = render_scene(single_source(17.0, 1.5, 0.5), g);
  AudioClip twin;
  twin.sample_rate = clip.sample_rate;
  twin.samples.resize(2, clip.sample_count());
  twin.samples.row(0) = clip.samples.row(0);
  twin.samples.row(1) = clip.samples.row(0);
  CHECK(oracle_tdoa(twin, 0, 1) == doctest::Approx(0.0).epsilon(1e-12));

  CHECK(oracle_tdoa(clip, 0, 1) == doctest::Approx(-oracle_tdoa(clip, 1, 0)).epsilon(1e-6));

  AudioClip silent;
  silent.sample_rate = 16000;
  silent.samples = ChannelMatrix::Zero(2, 16000);
  CHECK_THROWS_AS(oracle_tdoa(silent, 0, 1), RuntimeFailure);
}

TEST_CASE("render/oracle closure pins the angle sign convention") {
  ArrayGeometry g = load_geometry(test::profile_dir() + "/geometry_7mic.toml");
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> az(-180.0, 180.0), dist(1.0, 3.0);
  for (int trial = 0; trial < 6; ++trial) {
    double azimuth = az(rng);
    auto [clip, gt] =
        render_scene(single_source(azimuth, dist(rng), 1.0, SourceSpec::Signal::WhiteNoise,
                                   100 + trial),
                     g);
    for (int m = 1; m < 7; m += 3) {
      double measured = oracle_tdoa(clip, m, 0);
      double expected = far_field_tdoa(g, azimuth, m);
      CHECK(std::abs(measured - expected) < 10e-6);
    }
  }
}

TEST_CASE("render: channel power scales with inverse squared distance") {
  ArrayGeometry g = test::pair_geometry();
  auto [near_clip, gt1] = render_scene(single_source(25.0, 1.0, 1.0), g);
  auto [far_clip, gt2] = render_scene(single_source(25.0, 2.0, 1.0), g);
  double p_near = near_clip.samples.row(0).cast<double>().squaredNorm();
  double p_far = far_clip.samples.row(0).cast<double>().squaredNorm();
  CHECK(p_near / p_far == doctest::Approx(4.0).epsilon(0.01));
}

TEST_CASE("render: deterministic for a fixed seed") {
  ArrayGeometry g = test::quad_geometry();
  SceneScript script = single_source(-45.0, 2.0, 0.7, SourceSpec::Signal::SpeechLike, 77);
  script.snr_db = 15.0;
  auto [a, gta] = render_scene(script, g);
  auto [b, gtb] = render_scene(script, g);
  CHECK((a.samples - b.samples).cwiseAbs().maxCoeff() == 0.0f);
  CHECK(gta.entries.size() == gtb.entries.size());
}

TEST_CASE("ground truth: disjoint onsets list one active source per frame") {
  SceneScript script;
  script.duration = 2.0;
  script.seed = 5;
  SourceSpec a;
  a.signal = SourceSpec::Signal::WhiteNoise;
  a.trajectory = {{0.0, 10.0, 2.0}};
  a.onset = 0.0;
  a.offset = 0.9;
  SourceSpec b = a;
  b.trajectory = {{0.0, -120.0, 2.0}};
  b.onset = 1.1;
  b.offset = 2.0;
  script.sources = {a, b};

  ArrayGeometry g = test::pair_geometry();
  auto [clip, gt] = render_scene(script, g);
  for (const GroundTruthEntry& e : gt.entries) {
    if (e.t < 0.9) CHECK(e.source == 0);
    if (e.t > 1.1) CHECK(e.source == 1);
  }
  // No frame lists both sources.
  std::map<long, int> counts;
  for (const GroundTruthEntry& e : gt.entries) counts[e.frame]++;
  for (auto& [frame, n] : counts) CHECK(n == 1);
}

TEST_CASE("render: scripted CTF scene recovers the direct-path phase") {
  // Reverberant rendering keeps the direct-path inter-channel structure:
  // after convergence the extracted DP-RTFs match the steering phases.
  ArrayGeometry g = test::quad_geometry();
  SceneScript script = single_source(35.0, 2.0, 4.0, SourceSpec::Signal::WhiteNoise, 11);
  script.sources[0].reverb_taps = 4;
  script.sources[0].reverb_level = 0.4;
  auto [clip, gt] = render_scene(script, g);

  const int window = 256, hop = 128, bins = window / 2 + 1;
  CandidateGrid grid = CandidateGrid::uniform(72);
  SteeringTable table = compute_steering_table(g, grid, bins, clip.sample_rate);
  int d_true = grid.nearest(35.0);

  DpRtfEstimator estimator(4, bins, 8, 0, 0.995, 0.5);
  std::vector<SpectrogramFrame> frames = stft_stream(clip, window, hop);
  std::vector<double> errors;
  for (const SpectrogramFrame& frame : frames) {
    estimator.process_bins(frame, 0, bins);
    if (frame.t < 2.0) continue;  // convergence period
    std::vector<char> mask(static_cast<std::size_t>(bins), 0);
    for (int k = 8; k < 120; ++k) mask[static_cast<std::size_t>(k)] = 1;
    std::vector<DpRtfFeature> features;
    estimator.extract_features(frame.index, mask, features);
    for (const DpRtfFeature& f : features) {
      if (!f.reliable) continue;
      for (int c = 0; c < f.values.size(); ++c) {
        double err = std::abs(std::arg(f.values(c) * std::conj(table.at(f.bin)(c, d_true))));
        errors.push_back(err);
      }
    }
  }
  REQUIRE(errors.size() > 500);
  std::sort(errors.begin(), errors.end());
  CHECK(errors[errors.size() / 2] < 0.05);                  // median
  CHECK(errors[errors.size() * 95 / 100] < 0.1);            // 95th percentile
}
