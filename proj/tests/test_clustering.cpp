#include "doctest.h"

#include <random>

#include "af/clustering.hpp"
#include "support.hpp"

using namespace af;

namespace {

// Single-bin steering table built from the far-field phases of an irregular
// planar ring (reference at the center) at 6 kHz, where adjacent candidates
// are well separated. Bin count 1 keeps tests small.
SteeringTable toy_table(int directions, int channels = 1) {
  const double freq = 6000.0, c_sound = 343.0, radius = 0.06;
  const double ring_deg[4] = {0.0, 105.0, 190.0, 280.0};
  REQUIRE(channels <= 4);
  CandidateGrid grid = CandidateGrid::uniform(directions);
  Eigen::MatrixXcd means(channels, directions);
  for (int c = 0; c < channels; ++c) {
    Eigen::Vector3d mic = radius * azimuth_direction(ring_deg[c]);
    for (int d = 0; d < directions; ++d) {
      double tau = azimuth_direction(grid.azimuth_deg(d)).dot(-mic) / c_sound;
      means(c, d) = std::polar(1.0, -2.0 * kPi * freq * tau);
    }
  }
  std::vector<int> chan_ids;
  for (int c = 0; c < channels; ++c) chan_ids.push_back(c + 1);
  Eigen::VectorXd freqs = Eigen::VectorXd::Constant(1, freq);
  return SteeringTable({means}, chan_ids, freqs, 0);
}

DpRtfFeature feature_at(const SteeringTable& table, int d, double jitter = 0.0,
                        std::mt19937_64* rng = nullptr) {
  DpRtfFeature f;
  f.frame = 0;
  f.bin = 0;
  f.values = table.at(0).col(d);
  if (jitter > 0.0 && rng) {
    std::normal_distribution<double> g(0.0, jitter);
    for (int i = 0; i < f.values.size(); ++i) f.values(i) += Complex(g(*rng), g(*rng));
  }
  f.reliable = true;
  return f;
}

// Independent reimplementation of the boundary scan for cross-checking.
std::pair<int, int> brute_force_region(const Eigen::VectorXd& w, int peak, double delta,
                                       int max_steps) {
  const int dirs = static_cast<int>(w.size());
  const double floor_w = delta * w(peak);
  int right = peak;
  for (int s = 0; s < std::min(max_steps, dirs / 2); ++s) {
    int nxt = (right + 1) % dirs;
    if (w(nxt) >= w(right)) break;
    if (w(nxt) < floor_w) break;
    right = nxt;
  }
  int left = peak;
  for (int s = 0; s < std::min(max_steps, dirs / 2); ++s) {
    int prv = (left - 1 + dirs) % dirs;
    if (w(prv) >= w(left)) break;
    if (w(prv) < floor_w) break;
    left = prv;
  }
  return {left, right};
}

}  // namespace

TEST_CASE("likelihood: maximized at the matching candidate") {
  SteeringTable table = toy_table(16, 3);
  DpRtfFeature f = feature_at(table, 5);
  Eigen::VectorXd ll = feature_log_likelihoods(f, table, 0.5);
  Eigen::Index argmax = 0;
  ll.maxCoeff(&argmax);
  CHECK(argmax == 5);
}

TEST_CASE("likelihood: single direction is trivial") {
  SteeringTable table = toy_table(1);
  DpRtfFeature f = feature_at(table, 0);
  Eigen::VectorXd ll = feature_log_likelihoods(f, table, 0.5);
  CHECK(ll.size() == 1);
}

TEST_CASE("likelihood: equidistant feature gives equal values") {
  SteeringTable table = toy_table(8);
  DpRtfFeature f;
  f.bin = 0;
  f.reliable = true;
  f.values = (table.at(0).col(2) + table.at(0).col(6)) / 2.0;  // midpoint
  Eigen::VectorXd ll = feature_log_likelihoods(f, table, 0.3);
  CHECK(std::abs(ll(2) - ll(6)) < 1e-12);
}

TEST_CASE("em batch: pure cluster converges to weight one") {
  SteeringTable table = toy_table(24, 2);
  std::vector<DpRtfFeature> features;
  for (int i = 0; i < 60; ++i) features.push_back(feature_at(table, 7));  // noise-free
  BatchEmResult result = em_batch(features, table, 0.5, 20);
  CHECK_FALSE(result.silent);
  CHECK(result.weights(7) > 1.0 - 1e-3);
}

TEST_CASE("em batch: no reliable features gives the uniform prior") {
  SteeringTable table = toy_table(12);
  std::vector<DpRtfFeature> features;
  DpRtfFeature unreliable = feature_at(table, 3);
  unreliable.reliable = false;
  features.push_back(unreliable);
  BatchEmResult result = em_batch(features, table, 0.5, 5);
  CHECK(result.silent);
  for (int d = 0; d < 12; ++d) CHECK(result.weights(d) == doctest::Approx(1.0 / 12));
}

TEST_CASE("em batch: two separated clusters both retained") {
  SteeringTable table = toy_table(72, 3);
  std::vector<DpRtfFeature> features;
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    features.push_back(feature_at(table, 10, 0.1, &rng));
    features.push_back(feature_at(table, 30, 0.1, &rng));
  }
  BatchEmResult result = em_batch(features, table, 0.5, 30);
  CHECK(result.weights(10) >= 0.3);
  CHECK(result.weights(30) >= 0.3);
}

TEST_CASE("em batch: log-likelihood is non-decreasing") {
  std::mt19937_64 rng(7);
  SteeringTable table = toy_table(16, 2);
  for (int set = 0; set < 25; ++set) {
    std::vector<DpRtfFeature> features;
    int count = 2 + static_cast<int>(rng() % 30);
    for (int i = 0; i < count; ++i)
      features.push_back(feature_at(table, static_cast<int>(rng() % 16), 0.4, &rng));
    BatchEmResult result = em_batch(features, table, 0.5, 12);
    for (std::size_t it = 1; it < result.log_likelihood.size(); ++it)
      CHECK(result.log_likelihood[it] >= result.log_likelihood[it - 1] - 1e-9);
  }
}

TEST_CASE("recursive em: stationary source exceeds 0.5 within 50 frames") {
  SteeringTable table = toy_table(72, 3);
  MixtureState state(72, 0.5, 0.05);
  std::mt19937_64 rng(11);
  int frames_needed = -1;
  for (int p = 0; p < 50; ++p) {
    std::vector<DpRtfFeature> frame;
    for (int i = 0; i < 12; ++i) frame.push_back(feature_at(table, 40, 0.1, &rng));
    state.update(frame, table);
    if (state.weights()(40) > 0.5 && frames_needed < 0) frames_needed = p + 1;
  }
  CHECK(state.weights()(40) > 0.5);
  CHECK(frames_needed <= 50);
}

TEST_CASE("recursive em: weight mass follows a source jump") {
  SteeringTable table = toy_table(72, 3);
  MixtureState state(72, 0.5, 0.05);
  std::mt19937_64 rng(13);
  for (int p = 0; p < 120; ++p) {
    std::vector<DpRtfFeature> frame{feature_at(table, 10, 0.1, &rng)};
    state.update(frame, table);
  }
  CHECK(state.weights()(10) > state.weights()(50));
  for (int p = 0; p < 60; ++p) {  // about 3/rho frames after the jump
    std::vector<DpRtfFeature> frame{feature_at(table, 50, 0.1, &rng)};
    state.update(frame, table);
  }
  CHECK(state.weights()(50) > state.weights()(10));
}

TEST_CASE("recursive em: empty frame leaves weights unchanged") {
  SteeringTable table = toy_table(24);
  MixtureState state(24, 0.5, 0.1);
  std::mt19937_64 rng(17);
  std::vector<DpRtfFeature> frame{feature_at(table, 3, 0.05, &rng)};
  state.update(frame, table);
  Eigen::VectorXd before = state.weights();
  state.update({}, table);
  CHECK((state.weights() - before).cwiseAbs().maxCoeff() == 0.0);
  CHECK(state.weights().sum() == doctest::Approx(1.0            ).epsilon(1e-12));
}

TEST_CASE("recursive em: rho=1 single frame equals one batch iteration") {
  SteeringTable table = toy_table(36, 2);
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<DpRtfFeature> frame;
    int count = 1 + static_cast<int>(rng() % 20);
    for (int i = 0; i < count; ++i)
      frame.push_back(feature_at(table, static_cast<int>(rng() % 36), 0.3, &rng));

    Eigen::VectorXd start = Eigen::VectorXd::Random(36).array().abs() + 0.01;
    start /= start.sum();

    MixtureState state(36, 0.5, 1.0);
    state.set_weights(start);
    state.update(frame, table);

    BatchEmResult batch = em_batch(frame, table, 0.5, 1, &start);
    CHECK((state.weights() - batch.weights).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("recursive em: simplex invariant over many updates") {
  SteeringTable table = toy_table(72, 2);
  MixtureState state(72, 0.5, 0.05);
  std::mt19937_64 rng(23);
  for (int p = 0; p < 2000; ++p) {
    std::vector<DpRtfFeature> frame;
    int count = static_cast<int>(rng() % 4);
    for (int i = 0; i < count; ++i)
      frame.push_back(feature_at(table, static_cast<int>(rng() % 72), 0.5, &rng));
    state.update(frame, table);
    CHECK(std::abs(state.weights().sum() - 1.0) <= 1e-9);
    CHECK(state.weights().minCoeff() >= 0.0);
  }
}

TEST_CASE("peaks: uniform weights yield none at the default threshold") {
  CandidateGrid grid = CandidateGrid::uniform(72);
  Eigen::VectorXd w = Eigen::VectorXd::Constant(72, 1.0 / 72);
  CHECK(detect_peaks(w, 2.0 / 72, 15.0, grid).empty());
}

TEST_CASE("peaks: single spike detected") {
  CandidateGrid grid = CandidateGrid::uniform(72);
  Eigen::VectorXd w = Eigen::VectorXd::Constant(72, 0.005);
  w(10) = 0.645;
  std::vector<int> peaks = detect_peaks(w, 2.0 / 72, 15.0, grid);
  REQUIRE(peaks.size() == 1);
  CHECK(peaks[0] == 10);
}

TEST_CASE("peaks: circular adjacency collapses neighboring spikes") {
  CandidateGrid grid = CandidateGrid::uniform(72);
  Eigen::VectorXd w = Eigen::VectorXd::Constant(72, 0.002);
  w(0) = 0.3;
  w(71) = 0.3;  // 5 degrees apart across the wrap
  std::vector<int> peaks = detect_peaks(w, 2.0 / 72, 15.0, grid);
  REQUIRE(peaks.size() == 1);
  CHECK(peaks[0] == 0);  // tie breaks toward the lower index
}

TEST_CASE("peaks: separation keeps distinct sources") {
  CandidateGrid grid = CandidateGrid::uniform(72);
  Eigen::VectorXd w = Eigen::VectorXd::Constant(72, 0.002);
  w(10) = 0.4;
  w(40) = 0.3;
  std::vector<int> peaks = detect_peaks(w, 2.0 / 72, 15.0, grid);
  REQUIRE(peaks.size() == 2);
  CHECK(peaks[0] == 10);
  CHECK(peaks[1] == 40);
}

TEST_CASE("regions: hand-traced boundary example") {
  Eigen::VectorXd w(6);
  w << 0.10, 0.30, 0.60, 0.30, 0.10, 0.05;
  AngularRegion r = region_boundaries(w, 2, 0.3, 3);
  CHECK(r.right == 3);
  CHECK(r.left == 1);
}

TEST_CASE("regions: plateau stops immediately") {
  Eigen::VectorXd w(8);
  w << 0.05, 0.05, 0.4, 0.4, 0.05, 0.02, 0.02, 0.01;
  AngularRegion r = region_boundaries(w, 2, 0.0, 4);
  CHECK(r.right == 2);  // w[3] == w[2] cannot "decrease"
}

TEST_CASE("regions: delta = 1 collapses to the peak when the neighbor is lower") {
  Eigen::VectorXd w(8);
  w << 0.02, 0.05, 0.5, 0.3, 0.1, 0.02, 0.01, 0.0;
  AngularRegion r = region_boundaries(w, 2, 1.0, 4);
  CHECK(r.right == 2);
  CHECK(r.left == 2);
}

TEST_CASE("regions: match an independent brute-force scan") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    int dirs = 6 + static_cast<int>(rng() % 70);
    Eigen::VectorXd w(dirs);
    for (int d = 0; d < dirs; ++d) w(d) = u(rng);
    if (trial % 3 == 0)  // quantize to force plateaus and ties
      for (int d = 0; d < dirs; ++d) w(d) = std::round(w(d) * 8.0) / 8.0;
    w /= std::max(w.sum(), 1e-12);

    // Scan from the global argmax (always a circular local maximum).
    Eigen::Index peak = 0;
    w.maxCoeff(&peak);
    double delta = u(rng);
    int max_steps = 1 + static_cast<int>(rng() % dirs);
    AngularRegion region = region_boundaries(w, static_cast<int>(peak), delta, max_steps);
    auto [left, right] = brute_force_region(w, static_cast<int>(peak), delta, max_steps);
    CHECK(region.left == left);
    CHECK(region.right == right);
  }
}
