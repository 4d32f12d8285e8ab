#include "doctest.h"

#include <random>

#include "af/fusion.hpp"
#include "support.hpp"

using namespace af;

namespace {

CameraModel default_camera() {
  return load_camera(test::profile_dir() + "/camera_default.toml");
}

CameraModel plain_camera() {
  // Camera frame == world frame (identity extrinsic), 90 degree FOV.
  CameraModel cam;
  cam.fx = cam.fy = 500.0;
  cam.cx = 320.0;
  cam.cy = 240.0;
  cam.width = 640;
  cam.height = 480;
  cam.fov_deg = 90.0;
  return cam;
}

}  // namespace

TEST_CASE("camera: default profile loads with a valid rotation") {
  CameraModel cam = default_camera();
  CHECK(cam.fx == 500.0);
  CHECK(cam.width == 640);
  // Camera optical axis (z) must map to the array forward axis (x).
  Eigen::Vector3d fwd = cam.T_mic_cam.linear() * Eigen::Vector3d(0, 0, 1);
  CHECK((fwd - Eigen::Vector3d(1, 0, 0)).norm() < 1e-12);
}

TEST_CASE("camera: invalid configs rejected") {
  CameraModel cam = plain_camera();
  cam.fx = 0;
  CHECK_THROWS_AS(cam.validate(), ConfigError);
  cam = plain_camera();
  cam.T_mic_cam.linear() *= 2.0;  // not orthonormal
  CHECK_THROWS_AS(cam.validate(), ConfigError);
}

TEST_CASE("warp: identity transform returns the pixel") {
  CameraModel cam = plain_camera();
  DepthImage depth = DepthImage::constant(640, 480, 2.0f);
  Eigen::Vector2d px(411.0, 123.0);
  Eigen::Vector2d out = warp_pixel(px, Eigen::Isometry3d::Identity(), depth, cam);
  CHECK((out - px).norm() < 1e-9);
}

TEST_CASE("warp: pure translation shifts by the analytic parallax") {
  CameraModel cam = plain_camera();
  DepthImage depth = DepthImage::constant(640, 480, 2.0f);
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.translation() = Eigen::Vector3d(0.074, 0.0, 0.0);
  Eigen::Vector2d out = warp_pixel({320.0, 240.0}, t, depth, cam);
  CHECK(out.x() - 320.0 == doctest::Approx(500.0 * 0.074 / 2.0).epsilon(1e-9));  // 18.5 px
  CHECK(out.y() == doctest::Approx(240.0));
}

TEST_CASE("warp: invalid depth and behind-plane points rejected") {
  CameraModel cam = plain_camera();
  DepthImage depth = DepthImage::constant(640, 480, 0.0f);
  CHECK_THROWS_AS(warp_pixel({320, 240}, Eigen::Isometry3d::Identity(), depth, cam),
                  RuntimeFailure);
  DepthImage good = DepthImage::constant(640, 480, 1.0f);
  Eigen::Isometry3d behind = Eigen::Isometry3d::Identity();
  behind.translation() = Eigen::Vector3d(0, 0, -5.0);
  CHECK_THROWS_AS(warp_pixel({320, 240}, behind, good, cam), RuntimeFailure);
}

TEST_CASE("warp: round trip with the true depth returns the pixel") {
  CameraModel cam = plain_camera();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> upix(50.0, 590.0), vpix(50.0, 430.0), zdist(0.5, 5.0);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::Vector2d px(upix(rng), vpix(rng));
    double z = zdist(rng);
    Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
    t.linear() = Eigen::AngleAxisd(0.1, Eigen::Vector3d(0.2, 1.0, 0.1).normalized())
                     .toRotationMatrix();
    t.translation() = Eigen::Vector3d(0.05, -0.02, 0.03);

    DepthImage depth = DepthImage::constant(640, 480, static_cast<float>(z));
    Eigen::Vector3d p_target = t * back_project(px, z, cam);
    if (!(p_target.z() > 0)) continue;
    Eigen::Vector2d warped = warp_pixel(px, t, depth, cam);
    if (warped.x() < 0 || warped.x() > 639 || warped.y() < 0 || warped.y() > 479) continue;

    DepthImage depth_back =
        DepthImage::constant(640, 480, static_cast<float>(p_target.z()));
    Eigen::Vector2d back = warp_pixel(warped, t.inverse(), depth_back, cam);
    CHECK((back - px).norm() < 1e-3);  // float depth storage limits precision
  }
}

TEST_CASE("azimuth projection: forward axis hits the principal column") {
  CameraModel cam = default_camera();
  ColumnProjection p = azimuth_to_column(0.0, cam);
  CHECK_FALSE(p.clamped);
  CHECK(p.phi_cam_deg == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(p.column == doctest::Approx(320.0));
}

TEST_CASE("azimuth projection: analytic tangent at 10 degrees") {
  CameraModel cam = default_camera();
  // Array azimuths are counterclockwise-positive, camera columns grow to
  // the right, so phi_cam = -azimuth under the default extrinsic.
  ColumnProjection p = azimuth_to_column(-10.0, cam);
  CHECK(p.phi_cam_deg == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(p.column == doctest::Approx(320.0 + 500.0 * std::tan(deg_to_rad(10.0))).epsilon(1e-9));
  CHECK(p.column == doctest::Approx(408.16).epsilon(1e-3));
}

TEST_CASE("azimuth projection: clamps at and beyond the half field of view") {
  CameraModel cam = default_camera();
  ColumnProjection right = azimuth_to_column(-60.0, cam);  // phi_cam = +60
  CHECK(right.clamped);
  CHECK(right.column == 639.0);
  ColumnProjection left = azimuth_to_column(60.0, cam);
  CHECK(left.clamped);
  CHECK(left.column == 0.0);
  ColumnProjection behind = azimuth_to_column(180.0, cam);
  CHECK(behind.clamped);
  ColumnProjection edge = azimuth_to_column(-45.0, cam);  // exactly half FOV
  CHECK(edge.clamped);
}

TEST_CASE("azimuth projection: strictly monotonic inside the field of view") {
  CameraModel cam = default_camera();
  double prev = -1.0;
  for (double az = 44.0; az >= -44.0; az -= 1.0) {  // phi_cam from -44 to +44
    ColumnProjection p = azimuth_to_column(az, cam);
    CHECK_FALSE(p.clamped);
    CHECK(p.column > prev);
    prev = p.column;
  }
}

TEST_CASE("region rectangle: symmetric 5 degree region around the axis") {
  CameraModel cam = default_camera();
  PixelRect rect = region_to_rectangle(0.0, -5.0, 5.0, cam);
  CHECK_FALSE(rect.out_of_view);
  CHECK(rect.col_min == 276);
  CHECK(rect.col_max == 364);
  CHECK(rect.row_min == 0);
  CHECK(rect.row_max == 479);
}

TEST_CASE("region rectangle: out-of-view region collapses to a border line") {
  CameraModel cam = default_camera();
  PixelRect rect = region_to_rectangle(120.0, 110.0, 130.0, cam);
  CHECK(rect.out_of_view);
  CHECK(rect.col_min == rect.col_max);
  CHECK(rect.col_min == 0);  // positive azimuth = left border
}

TEST_CASE("region rectangle: straddling the FOV edge clamps one side") {
  CameraModel cam = default_camera();
  PixelRect rect = region_to_rectangle(-40.0, -30.0, -50.0, cam);
  CHECK_FALSE(rect.out_of_view);
  CHECK(rect.col_max == 639);                      // outer boundary clamped
  double inner = 320.0 + 500.0 * std::tan(deg_to_rad(30.0));
  CHECK(rect.col_min == static_cast<int>(std::lround(inner)));
}

TEST_CASE("depth invalidation: exact pixel counts") {
  DepthImage depth = DepthImage::constant(640, 480, 1.5f);
  PixelRect rect{400, 450, 0, 479, false, 425.0, false};
  ObstacleMask mask = ObstacleMask::from_rects(0, 640, 480, {rect});
  DepthImage cleared = invalidate_depth(depth, mask);
  long zeros = 0;
  for (int v = 0; v < 480; ++v)
    for (int u = 0; u < 640; ++u)
      if (cleared.at(u, v) == 0.0f) ++zeros;
  CHECK(zeros == 51L * 480L);

  ObstacleMask empty = ObstacleMask::from_rects(0, 640, 480, {});
  DepthImage untouched = invalidate_depth(depth, empty);
  CHECK(untouched.at(100, 100) == 1.5f);

  PixelRect full{0, 639, 0, 479, false, 320.0, false};
  DepthImage wiped = invalidate_depth(depth, ObstacleMask::from_rects(0, 640, 480, {full}));
  for (int v = 0; v < 480; v += 37)
    for (int u = 0; u < 640; u += 41) CHECK(wiped.at(u, v) == 0.0f);

  DepthImage small = DepthImage::constant(10, 10, 1.0f);
  CHECK_THROWS_AS(invalidate_depth(small, mask), ConfigError);
}

TEST_CASE("feature filter: membership and boundary convention") {
  PixelRect rect{400, 450, 0, 479, false, 425.0, false};
  ObstacleMask mask = ObstacleMask::from_rects(0, 640, 480, {rect});
  std::vector<Keypoint> kps = {{420.0, 100.0, 0, false},   // inside
                               {450.0, 10.0, 0, false},    // on col_max: removed
                               {451.0, 10.0, 0, false},    // just outside
                               {10.0, 10.0, 0, false}};
  std::vector<Keypoint> kept = filter_features(kps, mask);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].u == 451.0);
  CHECK(kept[1].u == 10.0);

  ObstacleMask empty = ObstacleMask::from_rects(0, 640, 480, {});
  CHECK(filter_features(kps, empty).size() == kps.size());
}

TEST_CASE("validity map: brute-force equivalence on random rectangles") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<PixelRect> rects;
    int count = static_cast<int>(rng() % 5);
    for (int i = 0; i < count; ++i) {
      int a = static_cast<int>(rng() % 64), b = static_cast<int>(rng() % 64);
      int c = static_cast<int>(rng() % 48), d = static_cast<int>(rng() % 48);
      rects.push_back({std::min(a, b), std::max(a, b), std::min(c, d), std::max(c, d), false,
                       0.0, false});
    }
    ObstacleMask mask = ObstacleMask::from_rects(0, 64, 48, rects);
    for (int v = 0; v < 48; ++v)
      for (int u = 0; u < 64; ++u) {
        bool inside = false;
        for (const PixelRect& r : rects)
          inside = inside || (u >= r.col_min && u <= r.col_max && v >= r.row_min &&
                              v <= r.row_max);
        CHECK(mask.valid_at(u, v) == !inside);
      }
  }
}

TEST_CASE("far-field substitution: camera-depth stand-in stays within 2 px") {
  CameraModel cam = default_camera();  // 7.4 cm baseline in the extrinsic
  for (double az = -40.0; az <= 40.0; az += 2.5) {
    double range = 2.0;
    Eigen::Vector3d p_mic = range * azimuth_direction(az);
    Eigen::Vector3d p_cam = cam.T_mic_cam.inverse() * p_mic;
    REQUIRE(p_cam.z() > 0);
    double exact_col = cam.cx + cam.fx * p_cam.x() / p_cam.z();
    if (exact_col < 0 || exact_col > 639) continue;

    // The camera's depth map reports the camera-frame depth of the source,
    // not the array-frame range; the projection uses it as a stand-in.
    double depth_from_camera = p_cam.z();
    ColumnProjection ours = azimuth_to_column(az, cam, depth_from_camera);
    CHECK(std::abs(ours.column - exact_col) < 2.0);
  }
}
