// Projection of sound-source azimuths and angular regions into an RGB-D
// camera image: pixel warping between the camera and microphone frames,
// azimuth-ray to image-column intersection with field-of-view clamping,
// obstacle rectangles, depth invalidation and keypoint filtering.

#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <limits>
#include <string>
#include <vector>

#include "af/common.hpp"
#include "af/toml.hpp"

namespace af {

struct CameraModel {
  double fx = 0, fy = 0, cx = 0, cy = 0;  // pixels
  int width = 0, height = 0;
  double fov_deg = 90.0;  // horizontal field of view

  // Pose of the camera frame in the microphone frame: p_mic = T * p_cam.
  // Camera axes: +z optical axis, +x right, +y down. Microphone axes:
  // +x forward (azimuth 0), +y left, +z up.
  Eigen::Isometry3d T_mic_cam = Eigen::Isometry3d::Identity();

  void validate() const;
};

CameraModel parse_camera(const toml::Table& doc);
CameraModel load_camera(const std::string& path);

struct DepthImage {
  int width = 0, height = 0;
  std::vector<float> data;  // row-major, meters, 0 = invalid

  static DepthImage constant(int width, int height, float value);
  float at(int u, int v) const { return data[static_cast<std::size_t>(v) * width + u]; }
  float& at(int u, int v) { return data[static_cast<std::size_t>(v) * width + u]; }
};

// Pinhole projection and back-projection.
Eigen::Vector2d project_point(const Eigen::Vector3d& p_cam, const CameraModel& cam);
Eigen::Vector3d back_project(const Eigen::Vector2d& px, double depth, const CameraModel& cam);

// W(x, T, D) = project(T * back_project(x, D(x))). Depth is sampled at the
// nearest pixel; throws RuntimeFailure on invalid depth or a point that
// lands behind the target image plane.
Eigen::Vector2d warp_pixel(const Eigen::Vector2d& px, const Eigen::Isometry3d& transform,
                           const DepthImage& depth, const CameraModel& cam);

struct ColumnProjection {
  double column = 0.0;
  bool clamped = false;   // azimuth outside the horizontal field of view
  double phi_cam_deg = 0.0;
};

// Intersects the azimuth ray with the image plane: column = cx + fx tan(phi)
// with phi re-expressed in the camera frame. A finite `range_m` places the
// source at that distance from the array origin so the extrinsic translation
// is accounted for; the default treats the source at infinity. Outside the
// field of view the column clamps to the left or right border.
ColumnProjection azimuth_to_column(double azimuth_deg, const CameraModel& cam,
                                   double range_m = std::numeric_limits<double>::infinity());

struct PixelRect {
  int col_min = 0, col_max = 0;
  int row_min = 0, row_max = 0;
  bool out_of_view = false;
  double center_col = 0.0;
  bool center_clamped = false;
};

// Full-height rectangle spanning the projected region boundaries; a region
// entirely outside the field of view collapses to a zero-width rectangle at
// the nearer border and is flagged out_of_view.
PixelRect region_to_rectangle(double center_deg, double left_deg, double right_deg,
                              const CameraModel& cam,
                              double range_m = std::numeric_limits<double>::infinity());

struct ObstacleMask {
  long frame = 0;
  int width = 0, height = 0;
  std::vector<PixelRect> rects;     // in-view rectangles only
  std::vector<std::uint8_t> valid;  // row-major, 1 = usable pixel

  static ObstacleMask from_rects(long frame, int width, int height,
                                 const std::vector<PixelRect>& rects);
  bool valid_at(int u, int v) const {
    return valid[static_cast<std::size_t>(v) * width + u] != 0;
  }
};

// Zeroes depth inside the mask's rectangles; dimensions must match.
DepthImage invalidate_depth(const DepthImage& depth, const ObstacleMask& mask);

struct Keypoint {
  double u = 0, v = 0;
  double score = 0;
  bool has_score = false;
};

// Keeps exactly the keypoints lying in valid pixels. Rectangle membership is
// closed-interval on all edges.
std::vector<Keypoint> filter_features(const std::vector<Keypoint>& keypoints,
                                      const ObstacleMask& mask);

}  // namespace af
