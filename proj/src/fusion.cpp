#include "af/fusion.hpp"

#include <cmath>

namespace af {

void CameraModel::validate() const {
  if (!(fx > 0) || !(fy > 0)) throw ConfigError("camera: focal lengths must be positive");
  if (width < 1 || height < 1) throw ConfigError("camera: image size must be positive");
  if (!(fov_deg > 0) || fov_deg >= 180.0)
    throw ConfigError("camera: fov must be in (0, 180) degrees");
  Eigen::Matrix3d r = T_mic_cam.linear();
  if ((r * r.transpose() - Eigen::Matrix3d::Identity()).norm() > 1e-9)
    throw ConfigError("camera: extrinsic rotation is not orthonormal");
  if (std::abs(r.determinant() - 1.0) > 1e-9)
    throw ConfigError("camera: extrinsic rotation must have determinant +1");
}

CameraModel parse_camera(const toml::Table& doc) {
  CameraModel cam;
  cam.fx = doc.at("fx").as_double();
  cam.fy = doc.at("fy").as_double();
  cam.cx = doc.at("cx").as_double();
  cam.cy = doc.at("cy").as_double();
  cam.width = static_cast<int>(doc.at("width").as_int());
  cam.height = static_cast<int>(doc.at("height").as_int());
  cam.fov_deg = doc.get_double("fov_deg", 90.0);

  if (doc.has("extrinsic_quat")) {
    std::vector<double> q = doc.at("extrinsic_quat").as_double_array();
    if (q.size() != 4) throw ConfigError("camera: extrinsic_quat must be [w, x, y, z]");
    Eigen::Quaterniond quat(q[0], q[1], q[2], q[3]);
    if (quat.norm() == 0.0) throw ConfigError("camera: zero quaternion");
    quat.normalize();
    cam.T_mic_cam.linear() = quat.toRotationMatrix();
  }
  if (doc.has("extrinsic_t")) {
    std::vector<double> t = doc.at("extrinsic_t").as_double_array();
    if (t.size() != 3) throw ConfigError("camera: extrinsic_t must be [x, y, z]");
    cam.T_mic_cam.translation() = Eigen::Vector3d(t[0], t[1], t[2]);
  }
  cam.validate();
  return cam;
}

CameraModel load_camera(const std::string& path) {
  try {
    return parse_camera(toml::parse_file(path));
  } catch (const toml::ParseError& e) {
    throw ConfigError("camera '" + path + "': " + e.what());
  }
}

DepthImage DepthImage::constant(int width, int height, float value) {
  DepthImage d;
  d.width = width;
  d.height = height;
  d.data.assign(static_cast<std::size_t>(width) * height, value);
  return d;
}

Eigen::Vector2d project_point(const Eigen::Vector3d& p_cam, const CameraModel& cam) {
  if (!(p_cam.z() > 0.0)) throw RuntimeFailure("projection: point behind the image plane");
  return {cam.cx + cam.fx * p_cam.x() / p_cam.z(), cam.cy + cam.fy * p_cam.y() / p_cam.z()};
}

Eigen::Vector3d back_project(const Eigen::Vector2d& px, double depth, const CameraModel& cam) {
  return {(px.x() - cam.cx) / cam.fx * depth, (px.y() - cam.cy) / cam.fy * depth, depth};
}

Eigen::Vector2d warp_pixel(const Eigen::Vector2d& px, const Eigen::Isometry3d& transform,
                           const DepthImage& depth, const CameraModel& cam) {
  int u = static_cast<int>(std::lround(px.x()));
  int v = static_cast<int>(std::lround(px.y()));
  if (u < 0 || v < 0 || u >= depth.width || v >= depth.height)
    throw RuntimeFailure("warp: pixel outside the depth image");
  double z = depth.at(u, v);
  if (!(z > 0.0)) throw RuntimeFailure("warp: invalid depth at source pixel");
  Eigen::Vector3d p = transform * back_project(px, z, cam);
  return project_point(p, cam);
}

ColumnProjection azimuth_to_column(double azimuth_deg, const CameraModel& cam, double range_m) {
  Eigen::Vector3d dir_mic = azimuth_direction(azimuth_deg);
  Eigen::Vector3d p_cam;
  if (std::isfinite(range_m)) {
    if (!(range_m > 0.0)) throw ConfigError("azimuth_to_column: range must be positive");
    p_cam = cam.T_mic_cam.inverse() * (range_m * dir_mic);
  } else {
    p_cam = cam.T_mic_cam.linear().transpose() * dir_mic;  // direction only
  }

  ColumnProjection out;
  out.phi_cam_deg = rad_to_deg(std::atan2(p_cam.x(), p_cam.z()));

  const double half_fov = cam.fov_deg / 2.0;
  if (std::abs(out.phi_cam_deg) < half_fov) {
    double col = cam.cx + cam.fx * (p_cam.x() / p_cam.z());
    out.column = std::min(std::max(col, 0.0), static_cast<double>(cam.width - 1));
    out.clamped = false;
  } else {
    out.column = out.phi_cam_deg > 0.0 ? static_cast<double>(cam.width - 1) : 0.0;
    out.clamped = true;
  }
  return out;
}

PixelRect region_to_rectangle(double center_deg, double left_deg, double right_deg,
                              const CameraModel& cam, double range_m) {
  ColumnProjection center = azimuth_to_column(center_deg, cam, range_m);
  ColumnProjection a = azimuth_to_column(left_deg, cam, range_m);
  ColumnProjection b = azimuth_to_column(right_deg, cam, range_m);

  PixelRect rect;
  rect.center_col = center.column;
  rect.center_clamped = center.clamped;
  rect.row_min = 0;
  rect.row_max = cam.height - 1;

  double lo = std::min(a.column, b.column);
  double hi = std::max(a.column, b.column);
  rect.col_min = static_cast<int>(std::lround(lo));
  rect.col_max = static_cast<int>(std::lround(hi));
  rect.col_min = std::min(std::max(rect.col_min, 0), cam.width - 1);
  rect.col_max = std::min(std::max(rect.col_max, 0), cam.width - 1);

  // Entirely out of view: boundaries and center all clamp to one border.
  if (a.clamped && b.clamped && center.clamped && a.column == b.column &&
      a.column == center.column) {
    rect.out_of_view = true;
    rect.col_min = rect.col_max = static_cast<int>(center.column);
  }
  return rect;
}

ObstacleMask ObstacleMask::from_rects(long frame, int width, int height,
                                      const std::vector<PixelRect>& rects) {
  ObstacleMask mask;
  mask.frame = frame;
  mask.width = width;
  mask.height = height;
  mask.valid.assign(static_cast<std::size_t>(width) * height, 1);
  for (const PixelRect& r : rects) {
    if (r.out_of_view) continue;
    mask.rects.push_back(r);
    for (int v = std::max(0, r.row_min); v <= std::min(height - 1, r.row_max); ++v) {
      std::uint8_t* row = mask.valid.data() + static_cast<std::size_t>(v) * width;
      for (int u = std::max(0, r.col_min); u <= std::min(width - 1, r.col_max); ++u) row[u] = 0;
    }
  }
  return mask;
}

DepthImage invalidate_depth(const DepthImage& depth, const ObstacleMask& mask) {
  if (depth.width != mask.width || depth.height != mask.height)
    throw ConfigError("invalidate_depth: dimension mismatch");
  DepthImage out = depth;
  for (int v = 0; v < depth.height; ++v)
    for (int u = 0; u < depth.width; ++u)
      if (!mask.valid_at(u, v)) out.at(u, v) = 0.0f;
  return out;
}

std::vector<Keypoint> filter_features(const std::vector<Keypoint>& keypoints,
                                      const ObstacleMask& mask) {
  std::vector<Keypoint> kept;
  kept.reserve(keypoints.size());
  for (const Keypoint& kp : keypoints) {
    bool inside_rect = false;
    for (const PixelRect& r : mask.rects) {
      if (kp.u >= r.col_min && kp.u <= r.col_max && kp.v >= r.row_min && kp.v <= r.row_max) {
        inside_rect = true;
        break;
      }
    }
    if (!inside_rect) kept.push_back(kp);
  }
  return kept;
}

}  // namespace af
