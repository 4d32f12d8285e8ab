// File formats used at the pipeline boundary: binary PGM masks (8-bit,
// 255 = valid) and depth maps (16-bit big-endian, millimeters), keypoint
// CSVs of (u, v[, score]) and the camera stream index.

#pragma once

#include <string>
#include <vector>

#include "af/common.hpp"
#include "af/fusion.hpp"

namespace af {

void write_mask_pgm(const std::string& path, const ObstacleMask& mask);
std::vector<std::uint8_t> read_pgm8(const std::string& path, int& width, int& height);

void write_depth_pgm(const std::string& path, const DepthImage& depth);
DepthImage read_depth_pgm(const std::string& path);

std::vector<Keypoint> read_keypoints_csv(const std::string& path);
void write_keypoints_csv(const std::string& path, const std::vector<Keypoint>& kps);

struct CameraStreamEntry {
  double t = 0.0;
  std::string depth_path;      // may be empty
  std::string keypoints_path;  // may be empty
};

// Index file: header "t,depth,keypoints", one row per camera frame; the
// paths are resolved relative to the index file's directory.
std::vector<CameraStreamEntry> read_camera_stream(const std::string& path);

}  // namespace af
