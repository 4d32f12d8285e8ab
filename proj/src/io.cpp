#include "af/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace af {

namespace {

// Reads one PGM header token, skipping whitespace and '#' comments.
std::string pgm_token(std::istream& in) {
  std::string tok;
  for (;;) {
    int c = in.get();
    if (c == EOF) throw ConfigError("pgm: truncated header");
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    if (c == '#') {
      std::string line;
      std::getline(in, line);
      if (!tok.empty()) return tok;
      continue;
    }
    tok += static_cast<char>(c);
  }
}

void read_pgm_header(std::istream& in, int& width, int& height, int& maxval) {
  if (pgm_token(in) != "P5") throw ConfigError("pgm: expected binary P5 format");
  width = std::stoi(pgm_token(in));
  height = std::stoi(pgm_token(in));
  maxval = std::stoi(pgm_token(in));
  if (width < 1 || height < 1) throw ConfigError("pgm: bad dimensions");
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

bool numeric_token(const std::string& s) {
  try {
    std::size_t used = 0;
    (void)std::stod(s, &used);
    return used == s.size() && !s.empty();
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace

void write_mask_pgm(const std::string& path, const ObstacleMask& mask) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("pgm: cannot write '" + path + "'");
  out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(mask.width));
  for (int v = 0; v < mask.height; ++v) {
    for (int u = 0; u < mask.width; ++u)
      row[static_cast<std::size_t>(u)] = mask.valid_at(u, v) ? 255 : 0;
    out.write(reinterpret_cast<const char*>(row.data()), mask.width);
  }
}

std::vector<std::uint8_t> read_pgm8(const std::string& path, int& width, int& height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("pgm: cannot open '" + path + "'");
  int maxval = 0;
  read_pgm_header(in, width, height, maxval);
  if (maxval != 255) throw ConfigError("pgm: expected 8-bit data in '" + path + "'");
  std::vector<std::uint8_t> data(static_cast<std::size_t>(width) * height);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!in) throw ConfigError("pgm: truncated data in '" + path + "'");
  return data;
}

void write_depth_pgm(const std::string& path, const DepthImage& depth) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("pgm: cannot write '" + path + "'");
  out << "P5\n" << depth.width << " " << depth.height << "\n65535\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(depth.width) * 2);
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      double mm = std::max(0.0, static_cast<double>(depth.at(u, v)) * 1000.0);
      unsigned value = static_cast<unsigned>(std::min(65535L, std::lround(mm)));
      row[static_cast<std::size_t>(u) * 2] = static_cast<unsigned char>(value >> 8);
      row[static_cast<std::size_t>(u) * 2 + 1] = static_cast<unsigned char>(value & 0xFF);
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
}

DepthImage read_depth_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("pgm: cannot open '" + path + "'");
  int width = 0, height = 0, maxval = 0;
  read_pgm_header(in, width, height, maxval);
  if (maxval != 65535) throw ConfigError("pgm: expected 16-bit depth in '" + path + "'");
  DepthImage depth = DepthImage::constant(width, height, 0.0f);
  std::vector<unsigned char> row(static_cast<std::size_t>(width) * 2);
  for (int v = 0; v < height; ++v) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
    if (!in) throw ConfigError("pgm: truncated data in '" + path + "'");
    for (int u = 0; u < width; ++u) {
      unsigned value = (static_cast<unsigned>(row[static_cast<std::size_t>(u) * 2]) << 8) |
                       row[static_cast<std::size_t>(u) * 2 + 1];
      depth.at(u, v) = static_cast<float>(value) / 1000.0f;
    }
  }
  return depth;
}

std::vector<Keypoint> read_keypoints_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("keypoints: cannot open '" + path + "'");
  std::vector<Keypoint> kps;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> cols = split_csv_line(line);
    if (first) {
      first = false;
      if (!cols.empty() && !numeric_token(cols[0])) continue;  // header row
    }
    if (cols.size() < 2) throw ConfigError("keypoints: need at least u,v in '" + path + "'");
    Keypoint kp;
    kp.u = std::stod(cols[0]);
    kp.v = std::stod(cols[1]);
    if (cols.size() >= 3 && !cols[2].empty()) {
      kp.score = std::stod(cols[2]);
      kp.has_score = true;
    }
    kps.push_back(kp);
  }
  return kps;
}

void write_keypoints_csv(const std::string& path, const std::vector<Keypoint>& kps) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("keypoints: cannot write '" + path + "'");
  out << "u,v,score\n";
  char buf[96];
  for (const Keypoint& kp : kps) {
    if (kp.has_score)
      std::snprintf(buf, sizeof(buf), "%.3f,%.3f,%.6g\n", kp.u, kp.v, kp.score);
    else
      std::snprintf(buf, sizeof(buf), "%.3f,%.3f,\n", kp.u, kp.v);
    out << buf;
  }
}

std::vector<CameraStreamEntry> read_camera_stream(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("camera stream: cannot open '" + path + "'");
  std::filesystem::path base = std::filesystem::path(path).parent_path();

  std::vector<CameraStreamEntry> entries;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> cols = split_csv_line(line);
    if (first) {
      first = false;
      if (!cols.empty() && !numeric_token(cols[0])) continue;
    }
    if (cols.size() < 1) continue;
    CameraStreamEntry e;
    e.t = std::stod(cols[0]);
    auto resolve = [&](const std::string& rel) {
      if (rel.empty()) return std::string();
      std::filesystem::path p(rel);
      return p.is_absolute() ? p.string() : (base / p).string();
    };
    if (cols.size() >= 2) e.depth_path = resolve(cols[1]);
    if (cols.size() >= 3) e.keypoints_path = resolve(cols[2]);
    entries.push_back(std::move(e));
  }
  return entries;
}

}  // namespace af
