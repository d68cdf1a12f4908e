// Copyright 2026 BIEVR-LIO Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// File formats:
//   Scan (binary, little-endian): magic "BIEVRSC1", u32 version (1),
//     f64 stamp_begin, f64 stamp_end, u64 count, count x (t, x, y, z) f64.
//   Manifest (text): one scan filename per line, relative to the manifest
//     directory; '#' starts a comment.
//   IMU (text): "timestamp_s gx gy gz ax ay az" per line (rad/s, m/s^2).
//   Trajectory (text, TUM): "timestamp tx ty tz qx qy qz qw", 9 significant
//     digits.
//   Elevation grid (text): header "origin_x origin_y cell_res cols rows",
//     then row-major values, "nan" for unknown cells.

#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "bievr/types.hpp"

namespace bievr {

// --- scans -------------------------------------------------------------------

inline void write_scan(const std::string& path, const Scan& scan) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write scan: " + path);
  out.write("BIEVRSC1", 8);
  const std::uint32_t version = 1;
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&scan.stamp_begin), 8);
  out.write(reinterpret_cast<const char*>(&scan.stamp_end), 8);
  const std::uint64_t count = scan.points.size();
  out.write(reinterpret_cast<const char*>(&count), 8);
  for (const TimedPoint& p : scan.points) {
    const double row[4] = {p.timestamp, p.position.x(), p.position.y(),
                           p.position.z()};
    out.write(reinterpret_cast<const char*>(row), sizeof(row));
  }
}

inline Scan read_scan(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read scan: " + path);
  char magic[8];
  in.read(magic, 8);
  if (std::string(magic, 8) != "BIEVRSC1")
    throw std::runtime_error("bad scan magic: " + path);
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), 4);
  if (version != 1) throw std::runtime_error("unsupported scan version");
  Scan scan;
  in.read(reinterpret_cast<char*>(&scan.stamp_begin), 8);
  in.read(reinterpret_cast<char*>(&scan.stamp_end), 8);
  std::uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&count), 8);
  scan.points.resize(count);
  for (TimedPoint& p : scan.points) {
    double row[4];
    in.read(reinterpret_cast<char*>(row), sizeof(row));
    p.timestamp = row[0];
    p.position = Vec3(row[1], row[2], row[3]);
  }
  if (!in) throw std::runtime_error("truncated scan file: " + path);
  return scan;
}

inline void write_manifest(const std::string& path,
                           const std::vector<std::string>& scan_files) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest: " + path);
  out << "# scan files in playback order\n";
  for (const std::string& f : scan_files) out << f << '\n';
}

inline std::vector<std::string> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read manifest: " + path);
  const std::filesystem::path dir = std::filesystem::path(path).parent_path();
  std::vector<std::string> files;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream ss(line);
    std::string name;
    if (ss >> name) files.push_back((dir / name).string());
  }
  return files;
}

// --- IMU ----------------------------------------------------------------------

inline void write_imu(const std::string& path,
                      const std::vector<ImuSample>& samples) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write imu: " + path);
  out << "# timestamp_s gx gy gz ax ay az\n";
  out << std::setprecision(17);
  for (const ImuSample& s : samples) {
    out << s.timestamp << ' ' << s.angular_velocity.x() << ' '
        << s.angular_velocity.y() << ' ' << s.angular_velocity.z() << ' '
        << s.linear_acceleration.x() << ' ' << s.linear_acceleration.y() << ' '
        << s.linear_acceleration.z() << '\n';
  }
}

inline std::vector<ImuSample> read_imu(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read imu: " + path);
  std::vector<ImuSample> samples;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream ss(line);
    ImuSample s;
    if (ss >> s.timestamp >> s.angular_velocity.x() >>
        s.angular_velocity.y() >> s.angular_velocity.z() >>
        s.linear_acceleration.x() >> s.linear_acceleration.y() >>
        s.linear_acceleration.z()) {
      samples.push_back(s);
    }
  }
  return samples;
}

// --- trajectories (TUM) --------------------------------------------------------

inline void write_tum(const std::string& path, const Trajectory& trajectory) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trajectory: " + path);
  out << std::setprecision(9);
  for (const StampedPose& sp : trajectory) {
    const Eigen::Quaterniond q = sp.pose.quaternion().normalized();
    out << sp.timestamp << ' ' << sp.pose.translation.x() << ' '
        << sp.pose.translation.y() << ' ' << sp.pose.translation.z() << ' '
        << q.x() << ' ' << q.y() << ' ' << q.z() << ' ' << q.w() << '\n';
  }
}

inline Trajectory read_tum(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read trajectory: " + path);
  Trajectory trajectory;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream ss(line);
    double t, tx, ty, tz, qx, qy, qz, qw;
    if (ss >> t >> tx >> ty >> tz >> qx >> qy >> qz >> qw) {
      StampedPose sp;
      sp.timestamp = t;
      sp.pose.translation = Vec3(tx, ty, tz);
      sp.pose.rotation =
          Eigen::Quaterniond(qw, qx, qy, qz).normalized().toRotationMatrix();
      trajectory.push_back(sp);
    }
  }
  return trajectory;
}

// --- elevation grids -----------------------------------------------------------

struct ElevationGrid {
  double origin_x = 0.0;
  double origin_y = 0.0;
  double cell_res = 0.05;
  int cols = 0;
  int rows = 0;
  std::vector<double> values;  // row-major, NaN == unknown

  double& at(int col, int row) { return values[row * cols + col]; }
  double at(int col, int row) const { return values[row * cols + col]; }
};

inline void write_elevation(const std::string& path, const ElevationGrid& g) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write elevation grid: " + path);
  out << std::setprecision(9) << g.origin_x << ' ' << g.origin_y << ' '
      << g.cell_res << ' ' << g.cols << ' ' << g.rows << '\n';
  for (int row = 0; row < g.rows; ++row) {
    for (int col = 0; col < g.cols; ++col) {
      if (col) out << ' ';
      const double v = g.at(col, row);
      if (std::isnan(v)) {
        out << "nan";
      } else {
        out << v;
      }
    }
    out << '\n';
  }
}

inline ElevationGrid read_elevation(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read elevation grid: " + path);
  ElevationGrid g;
  in >> g.origin_x >> g.origin_y >> g.cell_res >> g.cols >> g.rows;
  g.values.resize(static_cast<std::size_t>(g.cols) * g.rows);
  for (double& v : g.values) {
    std::string token;
    in >> token;
    v = token == "nan" ? std::numeric_limits<double>::quiet_NaN()
                       : std::stod(token);
  }
  if (!in) throw std::runtime_error("truncated elevation grid: " + path);
  return g;
}

// --- key-value config files -----------------------------------------------------

inline std::vector<std::pair<std::string, std::string>> read_key_values(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config: " + path);
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream ss(line);
    std::string key, value;
    if (ss >> key >> value) entries.emplace_back(key, value);
  }
  return entries;
}

}  // namespace bievr
