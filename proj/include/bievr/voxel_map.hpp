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

#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "bievr/morton.hpp"
#include "bievr/voxel.hpp"

namespace bievr {

struct MapConfig {
  double voxel_len = 0.5;
  double pixel_res = 0.05;
  double normal_reproject_thresh = 3.0 * M_PI / 180.0;
  // Minimum middle-to-largest eigenvalue ratio before a plane is trusted;
  // rejects line-like point sets (single scan rings crossing a voxel).
  double min_planarity_ratio = 0.05;
  std::size_t capacity = 2'000'000;
  std::size_t min_points_for_plane = 6;
  unsigned num_threads = 0;  // 0: hardware concurrency
};

struct IntegrationStats {
  std::size_t voxels_touched = 0;
  std::size_t voxels_created = 0;
  std::size_t voxels_evicted = 0;
  std::size_t frames_initialized = 0;
  std::size_t frames_reprojected = 0;
  std::size_t points_outside_image = 0;
};

/// Morton-hashed voxel table with LRU eviction. One writer phase
/// (integrate_scan) and one reader phase (lookups) per pipeline step;
/// within a writer phase distinct voxels are updated concurrently.
class VoxelMap {
 public:
  explicit VoxelMap(const MapConfig& config = {}) : config_(config) {}

  const MapConfig& config() const { return config_; }
  std::size_t size() const { return voxels_.size(); }
  bool empty() const { return voxels_.empty(); }

  const Voxel* find(VoxelKey key) const {
    auto it = voxels_.find(key);
    return it == voxels_.end() ? nullptr : &it->second;
  }
  const Voxel* find_at(const Vec3& p_world) const {
    return find(voxel_key_of(p_world, config_.voxel_len));
  }
  Voxel* find_mutable(VoxelKey key) {
    auto it = voxels_.find(key);
    return it == voxels_.end() ? nullptr : &it->second;
  }

  /// Integrates an undistorted, world-frame scan: per touched voxel the
  /// plane statistics are accumulated, the frame is (re)estimated, the
  /// image updated, the MID refreshed, and the LRU stamp bumped. Eviction
  /// restores the capacity bound afterwards.
  IntegrationStats integrate_scan(std::span<const RangedPoint> points,
                                  const Vec3& sensor_origin) {
    IntegrationStats stats;
    ++update_counter_;

    // Group points by voxel, preserving scan order within each group.
    std::unordered_map<VoxelKey, std::vector<RangedPoint>, VoxelKeyHash> groups;
    groups.reserve(points.size() / 8 + 1);
    for (const RangedPoint& rp : points) {
      groups[voxel_key_of(rp.position, config_.voxel_len)].push_back(rp);
    }
    stats.voxels_touched = groups.size();

    // Create missing voxels serially; updates then own disjoint entries.
    std::vector<std::pair<Voxel*, const std::vector<RangedPoint>*>> work;
    work.reserve(groups.size());
    for (auto& [key, group] : groups) {
      auto it = voxels_.find(key);
      if (it == voxels_.end()) {
        const auto g = morton_decode(key);
        const Vec3 vox_min(g[0] * config_.voxel_len, g[1] * config_.voxel_len,
                           g[2] * config_.voxel_len);
        it = voxels_
                 .emplace(key, Voxel(vox_min, config_.voxel_len,
                                     config_.pixel_res))
                 .first;
        ++stats.voxels_created;
      }
      work.emplace_back(&it->second, &group);
    }

    struct Counters {
      std::size_t initialized = 0, reprojected = 0, outside = 0;
    };
    auto update_voxel = [&](Voxel& voxel, const std::vector<RangedPoint>& group,
                            Counters& c) {
      std::vector<Vec3> positions;
      positions.reserve(group.size());
      for (const RangedPoint& rp : group) positions.push_back(rp.position);
      voxel.update_plane_stats(positions);
      if (voxel.num_points() >= config_.min_points_for_plane) {
        switch (voxel.update_normal_frame(sensor_origin,
                                          config_.normal_reproject_thresh,
                                          config_.min_planarity_ratio)) {
          case Voxel::FrameEvent::kInitialized: ++c.initialized; break;
          case Voxel::FrameEvent::kReprojected: ++c.reprojected; break;
          case Voxel::FrameEvent::kNone: break;
        }
      }
      if (voxel.frame_initialized()) {
        c.outside += voxel.update_image(group);
      }
      voxel.lru_stamp = update_counter_;
    };

    const unsigned n_threads = std::max(
        1u, config_.num_threads ? config_.num_threads
                                : std::thread::hardware_concurrency());
    if (n_threads <= 1 || work.size() < 2 * n_threads) {
      Counters c;
      for (auto& [voxel, group] : work) update_voxel(*voxel, *group, c);
      stats.frames_initialized = c.initialized;
      stats.frames_reprojected = c.reprojected;
      stats.points_outside_image = c.outside;
    } else {
      std::vector<Counters> counters(n_threads);
      std::vector<std::thread> threads;
      threads.reserve(n_threads);
      for (unsigned t = 0; t < n_threads; ++t) {
        threads.emplace_back([&, t] {
          for (std::size_t i = t; i < work.size(); i += n_threads) {
            update_voxel(*work[i].first, *work[i].second, counters[t]);
          }
        });
      }
      for (auto& th : threads) th.join();
      for (const Counters& c : counters) {
        stats.frames_initialized += c.initialized;
        stats.frames_reprojected += c.reprojected;
        stats.points_outside_image += c.outside;
      }
    }

    stats.voxels_evicted = evict_to_capacity();
    return stats;
  }

  /// Removes least-recently-updated voxels (ties by ascending Morton key)
  /// until the table fits the configured capacity.
  std::size_t evict_to_capacity() {
    if (voxels_.size() <= config_.capacity) return 0;
    const std::size_t excess = voxels_.size() - config_.capacity;
    std::vector<std::pair<std::uint64_t, VoxelKey>> order;
    order.reserve(voxels_.size());
    for (const auto& [key, voxel] : voxels_) {
      order.emplace_back(voxel.lru_stamp, key);
    }
    std::nth_element(order.begin(), order.begin() + excess - 1, order.end());
    std::sort(order.begin(), order.begin() + excess);
    for (std::size_t i = 0; i < excess; ++i) voxels_.erase(order[i].second);
    return excess;
  }

  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (const auto& [key, voxel] : voxels_) fn(key, voxel);
  }

  std::uint64_t update_counter() const { return update_counter_; }

  // --- snapshot I/O ---------------------------------------------------------
  //
  // Binary layout (little-endian):
  //   magic   "BIEVRMAP" (8 bytes)
  //   u32     version (1)
  //   f64     voxel_len, pixel_res
  //   u64     voxel count
  //   per voxel:
  //     u64   Morton key
  //     f64x9 T_CG rotation, row-major
  //     f64x3 T_CG translation
  //     u32   image width, u32 image height
  //     f64x2 per pixel, row-major: height value, weight (weight 0 ==
  //           unobserved)

  void save_snapshot(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open map snapshot: " + path);
    out.write("BIEVRMAP", 8);
    write_pod<std::uint32_t>(out, 1);
    write_pod(out, config_.voxel_len);
    write_pod(out, config_.pixel_res);

    std::vector<VoxelKey> keys;
    keys.reserve(voxels_.size());
    for (const auto& [key, voxel] : voxels_) {
      if (voxel.frame_initialized()) keys.push_back(key);
    }
    std::sort(keys.begin(), keys.end());
    write_pod<std::uint64_t>(out, keys.size());

    for (VoxelKey key : keys) {
      const Voxel& voxel = voxels_.at(key);
      write_pod(out, key.code);
      const SE3& t = voxel.image_from_world();
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) write_pod(out, t.rotation(r, c));
      for (int r = 0; r < 3; ++r) write_pod(out, t.translation[r]);
      const BumpImage& img = voxel.image();
      write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(img.width()));
      write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(img.height()));
      for (std::size_t i = 0; i < img.values().size(); ++i) {
        write_pod(out, img.values()[i]);
        write_pod(out, img.weights()[i]);
      }
    }
  }

  struct SnapshotVoxel {
    VoxelKey key;
    SE3 image_from_world;
    BumpImage image;
  };

  struct Snapshot {
    double voxel_len = 0.0;
    double pixel_res = 0.0;
    std::vector<SnapshotVoxel> voxels;
  };

  static Snapshot load_snapshot(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open map snapshot: " + path);
    char magic[8];
    in.read(magic, 8);
    if (std::string(magic, 8) != "BIEVRMAP")
      throw std::runtime_error("bad map snapshot magic");
    if (read_pod<std::uint32_t>(in) != 1)
      throw std::runtime_error("unsupported map snapshot version");

    Snapshot snap;
    snap.voxel_len = read_pod<double>(in);
    snap.pixel_res = read_pod<double>(in);
    const auto count = read_pod<std::uint64_t>(in);
    snap.voxels.resize(count);
    for (auto& sv : snap.voxels) {
      sv.key.code = read_pod<std::uint64_t>(in);
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
          sv.image_from_world.rotation(r, c) = read_pod<double>(in);
      for (int r = 0; r < 3; ++r)
        sv.image_from_world.translation[r] = read_pod<double>(in);
      const auto w = read_pod<std::uint32_t>(in);
      const auto h = read_pod<std::uint32_t>(in);
      BumpImage img(static_cast<int>(w), static_cast<int>(h), snap.pixel_res);
      for (int v = 0; v < img.height(); ++v) {
        for (int u = 0; u < img.width(); ++u) {
          const double value = read_pod<double>(in);
          const double weight = read_pod<double>(in);
          img.set_pixel(u, v, value, weight);
        }
      }
      sv.image = std::move(img);
    }
    if (!in) throw std::runtime_error("truncated map snapshot");
    return snap;
  }

  void dump_text(std::ostream& out) const {
    std::vector<VoxelKey> keys;
    for (const auto& [key, voxel] : voxels_) keys.push_back(key);
    std::sort(keys.begin(), keys.end());
    for (VoxelKey key : keys) {
      const Voxel& voxel = voxels_.at(key);
      const auto g = morton_decode(key);
      out << "voxel " << key.code << " grid " << g[0] << ' ' << g[1] << ' '
          << g[2] << " n " << voxel.num_points() << " mid "
          << voxel.mean_image_distance() << " stamp " << voxel.lru_stamp;
      if (voxel.frame_initialized()) {
        const Vec3& n = voxel.normal();
        out << " normal " << n.x() << ' ' << n.y() << ' ' << n.z() << " image "
            << voxel.image().width() << 'x' << voxel.image().height()
            << " observed " << voxel.image().observed_count();
      } else {
        out << " (no frame)";
      }
      out << '\n';
    }
  }

 private:
  template <typename T>
  static void write_pod(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }
  template <typename T>
  static T read_pod(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    return value;
  }

  MapConfig config_;
  std::unordered_map<VoxelKey, Voxel, VoxelKeyHash> voxels_;
  std::uint64_t update_counter_ = 0;
};

}  // namespace bievr
