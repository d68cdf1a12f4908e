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
#include <random>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "bievr/morton.hpp"
#include "bievr/voxel_map.hpp"

namespace bievr {

enum class SamplingMode {
  kInformedDual,     // ID: fine inside the top-MID voxels, coarse elsewhere
  kHighResolution,   // HR: fine everywhere
  kRandomDual,       // RD: fine inside randomly chosen voxels
};

struct SamplingConfig {
  double fine_res = 0.1;
  double coarse_res = 0.5;
  std::size_t top_k_voxels = 300;
  SamplingMode mode = SamplingMode::kInformedDual;
  std::uint64_t random_seed = 0;  // RD mode only
};

/// Keeps at most one point per res-cell: the one closest to the cell center
/// (first along the input on ties). Output ordered by ascending cell Morton
/// code. Returns indices into `points`.
inline std::vector<std::size_t> grid_downsample_indices(
    std::span<const Vec3> points, double res) {
  struct Best {
    std::size_t index;
    double dist2;
  };
  std::unordered_map<VoxelKey, Best, VoxelKeyHash> cells;
  cells.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto g = grid_coords_of(points[i], res);
    const VoxelKey key = morton_encode(g[0], g[1], g[2]);
    const Vec3 center((g[0] + 0.5) * res, (g[1] + 0.5) * res,
                      (g[2] + 0.5) * res);
    const double d2 = (points[i] - center).squaredNorm();
    auto [it, inserted] = cells.try_emplace(key, Best{i, d2});
    if (!inserted && d2 < it->second.dist2) it->second = Best{i, d2};
  }
  std::vector<std::pair<VoxelKey, std::size_t>> ordered;
  ordered.reserve(cells.size());
  for (const auto& [key, best] : cells) ordered.emplace_back(key, best.index);
  std::sort(ordered.begin(), ordered.end());
  std::vector<std::size_t> out;
  out.reserve(ordered.size());
  for (const auto& [key, index] : ordered) out.push_back(index);
  return out;
}

inline std::vector<Vec3> grid_downsample(std::span<const Vec3> points,
                                         double res) {
  std::vector<Vec3> out;
  for (std::size_t i : grid_downsample_indices(points, res)) {
    out.push_back(points[i]);
  }
  return out;
}

/// Two-stage map-informed selection over a world-frame scan (already at the
/// IMU prior pose). Stage 1 downsamples at fine_res and keeps every point
/// inside the top_k touched voxels ranked by MID (ties to the lower Morton
/// key); stage 2 downsamples the remaining stage-1 survivors at coarse_res.
/// HR stops after the fine downsample; RD ranks voxels by a seeded shuffle
/// instead of MID. Returns indices into `scan_world`.
inline std::vector<std::size_t> informed_sample_indices(
    std::span<const Vec3> scan_world, const VoxelMap& map,
    const SamplingConfig& cfg) {
  const std::vector<std::size_t> fine =
      grid_downsample_indices(scan_world, cfg.fine_res);
  if (cfg.mode == SamplingMode::kHighResolution) return fine;

  const double voxel_len = map.config().voxel_len;
  std::vector<VoxelKey> fine_keys(fine.size());
  std::unordered_map<VoxelKey, double, VoxelKeyHash> touched;
  for (std::size_t i = 0; i < fine.size(); ++i) {
    const VoxelKey key = voxel_key_of(scan_world[fine[i]], voxel_len);
    fine_keys[i] = key;
    if (touched.count(key)) continue;
    const Voxel* voxel = map.find(key);
    if (voxel != nullptr) touched.emplace(key, voxel->mean_image_distance());
  }

  std::vector<std::pair<VoxelKey, double>> candidates(touched.begin(),
                                                      touched.end());
  std::sort(candidates.begin(), candidates.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  if (cfg.mode == SamplingMode::kRandomDual) {
    std::mt19937_64 rng(cfg.random_seed);
    std::shuffle(candidates.begin(), candidates.end(), rng);
  } else {
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const auto& a, const auto& b) {
                       return a.second > b.second;
                     });
  }

  std::unordered_set<VoxelKey, VoxelKeyHash> selected;
  const std::size_t k = std::min(cfg.top_k_voxels, candidates.size());
  for (std::size_t i = 0; i < k; ++i) selected.insert(candidates[i].first);

  std::vector<std::size_t> retained;
  std::vector<std::size_t> remainder;
  for (std::size_t i = 0; i < fine.size(); ++i) {
    if (selected.count(fine_keys[i])) {
      retained.push_back(fine[i]);
    } else {
      remainder.push_back(fine[i]);
    }
  }

  std::vector<Vec3> remainder_points;
  remainder_points.reserve(remainder.size());
  for (std::size_t i : remainder) remainder_points.push_back(scan_world[i]);
  for (std::size_t j :
       grid_downsample_indices(remainder_points, cfg.coarse_res)) {
    retained.push_back(remainder[j]);
  }
  return retained;
}

inline std::vector<Vec3> informed_sample(std::span<const Vec3> scan_world,
                                         const VoxelMap& map,
                                         const SamplingConfig& cfg) {
  std::vector<Vec3> out;
  for (std::size_t i : informed_sample_indices(scan_world, map, cfg)) {
    out.push_back(scan_world[i]);
  }
  return out;
}

}  // namespace bievr
