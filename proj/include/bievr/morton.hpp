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

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "bievr/lie.hpp"

namespace bievr {

// 21 bits per axis, signed grid coordinates biased by kMortonOffset.
inline constexpr std::int64_t kMortonOffset = 1 << 20;
inline constexpr std::int64_t kMortonMaxCoord = (1 << 20) - 1;

namespace detail {

// Spreads the low 21 bits of x so that they occupy every third bit.
inline std::uint64_t spread_bits_3(std::uint64_t x) {
  x &= 0x1fffffULL;
  x = (x | x << 32) & 0x1f00000000ffffULL;
  x = (x | x << 16) & 0x1f0000ff0000ffULL;
  x = (x | x << 8) & 0x100f00f00f00f00fULL;
  x = (x | x << 4) & 0x10c30c30c30c30c3ULL;
  x = (x | x << 2) & 0x1249249249249249ULL;
  return x;
}

inline std::uint64_t compact_bits_3(std::uint64_t x) {
  x &= 0x1249249249249249ULL;
  x = (x ^ (x >> 2)) & 0x10c30c30c30c30c3ULL;
  x = (x ^ (x >> 4)) & 0x100f00f00f00f00fULL;
  x = (x ^ (x >> 8)) & 0x1f0000ff0000ffULL;
  x = (x ^ (x >> 16)) & 0x1f00000000ffffULL;
  x = (x ^ (x >> 32)) & 0x1fffffULL;
  return x;
}

}  // namespace detail

/// Morton-packed voxel grid coordinate.
struct VoxelKey {
  std::uint64_t code = 0;

  bool operator==(const VoxelKey&) const = default;
  auto operator<=>(const VoxelKey&) const = default;
};

inline VoxelKey morton_encode(std::int64_t i, std::int64_t j, std::int64_t k) {
  if (std::abs(i) > kMortonMaxCoord || std::abs(j) > kMortonMaxCoord ||
      std::abs(k) > kMortonMaxCoord) {
    throw std::out_of_range("morton_encode: grid coordinate out of range");
  }
  const std::uint64_t bi = static_cast<std::uint64_t>(i + kMortonOffset);
  const std::uint64_t bj = static_cast<std::uint64_t>(j + kMortonOffset);
  const std::uint64_t bk = static_cast<std::uint64_t>(k + kMortonOffset);
  return VoxelKey{detail::spread_bits_3(bi) | detail::spread_bits_3(bj) << 1 |
                  detail::spread_bits_3(bk) << 2};
}

inline std::array<std::int64_t, 3> morton_decode(VoxelKey key) {
  return {
      static_cast<std::int64_t>(detail::compact_bits_3(key.code)) - kMortonOffset,
      static_cast<std::int64_t>(detail::compact_bits_3(key.code >> 1)) - kMortonOffset,
      static_cast<std::int64_t>(detail::compact_bits_3(key.code >> 2)) - kMortonOffset};
}

/// Grid cell of a world point; boundary points go to floor(p / cell_len).
inline std::array<std::int64_t, 3> grid_coords_of(const Vec3& p_world, double cell_len) {
  return {static_cast<std::int64_t>(std::floor(p_world.x() / cell_len)),
          static_cast<std::int64_t>(std::floor(p_world.y() / cell_len)),
          static_cast<std::int64_t>(std::floor(p_world.z() / cell_len))};
}

inline VoxelKey voxel_key_of(const Vec3& p_world, double voxel_len) {
  const auto g = grid_coords_of(p_world, voxel_len);
  return morton_encode(g[0], g[1], g[2]);
}

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const noexcept {
    // Fibonacci scrambling; Morton codes cluster in the low bits.
    return static_cast<std::size_t>(k.code * 0x9e3779b97f4a7c15ULL);
  }
};

}  // namespace bievr
