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

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "bievr/bump_image.hpp"
#include "bievr/lie.hpp"

namespace bievr {

/// World point paired with its range from the sensor at measurement time.
struct RangedPoint {
  Vec3 position = Vec3::Zero();
  double range = 0.0;
};

struct PlaneFit {
  Vec3 mu = Vec3::Zero();
  Mat3 sigma = Mat3::Zero();
};

/// Unit normal from the smallest eigenvalue of sigma. Nothing when the two
/// smallest eigenvalues are closer than rel_gap relative to the largest
/// (ambiguous normal) or when the middle eigenvalue carries less than
/// min_planarity of the largest: line-like point sets (single scan rings
/// crossing the voxel) have no trustworthy plane yet. Normals within a
/// microradian of a canonical axis snap onto it, which keeps the image
/// footprint of grid-aligned surfaces stable.
inline std::optional<Vec3> plane_normal_of(const Mat3& sigma,
                                           double rel_gap = 1e-9,
                                           double min_planarity = 0.0) {
  Eigen::SelfAdjointEigenSolver<Mat3> es(sigma);
  const Vec3 ev = es.eigenvalues();
  const double scale = std::max(std::abs(ev[2]), 1e-300);
  if ((ev[1] - ev[0]) / scale < rel_gap) return std::nullopt;
  if (ev[1] / scale < min_planarity) return std::nullopt;
  Vec3 normal = es.eigenvectors().col(0).normalized();
  for (int i = 0; i < 3; ++i) {
    if (std::abs(normal[i]) > 1.0 - 1e-8) {
      return Vec3(normal[i] > 0.0 ? Vec3::Unit(i) : Vec3(-Vec3::Unit(i)));
    }
  }
  return normal;
}

/// In-plane x-axis: the canonical axis least aligned with the normal,
/// projected onto the plane. Ties (within a small slack, so that nearly
/// axis-aligned normals pick a stable axis) resolve toward the smaller
/// index.
inline Vec3 plane_x_axis_of(const Vec3& normal) {
  int best = 0;
  for (int i = 1; i < 3; ++i) {
    if (std::abs(normal[i]) < std::abs(normal[best]) - 1e-6) best = i;
  }
  const Vec3 e = Vec3::Unit(best);
  return (e - e.dot(normal) * normal).normalized();
}

/// One BIEVR map voxel: incremental plane statistics plus an oriented height
/// image over the dominant plane.
class Voxel {
 public:
  enum class FrameEvent { kNone, kInitialized, kReprojected };

  Voxel() = default;
  Voxel(const Vec3& vox_min, double voxel_len, double pixel_res)
      : vox_min_(vox_min), voxel_len_(voxel_len), pixel_res_(pixel_res) {}

  /// Rebuilds a voxel from a stored frame and image (snapshot reload,
  /// synthetic fixtures).
  static Voxel from_frame_and_image(const SE3& image_from_world,
                                    BumpImage image) {
    Voxel v(Vec3::Zero(), 0.0, image.pixel_res());
    v.image_from_world_ = image_from_world;
    v.normal_ = image_from_world.rotation.row(2);
    v.raw_image_ = image;
    v.image_ = std::move(image);
    v.frame_initialized_ = true;
    v.recompute_mid();
    return v;
  }

  // --- plane statistics -----------------------------------------------------

  /// Accumulates the batch into (s, C, n) and returns the resulting fit.
  PlaneFit update_plane_stats(std::span<const Vec3> points_world) {
    for (const Vec3& p : points_world) {
      sum_points_ += p;
      sum_outer_ += p * p.transpose();
    }
    num_points_ += points_world.size();
    return {mu(), sigma()};
  }

  Vec3 mu() const { return sum_points_ / static_cast<double>(num_points_); }

  Mat3 sigma() const {
    const double n = static_cast<double>(num_points_);
    return (sum_outer_ - sum_points_ * mu().transpose()) / (n + 1.0);
  }

  const Vec3& sum_points() const { return sum_points_; }
  const Mat3& sum_outer() const { return sum_outer_; }
  std::size_t num_points() const { return num_points_; }

  // --- frame / image --------------------------------------------------------

  /// Re-estimates the dominant plane. On first call (with enough points) the
  /// image frame is created with the normal oriented toward sensor_origin.
  /// Later calls rebuild the frame and reproject the image only when the
  /// normal moved by more than reproject_thresh; a degenerate eigen gap or a
  /// line-like point set keeps the previous frame. Returns what happened.
  FrameEvent update_normal_frame(const Vec3& sensor_origin,
                                 double reproject_thresh,
                                 double min_planarity = 0.05) {
    auto normal = plane_normal_of(sigma(), 1e-9, min_planarity);
    if (!normal) return FrameEvent::kNone;

    if (!frame_initialized_) {
      Vec3 n = *normal;
      if (n.dot(sensor_origin - mu()) < 0.0) n = -n;
      init_frame(n);
      return FrameEvent::kInitialized;
    }

    Vec3 n = *normal;
    if (n.dot(normal_) < 0.0) n = -n;  // sign continuity
    if (angle_between(n, normal_) <= reproject_thresh) return FrameEvent::kNone;

    const SE3 old_frame = image_from_world_;
    BumpImage old_image = std::move(raw_image_);
    init_frame(n);
    reproject_from(old_image, image_from_world_ * old_frame.inverse());
    return FrameEvent::kReprojected;
  }

  /// Builds the image frame for a given unit normal: origin at the minimum
  /// projected voxel corner, z-axis along the normal, image sized to cover
  /// the projected voxel footprint.
  void init_frame(const Vec3& unit_normal) {
    const Vec3 x_axis = plane_x_axis_of(unit_normal);
    const Vec3 y_axis = unit_normal.cross(x_axis);
    Mat3 world_to_plane;
    world_to_plane.row(0) = x_axis;
    world_to_plane.row(1) = y_axis;
    world_to_plane.row(2) = unit_normal;

    const Vec3 centroid = mu();
    double x_min = std::numeric_limits<double>::max(), x_max = -x_min;
    double y_min = x_min, y_max = -x_min;
    for (int c = 0; c < 8; ++c) {
      const Vec3 corner =
          vox_min_ + voxel_len_ * Vec3(c & 1, (c >> 1) & 1, (c >> 2) & 1);
      const Vec3 q = world_to_plane * (corner - centroid);
      x_min = std::min(x_min, q.x());
      x_max = std::max(x_max, q.x());
      y_min = std::min(y_min, q.y());
      y_max = std::max(y_max, q.y());
    }
    const int w = std::max(
        1, static_cast<int>(std::ceil((x_max - x_min) / pixel_res_ - 1e-9)));
    const int h = std::max(
        1, static_cast<int>(std::ceil((y_max - y_min) / pixel_res_ - 1e-9)));

    const Vec3 origin_world =
        centroid + world_to_plane.transpose() * Vec3(x_min, y_min, 0.0);
    image_from_world_ = SE3(world_to_plane, -(world_to_plane * origin_world));
    normal_ = unit_normal;
    raw_image_ = BumpImage(w, h, pixel_res_);
    image_ = raw_image_;
    mid_ = 0.0;
    frame_initialized_ = true;
  }

  /// Projects the batch into the raw height image with range-based weights
  /// w = min(0.5, 1/range), then publishes a once-smoothed view and
  /// refreshes the MID. The raw accumulation stays unsmoothed so repeated
  /// batches do not compound the blur. Returns how many points missed the
  /// image (stale-frame diagnostic).
  std::size_t update_image(std::span<const RangedPoint> points) {
    std::size_t skipped = 0;
    std::size_t added = 0;
    for (const RangedPoint& rp : points) {
      const Vec3 p = image_from_world_ * rp.position;
      const double w = std::min(0.5, 1.0 / rp.range);
      if (raw_image_.add_point(p.x(), p.y(), p.z(), w)) {
        ++added;
      } else {
        ++skipped;
      }
    }
    if (added > 0) publish_image();
    recompute_mid();
    return skipped;
  }

  /// Scatters the raw image through t_new_old (nearest-pixel forward
  /// resampling, weights carried, collisions merged by weighted average).
  void reproject(const SE3& t_new_old) {
    BumpImage old_image = std::move(raw_image_);
    raw_image_ = BumpImage(old_image.width(), old_image.height(),
                           old_image.pixel_res());
    reproject_from(old_image, t_new_old);
  }

  double mean_image_distance() const { return mid_; }
  void recompute_mid() { mid_ = image_.mean_abs_height(); }

  bool frame_initialized() const { return frame_initialized_; }
  const SE3& image_from_world() const { return image_from_world_; }
  const Vec3& normal() const { return normal_; }
  /// Published (smoothed) height image used by queries, MID, and export.
  const BumpImage& image() const { return image_; }
  /// Unsmoothed accumulation behind the published image.
  const BumpImage& raw_image() const { return raw_image_; }

  const Vec3& vox_min() const { return vox_min_; }
  double voxel_len() const { return voxel_len_; }

  std::uint64_t lru_stamp = 0;

 private:
  void publish_image() {
    image_ = raw_image_;
    image_.gaussian_smooth();
  }

  void reproject_from(const BumpImage& old_image, const SE3& t_new_old) {
    const double r = old_image.pixel_res();
    for (int v = 0; v < old_image.height(); ++v) {
      for (int u = 0; u < old_image.width(); ++u) {
        if (!old_image.observed(u, v)) continue;
        const Vec3 lifted((u + 0.5) * r, (v + 0.5) * r, old_image.value(u, v));
        const Vec3 p = t_new_old * lifted;
        raw_image_.add_point(p.x(), p.y(), p.z(), old_image.weight(u, v));
      }
    }
    publish_image();
    recompute_mid();
  }

  Vec3 sum_points_ = Vec3::Zero();
  Mat3 sum_outer_ = Mat3::Zero();
  std::size_t num_points_ = 0;

  bool frame_initialized_ = false;
  SE3 image_from_world_;  // T_CG
  Vec3 normal_ = Vec3::UnitZ();
  BumpImage raw_image_;
  BumpImage image_;
  double mid_ = 0.0;

  Vec3 vox_min_ = Vec3::Zero();
  double voxel_len_ = 0.0;
  double pixel_res_ = 0.0;
};

}  // namespace bievr
