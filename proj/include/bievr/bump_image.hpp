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
#include <cmath>
#include <optional>
#include <vector>

#include "bievr/lie.hpp"

namespace bievr {

/// Per-voxel height image. Pixel (u, v) covers [u*r, (u+1)*r) x [v*r, (v+1)*r)
/// in the image plane; its center sits at ((u+0.5)*r, (v+0.5)*r). A pixel is
/// observed iff its accumulated weight is positive.
class BumpImage {
 public:
  BumpImage() = default;
  BumpImage(int width, int height, double pixel_res)
      : width_(width),
        height_(height),
        pixel_res_(pixel_res),
        values_(static_cast<std::size_t>(width) * height, 0.0),
        weights_(static_cast<std::size_t>(width) * height, 0.0) {}

  int width() const { return width_; }
  int height() const { return height_; }
  double pixel_res() const { return pixel_res_; }
  bool empty() const { return width_ == 0 || height_ == 0; }

  bool in_bounds(int u, int v) const {
    return u >= 0 && u < width_ && v >= 0 && v < height_;
  }
  bool observed(int u, int v) const {
    return in_bounds(u, v) && weights_[index(u, v)] > 0.0;
  }
  double value(int u, int v) const { return values_[index(u, v)]; }
  double weight(int u, int v) const { return weights_[index(u, v)]; }

  /// Weighted running average; (x, y) in image-plane meters.
  /// Returns false (and leaves the image untouched) for out-of-bounds points.
  bool add_point(double x, double y, double z, double w) {
    const int u = static_cast<int>(std::floor(x / pixel_res_));
    const int v = static_cast<int>(std::floor(y / pixel_res_));
    return add_to_pixel(u, v, z, w);
  }

  bool add_to_pixel(int u, int v, double z, double w) {
    if (!in_bounds(u, v) || w <= 0.0) return false;
    const std::size_t i = index(u, v);
    values_[i] = (weights_[i] * values_[i] + w * z) / (weights_[i] + w);
    weights_[i] += w;
    return true;
  }

  /// Direct pixel assignment (snapshot reload).
  void set_pixel(int u, int v, double z, double w) {
    const std::size_t i = index(u, v);
    values_[i] = z;
    weights_[i] = w;
  }

  /// 3x3 Gaussian over observed pixels only; kernel renormalized over the
  /// observed mask, weights untouched, unobserved pixels stay unobserved.
  void gaussian_smooth(double sigma_px = 0.85) {
    if (empty()) return;
    double kernel[3][3];
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx)
        kernel[dy + 1][dx + 1] =
            std::exp(-0.5 * (dx * dx + dy * dy) / (sigma_px * sigma_px));

    std::vector<double> smoothed(values_.size());
    for (int v = 0; v < height_; ++v) {
      for (int u = 0; u < width_; ++u) {
        if (!observed(u, v)) continue;
        double acc = 0.0, norm = 0.0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (!observed(u + dx, v + dy)) continue;
            const double k = kernel[dy + 1][dx + 1];
            acc += k * values_[index(u + dx, v + dy)];
            norm += k;
          }
        }
        smoothed[index(u, v)] = acc / norm;
      }
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (weights_[i] > 0.0) values_[i] = smoothed[i];
    }
  }

  /// Bilinear interpolation among observed pixels at continuous pixel
  /// coordinates (u, v) = (x/r, y/r); pixel centers sit at integer + 0.5.
  /// Weights are renormalized over the observed subset; all four neighbors
  /// unobserved (or the query outside the image) yields nothing.
  std::optional<double> query(double u, double v) const {
    int u0, v0;
    double corner_w[4];
    if (!bilinear_setup(u, v, u0, v0, corner_w)) return std::nullopt;
    double acc = 0.0, norm = 0.0;
    for (int c = 0; c < 4; ++c) {
      const int uu = u0 + (c & 1), vv = v0 + (c >> 1);
      if (!observed(uu, vv)) continue;
      acc += corner_w[c] * values_[index(uu, vv)];
      norm += corner_w[c];
    }
    if (norm <= 0.0) return std::nullopt;
    return acc / norm;
  }

  /// Height slope per pixel along one axis: central differences where both
  /// axis neighbors are observed, one-sided at observed-mask borders,
  /// nothing with fewer than two usable pixels along the axis.
  std::optional<double> pixel_gradient(int u, int v, int axis) const {
    if (!observed(u, v)) return std::nullopt;
    const int du = axis == 0 ? 1 : 0;
    const int dv = axis == 0 ? 0 : 1;
    const bool has_lo = observed(u - du, v - dv);
    const bool has_hi = observed(u + du, v + dv);
    if (has_lo && has_hi)
      return 0.5 * (value(u + du, v + dv) - value(u - du, v - dv));
    if (has_hi) return value(u + du, v + dv) - value(u, v);
    if (has_lo) return value(u, v) - value(u - du, v - dv);
    return std::nullopt;
  }

  /// Image gradient at continuous pixel coordinates: per-pixel difference
  /// gradients of the four surrounding pixels blended with the bilinear
  /// weights, renormalized per axis over the pixels where the axis slope is
  /// defined. Units: height per pixel. Nothing when all four neighbors are
  /// unobserved.
  std::optional<Vec2> gradient(double u, double v) const {
    int u0, v0;
    double corner_w[4];
    if (!bilinear_setup(u, v, u0, v0, corner_w)) return std::nullopt;
    Vec2 g = Vec2::Zero();
    double norm[2] = {0.0, 0.0};
    bool any_observed = false;
    for (int c = 0; c < 4; ++c) {
      const int uu = u0 + (c & 1), vv = v0 + (c >> 1);
      if (!observed(uu, vv)) continue;
      any_observed = true;
      for (int axis = 0; axis < 2; ++axis) {
        if (auto s = pixel_gradient(uu, vv, axis)) {
          g[axis] += corner_w[c] * *s;
          norm[axis] += corner_w[c];
        }
      }
    }
    if (!any_observed) return std::nullopt;
    for (int axis = 0; axis < 2; ++axis) {
      g[axis] = norm[axis] > 0.0 ? g[axis] / norm[axis] : 0.0;
    }
    return g;
  }

  /// Mean absolute pixel height over observed pixels; 0 with none observed.
  double mean_abs_height() const {
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (weights_[i] > 0.0) {
        acc += std::abs(values_[i]);
        ++count;
      }
    }
    return count == 0 ? 0.0 : acc / static_cast<double>(count);
  }

  std::size_t observed_count() const {
    return static_cast<std::size_t>(
        std::count_if(weights_.begin(), weights_.end(),
                      [](double w) { return w > 0.0; }));
  }

  double total_weight() const {
    double acc = 0.0;
    for (double w : weights_) acc += w;
    return acc;
  }

  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& weights() const { return weights_; }
  std::size_t index(int u, int v) const {
    return static_cast<std::size_t>(v) * width_ + u;
  }

 private:
  bool bilinear_setup(double u, double v, int& u0, int& v0,
                      double corner_w[4]) const {
    if (empty()) return false;
    if (u < 0.0 || v < 0.0 || u > width_ || v > height_) return false;
    const double a = u - 0.5, b = v - 0.5;
    u0 = static_cast<int>(std::floor(a));
    v0 = static_cast<int>(std::floor(b));
    const double fu = a - u0, fv = b - v0;
    corner_w[0] = (1.0 - fu) * (1.0 - fv);
    corner_w[1] = fu * (1.0 - fv);
    corner_w[2] = (1.0 - fu) * fv;
    corner_w[3] = fu * fv;
    return true;
  }

  int width_ = 0;
  int height_ = 0;
  double pixel_res_ = 0.0;
  std::vector<double> values_;
  std::vector<double> weights_;
};

}  // namespace bievr
