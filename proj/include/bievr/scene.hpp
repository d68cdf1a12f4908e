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
#include <optional>
#include <variant>
#include <vector>

#include "bievr/lie.hpp"

namespace bievr {

/// Finite rectangle: origin, unit normal, two in-plane unit axes and
/// half-extents. Hit from either side.
struct PlaneSurface {
  Vec3 origin = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  Vec3 axis_u = Vec3::UnitX();
  Vec3 axis_v = Vec3::UnitY();
  double half_u = 1.0;
  double half_v = 1.0;
};

/// Plane displaced along its normal by amplitude * sin(2*pi*u/wavelength),
/// u measured along axis_u from the origin. With band_period > 0 the
/// corrugation is active only on periodic bands of length band_len
/// (smooth wall with corrugated sections, like cutouts along a tunnel).
struct SinusoidPlaneSurface {
  Vec3 origin = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  Vec3 axis_u = Vec3::UnitX();
  Vec3 axis_v = Vec3::UnitY();
  double half_u = 1.0;
  double half_v = 1.0;
  double amplitude = 0.02;
  double wavelength = 1.0;
  double phase = 0.0;
  double band_period = 0.0;  // 0: corrugation everywhere
  double band_len = 0.0;
  double band_offset = 0.0;

  double local_amplitude(double u) const {
    if (band_period <= 0.0) return amplitude;
    const double m = u - band_offset - band_period * std::floor((u - band_offset) / band_period);
    return m < band_len ? amplitude : 0.0;
  }
};

/// Axis-aligned box obstacle (outside hits only).
struct BoxSurface {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Ones();
};

/// Hemispherical bump: the upper half of a sphere, used on flat ground.
struct SphereBumpSurface {
  Vec3 center = Vec3::Zero();
  double radius = 0.2;
};

using Surface = std::variant<PlaneSurface, SinusoidPlaneSurface, BoxSurface,
                             SphereBumpSurface>;

namespace detail {

inline std::optional<double> intersect(const PlaneSurface& s, const Vec3& o,
                                       const Vec3& d) {
  const double denom = s.normal.dot(d);
  if (std::abs(denom) < 1e-12) return std::nullopt;
  const double t = s.normal.dot(s.origin - o) / denom;
  if (t <= 1e-9) return std::nullopt;
  const Vec3 rel = o + t * d - s.origin;
  if (std::abs(s.axis_u.dot(rel)) > s.half_u ||
      std::abs(s.axis_v.dot(rel)) > s.half_v) {
    return std::nullopt;
  }
  return t;
}

inline std::optional<double> intersect(const SinusoidPlaneSurface& s,
                                       const Vec3& o, const Vec3& d) {
  const double denom = s.normal.dot(d);
  if (std::abs(denom) < 1e-9) return std::nullopt;
  auto implicit = [&](double t) {
    const Vec3 rel = o + t * d - s.origin;
    const double u = s.axis_u.dot(rel);
    return s.normal.dot(rel) -
           s.local_amplitude(u) *
               std::sin(2.0 * M_PI * u / s.wavelength + s.phase);
  };
  const double t_plane = s.normal.dot(s.origin - o) / denom;
  double radius = std::abs(s.amplitude / denom) + 1e-9;
  double lo = t_plane - 2.0 * radius, hi = t_plane + 2.0 * radius;
  double f_lo = implicit(lo), f_hi = implicit(hi);
  if (f_lo * f_hi > 0.0) {
    lo = t_plane - 8.0 * radius;
    hi = t_plane + 8.0 * radius;
    f_lo = implicit(lo);
    f_hi = implicit(hi);
    if (f_lo * f_hi > 0.0) return std::nullopt;
  }
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double f_mid = implicit(mid);
    if (f_lo * f_mid <= 0.0) {
      hi = mid;
      f_hi = f_mid;
    } else {
      lo = mid;
      f_lo = f_mid;
    }
  }
  const double t = 0.5 * (lo + hi);
  if (t <= 1e-9) return std::nullopt;
  const Vec3 rel = o + t * d - s.origin;
  if (std::abs(s.axis_u.dot(rel)) > s.half_u ||
      std::abs(s.axis_v.dot(rel)) > s.half_v) {
    return std::nullopt;
  }
  return t;
}

inline std::optional<double> intersect(const BoxSurface& s, const Vec3& o,
                                       const Vec3& d) {
  double t_near = -std::numeric_limits<double>::max();
  double t_far = std::numeric_limits<double>::max();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-12) {
      if (o[a] < s.min[a] || o[a] > s.max[a]) return std::nullopt;
      continue;
    }
    double t0 = (s.min[a] - o[a]) / d[a];
    double t1 = (s.max[a] - o[a]) / d[a];
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
    if (t_near > t_far) return std::nullopt;
  }
  if (t_near <= 1e-9) return std::nullopt;  // inside or behind
  return t_near;
}

inline std::optional<double> intersect(const SphereBumpSurface& s,
                                       const Vec3& o, const Vec3& d) {
  const Vec3 oc = o - s.center;
  const double b = oc.dot(d);
  const double c = oc.squaredNorm() - s.radius * s.radius;
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  const double sq = std::sqrt(disc);
  for (double t : {-b - sq, -b + sq}) {
    if (t <= 1e-9) continue;
    const Vec3 p = o + t * d;
    if (p.z() >= s.center.z() - 1e-12) return t;  // upper hemisphere
  }
  return std::nullopt;
}

}  // namespace detail

/// Collection of analytic surfaces supporting exact ray casting.
class Scene {
 public:
  void add(Surface surface) { surfaces_.push_back(std::move(surface)); }
  const std::vector<Surface>& surfaces() const { return surfaces_; }

  /// Nearest hit distance along the unit direction, or nothing.
  std::optional<double> raycast(const Vec3& origin, const Vec3& dir,
                                double max_range) const {
    std::optional<double> best;
    for (const Surface& s : surfaces_) {
      const auto t = std::visit(
          [&](const auto& surface) {
            return detail::intersect(surface, origin, dir);
          },
          s);
      if (t && *t <= max_range && (!best || *t < *best)) best = t;
    }
    return best;
  }

 private:
  std::vector<Surface> surfaces_;
};

// --- canonical benchmark scenes ---------------------------------------------

/// Closed 8 x 8 x 3 room with box obstacles; well constrained in all
/// directions. Surfaces sit off the half-meter grid so that plane points
/// never straddle voxel boundaries.
inline Scene make_structured_room() {
  Scene scene;
  const double floor_z = 0.04, ceil_z = 2.96, half = 3.96;
  const double mid_z = 0.5 * (floor_z + ceil_z);
  scene.add(PlaneSurface{{0, 0, floor_z}, Vec3::UnitZ(), Vec3::UnitX(),
                         Vec3::UnitY(), half, half});
  scene.add(PlaneSurface{{0, 0, ceil_z}, -Vec3::UnitZ(), Vec3::UnitX(),
                         Vec3::UnitY(), half, half});
  scene.add(PlaneSurface{{half, 0, mid_z}, -Vec3::UnitX(), Vec3::UnitY(),
                         Vec3::UnitZ(), half, mid_z - floor_z});
  scene.add(PlaneSurface{{-half, 0, mid_z}, Vec3::UnitX(), Vec3::UnitY(),
                         Vec3::UnitZ(), half, mid_z - floor_z});
  scene.add(PlaneSurface{{0, half, mid_z}, -Vec3::UnitY(), Vec3::UnitX(),
                         Vec3::UnitZ(), half, mid_z - floor_z});
  scene.add(PlaneSurface{{0, -half, mid_z}, Vec3::UnitY(), Vec3::UnitX(),
                         Vec3::UnitZ(), half, mid_z - floor_z});
  scene.add(BoxSurface{{1.22, 1.03, 0.0}, {2.41, 2.18, 1.14}});
  scene.add(BoxSurface{{-2.78, -2.43, 0.0}, {-1.63, -1.22, 0.83}});
  scene.add(BoxSurface{{-2.18, 1.58, 0.0}, {-0.97, 2.63, 1.62}});
  scene.add(BoxSurface{{1.41, -2.77, 0.0}, {2.58, -1.82, 0.66}});
  return scene;
}

/// Straight rectangular tunnel along +x: flat floor and ceiling, side walls
/// carrying a sinusoidal corrugation of the given amplitude and wavelength.
/// Open at both ends; the planar geometry leaves x unconstrained. The cross
/// section is shifted slightly off the half-meter grid so wall and floor
/// points do not straddle voxel boundaries.
inline Scene make_tunnel(double length = 50.0, double width = 4.0,
                         double height = 3.0, double amplitude = 0.02,
                         double wavelength = 1.0, double band_period = 0.0,
                         double band_len = 0.0) {
  Scene scene;
  const double margin = 5.0;
  const double half_x = 0.5 * length + margin;
  // Keep every surface, including the full swing of the wall corrugation,
  // well inside a single half-meter voxel layer.
  const double floor_z = 0.11;
  const double y_mid = 0.13;
  const Vec3 mid(0.5 * length, y_mid, floor_z + 0.5 * height);
  scene.add(PlaneSurface{{mid.x(), y_mid, floor_z}, Vec3::UnitZ(),
                         Vec3::UnitX(), Vec3::UnitY(), half_x, 0.5 * width});
  scene.add(PlaneSurface{{mid.x(), y_mid, floor_z + height}, -Vec3::UnitZ(),
                         Vec3::UnitX(), Vec3::UnitY(), half_x, 0.5 * width});
  scene.add(SinusoidPlaneSurface{{mid.x(), y_mid + 0.5 * width, mid.z()},
                                 -Vec3::UnitY(), Vec3::UnitX(), Vec3::UnitZ(),
                                 half_x, 0.5 * height, amplitude, wavelength,
                                 0.0, band_period, band_len, 0.0});
  scene.add(SinusoidPlaneSurface{{mid.x(), y_mid - 0.5 * width, mid.z()},
                                 Vec3::UnitY(), Vec3::UnitX(), Vec3::UnitZ(),
                                 half_x, 0.5 * height, amplitude, wavelength,
                                 M_PI / 3.0, band_period, band_len,
                                 0.5 * band_period});
  return scene;
}

/// Single corrugated ground plane, z = amplitude * sin(2*pi*x/wavelength).
inline Scene make_bumpy_plane(double amplitude = 0.03, double wavelength = 1.0,
                              double half_extent = 10.0) {
  Scene scene;
  scene.add(SinusoidPlaneSurface{{0, 0, 0}, Vec3::UnitZ(), Vec3::UnitX(),
                                 Vec3::UnitY(), half_extent, half_extent,
                                 amplitude, wavelength, 0.0});
  return scene;
}

/// Flat ground with one box obstacle; elevation-export reference scene.
/// Ground at z = 0.04 (off the voxel grid), box top at 0.04 + box_height.
inline Scene make_box_on_plane(double box_height = 0.3) {
  Scene scene;
  scene.add(PlaneSurface{{0, 0, 0.04}, Vec3::UnitZ(), Vec3::UnitX(),
                         Vec3::UnitY(), 6.0, 6.0});
  scene.add(BoxSurface{{0.4, -0.6, 0.0}, {1.6, 0.6, 0.04 + box_height}});
  return scene;
}

/// Flat field with hemispherical bumps; sparse vertical structure.
inline Scene make_bump_field(double radius = 0.25) {
  Scene scene;
  scene.add(PlaneSurface{{0, 0, 0}, Vec3::UnitZ(), Vec3::UnitX(),
                         Vec3::UnitY(), 15.0, 15.0});
  for (int i = -2; i <= 2; ++i) {
    for (int j = -2; j <= 2; ++j) {
      if ((i + j) % 2 == 0) continue;
      scene.add(SphereBumpSurface{{3.0 * i + 0.7 * j, 3.0 * j - 0.4 * i, 0.0},
                                  radius});
    }
  }
  return scene;
}

}  // namespace bievr
