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

#include <stdexcept>
#include <vector>

#include "bievr/types.hpp"

namespace bievr {

struct Waypoint {
  double timestamp = 0.0;
  Vec3 position = Vec3::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
};

/// Clamped cubic spline through waypoint positions (zero end velocities,
/// C2 in between) with spherical-linear rotation between waypoints
/// (piecewise-constant body angular velocity). Queries outside the waypoint
/// range hold the end poses.
class TrajectorySampler {
 public:
  explicit TrajectorySampler(std::vector<Waypoint> waypoints)
      : waypoints_(std::move(waypoints)) {
    if (waypoints_.empty()) {
      throw std::invalid_argument("trajectory needs at least one waypoint");
    }
    for (std::size_t i = 1; i < waypoints_.size(); ++i) {
      if (waypoints_[i].timestamp <= waypoints_[i - 1].timestamp) {
        throw std::invalid_argument("waypoint timestamps must increase");
      }
    }
    const std::size_t n = waypoints_.size();
    for (int axis = 0; axis < 3; ++axis) spline_m_[axis].assign(n, 0.0);
    if (n >= 2) solve_spline();
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const Eigen::Quaterniond rel = waypoints_[i].orientation.conjugate() *
                                     waypoints_[i + 1].orientation;
      const Eigen::AngleAxisd aa(rel.normalized());
      segment_rotvec_.push_back(aa.axis() * aa.angle());
    }
  }

  double start_time() const { return waypoints_.front().timestamp; }
  double end_time() const { return waypoints_.back().timestamp; }

  SE3 pose(double t) const {
    const auto [i, tau, h] = locate(t);
    SE3 out;
    out.translation = eval_position(i, tau, h);
    if (waypoints_.size() == 1) {
      out.rotation = waypoints_[0].orientation.toRotationMatrix();
      return out;
    }
    const double alpha = h > 0.0 ? tau / h : 0.0;
    const Eigen::Quaterniond q =
        waypoints_[i].orientation *
        Eigen::Quaterniond(
            Eigen::AngleAxisd(segment_rotvec_[i].norm() * alpha,
                              segment_rotvec_[i].norm() > 1e-14
                                  ? Vec3(segment_rotvec_[i].normalized())
                                  : Vec3::UnitZ()));
    out.rotation = q.normalized().toRotationMatrix();
    return out;
  }

  Vec3 velocity(double t) const {
    if (outside(t)) return Vec3::Zero();
    const auto [i, tau, h] = locate(t);
    Vec3 v;
    for (int a = 0; a < 3; ++a) {
      const double y0 = waypoints_[i].position[a];
      const double y1 = waypoints_[i + 1].position[a];
      const double m0 = spline_m_[a][i], m1 = spline_m_[a][i + 1];
      const double s = h - tau;
      v[a] = -m0 * s * s / (2.0 * h) + m1 * tau * tau / (2.0 * h) +
             (y1 - y0) / h - (m1 - m0) * h / 6.0;
    }
    return v;
  }

  Vec3 acceleration(double t) const {
    if (outside(t)) return Vec3::Zero();
    const auto [i, tau, h] = locate(t);
    Vec3 acc;
    for (int a = 0; a < 3; ++a) {
      const double m0 = spline_m_[a][i], m1 = spline_m_[a][i + 1];
      acc[a] = m0 * (h - tau) / h + m1 * tau / h;
    }
    return acc;
  }

  Vec3 angular_velocity_body(double t) const {
    if (outside(t) || waypoints_.size() == 1) return Vec3::Zero();
    const auto [i, tau, h] = locate(t);
    (void)tau;
    return segment_rotvec_[i] / h;
  }

 private:
  bool outside(double t) const {
    return waypoints_.size() == 1 || t <= start_time() || t >= end_time();
  }

  std::tuple<std::size_t, double, double> locate(double t) const {
    if (waypoints_.size() == 1) return {0, 0.0, 0.0};
    std::size_t i = 0;
    while (i + 2 < waypoints_.size() && t >= waypoints_[i + 1].timestamp) ++i;
    const double t_clamped =
        std::clamp(t, waypoints_[i].timestamp, waypoints_[i + 1].timestamp);
    return {i, t_clamped - waypoints_[i].timestamp,
            waypoints_[i + 1].timestamp - waypoints_[i].timestamp};
  }

  Vec3 eval_position(std::size_t i, double tau, double h) const {
    if (waypoints_.size() == 1 || h <= 0.0) return waypoints_[i].position;
    Vec3 p;
    for (int a = 0; a < 3; ++a) {
      const double y0 = waypoints_[i].position[a];
      const double y1 = waypoints_[i + 1].position[a];
      const double m0 = spline_m_[a][i], m1 = spline_m_[a][i + 1];
      const double s = h - tau;
      p[a] = m0 * s * s * s / (6.0 * h) + m1 * tau * tau * tau / (6.0 * h) +
             (y0 / h - m0 * h / 6.0) * s + (y1 / h - m1 * h / 6.0) * tau;
    }
    return p;
  }

  // Clamped-spline second derivatives via the Thomas algorithm.
  void solve_spline() {
    const std::size_t n = waypoints_.size();
    std::vector<double> h(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      h[i] = waypoints_[i + 1].timestamp - waypoints_[i].timestamp;
    }
    for (int axis = 0; axis < 3; ++axis) {
      std::vector<double> a(n), b(n), c(n), d(n);
      auto y = [&](std::size_t i) { return waypoints_[i].position[axis]; };
      b[0] = 2.0 * h[0];
      c[0] = h[0];
      d[0] = 6.0 * ((y(1) - y(0)) / h[0]);
      for (std::size_t i = 1; i + 1 < n; ++i) {
        a[i] = h[i - 1];
        b[i] = 2.0 * (h[i - 1] + h[i]);
        c[i] = h[i];
        d[i] = 6.0 * ((y(i + 1) - y(i)) / h[i] - (y(i) - y(i - 1)) / h[i - 1]);
      }
      a[n - 1] = h[n - 2];
      b[n - 1] = 2.0 * h[n - 2];
      d[n - 1] = 6.0 * (-(y(n - 1) - y(n - 2)) / h[n - 2]);

      for (std::size_t i = 1; i < n; ++i) {
        const double w = a[i] / b[i - 1];
        b[i] -= w * c[i - 1];
        d[i] -= w * d[i - 1];
      }
      spline_m_[axis][n - 1] = d[n - 1] / b[n - 1];
      for (std::size_t i = n - 1; i-- > 0;) {
        spline_m_[axis][i] = (d[i] - c[i] * spline_m_[axis][i + 1]) / b[i];
      }
    }
  }

  std::vector<Waypoint> waypoints_;
  std::vector<double> spline_m_[3];
  std::vector<Vec3> segment_rotvec_;
};

}  // namespace bievr
