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
// Reference implementations used to cross-check the production code paths.
// These deliberately share no code with the modules they verify: the batch
// plane fit uses its own Jacobi eigensolver and the IMU reference integrates
// densely with RK4 instead of the midpoint scheme.

#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>

#include "bievr/types.hpp"

namespace bievr {

struct BatchPlaneFit {
  Vec3 mu = Vec3::Zero();
  Mat3 sigma = Mat3::Zero();
  Vec3 normal = Vec3::UnitZ();
};

namespace oracle_detail {

/// Cyclic Jacobi eigensolver for symmetric 3x3 matrices.
/// Returns eigenvalues ascending with matching eigenvector columns.
inline void jacobi_eigen3(const Mat3& m, Vec3& eigenvalues, Mat3& eigenvectors) {
  Mat3 a = m;
  Mat3 v = Mat3::Identity();
  for (int sweep = 0; sweep < 50; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < 3; ++p)
      for (int q = p + 1; q < 3; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30) break;
    for (int p = 0; p < 3; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        Mat3 rot = Mat3::Identity();
        rot(p, p) = c;
        rot(q, q) = c;
        rot(p, q) = s;
        rot(q, p) = -s;
        a = rot.transpose() * a * rot;
        v = v * rot;
      }
    }
  }
  // Sort ascending.
  std::array<int, 3> idx = {0, 1, 2};
  std::sort(idx.begin(), idx.end(),
            [&](int x, int y) { return a(x, x) < a(y, y); });
  for (int i = 0; i < 3; ++i) {
    eigenvalues[i] = a(idx[i], idx[i]);
    eigenvectors.col(i) = v.col(idx[i]);
  }
}

}  // namespace oracle_detail

/// Batch centroid/covariance (same (n+1) denominator as the map) and the
/// smallest-eigenvalue direction, computed from scratch over the raw points.
/// Throws when the two smallest eigenvalues do not separate (collinear or
/// otherwise normal-ambiguous input).
inline BatchPlaneFit oracle_pca(std::span<const Vec3> points) {
  if (points.size() < 3) {
    throw std::invalid_argument("oracle_pca: need at least 3 points");
  }
  BatchPlaneFit fit;
  for (const Vec3& p : points) fit.mu += p;
  fit.mu /= static_cast<double>(points.size());
  Mat3 scatter = Mat3::Zero();
  for (const Vec3& p : points) {
    scatter += (p - fit.mu) * (p - fit.mu).transpose();
  }
  fit.sigma = scatter / (static_cast<double>(points.size()) + 1.0);

  Vec3 eigenvalues;
  Mat3 eigenvectors;
  oracle_detail::jacobi_eigen3(fit.sigma, eigenvalues, eigenvectors);
  const double scale = std::max(std::abs(eigenvalues[2]), 1e-300);
  if ((eigenvalues[1] - eigenvalues[0]) / scale < 1e-9) {
    throw std::invalid_argument("oracle_pca: degenerate (collinear) points");
  }
  fit.normal = eigenvectors.col(0).normalized();
  return fit;
}

/// Central finite differences of a scalar closure over a 6-vector.
/// Throws when the closure is undefined at any probe.
template <typename Fn>
Vec6 fd_jacobian(Fn&& f, const Vec6& xi, double step) {
  Vec6 out;
  for (int i = 0; i < 6; ++i) {
    Vec6 hi = xi, lo = xi;
    hi[i] += step;
    lo[i] -= step;
    const auto f_hi = f(hi);
    const auto f_lo = f(lo);
    if (!f_hi || !f_lo) {
      throw std::runtime_error("fd_jacobian: closure undefined at probe");
    }
    out[i] = (*f_hi - *f_lo) / (2.0 * step);
  }
  return out;
}

struct ReferenceDelta {
  Mat3 delta_rotation = Mat3::Identity();
  Vec3 delta_velocity = Vec3::Zero();
  Vec3 delta_position = Vec3::Zero();
};

/// Dense RK4 integration of the piecewise-linear IMU signal in quaternion
/// coordinates, substeps-per-sample-interval times finer than the stream.
inline ReferenceDelta rk4_preintegrate(std::span<const ImuSample> samples,
                                       const Vec3& accel_bias,
                                       const Vec3& gyro_bias, double t_begin,
                                       double t_end, int substeps = 10) {
  if (samples.size() < 2 || samples.front().timestamp > t_begin + 1e-9 ||
      samples.back().timestamp < t_end - 1e-9) {
    throw std::invalid_argument("rk4_preintegrate: samples must bracket interval");
  }
  auto interp = [&](double t, Vec3& w, Vec3& a) {
    std::size_t i = 1;
    while (i + 1 < samples.size() && samples[i].timestamp < t) ++i;
    const ImuSample& s0 = samples[i - 1];
    const ImuSample& s1 = samples[i];
    const double f =
        std::clamp((t - s0.timestamp) / (s1.timestamp - s0.timestamp), 0.0, 1.0);
    w = (1.0 - f) * s0.angular_velocity + f * s1.angular_velocity - gyro_bias;
    a = (1.0 - f) * s0.linear_acceleration + f * s1.linear_acceleration -
        accel_bias;
  };

  // State: quaternion (delta rotation), velocity, position.
  Eigen::Quaterniond q = Eigen::Quaterniond::Identity();
  Vec3 v = Vec3::Zero(), p = Vec3::Zero();

  struct Deriv {
    Eigen::Vector4d dq;
    Vec3 dv, dp;
  };
  auto derivative = [&](double t, const Eigen::Quaterniond& qs, const Vec3& vs) {
    Vec3 w, a;
    interp(t, w, a);
    const Eigen::Quaterniond omega(0.0, w.x(), w.y(), w.z());
    const Eigen::Quaterniond dq = qs * omega;
    return Deriv{0.5 * dq.coeffs(), qs.toRotationMatrix() * a, vs};
  };

  std::vector<double> grid;
  grid.push_back(t_begin);
  for (const ImuSample& s : samples) {
    if (s.timestamp > t_begin && s.timestamp < t_end) grid.push_back(s.timestamp);
  }
  grid.push_back(t_end);

  for (std::size_t g = 0; g + 1 < grid.size(); ++g) {
    const double h_total = grid[g + 1] - grid[g];
    for (int s = 0; s < substeps; ++s) {
      const double t = grid[g] + h_total * s / substeps;
      const double h = h_total / substeps;
      const Deriv k1 = derivative(t, q, v);
      auto advance = [&](const Deriv& k, double frac) {
        Eigen::Quaterniond qn;
        qn.coeffs() = q.coeffs() + frac * h * k.dq;
        return std::make_pair(qn, Vec3(v + frac * h * k.dv));
      };
      const auto [q2, v2] = advance(k1, 0.5);
      const Deriv k2 = derivative(t + 0.5 * h, q2, v2);
      const auto [q3, v3] = advance(k2, 0.5);
      const Deriv k3 = derivative(t + 0.5 * h, q3, v3);
      const auto [q4, v4] = advance(k3, 1.0);
      const Deriv k4 = derivative(t + h, q4, v4);
      q.coeffs() += h / 6.0 * (k1.dq + 2.0 * k2.dq + 2.0 * k3.dq + k4.dq);
      v += h / 6.0 * (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv);
      p += h / 6.0 * (k1.dp + 2.0 * k2.dp + 2.0 * k3.dp + k4.dp);
      q.normalize();
    }
  }
  return ReferenceDelta{q.toRotationMatrix(), v, p};
}

/// World-frame dead reckoning of an IMU stream with known biases and
/// gravity; reference for simulator self-consistency checks.
inline std::pair<SE3, Vec3> rk4_world_propagate(
    std::span<const ImuSample> samples, const SE3& start_pose,
    const Vec3& start_velocity, const Vec3& g_vec, const Vec3& accel_bias,
    const Vec3& gyro_bias, double t_begin, double t_end, int substeps = 10) {
  const ReferenceDelta d = rk4_preintegrate(samples, accel_bias, gyro_bias,
                                            t_begin, t_end, substeps);
  const double dt = t_end - t_begin;
  SE3 pose;
  pose.rotation = start_pose.rotation * d.delta_rotation;
  pose.translation = start_pose.translation + start_velocity * dt +
                     0.5 * dt * dt * g_vec +
                     start_pose.rotation * d.delta_position;
  const Vec3 velocity =
      start_velocity + g_vec * dt + start_pose.rotation * d.delta_velocity;
  return {pose, velocity};
}

}  // namespace bievr
