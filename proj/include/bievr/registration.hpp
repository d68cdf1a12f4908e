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
#include <span>
#include <vector>

#include <Eigen/Cholesky>

#include "bievr/voxel_map.hpp"

namespace bievr {

struct RegistrationConfig {
  double huber_delta = 0.05;       // one pixel of height error
  int max_iterations = 30;
  double convergence_eps = 1e-5;   // on the LM step norm
  double lm_lambda_init = 1e-4;
  double lm_lambda_up = 10.0;
  double lm_lambda_down = 0.5;
  double lm_lambda_max = 1e8;
  std::size_t min_valid_residuals = 10;
  bool use_image_gradient = true;  // Jacobian term II
  bool use_bump_heights = true;    // false: point-to-plane against voxel planes
};

struct IterationDiagnostics {
  int iteration = 0;
  double cost_before = 0.0;
  double cost_after = 0.0;
  double lambda = 0.0;
  double step_norm = 0.0;
  std::size_t residual_count = 0;
  std::size_t dropped_count = 0;
  bool accepted = false;
};

struct RegistrationResult {
  SE3 pose;                 // T_GI
  int iterations = 0;
  double final_cost = 0.0;
  std::size_t residual_count = 0;
  std::size_t dropped_count = 0;
  bool insufficient_constraints = false;
  bool converged = false;
  std::vector<IterationDiagnostics> diagnostics;
};

/// Height residual of one IMU-frame point against a voxel image:
///   r = [T_CG T_GI Exp(xi) p]_z - I(u, v)
/// with bilinear interpolation among observed pixels. Without bump heights
/// the image term is dropped (plane-only ablation). Nothing when the voxel
/// has no frame or the height query is undefined.
inline std::optional<double> registration_residual(
    const Vec3& p_imu, const Voxel& voxel, const SE3& t_world_from_imu,
    const Twist& xi, const RegistrationConfig& cfg) {
  if (!voxel.frame_initialized()) return std::nullopt;
  const SE3 t_image_from_imu =
      voxel.image_from_world() * t_world_from_imu * se3_exp(xi);
  const Vec3 p_image = t_image_from_imu * p_imu;
  if (!cfg.use_bump_heights) return p_image.z();
  const double r = voxel.image().pixel_res();
  const auto height = voxel.image().query(p_image.x() / r, p_image.y() / r);
  if (!height) return std::nullopt;
  return p_image.z() - *height;
}

/// Analytic residual Jacobian w.r.t. a right-multiplicative increment of
/// Exp(xi), split into the plane-normal term and the image-gradient term:
///   d r / d xi = e3^T J_p - grad(I)/r * [I2 0] J_p,
///   J_p = [R*_CI, -R*_CI [p]_x],  R*_CI = rot(T_CG T_GI Exp(xi)).
/// Term II is zeroed when disabled, when the plane-only residual is used,
/// or when the gradient is undefined at the query pixel.
inline std::optional<Vec6> registration_jacobian_row(
    const Vec3& p_imu, const Voxel& voxel, const SE3& t_world_from_imu,
    const Twist& xi, const RegistrationConfig& cfg) {
  if (!voxel.frame_initialized()) return std::nullopt;
  const SE3 t_image_from_imu =
      voxel.image_from_world() * t_world_from_imu * se3_exp(xi);
  const Vec3 p_image = t_image_from_imu * p_imu;

  Eigen::Matrix<double, 3, 6> point_jac;
  point_jac.leftCols<3>() = t_image_from_imu.rotation;
  point_jac.rightCols<3>() = -t_image_from_imu.rotation * skew(p_imu);

  Vec6 row = point_jac.row(2);
  if (cfg.use_bump_heights && cfg.use_image_gradient) {
    const double r = voxel.image().pixel_res();
    if (auto grad =
            voxel.image().gradient(p_image.x() / r, p_image.y() / r)) {
      row -= (point_jac.topRows<2>().transpose() * (*grad / r));
    }
  }
  return row;
}

inline double huber_cost(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? r * r : delta * (2.0 * a - delta);
}

inline double huber_weight(double r, double delta) {
  const double a = std::abs(r);
  return a <= delta ? 1.0 : delta / a;
}

/// Levenberg-Marquardt alignment of IMU-frame points against the map,
/// starting from the prior. Voxel associations are refreshed every outer
/// iteration; lambda retries re-evaluate residuals at fixed associations.
inline RegistrationResult register_scan(const VoxelMap& map,
                                        std::span<const Vec3> points_imu,
                                        const SE3& prior,
                                        const RegistrationConfig& cfg) {
  RegistrationResult result;
  result.pose = prior;

  double lambda = cfg.lm_lambda_init;
  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    // Re-associate points to voxels at the current pose.
    std::vector<std::pair<const Vec3*, const Voxel*>> assoc;
    assoc.reserve(points_imu.size());
    for (const Vec3& p : points_imu) {
      const Voxel* voxel = map.find_at(result.pose * p);
      if (voxel != nullptr && voxel->frame_initialized()) {
        assoc.emplace_back(&p, voxel);
      }
    }

    const Twist zero = Twist::Zero();
    Mat6 h = Mat6::Zero();
    Vec6 g = Vec6::Zero();
    double cost = 0.0;
    std::size_t valid = 0, dropped = points_imu.size() - assoc.size();
    for (const auto& [p, voxel] : assoc) {
      const auto res = registration_residual(*p, *voxel, result.pose, zero, cfg);
      if (!res) {
        ++dropped;
        continue;
      }
      const auto row = registration_jacobian_row(*p, *voxel, result.pose, zero, cfg);
      const double w = huber_weight(*res, cfg.huber_delta);
      h.noalias() += w * (*row) * row->transpose();
      g.noalias() += w * (*row) * (*res);
      cost += huber_cost(*res, cfg.huber_delta);
      ++valid;
    }

    result.residual_count = valid;
    result.dropped_count = dropped;
    if (valid < cfg.min_valid_residuals) {
      result.pose = prior;
      result.insufficient_constraints = true;
      return result;
    }
    result.final_cost = cost;

    // Inner damping loop: evaluate trial poses at fixed associations.
    bool accepted = false;
    double step_norm = 0.0;
    while (lambda <= cfg.lm_lambda_max) {
      Mat6 damped = h;
      damped.diagonal() += lambda * h.diagonal();
      const Vec6 step = damped.ldlt().solve(-g);
      if (!step.allFinite()) {
        lambda *= cfg.lm_lambda_up;
        continue;
      }
      const SE3 trial = result.pose * se3_exp(step);
      double trial_cost = 0.0;
      std::size_t trial_valid = 0;
      for (const auto& [p, voxel] : assoc) {
        const auto res = registration_residual(*p, *voxel, trial, zero, cfg);
        if (!res) continue;
        trial_cost += huber_cost(*res, cfg.huber_delta);
        ++trial_valid;
      }
      IterationDiagnostics diag;
      diag.iteration = iter;
      diag.cost_before = cost;
      diag.cost_after = trial_cost;
      diag.lambda = lambda;
      diag.step_norm = step.norm();
      diag.residual_count = valid;
      diag.dropped_count = dropped;
      if (trial_valid >= cfg.min_valid_residuals && trial_cost <= cost) {
        diag.accepted = true;
        result.diagnostics.push_back(diag);
        result.pose = trial;
        result.final_cost = trial_cost;
        lambda = std::max(lambda * cfg.lm_lambda_down, 1e-12);
        step_norm = step.norm();
        accepted = true;
        break;
      }
      result.diagnostics.push_back(diag);
      lambda *= cfg.lm_lambda_up;
    }

    result.iterations = iter + 1;
    if (!accepted) break;
    if (step_norm < cfg.convergence_eps) {
      result.converged = true;
      break;
    }
  }
  return result;
}

}  // namespace bievr
