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

#include <deque>
#include <vector>

#include <Eigen/Cholesky>

#include "bievr/preintegration.hpp"

namespace bievr {

inline constexpr double kGravityMagnitude = 9.81;

/// Window-constant inertial state. `gravity` is the 9.81-scaled unit vector
/// opposing gravitational acceleration (so g_vec = -gravity in kinematics).
struct InertialState {
  Vec3 velocity = Vec3::Zero();
  Vec3 accel_bias = Vec3::Zero();
  Vec3 gyro_bias = Vec3::Zero();
  Vec3 gravity = Vec3(0.0, 0.0, kGravityMagnitude);

  Vec3 g_vec() const { return -gravity; }
  Vec3 up() const { return gravity / kGravityMagnitude; }
};

/// Preintegration residual (rotation, velocity, position) between two
/// fixed-pose states, linearized around the delta's biases.
inline Vec9 imu_residual(const Vec3& v_i, const Vec3& v_i1, const Vec3& g_vec,
                         const Vec3& accel_bias, const Vec3& gyro_bias,
                         const SE3& pose_i, const SE3& pose_i1,
                         const PreintegratedDelta& delta) {
  const double dt = delta.dt;
  const Mat3 rot_i_t = pose_i.rotation.transpose();
  Vec9 r;
  r.segment<3>(0) = so3_log(delta.corrected_rotation(gyro_bias).transpose() *
                            (rot_i_t * pose_i1.rotation));
  r.segment<3>(3) = rot_i_t * (v_i1 - v_i - g_vec * dt) -
                    delta.corrected_velocity(accel_bias, gyro_bias);
  r.segment<3>(6) =
      rot_i_t * (pose_i1.translation - pose_i.translation - v_i * dt -
                 0.5 * dt * dt * g_vec) -
      delta.corrected_position(accel_bias, gyro_bias);
  return r;
}

/// Two unit vectors spanning the tangent plane of `dir`.
inline std::pair<Vec3, Vec3> tangent_basis(const Vec3& dir) {
  const Vec3 ref =
      std::abs(dir.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
  const Vec3 b1 = dir.cross(ref).normalized();
  return {b1, dir.cross(b1).normalized()};
}

struct WindowOptimizeResult {
  int iterations = 0;
  bool converged = false;
  double initial_cost = 0.0;
  double final_cost = 0.0;
};

struct WindowConfig {
  double span = 10.0;  // seconds
  int max_iterations = 20;
  double step_eps = 1e-12;
  double accel_bias_limit = 1.0;   // m/s^2
  double gyro_bias_limit = 0.1;    // rad/s
  // The window-constant gravity and biases stay frozen until this many
  // edges constrain them; velocities are always estimated.
  std::size_t min_edges_for_constants = 20;
  // Minimal-update ridge on the bias estimates. Static windows leave the
  // tangential gravity error and the accelerometer bias jointly
  // unobservable; the ridge pins that flat direction at the incoming
  // estimates without measurably biasing observable directions.
  double bias_anchor_weight = 1e-4;
};

/// Fixed-pose sliding window: registration poses act as anchors while the
/// per-step velocities and the window-constant gravity direction and biases
/// are optimized from the preintegration residuals.
class SlidingWindow {
 public:
  struct Entry {
    double stamp = 0.0;
    SE3 pose;
    Vec3 velocity = Vec3::Zero();
    PreintegratedDelta delta_from_prev;
    bool has_delta = false;
  };

  explicit SlidingWindow(const WindowConfig& config = {}) : config_(config) {}

  void set_state(const InertialState& state) {
    gravity_up_ = state.up();
    accel_bias_ = state.accel_bias;
    gyro_bias_ = state.gyro_bias;
  }

  InertialState state() const {
    InertialState s;
    s.velocity = entries_.empty() ? Vec3::Zero() : entries_.back().velocity;
    s.accel_bias = accel_bias_;
    s.gyro_bias = gyro_bias_;
    s.gravity = kGravityMagnitude * gravity_up_;
    return s;
  }

  const std::deque<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  void push(double stamp, const SE3& pose, const Vec3& velocity) {
    Entry e;
    e.stamp = stamp;
    e.pose = pose;
    e.velocity = velocity;
    entries_.push_back(e);
  }

  void push(double stamp, const SE3& pose, const Vec3& velocity,
            const PreintegratedDelta& delta_from_prev) {
    Entry e;
    e.stamp = stamp;
    e.pose = pose;
    e.velocity = velocity;
    e.delta_from_prev = delta_from_prev;
    e.has_delta = !entries_.empty();
    entries_.push_back(e);
  }

  /// Drops entries older than the window span (the newest always stays).
  std::size_t prune() {
    std::size_t dropped = 0;
    while (entries_.size() > 1 &&
           entries_.front().stamp < entries_.back().stamp - config_.span) {
      entries_.pop_front();
      entries_.front().has_delta = false;
      ++dropped;
    }
    return dropped;
  }

  double total_cost() const {
    double cost = 0.0;
    for (std::size_t i = 1; i < entries_.size(); ++i) {
      if (!entries_[i].has_delta) continue;
      cost += imu_residual(entries_[i - 1].velocity, entries_[i].velocity,
                           -kGravityMagnitude * gravity_up_, accel_bias_,
                           gyro_bias_, entries_[i - 1].pose, entries_[i].pose,
                           entries_[i].delta_from_prev)
                  .squaredNorm();
    }
    return cost;
  }

  /// Damped Gauss-Newton over all velocities plus the window-constant
  /// gravity direction (2-DOF tangent update, norm preserved by
  /// construction) and biases, with poses held fixed. Steps are accepted
  /// only on strict cost decrease, so the cost never increases over
  /// accepted iterations. Until enough edges constrain them, the constant
  /// parameters stay frozen and only the velocities move.
  WindowOptimizeResult optimize() {
    WindowOptimizeResult result;
    if (entries_.size() < 2) return result;

    const std::size_t n = entries_.size();
    const std::size_t dim = 3 * n + 8;
    const std::size_t theta_off = 3 * n;
    const std::size_t ba_off = theta_off + 2;
    const std::size_t bg_off = ba_off + 3;

    std::size_t edge_count = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if (entries_[i].has_delta) ++edge_count;
    }
    const bool estimate_constants =
        edge_count >= config_.min_edges_for_constants;

    const Vec3 ba_anchor = accel_bias_;
    const Vec3 bg_anchor = gyro_bias_;
    const double mu = config_.bias_anchor_weight;
    auto anchored_cost = [&] {
      return total_cost() + mu * (accel_bias_ - ba_anchor).squaredNorm() +
             mu * (gyro_bias_ - bg_anchor).squaredNorm();
    };

    result.initial_cost = total_cost();
    double cost = anchored_cost();
    double lambda = 1e-8;

    for (int iter = 0; iter < config_.max_iterations; ++iter) {
      const auto [b1, b2] = tangent_basis(gravity_up_);
      const Vec3 g_vec = -kGravityMagnitude * gravity_up_;
      // d g_vec / d theta for the update up <- Exp(skew(b1 t1 + b2 t2)) up
      Eigen::Matrix<double, 3, 2> dgvec_dtheta;
      dgvec_dtheta.col(0) = -kGravityMagnitude * b1.cross(gravity_up_);
      dgvec_dtheta.col(1) = -kGravityMagnitude * b2.cross(gravity_up_);

      Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
      Eigen::VectorXd g = Eigen::VectorXd::Zero(dim);

      for (std::size_t i = 1; i < n; ++i) {
        if (!entries_[i].has_delta) continue;
        const Entry& prev = entries_[i - 1];
        const Entry& curr = entries_[i];
        const PreintegratedDelta& delta = curr.delta_from_prev;
        const double dt = delta.dt;
        const Mat3 rot_i_t = prev.pose.rotation.transpose();

        const Vec9 r =
            imu_residual(prev.velocity, curr.velocity, g_vec, accel_bias_,
                         gyro_bias_, prev.pose, curr.pose, delta);

        Eigen::Matrix<double, 9, Eigen::Dynamic> jac(9, 14);
        jac.setZero();
        // columns: [v_i (3), v_{i+1} (3), theta (2), b_a (3), b_g (3)]
        jac.block<3, 3>(3, 0) = -rot_i_t;
        jac.block<3, 3>(6, 0) = -rot_i_t * dt;
        jac.block<3, 3>(3, 3) = rot_i_t;
        jac.block<3, 2>(3, 6) = -rot_i_t * dt * dgvec_dtheta;
        jac.block<3, 2>(6, 6) = -0.5 * dt * dt * rot_i_t * dgvec_dtheta;
        jac.block<3, 3>(3, 8) = -delta.j_vel_accel_bias;
        jac.block<3, 3>(6, 8) = -delta.j_pos_accel_bias;
        const Vec3 r_rot = r.segment<3>(0);
        const Vec3 dbg = gyro_bias_ - delta.lin_gyro_bias;
        jac.block<3, 3>(0, 11) =
            -so3_left_jacobian_inv(r_rot) *
            so3_right_jacobian(delta.j_rot_gyro_bias * dbg) *
            delta.j_rot_gyro_bias;
        jac.block<3, 3>(3, 11) = -delta.j_vel_gyro_bias;
        jac.block<3, 3>(6, 11) = -delta.j_pos_gyro_bias;

        std::array<std::pair<std::size_t, int>, 5> blocks = {
            std::make_pair(3 * (i - 1), 0), std::make_pair(3 * i, 3),
            std::make_pair(theta_off, 6), std::make_pair(ba_off, 8),
            std::make_pair(bg_off, 11)};
        std::array<int, 5> widths = {3, 3, 2, 3, 3};
        for (std::size_t a = 0; a < blocks.size(); ++a) {
          const auto ja = jac.middleCols(blocks[a].second, widths[a]);
          g.segment(blocks[a].first, widths[a]).noalias() +=
              ja.transpose() * r;
          for (std::size_t b = 0; b < blocks.size(); ++b) {
            const auto jb = jac.middleCols(blocks[b].second, widths[b]);
            h.block(blocks[a].first, blocks[b].first, widths[a], widths[b])
                .noalias() += ja.transpose() * jb;
          }
        }
      }

      h.block<3, 3>(ba_off, ba_off).diagonal().array() += mu;
      g.segment<3>(ba_off) += mu * (accel_bias_ - ba_anchor);
      h.block<3, 3>(bg_off, bg_off).diagonal().array() += mu;
      g.segment<3>(bg_off) += mu * (gyro_bias_ - bg_anchor);

      if (!estimate_constants) {
        // Freeze the constant block: unit diagonal, zero gradient.
        for (std::size_t c = theta_off; c < dim; ++c) {
          h.row(c).setZero();
          h.col(c).setZero();
          h(c, c) = 1.0;
          g[c] = 0.0;
        }
      }

      // Levenberg-Marquardt damping with strict-decrease acceptance.
      const double diag_floor = 1e-9 * (h.diagonal().maxCoeff() + 1.0);
      bool accepted = false;
      double step_norm = 0.0;
      while (lambda < 1e12) {
        Eigen::MatrixXd damped = h;
        damped.diagonal() += lambda * h.diagonal();
        damped.diagonal().array() += diag_floor;
        const Eigen::VectorXd step = damped.ldlt().solve(-g);
        if (!step.allFinite()) {
          lambda *= 10.0;
          continue;
        }
        const auto saved = snapshot();
        apply_step(step, theta_off, ba_off, bg_off);
        const double trial = anchored_cost();
        if (trial < cost - 1e-16 * (1.0 + cost)) {
          cost = trial;
          lambda = std::max(lambda * 0.5, 1e-12);
          step_norm = step.norm();
          accepted = true;
          break;
        }
        restore(saved);
        lambda *= 10.0;
      }
      result.iterations = iter + 1;
      if (!accepted) break;
      if (step_norm < config_.step_eps) {
        result.converged = true;
        break;
      }
    }

    accel_bias_ = accel_bias_.cwiseMax(-config_.accel_bias_limit)
                      .cwiseMin(config_.accel_bias_limit);
    gyro_bias_ = gyro_bias_.cwiseMax(-config_.gyro_bias_limit)
                     .cwiseMin(config_.gyro_bias_limit);
    result.final_cost = total_cost();
    result.converged = result.converged || result.iterations < config_.max_iterations;
    return result;
  }

  const WindowConfig& config() const { return config_; }

 private:
  struct StateSnapshot {
    std::vector<Vec3> velocities;
    Vec3 gravity_up;
    Vec3 accel_bias;
    Vec3 gyro_bias;
  };

  StateSnapshot snapshot() const {
    StateSnapshot s;
    s.velocities.reserve(entries_.size());
    for (const Entry& e : entries_) s.velocities.push_back(e.velocity);
    s.gravity_up = gravity_up_;
    s.accel_bias = accel_bias_;
    s.gyro_bias = gyro_bias_;
    return s;
  }

  void restore(const StateSnapshot& s) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      entries_[i].velocity = s.velocities[i];
    }
    gravity_up_ = s.gravity_up;
    accel_bias_ = s.accel_bias;
    gyro_bias_ = s.gyro_bias;
  }

  void apply_step(const Eigen::VectorXd& step, std::size_t theta_off,
                  std::size_t ba_off, std::size_t bg_off) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      entries_[i].velocity += step.segment<3>(3 * i);
    }
    const auto [b1, b2] = tangent_basis(gravity_up_);
    gravity_up_ =
        (so3_exp(b1 * step[theta_off] + b2 * step[theta_off + 1]) *
         gravity_up_)
            .normalized();
    accel_bias_ += step.segment<3>(ba_off);
    gyro_bias_ += step.segment<3>(bg_off);
  }

  WindowConfig config_;
  std::deque<Entry> entries_;
  Vec3 gravity_up_ = Vec3::UnitZ();
  Vec3 accel_bias_ = Vec3::Zero();
  Vec3 gyro_bias_ = Vec3::Zero();
};

}  // namespace bievr
