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
#include <numeric>
#include <span>
#include <vector>

#include "bievr/types.hpp"

namespace bievr {

inline constexpr double kMaxImuGap = 0.1;  // seconds

/// IMU increments between two times, integrated at fixed linearization
/// biases, with first-order bias Jacobians for cheap re-linearization.
struct PreintegratedDelta {
  Mat3 delta_rotation = Mat3::Identity();
  Vec3 delta_velocity = Vec3::Zero();
  Vec3 delta_position = Vec3::Zero();
  double dt = 0.0;
  double t_begin = 0.0;
  double t_end = 0.0;
  Vec3 lin_accel_bias = Vec3::Zero();
  Vec3 lin_gyro_bias = Vec3::Zero();
  Mat3 j_rot_gyro_bias = Mat3::Zero();
  Mat3 j_vel_accel_bias = Mat3::Zero();
  Mat3 j_vel_gyro_bias = Mat3::Zero();
  Mat3 j_pos_accel_bias = Mat3::Zero();
  Mat3 j_pos_gyro_bias = Mat3::Zero();

  /// First-order corrected increments at biases (lin + delta_b).
  Mat3 corrected_rotation(const Vec3& gyro_bias) const {
    return delta_rotation * so3_exp(j_rot_gyro_bias * (gyro_bias - lin_gyro_bias));
  }
  Vec3 corrected_velocity(const Vec3& accel_bias, const Vec3& gyro_bias) const {
    return delta_velocity + j_vel_accel_bias * (accel_bias - lin_accel_bias) +
           j_vel_gyro_bias * (gyro_bias - lin_gyro_bias);
  }
  Vec3 corrected_position(const Vec3& accel_bias, const Vec3& gyro_bias) const {
    return delta_position + j_pos_accel_bias * (accel_bias - lin_accel_bias) +
           j_pos_gyro_bias * (gyro_bias - lin_gyro_bias);
  }
};

namespace detail {

/// Piecewise-linear view over a (strictly increasing) IMU stream.
class ImuSignal {
 public:
  ImuSignal(std::span<const ImuSample> samples, double t_begin, double t_end)
      : samples_(samples) {
    if (samples.size() < 2) {
      throw ImuStreamError("need at least two IMU samples");
    }
    if (samples.front().timestamp > t_begin + 1e-9 ||
        samples.back().timestamp < t_end - 1e-9) {
      throw ImuStreamError("IMU samples do not bracket the query interval");
    }
    for (std::size_t i = 1; i < samples.size(); ++i) {
      const double lo = samples[i - 1].timestamp;
      const double hi = samples[i].timestamp;
      if (hi <= lo) throw ImuStreamError("IMU timestamps not increasing");
      if (hi > t_begin && lo < t_end && hi - lo > kMaxImuGap) {
        throw ImuStreamError("imu_gap");
      }
    }
  }

  void interpolate(double t, Vec3& gyro, Vec3& accel) const {
    auto it = std::lower_bound(
        samples_.begin(), samples_.end(), t,
        [](const ImuSample& s, double v) { return s.timestamp < v; });
    if (it == samples_.begin()) {
      gyro = it->angular_velocity;
      accel = it->linear_acceleration;
      return;
    }
    if (it == samples_.end()) {
      gyro = samples_.back().angular_velocity;
      accel = samples_.back().linear_acceleration;
      return;
    }
    const ImuSample& b = *it;
    const ImuSample& a = *(it - 1);
    const double f = (t - a.timestamp) / (b.timestamp - a.timestamp);
    gyro = (1.0 - f) * a.angular_velocity + f * b.angular_velocity;
    accel = (1.0 - f) * a.linear_acceleration + f * b.linear_acceleration;
  }

  /// Interior sample times strictly inside (t_begin, t_end).
  std::vector<double> breakpoints(double t_begin, double t_end) const {
    std::vector<double> out;
    for (const ImuSample& s : samples_) {
      if (s.timestamp > t_begin + 1e-12 && s.timestamp < t_end - 1e-12) {
        out.push_back(s.timestamp);
      }
    }
    return out;
  }

 private:
  std::span<const ImuSample> samples_;
};

/// Midpoint-rule integrator over the piecewise-linear signal, accumulating
/// first-order bias Jacobians alongside the increments.
class DeltaIntegrator {
 public:
  DeltaIntegrator(const ImuSignal& signal, const Vec3& accel_bias,
                  const Vec3& gyro_bias, double t_begin)
      : signal_(signal), accel_bias_(accel_bias), gyro_bias_(gyro_bias) {
    delta_.t_begin = t_begin;
    delta_.t_end = t_begin;
    delta_.lin_accel_bias = accel_bias;
    delta_.lin_gyro_bias = gyro_bias;
    time_ = t_begin;
  }

  void advance_to(double t) {
    if (t <= time_) return;
    const double h = t - time_;
    Vec3 w0, a0, w1, a1;
    signal_.interpolate(time_, w0, a0);
    signal_.interpolate(t, w1, a1);
    const Vec3 omega = 0.5 * (w0 + w1) - gyro_bias_;
    const Vec3 accel = 0.5 * (a0 + a1) - accel_bias_;

    const Mat3 half_step = so3_exp(0.5 * h * omega);
    const Mat3 rot_half = delta_.delta_rotation * half_step;
    const Vec3 accel_delta_frame = rot_half * accel;

    // Exact first-order sensitivity of the mid-step rotation to the gyro
    // bias: the accumulated rotation Jacobian conjugated through the half
    // step plus the half step's own dependence.
    const Mat3 d_half = half_step.transpose() * delta_.j_rot_gyro_bias -
                         0.5 * h * so3_right_jacobian(0.5 * h * omega);

    // Position and its Jacobians consume the pre-update velocity terms.
    delta_.delta_position +=
        delta_.delta_velocity * h + 0.5 * h * h * accel_delta_frame;
    delta_.j_pos_accel_bias +=
        delta_.j_vel_accel_bias * h - 0.5 * h * h * rot_half;
    delta_.j_pos_gyro_bias += delta_.j_vel_gyro_bias * h -
                              0.5 * h * h * rot_half * skew(accel) * d_half;

    delta_.delta_velocity += h * accel_delta_frame;
    delta_.j_vel_accel_bias -= h * rot_half;
    delta_.j_vel_gyro_bias -= h * rot_half * skew(accel) * d_half;

    const Mat3 step = so3_exp(h * omega);
    delta_.j_rot_gyro_bias = step.transpose() * delta_.j_rot_gyro_bias -
                             h * so3_right_jacobian(h * omega);
    delta_.delta_rotation = delta_.delta_rotation * step;

    time_ = t;
    delta_.t_end = t;
    delta_.dt = t - delta_.t_begin;
  }

  const PreintegratedDelta& delta() const { return delta_; }

 private:
  const ImuSignal& signal_;
  Vec3 accel_bias_;
  Vec3 gyro_bias_;
  PreintegratedDelta delta_;
  double time_;
};

}  // namespace detail

/// Preintegrates the stream over [t_begin, t_end] at the given biases.
/// The samples must bracket the interval with no gap above kMaxImuGap.
inline PreintegratedDelta preintegrate(std::span<const ImuSample> samples,
                                       const Vec3& accel_bias,
                                       const Vec3& gyro_bias, double t_begin,
                                       double t_end) {
  if (t_end <= t_begin) {
    throw ImuStreamError("preintegrate: empty interval");
  }
  const detail::ImuSignal signal(samples, t_begin, t_end);
  detail::DeltaIntegrator integrator(signal, accel_bias, gyro_bias, t_begin);
  for (double t : signal.breakpoints(t_begin, t_end)) {
    integrator.advance_to(t);
  }
  integrator.advance_to(t_end);
  return integrator.delta();
}

/// Propagates (pose, velocity) through a delta under gravity g_vec
/// (world-frame gravitational acceleration, e.g. (0, 0, -9.81)).
inline std::pair<SE3, Vec3> predict_state(const SE3& pose, const Vec3& velocity,
                                          const PreintegratedDelta& delta,
                                          const Vec3& g_vec) {
  const double dt = delta.dt;
  SE3 next;
  next.rotation = pose.rotation * delta.delta_rotation;
  next.translation = pose.translation + velocity * dt +
                     0.5 * dt * dt * g_vec +
                     pose.rotation * delta.delta_position;
  const Vec3 next_velocity =
      velocity + g_vec * dt + pose.rotation * delta.delta_velocity;
  return {next, next_velocity};
}

inline SE3 predict_pose(const SE3& pose, const Vec3& velocity,
                        const PreintegratedDelta& delta, const Vec3& g_vec) {
  return predict_state(pose, velocity, delta, g_vec).first;
}

/// Motion state at the first timestamp of a scan, used for undistortion.
struct UndistortState {
  Mat3 rotation = Mat3::Identity();  // R_GI at scan begin
  Vec3 velocity = Vec3::Zero();      // world frame
  Vec3 g_vec = Vec3(0.0, 0.0, -9.81);
  Vec3 accel_bias = Vec3::Zero();
  Vec3 gyro_bias = Vec3::Zero();
};

/// Moves every point to the scan-end IMU frame:
///   p_k = T_{I_k I_i} * (T_IL * p_L),
/// with the relative motion integrated from the IMU between the point's
/// emission time and the scan end. Output order matches the input.
inline std::vector<Vec3> undistort(const Scan& scan,
                                   std::span<const ImuSample> imu,
                                   const UndistortState& state,
                                   const SE3& imu_from_lidar) {
  if (scan.points.empty()) {
    throw std::invalid_argument("undistort: empty scan");
  }
  const double t0 = scan.stamp_begin;
  const double t1 = scan.stamp_end;
  const detail::ImuSignal signal(imu, t0, t1);
  detail::DeltaIntegrator integrator(signal, state.accel_bias, state.gyro_bias,
                                     t0);

  std::vector<std::size_t> order(scan.points.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scan.points[a].timestamp < scan.points[b].timestamp;
  });

  const std::vector<double> breaks = signal.breakpoints(t0, t1);
  std::size_t next_break = 0;

  struct Snapshot {
    Mat3 rotation;
    Vec3 position;
  };
  std::vector<Snapshot> at_point(scan.points.size());

  const Vec3 v_body = state.rotation.transpose() * state.velocity;
  const Vec3 g_body = state.rotation.transpose() * state.g_vec;
  auto snapshot_at = [&](double tau) {
    const PreintegratedDelta& d = integrator.delta();
    return Snapshot{d.delta_rotation, v_body * tau + 0.5 * tau * tau * g_body +
                                          d.delta_position};
  };

  for (std::size_t idx : order) {
    const double t = std::clamp(scan.points[idx].timestamp, t0, t1);
    while (next_break < breaks.size() && breaks[next_break] <= t) {
      integrator.advance_to(breaks[next_break++]);
    }
    integrator.advance_to(t);
    at_point[idx] = snapshot_at(t - t0);
  }
  integrator.advance_to(t1);
  const Snapshot end = snapshot_at(t1 - t0);

  std::vector<Vec3> out(scan.points.size());
  for (std::size_t i = 0; i < scan.points.size(); ++i) {
    const Vec3 p_imu = imu_from_lidar * scan.points[i].position;
    const Vec3 rel =
        end.rotation.transpose() * (at_point[i].position - end.position);
    out[i] = end.rotation.transpose() * (at_point[i].rotation * p_imu) + rel;
  }
  return out;
}

}  // namespace bievr
