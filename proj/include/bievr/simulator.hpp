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

#include <random>
#include <vector>

#include "bievr/scene.hpp"
#include "bievr/trajectory.hpp"

namespace bievr {

struct LidarModel {
  enum class Type { kSpinning, kRaster };
  Type type = Type::kSpinning;
  int beams = 16;
  double fov_up = 15.0 * M_PI / 180.0;
  double fov_down = -15.0 * M_PI / 180.0;
  int columns = 512;
  double scan_period = 0.1;   // seconds per scan
  double min_range = 0.3;
  double max_range = 80.0;
  // Raster pattern (forward-facing +x), swept column by column per scan.
  double raster_fov_h = 70.0 * M_PI / 180.0;
  double raster_fov_v = 50.0 * M_PI / 180.0;
};

struct ImuModel {
  double rate = 200.0;
  double gyro_noise = 0.0;        // rad/s, per sample
  double accel_noise = 0.0;       // m/s^2, per sample
  double bias_random_walk = 0.0;  // 1/sqrt(s) units, both sensors
  Vec3 gyro_bias = Vec3::Zero();
  Vec3 accel_bias = Vec3::Zero();
};

struct TrajectorySpec {
  std::vector<Waypoint> waypoints;
  double static_hold = 1.5;  // seconds of standstill before the first waypoint
  ImuModel imu;
  LidarModel lidar;
  double range_sigma = 0.0;  // m
  SE3 imu_from_lidar;        // extrinsic calibration T_IL
};

struct SimResult {
  std::vector<Scan> scans;          // points in the LiDAR frame
  std::vector<ImuSample> imu;
  Trajectory gt_poses;              // T_GI at every scan end
  std::vector<Vec3> gt_velocities;  // world frame, at scan ends
  Vec3 g_vec = Vec3(0.0, 0.0, -9.81);
  Vec3 true_gyro_bias = Vec3::Zero();
  Vec3 true_accel_bias = Vec3::Zero();
  SE3 imu_from_lidar;
};

/// Ray-casts the trajectory through the scene with per-point emission times
/// and generates the matching IMU stream from the analytic derivatives.
/// Identical (scene, spec, seed) inputs reproduce identical outputs.
inline SimResult simulate(const Scene& scene, const TrajectorySpec& spec,
                          std::uint64_t seed) {
  const TrajectorySampler sampler(spec.waypoints);
  const double t_start = sampler.start_time() - spec.static_hold;
  const double t_end = sampler.end_time();

  SimResult result;
  result.imu_from_lidar = spec.imu_from_lidar;
  result.true_gyro_bias = spec.imu.gyro_bias;
  result.true_accel_bias = spec.imu.accel_bias;
  const Vec3 g_vec = result.g_vec;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // IMU stream with optional white noise and bias random walk; sampled on
  // an exact index grid (accumulated increments drift over long runs) with
  // one spare sample past the end so the last scan stays bracketed.
  Vec3 gyro_bias = spec.imu.gyro_bias;
  Vec3 accel_bias = spec.imu.accel_bias;
  const double dt_imu = 1.0 / spec.imu.rate;
  const double rw = spec.imu.bias_random_walk * std::sqrt(dt_imu);
  const long n_imu =
      static_cast<long>(std::floor((t_end - t_start) * spec.imu.rate)) + 2;
  for (long i = 0; i < n_imu; ++i) {
    const double t = t_start + i * dt_imu;
    const SE3 pose = sampler.pose(t);
    ImuSample s;
    s.timestamp = t;
    s.angular_velocity = sampler.angular_velocity_body(t) + gyro_bias;
    s.linear_acceleration =
        pose.rotation.transpose() * (sampler.acceleration(t) - g_vec) +
        accel_bias;
    if (spec.imu.gyro_noise > 0.0) {
      s.angular_velocity +=
          spec.imu.gyro_noise * Vec3(gauss(rng), gauss(rng), gauss(rng));
    }
    if (spec.imu.accel_noise > 0.0) {
      s.linear_acceleration +=
          spec.imu.accel_noise * Vec3(gauss(rng), gauss(rng), gauss(rng));
    }
    if (rw > 0.0) {
      gyro_bias += rw * Vec3(gauss(rng), gauss(rng), gauss(rng));
      accel_bias += rw * Vec3(gauss(rng), gauss(rng), gauss(rng));
    }
    result.imu.push_back(s);
  }

  // LiDAR scans; one ray per (column, beam), column times spread over the
  // scan period.
  const LidarModel& lidar = spec.lidar;
  const long n_scans = static_cast<long>(
      std::floor((t_end - t_start) / lidar.scan_period + 1e-9));
  for (long s = 0; s < n_scans; ++s) {
    const double begin = t_start + s * lidar.scan_period;
    Scan scan;
    scan.stamp_begin = begin;
    scan.stamp_end = begin + lidar.scan_period;
    for (int c = 0; c < lidar.columns; ++c) {
      const double t =
          begin + lidar.scan_period * (c + 0.5) / lidar.columns;
      const SE3 lidar_pose = sampler.pose(t) * spec.imu_from_lidar;
      for (int b = 0; b < lidar.beams; ++b) {
        Vec3 dir_lidar;
        if (lidar.type == LidarModel::Type::kSpinning) {
          const double azimuth = 2.0 * M_PI * c / lidar.columns;
          const double elevation =
              lidar.beams == 1
                  ? 0.5 * (lidar.fov_up + lidar.fov_down)
                  : lidar.fov_down + (lidar.fov_up - lidar.fov_down) * b /
                                         (lidar.beams - 1);
          dir_lidar = Vec3(std::cos(elevation) * std::cos(azimuth),
                           std::cos(elevation) * std::sin(azimuth),
                           std::sin(elevation));
        } else {
          const double az = lidar.raster_fov_h *
                            (static_cast<double>(c) / (lidar.columns - 1) - 0.5);
          const double el = lidar.raster_fov_v *
                            (static_cast<double>(b) / (lidar.beams - 1) - 0.5);
          dir_lidar = Vec3(std::cos(el) * std::cos(az),
                           std::cos(el) * std::sin(az), std::sin(el));
        }
        const Vec3 dir_world = lidar_pose.rotation * dir_lidar;
        const auto hit =
            scene.raycast(lidar_pose.translation, dir_world, lidar.max_range);
        if (!hit) continue;
        double range = *hit;
        if (spec.range_sigma > 0.0) range += spec.range_sigma * gauss(rng);
        if (range < lidar.min_range || range > lidar.max_range) continue;
        scan.points.push_back(TimedPoint{dir_lidar * range, t});
      }
    }
    if (scan.points.empty()) continue;
    result.scans.push_back(std::move(scan));
    const double end = begin + lidar.scan_period;
    result.gt_poses.push_back({end, sampler.pose(end)});
    result.gt_velocities.push_back(sampler.velocity(end));
  }
  return result;
}

}  // namespace bievr
