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

#include <iomanip>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "bievr/metrics.hpp"
#include "bievr/pipeline.hpp"
#include "bievr/simulator.hpp"

namespace bievr {

/// Ablation axes: map representation (plane vs bump image), Jacobian image
/// gradient term, and sampling strategy.
struct AblationMode {
  std::string name;
  bool use_bump_heights = true;
  bool use_image_gradient = true;
  SamplingMode sampling = SamplingMode::kInformedDual;
};

inline const std::vector<AblationMode>& ablation_modes() {
  static const std::vector<AblationMode> modes = {
      {"plane-x-hr", false, false, SamplingMode::kHighResolution},
      {"bievr-x-hr", true, false, SamplingMode::kHighResolution},
      {"bievr-g-hr", true, true, SamplingMode::kHighResolution},
      {"bievr-g-rd", true, true, SamplingMode::kRandomDual},
      {"bievr-g-id", true, true, SamplingMode::kInformedDual},
  };
  return modes;
}

inline const AblationMode& ablation_mode(const std::string& name) {
  for (const AblationMode& m : ablation_modes()) {
    if (m.name == name) return m;
  }
  throw std::invalid_argument("unknown ablation mode: " + name);
}

// --- canonical scenes + trajectories ------------------------------------------

struct SceneSetup {
  Scene scene;
  TrajectorySpec trajectory;
};

/// Slow corrugated-tunnel traversal; the canonical degeneracy benchmark.
/// One corrugation period per voxel (0.5 m) keeps the per-voxel plane fits
/// untilted, so the plane-only ablation is genuinely unconstrained along the
/// tunnel axis while the bump images carry the axial information.
inline SceneSetup tunnel_setup(double length = 50.0, double amplitude = 0.02,
                               double wavelength = 0.5, bool with_noise = true,
                               double band_period = 0.0,
                               double band_len = 0.0) {
  SceneSetup setup;
  setup.scene = make_tunnel(length, 6.0, 4.0, amplitude, wavelength,
                            band_period, band_len);
  const double mean_speed = 1.1;
  const double x0 = 1.5, x1 = length - 1.5;
  std::vector<Waypoint> wps;
  // Smooth arc-length profile (zero end velocities, gentle acceleration).
  const int segments = 16;
  const double duration = (x1 - x0) / mean_speed;
  for (int i = 0; i <= segments; ++i) {
    const double f = static_cast<double>(i) / segments;
    const double s = f - std::sin(2.0 * M_PI * f) / (2.0 * M_PI);
    Waypoint w;
    w.timestamp = f * duration;
    w.position = Vec3(x0 + s * (x1 - x0),
                      0.13 + 0.35 * std::sin(2.5 * f * M_PI),
                      1.8 + 0.15 * std::sin(1.7 * f * M_PI));
    w.orientation = Eigen::Quaterniond::Identity();
    wps.push_back(w);
  }
  setup.trajectory.waypoints = wps;
  setup.trajectory.static_hold = 1.5;
  setup.trajectory.lidar.beams = 32;
  setup.trajectory.lidar.columns = 640;
  setup.trajectory.lidar.fov_up = 22.0 * M_PI / 180.0;
  setup.trajectory.lidar.fov_down = -22.0 * M_PI / 180.0;
  setup.trajectory.lidar.scan_period = 0.1;
  setup.trajectory.lidar.max_range = 80.0;
  if (with_noise) {
    setup.trajectory.range_sigma = 0.001;
    setup.trajectory.imu.gyro_noise = 0.002;
    setup.trajectory.imu.accel_noise = 0.03;
    setup.trajectory.imu.bias_random_walk = 1e-4;
    setup.trajectory.imu.gyro_bias = Vec3(0.002, -0.0015, 0.001);
    setup.trajectory.imu.accel_bias = Vec3(0.04, -0.03, 0.02);
  }
  return setup;
}

/// Slow sweep through the box room; well constrained everywhere.
inline SceneSetup room_setup(bool with_noise = false) {
  SceneSetup setup;
  setup.scene = make_structured_room();
  std::vector<Waypoint> wps;
  const std::vector<Vec3> positions = {
      {-2.0, -2.0, 1.2}, {-0.5, -2.2, 1.3}, {0.8, -0.8, 1.4},
      {0.2, 0.9, 1.2},   {-1.2, 1.8, 1.3},  {-2.4, 0.4, 1.2}};
  for (std::size_t i = 0; i < positions.size(); ++i) {
    Waypoint w;
    w.timestamp = 2.5 * static_cast<double>(i);
    w.position = positions[i];
    w.orientation = Eigen::Quaterniond(
        Eigen::AngleAxisd(0.25 * static_cast<double>(i), Vec3::UnitZ()));
    wps.push_back(w);
  }
  setup.trajectory.waypoints = wps;
  setup.trajectory.static_hold = 1.5;
  setup.trajectory.lidar.beams = 24;
  setup.trajectory.lidar.columns = 480;
  setup.trajectory.lidar.fov_up = 30.0 * M_PI / 180.0;
  setup.trajectory.lidar.fov_down = -30.0 * M_PI / 180.0;
  setup.trajectory.lidar.max_range = 30.0;
  if (with_noise) {
    setup.trajectory.range_sigma = 0.003;
    setup.trajectory.imu.gyro_noise = 0.002;
    setup.trajectory.imu.accel_noise = 0.02;
  }
  return setup;
}

/// Short flat-ground pass over a box obstacle; elevation-export scene.
inline SceneSetup box_on_plane_setup() {
  SceneSetup setup;
  setup.scene = make_box_on_plane();
  std::vector<Waypoint> wps;
  for (int i = 0; i <= 4; ++i) {
    Waypoint w;
    w.timestamp = 2.0 * i;
    w.position = Vec3(-2.0 + 1.0 * i, 0.0, 1.0);
    w.orientation = Eigen::Quaterniond::Identity();
    wps.push_back(w);
  }
  setup.trajectory.waypoints = wps;
  setup.trajectory.static_hold = 1.5;
  setup.trajectory.lidar.beams = 24;
  setup.trajectory.lidar.columns = 480;
  setup.trajectory.lidar.fov_up = -5.0 * M_PI / 180.0;
  setup.trajectory.lidar.fov_down = -60.0 * M_PI / 180.0;
  setup.trajectory.lidar.max_range = 20.0;
  return setup;
}

inline SceneSetup named_scene_setup(const std::string& name) {
  if (name == "tunnel") return tunnel_setup();
  if (name == "room") return room_setup(true);
  if (name == "box_on_plane") return box_on_plane_setup();
  throw std::invalid_argument("unknown scene: " + name);
}

// --- pipeline playback -----------------------------------------------------------

struct RunResult {
  Trajectory trajectory;
  std::vector<FrameResult> frames;
  double mean_frame_seconds = 0.0;
  double mean_registration_points = 0.0;
};

/// Replays simulated data through a caller-owned pipeline in causal order.
inline RunResult run_pipeline(const SimResult& sim, Pipeline& pipeline) {
  RunResult out;

  std::size_t next_imu = 0;
  auto feed_until = [&](double t) {
    while (next_imu < sim.imu.size() &&
           sim.imu[next_imu].timestamp <= t + 1e-9) {
      pipeline.add_imu(sim.imu[next_imu++]);
    }
  };

  for (const Scan& scan : sim.scans) {
    feed_until(scan.stamp_end + 0.01);
    if (!pipeline.initialized()) {
      if (!pipeline.startup_ready()) continue;
      pipeline.initialize();
    }
    if (scan.stamp_end <= pipeline.pose_stamp() + 1e-9) continue;
    const FrameResult frame = pipeline.process_frame(scan);
    out.frames.push_back(frame);
    out.trajectory.push_back({frame.timestamp, frame.pose});
  }

  if (!out.frames.empty()) {
    double acc_t = 0.0, acc_p = 0.0;
    for (const FrameResult& f : out.frames) {
      acc_t += f.t_undistortion + f.t_sampling + f.t_registration + f.t_window +
               f.t_map_update;
      acc_p += static_cast<double>(f.registration_points);
    }
    out.mean_frame_seconds = acc_t / static_cast<double>(out.frames.size());
    out.mean_registration_points =
        acc_p / static_cast<double>(out.frames.size());
  }
  return out;
}

inline RunResult run_pipeline(const SimResult& sim, PipelineConfig config) {
  config.imu_from_lidar = sim.imu_from_lidar;
  Pipeline pipeline(config);
  return run_pipeline(sim, pipeline);
}

// --- the ablation benchmark --------------------------------------------------------

struct ModeReport {
  std::string mode;
  double ate_m = 0.0;
  double re_percent = 0.0;
  double mean_registration_points = 0.0;
  double mean_frame_ms = 0.0;
  std::size_t frames = 0;
};

struct BenchmarkReport {
  std::string scene;
  std::uint64_t seed = 0;
  std::vector<ModeReport> modes;
};

inline BenchmarkReport run_benchmark(const SceneSetup& setup,
                                     const std::string& scene_label,
                                     const std::vector<std::string>& mode_names,
                                     std::uint64_t seed,
                                     const PipelineConfig& base_config = {}) {
  const SimResult sim = simulate(setup.scene, setup.trajectory, seed);

  BenchmarkReport report;
  report.scene = scene_label;
  report.seed = seed;
  for (const std::string& name : mode_names) {
    const AblationMode& mode = ablation_mode(name);
    PipelineConfig config = base_config;
    config.registration.use_bump_heights = mode.use_bump_heights;
    config.registration.use_image_gradient = mode.use_image_gradient;
    config.sampling.mode = mode.sampling;
    const RunResult run = run_pipeline(sim, config);

    ModeReport mr;
    mr.mode = name;
    mr.frames = run.frames.size();
    mr.mean_registration_points = run.mean_registration_points;
    mr.mean_frame_ms = 1e3 * run.mean_frame_seconds;
    mr.ate_m = ate_rmse(run.trajectory, sim.gt_poses);
    try {
      mr.re_percent = relative_error_percent(run.trajectory, sim.gt_poses);
    } catch (const std::invalid_argument&) {
      mr.re_percent = std::numeric_limits<double>::quiet_NaN();
    }
    report.modes.push_back(mr);
  }
  return report;
}

inline BenchmarkReport run_benchmark(const std::string& scene_name,
                                     const std::vector<std::string>& mode_names,
                                     std::uint64_t seed,
                                     const PipelineConfig& base_config = {}) {
  return run_benchmark(named_scene_setup(scene_name), scene_name, mode_names,
                       seed, base_config);
}

inline void print_benchmark(std::ostream& out, const BenchmarkReport& report) {
  out << "scene: " << report.scene << "  seed: " << report.seed << '\n';
  out << std::left << std::setw(14) << "mode" << std::right << std::setw(10)
      << "ATE [m]" << std::setw(10) << "RE [%]" << std::setw(12) << "points"
      << std::setw(12) << "frame [ms]" << std::setw(9) << "frames" << '\n';
  for (const ModeReport& m : report.modes) {
    out << std::left << std::setw(14) << m.mode << std::right << std::fixed
        << std::setprecision(4) << std::setw(10) << m.ate_m
        << std::setprecision(2) << std::setw(10) << m.re_percent
        << std::setprecision(0) << std::setw(12) << m.mean_registration_points
        << std::setprecision(2) << std::setw(12) << m.mean_frame_ms
        << std::setw(9) << m.frames << '\n';
  }
}

}  // namespace bievr
