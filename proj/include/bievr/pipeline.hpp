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

#include <chrono>
#include <deque>
#include <ostream>
#include <sstream>

#include "bievr/io.hpp"
#include "bievr/preintegration.hpp"
#include "bievr/registration.hpp"
#include "bievr/sampling.hpp"
#include "bievr/sliding_window.hpp"
#include "bievr/voxel_map.hpp"

namespace bievr {

struct StartupConfig {
  double duration = 1.0;       // seconds of IMU consumed
  double min_duration = 0.5;
  double max_gyro_std = 0.05;  // rad/s; above this the robot is moving
};

struct PipelineConfig {
  MapConfig map;
  SamplingConfig sampling;
  RegistrationConfig registration;
  WindowConfig window;
  StartupConfig startup;
  SE3 imu_from_lidar;
};

struct FrameResult {
  double timestamp = 0.0;
  SE3 pose;  // T_GI at scan end
  Vec3 velocity = Vec3::Zero();
  double t_undistortion = 0.0;  // includes preintegration and prediction
  double t_sampling = 0.0;
  double t_registration = 0.0;
  double t_window = 0.0;
  double t_map_update = 0.0;
  std::size_t input_points = 0;
  std::size_t registration_points = 0;
  std::size_t dropped_points = 0;
  int registration_iterations = 0;
  double registration_cost = 0.0;
  bool insufficient_constraints = false;
};

inline void write_frame_log_line(std::ostream& out, const FrameResult& f) {
  const Eigen::Quaterniond q = f.pose.quaternion().normalized();
  std::ostringstream ss;
  ss.precision(12);
  ss << "{\"timestamp\":" << f.timestamp << ",\"tx\":" << f.pose.translation.x()
     << ",\"ty\":" << f.pose.translation.y()
     << ",\"tz\":" << f.pose.translation.z() << ",\"qx\":" << q.x()
     << ",\"qy\":" << q.y() << ",\"qz\":" << q.z() << ",\"qw\":" << q.w()
     << ",\"vx\":" << f.velocity.x() << ",\"vy\":" << f.velocity.y()
     << ",\"vz\":" << f.velocity.z()
     << ",\"input_points\":" << f.input_points
     << ",\"registration_points\":" << f.registration_points
     << ",\"dropped_points\":" << f.dropped_points
     << ",\"iterations\":" << f.registration_iterations
     << ",\"cost\":" << f.registration_cost
     << ",\"t_undistortion\":" << f.t_undistortion
     << ",\"t_sampling\":" << f.t_sampling
     << ",\"t_registration\":" << f.t_registration
     << ",\"t_window\":" << f.t_window
     << ",\"t_map_update\":" << f.t_map_update
     << ",\"insufficient_constraints\":"
     << (f.insufficient_constraints ? "true" : "false") << "}";
  out << ss.str() << '\n';
}

/// Quasi-static initialization: the gyro mean seeds the gyro bias and the
/// accelerometer mean direction seeds gravity; the world frame is anchored
/// at the identity pose.
inline InertialState startup_state(std::span<const ImuSample> samples,
                                   const StartupConfig& cfg = {}) {
  if (samples.size() < 2 ||
      samples.back().timestamp - samples.front().timestamp <
          cfg.min_duration) {
    throw StartupError("startup: need at least " +
                       std::to_string(cfg.min_duration) + " s of IMU data");
  }
  const double t_limit = samples.front().timestamp + cfg.duration;
  Vec3 gyro_mean = Vec3::Zero(), accel_mean = Vec3::Zero();
  std::size_t n = 0;
  for (const ImuSample& s : samples) {
    if (s.timestamp > t_limit) break;
    gyro_mean += s.angular_velocity;
    accel_mean += s.linear_acceleration;
    ++n;
  }
  gyro_mean /= static_cast<double>(n);
  accel_mean /= static_cast<double>(n);

  double gyro_var = 0.0;
  std::size_t i = 0;
  for (const ImuSample& s : samples) {
    if (s.timestamp > t_limit) break;
    gyro_var += (s.angular_velocity - gyro_mean).squaredNorm();
    ++i;
  }
  gyro_var /= static_cast<double>(n);
  if (std::sqrt(gyro_var) > cfg.max_gyro_std) {
    throw StartupError("startup_motion");
  }
  if (accel_mean.norm() < 1.0) {
    throw StartupError("startup: accelerometer mean too small for gravity");
  }

  InertialState state;
  state.velocity = Vec3::Zero();
  state.gyro_bias = gyro_mean;
  state.accel_bias = Vec3::Zero();
  state.gravity = kGravityMagnitude * accel_mean.normalized();
  return state;
}

/// Per-frame odometry: predict, undistort, sample, register, optimize the
/// inertial window, then integrate the full undistorted scan into the map.
class Pipeline {
 public:
  explicit Pipeline(const PipelineConfig& config)
      : config_(config), map_(config.map), window_(config.window) {}

  void add_imu(const ImuSample& sample) {
    if (!imu_buffer_.empty() &&
        sample.timestamp <= imu_buffer_.back().timestamp) {
      throw ImuStreamError("IMU timestamps must strictly increase");
    }
    imu_buffer_.push_back(sample);
  }

  bool initialized() const { return initialized_; }

  /// Consumes the buffered startup window; the first pose is the identity.
  InertialState initialize() {
    const std::vector<ImuSample> buffer(imu_buffer_.begin(), imu_buffer_.end());
    const InertialState state = startup_state(buffer, config_.startup);
    const double t0 = buffer.front().timestamp;
    double t_anchor = t0;
    for (const ImuSample& s : buffer) {
      if (s.timestamp > t0 + config_.startup.duration) break;
      t_anchor = s.timestamp;
    }
    pose_ = SE3::identity();
    pose_stamp_ = t_anchor;
    velocity_ = Vec3::Zero();
    window_ = SlidingWindow(config_.window);
    window_.set_state(state);
    window_.push(t_anchor, pose_, velocity_);
    initialized_ = true;
    return state;
  }

  /// Ready when the buffer spans the startup duration.
  bool startup_ready() const {
    return !imu_buffer_.empty() &&
           imu_buffer_.back().timestamp - imu_buffer_.front().timestamp >=
               config_.startup.duration;
  }

  FrameResult process_frame(const Scan& scan) {
    if (!initialized_) {
      throw std::logic_error("pipeline not initialized");
    }
    if (scan.points.empty()) {
      throw std::invalid_argument("empty scan");
    }
    if (scan.stamp_end <= pose_stamp_) {
      throw std::invalid_argument("scan ends before the current state time");
    }

    const InertialState state = window_.state();
    const Vec3 g_vec = -kGravityMagnitude * state.up();
    const auto imu = imu_span(scan.stamp_end);

    FrameResult frame;
    frame.timestamp = scan.stamp_end;
    frame.input_points = scan.points.size();

    // Prediction + motion compensation.
    const auto t0 = now();
    const PreintegratedDelta delta = preintegrate(
        imu, state.accel_bias, state.gyro_bias, pose_stamp_, scan.stamp_end);
    const auto [prior, v_prior] =
        predict_state(pose_, velocity_, delta, g_vec);

    SE3 pose_begin = pose_;
    Vec3 v_begin = velocity_;
    if (scan.stamp_begin > pose_stamp_ + 1e-9) {
      const PreintegratedDelta head =
          preintegrate(imu, state.accel_bias, state.gyro_bias, pose_stamp_,
                       scan.stamp_begin);
      std::tie(pose_begin, v_begin) =
          predict_state(pose_, velocity_, head, g_vec);
    }
    UndistortState us;
    us.rotation = pose_begin.rotation;
    us.velocity = v_begin;
    us.g_vec = g_vec;
    us.accel_bias = state.accel_bias;
    us.gyro_bias = state.gyro_bias;
    const std::vector<Vec3> points_imu =
        undistort(scan, imu, us, config_.imu_from_lidar);
    frame.t_undistortion = seconds_since(t0);

    // Map-informed sampling at the prior pose.
    const auto t1 = now();
    std::vector<Vec3> points_world(points_imu.size());
    for (std::size_t i = 0; i < points_imu.size(); ++i) {
      points_world[i] = prior * points_imu[i];
    }
    const std::vector<std::size_t> sampled =
        informed_sample_indices(points_world, map_, config_.sampling);
    std::vector<Vec3> reg_points;
    reg_points.reserve(sampled.size());
    for (std::size_t i : sampled) reg_points.push_back(points_imu[i]);
    frame.registration_points = reg_points.size();
    frame.t_sampling = seconds_since(t1);

    // Scan-to-map registration.
    const auto t2 = now();
    RegistrationResult reg =
        register_scan(map_, reg_points, prior, config_.registration);
    SE3 pose_k = reg.pose;

    // If the registered motion disagrees with the velocity used for
    // undistortion, the cloud was smeared by the velocity error and the
    // registration inherited a systematic shift: refine once with the
    // velocity implied by the registered pose. Without this the
    // pose-lag -> window-velocity-lag -> cloud-shift feedback loop is
    // unstable whenever one direction is weakly constrained.
    if (!reg.insufficient_constraints) {
      const double dt_full = scan.stamp_end - pose_stamp_;
      const Vec3 v_refined =
          (pose_k.translation - pose_.translation - 0.5 * dt_full * dt_full * g_vec -
           pose_.rotation * delta.delta_position) /
          dt_full;
      const double cloud_shift =
          (v_refined - us.velocity).norm() * (scan.stamp_end - scan.stamp_begin);
      if (cloud_shift > 0.005) {
        UndistortState refined = us;
        refined.velocity = v_refined;
        const std::vector<Vec3> points_imu2 =
            undistort(scan, imu, refined, config_.imu_from_lidar);
        std::vector<Vec3> world2(points_imu2.size());
        for (std::size_t i = 0; i < points_imu2.size(); ++i) {
          world2[i] = pose_k * points_imu2[i];
        }
        const std::vector<std::size_t> sampled2 =
            informed_sample_indices(world2, map_, config_.sampling);
        std::vector<Vec3> reg_points2;
        reg_points2.reserve(sampled2.size());
        for (std::size_t i : sampled2) reg_points2.push_back(points_imu2[i]);
        const RegistrationResult reg2 =
            register_scan(map_, reg_points2, pose_k, config_.registration);
        if (!reg2.insufficient_constraints) {
          reg = reg2;
          pose_k = reg2.pose;
          frame.registration_points = reg_points2.size();
        }
      }
    }
    frame.t_registration = seconds_since(t2);
    frame.registration_iterations = reg.iterations;
    frame.registration_cost = reg.final_cost;
    frame.dropped_points = reg.dropped_count;
    frame.insufficient_constraints = reg.insufficient_constraints;

    // Fixed-pose inertial window over velocities, gravity and biases.
    const auto t3 = now();
    window_.push(scan.stamp_end, pose_k, v_prior, delta);
    window_.prune();
    window_.optimize();
    const InertialState optimized = window_.state();
    frame.t_window = seconds_since(t3);

    // Integrate the full undistorted scan at the registered pose. The scan
    // is re-undistorted with the window-optimized state so the map stays
    // motion-consistent: writing the prediction-time cloud would burn any
    // transient velocity error into the map and feed it back into the next
    // registration.
    const auto t4 = now();
    UndistortState post;
    post.rotation = pose_.rotation;  // registered rotation at scan begin
    post.velocity = window_.size() >= 2
                        ? window_.entries()[window_.size() - 2].velocity
                        : optimized.velocity;
    post.g_vec = -kGravityMagnitude * optimized.up();
    post.accel_bias = optimized.accel_bias;
    post.gyro_bias = optimized.gyro_bias;
    if (scan.stamp_begin > pose_stamp_ + 1e-9) {
      const PreintegratedDelta head =
          preintegrate(imu, post.accel_bias, post.gyro_bias, pose_stamp_,
                       scan.stamp_begin);
      const auto [pose_b, v_b] =
          predict_state(SE3(post.rotation, pose_.translation), post.velocity,
                        head, post.g_vec);
      post.rotation = pose_b.rotation;
      post.velocity = v_b;
    }
    const std::vector<Vec3> map_points =
        undistort(scan, imu, post, config_.imu_from_lidar);
    std::vector<RangedPoint> ranged(map_points.size());
    for (std::size_t i = 0; i < map_points.size(); ++i) {
      ranged[i].position = pose_k * map_points[i];
      ranged[i].range = scan.points[i].position.norm();
    }
    map_.integrate_scan(ranged, pose_k * config_.imu_from_lidar.translation);
    frame.t_map_update = seconds_since(t4);

    pose_ = pose_k;
    pose_stamp_ = scan.stamp_end;
    velocity_ = optimized.velocity;
    drop_consumed_imu(scan.stamp_end);

    frame.pose = pose_k;
    frame.velocity = velocity_;
    return frame;
  }

  const VoxelMap& map() const { return map_; }
  VoxelMap& mutable_map() { return map_; }
  const SlidingWindow& window() const { return window_; }
  const SE3& pose() const { return pose_; }
  double pose_stamp() const { return pose_stamp_; }
  InertialState state() const { return window_.state(); }
  const PipelineConfig& config() const { return config_; }

 private:
  static std::chrono::steady_clock::time_point now() {
    return std::chrono::steady_clock::now();
  }
  static double seconds_since(std::chrono::steady_clock::time_point t) {
    return std::chrono::duration<double>(now() - t).count();
  }

  /// Samples through the first one at/after t_end (half-open scan intervals
  /// rarely land exactly on an IMU timestamp).
  std::span<const ImuSample> imu_span(double t_end) {
    if (imu_buffer_.empty() || imu_buffer_.back().timestamp < t_end - 1e-9) {
      throw ImuStreamError("IMU stream does not cover the scan");
    }
    contiguous_.assign(imu_buffer_.begin(), imu_buffer_.end());
    std::size_t count = 0;
    while (count < contiguous_.size()) {
      ++count;
      if (contiguous_[count - 1].timestamp >= t_end - 1e-9) break;
    }
    return {contiguous_.data(), count};
  }

  void drop_consumed_imu(double t) {
    while (imu_buffer_.size() > 2 &&
           imu_buffer_[1].timestamp <= t - kMaxImuGap) {
      imu_buffer_.pop_front();
    }
  }

  PipelineConfig config_;
  VoxelMap map_;
  SlidingWindow window_;
  bool initialized_ = false;
  SE3 pose_;
  double pose_stamp_ = 0.0;
  Vec3 velocity_ = Vec3::Zero();
  std::deque<ImuSample> imu_buffer_;
  std::vector<ImuSample> contiguous_;
};

// --- elevation export ----------------------------------------------------------

/// Max world-z of observed map pixels per vertical grid column; cells with
/// no candidates stay NaN. Origin at center - extent/2, row-major.
inline ElevationGrid export_elevation(const VoxelMap& map, const Vec3& center,
                                      double extent_x, double extent_y,
                                      double cell_res = 0.05) {
  ElevationGrid grid;
  grid.cell_res = cell_res;
  grid.cols = std::max(1, static_cast<int>(std::lround(extent_x / cell_res)));
  grid.rows = std::max(1, static_cast<int>(std::lround(extent_y / cell_res)));
  grid.origin_x = center.x() - 0.5 * extent_x;
  grid.origin_y = center.y() - 0.5 * extent_y;
  grid.values.assign(static_cast<std::size_t>(grid.cols) * grid.rows,
                     std::numeric_limits<double>::quiet_NaN());

  map.for_each([&](VoxelKey, const Voxel& voxel) {
    if (!voxel.frame_initialized()) return;
    const SE3 world_from_image = voxel.image_from_world().inverse();
    const BumpImage& img = voxel.image();
    const double r = img.pixel_res();
    for (int v = 0; v < img.height(); ++v) {
      for (int u = 0; u < img.width(); ++u) {
        if (!img.observed(u, v)) continue;
        const Vec3 p =
            world_from_image * Vec3((u + 0.5) * r, (v + 0.5) * r, img.value(u, v));
        const int col =
            static_cast<int>(std::floor((p.x() - grid.origin_x) / cell_res));
        const int row =
            static_cast<int>(std::floor((p.y() - grid.origin_y) / cell_res));
        if (col < 0 || col >= grid.cols || row < 0 || row >= grid.rows) continue;
        double& cell = grid.at(col, row);
        if (std::isnan(cell) || p.z() > cell) cell = p.z();
      }
    }
  });
  return grid;
}

/// Same reduction over a loaded map snapshot.
inline ElevationGrid export_elevation(const VoxelMap::Snapshot& snap,
                                      const Vec3& center, double extent_x,
                                      double extent_y, double cell_res = 0.05) {
  ElevationGrid grid;
  grid.cell_res = cell_res;
  grid.cols = std::max(1, static_cast<int>(std::lround(extent_x / cell_res)));
  grid.rows = std::max(1, static_cast<int>(std::lround(extent_y / cell_res)));
  grid.origin_x = center.x() - 0.5 * extent_x;
  grid.origin_y = center.y() - 0.5 * extent_y;
  grid.values.assign(static_cast<std::size_t>(grid.cols) * grid.rows,
                     std::numeric_limits<double>::quiet_NaN());

  for (const auto& sv : snap.voxels) {
    const SE3 world_from_image = sv.image_from_world.inverse();
    const double r = snap.pixel_res;
    for (int v = 0; v < sv.image.height(); ++v) {
      for (int u = 0; u < sv.image.width(); ++u) {
        if (!sv.image.observed(u, v)) continue;
        const Vec3 p = world_from_image *
                       Vec3((u + 0.5) * r, (v + 0.5) * r, sv.image.value(u, v));
        const int col =
            static_cast<int>(std::floor((p.x() - grid.origin_x) / cell_res));
        const int row =
            static_cast<int>(std::floor((p.y() - grid.origin_y) / cell_res));
        if (col < 0 || col >= grid.cols || row < 0 || row >= grid.rows) continue;
        double& cell = grid.at(col, row);
        if (std::isnan(cell) || p.z() > cell) cell = p.z();
      }
    }
  }
  return grid;
}

// --- configuration loading -------------------------------------------------------

/// Applies one "key value" entry; unknown keys and out-of-range values throw.
inline void apply_config_entry(PipelineConfig& cfg, const std::string& key,
                               const std::string& value) {
  auto as_double = [&](double lo, double hi) {
    const double v = std::stod(value);
    if (!(v >= lo && v <= hi)) {
      throw std::invalid_argument("config value out of range for " + key);
    }
    return v;
  };
  auto as_size = [&](double lo, double hi) {
    return static_cast<std::size_t>(as_double(lo, hi));
  };
  auto as_bool = [&] {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw std::invalid_argument("config value must be boolean for " + key);
  };

  if (key == "map.voxel_len") cfg.map.voxel_len = as_double(1e-3, 100.0);
  else if (key == "map.pixel_res") cfg.map.pixel_res = as_double(1e-4, 10.0);
  else if (key == "map.normal_reproject_thresh_deg")
    cfg.map.normal_reproject_thresh = as_double(1e-3, 90.0) * M_PI / 180.0;
  else if (key == "map.capacity") cfg.map.capacity = as_size(1, 1e9);
  else if (key == "map.min_points_for_plane")
    cfg.map.min_points_for_plane = as_size(3, 1e6);
  else if (key == "map.num_threads")
    cfg.map.num_threads = static_cast<unsigned>(as_size(0, 256));
  else if (key == "sampling.fine_res") cfg.sampling.fine_res = as_double(1e-3, 10.0);
  else if (key == "sampling.coarse_res")
    cfg.sampling.coarse_res = as_double(1e-3, 10.0);
  else if (key == "sampling.top_k_voxels")
    cfg.sampling.top_k_voxels = as_size(0, 1e9);
  else if (key == "sampling.seed")
    cfg.sampling.random_seed = static_cast<std::uint64_t>(std::stoull(value));
  else if (key == "sampling.mode") {
    if (value == "id") cfg.sampling.mode = SamplingMode::kInformedDual;
    else if (value == "hr") cfg.sampling.mode = SamplingMode::kHighResolution;
    else if (value == "rd") cfg.sampling.mode = SamplingMode::kRandomDual;
    else throw std::invalid_argument("sampling.mode must be id|hr|rd");
  } else if (key == "registration.huber_delta")
    cfg.registration.huber_delta = as_double(1e-6, 10.0);
  else if (key == "registration.max_iterations")
    cfg.registration.max_iterations = static_cast<int>(as_size(1, 10000));
  else if (key == "registration.convergence_eps")
    cfg.registration.convergence_eps = as_double(0.0, 1.0);
  else if (key == "registration.lm_lambda_init")
    cfg.registration.lm_lambda_init = as_double(0.0, 1e6);
  else if (key == "registration.min_valid_residuals")
    cfg.registration.min_valid_residuals = as_size(1, 1e9);
  else if (key == "registration.use_image_gradient")
    cfg.registration.use_image_gradient = as_bool();
  else if (key == "registration.use_bump_heights")
    cfg.registration.use_bump_heights = as_bool();
  else if (key == "window.span") cfg.window.span = as_double(0.1, 3600.0);
  else if (key == "window.max_iterations")
    cfg.window.max_iterations = static_cast<int>(as_size(1, 1000));
  else if (key == "window.accel_bias_limit")
    cfg.window.accel_bias_limit = as_double(1e-3, 100.0);
  else if (key == "window.gyro_bias_limit")
    cfg.window.gyro_bias_limit = as_double(1e-4, 10.0);
  else if (key == "startup.duration") cfg.startup.duration = as_double(0.1, 60.0);
  else if (key == "startup.min_duration")
    cfg.startup.min_duration = as_double(0.05, 60.0);
  else if (key == "startup.max_gyro_std")
    cfg.startup.max_gyro_std = as_double(1e-6, 10.0);
  else if (key == "extrinsics.imu_from_lidar") {
    // tx,ty,tz,qx,qy,qz,qw
    std::array<double, 7> x{};
    std::stringstream ss(value);
    std::string token;
    for (double& xi : x) {
      if (!std::getline(ss, token, ',')) {
        throw std::invalid_argument(
            "extrinsics.imu_from_lidar needs tx,ty,tz,qx,qy,qz,qw");
      }
      xi = std::stod(token);
    }
    cfg.imu_from_lidar.translation = Vec3(x[0], x[1], x[2]);
    cfg.imu_from_lidar.rotation =
        Eigen::Quaterniond(x[6], x[3], x[4], x[5]).normalized().toRotationMatrix();
  } else {
    throw std::invalid_argument("unknown config key: " + key);
  }
}

inline void validate_config(const PipelineConfig& cfg) {
  if (!(cfg.sampling.fine_res < cfg.sampling.coarse_res)) {
    throw std::invalid_argument("sampling.fine_res must be < coarse_res");
  }
  if (!(cfg.map.pixel_res < cfg.map.voxel_len)) {
    throw std::invalid_argument("map.pixel_res must be < voxel_len");
  }
}

inline PipelineConfig load_config(const std::string& path) {
  PipelineConfig cfg;
  for (const auto& [key, value] : read_key_values(path)) {
    apply_config_entry(cfg, key, value);
  }
  validate_config(cfg);
  return cfg;
}

}  // namespace bievr
