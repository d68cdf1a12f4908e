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
#include <string>
#include <vector>

#include "bievr/lie.hpp"

namespace bievr {

/// One LiDAR return in the sensor frame with its emission time.
struct TimedPoint {
  Vec3 position = Vec3::Zero();
  double timestamp = 0.0;
};

struct Scan {
  std::vector<TimedPoint> points;
  double stamp_begin = 0.0;
  double stamp_end = 0.0;
};

struct ImuSample {
  double timestamp = 0.0;
  Vec3 angular_velocity = Vec3::Zero();   // rad/s
  Vec3 linear_acceleration = Vec3::Zero();  // m/s^2 (specific force)
};

struct StampedPose {
  double timestamp = 0.0;
  SE3 pose;
};

using Trajectory = std::vector<StampedPose>;

/// Raised when an IMU stream has a gap or does not bracket the query interval.
struct ImuStreamError : std::runtime_error {
  explicit ImuStreamError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when the startup window is too short or not quasi-static.
struct StartupError : std::runtime_error {
  explicit StartupError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace bievr
