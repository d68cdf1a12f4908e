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

#include "bievr/lie.hpp"

namespace bievr::testutil {

inline Vec3 random_vec3(std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return Vec3(u(rng), u(rng), u(rng));
}

inline Vec3 random_unit_vec3(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v(n(rng), n(rng), n(rng));
  while (v.norm() < 1e-6) v = Vec3(n(rng), n(rng), n(rng));
  return v.normalized();
}

inline Mat3 random_rotation(std::mt19937_64& rng, double max_angle = M_PI) {
  std::uniform_real_distribution<double> u(0.0, max_angle);
  return so3_exp(u(rng) * random_unit_vec3(rng));
}

inline SE3 random_pose(std::mt19937_64& rng, double translation_scale = 2.0,
                       double max_angle = M_PI) {
  return SE3(random_rotation(rng, max_angle),
             random_vec3(rng, translation_scale));
}

}  // namespace bievr::testutil
