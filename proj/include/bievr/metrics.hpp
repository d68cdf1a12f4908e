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
#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/SVD>

#include "bievr/types.hpp"

namespace bievr {

inline constexpr double kAssociationGate = 0.01;  // seconds

/// Nearest-timestamp pose pairs within the gate, one per estimate pose.
inline std::vector<std::pair<std::size_t, std::size_t>> associate_poses(
    const Trajectory& estimate, const Trajectory& truth,
    double gate = kAssociationGate) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::size_t j = 0;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    const double t = estimate[i].timestamp;
    while (j + 1 < truth.size() &&
           std::abs(truth[j + 1].timestamp - t) <=
               std::abs(truth[j].timestamp - t)) {
      ++j;
    }
    if (j < truth.size() && std::abs(truth[j].timestamp - t) <= gate) {
      pairs.emplace_back(i, j);
    }
  }
  return pairs;
}

/// Closed-form SE(3) alignment minimizing sum ||R a_i + t - b_i||^2.
inline SE3 rigid_align(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  if (a.size() != b.size() || a.size() < 3) {
    throw std::invalid_argument("rigid_align needs >= 3 paired points");
  }
  Vec3 ca = Vec3::Zero(), cb = Vec3::Zero();
  for (std::size_t i = 0; i < a.size(); ++i) {
    ca += a[i];
    cb += b[i];
  }
  ca /= static_cast<double>(a.size());
  cb /= static_cast<double>(b.size());
  Mat3 cross = Mat3::Zero();
  for (std::size_t i = 0; i < a.size(); ++i) {
    cross += (b[i] - cb) * (a[i] - ca).transpose();
  }
  Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0
                ? -1.0
                : 1.0;
  const Mat3 r = svd.matrixU() * d * svd.matrixV().transpose();
  return SE3(r, cb - r * ca);
}

/// Absolute trajectory error: RMSE of residual translations after rigid
/// alignment over nearest-timestamp pairs.
inline double ate_rmse(const Trajectory& estimate, const Trajectory& truth) {
  const auto pairs = associate_poses(estimate, truth);
  if (pairs.size() < 3) {
    throw std::invalid_argument("ate_rmse: fewer than 3 associated pose pairs");
  }
  std::vector<Vec3> a, b;
  a.reserve(pairs.size());
  b.reserve(pairs.size());
  for (const auto& [i, j] : pairs) {
    a.push_back(estimate[i].pose.translation);
    b.push_back(truth[j].pose.translation);
  }
  const SE3 align = rigid_align(a, b);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    acc += (align * a[i] - b[i]).squaredNorm();
  }
  return std::sqrt(acc / static_cast<double>(a.size()));
}

/// Relative error over fixed-length segments: for every start pose, pair it
/// with the first truth pose at least segment_len further along the truth
/// arc; the error is the difference of the estimated and true displacement
/// distances, reported as RMSE in percent of the segment length.
inline double relative_error_percent(const Trajectory& estimate,
                                     const Trajectory& truth,
                                     double segment_len = 10.0) {
  const auto pairs = associate_poses(estimate, truth);
  if (pairs.size() < 2) {
    throw std::invalid_argument("relative_error: not enough associated poses");
  }
  std::vector<double> arc(pairs.size(), 0.0);
  for (std::size_t k = 1; k < pairs.size(); ++k) {
    arc[k] = arc[k - 1] + (truth[pairs[k].second].pose.translation -
                           truth[pairs[k - 1].second].pose.translation)
                              .norm();
  }
  if (arc.back() < segment_len) {
    throw std::invalid_argument("relative_error: trajectory shorter than one segment");
  }
  double acc = 0.0;
  std::size_t count = 0;
  std::size_t k_end = 0;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    while (k_end < pairs.size() && arc[k_end] - arc[k] < segment_len) ++k_end;
    if (k_end >= pairs.size()) break;
    const double d_est = (estimate[pairs[k_end].first].pose.translation -
                          estimate[pairs[k].first].pose.translation)
                             .norm();
    const double d_true = (truth[pairs[k_end].second].pose.translation -
                           truth[pairs[k].second].pose.translation)
                              .norm();
    acc += (d_est - d_true) * (d_est - d_true);
    ++count;
  }
  if (count == 0) {
    throw std::invalid_argument("relative_error: no complete segment");
  }
  return std::sqrt(acc / static_cast<double>(count)) / segment_len * 100.0;
}

}  // namespace bievr
