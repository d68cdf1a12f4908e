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

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace bievr {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Vec9 = Eigen::Matrix<double, 9, 1>;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Pose increment (rho, phi): translational part first, rotational second.
using Twist = Vec6;

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
      -v.y(), v.x(), 0.0;
  return m;
}

inline Vec3 vee(const Mat3& m) {
  return Vec3(m(2, 1), m(0, 2), m(1, 0));
}

/// Rodrigues formula with Taylor fallback near the identity.
inline Mat3 so3_exp(const Vec3& phi) {
  const double theta2 = phi.squaredNorm();
  const Mat3 k = skew(phi);
  if (theta2 < 1e-16) {
    return Mat3::Identity() + k + 0.5 * k * k;
  }
  const double theta = std::sqrt(theta2);
  return Mat3::Identity() + (std::sin(theta) / theta) * k +
         ((1.0 - std::cos(theta)) / theta2) * k * k;
}

inline Vec3 so3_log(const Mat3& r) {
  const double cos_theta = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
  const double theta = std::acos(cos_theta);
  const Vec3 w = vee(r - r.transpose()) * 0.5;
  if (theta < 1e-8) {
    // log(R) ~ (R - R^T)/2 to second order
    return w * (1.0 + theta * theta / 6.0);
  }
  if (theta > M_PI - 1e-6) {
    // Near pi the skew part vanishes; recover the axis from the symmetric part.
    const Mat3 s = 0.5 * (r + Mat3::Identity());
    int i = 0;
    s.diagonal().maxCoeff(&i);
    Vec3 axis = s.col(i) / std::sqrt(std::max(s(i, i), 1e-300));
    axis.normalize();
    // Fix the sign using the skew part when it is not exactly zero.
    if (axis.dot(w) < 0.0) axis = -axis;
    return theta * axis;
  }
  return w * (theta / std::sin(theta));
}

/// Left Jacobian of SO(3).
inline Mat3 so3_left_jacobian(const Vec3& phi) {
  const double theta2 = phi.squaredNorm();
  const Mat3 k = skew(phi);
  if (theta2 < 1e-16) {
    return Mat3::Identity() + 0.5 * k + (1.0 / 6.0) * k * k;
  }
  const double theta = std::sqrt(theta2);
  return Mat3::Identity() + ((1.0 - std::cos(theta)) / theta2) * k +
         ((theta - std::sin(theta)) / (theta2 * theta)) * k * k;
}

inline Mat3 so3_right_jacobian(const Vec3& phi) { return so3_left_jacobian(-phi); }

inline Mat3 so3_left_jacobian_inv(const Vec3& phi) {
  const double theta2 = phi.squaredNorm();
  const Mat3 k = skew(phi);
  if (theta2 < 1e-16) {
    return Mat3::Identity() - 0.5 * k + (1.0 / 12.0) * k * k;
  }
  const double theta = std::sqrt(theta2);
  const double half = 0.5 * theta;
  const double cot = 1.0 / std::tan(half);
  return Mat3::Identity() - 0.5 * k +
         ((1.0 - half * cot) / theta2) * k * k;
}

inline Mat3 so3_right_jacobian_inv(const Vec3& phi) { return so3_left_jacobian_inv(-phi); }

/// Rigid transform stored as rotation matrix + translation.
struct SE3 {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  SE3() = default;
  SE3(const Mat3& r, const Vec3& t) : rotation(r), translation(t) {}

  static SE3 identity() { return SE3(); }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Vec3 operator*(const Vec3& p) const { return apply(p); }

  SE3 operator*(const SE3& other) const {
    return SE3(rotation * other.rotation,
               rotation * other.translation + translation);
  }

  SE3 inverse() const {
    const Mat3 rt = rotation.transpose();
    return SE3(rt, -(rt * translation));
  }

  bool is_valid(double eps = 1e-9) const {
    return (rotation.transpose() * rotation - Mat3::Identity())
                   .cwiseAbs()
                   .maxCoeff() < eps &&
           std::abs(rotation.determinant() - 1.0) < eps &&
           translation.allFinite();
  }

  Eigen::Quaterniond quaternion() const { return Eigen::Quaterniond(rotation); }
};

/// SE(3) exponential; xi = (rho, phi).
inline SE3 se3_exp(const Twist& xi) {
  const Vec3 rho = xi.head<3>();
  const Vec3 phi = xi.tail<3>();
  return SE3(so3_exp(phi), so3_left_jacobian(phi) * rho);
}

inline Twist se3_log(const SE3& t) {
  const Vec3 phi = so3_log(t.rotation);
  Twist xi;
  xi.head<3>() = so3_left_jacobian_inv(phi) * t.translation;
  xi.tail<3>() = phi;
  return xi;
}

inline double angle_between(const Vec3& a, const Vec3& b) {
  const double c = a.normalized().dot(b.normalized());
  return std::acos(std::clamp(c, -1.0, 1.0));
}

inline double rotation_angle(const Mat3& r) { return so3_log(r).norm(); }

}  // namespace bievr
