#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <cmath>

namespace twinlink {

/// Rigid-body transform stored as a unit quaternion plus translation.
///
/// Composition renormalizes the quaternion, so arbitrarily long chains keep
/// unit norm to within a few ulps instead of drifting.
template <typename Scalar>
class Transform {
 public:
  using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
  using Quat = Eigen::Quaternion<Scalar>;
  using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
  using Mat4 = Eigen::Matrix<Scalar, 4, 4>;

  Transform() : rotation_(Quat::Identity()), translation_(Vec3::Zero()) {}
  Transform(const Quat& rotation, const Vec3& translation)
      : rotation_(rotation.normalized()), translation_(translation) {}

  static Transform Identity() { return Transform(); }

  static Transform fromTranslation(const Vec3& t) {
    return Transform(Quat::Identity(), t);
  }

  static Transform fromAngleAxis(Scalar angle, const Vec3& axis) {
    return Transform(Quat(Eigen::AngleAxis<Scalar>(angle, axis.normalized())),
                     Vec3::Zero());
  }

  /// URDF origin semantics: translate by xyz, rotate by fixed-axis rpy
  /// (R = Rz(yaw) * Ry(pitch) * Rx(roll)).
  static Transform fromOriginRpy(const Vec3& xyz, const Vec3& rpy) {
    Quat q = Eigen::AngleAxis<Scalar>(rpy.z(), Vec3::UnitZ()) *
             Eigen::AngleAxis<Scalar>(rpy.y(), Vec3::UnitY()) *
             Eigen::AngleAxis<Scalar>(rpy.x(), Vec3::UnitX());
    return Transform(q, xyz);
  }

  const Quat& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  Mat3 rotationMatrix() const { return rotation_.toRotationMatrix(); }

  Mat4 matrix() const {
    Mat4 m = Mat4::Identity();
    m.template block<3, 3>(0, 0) = rotationMatrix();
    m.template block<3, 1>(0, 3) = translation_;
    return m;
  }

  Transform operator*(const Transform& rhs) const {
    Quat q = rotation_ * rhs.rotation_;
    q.normalize();
    return Transform(q, translation_ + rotation_ * rhs.translation_);
  }

  /// Apply to a point.
  Vec3 operator*(const Vec3& p) const { return rotation_ * p + translation_; }

  /// Apply to a direction (rotation only).
  Vec3 rotate(const Vec3& v) const { return rotation_ * v; }

  Transform inverse() const {
    Quat qi = rotation_.conjugate();
    return Transform(qi, qi * (-translation_));
  }

  /// Geodesic rotation angle to another transform, in [0, pi].
  /// atan2 form: accurate down to machine precision for small angles.
  Scalar rotationAngleTo(const Transform& rhs) const {
    Quat rel = rotation_.conjugate() * rhs.rotation_;
    return Scalar(2) * std::atan2(rel.vec().norm(), std::abs(rel.w()));
  }

  Scalar translationDistanceTo(const Transform& rhs) const {
    return (translation_ - rhs.translation_).norm();
  }

  bool isApprox(const Transform& rhs, Scalar tol) const {
    return translationDistanceTo(rhs) <= tol && rotationAngleTo(rhs) <= tol;
  }

 private:
  Quat rotation_;
  Vec3 translation_;
};

using Transformd = Transform<double>;

}  // namespace twinlink
