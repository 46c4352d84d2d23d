#include <algorithm>
#include <cmath>

#include "twinlink/errors.hpp"
#include "twinlink/kinematics.hpp"

namespace twinlink::kinematics {

// Closed-form IK for UR-type chains, solved directly in the chain's own frame
// convention. Writing T6 for the pose of the last joint frame (target with
// base and tool stripped), the chain factors as
//   T6 = X1 R1(q1) X2 R2(q2) X3 R3(q3) X4 R4(q4) X5 R5(q5) X6 R6(q6)
// with fixed offsets X_i and rotations R_i about the local joint axes. The
// UR structure (axis 1 perpendicular to the parallel triple 2-4, wrist axes
// mutually perpendicular with intersecting lines) gives, in order:
//   q1 from  w(q1) . (p - o1) = D          (lateral-offset invariant)
//   q5 from  w(q1) . axis6   = a5 c5 + b5 s5
//   q6 from  the arm direction expressed in the target frame
//   q2,q3   planar 2R in the plane perpendicular to axis 2
//   q4      rotation remainder about axis 4.
// All scalars above are extracted from the parsed chain at construction.

namespace {

constexpr double kGeomTol = 1e-7;    // structure validation
constexpr double kReachEps = 1e-9;   // acos domain slack
constexpr double kResidualTol = 1e-6;
constexpr double kDedupTol = 1e-6;

Eigen::Matrix3d rot_about(const Eigen::Vector3d& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis).toRotationMatrix();
}

Eigen::Vector3d any_perpendicular(const Eigen::Vector3d& v) {
  Eigen::Vector3d ref = std::abs(v.x()) < 0.9 ? Eigen::Vector3d::UnitX()
                                              : Eigen::Vector3d::UnitY();
  return (ref - ref.dot(v) * v).normalized();
}

bool parallel(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  return a.cross(b).norm() < kGeomTol;
}

bool perpendicular(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  return std::abs(a.dot(b)) < kGeomTol;
}

Eigen::Vector3d rotation_vector(const Eigen::Matrix3d& r) {
  Eigen::AngleAxisd aa(r);
  return aa.angle() * aa.axis();
}

// Newton refinement of an analytic branch solution. The closed form lands
// within ~1e-7 of the target; two Jacobian steps take it to machine precision.
JointConfig polish_solution(const KinematicChain& chain, const Transformd& target,
                            JointConfig q) {
  const Eigen::Matrix3d target_rot = target.rotationMatrix();
  for (int iter = 0; iter < 3; ++iter) {
    Transformd pose = chain.base_transform;
    Eigen::Vector3d origin[6], axis[6];
    for (int i = 0; i < 6; ++i) {
      pose = pose * chain.links[i].fixed_offset;
      origin[i] = pose.translation();
      axis[i] = pose.rotate(chain.links[i].axis);
      pose = pose * Transformd::fromAngleAxis(q[i], chain.links[i].axis);
    }
    const Transformd tool = pose * chain.tool_offset;
    Eigen::Matrix<double, 6, 1> err;
    err.head<3>() = target.translation() - tool.translation();
    err.tail<3>() = rotation_vector(target_rot * tool.rotationMatrix().transpose());
    if (err.norm() < 1e-13) break;
    Eigen::Matrix<double, 6, 6> jac;
    for (int i = 0; i < 6; ++i) {
      jac.block<3, 1>(0, i) = axis[i].cross(tool.translation() - origin[i]);
      jac.block<3, 1>(3, i) = axis[i];
    }
    Eigen::Matrix<double, 6, 1> dq = jac.completeOrthogonalDecomposition().solve(err);
    if (!dq.allFinite() || dq.cwiseAbs().maxCoeff() > 1e-2) break;
    q = JointConfig(q.angles() + dq);
  }
  return q;
}

}  // namespace

UrAnalyticIk::UrAnalyticIk(const KinematicChain& chain) : chain_(chain) {
  if (chain.links.size() != 6) {
    throw StructureError("analytic IK requires a 6-revolute chain, got " +
                         std::to_string(chain.links.size()) + " links");
  }
  for (int i = 0; i < 6; ++i) {
    local_axis_[i] = chain.links[i].axis;
    offset_rot_[i] = chain.links[i].fixed_offset.rotationMatrix();
    offset_trans_[i] = chain.links[i].fixed_offset.translation();
  }

  // Zero-pose frames in the chain-base frame (base_transform excluded).
  Transformd partial = Transformd::Identity();
  Eigen::Vector3d origin[6], dir[6];
  for (int i = 0; i < 6; ++i) {
    partial = partial * chain.links[i].fixed_offset;
    origin[i] = partial.translation();
    dir[i] = partial.rotate(local_axis_[i]);
  }

  if (!perpendicular(dir[0], dir[1]))
    throw StructureError("IK geometry: axes 1 and 2 are not perpendicular");
  if (!parallel(dir[1], dir[2]) || !parallel(dir[2], dir[3]))
    throw StructureError("IK geometry: axes 2-4 are not parallel");
  if (!perpendicular(dir[3], dir[4]) || !perpendicular(dir[4], dir[5]))
    throw StructureError("IK geometry: wrist axes are not perpendicular");
  Eigen::Vector3d o5_to_o4 = origin[4] - origin[3];
  if (o5_to_o4.cross(dir[3]).norm() > kGeomTol * (1.0 + o5_to_o4.norm()))
    throw StructureError("IK geometry: wrist-2 origin is off the axis-4 line");
  Eigen::Vector3d o6_to_o5 = origin[5] - origin[4];
  if (o6_to_o5.cross(dir[4]).norm() > kGeomTol * (1.0 + o6_to_o5.norm()))
    throw StructureError("IK geometry: wrist-3 origin is off the axis-5 line");

  axis1_dir_ = dir[0];
  joint1_origin_ = origin[0];
  arm_dir0_ = dir[3];
  lateral_offset_ = arm_dir0_.dot(origin[4] - origin[0]);

  // Wrist equation coefficients.
  Eigen::Vector3d u = offset_rot_[4].transpose() * local_axis_[3];
  Eigen::Vector3d n = offset_rot_[5] * local_axis_[5];
  a5_ = u.dot(n);
  b5_ = u.dot(local_axis_[4].cross(n));
  if (std::hypot(a5_, b5_) < kGeomTol)
    throw StructureError("IK geometry: degenerate wrist equation");

  // Planar 2R data in frame-2 coordinates.
  const Eigen::Vector3d b2 = local_axis_[1];
  const Eigen::Vector3d b3 = local_axis_[2];
  elbow_sign_ = (offset_rot_[2] * b3).dot(b2) > 0 ? 1.0 : -1.0;
  const Eigen::Vector3d t3 = offset_trans_[2];
  const Eigen::Vector3d t4 = offset_trans_[3];
  Eigen::Vector3d upper_perp = t3 - t3.dot(b2) * b2;
  upper_len_ = upper_perp.norm();
  Eigen::Vector3d fore0 = offset_rot_[2] * t4;
  Eigen::Vector3d fore_perp = fore0 - fore0.dot(b2) * b2;
  fore_len_ = fore_perp.norm();
  if (upper_len_ < 1e-9 || fore_len_ < 1e-9)
    throw StructureError("IK geometry: degenerate planar arm lengths");
  plane_x_ = upper_perp / upper_len_;
  plane_y_ = b2.cross(plane_x_);
  fore_angle0_ = std::atan2(fore_perp.dot(plane_y_), fore_perp.dot(plane_x_));
  axial_const_ = t3.dot(b2) + elbow_sign_ * t4.dot(b3);

  q4_ref_ = any_perpendicular(local_axis_[3]);
}

IkResult UrAnalyticIk::solve(const Transformd& target) const {
  IkResult result;
  const Transformd goal =
      chain_.base_transform.inverse() * target * chain_.tool_offset.inverse();
  const Eigen::Matrix3d goal_rot = goal.rotationMatrix();
  const Eigen::Vector3d p = goal.translation();

  // Shoulder equation: a*cos(q1) + b*sin(q1) = D.
  const Eigen::Vector3d r = p - joint1_origin_;
  const double sa = arm_dir0_.dot(r);
  const double sb = (axis1_dir_.cross(arm_dir0_)).dot(r);
  const double rho = std::hypot(sa, sb);
  if (rho < 1e-12 || std::abs(lateral_offset_) / rho > 1.0 + kReachEps) {
    result.reachable = false;
    return result;
  }
  const double phi1 = std::atan2(sb, sa);
  const double gamma1 =
      std::acos(std::clamp(lateral_offset_ / rho, -1.0, 1.0));
  const Eigen::Vector3d axis6_world = goal_rot * local_axis_[5];
  const double rho5 = std::hypot(a5_, b5_);
  const double phi5 = std::atan2(b5_, a5_);

  struct Candidate {
    int order;
    JointConfig q;
  };
  std::vector<Candidate> candidates;
  bool any_geometric = false;

  for (int si = 0; si < 2; ++si) {
    const double q1 = wrap_angle(phi1 + (si == 0 ? gamma1 : -gamma1));
    const Eigen::Vector3d arm_dir = rot_about(axis1_dir_, q1) * arm_dir0_;

    const double k5 = arm_dir.dot(axis6_world);
    if (std::abs(k5) / rho5 > 1.0 + kReachEps) continue;
    const double gamma5 = std::acos(std::clamp(k5 / rho5, -1.0, 1.0));

    for (int wi = 0; wi < 2; ++wi) {
      const double q5 = wrap_angle(phi5 + (wi == 0 ? gamma5 : -gamma5));

      // q6 from the arm direction seen in the target frame.
      const Eigen::Vector3d v = goal_rot.transpose() * arm_dir;
      const Eigen::Vector3d g =
          offset_rot_[5].transpose() *
          (rot_about(local_axis_[4], -q5) * (offset_rot_[4].transpose() * local_axis_[3]));
      const Eigen::Vector3d b6 = local_axis_[5];
      const Eigen::Vector3d g_perp = g - g.dot(b6) * b6;
      const Eigen::Vector3d v_perp = v - v.dot(b6) * b6;
      double q6 = 0.0;
      if (g_perp.norm() < 1e-7 || v_perp.norm() < 1e-7) {
        result.wrist_singular = true;  // free angle fixed at 0
      } else {
        q6 = -std::atan2(b6.dot(g.cross(v)), g.dot(v) - g.dot(b6) * v.dot(b6));
      }

      // Strip solved stages: M = (X1 R1)^-1 G (X6 R6)^-1 (X5 R5)^-1.
      const Transformd x1r1 =
          chain_.links[0].fixed_offset * Transformd::fromAngleAxis(q1, local_axis_[0]);
      const Transformd x5r5 =
          chain_.links[4].fixed_offset * Transformd::fromAngleAxis(q5, local_axis_[4]);
      const Transformd x6r6 =
          chain_.links[5].fixed_offset * Transformd::fromAngleAxis(q6, local_axis_[5]);
      const Transformd mid = x1r1.inverse() * goal * x6r6.inverse() * x5r5.inverse();

      const Eigen::Vector3d c =
          offset_rot_[1].transpose() * (mid.translation() - offset_trans_[1]);
      if (std::abs(c.dot(local_axis_[1]) - axial_const_) > 1e-5) continue;
      const double cx = c.dot(plane_x_);
      const double cy = c.dot(plane_y_);
      const double r2 = cx * cx + cy * cy;
      const double cos_arg = (r2 - upper_len_ * upper_len_ - fore_len_ * fore_len_) /
                             (2.0 * upper_len_ * fore_len_);
      if (std::abs(cos_arg) > 1.0 + kReachEps) continue;
      const double delta = std::acos(std::clamp(cos_arg, -1.0, 1.0));
      const double theta_c = std::atan2(cy, cx);
      any_geometric = true;

      for (int ei = 0; ei < 2; ++ei) {
        const double bend = (ei == 0 ? delta : -delta);
        const double q3 = wrap_angle(elbow_sign_ * (bend - fore_angle0_));
        const double ux = upper_len_ + fore_len_ * std::cos(fore_angle0_ + elbow_sign_ * q3);
        const double uy = fore_len_ * std::sin(fore_angle0_ + elbow_sign_ * q3);
        const double q2 = wrap_angle(theta_c - std::atan2(uy, ux));

        const Eigen::Matrix3d q4_rot =
            offset_rot_[3].transpose() * rot_about(local_axis_[2], -q3) *
            offset_rot_[2].transpose() * rot_about(local_axis_[1], -q2) *
            offset_rot_[1].transpose() * mid.rotationMatrix();
        const Eigen::Vector3d b4 = local_axis_[3];
        if ((q4_rot * b4 - b4).norm() > 1e-5) continue;
        const Eigen::Vector3d x = q4_rot * q4_ref_;
        const double q4 = std::atan2(b4.dot(q4_ref_.cross(x)), q4_ref_.dot(x));

        Vec6 angles;
        angles << q1, q2, q3, q4, q5, q6;
        JointConfig q = polish_solution(chain_, target, JointConfig(angles));

        const Transformd fk = forward_kinematics(chain_, q);
        if (fk.translationDistanceTo(target) > kResidualTol ||
            fk.rotationAngleTo(target) > kResidualTol) {
          continue;
        }
        if (!within_limits(chain_, q)) continue;

        bool duplicate = false;
        for (const auto& existing : candidates) {
          if (existing.q.max_wrapped_delta(q) <= kDedupTol) {
            duplicate = true;
            break;
          }
        }
        if (duplicate) continue;

        // Deterministic order: shoulder branch, then elbow, then wrist.
        candidates.push_back({si * 4 + ei * 2 + wi, q});
      }
    }
  }

  if (candidates.empty() && !any_geometric) {
    result.reachable = false;
    return result;
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.order < b.order; });
  result.solutions.reserve(candidates.size());
  for (auto& c : candidates) result.solutions.push_back(c.q);
  return result;
}

}  // namespace twinlink::kinematics
