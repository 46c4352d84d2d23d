#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "twinlink/transform.hpp"

namespace twinlink::kinematics {

using Vec6 = Eigen::Matrix<double, 6, 1>;

/// Wrap an angle to (-pi, pi].
double wrap_angle(double a);

/// Shortest signed angular difference a - b, in (-pi, pi].
double angle_diff(double a, double b);

/// Six joint angles, wrapped to (-pi, pi] on construction.
class JointConfig {
 public:
  JointConfig() : angles_(Vec6::Zero()) {}
  /// Wraps each angle; throws StructureError on non-finite input.
  explicit JointConfig(const Vec6& angles);

  double operator[](int i) const { return angles_[i]; }
  const Vec6& angles() const { return angles_; }

  /// Per-joint shortest angular distances to another configuration.
  Vec6 wrapped_delta_from(const JointConfig& from) const;
  double max_wrapped_delta(const JointConfig& other) const;

 private:
  Vec6 angles_;
};

/// One revolute stage: a fixed offset followed by rotation about `axis`
/// (unit vector in the post-offset frame).
struct ChainLink {
  std::string name;
  Transformd fixed_offset;
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
  double limit_lo = 0.0;
  double limit_hi = 0.0;
};

/// Serial kinematic chain: mount pose, revolute links base-to-tool, tool offset.
struct KinematicChain {
  std::string name;
  Transformd base_transform;
  std::vector<ChainLink> links;
  Transformd tool_offset;
};

/// Parse a URDF subset (robot/link/joint with revolute|fixed types, origin,
/// axis, limit) into a chain. Fixed joints fold into the next revolute link's
/// offset; trailing fixed joints fold into the tool offset.
///
/// Throws ParseError (malformed XML, with line info), UnsupportedError
/// (joint type outside the subset) or StructureError (disconnected tree,
/// missing limit, branching revolute paths).
KinematicChain parse_urdf(const std::string& xml_text);
KinematicChain parse_urdf_file(const std::string& path);

/// The bundled UR10 model.
KinematicChain ur10_chain();
const char* ur10_urdf_text();

/// Canonical JSON summary of a chain (names, offsets, axes, limits).
/// chain_from_summary(chain_summary(c)) reproduces c exactly.
nlohmann::ordered_json chain_summary(const KinematicChain& chain);
KinematicChain chain_from_summary(const nlohmann::ordered_json& j);

/// Tool pose in the world frame:
/// base * prod_i(offset_i * Rot(axis_i, q_i)) * tool.
Transformd forward_kinematics(const KinematicChain& chain, const JointConfig& q);

/// World positions of each joint-frame origin followed by the tool point
/// (size links+1). Consecutive entries bound the link segments used for
/// collision checks.
std::vector<Eigen::Vector3d> joint_origins(const KinematicChain& chain,
                                           const JointConfig& q);

bool within_limits(const KinematicChain& chain, const JointConfig& q);

struct IkResult {
  /// Valid solutions in deterministic branch order
  /// (shoulder, then elbow, then wrist; positive branch first),
  /// deduplicated and filtered to joint limits.
  std::vector<JointConfig> solutions;
  /// False only when the target is geometrically outside the workspace.
  bool reachable = true;
  /// True when a wrist-singular branch was hit (free angle fixed at 0).
  bool wrist_singular = false;
};

/// Closed-form inverse kinematics for UR-type 6R chains (axes 2-4 parallel,
/// spherical-free wrist offsets). All geometry is extracted from the chain at
/// construction; nothing is hard-coded to a specific UR model.
class UrAnalyticIk {
 public:
  /// Throws StructureError if the chain is not a UR-type geometry.
  explicit UrAnalyticIk(const KinematicChain& chain);

  /// Target is the tool pose in the world frame. Every returned solution has
  /// FK residual <= 1e-6 m / 1e-6 rad against the target.
  IkResult solve(const Transformd& target) const;

  const KinematicChain& chain() const { return chain_; }

 private:
  KinematicChain chain_;
  // Zero-pose constants in the chain-base frame.
  Eigen::Vector3d axis1_dir_, joint1_origin_, arm_dir0_;
  double lateral_offset_ = 0.0;
  // Per-link local constants.
  Eigen::Vector3d local_axis_[6];
  Eigen::Matrix3d offset_rot_[6];
  Eigen::Vector3d offset_trans_[6];
  // Wrist equation coefficients: a5*cos(q5) + b5*sin(q5) = arm_dir . axis6_dir.
  double a5_ = 0.0, b5_ = 0.0;
  // Planar 2R sub-chain data (frame-2 coordinates, plane perpendicular to axis 2).
  Eigen::Vector3d plane_x_, plane_y_;
  double upper_len_ = 0.0, fore_len_ = 0.0, fore_angle0_ = 0.0;
  double elbow_sign_ = 1.0;
  double axial_const_ = 0.0;
  Eigen::Vector3d q4_ref_;
};

/// Convenience wrapper constructing the solver per call.
IkResult inverse_kinematics(const KinematicChain& chain, const Transformd& target);

}  // namespace twinlink::kinematics
