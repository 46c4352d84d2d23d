#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "twinlink/bus.hpp"
#include "twinlink/kinematics.hpp"
#include "twinlink/transform.hpp"

namespace twinlink::planner {

enum class Pattern { spherical, cylindrical };

/// A predetermined camera/tool pose around the plant.
struct Setpoint {
  int id = 0;
  Transformd pose;
  Pattern pattern = Pattern::spherical;
};

/// Camera pose at `eye` with the viewing axis (+Z) aimed exactly at `target`.
/// Roll is fixed by projecting world +Z (world +X near the poles).
Transformd look_at_pose(const Eigen::Vector3d& eye, const Eigen::Vector3d& target);

/// Poses on a sphere: n_rings latitudes evenly spaced over lat_range
/// (midpoint when n_rings == 1), n_per_ring longitudes starting at azimuth 0.
/// Viewing axes point at the center.
std::vector<Setpoint> spherical_setpoints(const Eigen::Vector3d& center, double radius,
                                          int n_rings, int n_per_ring,
                                          const std::array<double, 2>& lat_range,
                                          int first_id = 0);

/// Poses on a vertical cylinder around the world-Z axis through axis_point,
/// one ring per entry of `heights` (absolute Z offsets from axis_point.z()).
/// Viewing axes are horizontal, aimed at the cylinder axis.
std::vector<Setpoint> cylindrical_setpoints(const Eigen::Vector3d& axis_point,
                                            double radius,
                                            const std::vector<double>& heights,
                                            int n_per_ring, int first_id = 0);

enum class TrajKind { joint, linear };

struct TrajectorySample {
  double t = 0.0;  // seconds from trajectory start
  kinematics::JointConfig q;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  TrajKind kind = TrajKind::joint;
};

/// Per-joint cubic with zero boundary velocities:
/// q(s) = q0 + (q1-q0)(3s^2-2s^3). The step count is round(duration/dt) so
/// samples are uniform and the endpoints exact.
Trajectory plan_joint(const kinematics::JointConfig& q0, const kinematics::JointConfig& q1,
                      double duration, double dt);

/// Raw-angle variant; the planner interpolates unwrapped targets with it.
Trajectory plan_joint_raw(const kinematics::Vec6& q0, const kinematics::Vec6& q1,
                          double duration, double dt);

/// Straight-line tool path with slerped orientation, one IK solve per
/// waypoint, branch chosen by weighted joint-space distance to the previous
/// sample. Throws PlanningError (with the waypoint index) if a waypoint is
/// unreachable or the branch jump exceeds max_branch_jump.
Trajectory plan_linear(const kinematics::KinematicChain& chain, const Transformd& pose0,
                       const Transformd& pose1, double speed, double dt,
                       const kinematics::JointConfig& q_seed);
Trajectory plan_linear(const kinematics::UrAnalyticIk& ik, const Transformd& pose0,
                       const Transformd& pose1, double speed, double dt,
                       const kinematics::JointConfig& q_seed);

/// Stand stand-in volumes, axis-aligned.
struct CollisionBox {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d half_extents = Eigen::Vector3d::Ones();
};

/// True iff any arm segment (consecutive joint origins plus the tool segment)
/// intersects any box inflated by `margin`.
bool collides(const kinematics::KinematicChain& chain, const kinematics::JointConfig& q,
              std::span<const CollisionBox> boxes, double margin = 0.05);

/// Segment [a,b] vs axis-aligned box test (shared with the twin's clamp).
bool segment_intersects_box(const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                            const CollisionBox& box, double margin);

inline kinematics::Vec6 default_ik_weights() {
  kinematics::Vec6 w;
  w << 3, 3, 2, 1, 1, 1;
  return w;
}

/// Weighted wrapped joint-space distance used for IK branch continuity.
double weighted_distance(const kinematics::JointConfig& a, const kinematics::JointConfig& b,
                         const kinematics::Vec6& weights);

struct RobotSpec {
  std::string topic_prefix;  // e.g. "/robot1"
  kinematics::KinematicChain chain;
  kinematics::JointConfig home;
  std::vector<Setpoint> setpoints;  // execution order
  double start_offset = 0.0;        // seconds of idle before the first move
};

struct PlannerConfig {
  double publish_rate = 125.0;  // Hz; trajectory dt = publish period
  TrajKind move_kind = TrajKind::joint;
  double move_duration = 2.0;      // s per joint move
  double linear_speed = 0.25;      // m/s for linear moves
  double dwell = 1.5;              // s held at each setpoint
  double arrival_threshold = 1e-4; // m
  double max_branch_jump = 0.2;    // rad
  kinematics::Vec6 ik_weights = default_ik_weights();
  std::vector<CollisionBox> boxes;
  double collision_margin = 0.05;
};

struct Arrival {
  int setpoint_id = 0;
  double t = 0.0;
  Eigen::Vector3d setpoint_position = Eigen::Vector3d::Zero();
};

struct PlannerLog {
  struct RobotLog {
    std::string topic_prefix;
    std::vector<double> t;
    std::vector<Eigen::Vector3d> ee_position;
    std::vector<Arrival> arrivals;
    std::uint64_t published = 0;
    std::uint64_t capture_triggers = 0;
  };
  std::vector<RobotLog> robots;
};

/// The ROS-side twin. All moves are planned (and collision-checked) up front;
/// step() then publishes /joint_states, /tf_ee and /capture triggers on a
/// simulated integer-tick clock shared by every robot.
class Planner {
 public:
  /// Throws PlanningError naming the setpoint on unreachable or colliding
  /// targets and paths.
  Planner(std::vector<RobotSpec> robots, PlannerConfig config,
          bridge::BusEndpoint* bus);

  double next_time() const;
  bool done() const;
  void step();

  /// Simulated end of the schedule (last dwell tick), valid any time.
  double end_time() const;
  const PlannerLog& log() const;
  const PlannerConfig& config() const { return config_; }

 private:
  struct Tape {
    std::vector<kinematics::Vec6> q;           // per tick from t=0
    std::vector<std::pair<std::int64_t, Arrival>> arrivals;
  };

  void build_tape(const RobotSpec& spec, Tape& tape) const;

  std::vector<RobotSpec> robots_;
  PlannerConfig config_;
  bridge::BusEndpoint* bus_;
  std::vector<Tape> tapes_;
  PlannerLog log_;
  std::int64_t tick_ = 0;
  std::int64_t end_tick_ = 0;
};

}  // namespace twinlink::planner
