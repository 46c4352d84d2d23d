#include "twinlink/planner.hpp"

#include <algorithm>
#include <cmath>

#include "twinlink/errors.hpp"

namespace twinlink::planner {

using kinematics::JointConfig;
using kinematics::KinematicChain;
using kinematics::UrAnalyticIk;
using kinematics::Vec6;

Transformd look_at_pose(const Eigen::Vector3d& eye, const Eigen::Vector3d& target) {
  Eigen::Vector3d forward = (target - eye).normalized();
  Eigen::Vector3d up_ref = Eigen::Vector3d::UnitZ();
  Eigen::Vector3d up_proj = up_ref - up_ref.dot(forward) * forward;
  if (up_proj.norm() < 1e-9) {  // looking straight up/down: fall back to world +X
    up_ref = Eigen::Vector3d::UnitX();
    up_proj = up_ref - up_ref.dot(forward) * forward;
  }
  // Camera convention: +Z forward, +Y down (image rows), +X right.
  Eigen::Vector3d y_cam = -up_proj.normalized();
  Eigen::Vector3d x_cam = y_cam.cross(forward);
  Eigen::Matrix3d rot;
  rot.col(0) = x_cam;
  rot.col(1) = y_cam;
  rot.col(2) = forward;
  return Transformd(Eigen::Quaterniond(rot), eye);
}

std::vector<Setpoint> spherical_setpoints(const Eigen::Vector3d& center, double radius,
                                          int n_rings, int n_per_ring,
                                          const std::array<double, 2>& lat_range,
                                          int first_id) {
  if (radius <= 0 || n_rings < 1 || n_per_ring < 1) {
    throw StructureError("spherical setpoints: radius and counts must be positive");
  }
  std::vector<Setpoint> out;
  out.reserve(static_cast<std::size_t>(n_rings) * n_per_ring);
  int id = first_id;
  for (int ring = 0; ring < n_rings; ++ring) {
    double lat = n_rings == 1
                     ? 0.5 * (lat_range[0] + lat_range[1])
                     : lat_range[0] + ring * (lat_range[1] - lat_range[0]) / (n_rings - 1);
    for (int k = 0; k < n_per_ring; ++k) {
      double az = 2.0 * M_PI * k / n_per_ring;
      Eigen::Vector3d offset(radius * std::cos(lat) * std::cos(az),
                             radius * std::cos(lat) * std::sin(az),
                             radius * std::sin(lat));
      out.push_back({id++, look_at_pose(center + offset, center), Pattern::spherical});
    }
  }
  return out;
}

std::vector<Setpoint> cylindrical_setpoints(const Eigen::Vector3d& axis_point,
                                            double radius,
                                            const std::vector<double>& heights,
                                            int n_per_ring, int first_id) {
  if (radius <= 0 || n_per_ring < 1) {
    throw StructureError("cylindrical setpoints: radius and counts must be positive");
  }
  std::vector<Setpoint> out;
  out.reserve(heights.size() * static_cast<std::size_t>(n_per_ring));
  int id = first_id;
  for (double h : heights) {
    double z = axis_point.z() + h;
    for (int k = 0; k < n_per_ring; ++k) {
      double az = 2.0 * M_PI * k / n_per_ring;
      Eigen::Vector3d eye(axis_point.x() + radius * std::cos(az),
                          axis_point.y() + radius * std::sin(az), z);
      Eigen::Vector3d target(axis_point.x(), axis_point.y(), z);
      out.push_back({id++, look_at_pose(eye, target), Pattern::cylindrical});
    }
  }
  return out;
}

namespace {

double smoothstep(double s) { return s * s * (3.0 - 2.0 * s); }

}  // namespace

Trajectory plan_joint_raw(const Vec6& q0, const Vec6& q1, double duration, double dt) {
  if (!(duration > 0) || !(dt > 0) || dt > duration) {
    throw StructureError("plan_joint requires 0 < dt <= duration");
  }
  auto steps = static_cast<std::int64_t>(std::llround(duration / dt));
  steps = std::max<std::int64_t>(1, steps);
  Trajectory traj;
  traj.kind = TrajKind::joint;
  traj.samples.reserve(static_cast<std::size_t>(steps) + 1);
  for (std::int64_t i = 0; i <= steps; ++i) {
    double s = static_cast<double>(i) / static_cast<double>(steps);
    Vec6 q = q0 + (q1 - q0) * smoothstep(s);
    if (i == steps) q = q1;  // exact endpoint
    traj.samples.push_back({s * duration, JointConfig(q)});
  }
  return traj;
}

Trajectory plan_joint(const JointConfig& q0, const JointConfig& q1, double duration,
                      double dt) {
  return plan_joint_raw(q0.angles(), q1.angles(), duration, dt);
}

double weighted_distance(const JointConfig& a, const JointConfig& b,
                         const Vec6& weights) {
  return (a.wrapped_delta_from(b).cwiseAbs().cwiseProduct(weights)).sum();
}

namespace {

// Nearest IK solution by weighted wrapped distance; -1 when none.
int nearest_solution(const std::vector<JointConfig>& solutions, const JointConfig& ref,
                     const Vec6& weights) {
  int best = -1;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < solutions.size(); ++i) {
    double d = weighted_distance(solutions[i], ref, weights);
    if (d < best_dist) {
      best_dist = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

}  // namespace

Trajectory plan_linear(const UrAnalyticIk& ik, const Transformd& pose0,
                       const Transformd& pose1, double speed, double dt,
                       const JointConfig& q_seed) {
  if (!(speed > 0) || !(dt > 0)) {
    throw StructureError("plan_linear requires positive speed and dt");
  }
  const Vec6 weights = default_ik_weights();
  const double dist = pose0.translationDistanceTo(pose1);
  const double angle = pose0.rotationAngleTo(pose1);

  Trajectory traj;
  traj.kind = TrajKind::linear;
  if (dist < 1e-12 && angle < 1e-12) {
    auto res = ik.solve(pose0);
    int pick = nearest_solution(res.solutions, q_seed, weights);
    if (pick < 0) throw PlanningError("linear path start pose unreachable", 0);
    traj.samples.push_back({0.0, res.solutions[static_cast<std::size_t>(pick)]});
    return traj;
  }

  auto steps = static_cast<std::int64_t>(std::ceil(dist / (speed * dt)));
  steps = std::max<std::int64_t>(1, steps);
  JointConfig prev = q_seed;
  const Eigen::Quaterniond rot0 = pose0.rotation();
  const Eigen::Quaterniond rot1 = pose1.rotation();
  for (std::int64_t i = 0; i <= steps; ++i) {
    double s = static_cast<double>(i) / static_cast<double>(steps);
    Transformd pose(rot0.slerp(s, rot1),
                    pose0.translation() + s * (pose1.translation() - pose0.translation()));
    auto res = ik.solve(pose);
    int pick = nearest_solution(res.solutions, prev, weights);
    if (pick < 0) {
      throw PlanningError("linear path waypoint " + std::to_string(i) +
                              " is unreachable",
                          static_cast<int>(i));
    }
    const JointConfig& q = res.solutions[static_cast<std::size_t>(pick)];
    if (i > 0 && q.max_wrapped_delta(prev) > 0.2) {
      throw PlanningError("IK branch jump of " + std::to_string(q.max_wrapped_delta(prev)) +
                              " rad at linear waypoint " + std::to_string(i),
                          static_cast<int>(i));
    }
    traj.samples.push_back({static_cast<double>(i) * dt, q});
    prev = q;
  }
  return traj;
}

Trajectory plan_linear(const KinematicChain& chain, const Transformd& pose0,
                       const Transformd& pose1, double speed, double dt,
                       const JointConfig& q_seed) {
  return plan_linear(UrAnalyticIk(chain), pose0, pose1, speed, dt, q_seed);
}

bool segment_intersects_box(const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                            const CollisionBox& box, double margin) {
  Eigen::Vector3d d = b - a;
  double tmin = 0.0, tmax = 1.0;
  for (int axis = 0; axis < 3; ++axis) {
    double lo = box.center[axis] - box.half_extents[axis] - margin;
    double hi = box.center[axis] + box.half_extents[axis] + margin;
    if (std::abs(d[axis]) < 1e-15) {
      if (a[axis] < lo || a[axis] > hi) return false;
      continue;
    }
    double t0 = (lo - a[axis]) / d[axis];
    double t1 = (hi - a[axis]) / d[axis];
    if (t0 > t1) std::swap(t0, t1);
    tmin = std::max(tmin, t0);
    tmax = std::min(tmax, t1);
    if (tmin > tmax) return false;
  }
  return true;
}

bool collides(const KinematicChain& chain, const JointConfig& q,
              std::span<const CollisionBox> boxes, double margin) {
  auto origins = kinematics::joint_origins(chain, q);
  for (std::size_t i = 0; i + 1 < origins.size(); ++i) {
    for (const auto& box : boxes) {
      if (segment_intersects_box(origins[i], origins[i + 1], box, margin)) return true;
    }
  }
  return false;
}

Planner::Planner(std::vector<RobotSpec> robots, PlannerConfig config,
                 bridge::BusEndpoint* bus)
    : robots_(std::move(robots)), config_(std::move(config)), bus_(bus) {
  tapes_.resize(robots_.size());
  log_.robots.resize(robots_.size());
  end_tick_ = 0;
  for (std::size_t r = 0; r < robots_.size(); ++r) {
    build_tape(robots_[r], tapes_[r]);
    log_.robots[r].topic_prefix = robots_[r].topic_prefix;
    end_tick_ = std::max(end_tick_,
                         static_cast<std::int64_t>(tapes_[r].q.size()) - 1);
    if (bus_) {
      bus_->advertise(robots_[r].topic_prefix + "/joint_states",
                      bridge::kJointStateType);
      bus_->advertise(robots_[r].topic_prefix + "/capture", bridge::kBoolType);
      bus_->advertise(robots_[r].topic_prefix + "/tf_ee",
                      bridge::kTransformStampedType);
    }
  }
}

void Planner::build_tape(const RobotSpec& spec, Tape& tape) const {
  const double rate = config_.publish_rate;
  const double dt = 1.0 / rate;
  UrAnalyticIk ik(spec.chain);
  std::span<const CollisionBox> boxes(config_.boxes);

  if (collides(spec.chain, spec.home, boxes, config_.collision_margin)) {
    throw PlanningError("home configuration collides with the stand boxes for " +
                        spec.topic_prefix);
  }

  Vec6 current = spec.home.angles();
  auto start_ticks = static_cast<std::int64_t>(std::llround(spec.start_offset * rate));
  tape.q.assign(static_cast<std::size_t>(std::max<std::int64_t>(start_ticks, 0)) + 1,
                current);

  auto dwell_ticks = static_cast<std::int64_t>(std::llround(config_.dwell * rate));
  for (const auto& sp : spec.setpoints) {
    auto res = ik.solve(sp.pose);
    if (!res.reachable || res.solutions.empty()) {
      throw PlanningError("setpoint " + std::to_string(sp.id) + " on " +
                          spec.topic_prefix + " is unreachable");
    }
    // Prefer the nearest collision-free solution.
    std::vector<JointConfig> free;
    for (const auto& s : res.solutions) {
      if (!collides(spec.chain, s, boxes, config_.collision_margin)) free.push_back(s);
    }
    if (free.empty()) {
      throw PlanningError("all IK solutions for setpoint " + std::to_string(sp.id) +
                          " on " + spec.topic_prefix + " collide with the stand boxes");
    }
    JointConfig cur_cfg{current};
    int pick = nearest_solution(free, cur_cfg, config_.ik_weights);
    const JointConfig& target = free[static_cast<std::size_t>(pick)];

    Trajectory traj;
    if (config_.move_kind == TrajKind::joint) {
      // Interpolate on unwrapped angles toward the wrapped-nearest branch.
      Vec6 target_raw = current + target.wrapped_delta_from(cur_cfg);
      traj = plan_joint_raw(current, target_raw, config_.move_duration, dt);
    } else {
      Transformd start_pose = kinematics::forward_kinematics(spec.chain, cur_cfg);
      traj = plan_linear(ik, start_pose, sp.pose, config_.linear_speed, dt, cur_cfg);
    }
    for (std::size_t i = 1; i < traj.samples.size(); ++i) {
      const JointConfig& q = traj.samples[i].q;
      if (collides(spec.chain, q, boxes, config_.collision_margin)) {
        throw PlanningError("path to setpoint " + std::to_string(sp.id) + " on " +
                                spec.topic_prefix + " collides at sample " +
                                std::to_string(i),
                            static_cast<int>(i));
      }
      tape.q.push_back(q.angles());
    }
    current = tape.q.back();

    Transformd arrived = kinematics::forward_kinematics(spec.chain, JointConfig(current));
    double miss = (arrived.translation() - sp.pose.translation()).norm();
    if (miss > config_.arrival_threshold) {
      throw PlanningError("setpoint " + std::to_string(sp.id) + " on " +
                          spec.topic_prefix + " missed by " + std::to_string(miss) + " m");
    }
    auto arrival_tick = static_cast<std::int64_t>(tape.q.size()) - 1;
    tape.arrivals.push_back(
        {arrival_tick, {sp.id, arrival_tick / rate, sp.pose.translation()}});
    for (std::int64_t i = 0; i < dwell_ticks; ++i) tape.q.push_back(current);
  }
}

double Planner::next_time() const {
  return static_cast<double>(tick_) / config_.publish_rate;
}

bool Planner::done() const { return tick_ > end_tick_; }

double Planner::end_time() const {
  return static_cast<double>(end_tick_) / config_.publish_rate;
}

const PlannerLog& Planner::log() const { return log_; }

void Planner::step() {
  const double rate = config_.publish_rate;
  const double t = static_cast<double>(tick_) / rate;
  const auto stamp = bridge::TimeStamp::from_ticks(tick_, static_cast<std::int64_t>(rate));

  for (std::size_t r = 0; r < robots_.size(); ++r) {
    const auto& spec = robots_[r];
    const auto& tape = tapes_[r];
    auto idx = std::min<std::int64_t>(tick_, static_cast<std::int64_t>(tape.q.size()) - 1);
    JointConfig q{tape.q[static_cast<std::size_t>(idx)]};

    auto& rlog = log_.robots[r];
    Transformd ee = kinematics::forward_kinematics(spec.chain, q);
    rlog.t.push_back(t);
    rlog.ee_position.push_back(ee.translation());

    if (bus_) {
      bridge::JointStateMsg js;
      js.stamp = stamp;
      for (const auto& link : spec.chain.links) js.name.push_back(link.name);
      for (int i = 0; i < 6; ++i) js.position.push_back(q[i]);
      bus_->publish(spec.topic_prefix + "/joint_states", js.to_json());
      ++rlog.published;

      bridge::TransformStampedMsg tf;
      tf.stamp = stamp;
      tf.frame_id = "world";
      tf.child_frame_id = spec.topic_prefix + "/tool0";
      tf.translation = ee.translation();
      tf.rotation = ee.rotation();
      bus_->publish(spec.topic_prefix + "/tf_ee", tf.to_json());
    }

    for (const auto& [arrival_tick, arrival] : tape.arrivals) {
      if (arrival_tick != tick_) continue;
      rlog.arrivals.push_back(arrival);
      ++rlog.capture_triggers;
      if (bus_) {
        bridge::BoolMsg trigger{true};
        bus_->publish(spec.topic_prefix + "/capture", trigger.to_json());
      }
    }
  }
  ++tick_;
}

}  // namespace twinlink::planner
