#include "twinlink/twin.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "twinlink/errors.hpp"
#include "twinlink/image_io.hpp"

namespace twinlink::twin {

using kinematics::JointConfig;
using kinematics::Vec6;

TwinState lag_step(const TwinState& state, double dt, const LagParams& params) {
  TwinState next = state;
  next.t = state.t + dt;
  const double alpha =
      params.tau > 0.0 ? 1.0 - std::exp(-dt / params.tau) : 1.0;
  const bool limited = std::isfinite(params.rate_limit);
  const double max_step = limited ? params.rate_limit * dt
                                  : std::numeric_limits<double>::infinity();
  for (int i = 0; i < 6; ++i) {
    double delta = kinematics::angle_diff(state.q_target[i], state.q[i]);
    double dq = alpha * delta;
    if (limited) dq = std::clamp(dq, -max_step, max_step);
    next.q[i] = state.q[i] + dq;
  }
  return next;
}

Twin::Twin(std::vector<TwinRobotSpec> robots, scenecam::Scene scene,
           CaptureSettings capture, LagParams lag, double tick_rate,
           std::vector<planner::CollisionBox> boxes, double collision_margin,
           bridge::BusEndpoint* bus)
    : scene_(std::move(scene)),
      capture_(std::move(capture)),
      lag_(lag),
      tick_rate_(tick_rate),
      boxes_(std::move(boxes)),
      collision_margin_(collision_margin),
      bus_(bus) {
  robots_.reserve(robots.size());
  log_.robots.resize(robots.size());
  for (std::size_t r = 0; r < robots.size(); ++r) {
    Robot robot;
    robot.spec = std::move(robots[r]);
    robot.state.q = robot.spec.home.angles();
    robot.state.q_target = robot.state.q;
    robot.state.t = 0.0;
    log_.robots[r].topic_prefix = robot.spec.topic_prefix;
    robots_.push_back(std::move(robot));
  }
  if (bus_) {
    for (std::size_t r = 0; r < robots_.size(); ++r) {
      const auto& prefix = robots_[r].spec.topic_prefix;
      bus_->advertise(prefix + "/ue_ee", bridge::kTransformStampedType);
      bus_->subscribe(prefix + "/joint_states", bridge::kJointStateType,
                      [this, r](const bridge::BridgeMessage& m) { on_joint_state(r, m); });
      bus_->subscribe(prefix + "/capture", bridge::kBoolType,
                      [this, r](const bridge::BridgeMessage& m) { on_capture(r, m); });
    }
  }
}

void Twin::on_joint_state(std::size_t robot_idx, const bridge::BridgeMessage& msg) {
  auto js = bridge::JointStateMsg::from_json(msg.payload);
  if (js.position.size() != 6) return;
  Event ev;
  ev.kind = Event::Kind::target;
  for (int i = 0; i < 6; ++i) ev.q[i] = js.position[static_cast<std::size_t>(i)];
  double stamp = js.stamp.to_seconds();
  ev.t_eff = stamp + lag_.transport_delay;
  std::lock_guard lock(inbox_mu_);
  auto& robot = robots_[robot_idx];
  robot.last_stamp = stamp;
  ev.seq = robot.next_event_seq++;
  robot.pending.emplace(ev.t_eff, ev);
}

void Twin::on_capture(std::size_t robot_idx, const bridge::BridgeMessage& msg) {
  auto flag = bridge::BoolMsg::from_json(msg.payload);
  if (!flag.data) return;
  std::lock_guard lock(inbox_mu_);
  auto& robot = robots_[robot_idx];
  Event ev;
  ev.kind = Event::Kind::capture;
  // Bool messages carry no stamp; captures ride on the latest joint-state
  // stamp, which the planner publishes in the same tick before the trigger.
  ev.t_eff = robot.last_stamp + lag_.transport_delay;
  ev.seq = robot.next_event_seq++;
  robot.pending.emplace(ev.t_eff, ev);
}

void Twin::apply_lag(Robot& robot, double dt) {
  TwinState candidate = lag_step(robot.state, dt, lag_);
  if (!boxes_.empty() &&
      planner::collides(robot.spec.chain, JointConfig(candidate.q), boxes_,
                        collision_margin_)) {
    // Environmental collision: hold the previous configuration.
    candidate.q = robot.state.q;
    ++log_.robots[static_cast<std::size_t>(&robot - robots_.data())].collision_holds;
  }
  robot.state = candidate;
}

void Twin::record(std::size_t robot_idx, double t) {
  auto& robot = robots_[robot_idx];
  auto& rlog = log_.robots[robot_idx];
  if (!rlog.t.empty() && t < rlog.t.back()) return;  // already recorded past t
  Transformd ee =
      kinematics::forward_kinematics(robot.spec.chain, JointConfig(robot.state.q));
  if (!rlog.t.empty() && rlog.t.back() == t) {
    rlog.ee_position.back() = ee.translation();
    return;
  }
  rlog.t.push_back(t);
  rlog.ee_position.push_back(ee.translation());
}

void Twin::publish_ee(std::size_t robot_idx, double t) {
  if (!bus_) return;
  auto& robot = robots_[robot_idx];
  Transformd ee =
      kinematics::forward_kinematics(robot.spec.chain, JointConfig(robot.state.q));
  bridge::TransformStampedMsg tf;
  tf.stamp = bridge::TimeStamp::from_seconds(t);
  tf.frame_id = "world";
  tf.child_frame_id = robot.spec.topic_prefix + "/ue_tool0";
  tf.translation = ee.translation();
  tf.rotation = ee.rotation();
  bus_->publish(robot.spec.topic_prefix + "/ue_ee", tf.to_json());
}

void Twin::do_capture(std::size_t robot_idx, double t) {
  auto& robot = robots_[robot_idx];
  auto& rlog = log_.robots[robot_idx];
  int seq = robot.captures_done++;
  int setpoint_id = seq < static_cast<int>(robot.spec.setpoint_ids.size())
                        ? robot.spec.setpoint_ids[static_cast<std::size_t>(seq)]
                        : seq;
  rlog.captures.push_back({static_cast<int>(robot_idx), seq, setpoint_id, t});
  if (!capture_.write_images) return;

  Transformd cam =
      kinematics::forward_kinematics(robot.spec.chain, JointConfig(robot.state.q));
  auto rgb = scenecam::render_rgb(scene_, cam, capture_.intrinsics);
  auto seg = scenecam::render_seg(scene_, cam, capture_.intrinsics);
  auto depth = scenecam::render_depth(scene_, cam, capture_.intrinsics,
                                      capture_.depth_convention);

  namespace fs = std::filesystem;
  fs::path dir = fs::path(capture_.out_dir) /
                 ("robot" + std::to_string(robot_idx + 1));
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create capture directory '" + dir.string() + "'");
  char stem[16];
  std::snprintf(stem, sizeof(stem), "%04d", setpoint_id);
  scenecam::write_ppm(rgb, (dir / (std::string(stem) + "_rgb.ppm")).string());
  scenecam::write_ppm(seg, (dir / (std::string(stem) + "_seg.ppm")).string());
  scenecam::write_pfm(depth, (dir / (std::string(stem) + "_depth.pfm")).string());
  log_.images_written += 3;

  if (capture_.cloud_stride > 0) {
    scenecam::DepthImage sparse{0, 0, {}};
    const int stride = capture_.cloud_stride;
    sparse.width = (depth.width + stride - 1) / stride;
    sparse.height = (depth.height + stride - 1) / stride;
    // Subsample by unprojecting every stride-th pixel directly.
    for (int v = 0; v < depth.height; v += stride) {
      for (int u = 0; u < depth.width; u += stride) {
        float z = depth.at(u, v);
        if (!std::isfinite(z)) continue;
        Eigen::Vector3d p_cam((u - capture_.intrinsics.cx) * z / capture_.intrinsics.fx,
                              (v - capture_.intrinsics.cy) * z / capture_.intrinsics.fy,
                              z);
        cloud_.push_back(cam * p_cam);
      }
    }
  }
}

void Twin::advance_robot(std::size_t robot_idx, double t_end) {
  auto& robot = robots_[robot_idx];
  while (true) {
    Event ev;
    {
      std::lock_guard lock(inbox_mu_);
      auto it = robot.pending.begin();
      if (it == robot.pending.end() || it->first > t_end) break;
      ev = it->second;
      robot.pending.erase(it);
    }
    double dt = ev.t_eff - robot.state.t;
    if (dt > 0) apply_lag(robot, dt);
    robot.state.t = std::max(robot.state.t, ev.t_eff);
    if (ev.kind == Event::Kind::target) {
      robot.state.q_target = ev.q;
      if (lag_.tau == 0.0) apply_lag(robot, 0.0);  // ideal follower snaps
      record(robot_idx, robot.state.t);
    } else {
      do_capture(robot_idx, robot.state.t);
    }
  }
  double dt = t_end - robot.state.t;
  if (dt > 0) {
    apply_lag(robot, dt);
    robot.state.t = t_end;
  }
  record(robot_idx, t_end);
}

double Twin::next_time() const { return static_cast<double>(tick_ + 1) / tick_rate_; }

void Twin::step() {
  double t = next_time();
  for (std::size_t r = 0; r < robots_.size(); ++r) {
    advance_robot(r, t);
    publish_ee(r, t);
  }
  ++tick_;
}

void Twin::run_until(double t_end) {
  while (next_time() <= t_end) step();
  for (std::size_t r = 0; r < robots_.size(); ++r) advance_robot(r, t_end);
}

}  // namespace twinlink::twin
