#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "twinlink/bus.hpp"
#include "twinlink/kinematics.hpp"
#include "twinlink/planner.hpp"
#include "twinlink/scene.hpp"

namespace twinlink::twin {

/// Open-loop follower dynamics: transport delay, per-joint first-order
/// response, per-joint rate limit. tau = 0 with an infinite rate limit and
/// zero delay is the ideal follower.
struct LagParams {
  double tau = 0.0;                                            // s
  double rate_limit = std::numeric_limits<double>::infinity(); // rad/s
  double transport_delay = 0.0;                                // s
};

struct TwinState {
  kinematics::Vec6 q = kinematics::Vec6::Zero();
  kinematics::Vec6 q_target = kinematics::Vec6::Zero();
  double t = 0.0;
};

/// One integration step: q += (1 - e^(-dt/tau)) * wrap(q_target - q), clamped
/// to rate_limit*dt per joint. tau = 0 snaps to the target (then rate-limits).
TwinState lag_step(const TwinState& state, double dt, const LagParams& params);

struct TwinRobotSpec {
  std::string topic_prefix;
  kinematics::KinematicChain chain;
  kinematics::JointConfig home;
  std::vector<int> setpoint_ids;  // capture file naming, in trigger order
};

struct CaptureSettings {
  bool write_images = true;
  scenecam::CameraIntrinsics intrinsics;
  scenecam::DepthConvention depth_convention = scenecam::DepthConvention::planar_z;
  std::string out_dir;
  int cloud_stride = 16;  // pixel subsampling for the fused point cloud
};

struct CaptureRecord {
  int robot = 0;
  int seq = 0;
  int setpoint_id = 0;
  double t = 0.0;
};

struct TwinLog {
  struct RobotLog {
    std::string topic_prefix;
    std::vector<double> t;
    std::vector<Eigen::Vector3d> ee_position;
    std::vector<CaptureRecord> captures;
    std::uint64_t collision_holds = 0;
  };
  std::vector<RobotLog> robots;
  std::uint64_t images_written = 0;
};

/// The render-side twin: follows /joint_states open loop through the lag
/// model, records its end-effector pose (at every tick and at every message
/// effective time), publishes /ue_ee, and renders rgb/seg/depth on capture
/// triggers with the camera at the tool frame.
class Twin {
 public:
  Twin(std::vector<TwinRobotSpec> robots, scenecam::Scene scene,
       CaptureSettings capture, LagParams lag, double tick_rate,
       std::vector<planner::CollisionBox> boxes, double collision_margin,
       bridge::BusEndpoint* bus);

  double next_time() const;
  void step();
  /// Advances every robot through t_end (processing queued events) and stops.
  void run_until(double t_end);

  const TwinLog& log() const { return log_; }
  const std::vector<Eigen::Vector3d>& cloud() const { return cloud_; }

 private:
  struct Event {
    double t_eff = 0.0;
    enum class Kind { target, capture } kind = Kind::target;
    kinematics::Vec6 q = kinematics::Vec6::Zero();
    std::uint64_t seq = 0;  // tie-break: arrival order
  };
  struct Robot {
    TwinRobotSpec spec;
    TwinState state;
    std::multimap<double, Event> pending;  // keyed by effective time
    double last_stamp = 0.0;               // latest joint-state stamp received
    std::uint64_t next_event_seq = 0;
    int captures_done = 0;
  };

  void on_joint_state(std::size_t robot_idx, const bridge::BridgeMessage& msg);
  void on_capture(std::size_t robot_idx, const bridge::BridgeMessage& msg);
  void advance_robot(std::size_t robot_idx, double t_end);
  void apply_lag(Robot& robot, double dt);
  void record(std::size_t robot_idx, double t);
  void do_capture(std::size_t robot_idx, double t);
  void publish_ee(std::size_t robot_idx, double t);

  std::vector<Robot> robots_;
  scenecam::Scene scene_;
  CaptureSettings capture_;
  LagParams lag_;
  double tick_rate_;
  std::vector<planner::CollisionBox> boxes_;
  double collision_margin_;
  bridge::BusEndpoint* bus_;
  TwinLog log_;
  std::vector<Eigen::Vector3d> cloud_;
  std::int64_t tick_ = 0;
  std::mutex inbox_mu_;  // WebSocket mode: handlers run on the reader thread
};

}  // namespace twinlink::twin
