#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "twinlink/kinematics.hpp"
#include "twinlink/metrics.hpp"
#include "twinlink/planner.hpp"
#include "twinlink/scene.hpp"
#include "twinlink/twin.hpp"

namespace twinlink::experiment {

struct RobotConfig {
  std::string urdf_path;  // empty = bundled UR10 model
  std::string topic_prefix = "/robot1";
  Eigen::Vector3d base_xyz = Eigen::Vector3d::Zero();
  Eigen::Vector3d base_rpy = Eigen::Vector3d::Zero();
  kinematics::Vec6 home = kinematics::Vec6::Zero();
  double start_offset = 0.0;  // s of idle before the first move
};

struct SetpointConfig {
  Eigen::Vector3d center = Eigen::Vector3d(0, 0, 1.05);  // plant center
  double sphere_radius = 0.35;
  int sphere_rings = 3;
  int sphere_per_ring = 20;
  std::array<double, 2> lat_range = {-0.25, 0.65};  // radians
  double cylinder_radius = 0.50;
  std::vector<double> cylinder_heights = {-0.20, 0.0, 0.20};  // vs center z
  int cylinder_per_ring = 20;
};

struct TrajectoryConfig {
  double publish_rate = 125.0;  // Hz, integer
  std::string move_kind = "joint";  // "joint" | "linear"
  double move_duration = 2.0;
  double linear_speed = 0.25;
  double dwell = 1.5;
  double arrival_threshold = 1e-4;
};

struct LagConfig {
  // Fitted stand-in for the untuned follower dynamics; see README. The
  // shape: sub-millimeter settled error at the setpoints, fast decay inside
  // the 1 s window, and same-time transients two orders larger mid-move.
  double tau = 0.02;
  double rate_limit = 3.0;
  double transport_delay = 0.04;
  double tick_rate = 240.0;
};

struct ExperimentConfig {
  int schema = 1;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  std::string transport = "loopback";  // "loopback" or "ws://host:port"
  std::vector<RobotConfig> robots;
  SetpointConfig setpoints;
  TrajectoryConfig trajectory;
  LagConfig lag;
  scenecam::SceneParams scene;
  scenecam::CameraIntrinsics camera;
  std::string depth_convention = "planar_z";  // or "ray_length"
  std::vector<planner::CollisionBox> collision_boxes;
  double collision_margin = 0.05;
  int cloud_stride = 16;
  double realtime_factor = 1.0;  // WebSocket-mode pacing (sim seconds per wall second)
  bool write_images = true;
};

/// Desk-scale two-UR10 experiment: 120 setpoints, 1080p captures.
ExperimentConfig default_config();

/// CI profile: 24 setpoints, 160x90 captures.
void apply_fast_mode(ExperimentConfig& config);

/// Strict schema check plus defaults for omitted fields. Relative URDF paths
/// resolve against the config file's directory.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig config_from_json(const nlohmann::ordered_json& j,
                                  const std::string& base_dir = "");
nlohmann::ordered_json config_to_json(const ExperimentConfig& config);

/// Everything derived from the config before execution.
struct Prepared {
  std::vector<planner::RobotSpec> planner_robots;
  std::vector<twin::TwinRobotSpec> twin_robots;
  planner::PlannerConfig planner_config;
  twin::LagParams lag;
  twin::CaptureSettings capture;
  scenecam::Scene scene;
  std::vector<planner::Setpoint> all_setpoints;  // generation order
};

/// Builds chains, the scene and the per-robot setpoint assignment
/// (azimuth split between the two stands). Throws on invalid config.
Prepared prepare(const ExperimentConfig& config);

struct RunResult {
  planner::PlannerLog planner_log;
  twin::TwinLog twin_log;
  metrics::ErrorReport report;
  std::size_t setpoint_count = 0;
  std::size_t capture_triggers = 0;
  std::uint64_t images_written = 0;
  std::size_t cloud_points = 0;
  double sim_end_time = 0.0;
  std::string out_dir;
};

/// Full pipeline: plan, execute over the configured transport, write
/// planner_trace.csv / twin_trace.csv / arrivals.csv / images / cloud.ply,
/// then rebuild report.json and errors.csv from the CSVs on disk (the same
/// path `analyze` takes).
RunResult run_experiment(const ExperimentConfig& config);

/// Recomputes report.json and errors.csv from the trace CSVs in out_dir.
metrics::ErrorReport analyze_outputs(const std::string& out_dir, double window = 1.0);

/// One-line-per-criterion summary table of a finished run.
std::string summary_table(const RunResult& result);

}  // namespace twinlink::experiment
