#include "twinlink/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "twinlink/bus.hpp"
#include "twinlink/errors.hpp"
#include "twinlink/image_io.hpp"
#include "twinlink/ws.hpp"

namespace twinlink::experiment {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

ExperimentConfig default_config() {
  ExperimentConfig cfg;
  RobotConfig r1;
  r1.topic_prefix = "/robot1";
  r1.base_xyz = Eigen::Vector3d(0.90, 0.0, 0.70);
  r1.base_rpy = Eigen::Vector3d(0.0, 0.0, M_PI);
  r1.home << 0.0, -2.0, 1.8, 0.2, 1.1, 0.0;
  r1.start_offset = 0.0;
  RobotConfig r2 = r1;
  r2.topic_prefix = "/robot2";
  r2.base_xyz = Eigen::Vector3d(-0.90, 0.0, 0.70);
  r2.base_rpy = Eigen::Vector3d(0.0, 0.0, 0.0);
  r2.start_offset = 0.75;
  cfg.robots = {r1, r2};

  // Three boxes mirror the scene's stand collisions: table plus two stands.
  cfg.collision_boxes = {
      {{0.0, 0.0, cfg.scene.table_height / 2},
       {cfg.scene.table_half_x, cfg.scene.table_half_y, cfg.scene.table_height / 2}},
      {{cfg.scene.stand_x, 0.0, cfg.scene.stand_height / 2},
       {cfg.scene.stand_half, cfg.scene.stand_half, cfg.scene.stand_height / 2}},
      {{-cfg.scene.stand_x, 0.0, cfg.scene.stand_height / 2},
       {cfg.scene.stand_half, cfg.scene.stand_half, cfg.scene.stand_height / 2}},
  };
  return cfg;
}

void apply_fast_mode(ExperimentConfig& cfg) {
  cfg.setpoints.sphere_rings = 1;
  cfg.setpoints.sphere_per_ring = 12;
  cfg.setpoints.cylinder_heights = {0.0};
  cfg.setpoints.cylinder_per_ring = 12;
  cfg.camera.width = 160;
  cfg.camera.height = 90;
  cfg.camera.fx = cfg.camera.fy = 1380.0 * 160.0 / 1920.0;
  cfg.camera.cx = 80.0;
  cfg.camera.cy = 45.0;
  cfg.cloud_stride = 2;
}

// ---------------------------------------------------------------------------
// Config JSON
// ---------------------------------------------------------------------------

namespace {

Eigen::Vector3d vec3_from(const ordered_json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

ordered_json vec3_to(const Eigen::Vector3d& v) {
  return ordered_json::array({v.x(), v.y(), v.z()});
}

template <typename T>
void maybe(const ordered_json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void maybe_vec3(const ordered_json& j, const char* key, Eigen::Vector3d& out) {
  if (j.contains(key)) out = vec3_from(j.at(key));
}

}  // namespace

ordered_json config_to_json(const ExperimentConfig& cfg) {
  ordered_json j;
  j["schema"] = cfg.schema;
  j["seed"] = cfg.seed;
  j["out_dir"] = cfg.out_dir;
  j["transport"] = cfg.transport;
  ordered_json robots = ordered_json::array();
  for (const auto& r : cfg.robots) {
    ordered_json rj;
    rj["urdf_path"] = r.urdf_path;
    rj["topic_prefix"] = r.topic_prefix;
    rj["base_xyz"] = vec3_to(r.base_xyz);
    rj["base_rpy"] = vec3_to(r.base_rpy);
    rj["home"] = std::vector<double>(r.home.data(), r.home.data() + 6);
    rj["start_offset_s"] = r.start_offset;
    robots.push_back(rj);
  }
  j["robots"] = robots;
  ordered_json sp;
  sp["center"] = vec3_to(cfg.setpoints.center);
  sp["sphere_radius"] = cfg.setpoints.sphere_radius;
  sp["sphere_rings"] = cfg.setpoints.sphere_rings;
  sp["sphere_per_ring"] = cfg.setpoints.sphere_per_ring;
  sp["lat_range"] = cfg.setpoints.lat_range;
  sp["cylinder_radius"] = cfg.setpoints.cylinder_radius;
  sp["cylinder_heights"] = cfg.setpoints.cylinder_heights;
  sp["cylinder_per_ring"] = cfg.setpoints.cylinder_per_ring;
  j["setpoints"] = sp;
  ordered_json tr;
  tr["publish_rate_hz"] = cfg.trajectory.publish_rate;
  tr["move_kind"] = cfg.trajectory.move_kind;
  tr["move_duration_s"] = cfg.trajectory.move_duration;
  tr["linear_speed_mps"] = cfg.trajectory.linear_speed;
  tr["dwell_s"] = cfg.trajectory.dwell;
  tr["arrival_threshold_m"] = cfg.trajectory.arrival_threshold;
  j["trajectory"] = tr;
  ordered_json lag;
  lag["tau_s"] = cfg.lag.tau;
  lag["rate_limit_rad_s"] = cfg.lag.rate_limit;
  lag["transport_delay_s"] = cfg.lag.transport_delay;
  lag["tick_rate_hz"] = cfg.lag.tick_rate;
  j["lag"] = lag;
  ordered_json sc;
  sc["table_half_x"] = cfg.scene.table_half_x;
  sc["table_half_y"] = cfg.scene.table_half_y;
  sc["table_height"] = cfg.scene.table_height;
  sc["pot_radius"] = cfg.scene.pot_radius;
  sc["pot_height"] = cfg.scene.pot_height;
  sc["stand_x"] = cfg.scene.stand_x;
  sc["stand_half"] = cfg.scene.stand_half;
  sc["stand_height"] = cfg.scene.stand_height;
  sc["plant_spheres"] = cfg.scene.plant_spheres;
  sc["plant_center_z"] = cfg.scene.plant_center_z;
  sc["plant_spread"] = cfg.scene.plant_spread;
  sc["light_intensity"] = cfg.scene.light_intensity;
  j["scene"] = sc;
  ordered_json cam;
  cam["width"] = cfg.camera.width;
  cam["height"] = cfg.camera.height;
  cam["fx"] = cfg.camera.fx;
  cam["fy"] = cfg.camera.fy;
  cam["cx"] = cfg.camera.cx;
  cam["cy"] = cfg.camera.cy;
  j["camera"] = cam;
  j["depth_convention"] = cfg.depth_convention;
  ordered_json boxes = ordered_json::array();
  for (const auto& b : cfg.collision_boxes) {
    ordered_json bj;
    bj["center"] = vec3_to(b.center);
    bj["half_extents"] = vec3_to(b.half_extents);
    boxes.push_back(bj);
  }
  j["collision_boxes"] = boxes;
  j["collision_margin"] = cfg.collision_margin;
  j["cloud_stride"] = cfg.cloud_stride;
  j["realtime_factor"] = cfg.realtime_factor;
  j["write_images"] = cfg.write_images;
  return j;
}

ExperimentConfig config_from_json(const ordered_json& j, const std::string& base_dir) {
  ExperimentConfig cfg = default_config();
  try {
    if (!j.is_object()) throw StructureError("config root must be a JSON object");
    int schema = j.value("schema", 1);
    if (schema != 1) {
      throw StructureError("unsupported config schema " + std::to_string(schema));
    }
    maybe(j, "seed", cfg.seed);
    maybe(j, "out_dir", cfg.out_dir);
    maybe(j, "transport", cfg.transport);
    if (j.contains("robots")) {
      cfg.robots.clear();
      for (const auto& rj : j.at("robots")) {
        RobotConfig r;
        maybe(rj, "urdf_path", r.urdf_path);
        maybe(rj, "topic_prefix", r.topic_prefix);
        maybe_vec3(rj, "base_xyz", r.base_xyz);
        maybe_vec3(rj, "base_rpy", r.base_rpy);
        if (rj.contains("home")) {
          auto h = rj.at("home").get<std::vector<double>>();
          if (h.size() != 6) throw StructureError("robot home must have 6 angles");
          for (int i = 0; i < 6; ++i) r.home[i] = h[static_cast<std::size_t>(i)];
        }
        maybe(rj, "start_offset_s", r.start_offset);
        if (!r.urdf_path.empty() && !base_dir.empty() &&
            !fs::path(r.urdf_path).is_absolute()) {
          r.urdf_path = (fs::path(base_dir) / r.urdf_path).string();
        }
        cfg.robots.push_back(r);
      }
    }
    if (j.contains("setpoints")) {
      const auto& sp = j.at("setpoints");
      maybe_vec3(sp, "center", cfg.setpoints.center);
      maybe(sp, "sphere_radius", cfg.setpoints.sphere_radius);
      maybe(sp, "sphere_rings", cfg.setpoints.sphere_rings);
      maybe(sp, "sphere_per_ring", cfg.setpoints.sphere_per_ring);
      maybe(sp, "lat_range", cfg.setpoints.lat_range);
      maybe(sp, "cylinder_radius", cfg.setpoints.cylinder_radius);
      maybe(sp, "cylinder_heights", cfg.setpoints.cylinder_heights);
      maybe(sp, "cylinder_per_ring", cfg.setpoints.cylinder_per_ring);
    }
    if (j.contains("trajectory")) {
      const auto& tr = j.at("trajectory");
      maybe(tr, "publish_rate_hz", cfg.trajectory.publish_rate);
      maybe(tr, "move_kind", cfg.trajectory.move_kind);
      maybe(tr, "move_duration_s", cfg.trajectory.move_duration);
      maybe(tr, "linear_speed_mps", cfg.trajectory.linear_speed);
      maybe(tr, "dwell_s", cfg.trajectory.dwell);
      maybe(tr, "arrival_threshold_m", cfg.trajectory.arrival_threshold);
    }
    if (j.contains("lag")) {
      const auto& lag = j.at("lag");
      maybe(lag, "tau_s", cfg.lag.tau);
      if (lag.contains("rate_limit_rad_s")) {
        const auto& rl = lag.at("rate_limit_rad_s");
        cfg.lag.rate_limit = rl.is_null()
                                 ? std::numeric_limits<double>::infinity()
                                 : rl.get<double>();
      }
      maybe(lag, "transport_delay_s", cfg.lag.transport_delay);
      maybe(lag, "tick_rate_hz", cfg.lag.tick_rate);
    }
    if (j.contains("scene")) {
      const auto& sc = j.at("scene");
      maybe(sc, "table_half_x", cfg.scene.table_half_x);
      maybe(sc, "table_half_y", cfg.scene.table_half_y);
      maybe(sc, "table_height", cfg.scene.table_height);
      maybe(sc, "pot_radius", cfg.scene.pot_radius);
      maybe(sc, "pot_height", cfg.scene.pot_height);
      maybe(sc, "stand_x", cfg.scene.stand_x);
      maybe(sc, "stand_half", cfg.scene.stand_half);
      maybe(sc, "stand_height", cfg.scene.stand_height);
      maybe(sc, "plant_spheres", cfg.scene.plant_spheres);
      maybe(sc, "plant_center_z", cfg.scene.plant_center_z);
      maybe(sc, "plant_spread", cfg.scene.plant_spread);
      maybe(sc, "light_intensity", cfg.scene.light_intensity);
    }
    if (j.contains("camera")) {
      const auto& cam = j.at("camera");
      maybe(cam, "width", cfg.camera.width);
      maybe(cam, "height", cfg.camera.height);
      maybe(cam, "fx", cfg.camera.fx);
      maybe(cam, "fy", cfg.camera.fy);
      maybe(cam, "cx", cfg.camera.cx);
      maybe(cam, "cy", cfg.camera.cy);
    }
    maybe(j, "depth_convention", cfg.depth_convention);
    if (j.contains("collision_boxes")) {
      cfg.collision_boxes.clear();
      for (const auto& bj : j.at("collision_boxes")) {
        planner::CollisionBox b;
        maybe_vec3(bj, "center", b.center);
        maybe_vec3(bj, "half_extents", b.half_extents);
        if ((b.half_extents.array() <= 0).any()) {
          throw StructureError("collision box half extents must be positive");
        }
        cfg.collision_boxes.push_back(b);
      }
    }
    maybe(j, "collision_margin", cfg.collision_margin);
    maybe(j, "cloud_stride", cfg.cloud_stride);
    maybe(j, "realtime_factor", cfg.realtime_factor);
    maybe(j, "write_images", cfg.write_images);
  } catch (const nlohmann::json::exception& e) {
    throw StructureError(std::string("config: ") + e.what());
  }

  if (cfg.robots.empty()) throw StructureError("config declares no robots");
  double rate = cfg.trajectory.publish_rate;
  if (!(rate > 0) || rate != std::floor(rate)) {
    throw StructureError("publish_rate_hz must be a positive integer");
  }
  if (!(cfg.lag.tick_rate > 0)) throw StructureError("lag tick_rate_hz must be positive");
  if (cfg.depth_convention != "planar_z" && cfg.depth_convention != "ray_length") {
    throw StructureError("depth_convention must be planar_z or ray_length");
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config '" + path + "'");
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("config '" + path + "': " + e.what());
  }
  return config_from_json(j, fs::path(path).parent_path().string());
}

// ---------------------------------------------------------------------------
// Preparation
// ---------------------------------------------------------------------------

Prepared prepare(const ExperimentConfig& cfg) {
  Prepared prep;
  prep.scene = scenecam::default_scene(cfg.scene);

  // Generate the full setpoint set, then split it between the stands:
  // positive-x points go to the +x robot, ties broken by the sign of y.
  auto spherical = planner::spherical_setpoints(
      cfg.setpoints.center, cfg.setpoints.sphere_radius, cfg.setpoints.sphere_rings,
      cfg.setpoints.sphere_per_ring, cfg.setpoints.lat_range, 0);
  auto cylindrical = planner::cylindrical_setpoints(
      cfg.setpoints.center, cfg.setpoints.cylinder_radius,
      cfg.setpoints.cylinder_heights, cfg.setpoints.cylinder_per_ring,
      static_cast<int>(spherical.size()));
  prep.all_setpoints = spherical;
  prep.all_setpoints.insert(prep.all_setpoints.end(), cylindrical.begin(),
                            cylindrical.end());

  const std::size_t n_robots = cfg.robots.size();
  std::vector<std::vector<planner::Setpoint>> assigned(n_robots);
  for (const auto& sp : prep.all_setpoints) {
    std::size_t robot = 0;
    if (n_robots > 1) {
      double x = sp.pose.translation().x() - cfg.setpoints.center.x();
      double y = sp.pose.translation().y() - cfg.setpoints.center.y();
      bool plus_x = x > 1e-12 || (std::abs(x) <= 1e-12 && y > 0);
      // Robot order in the config decides which prefix owns the +x side.
      robot = plus_x ? 0 : 1;
    }
    assigned[robot].push_back(sp);
  }

  for (std::size_t r = 0; r < n_robots; ++r) {
    const auto& rc = cfg.robots[r];
    kinematics::KinematicChain chain = rc.urdf_path.empty()
                                           ? kinematics::ur10_chain()
                                           : kinematics::parse_urdf_file(rc.urdf_path);
    chain.base_transform = Transformd::fromOriginRpy(rc.base_xyz, rc.base_rpy);

    planner::RobotSpec spec;
    spec.topic_prefix = rc.topic_prefix;
    spec.chain = chain;
    spec.home = kinematics::JointConfig(rc.home);
    spec.setpoints = assigned[std::min(r, assigned.size() - 1)];
    spec.start_offset = rc.start_offset;
    prep.planner_robots.push_back(spec);

    twin::TwinRobotSpec tw;
    tw.topic_prefix = rc.topic_prefix;
    tw.chain = chain;
    tw.home = spec.home;
    for (const auto& sp : spec.setpoints) tw.setpoint_ids.push_back(sp.id);
    prep.twin_robots.push_back(tw);
  }

  prep.planner_config.publish_rate = cfg.trajectory.publish_rate;
  prep.planner_config.move_kind = cfg.trajectory.move_kind == "linear"
                                      ? planner::TrajKind::linear
                                      : planner::TrajKind::joint;
  prep.planner_config.move_duration = cfg.trajectory.move_duration;
  prep.planner_config.linear_speed = cfg.trajectory.linear_speed;
  prep.planner_config.dwell = cfg.trajectory.dwell;
  prep.planner_config.arrival_threshold = cfg.trajectory.arrival_threshold;
  prep.planner_config.boxes = cfg.collision_boxes;
  prep.planner_config.collision_margin = cfg.collision_margin;

  prep.lag.tau = cfg.lag.tau;
  prep.lag.rate_limit = cfg.lag.rate_limit;
  prep.lag.transport_delay = cfg.lag.transport_delay;

  prep.capture.write_images = cfg.write_images;
  prep.capture.intrinsics = cfg.camera;
  prep.capture.depth_convention = cfg.depth_convention == "ray_length"
                                      ? scenecam::DepthConvention::ray_length
                                      : scenecam::DepthConvention::planar_z;
  prep.capture.out_dir = cfg.out_dir;
  prep.capture.cloud_stride = cfg.cloud_stride;
  return prep;
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

namespace {

struct ExecutionOutput {
  planner::PlannerLog planner_log;
  twin::TwinLog twin_log;
  std::vector<Eigen::Vector3d> cloud;
  double end_time = 0.0;
};

ExecutionOutput run_loopback(const ExperimentConfig& cfg, const Prepared& prep) {
  bridge::LoopbackBus bus;
  auto planner_ep = bus.make_endpoint();
  auto twin_ep = bus.make_endpoint();

  twin::Twin twin(prep.twin_robots, prep.scene, prep.capture, prep.lag,
                  cfg.lag.tick_rate, prep.planner_config.boxes, cfg.collision_margin,
                  twin_ep.get());
  planner::Planner plan(prep.planner_robots, prep.planner_config, planner_ep.get());
  bus.pump();

  // Lock-step: at equal times the planner ticks first so the twin sees
  // same-stamp messages before it advances past them.
  while (!plan.done()) {
    if (plan.next_time() <= twin.next_time()) {
      plan.step();
    } else {
      twin.step();
    }
    bus.pump();
  }
  const double end = plan.end_time();
  twin.run_until(end);
  bus.pump();
  twin.run_until(end);  // events published at the final tick

  ExecutionOutput out;
  out.planner_log = plan.log();
  out.twin_log = twin.log();
  out.cloud = twin.cloud();
  out.end_time = end;
  return out;
}

ExecutionOutput run_websocket(const ExperimentConfig& cfg, const Prepared& prep) {
  auto [host, port] = bridge::parse_ws_endpoint(cfg.transport);
  std::unique_ptr<bridge::WsServer> server;
  try {
    server = std::make_unique<bridge::WsServer>(port);
  } catch (const TransportError&) {
    // Port already served (external bridge); connect to it instead.
  }

  bridge::WsClient planner_client(host, port);
  bridge::WsClient twin_client(host, port);

  twin::Twin twin(prep.twin_robots, prep.scene, prep.capture, prep.lag,
                  cfg.lag.tick_rate, prep.planner_config.boxes, cfg.collision_margin,
                  &twin_client);
  planner::Planner plan(prep.planner_robots, prep.planner_config, &planner_client);

  const double rtf = cfg.realtime_factor > 0 ? cfg.realtime_factor : 1.0;
  std::atomic<bool> planner_done{false};
  const auto epoch = std::chrono::steady_clock::now();
  auto wall_for = [&](double sim_t) {
    return epoch + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                       std::chrono::duration<double>(sim_t / rtf));
  };

  std::thread planner_thread([&] {
    while (!plan.done()) {
      std::this_thread::sleep_until(wall_for(plan.next_time()));
      plan.step();
    }
    planner_done = true;
  });
  std::thread twin_thread([&] {
    // Never step past the schedule end, even if the planner thread lags.
    while (twin.next_time() <= plan.end_time()) {
      std::this_thread::sleep_until(wall_for(twin.next_time()));
      twin.step();
    }
    while (!planner_done) std::this_thread::sleep_for(std::chrono::milliseconds(5));
    // Allow stragglers to arrive, then settle the tail.
    std::this_thread::sleep_for(std::chrono::milliseconds(200));
    twin.run_until(plan.end_time());
  });
  planner_thread.join();
  twin_thread.join();

  ExecutionOutput out;
  out.planner_log = plan.log();
  out.twin_log = twin.log();
  out.cloud = twin.cloud();
  out.end_time = plan.end_time();
  twin_client.close();
  planner_client.close();
  return out;
}

std::vector<metrics::PoseTrace> planner_traces(const planner::PlannerLog& log) {
  std::vector<metrics::PoseTrace> traces;
  for (std::size_t r = 0; r < log.robots.size(); ++r) {
    metrics::PoseTrace t;
    t.robot_id = static_cast<int>(r) + 1;
    t.source = "planner";
    t.t = log.robots[r].t;
    t.position = log.robots[r].ee_position;
    traces.push_back(std::move(t));
  }
  return traces;
}

std::vector<metrics::PoseTrace> twin_traces(const twin::TwinLog& log) {
  std::vector<metrics::PoseTrace> traces;
  for (std::size_t r = 0; r < log.robots.size(); ++r) {
    metrics::PoseTrace t;
    t.robot_id = static_cast<int>(r) + 1;
    t.source = "twin";
    t.t = log.robots[r].t;
    t.position = log.robots[r].ee_position;
    traces.push_back(std::move(t));
  }
  return traces;
}

std::vector<metrics::SetpointArrival> collect_arrivals(const planner::PlannerLog& log) {
  std::vector<metrics::SetpointArrival> arrivals;
  for (std::size_t r = 0; r < log.robots.size(); ++r) {
    for (const auto& a : log.robots[r].arrivals) {
      arrivals.push_back({a.setpoint_id, static_cast<int>(r) + 1, a.t,
                          a.setpoint_position});
    }
  }
  return arrivals;
}

}  // namespace

metrics::ErrorReport analyze_outputs(const std::string& out_dir, double window) {
  fs::path dir(out_dir);
  auto planner = metrics::read_trace_csv((dir / "planner_trace.csv").string());
  auto twin = metrics::read_trace_csv((dir / "twin_trace.csv").string());
  auto arrivals = metrics::read_arrivals_csv((dir / "arrivals.csv").string());

  std::vector<metrics::PoseTrace> planner_only, twin_only;
  for (auto& t : planner) {
    if (t.source == "planner") planner_only.push_back(std::move(t));
  }
  for (auto& t : twin) {
    if (t.source == "twin") twin_only.push_back(std::move(t));
  }

  auto report = metrics::build_report(planner_only, twin_only, arrivals, window);

  std::vector<std::pair<int, metrics::ErrorSeries>> series;
  for (const auto& p : planner_only) {
    for (const auto& w : twin_only) {
      if (w.robot_id != p.robot_id) continue;
      series.emplace_back(p.robot_id, metrics::same_time_error(p, w));
    }
  }
  metrics::write_errors_csv((dir / "errors.csv").string(), series);

  std::ofstream out(dir / "report.json", std::ios::binary);
  if (!out) throw IoError("cannot write report.json under '" + out_dir + "'");
  out << metrics::report_to_json(report).dump(2) << "\n";
  return report;
}

RunResult run_experiment(const ExperimentConfig& cfg) {
  Prepared prep = prepare(cfg);

  fs::path dir(cfg.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + cfg.out_dir + "'");

  ExecutionOutput exec = cfg.transport == "loopback" ? run_loopback(cfg, prep)
                                                     : run_websocket(cfg, prep);

  auto planner_tr = planner_traces(exec.planner_log);
  auto twin_tr = twin_traces(exec.twin_log);
  metrics::write_trace_csv((dir / "planner_trace.csv").string(), planner_tr);
  metrics::write_trace_csv((dir / "twin_trace.csv").string(), twin_tr);
  auto arrivals = collect_arrivals(exec.planner_log);
  metrics::write_arrivals_csv((dir / "arrivals.csv").string(), arrivals);
  scenecam::write_ply(exec.cloud, (dir / "cloud.ply").string());

  {
    std::ofstream out(dir / "config.json", std::ios::binary);
    if (!out) throw IoError("cannot write config.json under '" + cfg.out_dir + "'");
    out << config_to_json(cfg).dump(2) << "\n";
  }

  RunResult result;
  result.report = analyze_outputs(cfg.out_dir);
  result.planner_log = std::move(exec.planner_log);
  result.twin_log = std::move(exec.twin_log);
  result.setpoint_count = prep.all_setpoints.size();
  for (const auto& r : result.planner_log.robots) {
    result.capture_triggers += r.capture_triggers;
  }
  result.images_written = result.twin_log.images_written;
  result.cloud_points = exec.cloud.size();
  result.sim_end_time = exec.end_time;
  result.out_dir = cfg.out_dir;
  return result;
}

std::string summary_table(const RunResult& result) {
  std::ostringstream out;
  char line[160];
  auto mm = [](double meters) { return meters * 1e3; };
  out << "experiment summary\n";
  std::snprintf(line, sizeof(line), "  %-28s %zu\n", "setpoints reached:",
                result.capture_triggers);
  out << line;
  std::snprintf(line, sizeof(line), "  %-28s %llu\n", "images written:",
                static_cast<unsigned long long>(result.images_written));
  out << line;
  std::snprintf(line, sizeof(line), "  %-28s %zu\n", "cloud points:",
                result.cloud_points);
  out << line;
  std::snprintf(line, sizeof(line), "  %-28s %.1f s\n", "simulated time:",
                result.sim_end_time);
  out << line;
  const auto& g = result.report;
  std::snprintf(line, sizeof(line), "  %-28s mean %.3f mm, max %.3f mm\n",
                "setpoint error:", mm(g.setpoint_mean), mm(g.setpoint_max));
  out << line;
  std::snprintf(line, sizeof(line), "  %-28s mean %.3f mm, max %.3f mm\n",
                "1s-window error:", mm(g.window_mean), mm(g.window_max));
  out << line;
  std::snprintf(line, sizeof(line), "  %-28s mean %.3f mm, max %.3f mm\n",
                "same-time error:", mm(g.same_time_mean), mm(g.same_time_max));
  out << line;
  return out.str();
}

}  // namespace twinlink::experiment
