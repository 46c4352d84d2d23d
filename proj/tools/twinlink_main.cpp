// twinlink: engine-independent digital-twin robot simulator CLI.
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "twinlink/errors.hpp"
#include "twinlink/experiment.hpp"
#include "twinlink/image_io.hpp"
#include "twinlink/ws.hpp"

namespace {

using namespace twinlink;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitPlanning = 3;
constexpr int kExitTransport = 4;
constexpr int kExitIo = 5;

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::string transport;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool fast = false;
};

experiment::ExperimentConfig resolve_config(const CommonOpts& opts) {
  experiment::ExperimentConfig cfg = opts.config_path.empty()
                                         ? experiment::default_config()
                                         : experiment::load_config(opts.config_path);
  if (opts.fast) experiment::apply_fast_mode(cfg);
  if (!opts.transport.empty()) cfg.transport = opts.transport;
  if (opts.seed_set) cfg.seed = opts.seed;
  if (!opts.out_dir.empty()) {
    cfg.out_dir = opts.out_dir;
  } else if (opts.config_path.empty()) {
    if (const char* env = std::getenv("TWINLINK_OUT"); env && *env) cfg.out_dir = env;
  } else if (const char* env = std::getenv("TWINLINK_OUT"); env && *env &&
             cfg.out_dir == experiment::default_config().out_dir) {
    cfg.out_dir = env;
  }
  return cfg;
}

int cmd_run(const CommonOpts& opts) {
  auto cfg = resolve_config(opts);
  auto result = experiment::run_experiment(cfg);
  std::cout << experiment::summary_table(result);
  std::cout << "outputs under " << result.out_dir << "\n";
  return kExitOk;
}

int cmd_plan(const CommonOpts& opts, bool show_trajectories) {
  auto cfg = resolve_config(opts);
  auto prep = experiment::prepare(cfg);
  for (std::size_t r = 0; r < prep.planner_robots.size(); ++r) {
    const auto& spec = prep.planner_robots[r];
    for (const auto& sp : spec.setpoints) {
      const auto& p = sp.pose.translation();
      const auto& q = sp.pose.rotation();
      std::printf("setpoint %3d robot %zu %-11s pos [%9.6f %9.6f %9.6f] quat [%8.5f %8.5f %8.5f %8.5f]\n",
                  sp.id, r + 1,
                  sp.pattern == planner::Pattern::spherical ? "spherical" : "cylindrical",
                  p.x(), p.y(), p.z(), q.w(), q.x(), q.y(), q.z());
    }
  }
  if (show_trajectories) {
    planner::Planner plan(prep.planner_robots, prep.planner_config, nullptr);
    std::printf("schedule ends at t = %.3f s\n", plan.end_time());
  }
  return kExitOk;
}

int cmd_render(const CommonOpts& opts, const std::vector<double>& pose_values,
               const std::string& prefix) {
  auto cfg = resolve_config(opts);
  auto scene = scenecam::default_scene(cfg.scene);
  Transformd pose;
  if (pose_values.size() == 7) {
    Eigen::Quaterniond q(pose_values[3], pose_values[4], pose_values[5], pose_values[6]);
    if (q.norm() < 1e-9) throw StructureError("render pose quaternion is zero");
    pose = Transformd(q, {pose_values[0], pose_values[1], pose_values[2]});
  } else if (pose_values.size() == 6) {
    // x y z + look-at target
    pose = planner::look_at_pose({pose_values[0], pose_values[1], pose_values[2]},
                                 {pose_values[3], pose_values[4], pose_values[5]});
  } else {
    throw StructureError(
        "--pose needs 7 values (x y z qw qx qy qz) or 6 (x y z tx ty tz)");
  }
  auto conv = cfg.depth_convention == "ray_length"
                  ? scenecam::DepthConvention::ray_length
                  : scenecam::DepthConvention::planar_z;
  std::filesystem::create_directories(
      std::filesystem::path(prefix).parent_path().empty()
          ? "."
          : std::filesystem::path(prefix).parent_path());
  scenecam::write_ppm(scenecam::render_rgb(scene, pose, cfg.camera), prefix + "_rgb.ppm");
  scenecam::write_ppm(scenecam::render_seg(scene, pose, cfg.camera), prefix + "_seg.ppm");
  scenecam::write_pfm(scenecam::render_depth(scene, pose, cfg.camera, conv),
                      prefix + "_depth.pfm");
  std::cout << "wrote " << prefix << "_{rgb,seg}.ppm and " << prefix << "_depth.pfm\n";
  return kExitOk;
}

int cmd_analyze(const CommonOpts& opts) {
  auto cfg = resolve_config(opts);
  auto report = experiment::analyze_outputs(cfg.out_dir);
  std::printf("report.json and errors.csv rebuilt under %s\n", cfg.out_dir.c_str());
  std::printf("setpoint error mean %.3f mm max %.3f mm; window mean %.3f mm\n",
              report.setpoint_mean * 1e3, report.setpoint_max * 1e3,
              report.window_mean * 1e3);
  return kExitOk;
}

volatile std::sig_atomic_t g_stop = 0;

int cmd_serve(std::uint16_t port) {
  bridge::WsServer server(port);
  std::printf("bridge server listening on port %u (Ctrl-C to stop)\n", server.port());
  std::signal(SIGINT, [](int) { g_stop = 1; });
  std::signal(SIGTERM, [](int) { g_stop = 1; });
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  auto st = server.stats();
  std::printf("served %llu published / %llu delivered / %llu dropped\n",
              static_cast<unsigned long long>(st.published),
              static_cast<unsigned long long>(st.delivered),
              static_cast<unsigned long long>(st.dropped));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"twinlink: digital-twin UR10 simulator with a rosbridge-style bus"};
  app.require_subcommand(1);

  CommonOpts opts;
  app.add_option("--config", opts.config_path, "experiment config JSON");
  app.add_option("--out", opts.out_dir, "output directory (or $TWINLINK_OUT)");
  app.add_option("--transport", opts.transport, "loopback | ws://host:port");
  auto* seed_opt = app.add_option("--seed", opts.seed, "experiment seed");
  app.add_flag("--fast", opts.fast, "CI profile: 24 setpoints, 160x90 captures");

  auto* run = app.add_subcommand("run", "run the full experiment pipeline");
  auto* plan = app.add_subcommand("plan", "print the setpoint schedule");
  bool show_traj = false;
  plan->add_flag("--trajectories", show_traj, "also plan and print the schedule end");
  auto* render = app.add_subcommand("render", "one-shot render of the default scene");
  std::vector<double> pose_values;
  std::string render_prefix = "render";
  render->add_option("--pose", pose_values,
                     "x y z qw qx qy qz (or x y z tx ty tz for look-at)")
      ->expected(6, 7);
  render->add_option("--prefix", render_prefix, "output file prefix");
  auto* analyze = app.add_subcommand("analyze", "recompute report.json from traces");
  auto* serve = app.add_subcommand("serve", "run a standalone bridge server");
  std::uint16_t port = 9090;
  serve->add_option("--port", port, "listen port (default 9090)");

  try {
    app.parse(argc, argv);
    opts.seed_set = seed_opt->count() > 0;
    if (run->parsed()) return cmd_run(opts);
    if (plan->parsed()) return cmd_plan(opts, show_traj);
    if (render->parsed()) return cmd_render(opts, pose_values, render_prefix);
    if (analyze->parsed()) return cmd_analyze(opts);
    if (serve->parsed()) return cmd_serve(port);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const PlanningError& e) {
    std::cerr << "planning error: " << e.what() << "\n";
    return kExitPlanning;
  } catch (const TransportError& e) {
    std::cerr << "transport error: " << e.what() << "\n";
    return kExitTransport;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
