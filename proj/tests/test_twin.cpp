#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "twinlink/bus.hpp"
#include "twinlink/metrics.hpp"
#include "twinlink/planner.hpp"
#include "twinlink/twin.hpp"

using namespace twinlink;
using namespace twinlink::twin;
using kinematics::JointConfig;
using kinematics::Vec6;

namespace {

namespace fs = std::filesystem;

Vec6 vec6(double a, double b, double c, double d, double e, double f) {
  Vec6 v;
  v << a, b, c, d, e, f;
  return v;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

struct SmallRun {
  planner::PlannerLog planner_log;
  TwinLog twin_log;
  std::vector<Eigen::Vector3d> cloud;
};

// One-robot loopback run used by several cases.
SmallRun run_small(LagParams lag, bool with_twin = true, bool images = false,
                   const std::string& out_dir = "") {
  bridge::LoopbackBus bus;
  auto planner_ep = bus.make_endpoint();
  auto twin_ep = bus.make_endpoint();

  planner::RobotSpec spec;
  spec.topic_prefix = "/robot1";
  spec.chain = kinematics::ur10_chain();
  spec.chain.base_transform = Transformd::fromOriginRpy({0.9, 0, 0.7}, {0, 0, M_PI});
  spec.home = JointConfig{vec6(0.0, -2.0, 1.8, 0.2, 1.1, 0.0)};
  auto sps = planner::spherical_setpoints({0, 0, 1.05}, 0.35, 1, 4, {0.2, 0.2});
  spec.setpoints = {sps[0], sps[3]};

  planner::PlannerConfig pcfg;
  pcfg.dwell = 1.2;
  pcfg.move_duration = 1.0;

  TwinRobotSpec tspec;
  tspec.topic_prefix = spec.topic_prefix;
  tspec.chain = spec.chain;
  tspec.home = spec.home;
  for (const auto& sp : spec.setpoints) tspec.setpoint_ids.push_back(sp.id);

  CaptureSettings capture;
  capture.write_images = images;
  capture.intrinsics = {16, 9, 11.0, 11.0, 8.0, 4.5};
  capture.out_dir = out_dir;
  capture.cloud_stride = 4;

  std::unique_ptr<Twin> tw;
  if (with_twin) {
    tw = std::make_unique<Twin>(std::vector<TwinRobotSpec>{tspec},
                                scenecam::default_scene(), capture, lag, 240.0,
                                std::vector<planner::CollisionBox>{}, 0.05,
                                twin_ep.get());
  }
  planner::Planner plan({spec}, pcfg, planner_ep.get());
  bus.pump();
  while (!plan.done()) {
    if (!tw || plan.next_time() <= tw->next_time()) {
      plan.step();
    } else {
      tw->step();
    }
    bus.pump();
  }
  if (tw) {
    tw->run_until(plan.end_time());
    bus.pump();
    tw->run_until(plan.end_time());
  }

  SmallRun out;
  out.planner_log = plan.log();
  if (tw) {
    out.twin_log = tw->log();
    out.cloud = tw->cloud();
  }
  return out;
}

metrics::PoseTrace to_trace(const std::vector<double>& t,
                            const std::vector<Eigen::Vector3d>& p, int robot,
                            const std::string& source) {
  metrics::PoseTrace trace;
  trace.t = t;
  trace.position = p;
  trace.robot_id = robot;
  trace.source = source;
  trace.validate();
  return trace;
}

}  // namespace

TEST_CASE("ideal follower snaps to the target in one step") {
  TwinState s;
  s.q_target = vec6(0.5, -0.5, 1.0, -1.0, 2.0, -2.0);
  LagParams ideal{0.0, kInf, 0.0};
  TwinState next = lag_step(s, 0.004, ideal);
  CHECK((next.q - s.q_target).cwiseAbs().maxCoeff() == 0.0);
  CHECK(next.t == doctest::Approx(0.004));
}

TEST_CASE("first-order response matches the analytic exponential") {
  LagParams lag{0.1, kInf, 0.0};
  TwinState s;
  s.q_target = vec6(1, 1, 1, 1, 1, 1);
  // Integrate 0.1 s in small steps: residual must be e^-1 of the initial gap.
  const double dt = 1e-4;
  for (int i = 0; i < 1000; ++i) s = lag_step(s, dt, lag);
  for (int j = 0; j < 6; ++j) {
    CHECK(1.0 - s.q[j] == doctest::Approx(std::exp(-1.0)).epsilon(1e-6));
  }
}

TEST_CASE("rate limit clamps the step exactly") {
  LagParams lag{0.0, 1.0, 0.0};
  TwinState s;
  s.q_target = vec6(1, -1, 1, -1, 1, -1);
  TwinState next = lag_step(s, 0.1, lag);
  for (int j = 0; j < 6; ++j) {
    CHECK(std::abs(next.q[j]) == doctest::Approx(0.1).epsilon(1e-15));
  }
}

TEST_CASE("rate-limited tracking takes the short way around the wrap") {
  LagParams lag{0.0, 1.0, 0.0};
  TwinState s;
  s.q = vec6(3.1, 0, 0, 0, 0, 0);
  s.q_target = vec6(-3.1, 0, 0, 0, 0, 0);  // 0.083 rad away through pi
  TwinState next = lag_step(s, 0.01, lag);
  CHECK(next.q[0] > 3.1);  // moved toward pi, not back through zero
}

TEST_CASE("zero-lag lock-step twin matches the planner to 1e-9") {
  SmallRun run = run_small({0.0, kInf, 0.0});
  const auto& p = run.planner_log.robots[0];
  const auto& w = run.twin_log.robots[0];
  auto planner_trace = to_trace(p.t, p.ee_position, 1, "planner");
  auto twin_trace = to_trace(w.t, w.ee_position, 1, "twin");
  auto series = metrics::same_time_error(planner_trace, twin_trace);
  REQUIRE(!series.samples.empty());
  double worst = 0;
  for (const auto& s : series.samples) worst = std::max(worst, s.error);
  CHECK(worst <= 1e-9);
}

TEST_CASE("two triggers produce exactly six image files") {
  fs::path dir = fs::temp_directory_path() / "twinlink_twin_capture";
  fs::remove_all(dir);
  SmallRun run = run_small({0.0, kInf, 0.0}, true, true, dir.string());
  CHECK(run.twin_log.images_written == 6);
  CHECK(run.twin_log.robots[0].captures.size() == 2);
  int files = 0;
  for (auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file()) ++files;
  }
  CHECK(files == 6);
  CHECK(fs::exists(dir / "robot1" / "0000_rgb.ppm"));
  CHECK(fs::exists(dir / "robot1" / "0003_depth.pfm"));
  CHECK(!run.cloud.empty());
  fs::remove_all(dir);
}

TEST_CASE("transport delay shifts the twin trace rigidly") {
  const double delay = 0.04;
  SmallRun base = run_small({0.0, kInf, 0.0});
  SmallRun delayed = run_small({0.0, kInf, delay});
  auto base_trace = to_trace(base.twin_log.robots[0].t,
                             base.twin_log.robots[0].ee_position, 1, "twin");
  auto delayed_trace = to_trace(delayed.twin_log.robots[0].t,
                                delayed.twin_log.robots[0].ee_position, 1, "twin");
  // Message-driven samples exist in both traces exactly `delay` apart; the
  // shifted pair must agree to interpolation tolerance there. In between the
  // follower is a zero-order hold, so only a coarse bound applies.
  double worst_exact = 0;
  std::size_t matched = 0;
  double worst_interp = 0;
  for (std::size_t i = 0; i < base_trace.t.size(); ++i) {
    double t = base_trace.t[i];
    if (t + delay > delayed_trace.t.back()) break;
    if (t + delay < delayed_trace.t.front()) continue;
    auto it = std::lower_bound(delayed_trace.t.begin(), delayed_trace.t.end(),
                               t + delay - 5e-9);
    if (it != delayed_trace.t.end() && std::abs(*it - (t + delay)) < 5e-9) {
      // Take the last sample inside the tolerance: an event can land one ulp
      // after a tick, leaving two samples that straddle the value change.
      while (it + 1 != delayed_trace.t.end() && std::abs(*(it + 1) - (t + delay)) < 5e-9) {
        ++it;
      }
      auto j = static_cast<std::size_t>(it - delayed_trace.t.begin());
      worst_exact = std::max(
          worst_exact, (delayed_trace.position[j] - base_trace.position[i]).norm());
      ++matched;
    }
    worst_interp = std::max(worst_interp, (delayed_trace.interpolate(t + delay) -
                                           base_trace.position[i])
                                              .norm());
  }
  CHECK(matched > 100);
  CHECK(worst_exact < 1e-6);
  CHECK(worst_interp < 0.02);  // bounded by one message step of motion
}

TEST_CASE("open loop: the planner log is identical with and without the twin") {
  SmallRun with = run_small({0.05, 0.8, 0.04}, true);
  SmallRun without = run_small({0.05, 0.8, 0.04}, false);
  const auto& a = with.planner_log.robots[0];
  const auto& b = without.planner_log.robots[0];
  REQUIRE(a.t.size() == b.t.size());
  for (std::size_t i = 0; i < a.t.size(); ++i) {
    CHECK(a.t[i] == b.t[i]);
    CHECK((a.ee_position[i] - b.ee_position[i]).norm() == 0.0);
  }
}

TEST_CASE("twin time is monotone and the lag run stays behind the planner") {
  SmallRun run = run_small({0.08, 1.0, 0.03});
  const auto& w = run.twin_log.robots[0];
  for (std::size_t i = 1; i < w.t.size(); ++i) CHECK(w.t[i] > w.t[i - 1]);
  // Lag must produce a visible transient.
  auto planner_trace =
      to_trace(run.planner_log.robots[0].t, run.planner_log.robots[0].ee_position, 1,
               "planner");
  auto twin_trace = to_trace(w.t, w.ee_position, 1, "twin");
  double worst = 0;
  for (const auto& s : metrics::same_time_error(planner_trace, twin_trace).samples) {
    worst = std::max(worst, s.error);
  }
  CHECK(worst > 1e-3);
}

TEST_CASE("collision clamp holds the previous configuration") {
  bridge::LoopbackBus bus;
  auto pub = bus.make_endpoint();
  auto twin_ep = bus.make_endpoint();

  TwinRobotSpec spec;
  spec.topic_prefix = "/robot1";
  spec.chain = kinematics::ur10_chain();
  spec.home = JointConfig{vec6(0, -1.2, 1.2, 0, 0, 0)};

  // A wall the arm would sweep through when panning to the far side.
  std::vector<planner::CollisionBox> boxes = {{{0.0, 0.9, 0.5}, {0.6, 0.2, 0.5}}};
  REQUIRE(!planner::collides(spec.chain, spec.home, boxes, 0.05));

  CaptureSettings capture;
  capture.write_images = false;
  Twin tw({spec}, scenecam::default_scene(), capture, {0.0, kInf, 0.0}, 240.0, boxes,
          0.05, twin_ep.get());

  bridge::JointStateMsg js;
  js.stamp = bridge::TimeStamp::from_ticks(1, 125);
  for (const auto& link : spec.chain.links) js.name.push_back(link.name);
  Vec6 target = vec6(M_PI / 2, -1.2, 1.2, 0, 0, 0);  // swing through the wall
  for (int i = 0; i < 6; ++i) js.position.push_back(target[i]);
  pub->publish("/robot1/joint_states", js.to_json());
  bus.pump();
  tw.run_until(0.1);

  CHECK(tw.log().robots[0].collision_holds > 0);
  // The twin kept its pre-collision pose.
  const auto& w = tw.log().robots[0];
  Eigen::Vector3d home_pos =
      kinematics::forward_kinematics(spec.chain, spec.home).translation();
  CHECK((w.ee_position.back() - home_pos).norm() < 1e-9);
}
