#include <doctest.h>

#include <cmath>
#include <random>

#include "twinlink/bus.hpp"
#include "twinlink/errors.hpp"
#include "twinlink/planner.hpp"

using namespace twinlink;
using namespace twinlink::planner;
using kinematics::JointConfig;
using kinematics::Vec6;

namespace {

Vec6 vec6(double a, double b, double c, double d, double e, double f) {
  Vec6 v;
  v << a, b, c, d, e, f;
  return v;
}

}  // namespace

TEST_CASE("single spherical setpoint at latitude zero") {
  auto pts = spherical_setpoints({1, 2, 3}, 0.5, 1, 1, {0.0, 0.0});
  REQUIRE(pts.size() == 1);
  CHECK((pts[0].pose.translation() - Eigen::Vector3d(1.5, 2, 3)).norm() < 1e-12);
  Eigen::Vector3d view = pts[0].pose.rotate(Eigen::Vector3d::UnitZ());
  CHECK((view - Eigen::Vector3d(-1, 0, 0)).norm() < 1e-12);
}

TEST_CASE("spherical setpoints sit on the sphere and look at the center") {
  Eigen::Vector3d center(0.2, -0.1, 1.0);
  auto pts = spherical_setpoints(center, 0.4, 3, 10, {-0.3, 0.7});
  CHECK(pts.size() == 30);
  for (const auto& sp : pts) {
    double r = (sp.pose.translation() - center).norm();
    CHECK(std::abs(r - 0.4) < 1e-12);
    Eigen::Vector3d view = sp.pose.rotate(Eigen::Vector3d::UnitZ());
    Eigen::Vector3d to_center = (center - sp.pose.translation()).normalized();
    CHECK(view.dot(to_center) == doctest::Approx(1.0).epsilon(1e-12));
    // Right-handed, orthonormal.
    Eigen::Matrix3d rot = sp.pose.rotationMatrix();
    CHECK(std::abs(rot.determinant() - 1.0) < 1e-9);
  }
}

TEST_CASE("cylindrical setpoints: counts, radius, horizontal view") {
  auto pts = cylindrical_setpoints({0.5, 0.5, 0.0}, 0.3, {0.5}, 4);
  REQUIRE(pts.size() == 4);
  for (const auto& sp : pts) {
    Eigen::Vector3d p = sp.pose.translation();
    double r = std::hypot(p.x() - 0.5, p.y() - 0.5);
    CHECK(std::abs(r - 0.3) < 1e-12);
    CHECK(p.z() == doctest::Approx(0.5));
    Eigen::Vector3d view = sp.pose.rotate(Eigen::Vector3d::UnitZ());
    CHECK(std::abs(view.z()) < 1e-12);
  }
  auto grid = cylindrical_setpoints({0, 0, 0}, 0.3, {0.2, 0.4, 0.6}, 7);
  CHECK(grid.size() == 21);
}

TEST_CASE("joint cubic: midpoint symmetry, exact endpoints, constancy") {
  JointConfig q0{vec6(0.1, -0.4, 1.0, 2.0, -2.0, 0.0)};
  JointConfig q1{vec6(0.9, 0.4, -1.0, 1.0, -1.0, 0.5)};
  Trajectory traj = plan_joint(q0, q1, 2.0, 0.25);
  REQUIRE(traj.samples.size() == 9);
  CHECK(traj.samples.front().t == 0.0);
  CHECK(traj.samples.back().t == 2.0);
  for (int i = 0; i < 6; ++i) {
    CHECK(traj.samples.front().q[i] == doctest::Approx(q0[i]).epsilon(1e-15));
    CHECK(traj.samples.back().q[i] == doctest::Approx(q1[i]).epsilon(1e-15));
    CHECK(traj.samples[4].q[i] == doctest::Approx(0.5 * (q0[i] + q1[i])).epsilon(1e-12));
  }
  // Uniform dt.
  for (std::size_t i = 1; i < traj.samples.size(); ++i) {
    CHECK(traj.samples[i].t - traj.samples[i - 1].t == doctest::Approx(0.25));
  }

  Trajectory constant = plan_joint(q0, q0, 1.0, 0.1);
  for (const auto& s : constant.samples) {
    CHECK(s.q.max_wrapped_delta(q0) == 0.0);
  }
}

TEST_CASE("joint cubic is monotone between endpoints (dense-grid oracle)") {
  JointConfig q0{vec6(-1.2, 0.3, 0.0, 2.5, -2.5, 1.0)};
  JointConfig q1{vec6(1.4, -0.8, 0.0, 0.5, -0.5, -1.0)};
  const double duration = 1.7;
  Trajectory traj = plan_joint(q0, q1, duration, 0.01);
  // Direct evaluation of the cubic on a dense grid brackets every sample.
  for (int j = 0; j < 6; ++j) {
    double lo = std::min(q0[j], q1[j]) - 1e-12;
    double hi = std::max(q0[j], q1[j]) + 1e-12;
    double prev = q0[j];
    for (std::size_t i = 0; i < traj.samples.size(); ++i) {
      double v = traj.samples[i].q[j];
      CHECK(v >= lo);
      CHECK(v <= hi);
      double s = traj.samples[i].t / duration;
      double direct = q0[j] + (q1[j] - q0[j]) * (3 * s * s - 2 * s * s * s);
      CHECK(v == doctest::Approx(direct).epsilon(1e-12));
      if (q1[j] >= q0[j]) {
        CHECK(v >= prev - 1e-12);
      } else {
        CHECK(v <= prev + 1e-12);
      }
      prev = v;
    }
  }
}

TEST_CASE("linear path: degenerate endpoints give a single seeded sample") {
  auto chain = kinematics::ur10_chain();
  JointConfig seed{vec6(0.3, -1.2, 1.8, -0.5, -1.2, 0.4)};
  Transformd pose = kinematics::forward_kinematics(chain, seed);
  Trajectory traj = plan_linear(chain, pose, pose, 0.25, 0.008, seed);
  REQUIRE(traj.samples.size() == 1);
  CHECK(traj.samples[0].q.max_wrapped_delta(seed) < 1e-9);
}

TEST_CASE("linear path stays on the segment within 1e-6") {
  auto chain = kinematics::ur10_chain();
  kinematics::UrAnalyticIk ik(chain);
  JointConfig seed{vec6(0.3, -1.2, 1.8, -0.5, -1.2, 0.4)};
  Transformd pose0 = kinematics::forward_kinematics(chain, seed);
  Transformd pose1(pose0.rotation(),
                   pose0.translation() + Eigen::Vector3d(0.12, -0.1, 0.1));
  Trajectory traj = plan_linear(ik, pose0, pose1, 0.25, 0.008, seed);
  CHECK(traj.samples.size() > 10);
  const Eigen::Vector3d a = pose0.translation();
  const Eigen::Vector3d ab = pose1.translation() - a;
  JointConfig prev = seed;
  for (const auto& s : traj.samples) {
    Eigen::Vector3d p = kinematics::forward_kinematics(chain, s.q).translation();
    double u = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    CHECK((p - (a + u * ab)).norm() < 1e-6);
    CHECK(s.q.max_wrapped_delta(prev) < 0.2);
    prev = s.q;
  }
}

TEST_CASE("linear path leaving the workspace names the failing waypoint") {
  auto chain = kinematics::ur10_chain();
  JointConfig seed{vec6(0.3, -1.2, 1.8, -0.5, -1.2, 0.4)};
  Transformd pose0 = kinematics::forward_kinematics(chain, seed);
  Transformd pose1(pose0.rotation(),
                   pose0.translation() + Eigen::Vector3d(3.0, 0, 0));
  try {
    plan_linear(chain, pose0, pose1, 0.5, 0.05, seed);
    FAIL("expected PlanningError");
  } catch (const PlanningError& e) {
    CHECK(e.waypoint_index > 0);
  }
}

TEST_CASE("segment-box collision matches a 1 mm sampling oracle") {
  auto chain = kinematics::ur10_chain();
  std::vector<CollisionBox> boxes = {
      {{0.55, 0.0, 0.3}, {0.25, 0.25, 0.3}},
      {{-0.4, 0.5, 0.8}, {0.2, 0.15, 0.25}},
      {{0.0, -0.7, 0.2}, {0.3, 0.2, 0.2}},
  };
  const double margin = 0.05;
  auto oracle = [&](const JointConfig& q) {
    auto origins = kinematics::joint_origins(chain, q);
    for (std::size_t i = 0; i + 1 < origins.size(); ++i) {
      Eigen::Vector3d a = origins[i], b = origins[i + 1];
      double len = (b - a).norm();
      int steps = std::max(1, static_cast<int>(std::ceil(len / 1e-3)));
      for (int s = 0; s <= steps; ++s) {
        Eigen::Vector3d p = a + (b - a) * (static_cast<double>(s) / steps);
        for (const auto& box : boxes) {
          Eigen::Vector3d d = (p - box.center).cwiseAbs() - box.half_extents;
          if ((d.array() <= margin).all()) return true;
        }
      }
    }
    return false;
  };

  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> dist(-M_PI + 1e-3, M_PI);
  int collisions = 0, sampler_missed = 0, analytic_missed = 0;
  for (int i = 0; i < 10000; ++i) {
    Vec6 a;
    for (int k = 0; k < 6; ++k) a[k] = dist(rng);
    JointConfig q(a);
    bool fast = collides(chain, q, boxes, margin);
    bool slow = oracle(q);
    if (fast && !slow) ++sampler_missed;  // corner graze under the 1 mm grid
    if (!fast && slow) ++analytic_missed;
    if (fast) ++collisions;
  }
  CHECK(analytic_missed == 0);  // the exact test must never under-report
  CHECK(sampler_missed <= 5);
  CHECK(collisions > 100);  // the boxes actually matter for this arm
}

TEST_CASE("arm three meters from every box never collides") {
  auto chain = kinematics::ur10_chain();
  std::vector<CollisionBox> boxes = {{{30, 30, 0.5}, {0.5, 0.5, 0.5}}};
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> dist(-M_PI + 1e-3, M_PI);
  for (int i = 0; i < 200; ++i) {
    Vec6 a;
    for (int k = 0; k < 6; ++k) a[k] = dist(rng);
    CHECK(!collides(chain, JointConfig(a), boxes));
  }
}

TEST_CASE("a segment through a box center collides") {
  auto chain = kinematics::ur10_chain();
  // Put a box right on the zero-pose forearm.
  JointConfig zero;
  auto origins = kinematics::joint_origins(chain, zero);
  Eigen::Vector3d mid = 0.5 * (origins[2] + origins[3]);
  std::vector<CollisionBox> boxes = {{mid, {0.05, 0.05, 0.05}}};
  CHECK(collides(chain, zero, boxes));
}

TEST_CASE("planner run: one robot, two setpoints, two capture triggers") {
  bridge::LoopbackBus bus;
  auto ep = bus.make_endpoint();

  int captures = 0;
  std::vector<double> capture_times;
  auto watcher = bus.make_endpoint();
  watcher->subscribe("/robot1/capture", bridge::kBoolType,
                     [&](const bridge::BridgeMessage&) { ++captures; });

  RobotSpec spec;
  spec.topic_prefix = "/robot1";
  spec.chain = kinematics::ur10_chain();
  spec.chain.base_transform = Transformd::fromOriginRpy({0.9, 0, 0.7}, {0, 0, M_PI});
  spec.home = JointConfig{vec6(0.0, -2.0, 1.8, 0.2, 1.1, 0.0)};
  auto sps = spherical_setpoints({0, 0, 1.05}, 0.35, 1, 4, {0.2, 0.2});
  spec.setpoints = {sps[0], sps[3]};  // the +x hemisphere pair

  PlannerConfig cfg;
  cfg.publish_rate = 125.0;
  cfg.dwell = 0.5;
  cfg.move_duration = 1.0;

  Planner plan({spec}, cfg, ep.get());
  std::uint64_t steps = 0;
  while (!plan.done()) {
    plan.step();
    bus.pump();
    ++steps;
  }
  CHECK(captures == 2);
  const auto& rlog = plan.log().robots[0];
  CHECK(rlog.capture_triggers == 2);
  CHECK(rlog.published == steps);
  CHECK(rlog.arrivals.size() == 2);
  // Uniform strictly-increasing clock.
  for (std::size_t i = 1; i < rlog.t.size(); ++i) {
    CHECK(rlog.t[i] > rlog.t[i - 1]);
    CHECK(rlog.t[i] - rlog.t[i - 1] == doctest::Approx(1.0 / 125.0).epsilon(1e-9));
  }
  // Arrivals land within the threshold of their setpoints.
  for (std::size_t i = 0; i < rlog.arrivals.size(); ++i) {
    const auto& arrival = rlog.arrivals[i];
    auto it = std::find(rlog.t.begin(), rlog.t.end(), arrival.t);
    REQUIRE(it != rlog.t.end());
    auto idx = static_cast<std::size_t>(it - rlog.t.begin());
    CHECK((rlog.ee_position[idx] - arrival.setpoint_position).norm() < 1e-4);
  }
}

TEST_CASE("unreachable setpoints abort planning with the setpoint id") {
  RobotSpec spec;
  spec.topic_prefix = "/robot1";
  spec.chain = kinematics::ur10_chain();
  spec.home = JointConfig{vec6(0.0, -2.0, 1.8, 0.2, 1.1, 0.0)};
  spec.setpoints = {{77, Transformd::fromTranslation({5, 0, 0}), Pattern::spherical}};
  PlannerConfig cfg;
  CHECK_THROWS_WITH_AS(Planner({spec}, cfg, nullptr), doctest::Contains("77"),
                       PlanningError);
}
