// Acceptance suite: runs every gate criterion, printing one line per check.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <thread>
#include <vector>

#include "twinlink/bus.hpp"
#include "twinlink/experiment.hpp"
#include "twinlink/image_io.hpp"
#include "twinlink/kinematics.hpp"
#include "twinlink/metrics.hpp"
#include "twinlink/planner.hpp"
#include "twinlink/scene.hpp"
#include "twinlink/ws.hpp"

namespace fs = std::filesystem;
using namespace twinlink;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

struct Criterion {
  int index;
  std::string name;
  Clock::time_point start = Clock::now();
  bool ok = true;
  std::string detail;

  Criterion(int idx, std::string label) : index(idx), name(std::move(label)) {}

  void expect(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }

  void finish(double time_limit_s = 0.0) {
    double elapsed = std::chrono::duration<double>(Clock::now() - start).count();
    if (time_limit_s > 0 && elapsed > time_limit_s) {
      ok = false;
      detail += (detail.empty() ? "" : "; ");
      detail += "runtime " + std::to_string(elapsed) + " s over the " +
                std::to_string(time_limit_s) + " s budget";
    }
    std::printf("%s criterion %d: %s (%.2f s)%s%s\n", ok ? "PASS" : "FAIL", index,
                name.c_str(), elapsed, detail.empty() ? "" : " -- ", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
  }
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "<missing:" + path.string() + ">";
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

fs::path work_dir() {
  fs::path dir = fs::current_path() / "acceptance_out";
  return dir;
}

// Independent 4x4 FK oracle (Rodrigues rotations, no quaternions).
Eigen::Matrix4d oracle_fk(const kinematics::KinematicChain& chain,
                          const kinematics::JointConfig& q) {
  auto rodrigues = [](const Eigen::Vector3d& axis, double angle) {
    Eigen::Matrix3d k;
    k << 0, -axis.z(), axis.y(), axis.z(), 0, -axis.x(), -axis.y(), axis.x(), 0;
    Eigen::Matrix3d r = Eigen::Matrix3d::Identity() + std::sin(angle) * k +
                        (1 - std::cos(angle)) * k * k;
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.block<3, 3>(0, 0) = r;
    return m;
  };
  Eigen::Matrix4d t = chain.base_transform.matrix();
  for (std::size_t i = 0; i < chain.links.size(); ++i) {
    t = t * chain.links[i].fixed_offset.matrix() *
        rodrigues(chain.links[i].axis, q[static_cast<int>(i)]);
  }
  return t * chain.tool_offset.matrix();
}

kinematics::JointConfig random_config(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-M_PI + 1e-3, M_PI);
  kinematics::Vec6 a;
  for (int i = 0; i < 6; ++i) a[i] = dist(rng);
  return kinematics::JointConfig(a);
}

void criterion_1_kinematics() {
  Criterion c(1, "FK/IK oracle equivalence");
  auto chain = kinematics::ur10_chain();
  std::mt19937_64 rng(101);
  for (int i = 0; i < 100; ++i) {
    auto q = random_config(rng);
    Eigen::Matrix4d expect = oracle_fk(chain, q);
    Eigen::Matrix4d got = kinematics::forward_kinematics(chain, q).matrix();
    c.expect((got - expect).cwiseAbs().maxCoeff() <= 1e-9,
             "FK deviates from the matrix oracle");
  }
  kinematics::UrAnalyticIk ik(chain);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    auto q = random_config(rng);
    auto target = kinematics::forward_kinematics(chain, q);
    auto res = ik.solve(target);
    c.expect(res.reachable && !res.solutions.empty(), "IK missed an FK target");
    double best = 1e9;
    for (const auto& s : res.solutions) best = std::min(best, s.max_wrapped_delta(q));
    worst = std::max(worst, best);
  }
  c.expect(worst <= 1e-6, "IK seed recovery above 1e-6 (worst " +
                              std::to_string(worst) + ")");
  c.finish(5.0);
}

void criterion_2_protocol() {
  Criterion c(2, "protocol conformance and routing");
  // Byte-level field names.
  auto wire = bridge::encode(
      bridge::BridgeMessage::publish("/ue5/capture", bridge::BoolMsg{true}.to_json()));
  c.expect(wire == R"({"op":"publish","topic":"/ue5/capture","msg":{"data":true}})",
           "wire form mismatch: " + wire);
  auto sub = bridge::encode(bridge::BridgeMessage::subscribe("/t", "std_msgs/Bool", "7"));
  c.expect(sub.find("\"op\":\"subscribe\"") != std::string::npos &&
               sub.find("\"type\":\"std_msgs/Bool\"") != std::string::npos &&
               sub.find("\"id\":\"7\"") != std::string::npos,
           "subscribe envelope missing v2 field names");

  // 1000-message fuzz round trip.
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> val(-50, 50);
  for (int i = 0; i < 1000; ++i) {
    bridge::JointStateMsg js;
    js.stamp = bridge::TimeStamp::from_ticks(static_cast<std::int64_t>(rng() % 100000),
                                             125);
    int n = 1 + static_cast<int>(rng() % 6);
    for (int k = 0; k < n; ++k) {
      js.name.push_back("j" + std::to_string(k));
      js.position.push_back(val(rng) * std::pow(10.0, static_cast<int>(rng() % 9) - 4));
    }
    auto msg = bridge::BridgeMessage::publish("/fuzz/" + std::to_string(rng() % 97),
                                              js.to_json());
    auto back = bridge::decode(bridge::encode(msg));
    c.expect(back == msg, "codec round trip changed a message");
  }

  // Routing: 10 publishers x 1000 messages over a live WebSocket server.
  bridge::WsServer server(0, 1 << 16);
  bridge::WsClient subscriber("127.0.0.1", server.port());
  std::mutex mu;
  std::vector<int> next(10, 0);
  std::uint64_t received = 0;
  bool in_order = true;
  subscriber.subscribe("/bulk", bridge::kJointStateType,
                       [&](const bridge::BridgeMessage& m) {
                         std::lock_guard lock(mu);
                         int pub = m.payload.at("publisher").get<int>();
                         int seq = m.payload.at("seq").get<int>();
                         if (next[static_cast<std::size_t>(pub)]++ != seq) in_order = false;
                         ++received;
                       });
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  {
    std::vector<std::unique_ptr<bridge::WsClient>> pubs;
    for (int p = 0; p < 10; ++p) {
      pubs.push_back(std::make_unique<bridge::WsClient>("127.0.0.1", server.port()));
    }
    std::vector<std::thread> threads;
    for (int p = 0; p < 10; ++p) {
      threads.emplace_back([&, p] {
        for (int i = 0; i < 1000; ++i) {
          bridge::Json payload;
          payload["publisher"] = p;
          payload["seq"] = i;
          pubs[static_cast<std::size_t>(p)]->publish("/bulk", payload);
        }
      });
    }
    for (auto& t : threads) t.join();
    auto deadline = Clock::now() + std::chrono::seconds(8);
    while (Clock::now() < deadline) {
      {
        std::lock_guard lock(mu);
        if (received == 10000) break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
  }
  std::lock_guard lock(mu);
  c.expect(received == 10000,
           "expected 10000 deliveries, got " + std::to_string(received));
  c.expect(in_order, "per-publisher order violated");
  c.finish(10.0);
}

experiment::ExperimentConfig desk_config(const fs::path& out, bool low_res) {
  auto cfg = experiment::default_config();
  if (low_res) {
    cfg.camera.width = 160;
    cfg.camera.height = 90;
    cfg.camera.fx = cfg.camera.fy = 1380.0 * 160.0 / 1920.0;
    cfg.camera.cx = 80.0;
    cfg.camera.cy = 45.0;
    cfg.cloud_stride = 8;
  }
  cfg.out_dir = out.string();
  return cfg;
}

void criterion_3_zero_lag() {
  Criterion c(3, "zero-lag fidelity");
  fs::path dir = work_dir() / "zero_lag";
  fs::remove_all(dir);
  auto cfg = desk_config(dir, true);
  experiment::apply_fast_mode(cfg);
  cfg.out_dir = dir.string();
  cfg.lag.tau = 0.0;
  cfg.lag.rate_limit = std::numeric_limits<double>::infinity();
  cfg.lag.transport_delay = 0.0;
  auto result = experiment::run_experiment(cfg);
  c.expect(result.report.same_time_max <= 1e-9,
           "same-time max " + std::to_string(result.report.same_time_max));
  c.expect(result.report.setpoint_max <= 1e-9,
           "setpoint max " + std::to_string(result.report.setpoint_max));
  c.expect(result.report.window_max <= 1e-9,
           "window max " + std::to_string(result.report.window_max));
  c.finish();
}

// Shared by criteria 4 and 8.
experiment::RunResult run_desk_experiment() {
  fs::path dir = work_dir() / "desk_run";
  fs::remove_all(dir);
  return experiment::run_experiment(desk_config(dir, true));
}

void criterion_4_lag_regime(const experiment::RunResult& result, double elapsed_s) {
  Criterion c(4, "lag-regime error reproduction");
  const auto& g = result.report;
  c.expect(g.setpoint_mean >= 0.1e-3 && g.setpoint_mean <= 20e-3,
           "mean setpoint error " + std::to_string(g.setpoint_mean * 1e3) +
               " mm outside [0.1, 20] mm");
  c.expect(g.window_mean * 10.0 < g.setpoint_mean,
           "window mean " + std::to_string(g.window_mean * 1e3) +
               " mm not 10x below setpoint mean " +
               std::to_string(g.setpoint_mean * 1e3) + " mm");
  c.expect(g.same_time_max >= 100.0 * g.setpoint_mean,
           "peak transient " + std::to_string(g.same_time_max * 1e3) +
               " mm not 100x the setpoint mean");
  c.expect(elapsed_s < 60.0,
           "desk run took " + std::to_string(elapsed_s) + " s (budget 60 s)");
  std::printf("  [info] setpoint mean %.3f mm max %.3f mm | window mean %.4f mm max "
              "%.4f mm | same-time max %.1f mm\n",
              g.setpoint_mean * 1e3, g.setpoint_max * 1e3, g.window_mean * 1e3,
              g.window_max * 1e3, g.same_time_max * 1e3);
  c.finish();
}

void criterion_5_window_oracle() {
  Criterion c(5, "window mean vs closed-form integral");
  const double tau = 0.05, e0 = 1.0;
  std::vector<metrics::ErrorSample> series;
  for (int i = 0; i <= 240; ++i) {
    double t = i / 240.0;
    series.push_back({t, e0 * std::exp(-t / tau)});
  }
  auto stats = metrics::window_stats(series, 0.0, 1.0);
  double closed_form = e0 * tau * (1.0 - std::exp(-1.0 / tau));
  double rel = std::abs(stats.mean - closed_form) / closed_form;
  c.expect(rel < 0.02, "relative deviation " + std::to_string(rel));
  c.finish();
}

void criterion_6_point_cloud() {
  Criterion c(6, "point-cloud cylinder reconstruction");
  auto scene = scenecam::default_scene();
  scenecam::SceneParams params;
  const double pot_r = params.pot_radius;
  const double pot_base = params.table_height;
  const double slice_z = pot_base + 0.5 * params.pot_height;

  scenecam::CameraIntrinsics intr{160, 90, 115.0, 115.0, 80.0, 45.0};
  auto ring = planner::cylindrical_setpoints({0, 0, slice_z}, 0.55, {0.0}, 12);
  std::vector<Eigen::Vector3d> fused;
  double worst_reproj = 0.0;
  for (const auto& sp : ring) {
    auto depth = scenecam::render_depth(scene, sp.pose, intr);
    auto cloud = scenecam::depth_to_pointcloud(depth, intr, sp.pose);
    fused.insert(fused.end(), cloud.begin(), cloud.end());
    // Reprojection identity for every finite pixel.
    Transformd inv = sp.pose.inverse();
    std::size_t k = 0;
    for (int v = 0; v < intr.height; ++v) {
      for (int u = 0; u < intr.width; ++u) {
        float z = depth.at(u, v);
        if (!std::isfinite(z)) continue;
        Eigen::Vector3d cam_pt = inv * cloud[k++];
        double up = intr.fx * cam_pt.x() / cam_pt.z() + intr.cx;
        double vp = intr.fy * cam_pt.y() / cam_pt.z() + intr.cy;
        worst_reproj = std::max({worst_reproj, std::abs(up - u), std::abs(vp - v)});
      }
    }
  }
  c.expect(worst_reproj <= 0.5,
           "reprojection error " + std::to_string(worst_reproj) + " px");

  // Kasa least-squares circle fit on the pot slice.
  std::vector<Eigen::Vector2d> slice;
  for (const auto& p : fused) {
    if (std::abs(p.z() - slice_z) < 0.03 && std::hypot(p.x(), p.y()) < 0.4) {
      slice.emplace_back(p.x(), p.y());
    }
  }
  c.expect(slice.size() > 500, "slice too sparse: " + std::to_string(slice.size()));
  Eigen::MatrixXd a(slice.size(), 3);
  Eigen::VectorXd b(slice.size());
  for (std::size_t i = 0; i < slice.size(); ++i) {
    a(static_cast<Eigen::Index>(i), 0) = 2 * slice[i].x();
    a(static_cast<Eigen::Index>(i), 1) = 2 * slice[i].y();
    a(static_cast<Eigen::Index>(i), 2) = 1.0;
    b(static_cast<Eigen::Index>(i)) = slice[i].squaredNorm();
  }
  Eigen::Vector3d sol = a.colPivHouseholderQr().solve(b);
  double radius = std::sqrt(sol[2] + sol[0] * sol[0] + sol[1] * sol[1]);
  c.expect(std::abs(radius - pot_r) / pot_r <= 0.01,
           "fit radius " + std::to_string(radius) + " vs " + std::to_string(pot_r));
  std::printf("  [info] fused %zu points, slice %zu, fit radius %.4f m, reproj %.3g px\n",
              fused.size(), slice.size(), radius, worst_reproj);
  c.finish();
}

void criterion_7_flat_segmentation() {
  Criterion c(7, "flat segmentation palette");
  auto scene = scenecam::default_scene();
  std::set<scenecam::Rgb8> palette;
  for (const auto& obj : scene.objects) palette.insert(obj.seg_color);
  palette.insert(scene.background);

  const std::vector<Eigen::Vector3d> eyes = {
      {0.8, 0.5, 1.3}, {-0.7, -0.6, 1.1}, {0.0, 0.9, 1.8}};
  const std::vector<std::pair<int, int>> sizes = {{160, 90}, {97, 53}, {320, 180}};
  for (const auto& eye : eyes) {
    for (auto [w, h] : sizes) {
      scenecam::CameraIntrinsics intr{w, h, 0.72 * w, 0.72 * w, w / 2.0, h / 2.0};
      Transformd pose = planner::look_at_pose(eye, {0, 0, 1.0});
      auto seg = scenecam::render_seg(scene, pose, intr);

      std::set<scenecam::Rgb8> actual(seg.pixels.begin(), seg.pixels.end());
      for (const auto& color : actual) {
        c.expect(palette.count(color) == 1, "blended/unknown color in seg image");
      }
      // Distinct colors equal the visible id set plus background when present.
      std::set<scenecam::Rgb8> expected;
      for (int v = 0; v < h; ++v) {
        for (int u = 0; u < w; ++u) {
          Eigen::Vector3d dir = pose.rotate(
              Eigen::Vector3d((u + 0.5 - intr.cx) / intr.fx,
                              (v + 0.5 - intr.cy) / intr.fy, 1.0)
                  .normalized());
          auto hit = scenecam::ray_intersect(scene, pose.translation(), dir);
          expected.insert(hit ? scene.find(hit->id)->seg_color : scene.background);
        }
      }
      c.expect(actual == expected, "distinct color set differs from visible id set");
    }
  }
  c.finish();
}

void criterion_8_capture_accounting(const experiment::RunResult& result) {
  Criterion c(8, "capture accounting (120 setpoints, 360 images)");
  c.expect(result.setpoint_count == 120,
           "setpoints " + std::to_string(result.setpoint_count));
  c.expect(result.capture_triggers == 120,
           "triggers " + std::to_string(result.capture_triggers));
  c.expect(result.images_written == 360,
           "images " + std::to_string(result.images_written));
  std::size_t files = 0;
  for (auto& entry : fs::recursive_directory_iterator(result.out_dir)) {
    auto ext = entry.path().extension().string();
    if (ext == ".ppm" || ext == ".pfm") ++files;
  }
  c.expect(files == 360, "files on disk " + std::to_string(files));
  c.finish();
}

void criterion_9_determinism() {
  Criterion c(9, "loopback determinism");
  fs::path dir1 = work_dir() / "det_a";
  fs::path dir2 = work_dir() / "det_b";
  fs::remove_all(dir1);
  fs::remove_all(dir2);
  auto cfg = desk_config(dir1, true);
  experiment::apply_fast_mode(cfg);
  cfg.out_dir = dir1.string();
  cfg.seed = 7;
  experiment::run_experiment(cfg);
  cfg.out_dir = dir2.string();
  experiment::run_experiment(cfg);
  for (const char* name : {"planner_trace.csv", "twin_trace.csv", "arrivals.csv",
                           "errors.csv", "report.json", "cloud.ply"}) {
    c.expect(slurp(dir1 / name) == slurp(dir2 / name),
             std::string(name) + " differs between runs");
  }
  std::size_t images = 0;
  for (auto& entry : fs::recursive_directory_iterator(dir1)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    if (ext != ".ppm" && ext != ".pfm") continue;
    auto rel = fs::relative(entry.path(), dir1);
    c.expect(slurp(entry.path()) == slurp(dir2 / rel),
             rel.string() + " differs between runs");
    ++images;
  }
  c.expect(images == 72, "expected 72 images, saw " + std::to_string(images));
  c.finish();
}

}  // namespace

int main() {
  fs::create_directories(work_dir());
  criterion_1_kinematics();
  criterion_2_protocol();
  criterion_3_zero_lag();

  auto desk_start = Clock::now();
  experiment::RunResult desk = run_desk_experiment();
  double desk_elapsed = std::chrono::duration<double>(Clock::now() - desk_start).count();
  criterion_4_lag_regime(desk, desk_elapsed);
  criterion_5_window_oracle();
  criterion_6_point_cloud();
  criterion_7_flat_segmentation();
  criterion_8_capture_accounting(desk);
  criterion_9_determinism();

  if (g_failures == 0) {
    std::printf("acceptance: all 9 criteria passed\n");
    return 0;
  }
  std::printf("acceptance: %d criterion(s) failed\n", g_failures);
  return 1;
}
