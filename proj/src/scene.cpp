#include "twinlink/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <thread>

#include "twinlink/errors.hpp"

namespace twinlink::scenecam {

namespace {

constexpr double kTMin = 1e-6;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct RawHit {
  double t = kInf;
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();  // geometric outward normal
};

std::optional<RawHit> hit_impl(const Plane& s, const Eigen::Vector3d& o,
                                const Eigen::Vector3d& d) {
  double denom = s.normal.dot(d);
  if (std::abs(denom) < 1e-12) return std::nullopt;
  double t = (s.offset - s.normal.dot(o)) / denom;
  if (t < kTMin) return std::nullopt;
  return RawHit{t, s.normal};
}

std::optional<RawHit> hit_impl(const Sphere& s, const Eigen::Vector3d& o,
                                 const Eigen::Vector3d& d) {
  Eigen::Vector3d oc = o - s.center;
  double b = oc.dot(d);
  double c = oc.squaredNorm() - s.radius * s.radius;
  double disc = b * b - c;
  if (disc < 0) return std::nullopt;
  double root = std::sqrt(disc);
  double t = -b - root;
  if (t < kTMin) t = -b + root;
  if (t < kTMin) return std::nullopt;
  Eigen::Vector3d n = (o + t * d - s.center) / s.radius;
  return RawHit{t, n};
}

std::optional<RawHit> hit_impl(const Box& s, const Eigen::Vector3d& o,
                              const Eigen::Vector3d& d) {
  double tnear = -kInf, tfar = kInf;
  int near_axis = -1, far_axis = -1;
  double near_sign = 1, far_sign = 1;
  for (int a = 0; a < 3; ++a) {
    double lo = s.center[a] - s.half_extents[a];
    double hi = s.center[a] + s.half_extents[a];
    if (std::abs(d[a]) < 1e-15) {
      if (o[a] < lo || o[a] > hi) return std::nullopt;
      continue;
    }
    double t0 = (lo - o[a]) / d[a];
    double t1 = (hi - o[a]) / d[a];
    double sign = -1;  // entering through the low face
    if (t0 > t1) {
      std::swap(t0, t1);
      sign = 1;
    }
    if (t0 > tnear) {
      tnear = t0;
      near_axis = a;
      near_sign = sign;
    }
    if (t1 < tfar) {
      tfar = t1;
      far_axis = a;
      far_sign = -sign;
    }
    if (tnear > tfar) return std::nullopt;
  }
  double t;
  int axis;
  double sign;
  if (tnear >= kTMin) {
    t = tnear;
    axis = near_axis;
    sign = near_sign;
  } else if (tfar >= kTMin) {
    t = tfar;
    axis = far_axis;
    sign = far_sign;
  } else {
    return std::nullopt;
  }
  if (axis < 0) return std::nullopt;
  Eigen::Vector3d n = Eigen::Vector3d::Zero();
  n[axis] = sign;
  return RawHit{t, n};
}

std::optional<RawHit> hit_impl(const VCylinder& s, const Eigen::Vector3d& o,
                                   const Eigen::Vector3d& d) {
  const double z0 = s.base_center.z();
  const double z1 = z0 + s.height;
  double best_t = kInf;
  Eigen::Vector3d best_n;

  // Lateral surface: quadratic in the XY plane.
  double ox = o.x() - s.base_center.x();
  double oy = o.y() - s.base_center.y();
  double a = d.x() * d.x() + d.y() * d.y();
  if (a > 1e-15) {
    double b = ox * d.x() + oy * d.y();
    double c = ox * ox + oy * oy - s.radius * s.radius;
    double disc = b * b - a * c;
    if (disc >= 0) {
      double root = std::sqrt(disc);
      for (double t : {(-b - root) / a, (-b + root) / a}) {
        if (t < kTMin || t >= best_t) continue;
        double z = o.z() + t * d.z();
        if (z < z0 || z > z1) continue;
        Eigen::Vector3d p = o + t * d;
        best_t = t;
        best_n = Eigen::Vector3d(p.x() - s.base_center.x(), p.y() - s.base_center.y(), 0)
                     .normalized();
      }
    }
  }

  // Caps.
  if (std::abs(d.z()) > 1e-15) {
    for (auto [zc, nz] : {std::pair{z0, -1.0}, std::pair{z1, 1.0}}) {
      double t = (zc - o.z()) / d.z();
      if (t < kTMin || t >= best_t) continue;
      double px = o.x() + t * d.x() - s.base_center.x();
      double py = o.y() + t * d.y() - s.base_center.y();
      if (px * px + py * py > s.radius * s.radius) continue;
      best_t = t;
      best_n = Eigen::Vector3d(0, 0, nz);
    }
  }

  if (!std::isfinite(best_t)) return std::nullopt;
  return RawHit{best_t, best_n};
}

std::optional<RawHit> hit_shape(const Shape& shape, const Eigen::Vector3d& o,
                                const Eigen::Vector3d& d) {
  return std::visit(
      [&](const auto& s) -> std::optional<RawHit> { return hit_impl(s, o, d); },
      shape);
}

}  // namespace

void Scene::validate() const {
  std::set<int> ids;
  std::set<Rgb8> colors;
  for (const auto& obj : objects) {
    if (!ids.insert(obj.id).second) {
      throw StructureError("duplicate scene object id " + std::to_string(obj.id));
    }
    if (obj.seg_color == background) {
      throw StructureError("object " + std::to_string(obj.id) +
                           " uses the background color as its seg color");
    }
    if (!colors.insert(obj.seg_color).second) {
      throw StructureError("duplicate seg color on object " + std::to_string(obj.id));
    }
  }
}

const SceneObject* Scene::find(int id) const {
  for (const auto& obj : objects) {
    if (obj.id == id) return &obj;
  }
  return nullptr;
}

std::optional<Hit> ray_intersect(const Scene& scene, const Eigen::Vector3d& origin,
                                 const Eigen::Vector3d& dir) {
  std::optional<Hit> best;
  for (const auto& obj : scene.objects) {
    auto rh = hit_shape(obj.shape, origin, dir);
    if (!rh) continue;
    if (!best || rh->t < best->t) {
      Eigen::Vector3d n = rh->normal;
      if (n.dot(dir) > 0) n = -n;  // face the ray
      best = Hit{rh->t, obj.id, n};
    }
  }
  return best;
}

namespace {

Eigen::Vector3d pixel_dir(const CameraIntrinsics& intr, int u, int v) {
  return Eigen::Vector3d((u + 0.5 - intr.cx) / intr.fx, (v + 0.5 - intr.cy) / intr.fy,
                         1.0)
      .normalized();
}

bool occluded(const Scene& scene, const Eigen::Vector3d& point,
              const Eigen::Vector3d& normal, const Eigen::Vector3d& light_pos) {
  Eigen::Vector3d origin = point + 1e-6 * normal;
  Eigen::Vector3d to_light = light_pos - origin;
  double dist = to_light.norm();
  if (dist < 1e-9) return false;
  auto hit = ray_intersect(scene, origin, to_light / dist);
  return hit && hit->t < dist - 1e-6;
}

Eigen::Vector3d shade(const Scene& scene, const SceneObject& obj,
                      const Eigen::Vector3d& point, const Eigen::Vector3d& normal) {
  double irradiance = 0.0;
  for (const auto& light : scene.lights) {
    Eigen::Vector3d to_light = light.position - point;
    double d2 = to_light.squaredNorm();
    if (d2 < 1e-12) continue;
    double ndotl = normal.dot(to_light / std::sqrt(d2));
    if (ndotl <= 0) continue;
    if (occluded(scene, point, normal, light.position)) continue;
    irradiance += ndotl * light.intensity / d2;
  }
  return obj.albedo * irradiance;
}

template <typename PerPixel>
void for_each_pixel_parallel(int width, int height, PerPixel&& fn) {
  unsigned n_threads = std::max(1u, std::thread::hardware_concurrency());
  n_threads = std::min<unsigned>(n_threads, static_cast<unsigned>(height));
  if (n_threads <= 1) {
    for (int v = 0; v < height; ++v)
      for (int u = 0; u < width; ++u) fn(u, v);
    return;
  }
  std::vector<std::thread> workers;
  workers.reserve(n_threads);
  for (unsigned w = 0; w < n_threads; ++w) {
    workers.emplace_back([=, &fn] {
      for (int v = static_cast<int>(w); v < height; v += static_cast<int>(n_threads))
        for (int u = 0; u < width; ++u) fn(u, v);
    });
  }
  for (auto& t : workers) t.join();
}

std::uint8_t to_byte(double c) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0));
}

}  // namespace

RgbImage render_rgb(const Scene& scene, const Transformd& cam_pose,
                    const CameraIntrinsics& intr) {
  RgbImage img{intr.width, intr.height,
               std::vector<Rgb8>(static_cast<std::size_t>(intr.width) * intr.height)};
  const Eigen::Vector3d origin = cam_pose.translation();
  for_each_pixel_parallel(intr.width, intr.height, [&](int u, int v) {
    Eigen::Vector3d dir = cam_pose.rotate(pixel_dir(intr, u, v));
    auto hit = ray_intersect(scene, origin, dir);
    if (!hit) {
      img.at(u, v) = scene.background;
      return;
    }
    const SceneObject* obj = scene.find(hit->id);
    Eigen::Vector3d color = shade(scene, *obj, origin + hit->t * dir, hit->normal);
    img.at(u, v) = Rgb8{to_byte(color.x()), to_byte(color.y()), to_byte(color.z())};
  });
  return img;
}

RgbImage render_seg(const Scene& scene, const Transformd& cam_pose,
                    const CameraIntrinsics& intr) {
  RgbImage img{intr.width, intr.height,
               std::vector<Rgb8>(static_cast<std::size_t>(intr.width) * intr.height)};
  const Eigen::Vector3d origin = cam_pose.translation();
  for_each_pixel_parallel(intr.width, intr.height, [&](int u, int v) {
    Eigen::Vector3d dir = cam_pose.rotate(pixel_dir(intr, u, v));
    auto hit = ray_intersect(scene, origin, dir);
    img.at(u, v) = hit ? scene.find(hit->id)->seg_color : scene.background;
  });
  return img;
}

DepthImage render_depth(const Scene& scene, const Transformd& cam_pose,
                        const CameraIntrinsics& intr, DepthConvention convention) {
  DepthImage img{intr.width, intr.height,
                 std::vector<float>(static_cast<std::size_t>(intr.width) * intr.height,
                                    std::numeric_limits<float>::infinity())};
  const Eigen::Vector3d origin = cam_pose.translation();
  for_each_pixel_parallel(intr.width, intr.height, [&](int u, int v) {
    Eigen::Vector3d dir_cam = pixel_dir(intr, u, v);
    Eigen::Vector3d dir = cam_pose.rotate(dir_cam);
    auto hit = ray_intersect(scene, origin, dir);
    if (!hit) return;
    double depth =
        convention == DepthConvention::planar_z ? hit->t * dir_cam.z() : hit->t;
    img.at(u, v) = static_cast<float>(depth);
  });
  return img;
}

std::vector<Eigen::Vector3d> depth_to_pointcloud(const DepthImage& depth,
                                                 const CameraIntrinsics& intr,
                                                 const Transformd& cam_pose) {
  std::vector<Eigen::Vector3d> points;
  points.reserve(depth.values.size());
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      float z = depth.at(u, v);
      if (!std::isfinite(z)) continue;
      Eigen::Vector3d p_cam((u - intr.cx) * z / intr.fx, (v - intr.cy) * z / intr.fy, z);
      points.push_back(cam_pose * p_cam);
    }
  }
  return points;
}

Scene default_scene(const SceneParams& p) {
  Scene scene;
  auto add = [&scene](int id, std::string name, Shape shape, Eigen::Vector3d albedo,
                      Rgb8 seg) {
    scene.objects.push_back({id, std::move(name), std::move(shape), albedo, seg});
  };

  add(1, "floor", Plane{Eigen::Vector3d::UnitZ(), 0.0}, {0.45, 0.45, 0.48},
      Rgb8{64, 64, 64});
  add(2, "table",
      Box{{0, 0, p.table_height / 2},
          {p.table_half_x, p.table_half_y, p.table_height / 2}},
      {0.55, 0.38, 0.22}, Rgb8{128, 96, 32});
  add(3, "pot", VCylinder{{0, 0, p.table_height}, p.pot_radius, p.pot_height},
      {0.65, 0.3, 0.2}, Rgb8{192, 64, 64});

  // Plant: a fixed rosette of leaf spheres above the pot.
  const double golden = 2.399963229728653;  // radians between successive leaves
  for (int i = 0; i < p.plant_spheres; ++i) {
    double frac = p.plant_spheres > 1
                      ? static_cast<double>(i) / (p.plant_spheres - 1)
                      : 0.0;
    double angle = golden * i;
    double rad = i == 0 ? 0.0 : p.plant_spread * (0.4 + 0.6 * frac);
    Eigen::Vector3d center(rad * std::cos(angle), rad * std::sin(angle),
                           p.plant_center_z + 0.10 * (i == 0 ? 1.2 : frac));
    double r = 0.055 - 0.003 * i;
    add(10 + i, "leaf_" + std::to_string(i), Sphere{center, r}, {0.12, 0.5, 0.15},
        Rgb8{static_cast<std::uint8_t>(32 + 24 * i), 200,
             static_cast<std::uint8_t>(32 + 16 * i)});
  }

  add(30, "stand_1",
      Box{{p.stand_x, 0, p.stand_height / 2},
          {p.stand_half, p.stand_half, p.stand_height / 2}},
      {0.35, 0.35, 0.4}, Rgb8{0, 64, 192});
  add(31, "stand_2",
      Box{{-p.stand_x, 0, p.stand_height / 2},
          {p.stand_half, p.stand_half, p.stand_height / 2}},
      {0.35, 0.35, 0.4}, Rgb8{0, 128, 255});

  // Two ceiling lights for the room, two stand lights aimed at the plant.
  scene.lights.push_back({{1.2, 1.2, 2.6}, p.light_intensity * 2.0});
  scene.lights.push_back({{-1.2, -1.2, 2.6}, p.light_intensity * 2.0});
  scene.lights.push_back({{p.stand_x, 0.3, 1.6}, p.light_intensity});
  scene.lights.push_back({{-p.stand_x, -0.3, 1.6}, p.light_intensity});

  scene.validate();
  return scene;
}

}  // namespace twinlink::scenecam
