#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "twinlink/transform.hpp"

namespace twinlink::scenecam {

struct Rgb8 {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb8&) const = default;
  auto operator<=>(const Rgb8&) const = default;
};

/// Infinite plane n.p = offset, n unit.
struct Plane {
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  double offset = 0.0;
};

/// Axis-aligned box.
struct Box {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d half_extents = Eigen::Vector3d::Ones();
};

/// Capped cylinder along +Z starting at base_center.
struct VCylinder {
  Eigen::Vector3d base_center = Eigen::Vector3d::Zero();
  double radius = 1.0;
  double height = 1.0;
};

struct Sphere {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double radius = 1.0;
};

using Shape = std::variant<Plane, Box, VCylinder, Sphere>;

struct SceneObject {
  int id = 0;
  std::string name;
  Shape shape;
  Eigen::Vector3d albedo = Eigen::Vector3d::Ones();  // [0,1] RGB
  Rgb8 seg_color;
};

struct PointLight {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  double intensity = 1.0;  // radiance scale, falls off as 1/d^2
};

struct Scene {
  std::vector<SceneObject> objects;
  std::vector<PointLight> lights;
  Rgb8 background{0, 0, 0};

  /// Throws StructureError on duplicate ids / seg colors or a seg color equal
  /// to the background.
  void validate() const;
  const SceneObject* find(int id) const;
};

struct Hit {
  double t = 0.0;
  int id = 0;
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();  // flipped to face the ray
};

/// Nearest intersection along origin + t*dir for t >= 1e-6; dir unit.
std::optional<Hit> ray_intersect(const Scene& scene, const Eigen::Vector3d& origin,
                                 const Eigen::Vector3d& dir);

struct CameraIntrinsics {
  int width = 1920;
  int height = 1080;
  double fx = 1380.0;
  double fy = 1380.0;
  double cx = 960.0;
  double cy = 540.0;
};

struct RgbImage {
  int width = 0, height = 0;
  std::vector<Rgb8> pixels;  // row-major, top row first

  Rgb8& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  const Rgb8& at(int x, int y) const {
    return pixels[static_cast<std::size_t>(y) * width + x];
  }
};

/// Planar depth (camera-space Z of the hit) in meters; +inf where no hit.
struct DepthImage {
  int width = 0, height = 0;
  std::vector<float> values;

  float& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  float at(int x, int y) const {
    return values[static_cast<std::size_t>(y) * width + x];
  }
};

enum class RenderMode { rgb, seg, depth };

enum class DepthConvention {
  planar_z,    // camera-space Z of the hit point
  ray_length,  // Euclidean distance along the ray
};

/// Camera convention: +Z forward, +X right, +Y down (image v grows with +Y).
/// One primary ray per pixel through (u+0.5, v+0.5). Rendering is
/// deterministic; rows are computed in parallel.
RgbImage render_rgb(const Scene& scene, const Transformd& cam_pose,
                    const CameraIntrinsics& intr);
RgbImage render_seg(const Scene& scene, const Transformd& cam_pose,
                    const CameraIntrinsics& intr);
DepthImage render_depth(const Scene& scene, const Transformd& cam_pose,
                        const CameraIntrinsics& intr,
                        DepthConvention convention = DepthConvention::planar_z);

/// Unprojects finite depth pixels: p_cam = ((u-cx)z/fx, (v-cy)z/fy, z), then
/// maps to world. Projecting a returned point back lands within 0.5 px of its
/// source pixel.
std::vector<Eigen::Vector3d> depth_to_pointcloud(const DepthImage& depth,
                                                 const CameraIntrinsics& intr,
                                                 const Transformd& cam_pose);

/// Desk-scale stand-in for the capture room: floor, table, plant pot cylinder,
/// plant spheres, two robot stands, four lights.
struct SceneParams {
  double table_half_x = 0.35;
  double table_half_y = 0.35;
  double table_height = 0.65;
  double pot_radius = 0.15;
  double pot_height = 0.30;
  double stand_x = 0.90;           // stands at (+/-stand_x, 0)
  double stand_half = 0.15;
  double stand_height = 0.70;
  int plant_spheres = 7;
  double plant_center_z = 1.10;
  double plant_spread = 0.13;
  double light_intensity = 2.0;
};

Scene default_scene(const SceneParams& params = {});

}  // namespace twinlink::scenecam
