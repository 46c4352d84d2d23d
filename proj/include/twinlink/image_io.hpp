#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "twinlink/scene.hpp"

namespace twinlink::scenecam {

/// Binary PPM (P6, maxval 255). Read-back is bit exact.
void write_ppm(const RgbImage& image, const std::string& path);
RgbImage read_ppm(const std::string& path);

/// PFM ("Pf", scale line "-1.0" = little endian, rows bottom-up).
/// Read-back is bit exact, including +inf no-hit pixels.
void write_pfm(const DepthImage& depth, const std::string& path);
DepthImage read_pfm(const std::string& path);

/// ASCII PLY with float x,y,z vertices (9 significant digits).
void write_ply(const std::vector<Eigen::Vector3d>& points, const std::string& path);
std::vector<Eigen::Vector3d> read_ply(const std::string& path);

}  // namespace twinlink::scenecam
