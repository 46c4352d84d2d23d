#include "twinlink/image_io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "twinlink/errors.hpp"

namespace twinlink::scenecam {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return in;
}

}  // namespace

void write_ppm(const RgbImage& image, const std::string& path) {
  auto out = open_out(path);
  out << "P6\n" << image.width << " " << image.height << "\n255\n";
  static_assert(sizeof(Rgb8) == 3);
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size() * 3));
  if (!out) throw IoError("short write to '" + path + "'");
}

RgbImage read_ppm(const std::string& path) {
  auto in = open_in(path);
  std::string magic;
  int width = 0, height = 0, maxval = 0;
  in >> magic >> width >> height >> maxval;
  if (magic != "P6" || width <= 0 || height <= 0 || maxval != 255) {
    throw ParseError("'" + path + "' is not a maxval-255 binary PPM");
  }
  in.get();  // single whitespace after header
  RgbImage img{width, height,
               std::vector<Rgb8>(static_cast<std::size_t>(width) * height)};
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size() * 3));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size() * 3)) {
    throw ParseError("'" + path + "' is truncated");
  }
  return img;
}

void write_pfm(const DepthImage& depth, const std::string& path) {
  auto out = open_out(path);
  out << "Pf\n" << depth.width << " " << depth.height << "\n-1.0\n";
  for (int y = depth.height - 1; y >= 0; --y) {
    out.write(reinterpret_cast<const char*>(&depth.values[static_cast<std::size_t>(y) *
                                                          depth.width]),
              static_cast<std::streamsize>(depth.width * sizeof(float)));
  }
  if (!out) throw IoError("short write to '" + path + "'");
}

DepthImage read_pfm(const std::string& path) {
  auto in = open_in(path);
  std::string magic;
  int width = 0, height = 0;
  double scale = 0.0;
  in >> magic >> width >> height >> scale;
  if (magic != "Pf" || width <= 0 || height <= 0 || scale >= 0) {
    throw ParseError("'" + path + "' is not a little-endian grayscale PFM");
  }
  in.get();
  DepthImage img{width, height,
                 std::vector<float>(static_cast<std::size_t>(width) * height)};
  for (int y = height - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(&img.values[static_cast<std::size_t>(y) * width]),
            static_cast<std::streamsize>(width * sizeof(float)));
  }
  if (!in) throw ParseError("'" + path + "' is truncated");
  return img;
}

void write_ply(const std::vector<Eigen::Vector3d>& points, const std::string& path) {
  auto out = open_out(path);
  out << "ply\nformat ascii 1.0\n";
  out << "element vertex " << points.size() << "\n";
  out << "property float x\nproperty float y\nproperty float z\n";
  out << "end_header\n";
  char line[128];
  for (const auto& p : points) {
    std::snprintf(line, sizeof(line), "%.9g %.9g %.9g\n", p.x(), p.y(), p.z());
    out << line;
  }
  if (!out) throw IoError("short write to '" + path + "'");
}

std::vector<Eigen::Vector3d> read_ply(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  std::size_t count = 0;
  bool header_done = false;
  while (std::getline(in, line)) {
    if (line.rfind("element vertex", 0) == 0) {
      count = std::stoul(line.substr(std::strlen("element vertex ")));
    }
    if (line == "end_header") {
      header_done = true;
      break;
    }
  }
  if (!header_done) throw ParseError("'" + path + "' has no PLY header");
  std::vector<Eigen::Vector3d> points;
  points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Eigen::Vector3d p;
    if (!(in >> p.x() >> p.y() >> p.z())) {
      throw ParseError("'" + path + "' is truncated at vertex " + std::to_string(i));
    }
    points.push_back(p);
  }
  return points;
}

}  // namespace twinlink::scenecam
