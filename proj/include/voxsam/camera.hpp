#pragma once

// Pinhole geometry: voxel-center projection, field-of-view tests and
// per-voxel 2D boxes for ROI extraction.
//
// The projective map is u~ = K [R|t] P followed by division by the
// homogeneous depth; a point is in the field of view when its depth is
// positive and (u, v) lands inside [0, W) x [0, H).

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "voxsam/error.hpp"

namespace voxsam {

struct CameraModel {
  double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;  // intrinsics; K[2][2] == 1
  double R[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  double t[3] = {0, 0, 0};  // metres
  int width = 0, height = 0;

  // R must be orthonormal within 1e-9.
  void validate() const {
    require(width > 0 && height > 0, ErrorKind::ConfigError, "image size must be positive");
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        double dotp = 0.0;
        for (int k = 0; k < 3; ++k) dotp += R[k][a] * R[k][b];
        const double expect = a == b ? 1.0 : 0.0;
        require(std::abs(dotp - expect) < 1e-9, ErrorKind::ConfigError,
                "rotation is not orthonormal");
      }
    }
  }

  std::array<double, 3> to_camera(const std::array<double, 3>& p) const {
    std::array<double, 3> q{};
    for (int r = 0; r < 3; ++r)
      q[r] = R[r][0] * p[0] + R[r][1] * p[1] + R[r][2] * p[2] + t[r];
    return q;
  }

  void save_kv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    require(out.good(), ErrorKind::IoError, "cannot write camera file: " + path.string());
    out.precision(17);
    out << "fx=" << fx << "\nfy=" << fy << "\ncx=" << cx << "\ncy=" << cy << "\n";
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) out << "r" << r << c << "=" << R[r][c] << "\n";
    for (int i = 0; i < 3; ++i) out << "t" << i << "=" << t[i] << "\n";
    out << "width=" << width << "\nheight=" << height << "\n";
  }

  static CameraModel load_kv(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::IoError, "cannot read camera file: " + path.string());
    std::map<std::string, double> kv;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      const auto eq = line.find('=');
      require(eq != std::string::npos, ErrorKind::IoError, "bad camera line: " + line);
      kv[line.substr(0, eq)] = std::stod(line.substr(eq + 1));
    }
    CameraModel cam;
    cam.fx = kv.at("fx");
    cam.fy = kv.at("fy");
    cam.cx = kv.at("cx");
    cam.cy = kv.at("cy");
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        cam.R[r][c] = kv.at("r" + std::to_string(r) + std::to_string(c));
    for (int i = 0; i < 3; ++i) cam.t[i] = kv.at("t" + std::to_string(i));
    cam.width = static_cast<int>(kv.at("width"));
    cam.height = static_cast<int>(kv.at("height"));
    cam.validate();
    return cam;
  }
};

struct VoxelGridSpec {
  std::size_t nx = 0, ny = 0, nz = 0;
  double origin[3] = {0, 0, 0};
  double voxel_size = 0.2;  // metres per voxel edge

  std::size_t volume() const { return nx * ny * nz; }

  // flat index ((ix * ny) + iy) * nz + iz, matching the row-major X,Y,Z(,C)
  // layout used by all volumes.
  std::size_t flat(std::size_t ix, std::size_t iy, std::size_t iz) const {
    return (ix * ny + iy) * nz + iz;
  }

  // Voxel center: origin + (index + 0.5) * voxel_size per axis.
  std::array<double, 3> center(std::size_t ix, std::size_t iy, std::size_t iz) const {
    return {origin[0] + (static_cast<double>(ix) + 0.5) * voxel_size,
            origin[1] + (static_cast<double>(iy) + 0.5) * voxel_size,
            origin[2] + (static_cast<double>(iz) + 0.5) * voxel_size};
  }
};

struct Projection {
  double u = 0.0, v = 0.0;  // real pixels
  double depth = 0.0;       // metres along the optical axis
  bool in_fov = false;
};

constexpr double kMinProjectionDepth = 1e-9;

inline Projection project_point(const std::array<double, 3>& p, const CameraModel& cam) {
  const auto q = cam.to_camera(p);
  Projection out;
  out.depth = q[2];
  if (std::abs(q[2]) < kMinProjectionDepth) return out;  // never divide by ~0
  out.u = cam.fx * (q[0] / q[2]) + cam.cx;
  out.v = cam.fy * (q[1] / q[2]) + cam.cy;
  out.in_fov = q[2] > 0.0 && out.u >= 0.0 && out.u < cam.width && out.v >= 0.0 &&
               out.v < cam.height;
  return out;
}

inline std::vector<Projection> project(const std::vector<std::array<double, 3>>& centers,
                                       const CameraModel& cam) {
  std::vector<Projection> out(centers.size());
  for (std::size_t i = 0; i < centers.size(); ++i) out[i] = project_point(centers[i], cam);
  return out;
}

// Projections of all voxel centers in flat-index order.
inline std::vector<Projection> project_grid(const VoxelGridSpec& spec, const CameraModel& cam) {
  std::vector<Projection> out(spec.volume());
  for (std::size_t ix = 0; ix < spec.nx; ++ix)
    for (std::size_t iy = 0; iy < spec.ny; ++iy)
      for (std::size_t iz = 0; iz < spec.nz; ++iz)
        out[spec.flat(ix, iy, iz)] = project_point(spec.center(ix, iy, iz), cam);
  return out;
}

struct Box2D {
  double u_min = 0.0, v_min = 0.0, u_max = 0.0, v_max = 0.0;
  bool empty() const { return u_max <= u_min || v_max <= v_min; }
};

// Axis-aligned bounding box of the eight projected voxel corners, clipped to
// the image. Corners behind the camera are skipped; if all eight are behind,
// NoProjection is raised. Zero-area boxes are expanded to one pixel before
// clipping.
inline Box2D voxel_box(const VoxelGridSpec& spec, std::size_t ix, std::size_t iy,
                       std::size_t iz, const CameraModel& cam) {
  require(ix < spec.nx && iy < spec.ny && iz < spec.nz, ErrorKind::InvalidShape,
          "voxel index out of range");
  const auto c = spec.center(ix, iy, iz);
  const double h = 0.5 * spec.voxel_size;
  double u_min = 0, u_max = 0, v_min = 0, v_max = 0;
  int in_front = 0;
  for (int corner = 0; corner < 8; ++corner) {
    const std::array<double, 3> p = {c[0] + ((corner & 1) ? h : -h),
                                     c[1] + ((corner & 2) ? h : -h),
                                     c[2] + ((corner & 4) ? h : -h)};
    const auto q = cam.to_camera(p);
    if (q[2] < kMinProjectionDepth) continue;
    const double u = cam.fx * (q[0] / q[2]) + cam.cx;
    const double v = cam.fy * (q[1] / q[2]) + cam.cy;
    if (in_front == 0) {
      u_min = u_max = u;
      v_min = v_max = v;
    } else {
      u_min = std::min(u_min, u);
      u_max = std::max(u_max, u);
      v_min = std::min(v_min, v);
      v_max = std::max(v_max, v);
    }
    ++in_front;
  }
  if (in_front == 0)
    raise(ErrorKind::NoProjection, "all voxel corners behind the camera");
  if (u_max <= u_min) {
    u_min -= 0.5;
    u_max += 0.5;
  }
  if (v_max <= v_min) {
    v_min -= 0.5;
    v_max += 0.5;
  }
  Box2D box;
  box.u_min = std::max(u_min, 0.0);
  box.v_min = std::max(v_min, 0.0);
  box.u_max = std::min(u_max, static_cast<double>(cam.width));
  box.v_max = std::min(v_max, static_cast<double>(cam.height));
  return box;
}

}  // namespace voxsam
