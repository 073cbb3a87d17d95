#pragma once

// Synthetic-scene generation: a patchy ground slab plus randomized
// axis-aligned foreground boxes on a voxel grid, a pinhole camera looking
// down the +X axis, ground-truth depth rendered by exact voxel traversal,
// and per-class template features with additive Gaussian noise.
//
// World axes: X forward (optical axis), Y lateral, Z up. The camera sits
// behind the x=0 face at the lateral/vertical grid center; focal lengths are
// chosen so every voxel center projects inside the image.

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "voxsam/camera.hpp"
#include "voxsam/error.hpp"
#include "voxsam/labels.hpp"
#include "voxsam/lift3d.hpp"
#include "voxsam/ndarray.hpp"
#include "voxsam/rng.hpp"

namespace voxsam {

struct RunConfig {
  std::size_t grid_x = 16, grid_y = 16, grid_z = 4;
  std::size_t channels = 8;
  std::size_t heads = 2;
  std::size_t points = 2;
  double dropout_p = 0.2;
  double learning_rate = 0.1;
  std::size_t steps = 200;
  std::uint64_t seed = 1;
  double feature_noise = 0.1;
  std::size_t class_count = 6;
  std::size_t image_width = 64, image_height = 32;
  std::size_t token_dim = 8;
  double voxel_size = 0.25;
  double occupancy = 0.07;
  std::size_t depth_bins = 0;  // 0 => grid_x
  bool tgif_layer_norm = true;

  void validate() const {
    require(grid_x > 0 && grid_y > 0 && grid_z > 0, ErrorKind::ConfigError,
            "grid dims must be positive");
    require(class_count >= 3, ErrorKind::ConfigError,
            "need empty + ground + at least one foreground class");
    require(dropout_p >= 0.0 && dropout_p <= 1.0, ErrorKind::ConfigError,
            "dropout_p must be in [0,1]");
    require(image_width >= 2 && image_height >= 2, ErrorKind::ConfigError,
            "image must be at least 2x2");
  }

  std::size_t bins() const { return depth_bins ? depth_bins : grid_x; }

  void save_kv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    require(out.good(), ErrorKind::IoError, "cannot write config: " + path.string());
    out.precision(17);
    out << "grid_x=" << grid_x << "\ngrid_y=" << grid_y << "\ngrid_z=" << grid_z
        << "\nchannels=" << channels << "\nheads=" << heads << "\npoints=" << points
        << "\ndropout_p=" << dropout_p << "\nlearning_rate=" << learning_rate
        << "\nsteps=" << steps << "\nseed=" << seed
        << "\nfeature_noise=" << feature_noise << "\nclass_count=" << class_count
        << "\nimage_width=" << image_width << "\nimage_height=" << image_height
        << "\ntoken_dim=" << token_dim << "\nvoxel_size=" << voxel_size
        << "\noccupancy=" << occupancy << "\ndepth_bins=" << depth_bins
        << "\ntgif_layer_norm=" << (tgif_layer_norm ? 1 : 0) << "\n";
  }

  static RunConfig load_kv(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::IoError, "cannot read config: " + path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      const auto eq = line.find('=');
      require(eq != std::string::npos, ErrorKind::ConfigError, "bad config line: " + line);
      kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    RunConfig c;
    auto num = [&](const char* key, double dflt) {
      auto it = kv.find(key);
      return it == kv.end() ? dflt : std::stod(it->second);
    };
    c.grid_x = static_cast<std::size_t>(num("grid_x", c.grid_x));
    c.grid_y = static_cast<std::size_t>(num("grid_y", c.grid_y));
    c.grid_z = static_cast<std::size_t>(num("grid_z", c.grid_z));
    c.channels = static_cast<std::size_t>(num("channels", c.channels));
    c.heads = static_cast<std::size_t>(num("heads", c.heads));
    c.points = static_cast<std::size_t>(num("points", c.points));
    c.dropout_p = num("dropout_p", c.dropout_p);
    c.learning_rate = num("learning_rate", c.learning_rate);
    c.steps = static_cast<std::size_t>(num("steps", c.steps));
    c.seed = static_cast<std::uint64_t>(num("seed", static_cast<double>(c.seed)));
    c.feature_noise = num("feature_noise", c.feature_noise);
    c.class_count = static_cast<std::size_t>(num("class_count", c.class_count));
    c.image_width = static_cast<std::size_t>(num("image_width", c.image_width));
    c.image_height = static_cast<std::size_t>(num("image_height", c.image_height));
    c.token_dim = static_cast<std::size_t>(num("token_dim", c.token_dim));
    c.voxel_size = num("voxel_size", c.voxel_size);
    c.occupancy = num("occupancy", c.occupancy);
    c.depth_bins = static_cast<std::size_t>(num("depth_bins", c.depth_bins));
    c.tgif_layer_norm = num("tgif_layer_norm", 1) != 0;
    c.validate();
    return c;
  }
};

// Class 0 empty, class 1 the background ground slab, the rest foreground.
inline ClassTable make_class_table(std::size_t class_count) {
  static const char* kForegroundNames[] = {"car",  "person", "pole",    "truck",
                                           "sign", "cyclist", "bicycle", "trunk"};
  ClassTable t;
  t.classes.push_back({"empty", false});
  t.classes.push_back({"ground", false});
  for (std::size_t i = 2; i < class_count; ++i) {
    const std::size_t fi = i - 2;
    std::string name = fi < std::size(kForegroundNames)
                           ? kForegroundNames[fi]
                           : "object" + std::to_string(fi);
    t.classes.push_back({name, true});
  }
  return t;
}

struct SyntheticScene {
  VoxelGridSpec spec;
  LabelGrid labels;
  CameraModel cam;
  NdArray depth;     // H x W metres along the optical axis; 0 = no hit
  NdArray features;  // H x W x C
  DepthBins bins;
};

inline CameraModel make_scene_camera(const VoxelGridSpec& spec, std::size_t width,
                                     std::size_t height) {
  const double x_ext = static_cast<double>(spec.nx) * spec.voxel_size;
  const double y_ext = static_cast<double>(spec.ny) * spec.voxel_size;
  const double z_ext = static_cast<double>(spec.nz) * spec.voxel_size;
  const double standoff = std::max(y_ext, x_ext) * 0.75;

  CameraModel cam;
  cam.width = static_cast<int>(width);
  cam.height = static_cast<int>(height);
  cam.cx = static_cast<double>(width) / 2.0;
  cam.cy = static_cast<double>(height) / 2.0;
  // Nearest voxel centers must land strictly inside the image.
  const double near_depth = standoff + 0.5 * spec.voxel_size;
  const double half_y = std::max((y_ext - spec.voxel_size) / 2.0, 1e-6);
  const double half_z = std::max((z_ext - spec.voxel_size) / 2.0, 1e-6);
  cam.fx = 0.95 * (static_cast<double>(width) / 2.0 - 1.0) * near_depth / half_y;
  cam.fy = 0.95 * (static_cast<double>(height) / 2.0 - 1.0) * near_depth / half_z;

  // cam x = -Y (right), cam y = -Z (down), cam z = +X (forward)
  const double R[3][3] = {{0, -1, 0}, {0, 0, -1}, {1, 0, 0}};
  const double eye[3] = {spec.origin[0] - standoff, spec.origin[1] + y_ext / 2.0,
                         spec.origin[2] + z_ext / 2.0};
  for (int r = 0; r < 3; ++r) {
    double acc = 0.0;
    for (int c = 0; c < 3; ++c) {
      cam.R[r][c] = R[r][c];
      acc += R[r][c] * eye[c];
    }
    cam.t[r] = -acc;
  }
  cam.validate();
  return cam;
}

// Exact voxel traversal (Amanatides-Woo). Returns the ray parameter at which
// the ray enters the first occupied voxel, or 0 when nothing is hit. With an
// unnormalized direction whose camera-frame z component is 1, the parameter
// equals the depth along the optical axis. hit_class, when non-null, receives
// the class of the hit voxel (0 on miss).
inline double raycast_depth(const LabelGrid& labels, const VoxelGridSpec& spec,
                            const std::array<double, 3>& origin,
                            const std::array<double, 3>& dir,
                            std::uint32_t* hit_class = nullptr) {
  if (hit_class) *hit_class = 0;
  const double ext[3] = {static_cast<double>(spec.nx) * spec.voxel_size,
                         static_cast<double>(spec.ny) * spec.voxel_size,
                         static_cast<double>(spec.nz) * spec.voxel_size};
  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double lo = spec.origin[a], hi = spec.origin[a] + ext[a];
    if (std::abs(dir[a]) < 1e-12) {
      if (origin[a] < lo || origin[a] >= hi) return 0.0;
      continue;
    }
    double ta = (lo - origin[a]) / dir[a];
    double tb = (hi - origin[a]) / dir[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t1 <= t0) return 0.0;

  const double eps = 1e-9;
  double t = t0 + eps;
  std::ptrdiff_t idx[3], step[3], dims[3] = {static_cast<std::ptrdiff_t>(spec.nx),
                                             static_cast<std::ptrdiff_t>(spec.ny),
                                             static_cast<std::ptrdiff_t>(spec.nz)};
  double t_max[3], t_delta[3];
  for (int a = 0; a < 3; ++a) {
    const double pos = origin[a] + t * dir[a];
    idx[a] = static_cast<std::ptrdiff_t>(std::floor((pos - spec.origin[a]) / spec.voxel_size));
    idx[a] = std::clamp<std::ptrdiff_t>(idx[a], 0, dims[a] - 1);
    if (dir[a] > 0) {
      step[a] = 1;
      const double next = spec.origin[a] + (static_cast<double>(idx[a] + 1)) * spec.voxel_size;
      t_max[a] = (next - origin[a]) / dir[a];
      t_delta[a] = spec.voxel_size / dir[a];
    } else if (dir[a] < 0) {
      step[a] = -1;
      const double next = spec.origin[a] + static_cast<double>(idx[a]) * spec.voxel_size;
      t_max[a] = (next - origin[a]) / dir[a];
      t_delta[a] = -spec.voxel_size / dir[a];
    } else {
      step[a] = 0;
      t_max[a] = std::numeric_limits<double>::infinity();
      t_delta[a] = std::numeric_limits<double>::infinity();
    }
  }

  double t_enter = t0;
  while (true) {
    const std::uint32_t cls = labels.at(static_cast<std::size_t>(idx[0]),
                                        static_cast<std::size_t>(idx[1]),
                                        static_cast<std::size_t>(idx[2]));
    if (cls != 0) {
      if (hit_class) *hit_class = cls;
      return t_enter;
    }
    int axis = 0;
    if (t_max[1] < t_max[axis]) axis = 1;
    if (t_max[2] < t_max[axis]) axis = 2;
    t_enter = t_max[axis];
    if (t_enter >= t1) return 0.0;
    idx[axis] += step[axis];
    if (idx[axis] < 0 || idx[axis] >= dims[axis]) return 0.0;
    t_max[axis] += t_delta[axis];
  }
}

// Deterministic per-class feature templates derived from the run seed only,
// so every scene of a run shares them.
inline NdArray class_templates(std::uint64_t seed, std::size_t class_count,
                               std::size_t channels) {
  NdArray t({class_count, channels});
  for (std::size_t k = 0; k < class_count; ++k) {
    RngStream rng = RngStream(seed).split(0xC1A550000 + k);
    for (std::size_t c = 0; c < channels; ++c) t(k, c) = rng.normal();
  }
  return t;
}

inline SyntheticScene gen_scene(const RunConfig& cfg, RngStream& rng) {
  cfg.validate();
  SyntheticScene s;
  s.spec.nx = cfg.grid_x;
  s.spec.ny = cfg.grid_y;
  s.spec.nz = cfg.grid_z;
  s.spec.voxel_size = cfg.voxel_size;

  s.labels.nx = cfg.grid_x;
  s.labels.ny = cfg.grid_y;
  s.labels.nz = cfg.grid_z;
  s.labels.table = make_class_table(cfg.class_count);
  s.labels.labels.assign(s.labels.volume(), 0);

  // Occupancy budget: roughly 60% ground, 40% boxes.
  RngStream ground_rng = rng.split(1);
  const double q = std::clamp(0.6 * cfg.occupancy * static_cast<double>(cfg.grid_z), 0.0, 1.0);
  for (std::size_t x = 0; x < cfg.grid_x; ++x)
    for (std::size_t y = 0; y < cfg.grid_y; ++y)
      if (ground_rng.uniform() < q) s.labels.at(x, y, 0) = 1;

  RngStream box_rng = rng.split(2);
  const double box_budget = 0.4 * cfg.occupancy * static_cast<double>(s.labels.volume());
  const std::size_t n_boxes =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(box_budget / 8.0)));
  for (std::size_t b = 0; b < n_boxes; ++b) {
    const std::uint32_t cls =
        2 + static_cast<std::uint32_t>(box_rng.uniform_index(cfg.class_count - 2));
    const std::size_t sx = 1 + box_rng.uniform_index(std::min<std::size_t>(3, cfg.grid_x));
    const std::size_t sy = 1 + box_rng.uniform_index(std::min<std::size_t>(3, cfg.grid_y));
    const std::size_t sz =
        1 + box_rng.uniform_index(std::min<std::size_t>(2, std::max<std::size_t>(cfg.grid_z - 1, 1)));
    const std::size_t px = box_rng.uniform_index(cfg.grid_x - sx + 1);
    const std::size_t py = box_rng.uniform_index(cfg.grid_y - sy + 1);
    const std::size_t pz = cfg.grid_z > 1 ? 1 : 0;
    for (std::size_t x = px; x < px + sx; ++x)
      for (std::size_t y = py; y < py + sy; ++y)
        for (std::size_t z = pz; z < std::min(pz + sz, cfg.grid_z); ++z)
          s.labels.at(x, y, z) = cls;
  }

  s.cam = make_scene_camera(s.spec, cfg.image_width, cfg.image_height);
  const double x_ext = static_cast<double>(s.spec.nx) * s.spec.voxel_size;
  // eye world position: R^T * (-t)
  std::array<double, 3> eye{};
  for (int a = 0; a < 3; ++a)
    eye[a] = -(s.cam.R[0][a] * s.cam.t[0] + s.cam.R[1][a] * s.cam.t[1] +
               s.cam.R[2][a] * s.cam.t[2]);
  s.bins.d_min = s.spec.origin[0] - eye[0];
  s.bins.d_max = s.bins.d_min + x_ext;
  s.bins.count = cfg.bins();

  // Depth + front-class maps via exact traversal.
  const std::size_t H = cfg.image_height, W = cfg.image_width;
  s.depth = NdArray({H, W});
  std::vector<std::uint32_t> front(H * W, 0);
  for (std::size_t r = 0; r < H; ++r) {
    for (std::size_t c = 0; c < W; ++c) {
      const double u = static_cast<double>(c), v = static_cast<double>(r);
      const std::array<double, 3> dir_cam = {(u - s.cam.cx) / s.cam.fx,
                                             (v - s.cam.cy) / s.cam.fy, 1.0};
      std::array<double, 3> dir{};
      for (int a = 0; a < 3; ++a)
        dir[a] = s.cam.R[0][a] * dir_cam[0] + s.cam.R[1][a] * dir_cam[1] +
                 s.cam.R[2][a] * dir_cam[2];
      std::uint32_t cls = 0;
      s.depth(r, c) = raycast_depth(s.labels, s.spec, eye, dir, &cls);
      front[r * W + c] = cls;
    }
  }

  // Template features for the front-surface class plus Gaussian noise.
  const NdArray tmpl = class_templates(cfg.seed, cfg.class_count, cfg.channels);
  RngStream noise_rng = rng.split(3);
  s.features = NdArray({H, W, cfg.channels});
  for (std::size_t p = 0; p < H * W; ++p) {
    const std::uint32_t k = front[p];
    for (std::size_t c = 0; c < cfg.channels; ++c)
      s.features[p * cfg.channels + c] = tmpl(k, c) + cfg.feature_noise * noise_rng.normal();
  }
  return s;
}

// ---------------------------------------------------------------------------
// Scene persistence: one directory with VXG1 grids, the camera text file and
// a JSON sidecar for the class table and grid/bin metadata.

inline void save_scene(const SyntheticScene& s, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  s.labels.to_ndarray().save(dir / "labels.vxg");
  s.depth.save(dir / "depth.vxg");
  s.features.save(dir / "features.vxg");
  s.cam.save_kv(dir / "camera.txt");
  nlohmann::json j;
  j["voxel_size"] = s.spec.voxel_size;
  j["origin"] = {s.spec.origin[0], s.spec.origin[1], s.spec.origin[2]};
  j["depth_bins"] = {{"d_min", s.bins.d_min}, {"d_max", s.bins.d_max}, {"count", s.bins.count}};
  nlohmann::json cls = nlohmann::json::array();
  for (const auto& c : s.labels.table.classes)
    cls.push_back({{"name", c.name}, {"foreground", c.foreground}});
  j["classes"] = cls;
  j["occupied_fraction"] =
      static_cast<double>(s.labels.occupied_count()) / static_cast<double>(s.labels.volume());
  std::ofstream out(dir / "scene.json");
  require(out.good(), ErrorKind::IoError, "cannot write scene.json");
  out << j.dump(2) << "\n";
}

inline SyntheticScene load_scene(const std::filesystem::path& dir) {
  SyntheticScene s;
  std::ifstream in(dir / "scene.json");
  require(in.good(), ErrorKind::IoError, "cannot read scene.json in " + dir.string());
  nlohmann::json j;
  in >> j;
  ClassTable table;
  for (const auto& c : j.at("classes"))
    table.classes.push_back({c.at("name").get<std::string>(), c.at("foreground").get<bool>()});
  const NdArray lab = NdArray::load(dir / "labels.vxg");
  s.labels = LabelGrid::from_ndarray(lab, table);
  s.depth = NdArray::load(dir / "depth.vxg");
  s.features = NdArray::load(dir / "features.vxg");
  s.cam = CameraModel::load_kv(dir / "camera.txt");
  s.spec.nx = s.labels.nx;
  s.spec.ny = s.labels.ny;
  s.spec.nz = s.labels.nz;
  s.spec.voxel_size = j.at("voxel_size").get<double>();
  const auto& o = j.at("origin");
  s.spec.origin[0] = o[0].get<double>();
  s.spec.origin[1] = o[1].get<double>();
  s.spec.origin[2] = o[2].get<double>();
  const auto& b = j.at("depth_bins");
  s.bins.d_min = b.at("d_min").get<double>();
  s.bins.d_max = b.at("d_max").get<double>();
  s.bins.count = b.at("count").get<std::size_t>();
  return s;
}

}  // namespace voxsam
