#include <catch2/catch_amalgamated.hpp>

#include "voxsam/lift3d.hpp"
#include "voxsam/scene.hpp"

using namespace voxsam;

namespace {

NdArray random_map(RngStream& rng, std::size_t h, std::size_t w, std::size_t c) {
  NdArray f({h, w, c});
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = rng.normal();
  return f;
}

}  // namespace

TEST_CASE("depth volume from truth is a normalized triangular kernel") {
  NdArray depth({2, 2});
  const DepthBins bins{0.0, 8.0, 8};  // bin width 1, centers 0.5..7.5
  depth(0, 0) = 3.5;   // exactly the center of bin 3
  depth(0, 1) = 3.75;  // between bins 3 and 4
  depth(1, 0) = 0.0;   // no hit -> uniform
  depth(1, 1) = 55.0;  // out of range -> uniform
  const DepthVolume dv = DepthVolume::from_truth(depth, bins);
  dv.validate();

  REQUIRE(dv.w(0, 0, 3) == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(dv.w(0, 1, 3) == Catch::Approx(0.75).margin(1e-12));
  REQUIRE(dv.w(0, 1, 4) == Catch::Approx(0.25).margin(1e-12));
  for (std::size_t b = 0; b < 8; ++b) {
    REQUIRE(dv.w(1, 0, b) == Catch::Approx(0.125).margin(1e-15));
    REQUIRE(dv.w(1, 1, b) == Catch::Approx(0.125).margin(1e-15));
  }
}

TEST_CASE("depth_weight hits one-hot bins, uniform mass, and range bounds") {
  const DepthBins bins{0.0, 8.0, 8};
  SECTION("one-hot bin at the exact depth gives 1") {
    NdArray depth({1, 1});
    depth(0, 0) = 4.5;  // center of bin 4
    const DepthVolume dv = DepthVolume::from_truth(depth, bins);
    Projection p;
    p.u = 0;
    p.v = 0;
    p.depth = 4.5;
    p.in_fov = true;
    REQUIRE(depth_weight(p, dv) == Catch::Approx(1.0).margin(1e-12));
  }
  SECTION("uniform distribution gives 1/D; outside range gives 0") {
    NdArray depth({1, 1});  // zero depth -> uniform
    const DepthVolume dv = DepthVolume::from_truth(depth, bins);
    Projection p;
    p.u = 0;
    p.v = 0;
    p.in_fov = true;
    p.depth = 3.1;
    REQUIRE(depth_weight(p, dv) == Catch::Approx(1.0 / 8.0).margin(1e-12));
    p.depth = 9.5;
    REQUIRE(depth_weight(p, dv) == 0.0);
    p.depth = -1.0;
    REQUIRE(depth_weight(p, dv) == 0.0);
  }
}

TEST_CASE("depth mass along a ray is conserved up to interpolation") {
  // samples spaced exactly one bin apart cover each bin's mass at most once
  const DepthBins bins{0.0, 16.0, 16};
  RngStream rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    NdArray depth({1, 1});
    depth(0, 0) = rng.uniform(2.0, 14.0);
    const DepthVolume dv = DepthVolume::from_truth(depth, bins);
    const double phase = rng.uniform(0.0, 1.0);
    double sum = 0.0;
    for (int k = 0; k < 16; ++k) {
      Projection p;
      p.u = 0;
      p.v = 0;
      p.in_fov = true;
      p.depth = phase + static_cast<double>(k);
      if (p.depth > bins.d_max) break;
      sum += depth_weight(p, dv);
    }
    REQUIRE(sum <= 1.0 + 16 * 1e-12);
  }
}

TEST_CASE("roi_pool averages constants, honors degenerate boxes and misses") {
  RngStream rng(3);
  SECTION("constant map pools to the constant") {
    NdArray f({6, 5, 3});
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = 2.25;
    Box2D box{0.7, 1.2, 3.9, 4.4};
    std::vector<double> out(3);
    REQUIRE(roi_pool(f, box, out));
    for (double v : out) REQUIRE(v == Catch::Approx(2.25).margin(1e-12));
  }
  SECTION("degenerate box at an integer pixel samples exactly that pixel") {
    const NdArray f = random_map(rng, 6, 5, 3);
    Box2D box{2.0, 3.0, 2.0, 3.0};  // u=2, v=3
    std::vector<double> out(3);
    REQUIRE(roi_pool(f, box, out));
    for (std::size_t c = 0; c < 3; ++c) REQUIRE(out[c] == f(3, 2, c));
  }
  SECTION("empty intersection returns the zero vector with a false flag") {
    const NdArray f = random_map(rng, 6, 5, 3);
    Box2D box{10.0, 10.0, 12.0, 12.0};
    std::vector<double> out(3, 99.0);
    REQUIRE_FALSE(roi_pool(f, box, out));
    for (double v : out) REQUIRE(v == 0.0);
  }
}

TEST_CASE("roi_pool matches a dense-sampling oracle") {
  // random affine ramp plus noise: rough enough to exercise interpolation,
  // smooth enough that a 2x2 sub-grid is a faithful estimator of the mean
  RngStream rng(11);
  NdArray f({8, 7, 2});
  for (std::size_t ch = 0; ch < 2; ++ch) {
    const double a = rng.normal(), br = 0.4 * rng.normal(), bc = 0.4 * rng.normal();
    for (std::size_t r = 0; r < 8; ++r)
      for (std::size_t c = 0; c < 7; ++c)
        f(r, c, ch) = a + br * static_cast<double>(r) + bc * static_cast<double>(c) +
                      0.02 * rng.normal();
  }
  double fstd = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) fstd += f[i] * f[i];
  fstd = std::sqrt(fstd / static_cast<double>(f.size()));

  for (int trial = 0; trial < 10; ++trial) {
    Box2D box;
    box.u_min = rng.uniform(0.0, 3.0);
    box.v_min = rng.uniform(0.0, 4.0);
    box.u_max = box.u_min + rng.uniform(0.5, 3.0);
    box.v_max = box.v_min + rng.uniform(0.5, 3.0);
    std::vector<double> pooled(2);
    REQUIRE(roi_pool(f, box, pooled));

    // dense average of bilinear samples over the box interior
    const int N = 100;  // 100x100 grid = 1e4 sample points
    std::vector<double> acc(2, 0.0), tmp(2);
    for (int a = 0; a < N; ++a)
      for (int b = 0; b < N; ++b) {
        const double u = box.u_min + (a + 0.5) / N * (box.u_max - box.u_min);
        const double v = box.v_min + (b + 0.5) / N * (box.v_max - box.v_min);
        bilinear_sample(f, u, v, tmp);
        acc[0] += tmp[0];
        acc[1] += tmp[1];
      }
    for (std::size_t c = 0; c < 2; ++c) {
      acc[c] /= N * N;
      REQUIRE(std::abs(pooled[c] - acc[c]) < 0.05 * fstd);
    }
  }
}

TEST_CASE("lift is depth-gated, fov-masked and linear in the feature map") {
  VoxelGridSpec spec;
  spec.nx = 4;
  spec.ny = 4;
  spec.nz = 2;
  spec.voxel_size = 0.25;
  const CameraModel cam = make_scene_camera(spec, 8, 6);
  const auto proj = project_grid(spec, cam);

  ParameterStore store;
  RngStream rng(5);
  LiftParams params = LiftParams::create(store, 3, rng);
  init_normal(*params.proj, rng, 0.3);

  const NdArray f = random_map(rng, 6, 8, 3);

  SECTION("uniform depth volume lifts every in-fov voxel") {
    NdArray depth({6, 8});
    const DepthVolume dvol = DepthVolume::from_truth(depth, {0.0, 4.0, 8});
    const FeatureVolume vol = lift(f, spec, cam, dvol, params, proj);
    for (std::size_t v = 0; v < vol.valid.size(); ++v)
      REQUIRE(static_cast<bool>(vol.valid[v]) == proj[v].in_fov);
  }

  SECTION("depth gating: bins far from every voxel zero the volume") {
    NdArray depth({6, 8});
    depth.fill(100.0);  // out of range -> uniform, but pick a narrow far band
    DepthVolume dvol = DepthVolume::from_truth(depth, {50.0, 60.0, 4});
    const FeatureVolume vol = lift(f, spec, cam, dvol, params, proj);
    for (std::size_t i = 0; i < vol.feat.size(); ++i) REQUIRE(vol.feat[i] == 0.0);
  }

  SECTION("grid behind the camera lifts to all-zero, all-invalid") {
    VoxelGridSpec back = spec;
    back.origin[0] = -100.0;  // far behind the camera (camera looks along +x)
    const auto bproj = project_grid(back, cam);
    NdArray depth({6, 8});
    const DepthVolume dvol = DepthVolume::from_truth(depth, {0.0, 4.0, 8});
    const FeatureVolume vol = lift(f, back, cam, dvol, params, bproj);
    for (std::size_t i = 0; i < vol.feat.size(); ++i) REQUIRE(vol.feat[i] == 0.0);
    for (auto v : vol.valid) REQUIRE(v == 0);
  }

  SECTION("linearity: lift(a*f) == a*lift(f) with the bias-free projection") {
    NdArray depth({6, 8});
    const DepthVolume dvol = DepthVolume::from_truth(depth, {0.0, 4.0, 8});
    const FeatureVolume v1 = lift(f, spec, cam, dvol, params, proj);
    NdArray f2(f.shape());
    for (std::size_t i = 0; i < f.size(); ++i) f2[i] = 2.0 * f[i];
    const FeatureVolume v2 = lift(f2, spec, cam, dvol, params, proj);
    for (std::size_t i = 0; i < v1.feat.size(); ++i)
      REQUIRE(v2.feat[i] == Catch::Approx(2.0 * v1.feat[i]).margin(1e-12));
  }
}
