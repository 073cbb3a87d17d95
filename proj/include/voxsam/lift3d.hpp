#pragma once

// Stage-I 3D feature initialization: every in-FOV voxel pools filtered 2D
// features over its projected box, passes them through a learned linear
// projection (no bias, so lifting stays linear in f_T) and scales by the
// depth-distribution weight at the voxel's camera depth. Out-of-FOV voxels
// stay zero with validity = false; the dummy branch fills them later.

#include <array>
#include <cmath>
#include <vector>

#include "voxsam/camera.hpp"
#include "voxsam/error.hpp"
#include "voxsam/ndarray.hpp"
#include "voxsam/ops.hpp"
#include "voxsam/param.hpp"
#include "voxsam/sampling.hpp"

namespace voxsam {

struct DepthBins {
  double d_min = 0.0, d_max = 1.0;
  std::size_t count = 1;

  double width() const { return (d_max - d_min) / static_cast<double>(count); }
  double center(std::size_t i) const {
    return d_min + (static_cast<double>(i) + 0.5) * width();
  }
};

// Per-pixel categorical distribution over depth bins (H x W x D).
struct DepthVolume {
  NdArray w;
  DepthBins bins;

  // Ground-truth depth becomes a triangular kernel of width two bins centered
  // at the true depth (a partition of unity away from the range edges, and
  // renormalized at them). Pixels with no hit (depth <= 0) or out-of-range
  // depth fall back to the uniform distribution.
  static DepthVolume from_truth(const NdArray& depth, DepthBins bins) {
    require(depth.rank() == 2, ErrorKind::InvalidShape, "depth map must be H x W");
    const std::size_t H = depth.dim(0), W = depth.dim(1), D = bins.count;
    DepthVolume dv;
    dv.bins = bins;
    dv.w = NdArray({H, W, D});
    for (std::size_t r = 0; r < H; ++r) {
      for (std::size_t c = 0; c < W; ++c) {
        double* p = dv.w.data() + (r * W + c) * D;
        const double d = depth(r, c);
        if (d <= 0.0 || d < bins.d_min || d > bins.d_max) {
          const double u = 1.0 / static_cast<double>(D);
          for (std::size_t i = 0; i < D; ++i) p[i] = u;
          continue;
        }
        const double x = (d - bins.d_min) / bins.width() - 0.5;
        double sum = 0.0;
        for (std::size_t i = 0; i < D; ++i) {
          const double t = 1.0 - std::abs(static_cast<double>(i) - x);
          p[i] = t > 0.0 ? t : 0.0;
          sum += p[i];
        }
        for (std::size_t i = 0; i < D; ++i) p[i] /= sum;
      }
    }
    return dv;
  }

  void validate() const {
    const std::size_t D = w.dim(2);
    for (std::size_t i = 0; i < w.size() / D; ++i) {
      double sum = 0.0;
      for (std::size_t b = 0; b < D; ++b) {
        require(w[i * D + b] >= 0.0, ErrorKind::NumericalFailure, "negative bin weight");
        sum += w[i * D + b];
      }
      require(std::abs(sum - 1.0) < 1e-9, ErrorKind::NumericalFailure,
              "bin weights do not sum to 1");
    }
  }

  // Linear interpolation of one pixel's bin distribution at the given depth;
  // zero outside [d_min, d_max].
  double weight_at(std::size_t row, std::size_t col, double depth) const {
    if (depth < bins.d_min || depth > bins.d_max) return 0.0;
    const std::size_t D = bins.count;
    const double* p = w.data() + (row * w.dim(1) + col) * D;
    double t = (depth - bins.d_min) / bins.width() - 0.5;
    if (t < 0.0) t = 0.0;
    if (t > static_cast<double>(D - 1)) t = static_cast<double>(D - 1);
    const std::size_t i0 = static_cast<std::size_t>(t);
    const std::size_t i1 = i0 + 1 < D ? i0 + 1 : i0;
    const double a = t - static_cast<double>(i0);
    return (1.0 - a) * p[i0] + a * p[i1];
  }
};

inline double depth_weight(const Projection& proj, const DepthVolume& dvol) {
  const std::size_t H = dvol.w.dim(0), W = dvol.w.dim(1);
  std::ptrdiff_t col = static_cast<std::ptrdiff_t>(std::lround(proj.u));
  std::ptrdiff_t row = static_cast<std::ptrdiff_t>(std::lround(proj.v));
  col = std::clamp<std::ptrdiff_t>(col, 0, static_cast<std::ptrdiff_t>(W) - 1);
  row = std::clamp<std::ptrdiff_t>(row, 0, static_cast<std::ptrdiff_t>(H) - 1);
  return dvol.weight_at(static_cast<std::size_t>(row), static_cast<std::size_t>(col),
                        proj.depth);
}

// X x Y x Z x C features plus the per-voxel in-FOV validity mask.
struct FeatureVolume {
  NdArray feat;
  std::vector<std::uint8_t> valid;

  std::size_t channels() const { return feat.dim(3); }
  std::size_t volume() const { return feat.dim(0) * feat.dim(1) * feat.dim(2); }
};

struct RoiPoolCtx {
  bool valid = false;
  std::array<double, 4> us{}, vs{};
};

// Average of bilinear samples on a fixed 2x2 sub-grid inside the box.
// Returns false (and a zero vector) when the box misses the image entirely.
inline bool roi_pool(const NdArray& f, const Box2D& box, std::span<double> out,
                     RoiPoolCtx* ctx = nullptr) {
  const std::size_t C = f.dim(2);
  for (std::size_t c = 0; c < C; ++c) out[c] = 0.0;
  const double W = static_cast<double>(f.dim(1)), H = static_cast<double>(f.dim(0));
  const bool hit = box.u_min < W && box.u_max >= 0.0 && box.v_min < H && box.v_max >= 0.0 &&
                   box.u_max >= box.u_min && box.v_max >= box.v_min;
  if (ctx) *ctx = RoiPoolCtx{};
  if (!hit) return false;
  std::vector<double> tmp(C);
  int k = 0;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      const double u = box.u_min + (static_cast<double>(a) + 0.5) * (box.u_max - box.u_min) / 2.0;
      const double v = box.v_min + (static_cast<double>(b) + 0.5) * (box.v_max - box.v_min) / 2.0;
      bilinear_sample(f, u, v, tmp);
      for (std::size_t c = 0; c < C; ++c) out[c] += 0.25 * tmp[c];
      if (ctx) {
        ctx->us[k] = u;
        ctx->vs[k] = v;
      }
      ++k;
    }
  }
  if (ctx) ctx->valid = true;
  return true;
}

inline void roi_pool_backward(const NdArray& f, const RoiPoolCtx& ctx,
                              std::span<const double> d_out, NdArray* d_f) {
  if (!ctx.valid) return;
  const std::size_t C = f.dim(2);
  std::vector<double> quarter(C);
  for (std::size_t c = 0; c < C; ++c) quarter[c] = 0.25 * d_out[c];
  for (int k = 0; k < 4; ++k)
    bilinear_sample_backward(f, ctx.us[k], ctx.vs[k], quarter, d_f, nullptr, nullptr);
}

struct LiftParams {
  Parameter* proj = nullptr;  // C x C, bias-free

  static LiftParams create(ParameterStore& store, std::size_t channels, RngStream& rng) {
    LiftParams p;
    p.proj = &store.add("lift.proj", {channels, channels});
    RngStream r = rng.split(23);
    init_normal(*p.proj, r);
    return p;
  }
};

struct LiftCtx {
  std::vector<RoiPoolCtx> roi;      // per voxel
  std::vector<double> dweight;      // per voxel
  NdArray pooled;                   // V x C (pre-projection)
  std::vector<std::uint8_t> valid;  // per voxel
};

// F_T^3D: per in-FOV voxel, depth_weight * proj(roi_pool(f_T, box_P)).
inline FeatureVolume lift(const NdArray& f_T, const VoxelGridSpec& spec,
                          const CameraModel& cam, const DepthVolume& dvol,
                          const LiftParams& params,
                          const std::vector<Projection>& proj, LiftCtx* ctx = nullptr) {
  const std::size_t C = f_T.dim(2);
  require(params.proj->value.dim(0) == C && params.proj->value.dim(1) == C,
          ErrorKind::InvalidShape, "lift projection must be C x C");
  const std::size_t V = spec.volume();
  require(proj.size() == V, ErrorKind::InvalidShape, "projection count != volume");

  FeatureVolume out;
  out.feat = NdArray({spec.nx, spec.ny, spec.nz, C});
  out.valid.assign(V, 0);
  if (ctx) {
    ctx->roi.assign(V, RoiPoolCtx{});
    ctx->dweight.assign(V, 0.0);
    ctx->pooled = NdArray({V, C});
    ctx->valid.assign(V, 0);
  }

  std::vector<double> pooled(C);
  for (std::size_t ix = 0; ix < spec.nx; ++ix) {
    for (std::size_t iy = 0; iy < spec.ny; ++iy) {
      for (std::size_t iz = 0; iz < spec.nz; ++iz) {
        const std::size_t vfl = spec.flat(ix, iy, iz);
        const Projection& pr = proj[vfl];
        if (!pr.in_fov) continue;
        const Box2D box = voxel_box(spec, ix, iy, iz, cam);
        RoiPoolCtx rctx;
        if (!roi_pool(f_T, box, pooled, &rctx)) continue;
        const double dw = depth_weight(pr, dvol);
        double* dst = out.feat.data() + vfl * C;
        affine_forward(params.proj->value, {}, pooled, {dst, C});
        for (std::size_t c = 0; c < C; ++c) dst[c] *= dw;
        out.valid[vfl] = 1;
        if (ctx) {
          ctx->roi[vfl] = rctx;
          ctx->dweight[vfl] = dw;
          for (std::size_t c = 0; c < C; ++c) ctx->pooled(vfl, c) = pooled[c];
          ctx->valid[vfl] = 1;
        }
      }
    }
  }
  return out;
}

inline void lift_backward(const NdArray& f_T, const LiftCtx& ctx, const LiftParams& params,
                          const NdArray& d_vol, NdArray* d_fT) {
  const std::size_t C = f_T.dim(2);
  const std::size_t V = ctx.valid.size();
  std::vector<double> d_proj_out(C), d_pooled(C);
  for (std::size_t vfl = 0; vfl < V; ++vfl) {
    if (!ctx.valid[vfl]) continue;
    const double dw = ctx.dweight[vfl];
    const double* dv = d_vol.data() + vfl * C;
    for (std::size_t c = 0; c < C; ++c) d_proj_out[c] = dv[c] * dw;
    std::fill(d_pooled.begin(), d_pooled.end(), 0.0);
    affine_backward(params.proj->value, {ctx.pooled.data() + vfl * C, C}, d_proj_out,
                    &params.proj->grad, nullptr, d_pooled);
    if (d_fT) roi_pool_backward(f_T, ctx.roi[vfl], d_pooled, d_fT);
  }
}

}  // namespace voxsam
