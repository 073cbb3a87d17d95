#pragma once

// Bilinear sampling of 2D feature maps with zero padding, shared by ROI
// pooling and the deformable-attention grid sampler.
//
// Sampling coordinates are pixel-valued. Eq.-style normalization maps u to
// 2u/(W-1) - 1 and is inverted before interpolation; the round trip is the
// identity, so interpolation happens directly at (u, v). Texels outside the
// image contribute zero, which makes every sample total.

#include <cmath>
#include <span>
#include <vector>

#include "voxsam/error.hpp"
#include "voxsam/ndarray.hpp"

namespace voxsam {

inline double normalize_coord(double x, std::size_t size) {
  return size > 1 ? 2.0 * x / static_cast<double>(size - 1) - 1.0 : 0.0;
}

inline double denormalize_coord(double n, std::size_t size) {
  return size > 1 ? (n + 1.0) * static_cast<double>(size - 1) / 2.0 : 0.0;
}

// f is H x W x C, row = v, column = u. Writes the interpolated C-vector.
inline void bilinear_sample(const NdArray& f, double u, double v, std::span<double> out) {
  const std::ptrdiff_t H = static_cast<std::ptrdiff_t>(f.dim(0));
  const std::ptrdiff_t W = static_cast<std::ptrdiff_t>(f.dim(1));
  const std::size_t C = f.dim(2);
  const double uf = std::floor(u), vf = std::floor(v);
  const std::ptrdiff_t u0 = static_cast<std::ptrdiff_t>(uf);
  const std::ptrdiff_t v0 = static_cast<std::ptrdiff_t>(vf);
  const double au = u - uf, av = v - vf;
  for (std::size_t c = 0; c < C; ++c) out[c] = 0.0;
  for (int dv = 0; dv < 2; ++dv) {
    const std::ptrdiff_t vv = v0 + dv;
    if (vv < 0 || vv >= H) continue;
    const double wv = dv ? av : 1.0 - av;
    for (int du = 0; du < 2; ++du) {
      const std::ptrdiff_t uu = u0 + du;
      if (uu < 0 || uu >= W) continue;
      const double w = wv * (du ? au : 1.0 - au);
      if (w == 0.0) continue;
      const double* t = f.data() + (static_cast<std::size_t>(vv) * f.dim(1) +
                                    static_cast<std::size_t>(uu)) * C;
      for (std::size_t c = 0; c < C; ++c) out[c] += w * t[c];
    }
  }
}

// Accumulates d_f at the four texels and, when requested, the cotangent of
// the sampling position (bilinear interpolation is piecewise linear in it).
inline void bilinear_sample_backward(const NdArray& f, double u, double v,
                                     std::span<const double> d_out, NdArray* d_f,
                                     double* d_u, double* d_v) {
  const std::ptrdiff_t H = static_cast<std::ptrdiff_t>(f.dim(0));
  const std::ptrdiff_t W = static_cast<std::ptrdiff_t>(f.dim(1));
  const std::size_t C = f.dim(2);
  const double uf = std::floor(u), vf = std::floor(v);
  const std::ptrdiff_t u0 = static_cast<std::ptrdiff_t>(uf);
  const std::ptrdiff_t v0 = static_cast<std::ptrdiff_t>(vf);
  const double au = u - uf, av = v - vf;
  for (int dv = 0; dv < 2; ++dv) {
    const std::ptrdiff_t vv = v0 + dv;
    if (vv < 0 || vv >= H) continue;
    const double wv = dv ? av : 1.0 - av;
    const double dwv_dv = dv ? 1.0 : -1.0;
    for (int du = 0; du < 2; ++du) {
      const std::ptrdiff_t uu = u0 + du;
      if (uu < 0 || uu >= W) continue;
      const double wu = du ? au : 1.0 - au;
      const double dwu_du = du ? 1.0 : -1.0;
      const std::size_t base = (static_cast<std::size_t>(vv) * f.dim(1) +
                                static_cast<std::size_t>(uu)) * C;
      const double* t = f.data() + base;
      if (d_f) {
        double* g = d_f->data() + base;
        const double w = wv * wu;
        for (std::size_t c = 0; c < C; ++c) g[c] += w * d_out[c];
      }
      if (d_u || d_v) {
        double inner = 0.0;
        for (std::size_t c = 0; c < C; ++c) inner += d_out[c] * t[c];
        if (d_u) *d_u += wv * dwu_du * inner;
        if (d_v) *d_v += dwv_dv * wu * inner;
      }
    }
  }
}

// F_s = GridSample(f_T, Norm(points)): bilinear interpolation at each point,
// zero vector outside the image. Returns N x C. Norm followed by its inverse
// is the identity, so interpolation runs at the pixel coordinates directly
// (the algebraic simplification keeps integer-pixel lookups exact).
inline NdArray grid_sample(const NdArray& f, std::span<const double> us,
                           std::span<const double> vs) {
  require(f.rank() == 3, ErrorKind::InvalidShape, "grid_sample expects H x W x C");
  require(us.size() == vs.size(), ErrorKind::InvalidShape, "u/v count mismatch");
  const std::size_t C = f.dim(2);
  NdArray out({us.size(), C});
  for (std::size_t i = 0; i < us.size(); ++i)
    bilinear_sample(f, us[i], vs[i], {out.data() + i * C, C});
  return out;
}

}  // namespace voxsam
