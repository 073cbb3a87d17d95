#pragma once

// Shared dense-math primitives with hand-written backward rules. All layers
// operate on raw spans so callers control the storage; gradients accumulate.

#include <algorithm>
#include <cmath>
#include <span>

#include "voxsam/error.hpp"
#include "voxsam/ndarray.hpp"

namespace voxsam {

inline double sigmoid(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// y = W x + b, W is (out x in) row-major. b may be empty.
inline void affine_forward(const NdArray& W, const NdArray& b, std::span<const double> x,
                           std::span<double> y) {
  const std::size_t out = W.dim(0), in = W.dim(1);
  require(x.size() == in && y.size() == out, ErrorKind::InvalidShape, "affine shape mismatch");
  const double* w = W.data();
  for (std::size_t o = 0; o < out; ++o) {
    double acc = b.size() ? b[o] : 0.0;
    const double* row = w + o * in;
    for (std::size_t i = 0; i < in; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
}

// Accumulates dW += dy (x)T, db += dy, dx += W^T dy. Null outputs are skipped.
inline void affine_backward(const NdArray& W, std::span<const double> x,
                            std::span<const double> dy, NdArray* dW, NdArray* db,
                            std::span<double> dx) {
  const std::size_t out = W.dim(0), in = W.dim(1);
  const double* w = W.data();
  for (std::size_t o = 0; o < out; ++o) {
    const double g = dy[o];
    if (dW) {
      double* grow = dW->data() + o * in;
      for (std::size_t i = 0; i < in; ++i) grow[i] += g * x[i];
    }
    if (db) (*db)[o] += g;
    if (!dx.empty()) {
      const double* row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) dx[i] += row[i] * g;
    }
  }
}

// Numerically safe softmax (max subtraction), so huge logits cannot overflow.
inline void softmax_forward(std::span<const double> logits, std::span<double> p) {
  require(!logits.empty(), ErrorKind::InvalidShape, "softmax of empty vector");
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (std::size_t i = 0; i < p.size(); ++i) p[i] /= sum;
}

// dx += p (.) (dy - <p, dy>)
inline void softmax_backward(std::span<const double> p, std::span<const double> dy,
                             std::span<double> dx) {
  double inner = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) inner += p[i] * dy[i];
  for (std::size_t i = 0; i < p.size(); ++i) dx[i] += p[i] * (dy[i] - inner);
}

inline void relu_forward(std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

inline void relu_backward(std::span<const double> x, std::span<const double> dy,
                          std::span<double> dx) {
  for (std::size_t i = 0; i < x.size(); ++i) dx[i] += x[i] > 0.0 ? dy[i] : 0.0;
}

struct LayerNormCtx {
  double mean = 0.0;
  double inv_std = 0.0;
};

constexpr double kLayerNormEps = 1e-5;

// Per-vector layer norm with learnable gain/bias.
inline void layer_norm_forward(std::span<const double> x, const NdArray& gamma,
                               const NdArray& beta, std::span<double> y, LayerNormCtx* ctx) {
  const std::size_t n = x.size();
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  const double inv_std = 1.0 / std::sqrt(var + kLayerNormEps);
  for (std::size_t i = 0; i < n; ++i) y[i] = gamma[i] * (x[i] - mean) * inv_std + beta[i];
  if (ctx) {
    ctx->mean = mean;
    ctx->inv_std = inv_std;
  }
}

inline void layer_norm_backward(std::span<const double> x, const NdArray& gamma,
                                const LayerNormCtx& ctx, std::span<const double> dy,
                                NdArray* dgamma, NdArray* dbeta, std::span<double> dx) {
  const std::size_t n = x.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double xhat = (x[i] - ctx.mean) * ctx.inv_std;
    const double dxhat = dy[i] * gamma[i];
    sum_dxhat += dxhat;
    sum_dxhat_xhat += dxhat * xhat;
    if (dgamma) (*dgamma)[i] += dy[i] * xhat;
    if (dbeta) (*dbeta)[i] += dy[i];
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double xhat = (x[i] - ctx.mean) * ctx.inv_std;
    const double dxhat = dy[i] * gamma[i];
    dx[i] += ctx.inv_std * (dxhat - inv_n * sum_dxhat - xhat * inv_n * sum_dxhat_xhat);
  }
}

}  // namespace voxsam
