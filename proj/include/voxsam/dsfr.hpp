#pragma once

// Dummy Shortcut for Feature Refinement.
//
// A voxel-wise classifier predicts occupancy; the learnable threshold
// tau = 0.2 + 0.8*sigmoid(theta) splits the grid into occupied and empty
// masks. Empty voxels take the lightweight dummy blend
// F <- F*P_occu + Em*(1-P_occu); occupied in-FOV voxels are refined with
// multi-head deformable attention against the 2D feature map; occupied
// out-of-FOV voxels pass through unchanged. Exactly one branch touches each
// voxel, and the per-branch voxel counts plus grid-sample call count are
// instrumented so the analytical cost model can be cross-checked.
//
// The hard masks are routing decisions, not differentiable quantities:
// backward treats them as constants, so theta receives no gradient from the
// routing itself. The blend carries gradients to P_occu on the empty branch.

#include <string>
#include <vector>

#include <json.hpp>

#include "voxsam/camera.hpp"
#include "voxsam/error.hpp"
#include "voxsam/lift3d.hpp"
#include "voxsam/ndarray.hpp"
#include "voxsam/ops.hpp"
#include "voxsam/param.hpp"
#include "voxsam/sampling.hpp"

namespace voxsam {

struct DsfrConfig {
  std::size_t channels = 8;
  std::size_t heads = 4;
  std::size_t points = 4;

  void validate() const {
    require(channels >= 1 && heads >= 1 && points >= 1, ErrorKind::ConfigError,
            "channels, heads and points must all be >= 1");
  }
};

struct DsfrParams {
  Parameter *conv3_w = nullptr, *conv3_b = nullptr;  // C x C x 3 x 3 x 3, C
  Parameter *conv1_w = nullptr, *conv1_b = nullptr;  // 1 x C, 1
  Parameter* theta = nullptr;                        // scalar threshold logit
  Parameter* em = nullptr;                           // C dummy feature
  Parameter *off_w = nullptr, *off_b = nullptr;      // (H*S*2) x C
  Parameter *wt_w = nullptr, *wt_b = nullptr;        // (H*S) x C
  Parameter *red_w = nullptr, *red_b = nullptr;      // C x (H*C) head reduce
  Parameter *fus_w = nullptr, *fus_b = nullptr;      // C x 2C fusion

  static DsfrParams create(ParameterStore& store, const DsfrConfig& cfg, RngStream& rng) {
    cfg.validate();
    const std::size_t C = cfg.channels, H = cfg.heads, S = cfg.points;
    DsfrParams p;
    p.conv3_w = &store.add("dsfr.conv3_w", {C, C, 3, 3, 3});
    p.conv3_b = &store.add("dsfr.conv3_b", {C});
    p.conv1_w = &store.add("dsfr.conv1_w", {1, C});
    p.conv1_b = &store.add("dsfr.conv1_b", {1});
    p.theta = &store.add("dsfr.theta", {1});
    p.em = &store.add("dsfr.em", {C});
    p.off_w = &store.add("dsfr.off_w", {H * S * 2, C});
    p.off_b = &store.add("dsfr.off_b", {H * S * 2});
    p.wt_w = &store.add("dsfr.wt_w", {H * S, C});
    p.wt_b = &store.add("dsfr.wt_b", {H * S});
    p.red_w = &store.add("dsfr.red_w", {C, H * C});
    p.red_b = &store.add("dsfr.red_b", {C});
    p.fus_w = &store.add("dsfr.fus_w", {C, 2 * C});
    p.fus_b = &store.add("dsfr.fus_b", {C});
    RngStream r = rng.split(31);
    init_normal(*p.conv3_w, r);
    init_normal(*p.conv1_w, r);
    init_normal(*p.off_w, r);
    init_normal(*p.wt_w, r);
    init_normal(*p.red_w, r);
    init_normal(*p.fus_w, r);
    // biases, theta (tau = 0.6) and the dummy feature start at zero
    return p;
  }
};

inline double tau_from_theta(double theta) { return 0.2 + 0.8 * sigmoid(theta); }

struct OccupancyField {
  NdArray prob;  // X x Y x Z in [0,1]
  double tau = 0.6;
  std::vector<std::uint8_t> mask_occ, mask_empty;  // exact partition

  std::size_t volume() const { return prob.size(); }

  void rebuild_masks() {
    mask_occ.assign(prob.size(), 0);
    mask_empty.assign(prob.size(), 0);
    for (std::size_t i = 0; i < prob.size(); ++i) {
      mask_occ[i] = prob[i] >= tau;
      mask_empty[i] = !mask_occ[i];
    }
  }
};

struct DsfrStats {
  std::uint64_t occupied_in_fov = 0;
  std::uint64_t occupied_out_fov = 0;
  std::uint64_t empty = 0;
  std::uint64_t sample_calls = 0;

  std::string to_json_string() const {
    nlohmann::json j{{"occupied_in_fov", occupied_in_fov},
                     {"occupied_out_fov", occupied_out_fov},
                     {"empty", empty},
                     {"sample_calls", sample_calls}};
    return j.dump();
  }
};

// ---------------------------------------------------------------------------
// 3x3x3 convolution over the voxel grid (zero padding, stride 1)

inline void conv3d_forward(const NdArray& F, const NdArray& W, const NdArray& b,
                           NdArray& out) {
  const std::size_t X = F.dim(0), Y = F.dim(1), Z = F.dim(2), Ci = F.dim(3);
  const std::size_t Co = W.dim(0);
  for (std::size_t x = 0; x < X; ++x)
    for (std::size_t y = 0; y < Y; ++y)
      for (std::size_t z = 0; z < Z; ++z)
        for (std::size_t co = 0; co < Co; ++co) {
          double acc = b[co];
          for (std::size_t ci = 0; ci < Ci; ++ci)
            for (int dx = -1; dx <= 1; ++dx)
              for (int dy = -1; dy <= 1; ++dy)
                for (int dz = -1; dz <= 1; ++dz) {
                  const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(x) + dx;
                  const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(y) + dy;
                  const std::ptrdiff_t zz = static_cast<std::ptrdiff_t>(z) + dz;
                  if (xx < 0 || yy < 0 || zz < 0 || xx >= static_cast<std::ptrdiff_t>(X) ||
                      yy >= static_cast<std::ptrdiff_t>(Y) ||
                      zz >= static_cast<std::ptrdiff_t>(Z))
                    continue;
                  acc += W(co, ci, static_cast<std::size_t>(dx + 1),
                           static_cast<std::size_t>(dy + 1),
                           static_cast<std::size_t>(dz + 1)) *
                         F(static_cast<std::size_t>(xx), static_cast<std::size_t>(yy),
                           static_cast<std::size_t>(zz), ci);
                }
          out(x, y, z, co) = acc;
        }
}

inline void conv3d_backward(const NdArray& F, const NdArray& W, const NdArray& d_out,
                            NdArray* dW, NdArray* db, NdArray* d_F) {
  const std::size_t X = F.dim(0), Y = F.dim(1), Z = F.dim(2), Ci = F.dim(3);
  const std::size_t Co = W.dim(0);
  for (std::size_t x = 0; x < X; ++x)
    for (std::size_t y = 0; y < Y; ++y)
      for (std::size_t z = 0; z < Z; ++z)
        for (std::size_t co = 0; co < Co; ++co) {
          const double g = d_out(x, y, z, co);
          if (g == 0.0) continue;
          if (db) (*db)[co] += g;
          for (std::size_t ci = 0; ci < Ci; ++ci)
            for (int dx = -1; dx <= 1; ++dx)
              for (int dy = -1; dy <= 1; ++dy)
                for (int dz = -1; dz <= 1; ++dz) {
                  const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(x) + dx;
                  const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(y) + dy;
                  const std::ptrdiff_t zz = static_cast<std::ptrdiff_t>(z) + dz;
                  if (xx < 0 || yy < 0 || zz < 0 || xx >= static_cast<std::ptrdiff_t>(X) ||
                      yy >= static_cast<std::ptrdiff_t>(Y) ||
                      zz >= static_cast<std::ptrdiff_t>(Z))
                    continue;
                  const double fv = F(static_cast<std::size_t>(xx),
                                      static_cast<std::size_t>(yy),
                                      static_cast<std::size_t>(zz), ci);
                  if (dW)
                    (*dW)(co, ci, static_cast<std::size_t>(dx + 1),
                          static_cast<std::size_t>(dy + 1),
                          static_cast<std::size_t>(dz + 1)) += g * fv;
                  if (d_F)
                    (*d_F)(static_cast<std::size_t>(xx), static_cast<std::size_t>(yy),
                           static_cast<std::size_t>(zz), ci) +=
                        g * W(co, ci, static_cast<std::size_t>(dx + 1),
                              static_cast<std::size_t>(dy + 1),
                              static_cast<std::size_t>(dz + 1));
                }
        }
}

// ---------------------------------------------------------------------------
// Occupancy classification (Eq. 4/5)

struct ClassifyCtx {
  NdArray F;       // input copy
  NdArray pre;     // conv3 pre-activation, X x Y x Z x C
  NdArray act;     // relu output
  NdArray logit;   // X x Y x Z
};

// prob = sigmoid(conv1x1x1(relu(conv3x3x3(F)))), tau from theta.
inline OccupancyField classify_occupancy(const FeatureVolume& F, const DsfrParams& p,
                                         const DsfrConfig& cfg, ClassifyCtx* ctx = nullptr) {
  const std::size_t C = cfg.channels;
  require(F.feat.dim(3) == C, ErrorKind::InvalidShape, "feature volume channel mismatch");
  const std::size_t X = F.feat.dim(0), Y = F.feat.dim(1), Z = F.feat.dim(2);
  const std::size_t V = X * Y * Z;

  NdArray pre({X, Y, Z, C});
  conv3d_forward(F.feat, p.conv3_w->value, p.conv3_b->value, pre);
  NdArray act(pre.shape());
  relu_forward({pre.data(), pre.size()}, {act.data(), act.size()});

  OccupancyField occ;
  occ.prob = NdArray({X, Y, Z});
  NdArray logit({X, Y, Z});
  for (std::size_t v = 0; v < V; ++v) {
    double acc = p.conv1_b->value[0];
    const double* a = act.data() + v * C;
    for (std::size_t c = 0; c < C; ++c) acc += p.conv1_w->value[c] * a[c];
    logit[v] = acc;
    occ.prob[v] = sigmoid(acc);
  }
  occ.tau = tau_from_theta(p.theta->value[0]);
  occ.rebuild_masks();

  if (ctx) {
    ctx->F = F.feat;
    ctx->pre = std::move(pre);
    ctx->act = std::move(act);
    ctx->logit = std::move(logit);
  }
  return occ;
}

// Chains d_prob through the classifier; accumulates parameter grads and d_F.
// theta only enters the non-differentiable threshold, so it gets no gradient.
inline void classify_occupancy_backward(const ClassifyCtx& ctx, const OccupancyField& occ,
                                        const DsfrParams& p, const NdArray& d_prob,
                                        NdArray* d_F) {
  const std::size_t C = ctx.F.dim(3);
  const std::size_t V = occ.prob.size();
  NdArray d_act(ctx.act.shape());
  for (std::size_t v = 0; v < V; ++v) {
    const double s = occ.prob[v];
    const double g = d_prob[v] * s * (1.0 - s);
    if (g == 0.0) continue;
    p.conv1_b->grad[0] += g;
    const double* a = ctx.act.data() + v * C;
    double* da = d_act.data() + v * C;
    for (std::size_t c = 0; c < C; ++c) {
      p.conv1_w->grad[c] += g * a[c];
      da[c] += g * p.conv1_w->value[c];
    }
  }
  NdArray d_pre(ctx.pre.shape());
  relu_backward({ctx.pre.data(), ctx.pre.size()}, {d_act.data(), d_act.size()},
                {d_pre.data(), d_pre.size()});
  conv3d_backward(ctx.F, p.conv3_w->value, d_pre, &p.conv3_w->grad, &p.conv3_b->grad, d_F);
}

// ---------------------------------------------------------------------------
// Empty branch (Eq. 6)

struct RefineEmptyCtx {
  NdArray F;                            // input copy
  NdArray prob;                         // copy of P_occu
  std::vector<std::uint8_t> mask_empty;
};

// Per empty voxel: F <- F*P_occu + Em*(1-P_occu); occupied voxels untouched.
inline FeatureVolume refine_empty(const FeatureVolume& F, const OccupancyField& occ,
                                  const Parameter& em, RefineEmptyCtx* ctx = nullptr) {
  const std::size_t C = F.feat.dim(3);
  require(em.value.size() == C, ErrorKind::InvalidShape, "dummy feature width mismatch");
  FeatureVolume out;
  out.feat = F.feat;
  out.valid = F.valid;
  const std::size_t V = occ.prob.size();
  for (std::size_t v = 0; v < V; ++v) {
    if (!occ.mask_empty[v]) continue;
    const double po = occ.prob[v];
    const double pe = 1.0 - po;
    double* f = out.feat.data() + v * C;
    for (std::size_t c = 0; c < C; ++c) f[c] = f[c] * po + em.value[c] * pe;
  }
  if (ctx) {
    ctx->F = F.feat;
    ctx->prob = occ.prob;
    ctx->mask_empty = occ.mask_empty;
  }
  return out;
}

// d_F and d_prob accumulate; em.grad accumulates. Occupied voxels pass the
// cotangent straight through.
inline void refine_empty_backward(const RefineEmptyCtx& ctx, Parameter& em,
                                  const NdArray& d_out, NdArray* d_F, NdArray* d_prob) {
  const std::size_t C = ctx.F.dim(3);
  const std::size_t V = ctx.prob.size();
  for (std::size_t v = 0; v < V; ++v) {
    const double* g = d_out.data() + v * C;
    if (!ctx.mask_empty[v]) {
      if (d_F) {
        double* df = d_F->data() + v * C;
        for (std::size_t c = 0; c < C; ++c) df[c] += g[c];
      }
      continue;
    }
    const double po = ctx.prob[v];
    const double pe = 1.0 - po;
    const double* f = ctx.F.data() + v * C;
    double dp = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      if (d_F) (*d_F)[v * C + c] += g[c] * po;
      em.grad[c] += g[c] * pe;
      dp += g[c] * (f[c] - em.value[c]);
    }
    if (d_prob) (*d_prob)[v] += dp;
  }
}

// ---------------------------------------------------------------------------
// Occupied branch (Eqs. 7-10)

struct RefinedVoxelCtx {
  std::size_t vfl = 0;
  std::vector<double> x;        // C input feature
  std::vector<double> off;      // 2*H*S offsets
  std::vector<double> wlog;     // H*S weight logits
  std::vector<double> att;      // H*S attention (per-head softmax)
  std::vector<double> us, vs;   // H*S sample positions
  std::vector<double> sampled;  // H*S*C sampled features
  std::vector<double> gcat;     // H*C per-head aggregates
  std::vector<double> g;        // C reduced aggregate
};

struct RefineOccupiedCtx {
  std::vector<RefinedVoxelCtx> voxels;
};

// For each voxel in M_o within the FOV: offsets and per-head attention from
// two MLPs on F(v), bilinear samples of f_T at u~ + delta, attention-weighted
// per-head aggregation, head concat + linear reduce, then fusion of
// concat[F(v), G]. Everything else passes through unchanged.
inline FeatureVolume refine_occupied(const FeatureVolume& F, const OccupancyField& occ,
                                     const std::vector<Projection>& proj, const NdArray& f_T,
                                     const DsfrParams& p, const DsfrConfig& cfg,
                                     RefineOccupiedCtx* ctx = nullptr,
                                     DsfrStats* stats = nullptr) {
  cfg.validate();
  const std::size_t C = cfg.channels, H = cfg.heads, S = cfg.points;
  require(F.feat.dim(3) == C && f_T.dim(2) == C, ErrorKind::InvalidShape,
          "channel mismatch in refine_occupied");
  const std::size_t V = occ.prob.size();
  require(proj.size() == V, ErrorKind::InvalidShape, "projection count != volume");

  FeatureVolume out;
  out.feat = F.feat;
  out.valid = F.valid;

  std::vector<double> x(C), off(2 * H * S), wlog(H * S), att(H * S), sampled(H * S * C);
  std::vector<double> gcat(H * C), g(C), fused_in(2 * C);
  for (std::size_t v = 0; v < V; ++v) {
    if (!occ.mask_occ[v]) continue;
    if (!proj[v].in_fov) {
      if (stats) ++stats->occupied_out_fov;
      continue;
    }
    if (stats) ++stats->occupied_in_fov;
    const double* fv = F.feat.data() + v * C;
    std::copy(fv, fv + C, x.begin());

    affine_forward(p.off_w->value, p.off_b->value, x, off);
    affine_forward(p.wt_w->value, p.wt_b->value, x, wlog);
    for (std::size_t h = 0; h < H; ++h)
      softmax_forward({wlog.data() + h * S, S}, {att.data() + h * S, S});

    RefinedVoxelCtx vc;
    vc.us.resize(H * S);
    vc.vs.resize(H * S);
    std::fill(gcat.begin(), gcat.end(), 0.0);
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t s = 0; s < S; ++s) {
        const std::size_t k = h * S + s;
        const double su = proj[v].u + off[2 * k];
        const double sv = proj[v].v + off[2 * k + 1];
        vc.us[k] = su;
        vc.vs[k] = sv;
        bilinear_sample(f_T, su, sv, {sampled.data() + k * C, C});
        if (stats) ++stats->sample_calls;
        const double a = att[k];
        for (std::size_t c = 0; c < C; ++c) gcat[h * C + c] += a * sampled[k * C + c];
      }
    }
    affine_forward(p.red_w->value, p.red_b->value, gcat, g);
    std::copy(x.begin(), x.end(), fused_in.begin());
    std::copy(g.begin(), g.end(), fused_in.begin() + C);
    affine_forward(p.fus_w->value, p.fus_b->value, fused_in,
                   {out.feat.data() + v * C, C});

    if (ctx) {
      vc.vfl = v;
      vc.x = x;
      vc.off = off;
      vc.wlog = wlog;
      vc.att = att;
      vc.sampled = sampled;
      vc.gcat = gcat;
      vc.g = g;
      ctx->voxels.push_back(std::move(vc));
    }
  }
  return out;
}

// Accumulates parameter grads plus d_F and d_fT. Pass-through voxels (all not
// in M_o within FOV) forward their cotangent into d_F when chain_passthrough
// is set (used by the composed dsfr backward for occupied out-of-FOV voxels).
inline void refine_occupied_backward(const RefineOccupiedCtx& ctx, const NdArray& f_T,
                                     const DsfrParams& p, const DsfrConfig& cfg,
                                     const NdArray& d_out, NdArray* d_F, NdArray* d_fT) {
  const std::size_t C = cfg.channels, H = cfg.heads, S = cfg.points;
  std::vector<double> d_fused_in(2 * C), d_g(C), d_gcat(H * C), d_att(H * S),
      d_wlog(H * S), d_off(2 * H * S), d_x(C), d_samp(C);
  for (const auto& vc : ctx.voxels) {
    const std::size_t v = vc.vfl;
    std::fill(d_fused_in.begin(), d_fused_in.end(), 0.0);
    std::vector<double> fused_in(2 * C);
    std::copy(vc.x.begin(), vc.x.end(), fused_in.begin());
    std::copy(vc.g.begin(), vc.g.end(), fused_in.begin() + C);
    affine_backward(p.fus_w->value, fused_in, {d_out.data() + v * C, C}, &p.fus_w->grad,
                    &p.fus_b->grad, d_fused_in);
    std::copy(d_fused_in.begin(), d_fused_in.begin() + C, d_x.begin());
    std::copy(d_fused_in.begin() + C, d_fused_in.end(), d_g.begin());

    std::fill(d_gcat.begin(), d_gcat.end(), 0.0);
    affine_backward(p.red_w->value, vc.gcat, d_g, &p.red_w->grad, &p.red_b->grad, d_gcat);

    std::fill(d_att.begin(), d_att.end(), 0.0);
    for (std::size_t h = 0; h < H; ++h) {
      for (std::size_t s = 0; s < S; ++s) {
        const std::size_t k = h * S + s;
        double inner = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
          const double dg = d_gcat[h * C + c];
          inner += dg * vc.sampled[k * C + c];
          d_samp[c] = dg * vc.att[k];
        }
        d_att[k] = inner;
        double du = 0.0, dv = 0.0;
        bilinear_sample_backward(f_T, vc.us[k], vc.vs[k], d_samp, d_fT, &du, &dv);
        d_off[2 * k] = du;
        d_off[2 * k + 1] = dv;
      }
    }
    std::fill(d_wlog.begin(), d_wlog.end(), 0.0);
    for (std::size_t h = 0; h < H; ++h)
      softmax_backward({vc.att.data() + h * S, S}, {d_att.data() + h * S, S},
                       {d_wlog.data() + h * S, S});

    affine_backward(p.off_w->value, vc.x, d_off, &p.off_w->grad, &p.off_b->grad, d_x);
    affine_backward(p.wt_w->value, vc.x, d_wlog, &p.wt_w->grad, &p.wt_b->grad, d_x);
    if (d_F) {
      double* df = d_F->data() + v * C;
      for (std::size_t c = 0; c < C; ++c) df[c] += d_x[c];
    }
    std::fill(d_x.begin(), d_x.end(), 0.0);
  }
}

// ---------------------------------------------------------------------------
// Composed forward (Fig. 2(c))

struct DsfrForwardCtx {
  ClassifyCtx classify;
  RefineEmptyCtx empty;
  RefineOccupiedCtx occupied;
  std::vector<std::uint8_t> passthrough;  // occupied voxels outside the FOV
};

struct DsfrForwardResult {
  FeatureVolume feat;
  OccupancyField occ;
  DsfrStats stats;
};

inline DsfrForwardResult dsfr_forward(const FeatureVolume& F,
                                      const std::vector<Projection>& proj,
                                      const NdArray& f_T, const DsfrParams& p,
                                      const DsfrConfig& cfg,
                                      DsfrForwardCtx* ctx = nullptr) {
  DsfrForwardResult r;
  r.occ = classify_occupancy(F, p, cfg, ctx ? &ctx->classify : nullptr);
  const std::size_t V = r.occ.prob.size();
  for (std::size_t v = 0; v < V; ++v) r.stats.empty += r.occ.mask_empty[v];
  FeatureVolume blended = refine_empty(F, r.occ, *p.em, ctx ? &ctx->empty : nullptr);
  r.feat = refine_occupied(blended, r.occ, proj, f_T, p, cfg,
                           ctx ? &ctx->occupied : nullptr, &r.stats);
  if (ctx) {
    ctx->passthrough.assign(V, 0);
    for (std::size_t v = 0; v < V; ++v)
      ctx->passthrough[v] = r.occ.mask_occ[v] && !proj[v].in_fov;
  }
  return r;
}

// d_feat is the cotangent of the refined volume, d_prob_external the direct
// cotangent of P_occu (e.g. from the occupancy loss; may be null). The blend
// contributes its own P_occu cotangent before the classifier backward runs.
inline void dsfr_backward(const DsfrForwardCtx& ctx, const DsfrForwardResult& r,
                          const NdArray& f_T, const DsfrParams& p, const DsfrConfig& cfg,
                          const NdArray& d_feat, const NdArray* d_prob_external,
                          NdArray* d_F, NdArray* d_fT) {
  const std::size_t C = cfg.channels;
  const std::size_t V = r.occ.prob.size();

  // Occupied in-FOV voxels: through the attention stack into the blended
  // volume. Blended == original F on those voxels, so the d_F accumulation
  // lands directly on F.
  refine_occupied_backward(ctx.occupied, f_T, p, cfg, d_feat, d_F, d_fT);

  // Remaining voxels: empty ones went through the blend, occupied out-of-FOV
  // ones passed through unchanged.
  NdArray d_blend_masked({V, C});
  for (std::size_t v = 0; v < V; ++v) {
    if (ctx.empty.mask_empty[v] || ctx.passthrough[v]) {
      const double* g = d_feat.data() + v * C;
      double* dst = d_blend_masked.data() + v * C;
      for (std::size_t c = 0; c < C; ++c) dst[c] = g[c];
    }
  }
  NdArray d_prob(r.occ.prob.shape());
  if (d_prob_external)
    for (std::size_t v = 0; v < V; ++v) d_prob[v] = (*d_prob_external)[v];
  refine_empty_backward(ctx.empty, *p.em, d_blend_masked, d_F, &d_prob);
  classify_occupancy_backward(ctx.classify, r.occ, p, d_prob, d_F);
}

}  // namespace voxsam
