#pragma once

// Registers a self-contained finite-difference check case for every
// differentiable operation in the pipeline. Case inputs are drawn so the
// forward pass stays away from the non-smooth seams that finite differences
// cannot cross (relu kinks, occupancy-threshold flips, bilinear cell
// boundaries); the operations themselves are exercised unmodified.

#include <memory>

#include "voxsam/dsfr.hpp"
#include "voxsam/gradcheck.hpp"
#include "voxsam/lift3d.hpp"
#include "voxsam/losses.hpp"
#include "voxsam/ndarray.hpp"
#include "voxsam/scene.hpp"
#include "voxsam/tgif.hpp"

namespace voxsam {
namespace detail {

inline NdArray randn(RngStream& rng, std::vector<std::size_t> shape, double scale = 1.0) {
  NdArray a(std::move(shape));
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = scale * rng.normal();
  return a;
}

inline std::vector<GradLeaf> store_leaves(ParameterStore& store) {
  std::vector<GradLeaf> ls;
  for (std::size_t i = 0; i < store.size(); ++i)
    ls.push_back({store[i].name, &store[i].value, &store[i].grad});
  return ls;
}

inline bool fraction_interior(double x, double margin) {
  const double f = x - std::floor(x);
  return f > margin && f < 1.0 - margin;
}

// ---- elementwise toys ------------------------------------------------------

struct Linear3xCase : CheckCase {
  NdArray x, gx;
  explicit Linear3xCase(RngStream& rng) : x(randn(rng, {5})), gx({5}) {}
  NdArray forward() override {
    NdArray y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = 3.0 * x[i];
    return y;
  }
  void backward(const NdArray& ct) override {
    for (std::size_t i = 0; i < x.size(); ++i) gx[i] += 3.0 * ct[i];
  }
  std::vector<GradLeaf> leaves() override { return {{"x", &x, &gx}}; }
};

struct SigmoidCase : CheckCase {
  NdArray x, gx;
  explicit SigmoidCase(RngStream& rng) : x(randn(rng, {6})), gx({6}) {}
  NdArray forward() override {
    NdArray y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = sigmoid(x[i]);
    return y;
  }
  void backward(const NdArray& ct) override {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double s = sigmoid(x[i]);
      gx[i] += ct[i] * s * (1.0 - s);
    }
  }
  std::vector<GradLeaf> leaves() override { return {{"x", &x, &gx}}; }
};

struct SoftmaxCase : CheckCase {
  NdArray x, gx;
  explicit SoftmaxCase(RngStream& rng) : x(randn(rng, {7})), gx({7}) {}
  NdArray forward() override {
    NdArray y(x.shape());
    softmax_forward({x.data(), x.size()}, {y.data(), y.size()});
    return y;
  }
  void backward(const NdArray& ct) override {
    NdArray p(x.shape());
    softmax_forward({x.data(), x.size()}, {p.data(), p.size()});
    softmax_backward({p.data(), p.size()}, {ct.data(), ct.size()}, {gx.data(), gx.size()});
  }
  std::vector<GradLeaf> leaves() override { return {{"x", &x, &gx}}; }
};

// ---- sampling --------------------------------------------------------------

struct GridSampleCase : CheckCase {
  NdArray f, gf, pts, gpts;  // pts: N x 2 (u, v)
  GridSampleCase(RngStream& rng) : f(randn(rng, {5, 4, 3})), gf({5, 4, 3}),
                                   pts({4, 2}), gpts({4, 2}) {
    for (std::size_t i = 0; i < pts.dim(0); ++i) {
      pts(i, 0) = rng.uniform(0.2, 2.8);
      pts(i, 1) = rng.uniform(0.2, 3.8);
      while (!fraction_interior(pts(i, 0), 0.15)) pts(i, 0) = rng.uniform(0.2, 2.8);
      while (!fraction_interior(pts(i, 1), 0.15)) pts(i, 1) = rng.uniform(0.2, 3.8);
    }
  }
  NdArray forward() override {
    const std::size_t N = pts.dim(0), C = f.dim(2);
    NdArray y({N, C});
    for (std::size_t i = 0; i < N; ++i)
      bilinear_sample(f, pts(i, 0), pts(i, 1), {y.data() + i * C, C});
    return y;
  }
  void backward(const NdArray& ct) override {
    const std::size_t N = pts.dim(0), C = f.dim(2);
    for (std::size_t i = 0; i < N; ++i) {
      double du = 0, dv = 0;
      bilinear_sample_backward(f, pts(i, 0), pts(i, 1), {ct.data() + i * C, C}, &gf, &du,
                               &dv);
      gpts(i, 0) += du;
      gpts(i, 1) += dv;
    }
  }
  std::vector<GradLeaf> leaves() override {
    return {{"f", &f, &gf}, {"points", &pts, &gpts}};
  }
};

struct RoiPoolCase : CheckCase {
  NdArray f, gf;
  Box2D box;
  RoiPoolCase(RngStream& rng) : f(randn(rng, {6, 5, 3})), gf({6, 5, 3}) {
    box.u_min = rng.uniform(0.2, 1.5);
    box.v_min = rng.uniform(0.2, 2.0);
    box.u_max = box.u_min + rng.uniform(0.8, 2.5);
    box.v_max = box.v_min + rng.uniform(0.8, 3.0);
  }
  NdArray forward() override {
    NdArray y({f.dim(2)});
    roi_pool(f, box, {y.data(), y.size()});
    return y;
  }
  void backward(const NdArray& ct) override {
    RoiPoolCtx ctx;
    NdArray y({f.dim(2)});
    roi_pool(f, box, {y.data(), y.size()}, &ctx);
    roi_pool_backward(f, ctx, {ct.data(), ct.size()}, &gf);
  }
  std::vector<GradLeaf> leaves() override { return {{"f", &f, &gf}}; }
};

// ---- TGIF ------------------------------------------------------------------

struct TgifApplyCase : CheckCase {
  ParameterStore store;
  TgifConfig cfg;
  TgifParams params;
  NdArray f, gf, tokens, gtokens;

  TgifApplyCase(RngStream& rng) {
    cfg.channels = 4;
    cfg.token_dim = 4;
    cfg.layer_norm = true;
    params = TgifParams::create(store, cfg, 5, rng);
    // zero-initialized out_proj would hide its own gradient path; randomize
    init_normal(*params.out_proj, rng, 0.05);
    f = randn(rng, {3, 3, 4}, 0.7);
    gf = NdArray({3, 3, 4});
    tokens = randn(rng, {2, 4}, 0.7);
    gtokens = NdArray({2, 4});
  }
  NdArray forward() override { return tgif_apply(f, tokens, params, cfg); }
  void backward(const NdArray& ct) override {
    TgifApplyCtx ctx;
    tgif_apply(f, tokens, params, cfg, &ctx);
    tgif_apply_backward(ctx, ct, params, cfg, &gf, &gtokens);
  }
  std::vector<GradLeaf> leaves() override {
    auto ls = store_leaves(store);
    ls.push_back({"f", &f, &gf});
    ls.push_back({"tokens", &tokens, &gtokens});
    return ls;
  }
};

struct EncodePromptCase : CheckCase {
  ParameterStore store;
  TgifConfig cfg;
  TgifParams params;
  PromptSet prompt;

  EncodePromptCase(RngStream& rng) {
    cfg.channels = 4;
    cfg.token_dim = 4;
    params = TgifParams::create(store, cfg, 5, rng);
    prompt.classes = {1, 3};
    prompt.token_dim = 4;
  }
  NdArray forward() override { return encode_prompt(prompt, params, cfg); }
  void backward(const NdArray& ct) override {
    EncodePromptCtx ctx;
    encode_prompt(prompt, params, cfg, &ctx);
    encode_prompt_backward(ctx, ct, params, cfg);
  }
  std::vector<GradLeaf> leaves() override { return store_leaves(store); }
};

// ---- DSFR ------------------------------------------------------------------

struct ClassifyCase : CheckCase {
  ParameterStore store;
  DsfrConfig cfg;
  DsfrParams params;
  FeatureVolume F;
  NdArray gF;

  ClassifyCase(RngStream& rng) {
    cfg.channels = 3;
    cfg.heads = 1;
    cfg.points = 1;
    params = DsfrParams::create(store, cfg, rng);
    init_normal(*params.conv3_w, rng, 0.3);
    init_normal(*params.conv1_w, rng, 0.5);
    for (int attempt = 0; attempt < 64; ++attempt) {
      RngStream r = rng.split(attempt);
      F.feat = randn(r, {3, 3, 2, 3}, 0.8);
      F.valid.assign(18, 1);
      ClassifyCtx ctx;
      const OccupancyField occ = classify_occupancy(F, params, cfg, &ctx);
      bool ok = true;
      for (std::size_t i = 0; i < occ.prob.size() && ok; ++i)
        ok = std::abs(occ.prob[i] - occ.tau) > 2e-3;
      for (std::size_t i = 0; i < ctx.pre.size() && ok; ++i)
        ok = std::abs(ctx.pre[i]) > 1e-4;
      if (ok) break;
    }
    gF = NdArray(F.feat.shape());
  }
  NdArray forward() override {
    const OccupancyField occ = classify_occupancy(F, params, cfg);
    return occ.prob;
  }
  void backward(const NdArray& ct) override {
    ClassifyCtx ctx;
    const OccupancyField occ = classify_occupancy(F, params, cfg, &ctx);
    classify_occupancy_backward(ctx, occ, params, ct, &gF);
  }
  std::vector<GradLeaf> leaves() override {
    auto ls = store_leaves(store);
    ls.push_back({"F", &F.feat, &gF});
    return ls;
  }
};

struct RefineEmptyCase : CheckCase {
  ParameterStore store;
  Parameter* em;
  FeatureVolume F;
  NdArray gF;
  OccupancyField occ;
  NdArray gprob;

  RefineEmptyCase(RngStream& rng) {
    em = &store.add("em", {3});
    init_normal(*em, rng, 0.5);
    F.feat = randn(rng, {3, 3, 2, 3}, 0.8);
    F.valid.assign(18, 1);
    gF = NdArray(F.feat.shape());
    occ.prob = NdArray({3, 3, 2});
    occ.tau = 0.6;
    for (std::size_t i = 0; i < occ.prob.size(); ++i) {
      double p = rng.uniform(0.05, 0.95);
      while (std::abs(p - occ.tau) < 0.03) p = rng.uniform(0.05, 0.95);
      occ.prob[i] = p;
    }
    occ.rebuild_masks();  // masks stay fixed while prob wobbles
    gprob = NdArray(occ.prob.shape());
  }
  NdArray forward() override {
    const FeatureVolume out = refine_empty(F, occ, *em);
    return out.feat;
  }
  void backward(const NdArray& ct) override {
    RefineEmptyCtx ctx;
    refine_empty(F, occ, *em, &ctx);
    refine_empty_backward(ctx, *em, ct, &gF, &gprob);
  }
  std::vector<GradLeaf> leaves() override {
    auto ls = store_leaves(store);
    ls.push_back({"F", &F.feat, &gF});
    ls.push_back({"prob", &occ.prob, &gprob});
    return ls;
  }
};

struct RefineOccupiedCase : CheckCase {
  ParameterStore store;
  DsfrConfig cfg;
  DsfrParams params;
  VoxelGridSpec spec;
  std::vector<Projection> proj;
  OccupancyField occ;
  FeatureVolume F;
  NdArray f_T, gF, gfT;

  RefineOccupiedCase(RngStream& rng) {
    cfg.channels = 4;
    cfg.heads = 2;
    cfg.points = 2;
    params = DsfrParams::create(store, cfg, rng);
    spec.nx = 3;
    spec.ny = 3;
    spec.nz = 2;
    spec.voxel_size = 0.25;
    const CameraModel cam = make_scene_camera(spec, 5, 6);
    proj = project_grid(spec, cam);
    occ.prob = NdArray({3, 3, 2});
    occ.tau = 0.6;
    for (std::size_t i = 0; i < occ.prob.size(); ++i)
      occ.prob[i] = i % 3 == 0 ? 0.3 : 0.9;  // a mix of branches, fixed masks
    occ.rebuild_masks();

    for (int attempt = 0; attempt < 64; ++attempt) {
      RngStream r = rng.split(attempt);
      // offset biases push sample points off the pixel lattice
      for (std::size_t i = 0; i < params.off_b->value.size(); ++i)
        params.off_b->value[i] = r.uniform(-0.45, 0.45);
      F.feat = randn(r, {3, 3, 2, 4}, 0.7);
      F.valid.assign(18, 1);
      f_T = randn(r, {6, 5, 4}, 0.7);
      RefineOccupiedCtx ctx;
      refine_occupied(F, occ, proj, f_T, params, cfg, &ctx);
      bool ok = true;
      for (const auto& vc : ctx.voxels)
        for (std::size_t k = 0; k < vc.us.size() && ok; ++k)
          ok = fraction_interior(vc.us[k], 0.02) && fraction_interior(vc.vs[k], 0.02);
      if (ok) break;
    }
    gF = NdArray(F.feat.shape());
    gfT = NdArray(f_T.shape());
  }
  NdArray forward() override {
    const FeatureVolume out = refine_occupied(F, occ, proj, f_T, params, cfg);
    return out.feat;
  }
  void backward(const NdArray& ct) override {
    RefineOccupiedCtx ctx;
    refine_occupied(F, occ, proj, f_T, params, cfg, &ctx);
    refine_occupied_backward(ctx, f_T, params, cfg, ct, &gF, &gfT);
    // pass-through voxels: cotangent flows straight to F
    const std::size_t C = cfg.channels;
    for (std::size_t v = 0; v < occ.prob.size(); ++v) {
      const bool refined = occ.mask_occ[v] && proj[v].in_fov;
      if (refined) continue;
      for (std::size_t ch = 0; ch < C; ++ch) gF[v * C + ch] += ct[v * C + ch];
    }
  }
  std::vector<GradLeaf> leaves() override {
    auto ls = store_leaves(store);
    ls.push_back({"F", &F.feat, &gF});
    ls.push_back({"f_T", &f_T, &gfT});
    return ls;
  }
};

struct DsfrForwardCase : CheckCase {
  ParameterStore store;
  DsfrConfig cfg;
  DsfrParams params;
  VoxelGridSpec spec;
  std::vector<Projection> proj;
  FeatureVolume F;
  NdArray f_T, gF, gfT;

  DsfrForwardCase(RngStream& rng) {
    cfg.channels = 3;
    cfg.heads = 2;
    cfg.points = 2;
    params = DsfrParams::create(store, cfg, rng);
    init_normal(*params.conv3_w, rng, 0.25);
    init_normal(*params.conv1_w, rng, 0.6);
    init_normal(*params.em, rng, 0.5);
    spec.nx = 4;
    spec.ny = 4;
    spec.nz = 2;
    spec.voxel_size = 0.25;
    const CameraModel cam = make_scene_camera(spec, 6, 5);
    proj = project_grid(spec, cam);

    for (int attempt = 0; attempt < 128; ++attempt) {
      RngStream r = rng.split(1000 + attempt);
      for (std::size_t i = 0; i < params.off_b->value.size(); ++i)
        params.off_b->value[i] = r.uniform(-0.45, 0.45);
      F.feat = randn(r, {4, 4, 2, 3}, 0.8);
      F.valid.assign(32, 1);
      f_T = randn(r, {5, 6, 3}, 0.7);
      DsfrForwardCtx ctx;
      const DsfrForwardResult res = dsfr_forward(F, proj, f_T, params, cfg, &ctx);
      bool ok = res.stats.occupied_in_fov > 0 && res.stats.empty > 0;
      for (std::size_t i = 0; i < res.occ.prob.size() && ok; ++i)
        ok = std::abs(res.occ.prob[i] - res.occ.tau) > 2e-3;
      for (std::size_t i = 0; i < ctx.classify.pre.size() && ok; ++i)
        ok = std::abs(ctx.classify.pre[i]) > 1e-4;
      for (const auto& vc : ctx.occupied.voxels)
        for (std::size_t k = 0; k < vc.us.size() && ok; ++k)
          ok = fraction_interior(vc.us[k], 0.02) && fraction_interior(vc.vs[k], 0.02);
      if (ok) break;
    }
    gF = NdArray(F.feat.shape());
    gfT = NdArray(f_T.shape());
  }

  // Output: refined features concatenated with the occupancy probabilities.
  NdArray forward() override {
    const DsfrForwardResult res = dsfr_forward(F, proj, f_T, params, cfg);
    const std::size_t VC = res.feat.feat.size(), V = res.occ.prob.size();
    NdArray y({VC + V});
    for (std::size_t i = 0; i < VC; ++i) y[i] = res.feat.feat[i];
    for (std::size_t i = 0; i < V; ++i) y[VC + i] = res.occ.prob[i];
    return y;
  }
  void backward(const NdArray& ct) override {
    DsfrForwardCtx ctx;
    const DsfrForwardResult res = dsfr_forward(F, proj, f_T, params, cfg, &ctx);
    const std::size_t VC = res.feat.feat.size(), V = res.occ.prob.size();
    NdArray d_feat(res.feat.feat.shape()), d_prob(res.occ.prob.shape());
    for (std::size_t i = 0; i < VC; ++i) d_feat[i] = ct[i];
    for (std::size_t i = 0; i < V; ++i) d_prob[i] = ct[VC + i];
    dsfr_backward(ctx, res, f_T, params, cfg, d_feat, &d_prob, &gF, &gfT);
  }
  std::vector<GradLeaf> leaves() override {
    auto ls = store_leaves(store);
    ls.push_back({"F", &F.feat, &gF});
    ls.push_back({"f_T", &f_T, &gfT});
    return ls;
  }
};

// ---- lifting ---------------------------------------------------------------

struct LiftCase : CheckCase {
  ParameterStore store;
  LiftParams params;
  VoxelGridSpec spec;
  CameraModel cam;
  DepthVolume dvol;
  std::vector<Projection> proj;
  NdArray f_T, gfT;

  LiftCase(RngStream& rng) {
    params = LiftParams::create(store, 3, rng);
    init_normal(*params.proj, rng, 0.4);
    spec.nx = 3;
    spec.ny = 3;
    spec.nz = 2;
    spec.voxel_size = 0.25;
    cam = make_scene_camera(spec, 5, 6);
    proj = project_grid(spec, cam);
    NdArray depth({6, 5});  // all zero: uniform depth distributions
    dvol = DepthVolume::from_truth(depth, {0.0, 4.0, 8});
    f_T = randn(rng, {6, 5, 3}, 0.8);
    gfT = NdArray(f_T.shape());
  }
  NdArray forward() override {
    const FeatureVolume out = lift(f_T, spec, cam, dvol, params, proj);
    return out.feat;
  }
  void backward(const NdArray& ct) override {
    LiftCtx ctx;
    lift(f_T, spec, cam, dvol, params, proj, &ctx);
    lift_backward(f_T, ctx, params, ct, &gfT);
  }
  std::vector<GradLeaf> leaves() override {
    auto ls = store_leaves(store);
    ls.push_back({"f_T", &f_T, &gfT});
    return ls;
  }
};

// ---- losses ----------------------------------------------------------------

inline LabelGrid random_labels(RngStream& rng, std::size_t nx, std::size_t ny,
                               std::size_t nz, std::size_t K) {
  LabelGrid g;
  g.nx = nx;
  g.ny = ny;
  g.nz = nz;
  g.table = make_class_table(K);
  g.labels.resize(g.volume());
  for (auto& l : g.labels) l = static_cast<std::uint32_t>(rng.uniform_index(K));
  return g;
}

struct CeLossCase : CheckCase {
  NdArray logits, glogits;
  LabelGrid labels;
  CeLossCase(RngStream& rng)
      : logits(randn(rng, {3, 2, 2, 4}, 0.8)), glogits({3, 2, 2, 4}),
        labels(random_labels(rng, 3, 2, 2, 4)) {}
  NdArray forward() override {
    NdArray y({1});
    y[0] = ce_loss(logits, labels);
    return y;
  }
  void backward(const NdArray& ct) override {
    CeLossCtx ctx;
    ce_loss(logits, labels, nullptr, &ctx);
    ce_loss_backward(ctx, ct[0], &glogits);
  }
  std::vector<GradLeaf> leaves() override { return {{"logits", &logits, &glogits}}; }
};

struct OccLossCase : CheckCase {
  NdArray prob, gprob;
  std::vector<std::uint8_t> gt;
  OccLossCase(RngStream& rng) : prob({24}), gprob({24}) {
    gt.resize(24);
    bool has1 = false, has0 = false;
    for (std::size_t i = 0; i < 24; ++i) {
      prob[i] = rng.uniform(0.2, 0.8);
      gt[i] = rng.uniform() < 0.4;
      has1 |= gt[i];
      has0 |= !gt[i];
    }
    if (!has1) gt[0] = 1;
    if (!has0) gt[1] = 0;
  }
  NdArray forward() override {
    const OccLossTerms t = occ_loss(prob, gt);
    NdArray y({3});
    y[0] = t.l_p;
    y[1] = t.l_r;
    y[2] = t.l_s;
    return y;
  }
  void backward(const NdArray& ct) override {
    OccLossCtx ctx;
    occ_loss(prob, gt, &ctx);
    occ_loss_backward(ctx, ct[0], ct[1], ct[2], &gprob);
  }
  std::vector<GradLeaf> leaves() override { return {{"prob", &prob, &gprob}}; }
};

struct AffinityCase : CheckCase {
  NdArray logits, glogits;
  LabelGrid labels;
  AffinityCase(RngStream& rng)
      : logits(randn(rng, {3, 2, 2, 4}, 0.8)), glogits({3, 2, 2, 4}),
        labels(random_labels(rng, 3, 2, 2, 4)) {}
  NdArray forward() override {
    const AffinityTerms t = affinity_loss(logits, labels);
    NdArray y({2});
    y[0] = t.l_sem;
    y[1] = t.l_geo;
    return y;
  }
  void backward(const NdArray& ct) override {
    AffinityCtx ctx;
    affinity_loss(logits, labels, &ctx);
    affinity_loss_backward(ctx, ct[0], ct[1], &glogits);
  }
  std::vector<GradLeaf> leaves() override { return {{"logits", &logits, &glogits}}; }
};

}  // namespace detail

inline void register_builtin_diff_ops() {
  static bool done = false;
  if (done) return;
  done = true;
  auto reg = [](const char* name, auto maker) {
    register_diff_op(name, [maker](RngStream& rng) -> std::unique_ptr<CheckCase> {
      return maker(rng);
    });
  };
  reg("linear3x", [](RngStream& r) { return std::make_unique<detail::Linear3xCase>(r); });
  reg("sigmoid", [](RngStream& r) { return std::make_unique<detail::SigmoidCase>(r); });
  reg("softmax", [](RngStream& r) { return std::make_unique<detail::SoftmaxCase>(r); });
  reg("grid_sample", [](RngStream& r) { return std::make_unique<detail::GridSampleCase>(r); });
  reg("roi_pool", [](RngStream& r) { return std::make_unique<detail::RoiPoolCase>(r); });
  reg("tgif_apply", [](RngStream& r) { return std::make_unique<detail::TgifApplyCase>(r); });
  reg("encode_prompt",
      [](RngStream& r) { return std::make_unique<detail::EncodePromptCase>(r); });
  reg("classify_occupancy",
      [](RngStream& r) { return std::make_unique<detail::ClassifyCase>(r); });
  reg("refine_empty",
      [](RngStream& r) { return std::make_unique<detail::RefineEmptyCase>(r); });
  reg("refine_occupied",
      [](RngStream& r) { return std::make_unique<detail::RefineOccupiedCase>(r); });
  reg("dsfr_forward",
      [](RngStream& r) { return std::make_unique<detail::DsfrForwardCase>(r); });
  reg("lift", [](RngStream& r) { return std::make_unique<detail::LiftCase>(r); });
  reg("ce_loss", [](RngStream& r) { return std::make_unique<detail::CeLossCase>(r); });
  reg("occ_loss", [](RngStream& r) { return std::make_unique<detail::OccLossCase>(r); });
  reg("affinity_loss",
      [](RngStream& r) { return std::make_unique<detail::AffinityCase>(r); });
}

}  // namespace voxsam
