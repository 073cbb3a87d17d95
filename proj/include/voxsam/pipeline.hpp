#pragma once

// End-to-end composition: foreground dropout -> TGIF -> depth-weighted
// lifting -> DSFR -> linear per-voxel classification head -> losses and
// metrics, with a hand-chained backward pass over the registered rules and a
// plain-gradient-descent toy training loop.

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "voxsam/camera.hpp"
#include "voxsam/dsfr.hpp"
#include "voxsam/fgdrop.hpp"
#include "voxsam/labels.hpp"
#include "voxsam/lift3d.hpp"
#include "voxsam/losses.hpp"
#include "voxsam/ndarray.hpp"
#include "voxsam/param.hpp"
#include "voxsam/scene.hpp"
#include "voxsam/tgif.hpp"

namespace voxsam {

struct PipelineParams {
  ParameterStore store;
  TgifConfig tgif_cfg;
  DsfrConfig dsfr_cfg;
  TgifParams tgif;
  LiftParams lift;
  DsfrParams dsfr;
  Parameter* head_w = nullptr;  // K x C
  Parameter* head_b = nullptr;  // K

  static PipelineParams create(const RunConfig& cfg) {
    PipelineParams p;
    p.tgif_cfg.channels = cfg.channels;
    p.tgif_cfg.token_dim = cfg.token_dim;
    p.tgif_cfg.layer_norm = cfg.tgif_layer_norm;
    p.dsfr_cfg.channels = cfg.channels;
    p.dsfr_cfg.heads = cfg.heads;
    p.dsfr_cfg.points = cfg.points;
    RngStream rng(cfg.seed);
    p.tgif = TgifParams::create(p.store, p.tgif_cfg, cfg.class_count, rng);
    p.lift = LiftParams::create(p.store, cfg.channels, rng);
    p.dsfr = DsfrParams::create(p.store, p.dsfr_cfg, rng);
    p.head_w = &p.store.add("head.w", {cfg.class_count, cfg.channels});
    p.head_b = &p.store.add("head.b", {cfg.class_count});
    RngStream hr = rng.split(41);
    init_normal(*p.head_w, hr);
    return p;
  }
};

struct PipelineCtx {
  LabelGrid supervision;  // labels after foreground dropout
  PromptSet prompt;
  EncodePromptCtx encode;
  NdArray tokens;
  TgifApplyCtx tgif;
  NdArray f_T;
  std::vector<Projection> proj;
  LiftCtx lift;
  FeatureVolume lifted;
  DsfrForwardCtx dsfr;
  DsfrForwardResult dsfr_out;
  NdArray logits;  // X x Y x Z x K
  CeLossCtx ce;
  AffinityCtx affinity;
  OccLossCtx occ;
};

struct PipelineResult {
  LabelGrid pred;
  LossReport losses;
  IouResult metrics;
  DsfrStats stats;
  std::string prompt_text;

  nlohmann::json to_json() const {
    nlohmann::json m{{"iou", metrics.iou}, {"miou", metrics.miou}};
    nlohmann::json per = nlohmann::json::array();
    for (double v : metrics.per_class) per.push_back(std::isnan(v) ? nlohmann::json() : nlohmann::json(v));
    m["per_class_iou"] = per;
    return nlohmann::json{{"losses", losses.to_json()},
                          {"metrics", m},
                          {"instrumentation", nlohmann::json::parse(stats.to_json_string())},
                          {"prompt", prompt_text}};
  }
};

// Forward pass. dropout_p overrides the config (pass 0 for an evaluation
// pass); drop_rng drives only the foreground dropout draws.
inline PipelineResult run_pipeline(const SyntheticScene& scene, PipelineParams& params,
                                   const RunConfig& cfg, double dropout_p,
                                   RngStream drop_rng, PipelineCtx* ctx = nullptr) {
  PipelineCtx local;
  PipelineCtx& c = ctx ? *ctx : local;

  DropoutConfig dc{dropout_p};
  auto [supervision, prompt] = drop_foreground(scene.labels, dc, drop_rng);
  prompt.token_dim = cfg.token_dim;
  c.supervision = std::move(supervision);
  c.prompt = prompt;

  c.tokens = encode_prompt(prompt, params.tgif, params.tgif_cfg, &c.encode);
  c.f_T = tgif_apply(scene.features, c.tokens, params.tgif, params.tgif_cfg, &c.tgif);

  const DepthVolume dvol = DepthVolume::from_truth(scene.depth, scene.bins);
  c.proj = project_grid(scene.spec, scene.cam);
  c.lifted = lift(c.f_T, scene.spec, scene.cam, dvol, params.lift, c.proj, &c.lift);

  c.dsfr_out = dsfr_forward(c.lifted, c.proj, c.f_T, params.dsfr, params.dsfr_cfg, &c.dsfr);

  const std::size_t V = c.supervision.volume();
  const std::size_t K = cfg.class_count, C = cfg.channels;
  c.logits = NdArray({scene.spec.nx, scene.spec.ny, scene.spec.nz, K});
  for (std::size_t v = 0; v < V; ++v)
    affine_forward(params.head_w->value, params.head_b->value,
                   {c.dsfr_out.feat.feat.data() + v * C, C}, {c.logits.data() + v * K, K});

  const double ce = ce_loss(c.logits, c.supervision, nullptr, &c.ce);
  const AffinityTerms aff = affinity_loss(c.logits, c.supervision, &c.affinity);
  std::vector<std::uint8_t> gt_occ(V);
  for (std::size_t v = 0; v < V; ++v) gt_occ[v] = c.supervision.labels[v] != 0;
  const OccLossTerms occ = occ_loss(c.dsfr_out.occ.prob, gt_occ, &c.occ);

  PipelineResult r;
  r.losses = LossReport::assemble(aff.l_sem, aff.l_geo, ce, occ);
  r.stats = c.dsfr_out.stats;
  r.prompt_text = prompt_to_string(prompt, scene.labels.table);

  r.pred.nx = scene.spec.nx;
  r.pred.ny = scene.spec.ny;
  r.pred.nz = scene.spec.nz;
  r.pred.table = scene.labels.table;
  r.pred.labels.resize(V);
  for (std::size_t v = 0; v < V; ++v) {
    const double* l = c.logits.data() + v * K;
    std::size_t best = 0;
    for (std::size_t k = 1; k < K; ++k)
      if (l[k] > l[best]) best = k;
    r.pred.labels[v] = static_cast<std::uint32_t>(best);
  }
  r.metrics = iou_miou(r.pred, c.supervision);
  return r;
}

// Chains d(l_total) = 1 through every module; gradients accumulate in the
// parameter store. The caller zeroes grads beforehand.
inline void pipeline_backward(PipelineCtx& c, PipelineParams& params, const RunConfig& cfg) {
  const std::size_t V = c.supervision.volume();
  const std::size_t K = cfg.class_count, C = cfg.channels;

  NdArray d_logits(c.logits.shape());
  ce_loss_backward(c.ce, 1.0, &d_logits);
  affinity_loss_backward(c.affinity, 1.0, 1.0, &d_logits);

  NdArray d_refined({c.supervision.nx, c.supervision.ny, c.supervision.nz, C});
  for (std::size_t v = 0; v < V; ++v)
    affine_backward(params.head_w->value, {c.dsfr_out.feat.feat.data() + v * C, C},
                    {d_logits.data() + v * K, K}, &params.head_w->grad,
                    &params.head_b->grad, {d_refined.data() + v * C, C});

  NdArray d_prob(c.dsfr_out.occ.prob.shape());
  occ_loss_backward(c.occ, 1.0, 1.0, 1.0, &d_prob);

  NdArray d_lifted(d_refined.shape());
  NdArray d_fT(c.f_T.shape());
  dsfr_backward(c.dsfr, c.dsfr_out, c.f_T, params.dsfr, params.dsfr_cfg, d_refined,
                &d_prob, &d_lifted, &d_fT);

  lift_backward(c.f_T, c.lift, params.lift, d_lifted, &d_fT);

  NdArray d_tokens(c.tokens.shape());
  tgif_apply_backward(c.tgif, d_fT, params.tgif, params.tgif_cfg, nullptr, &d_tokens);
  encode_prompt_backward(c.encode, d_tokens, params.tgif, params.tgif_cfg);
}

struct TrainStep {
  std::size_t step = 0;
  double train_total = 0.0;
  double eval_total = 0.0;
  double eval_miou = 0.0;
};

struct TrainCurve {
  std::vector<TrainStep> steps;  // entry 0 is the pre-update state
  bool diverged = false;

  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : steps)
      arr.push_back({{"step", s.step},
                     {"train_total", s.train_total},
                     {"eval_total", s.eval_total},
                     {"eval_miou", s.eval_miou}});
    return nlohmann::json{{"curve", arr}, {"diverged", diverged}};
  }
};

// Plain gradient descent on one fixed scene. Entry 0 of the curve records
// the untrained state; training losses use the per-step dropout draw while
// eval entries re-run the pipeline with dropout disabled.
inline TrainCurve train_toy(const RunConfig& cfg, PipelineParams* out_params = nullptr,
                            SyntheticScene* out_scene = nullptr) {
  RngStream scene_rng = RngStream(cfg.seed).split(100);
  SyntheticScene scene = gen_scene(cfg, scene_rng);
  PipelineParams params = PipelineParams::create(cfg);

  TrainCurve curve;
  auto eval_pass = [&](std::size_t step_idx, double train_total) {
    PipelineResult ev =
        run_pipeline(scene, params, cfg, 0.0, RngStream(cfg.seed).split(999));
    curve.steps.push_back({step_idx, train_total, ev.losses.l_total, ev.metrics.miou});
  };

  {
    PipelineResult init =
        run_pipeline(scene, params, cfg, cfg.dropout_p, RngStream(cfg.seed).split(200));
    eval_pass(0, init.losses.l_total);
  }

  std::vector<double> snapshot;
  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    snapshot.clear();
    for (std::size_t i = 0; i < params.store.size(); ++i)
      for (std::size_t j = 0; j < params.store[i].value.size(); ++j)
        snapshot.push_back(params.store[i].value[j]);

    PipelineCtx ctx;
    PipelineResult r = run_pipeline(scene, params, cfg, cfg.dropout_p,
                                    RngStream(cfg.seed).split(200 + step), &ctx);
    if (!std::isfinite(r.losses.l_total)) {
      curve.diverged = true;
      break;
    }
    params.store.zero_grads();
    pipeline_backward(ctx, params, cfg);

    bool finite = true;
    for (std::size_t i = 0; i < params.store.size() && finite; ++i)
      finite = params.store[i].grad.all_finite();
    if (!finite) {
      curve.diverged = true;
      break;
    }
    for (std::size_t i = 0; i < params.store.size(); ++i) {
      Parameter& p = params.store[i];
      for (std::size_t j = 0; j < p.value.size(); ++j)
        p.value[j] -= cfg.learning_rate * p.grad[j];
    }
    eval_pass(step, r.losses.l_total);
    if (!std::isfinite(curve.steps.back().eval_total)) {
      // roll back to the last finite state
      std::size_t k = 0;
      for (std::size_t i = 0; i < params.store.size(); ++i)
        for (std::size_t j = 0; j < params.store[i].value.size(); ++j)
          params.store[i].value[j] = snapshot[k++];
      curve.steps.pop_back();
      curve.diverged = true;
      break;
    }
  }

  if (out_params) *out_params = std::move(params);
  if (out_scene) *out_scene = std::move(scene);
  return curve;
}

}  // namespace voxsam
