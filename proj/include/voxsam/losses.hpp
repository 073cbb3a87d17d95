#pragma once

// Training objectives (Eqs. 11-13) and evaluation metrics.
//
// The scene-class affinity terms and the occupancy loss use the MonoScene
// soft-count formulation: P = sum(p*y)/sum(p), R = sum(p*y)/sum(y),
// S = sum((1-p)(1-y))/sum(1-y), each contributing -log of the ratio clamped
// below at eps = 1e-6. Degenerate denominators contribute 0 and set a flag
// instead of producing NaN.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "voxsam/error.hpp"
#include "voxsam/labels.hpp"
#include "voxsam/ndarray.hpp"
#include "voxsam/ops.hpp"

namespace voxsam {

constexpr double kLossEps = 1e-6;

// -log(ratio) with the ratio clamped to [eps, 1]; clamped ratios carry no
// gradient. num/den are soft counts.
inline double neg_log_ratio(double num, double den, bool* clamped) {
  double r = num / den;
  if (r >= 1.0) {
    if (clamped) *clamped = true;
    return 0.0;
  }
  if (r < kLossEps) {
    if (clamped) *clamped = true;
    r = kLossEps;
  } else if (clamped) {
    *clamped = false;
  }
  return -std::log(r);
}

// ---------------------------------------------------------------------------
// Cross-entropy over per-voxel class scores

struct CeLossCtx {
  NdArray probs;                     // V x K softmax
  std::vector<std::uint32_t> labels;
  std::vector<std::uint8_t> ignored;
  std::size_t counted = 0;
};

// Mean over voxels of -log softmax(logits)[label]; voxels flagged in `ignore`
// are skipped.
inline double ce_loss(const NdArray& logits, const LabelGrid& labels,
                      const std::vector<std::uint8_t>* ignore = nullptr,
                      CeLossCtx* ctx = nullptr) {
  require(logits.rank() == 4, ErrorKind::InvalidShape, "logits must be X x Y x Z x K");
  const std::size_t V = labels.volume(), K = logits.dim(3);
  require(logits.size() == V * K, ErrorKind::InvalidShape, "logit grid/label grid mismatch");
  require(K == labels.table.size(), ErrorKind::InvalidShape, "class count mismatch");

  NdArray probs({V, K});
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t v = 0; v < V; ++v) {
    softmax_forward({logits.data() + v * K, K}, {probs.data() + v * K, K});
    if (ignore && (*ignore)[v]) continue;
    const double p = probs[v * K + labels.labels[v]];
    total += -std::log(std::max(p, 1e-300));
    ++counted;
  }
  if (ctx) {
    ctx->probs = std::move(probs);
    ctx->labels = labels.labels;
    ctx->ignored.assign(V, 0);
    if (ignore) ctx->ignored = *ignore;
    ctx->counted = counted;
  }
  return counted ? total / static_cast<double>(counted) : 0.0;
}

inline void ce_loss_backward(const CeLossCtx& ctx, double d_loss, NdArray* d_logits) {
  const std::size_t V = ctx.labels.size();
  const std::size_t K = ctx.probs.dim(1);
  if (ctx.counted == 0) return;
  const double scale = d_loss / static_cast<double>(ctx.counted);
  for (std::size_t v = 0; v < V; ++v) {
    if (ctx.ignored[v]) continue;
    const double* p = ctx.probs.data() + v * K;
    double* g = d_logits->data() + v * K;
    for (std::size_t k = 0; k < K; ++k)
      g[k] += scale * (p[k] - (k == ctx.labels[v] ? 1.0 : 0.0));
  }
}

// ---------------------------------------------------------------------------
// Occupancy loss (Eq. 12): precision / recall / specificity BCE terms

struct OccLossTerms {
  double l_p = 0.0, l_r = 0.0, l_s = 0.0;
  bool precision_degenerate = false, recall_degenerate = false,
       specificity_degenerate = false;

  double total() const { return l_p + l_r + l_s; }
};

struct OccLossCtx {
  NdArray prob;
  std::vector<std::uint8_t> gt;
  double sum_p = 0, sum_py = 0, sum_y = 0, sum_qn = 0, sum_n = 0;
  OccLossTerms terms;
  bool p_clamped = false, r_clamped = false, s_clamped = false;
};

inline OccLossTerms occ_loss(const NdArray& prob, const std::vector<std::uint8_t>& gt_occ,
                             OccLossCtx* ctx = nullptr) {
  require(prob.size() == gt_occ.size(), ErrorKind::InvalidShape, "occ loss shape mismatch");
  double sum_p = 0, sum_py = 0, sum_y = 0, sum_qn = 0, sum_n = 0;
  for (std::size_t i = 0; i < prob.size(); ++i) {
    const double p = prob[i];
    const double y = gt_occ[i] ? 1.0 : 0.0;
    sum_p += p;
    sum_py += p * y;
    sum_y += y;
    sum_qn += (1.0 - p) * (1.0 - y);
    sum_n += 1.0 - y;
  }
  OccLossTerms t;
  bool clamp_p = true, clamp_r = true, clamp_s = true;
  if (sum_p > 0.0)
    t.l_p = neg_log_ratio(sum_py, sum_p, &clamp_p);
  else
    t.precision_degenerate = true;
  if (sum_y > 0.0)
    t.l_r = neg_log_ratio(sum_py, sum_y, &clamp_r);
  else
    t.recall_degenerate = true;
  if (sum_n > 0.0)
    t.l_s = neg_log_ratio(sum_qn, sum_n, &clamp_s);
  else
    t.specificity_degenerate = true;
  if (ctx) {
    ctx->prob = prob;
    ctx->gt = gt_occ;
    ctx->sum_p = sum_p;
    ctx->sum_py = sum_py;
    ctx->sum_y = sum_y;
    ctx->sum_qn = sum_qn;
    ctx->sum_n = sum_n;
    ctx->terms = t;
    ctx->p_clamped = clamp_p;
    ctx->r_clamped = clamp_r;
    ctx->s_clamped = clamp_s;
  }
  return t;
}

// d_terms are the cotangents of (l_p, l_r, l_s).
inline void occ_loss_backward(const OccLossCtx& c, double d_lp, double d_lr, double d_ls,
                              NdArray* d_prob) {
  const std::size_t n = c.prob.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double y = c.gt[i] ? 1.0 : 0.0;
    double g = 0.0;
    if (!c.terms.precision_degenerate && !c.p_clamped)
      g += d_lp * (1.0 / c.sum_p - y / c.sum_py);
    if (!c.terms.recall_degenerate && !c.r_clamped) g += d_lr * (-y / c.sum_py);
    if (!c.terms.specificity_degenerate && !c.s_clamped)
      g += d_ls * ((1.0 - y) / c.sum_qn);
    (*d_prob)[i] += g;
  }
}

// ---------------------------------------------------------------------------
// Scene-class affinity loss (l_sem on per-class probability mass, l_geo on
// the non-empty mass)

struct AffinityCtx {
  NdArray probs;  // V x K softmax of the logits
  std::vector<std::uint32_t> labels;
  std::vector<std::uint8_t> gt_occ;
  // per present class: soft counts and clamp flags
  struct ClassTermCtx {
    std::uint32_t k = 0;
    double sum_p = 0, sum_py = 0, sum_y = 0, sum_qn = 0, sum_n = 0;
    bool has_p = false, has_s = false;
    bool p_clamped = false, r_clamped = false, s_clamped = false;
  };
  std::vector<ClassTermCtx> sem;
  ClassTermCtx geo;
  std::size_t class_count = 0;
};

struct AffinityTerms {
  double l_sem = 0.0, l_geo = 0.0;
};

inline AffinityTerms affinity_loss(const NdArray& logits, const LabelGrid& labels,
                                   AffinityCtx* ctx = nullptr) {
  const std::size_t V = labels.volume(), K = logits.dim(3);
  require(logits.size() == V * K, ErrorKind::InvalidShape, "affinity shape mismatch");

  NdArray probs({V, K});
  for (std::size_t v = 0; v < V; ++v)
    softmax_forward({logits.data() + v * K, K}, {probs.data() + v * K, K});

  AffinityTerms out;
  if (ctx) {
    ctx->labels = labels.labels;
    ctx->sem.clear();
  }

  // l_sem: soft precision/recall/specificity per class present in gt,
  // averaged over those classes.
  std::size_t present = 0;
  double sem_total = 0.0;
  for (std::uint32_t k = 0; k < K; ++k) {
    double sum_p = 0, sum_py = 0, sum_y = 0, sum_qn = 0, sum_n = 0;
    for (std::size_t v = 0; v < V; ++v) {
      const double p = probs[v * K + k];
      const double y = labels.labels[v] == k ? 1.0 : 0.0;
      sum_p += p;
      sum_py += p * y;
      sum_y += y;
      sum_qn += (1.0 - p) * (1.0 - y);
      sum_n += 1.0 - y;
    }
    if (sum_y == 0.0) continue;  // class absent from gt
    ++present;
    AffinityCtx::ClassTermCtx tc;
    tc.k = k;
    tc.sum_p = sum_p;
    tc.sum_py = sum_py;
    tc.sum_y = sum_y;
    tc.sum_qn = sum_qn;
    tc.sum_n = sum_n;
    if (sum_p > 0.0) {
      tc.has_p = true;
      sem_total += neg_log_ratio(sum_py, sum_p, &tc.p_clamped);
    }
    sem_total += neg_log_ratio(sum_py, sum_y, &tc.r_clamped);
    if (sum_n > 0.0) {
      tc.has_s = true;
      sem_total += neg_log_ratio(sum_qn, sum_n, &tc.s_clamped);
    }
    if (ctx) ctx->sem.push_back(tc);
  }
  out.l_sem = present ? sem_total / static_cast<double>(present) : 0.0;

  // l_geo: the same three terms on the non-empty probability mass.
  {
    AffinityCtx::ClassTermCtx tc;
    std::vector<std::uint8_t> gt_occ(V);
    for (std::size_t v = 0; v < V; ++v) {
      double pocc = 0.0;
      for (std::uint32_t k = 1; k < K; ++k) pocc += probs[v * K + k];
      const double y = labels.labels[v] != 0 ? 1.0 : 0.0;
      gt_occ[v] = labels.labels[v] != 0;
      tc.sum_p += pocc;
      tc.sum_py += pocc * y;
      tc.sum_y += y;
      tc.sum_qn += (1.0 - pocc) * (1.0 - y);
      tc.sum_n += 1.0 - y;
    }
    double geo = 0.0;
    if (tc.sum_p > 0.0) {
      tc.has_p = true;
      geo += neg_log_ratio(tc.sum_py, tc.sum_p, &tc.p_clamped);
    }
    if (tc.sum_y > 0.0) geo += neg_log_ratio(tc.sum_py, tc.sum_y, &tc.r_clamped);
    if (tc.sum_n > 0.0) {
      tc.has_s = true;
      geo += neg_log_ratio(tc.sum_qn, tc.sum_n, &tc.s_clamped);
    }
    out.l_geo = tc.sum_y > 0.0 ? geo : 0.0;
    if (ctx) {
      ctx->geo = tc;
      ctx->gt_occ = std::move(gt_occ);
    }
  }
  if (ctx) {
    ctx->probs = std::move(probs);
    ctx->class_count = K;
  }
  return out;
}

inline void affinity_loss_backward(const AffinityCtx& c, double d_sem, double d_geo,
                                   NdArray* d_logits) {
  const std::size_t K = c.class_count;
  const std::size_t V = c.labels.size();
  NdArray d_probs({V, K});

  if (!c.sem.empty()) {
    const double scale = d_sem / static_cast<double>(c.sem.size());
    for (const auto& tc : c.sem) {
      for (std::size_t v = 0; v < V; ++v) {
        const double y = c.labels[v] == tc.k ? 1.0 : 0.0;
        double g = 0.0;
        if (tc.has_p && !tc.p_clamped) g += 1.0 / tc.sum_p - y / tc.sum_py;
        if (!tc.r_clamped) g += -y / tc.sum_py;
        if (tc.has_s && !tc.s_clamped) g += (1.0 - y) / tc.sum_qn;
        d_probs[v * K + tc.k] += scale * g;
      }
    }
  }
  if (c.geo.sum_y > 0.0) {
    for (std::size_t v = 0; v < V; ++v) {
      const double y = c.gt_occ[v] ? 1.0 : 0.0;
      double g = 0.0;
      if (c.geo.has_p && !c.geo.p_clamped) g += 1.0 / c.geo.sum_p - y / c.geo.sum_py;
      if (!c.geo.r_clamped) g += -y / c.geo.sum_py;
      if (c.geo.has_s && !c.geo.s_clamped) g += (1.0 - y) / c.geo.sum_qn;
      for (std::uint32_t k = 1; k < K; ++k) d_probs[v * K + k] += d_geo * g;
    }
  }
  for (std::size_t v = 0; v < V; ++v)
    softmax_backward({c.probs.data() + v * K, K}, {d_probs.data() + v * K, K},
                     {d_logits->data() + v * K, K});
}

// ---------------------------------------------------------------------------
// Metrics

struct IouResult {
  double iou = 0.0;
  std::vector<double> per_class;  // classes 1..K-1; NaN when absent in both
  double miou = 0.0;
};

// Binary IoU on occupancy plus per-class IoU over semantic classes 1..K-1;
// mIoU averages the classes present in either grid.
inline IouResult iou_miou(const LabelGrid& pred, const LabelGrid& gt) {
  require(pred.volume() == gt.volume(), ErrorKind::InvalidShape, "grid size mismatch");
  require(pred.table.size() == gt.table.size(), ErrorKind::InvalidShape,
          "class table mismatch");
  const std::size_t K = gt.table.size();
  IouResult r;
  std::uint64_t tp = 0, fp = 0, fn = 0;
  std::vector<std::uint64_t> ctp(K, 0), cfp(K, 0), cfn(K, 0);
  for (std::size_t v = 0; v < pred.labels.size(); ++v) {
    const std::uint32_t pl = pred.labels[v], gl = gt.labels[v];
    const bool po = pl != 0, go = gl != 0;
    tp += po && go;
    fp += po && !go;
    fn += !po && go;
    if (pl == gl) {
      ++ctp[pl];
    } else {
      ++cfp[pl];
      ++cfn[gl];
    }
  }
  r.iou = (tp + fp + fn) ? static_cast<double>(tp) / static_cast<double>(tp + fp + fn) : 0.0;
  r.per_class.assign(K > 1 ? K - 1 : 0, std::nan(""));
  double sum = 0.0;
  std::size_t counted = 0;
  for (std::uint32_t k = 1; k < K; ++k) {
    const std::uint64_t u = ctp[k] + cfp[k] + cfn[k];
    if (u == 0) continue;  // absent in both
    r.per_class[k - 1] = static_cast<double>(ctp[k]) / static_cast<double>(u);
    sum += r.per_class[k - 1];
    ++counted;
  }
  r.miou = counted ? sum / static_cast<double>(counted) : 0.0;
  return r;
}

// ---------------------------------------------------------------------------
// Assembled report (Eqs. 11-13); the sum identities are built, not re-derived.

struct LossReport {
  double l_sem = 0, l_geo = 0, l_ce = 0, l_depth = 0;
  double l_p = 0, l_r = 0, l_s = 0;
  double l_ssc = 0, l_occ = 0, l_total = 0;
  bool depth_enabled = false;

  static LossReport assemble(double sem, double geo, double ce, const OccLossTerms& occ,
                             double depth = 0.0, bool depth_on = false) {
    LossReport r;
    r.l_sem = sem;
    r.l_geo = geo;
    r.l_ce = ce;
    r.l_depth = depth_on ? depth : 0.0;
    r.depth_enabled = depth_on;
    r.l_p = occ.l_p;
    r.l_r = occ.l_r;
    r.l_s = occ.l_s;
    r.l_ssc = r.l_sem + r.l_geo + r.l_ce + (depth_on ? r.l_depth : 0.0);
    r.l_occ = r.l_p + r.l_r + r.l_s;
    r.l_total = r.l_ssc + r.l_occ;
    return r;
  }

  nlohmann::json to_json() const {
    return nlohmann::json{{"l_sem", l_sem},   {"l_geo", l_geo}, {"l_ce", l_ce},
                          {"l_depth", l_depth}, {"l_p", l_p},   {"l_r", l_r},
                          {"l_s", l_s},       {"l_ssc", l_ssc}, {"l_occ", l_occ},
                          {"l_total", l_total}, {"depth_enabled", depth_enabled}};
  }
};

}  // namespace voxsam
