#pragma once

// Text-Guided Image Filter. The language encoder is replaced by a learned
// per-class embedding table; prompt tokens pass through one self-attention
// layer, then every pixel cross-attends to the tokens and the update is added
// residually (followed by an optional layer norm). The cross-attention output
// projection starts at zero, so the filter is the identity at initialization.

#include <cmath>
#include <vector>

#include "voxsam/error.hpp"
#include "voxsam/fgdrop.hpp"
#include "voxsam/ndarray.hpp"
#include "voxsam/ops.hpp"
#include "voxsam/param.hpp"

namespace voxsam {

struct TgifConfig {
  std::size_t channels = 8;   // feature map width C
  std::size_t token_dim = 8;  // d
  bool layer_norm = true;     // false makes the final layer norm the identity
};

struct TgifParams {
  Parameter* table = nullptr;       // n_classes x d
  Parameter* null_token = nullptr;  // d, used when the prompt is empty
  Parameter *tok_q = nullptr, *tok_k = nullptr, *tok_v = nullptr, *tok_o = nullptr;  // d x d
  Parameter* pix_q = nullptr;                           // d x C
  Parameter *cross_k = nullptr, *cross_v = nullptr;     // d x d
  Parameter* out_proj = nullptr;                        // C x d, zero-initialized
  Parameter *ln_gamma = nullptr, *ln_beta = nullptr;    // C

  static TgifParams create(ParameterStore& store, const TgifConfig& cfg,
                           std::size_t n_classes, RngStream& rng) {
    const std::size_t d = cfg.token_dim, C = cfg.channels;
    TgifParams p;
    p.table = &store.add("tgif.table", {n_classes, d});
    p.null_token = &store.add("tgif.null_token", {d});
    p.tok_q = &store.add("tgif.tok_q", {d, d});
    p.tok_k = &store.add("tgif.tok_k", {d, d});
    p.tok_v = &store.add("tgif.tok_v", {d, d});
    p.tok_o = &store.add("tgif.tok_o", {d, d});
    p.pix_q = &store.add("tgif.pix_q", {d, C});
    p.cross_k = &store.add("tgif.cross_k", {d, d});
    p.cross_v = &store.add("tgif.cross_v", {d, d});
    p.out_proj = &store.add("tgif.out_proj", {C, d});
    p.ln_gamma = &store.add("tgif.ln_gamma", {C});
    p.ln_beta = &store.add("tgif.ln_beta", {C});
    RngStream r = rng.split(17);
    init_normal(*p.table, r);
    init_normal(*p.null_token, r);
    init_normal(*p.tok_q, r);
    init_normal(*p.tok_k, r);
    init_normal(*p.tok_v, r);
    init_normal(*p.tok_o, r);
    init_normal(*p.pix_q, r);
    init_normal(*p.cross_k, r);
    init_normal(*p.cross_v, r);
    p.out_proj->value.fill(0.0);
    p.ln_gamma->value.fill(1.0);
    // ln_beta stays zero
    return p;
  }
};

struct EncodePromptCtx {
  std::vector<int> rows;  // table row per token, -1 for the null token
  NdArray x, q, k, v, attn, ctx_v;
};

// Rows of the embedding table for the retained classes, in prompt order,
// passed through one self-attention layer. An empty prompt yields the single
// learned null token run through the same layer.
inline NdArray encode_prompt(const PromptSet& prompt, const TgifParams& p,
                             const TgifConfig& cfg, EncodePromptCtx* ctx = nullptr) {
  const std::size_t d = cfg.token_dim;
  std::vector<int> rows;
  if (prompt.empty()) {
    rows.push_back(-1);
  } else {
    for (std::uint32_t c : prompt.classes) {
      require(c != 0 && c < p.table->value.dim(0), ErrorKind::InvalidShape,
              "prompt class out of table range");
      rows.push_back(static_cast<int>(c));
    }
  }
  const std::size_t T = rows.size();
  NdArray x({T, d});
  for (std::size_t i = 0; i < T; ++i) {
    const double* src = rows[i] < 0 ? p.null_token->value.data()
                                    : p.table->value.data() + rows[i] * d;
    for (std::size_t j = 0; j < d; ++j) x(i, j) = src[j];
  }

  NdArray q({T, d}), k({T, d}), v({T, d});
  for (std::size_t i = 0; i < T; ++i) {
    affine_forward(p.tok_q->value, {}, {x.data() + i * d, d}, {q.data() + i * d, d});
    affine_forward(p.tok_k->value, {}, {x.data() + i * d, d}, {k.data() + i * d, d});
    affine_forward(p.tok_v->value, {}, {x.data() + i * d, d}, {v.data() + i * d, d});
  }

  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  NdArray attn({T, T}), ctx_v({T, d}), out({T, d});
  std::vector<double> logits(T);
  for (std::size_t i = 0; i < T; ++i) {
    for (std::size_t j = 0; j < T; ++j) {
      double s = 0.0;
      for (std::size_t a = 0; a < d; ++a) s += q(i, a) * k(j, a);
      logits[j] = s * scale;
    }
    softmax_forward(logits, {attn.data() + i * T, T});
    for (std::size_t a = 0; a < d; ++a) {
      double s = 0.0;
      for (std::size_t j = 0; j < T; ++j) s += attn(i, j) * v(j, a);
      ctx_v(i, a) = s;
    }
    affine_forward(p.tok_o->value, {}, {ctx_v.data() + i * d, d}, {out.data() + i * d, d});
  }

  if (ctx) {
    ctx->rows = std::move(rows);
    ctx->x = x;
    ctx->q = q;
    ctx->k = k;
    ctx->v = v;
    ctx->attn = attn;
    ctx->ctx_v = ctx_v;
  }
  return out;
}

inline void encode_prompt_backward(const EncodePromptCtx& c, const NdArray& d_out,
                                   const TgifParams& p, const TgifConfig& cfg) {
  const std::size_t d = cfg.token_dim;
  const std::size_t T = c.rows.size();
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  NdArray d_x({T, d}), d_q({T, d}), d_k({T, d}), d_v({T, d});
  std::vector<double> d_ctx(d), d_attn(T), d_logits(T);
  for (std::size_t i = 0; i < T; ++i) {
    std::fill(d_ctx.begin(), d_ctx.end(), 0.0);
    affine_backward(p.tok_o->value, {c.ctx_v.data() + i * d, d}, {d_out.data() + i * d, d},
                    &p.tok_o->grad, nullptr, d_ctx);
    for (std::size_t j = 0; j < T; ++j) {
      double s = 0.0;
      for (std::size_t a = 0; a < d; ++a) {
        s += d_ctx[a] * c.v(j, a);
        d_v(j, a) += c.attn(i, j) * d_ctx[a];
      }
      d_attn[j] = s;
    }
    std::fill(d_logits.begin(), d_logits.end(), 0.0);
    softmax_backward({c.attn.data() + i * T, T}, d_attn, d_logits);
    for (std::size_t j = 0; j < T; ++j) {
      const double g = d_logits[j] * scale;
      for (std::size_t a = 0; a < d; ++a) {
        d_q(i, a) += g * c.k(j, a);
        d_k(j, a) += g * c.q(i, a);
      }
    }
  }
  for (std::size_t i = 0; i < T; ++i) {
    affine_backward(p.tok_q->value, {c.x.data() + i * d, d}, {d_q.data() + i * d, d},
                    &p.tok_q->grad, nullptr, {d_x.data() + i * d, d});
    affine_backward(p.tok_k->value, {c.x.data() + i * d, d}, {d_k.data() + i * d, d},
                    &p.tok_k->grad, nullptr, {d_x.data() + i * d, d});
    affine_backward(p.tok_v->value, {c.x.data() + i * d, d}, {d_v.data() + i * d, d},
                    &p.tok_v->grad, nullptr, {d_x.data() + i * d, d});
  }
  for (std::size_t i = 0; i < T; ++i) {
    double* g = c.rows[i] < 0 ? p.null_token->grad.data()
                              : p.table->grad.data() + c.rows[i] * d;
    for (std::size_t j = 0; j < d; ++j) g[j] += d_x(i, j);
  }
}

struct TgifApplyCtx {
  NdArray f, tokens;          // inputs
  NdArray k, v;               // T x d cross keys/values
  NdArray q, attn, ctx_v;     // per pixel
  std::vector<LayerNormCtx> ln;
  bool layer_norm = false;
};

// f_T = TGIF(f, tokens): per-pixel cross-attention over the tokens added
// residually to f, then layer-normalized (when enabled). Output shape equals
// input shape. attn_out, when given, receives the (H*W) x T attention matrix.
inline NdArray tgif_apply(const NdArray& f, const NdArray& tokens, const TgifParams& p,
                          const TgifConfig& cfg, TgifApplyCtx* ctx = nullptr,
                          NdArray* attn_out = nullptr) {
  require(f.rank() == 3 && f.dim(2) == cfg.channels, ErrorKind::InvalidShape,
          "feature map must be H x W x C");
  require(tokens.rank() == 2 && tokens.dim(1) == cfg.token_dim, ErrorKind::InvalidShape,
          "tokens must be T x token_dim");
  const std::size_t H = f.dim(0), W = f.dim(1), C = cfg.channels, d = cfg.token_dim;
  const std::size_t T = tokens.dim(0);
  const std::size_t P = H * W;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  NdArray k({T, d}), v({T, d});
  for (std::size_t t = 0; t < T; ++t) {
    affine_forward(p.cross_k->value, {}, {tokens.data() + t * d, d}, {k.data() + t * d, d});
    affine_forward(p.cross_v->value, {}, {tokens.data() + t * d, d}, {v.data() + t * d, d});
  }

  NdArray q({P, d}), attn({P, T}), ctx_v({P, d});
  NdArray out(f.shape());
  std::vector<LayerNormCtx> ln(cfg.layer_norm ? P : 0);
  std::vector<double> logits(T), u(C), r(C);
  for (std::size_t pix = 0; pix < P; ++pix) {
    const double* fp = f.data() + pix * C;
    double* qp = q.data() + pix * d;
    affine_forward(p.pix_q->value, {}, {fp, C}, {qp, d});
    for (std::size_t t = 0; t < T; ++t) {
      double s = 0.0;
      for (std::size_t a = 0; a < d; ++a) s += qp[a] * k(t, a);
      logits[t] = s * scale;
    }
    softmax_forward(logits, {attn.data() + pix * T, T});
    double* cv = ctx_v.data() + pix * d;
    for (std::size_t a = 0; a < d; ++a) {
      double s = 0.0;
      for (std::size_t t = 0; t < T; ++t) s += attn(pix, t) * v(t, a);
      cv[a] = s;
    }
    affine_forward(p.out_proj->value, {}, {cv, d}, u);
    for (std::size_t c = 0; c < C; ++c) r[c] = fp[c] + u[c];
    double* yp = out.data() + pix * C;
    if (cfg.layer_norm) {
      layer_norm_forward(r, p.ln_gamma->value, p.ln_beta->value, {yp, C}, &ln[pix]);
    } else {
      for (std::size_t c = 0; c < C; ++c) yp[c] = r[c];
    }
  }

  if (attn_out) *attn_out = attn;
  if (ctx) {
    ctx->f = f;
    ctx->tokens = tokens;
    ctx->k = k;
    ctx->v = v;
    ctx->q = q;
    ctx->attn = attn;
    ctx->ctx_v = ctx_v;
    ctx->ln = std::move(ln);
    ctx->layer_norm = cfg.layer_norm;
  }
  return out;
}

// Accumulates parameter grads; d_f and d_tokens, when non-null, receive the
// input cotangents (accumulated).
inline void tgif_apply_backward(const TgifApplyCtx& c, const NdArray& d_y,
                                const TgifParams& p, const TgifConfig& cfg,
                                NdArray* d_f, NdArray* d_tokens) {
  const std::size_t C = cfg.channels, d = cfg.token_dim;
  const std::size_t P = c.q.dim(0), T = c.k.dim(0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  NdArray d_k({T, d}), d_v({T, d});
  std::vector<double> d_r(C), d_ctx(d), d_attn(T), d_logits(T), d_q(d), rbuf(C);
  for (std::size_t pix = 0; pix < P; ++pix) {
    const double* fp = c.f.data() + pix * C;
    const double* dyp = d_y.data() + pix * C;
    if (c.layer_norm) {
      const double* cv = c.ctx_v.data() + pix * d;
      std::vector<double> u(C);
      affine_forward(p.out_proj->value, {}, {cv, d}, u);
      for (std::size_t ch = 0; ch < C; ++ch) rbuf[ch] = fp[ch] + u[ch];
      std::fill(d_r.begin(), d_r.end(), 0.0);
      layer_norm_backward(rbuf, p.ln_gamma->value, c.ln[pix], {dyp, C},
                          &p.ln_gamma->grad, &p.ln_beta->grad, d_r);
    } else {
      for (std::size_t ch = 0; ch < C; ++ch) d_r[ch] = dyp[ch];
    }
    if (d_f) {
      double* dfp = d_f->data() + pix * C;
      for (std::size_t ch = 0; ch < C; ++ch) dfp[ch] += d_r[ch];
    }
    // d_u == d_r
    std::fill(d_ctx.begin(), d_ctx.end(), 0.0);
    affine_backward(p.out_proj->value, {c.ctx_v.data() + pix * d, d}, d_r,
                    &p.out_proj->grad, nullptr, d_ctx);
    for (std::size_t t = 0; t < T; ++t) {
      double s = 0.0;
      for (std::size_t a = 0; a < d; ++a) {
        s += d_ctx[a] * c.v(t, a);
        d_v(t, a) += c.attn(pix, t) * d_ctx[a];
      }
      d_attn[t] = s;
    }
    std::fill(d_logits.begin(), d_logits.end(), 0.0);
    softmax_backward({c.attn.data() + pix * T, T}, d_attn, d_logits);
    std::fill(d_q.begin(), d_q.end(), 0.0);
    const double* qp = c.q.data() + pix * d;
    for (std::size_t t = 0; t < T; ++t) {
      const double g = d_logits[t] * scale;
      for (std::size_t a = 0; a < d; ++a) {
        d_q[a] += g * c.k(t, a);
        d_k(t, a) += g * qp[a];
      }
    }
    affine_backward(p.pix_q->value, {fp, C}, d_q, &p.pix_q->grad, nullptr,
                    d_f ? std::span<double>{d_f->data() + pix * C, C} : std::span<double>{});
  }
  for (std::size_t t = 0; t < T; ++t) {
    std::span<double> dt = d_tokens
        ? std::span<double>{d_tokens->data() + t * d, d}
        : std::span<double>{};
    affine_backward(p.cross_k->value, {c.tokens.data() + t * d, d}, {d_k.data() + t * d, d},
                    &p.cross_k->grad, nullptr, dt);
    affine_backward(p.cross_v->value, {c.tokens.data() + t * d, d}, {d_v.data() + t * d, d},
                    &p.cross_v->grad, nullptr, dt);
  }
}

// Comma-joined class names for logging, e.g. "road, building, terrain".
inline std::string prompt_to_string(const PromptSet& prompt, const ClassTable& table) {
  std::string s;
  for (std::size_t i = 0; i < prompt.classes.size(); ++i) {
    if (i) s += ", ";
    s += table.classes[prompt.classes[i]].name;
  }
  return s;
}

}  // namespace voxsam
