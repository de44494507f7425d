#include "bliss/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "bliss/bandit.hpp"
#include "bliss/rng.hpp"

namespace bliss {

using json = nlohmann::json;

namespace {

constexpr double kLeakySlope = 0.2;

void fill_uniform(std::span<double> out, double bound, Rng& rng) {
  for (double& v : out) v = (2.0 * uniform01(rng) - 1.0) * bound;
}

std::vector<double> colsum(const Matrix& m) {
  std::vector<double> s(static_cast<std::size_t>(m.cols), 0.0);
  for (std::int64_t r = 0; r < m.rows; ++r) {
    const double* row = m.row(r);
    for (std::int64_t c = 0; c < m.cols; ++c) s[static_cast<std::size_t>(c)] += row[c];
  }
  return s;
}

Matrix gather_rows(const Matrix& src, std::span<const NodeId> ids) {
  Matrix out(static_cast<std::int64_t>(ids.size()), src.cols);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const double* in = src.row(ids[r]);
    std::copy(in, in + src.cols, out.row(static_cast<std::int64_t>(r)));
  }
  return out;
}

// Row of each destination inside the block's src_ids (skip guarantee).
std::vector<std::int32_t> dst_positions(const SampledBlock& block) {
  std::vector<std::int32_t> pos(block.dst_ids.size());
  for (std::size_t d = 0; d < block.dst_ids.size(); ++d) {
    const auto it = std::lower_bound(block.src_ids.begin(), block.src_ids.end(), block.dst_ids[d]);
    if (it == block.src_ids.end() || *it != block.dst_ids[d]) {
      throw std::runtime_error("model_forward: destination " + std::to_string(block.dst_ids[d]) +
                               " is not among the block sources (broken skip connection)");
    }
    pos[d] = static_cast<std::int32_t>(it - block.src_ids.begin());
  }
  return pos;
}

}  // namespace

GnnParams init_params(Arch arch, std::span<const std::int64_t> dims, std::uint64_t seed) {
  if (dims.size() < 2) throw std::invalid_argument("init_params: need at least input and output dims");
  Rng rng = make_rng(seed);
  GnnParams p;
  p.arch = arch;
  p.dims.assign(dims.begin(), dims.end());
  p.layers.resize(dims.size() - 1);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const std::int64_t in = dims[l], out = dims[l + 1];
    LayerParams& lp = p.layers[l];
    lp.W = Matrix(in, out);
    fill_uniform(lp.W.data, 1.0 / std::sqrt(static_cast<double>(in)), rng);
    lp.bias.assign(static_cast<std::size_t>(out), 0.0);
    fill_uniform(lp.bias, 1.0 / std::sqrt(static_cast<double>(in)), rng);
    if (arch == Arch::GatV2) {
      lp.attn.assign(static_cast<std::size_t>(2 * out), 0.0);
      fill_uniform(lp.attn, 1.0 / std::sqrt(static_cast<double>(out)), rng);
    }
  }
  return p;
}

GnnGrads zero_grads(const GnnParams& params) {
  GnnGrads g(params.layers.size());
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    g[l].W = Matrix(params.layers[l].W.rows, params.layers[l].W.cols);
    g[l].bias.assign(params.layers[l].bias.size(), 0.0);
    g[l].attn.assign(params.layers[l].attn.size(), 0.0);
  }
  return g;
}

Matrix sage_layer_forward(const SampledBlock& block, const Matrix& h_src, const Matrix& W,
                          std::span<const double> bias, Activation act) {
  if (h_src.rows != static_cast<std::int64_t>(block.src_ids.size())) {
    throw std::invalid_argument("sage_layer_forward: h_src rows != block sources");
  }
  if (W.rows != h_src.cols || static_cast<std::int64_t>(bias.size()) != W.cols) {
    throw std::invalid_argument("sage_layer_forward: shape mismatch");
  }
  Matrix agg(static_cast<std::int64_t>(block.dst_ids.size()), h_src.cols);
  for (const BlockEdge& e : block.edges) {
    const double* src = h_src.row(e.src_row);
    double* dst = agg.row(e.dst_row);
    for (std::int64_t c = 0; c < h_src.cols; ++c) dst[c] += e.alpha_tilde * src[c];
  }
  Matrix out = matmul(agg, W);
  for (std::int64_t r = 0; r < out.rows; ++r) {
    double* row = out.row(r);
    for (std::int64_t c = 0; c < out.cols; ++c) row[c] = act.apply(row[c] + bias[static_cast<std::size_t>(c)]);
  }
  return out;
}

GatScores gatv2_scores(const SampledBlock& block, const Matrix& h_dst, const Matrix& h_src, const Matrix& W,
                       std::span<const double> attn, double slope) {
  if (h_dst.rows != static_cast<std::int64_t>(block.dst_ids.size()) ||
      h_src.rows != static_cast<std::int64_t>(block.src_ids.size())) {
    throw std::invalid_argument("gatv2_scores: embedding rows misaligned with the block");
  }
  const std::int64_t out_dim = W.cols;
  if (static_cast<std::int64_t>(attn.size()) != 2 * out_dim) {
    throw std::invalid_argument("gatv2_scores: attention vector must have length 2*out_dim");
  }
  const Matrix u_dst = matmul(h_dst, W);
  const Matrix u_src = matmul(h_src, W);
  const Activation lrelu{Activation::Kind::LeakyReLU, slope};

  std::vector<double> s_dst(static_cast<std::size_t>(u_dst.rows), 0.0);
  for (std::int64_t r = 0; r < u_dst.rows; ++r) {
    const double* row = u_dst.row(r);
    for (std::int64_t c = 0; c < out_dim; ++c) s_dst[static_cast<std::size_t>(r)] += attn[static_cast<std::size_t>(c)] * lrelu.apply(row[c]);
  }
  std::vector<double> s_src(static_cast<std::size_t>(u_src.rows), 0.0);
  for (std::int64_t r = 0; r < u_src.rows; ++r) {
    const double* row = u_src.row(r);
    for (std::int64_t c = 0; c < out_dim; ++c) {
      s_src[static_cast<std::size_t>(r)] += attn[static_cast<std::size_t>(out_dim + c)] * lrelu.apply(row[c]);
    }
  }

  GatScores scores;
  scores.e.resize(block.edges.size());
  scores.a_tilde.resize(block.edges.size());
  std::vector<double> row_max(block.dst_ids.size(), -std::numeric_limits<double>::infinity());
  for (std::size_t e = 0; e < block.edges.size(); ++e) {
    const BlockEdge& be = block.edges[e];
    scores.e[e] = s_dst[static_cast<std::size_t>(be.dst_row)] + s_src[static_cast<std::size_t>(be.src_row)];
    row_max[static_cast<std::size_t>(be.dst_row)] = std::max(row_max[static_cast<std::size_t>(be.dst_row)], scores.e[e]);
  }
  for (std::size_t e = 0; e < block.edges.size(); ++e) {
    scores.a_tilde[e] = std::exp(scores.e[e] - row_max[static_cast<std::size_t>(block.edges[e].dst_row)]);
  }
  return scores;
}

std::vector<double> attention_normalize(const SampledBlock& block, std::span<const double> a_tilde,
                                        AttentionMode mode, std::span<const double> bandit_q) {
  if (a_tilde.size() != block.edges.size()) throw std::invalid_argument("attention_normalize: score length mismatch");
  std::vector<double> out(a_tilde.size(), 0.0);
  const std::size_t n_rows = block.dst_ids.size();
  std::vector<double> row_sum(n_rows, 0.0);
  for (std::size_t e = 0; e < a_tilde.size(); ++e) {
    if (!(a_tilde[e] > 0.0)) throw std::runtime_error("attention_normalize: scores must be positive");
    row_sum[static_cast<std::size_t>(block.edges[e].dst_row)] += a_tilde[e];
  }
  for (std::size_t r = 0; r < n_rows; ++r) {
    if (row_sum[r] == 0.0) {
      throw std::runtime_error("attention_normalize: destination " + std::to_string(block.dst_ids[r]) +
                               " has an empty row");
    }
  }
  if (mode == AttentionMode::FullSoftmax) {
    for (std::size_t e = 0; e < a_tilde.size(); ++e) out[e] = a_tilde[e] / row_sum[static_cast<std::size_t>(block.edges[e].dst_row)];
    return out;
  }
  if (bandit_q.size() != block.edges.size()) {
    throw std::invalid_argument("attention_normalize: feedback mode needs bandit probabilities per edge");
  }
  std::vector<double> q_sum(n_rows, 0.0);
  for (std::size_t e = 0; e < a_tilde.size(); ++e) q_sum[static_cast<std::size_t>(block.edges[e].dst_row)] += bandit_q[e];
  for (std::size_t e = 0; e < a_tilde.size(); ++e) {
    const auto r = static_cast<std::size_t>(block.edges[e].dst_row);
    out[e] = q_sum[r] * a_tilde[e] / row_sum[r];
  }
  return out;
}

CrossEntropyResult cross_entropy(const Matrix& logits, std::span<const std::int32_t> labels) {
  if (logits.rows != static_cast<std::int64_t>(labels.size())) {
    throw std::invalid_argument("cross_entropy: one label per logits row required");
  }
  CrossEntropyResult res;
  res.grad = Matrix(logits.rows, logits.cols);
  const double inv_n = 1.0 / static_cast<double>(logits.rows);
  for (std::int64_t r = 0; r < logits.rows; ++r) {
    const std::int32_t label = labels[static_cast<std::size_t>(r)];
    if (label < 0 || label >= logits.cols) {
      throw std::runtime_error("cross_entropy: label " + std::to_string(label) + " out of range at row " +
                               std::to_string(r));
    }
    const double* row = logits.row(r);
    double m = row[0];
    for (std::int64_t c = 1; c < logits.cols; ++c) m = std::max(m, row[c]);
    double z = 0.0;
    for (std::int64_t c = 0; c < logits.cols; ++c) z += std::exp(row[c] - m);
    const double log_z = std::log(z) + m;
    res.loss += (log_z - row[label]) * inv_n;
    double* grad = res.grad.row(r);
    for (std::int64_t c = 0; c < logits.cols; ++c) {
      grad[c] = (std::exp(row[c] - log_z) - (c == label ? 1.0 : 0.0)) * inv_n;
    }
  }
  return res;
}

AdamState init_adam(const GnnParams& params, AdamConfig cfg) {
  AdamState s;
  s.cfg = cfg;
  s.t = 0;
  s.m = zero_grads(params);
  s.v = zero_grads(params);
  return s;
}

namespace {

void adam_update_span(std::span<double> param, std::span<const double> grad, std::span<double> m, std::span<double> v,
                      const AdamConfig& cfg, double bc1, double bc2) {
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double m_hat = m[i] / bc1;
    const double v_hat = v[i] / bc2;
    param[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

}  // namespace

void adam_step(GnnParams& params, const GnnGrads& grads, AdamState& state) {
  if (grads.size() != params.layers.size()) throw std::invalid_argument("adam_step: grads/params layer mismatch");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.cfg.beta2, static_cast<double>(state.t));
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    adam_update_span(params.layers[l].W.data, grads[l].W.data, state.m[l].W.data, state.v[l].W.data, state.cfg, bc1,
                     bc2);
    adam_update_span(params.layers[l].bias, grads[l].bias, state.m[l].bias, state.v[l].bias, state.cfg, bc1, bc2);
    adam_update_span(params.layers[l].attn, grads[l].attn, state.m[l].attn, state.v[l].attn, state.cfg, bc1, bc2);
  }
}

std::vector<std::int32_t> argmax_rows(const Matrix& logits) {
  std::vector<std::int32_t> out(static_cast<std::size_t>(logits.rows), 0);
  for (std::int64_t r = 0; r < logits.rows; ++r) {
    const double* row = logits.row(r);
    std::int64_t best = 0;
    for (std::int64_t c = 1; c < logits.cols; ++c) {
      if (row[c] > row[best]) best = c;
    }
    out[static_cast<std::size_t>(r)] = static_cast<std::int32_t>(best);
  }
  return out;
}

double micro_f1(std::span<const std::int32_t> predictions, std::span<const std::int32_t> labels,
                std::span<const std::uint8_t> mask) {
  if (predictions.size() != labels.size() || labels.size() != mask.size()) {
    throw std::invalid_argument("micro_f1: array length mismatch");
  }
  std::int64_t total = 0, correct = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    ++total;
    if (predictions[i] == labels[i]) ++correct;
  }
  if (total == 0) throw std::runtime_error("micro_f1: empty mask");
  return static_cast<double>(correct) / static_cast<double>(total);
}

ForwardResult model_forward(std::span<const SampledBlock> blocks, const Matrix& features, const GnnParams& params,
                            AttentionMode attn_mode, std::span<const std::vector<double>> bandit_q, bool keep_trace) {
  const std::size_t L = params.layers.size();
  if (blocks.size() != L) {
    throw std::invalid_argument("model_forward: " + std::to_string(blocks.size()) + " blocks for " +
                                std::to_string(L) + " layers");
  }
  if (params.arch == Arch::GatV2 && attn_mode == AttentionMode::BlissFeedback && bandit_q.size() != L) {
    throw std::invalid_argument("model_forward: feedback attention needs bandit probabilities per layer");
  }
  ForwardResult res;
  res.source_post.resize(L);
  res.source_pre.resize(L);
  res.coeff_used.resize(L);
  res.trace.resize(L);

  Matrix h = gather_rows(features, blocks[0].src_ids);
  Matrix h_pre = h;  // pre-activation variant; identical to inputs at layer 0
  const Activation lrelu{Activation::Kind::LeakyReLU, kLeakySlope};

  for (std::size_t l = 0; l < L; ++l) {
    const SampledBlock& block = blocks[l];
    const LayerParams& lp = params.layers[l];
    if (h.rows != static_cast<std::int64_t>(block.src_ids.size())) {
      throw std::invalid_argument("model_forward: block " + std::to_string(l) + " sources do not chain");
    }
    const Activation act =
        l + 1 == L ? Activation{Activation::Kind::Identity, 0.0} : Activation{Activation::Kind::ReLU, 0.0};
    res.source_post[l] = h;
    res.source_pre[l] = h_pre;
    LayerTrace& tr = res.trace[l];

    Matrix pre;
    if (params.arch == Arch::Sage) {
      Matrix agg(static_cast<std::int64_t>(block.dst_ids.size()), h.cols);
      res.coeff_used[l].resize(block.edges.size());
      for (std::size_t e = 0; e < block.edges.size(); ++e) {
        const BlockEdge& be = block.edges[e];
        res.coeff_used[l][e] = be.alpha_tilde;
        const double* src = h.row(be.src_row);
        double* dst = agg.row(be.dst_row);
        for (std::int64_t c = 0; c < h.cols; ++c) dst[c] += be.alpha_tilde * src[c];
      }
      pre = matmul(agg, lp.W);
      for (std::int64_t r = 0; r < pre.rows; ++r) {
        double* row = pre.row(r);
        for (std::int64_t c = 0; c < pre.cols; ++c) row[c] += lp.bias[static_cast<std::size_t>(c)];
      }
      if (keep_trace) {
        tr.h_src = h;
        tr.agg = std::move(agg);
      }
    } else {
      const std::int64_t out_dim = lp.W.cols;
      Matrix u = matmul(h, lp.W);
      std::vector<std::int32_t> dst_pos = dst_positions(block);

      std::vector<double> s_dst(block.dst_ids.size(), 0.0), s_src(block.src_ids.size(), 0.0);
      for (std::size_t j = 0; j < block.src_ids.size(); ++j) {
        const double* row = u.row(static_cast<std::int64_t>(j));
        double acc = 0.0;
        for (std::int64_t c = 0; c < out_dim; ++c) acc += lp.attn[static_cast<std::size_t>(out_dim + c)] * lrelu.apply(row[c]);
        s_src[j] = acc;
      }
      for (std::size_t d = 0; d < block.dst_ids.size(); ++d) {
        const double* row = u.row(dst_pos[d]);
        double acc = 0.0;
        for (std::int64_t c = 0; c < out_dim; ++c) acc += lp.attn[static_cast<std::size_t>(c)] * lrelu.apply(row[c]);
        s_dst[d] = acc;
      }
      std::vector<double> a_tilde(block.edges.size());
      std::vector<double> row_max(block.dst_ids.size(), -std::numeric_limits<double>::infinity());
      for (std::size_t e = 0; e < block.edges.size(); ++e) {
        const BlockEdge& be = block.edges[e];
        const double score = s_dst[static_cast<std::size_t>(be.dst_row)] + s_src[static_cast<std::size_t>(be.src_row)];
        a_tilde[e] = score;
        row_max[static_cast<std::size_t>(be.dst_row)] = std::max(row_max[static_cast<std::size_t>(be.dst_row)], score);
      }
      for (std::size_t e = 0; e < block.edges.size(); ++e) {
        a_tilde[e] = std::exp(a_tilde[e] - row_max[static_cast<std::size_t>(block.edges[e].dst_row)]);
      }
      std::vector<double> alpha = attention_normalize(
          block, a_tilde, attn_mode,
          attn_mode == AttentionMode::BlissFeedback ? std::span<const double>(bandit_q[l]) : std::span<const double>());
      res.coeff_used[l] = alpha;

      pre = Matrix(static_cast<std::int64_t>(block.dst_ids.size()), out_dim);
      for (std::size_t e = 0; e < block.edges.size(); ++e) {
        const BlockEdge& be = block.edges[e];
        const double* src = u.row(be.src_row);
        double* dst = pre.row(be.dst_row);
        for (std::int64_t c = 0; c < out_dim; ++c) dst[c] += alpha[e] * src[c];
      }
      for (std::int64_t r = 0; r < pre.rows; ++r) {
        double* row = pre.row(r);
        for (std::int64_t c = 0; c < out_dim; ++c) row[c] += lp.bias[static_cast<std::size_t>(c)];
      }
      if (keep_trace) {
        tr.h_src = h;
        tr.u = std::move(u);
        tr.alpha = alpha;
        tr.dst_pos = std::move(dst_pos);
        if (attn_mode == AttentionMode::BlissFeedback) {
          tr.q_sum.assign(block.dst_ids.size(), 0.0);
          for (std::size_t e = 0; e < block.edges.size(); ++e) {
            tr.q_sum[static_cast<std::size_t>(block.edges[e].dst_row)] += bandit_q[l][e];
          }
        }
      }
    }

    Matrix h_next = pre;
    for (double& v : h_next.data) v = act.apply(v);
    if (keep_trace) {
      tr.pre = std::move(pre);
      h_pre = tr.pre;
    } else {
      h_pre = std::move(pre);
    }
    h = std::move(h_next);
  }
  res.logits = std::move(h);
  return res;
}

GnnGrads model_backward(const ForwardResult& fwd, std::span<const SampledBlock> blocks, const GnnParams& params,
                        const Matrix& dlogits, AttentionMode attn_mode) {
  const std::size_t L = params.layers.size();
  if (fwd.trace.size() != L || fwd.trace[0].h_src.rows == 0) {
    throw std::invalid_argument("model_backward: forward trace missing (run model_forward with keep_trace)");
  }
  GnnGrads grads = zero_grads(params);
  const Activation lrelu{Activation::Kind::LeakyReLU, kLeakySlope};

  Matrix dh = dlogits;
  for (std::size_t li = L; li-- > 0;) {
    const SampledBlock& block = blocks[li];
    const LayerTrace& tr = fwd.trace[li];
    const LayerParams& lp = params.layers[li];
    const Activation act =
        li + 1 == L ? Activation{Activation::Kind::Identity, 0.0} : Activation{Activation::Kind::ReLU, 0.0};

    // G = dh ⊙ act'(pre)
    Matrix G = dh;
    for (std::int64_t r = 0; r < G.rows; ++r) {
      double* grow = G.row(r);
      const double* prow = tr.pre.row(r);
      for (std::int64_t c = 0; c < G.cols; ++c) grow[c] *= act.deriv(prow[c]);
    }
    const std::vector<double> db = colsum(G);
    for (std::size_t c = 0; c < db.size(); ++c) grads[li].bias[c] += db[c];

    if (params.arch == Arch::Sage) {
      Matrix dW = matmul_at_b(tr.agg, G);
      for (std::size_t i = 0; i < dW.data.size(); ++i) grads[li].W.data[i] += dW.data[i];
      if (li == 0) continue;  // input features receive no gradient
      const Matrix dagg = matmul_a_bt(G, lp.W);
      Matrix dh_src(tr.h_src.rows, tr.h_src.cols);
      for (const BlockEdge& e : block.edges) {
        const double* src = dagg.row(e.dst_row);
        double* dst = dh_src.row(e.src_row);
        for (std::int64_t c = 0; c < dagg.cols; ++c) dst[c] += e.alpha_tilde * src[c];
      }
      dh = std::move(dh_src);
    } else {
      const std::int64_t out_dim = lp.W.cols;
      Matrix dU(tr.u.rows, tr.u.cols);
      std::vector<double> dalpha(block.edges.size(), 0.0);
      for (std::size_t e = 0; e < block.edges.size(); ++e) {
        const BlockEdge& be = block.edges[e];
        const double* grow = G.row(be.dst_row);
        const double* urow = tr.u.row(be.src_row);
        double* du = dU.row(be.src_row);
        double acc = 0.0;
        for (std::int64_t c = 0; c < out_dim; ++c) {
          acc += grow[c] * urow[c];
          du[c] += tr.alpha[e] * grow[c];
        }
        dalpha[e] = acc;
      }

      // Through the (shift-invariant) normalization back to raw scores e.
      std::vector<double> row_dot(block.dst_ids.size(), 0.0);
      for (std::size_t e = 0; e < block.edges.size(); ++e) {
        row_dot[static_cast<std::size_t>(block.edges[e].dst_row)] += tr.alpha[e] * dalpha[e];
      }
      std::vector<double> de(block.edges.size(), 0.0);
      for (std::size_t e = 0; e < block.edges.size(); ++e) {
        const auto r = static_cast<std::size_t>(block.edges[e].dst_row);
        if (attn_mode == AttentionMode::FullSoftmax) {
          de[e] = tr.alpha[e] * (dalpha[e] - row_dot[r]);
        } else {
          de[e] = tr.alpha[e] * dalpha[e] - tr.alpha[e] / tr.q_sum[r] * row_dot[r];
        }
      }

      std::vector<double> ds_dst(block.dst_ids.size(), 0.0), ds_src(block.src_ids.size(), 0.0);
      for (std::size_t e = 0; e < block.edges.size(); ++e) {
        ds_dst[static_cast<std::size_t>(block.edges[e].dst_row)] += de[e];
        ds_src[static_cast<std::size_t>(block.edges[e].src_row)] += de[e];
      }
      for (std::size_t d = 0; d < block.dst_ids.size(); ++d) {
        if (ds_dst[d] == 0.0) continue;
        const double* urow = tr.u.row(tr.dst_pos[d]);
        double* du = dU.row(tr.dst_pos[d]);
        for (std::int64_t c = 0; c < out_dim; ++c) {
          grads[li].attn[static_cast<std::size_t>(c)] += ds_dst[d] * lrelu.apply(urow[c]);
          du[c] += ds_dst[d] * lp.attn[static_cast<std::size_t>(c)] * lrelu.deriv(urow[c]);
        }
      }
      for (std::size_t j = 0; j < block.src_ids.size(); ++j) {
        if (ds_src[j] == 0.0) continue;
        const double* urow = tr.u.row(static_cast<std::int64_t>(j));
        double* du = dU.row(static_cast<std::int64_t>(j));
        for (std::int64_t c = 0; c < out_dim; ++c) {
          grads[li].attn[static_cast<std::size_t>(out_dim + c)] += ds_src[j] * lrelu.apply(urow[c]);
          du[c] += ds_src[j] * lp.attn[static_cast<std::size_t>(out_dim + c)] * lrelu.deriv(urow[c]);
        }
      }

      Matrix dW = matmul_at_b(tr.h_src, dU);
      for (std::size_t i = 0; i < dW.data.size(); ++i) grads[li].W.data[i] += dW.data[i];
      if (li == 0) continue;  // input features receive no gradient
      dh = matmul_a_bt(dU, lp.W);
    }
  }
  return grads;
}

void save_params_checkpoint(const GnnParams& params, const std::string& path) {
  json header = {{"kind", "bliss-gnn-params"},
                 {"version", 1},
                 {"arch", params.arch == Arch::Sage ? "SAGE" : "GATv2"},
                 {"layers", params.layers.size()},
                 {"dims", params.dims}};
  const std::string text = header.dump();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_params_checkpoint: cannot open '" + path + "'");
  const std::uint64_t len = text.size();
  f.write(reinterpret_cast<const char*>(&len), sizeof(len));
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const LayerParams& lp : params.layers) {
    f.write(reinterpret_cast<const char*>(lp.W.data.data()), static_cast<std::streamsize>(lp.W.data.size() * 8));
    f.write(reinterpret_cast<const char*>(lp.bias.data()), static_cast<std::streamsize>(lp.bias.size() * 8));
    f.write(reinterpret_cast<const char*>(lp.attn.data()), static_cast<std::streamsize>(lp.attn.size() * 8));
  }
  if (!f) throw std::runtime_error("save_params_checkpoint: write failed for '" + path + "'");
}

GnnParams load_params_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_params_checkpoint: cannot open '" + path + "'");
  std::uint64_t len = 0;
  f.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string text(len, '\0');
  f.read(text.data(), static_cast<std::streamsize>(len));
  const json header = json::parse(text);
  if (header.at("kind") != "bliss-gnn-params") throw std::runtime_error("load_params_checkpoint: wrong file kind");
  const Arch arch = header.at("arch") == "SAGE" ? Arch::Sage : Arch::GatV2;
  const std::vector<std::int64_t> dims = header.at("dims").get<std::vector<std::int64_t>>();
  GnnParams p;
  p.arch = arch;
  p.dims = dims;
  p.layers.resize(dims.size() - 1);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    LayerParams& lp = p.layers[l];
    lp.W = Matrix(dims[l], dims[l + 1]);
    lp.bias.assign(static_cast<std::size_t>(dims[l + 1]), 0.0);
    if (arch == Arch::GatV2) lp.attn.assign(static_cast<std::size_t>(2 * dims[l + 1]), 0.0);
    f.read(reinterpret_cast<char*>(lp.W.data.data()), static_cast<std::streamsize>(lp.W.data.size() * 8));
    f.read(reinterpret_cast<char*>(lp.bias.data()), static_cast<std::streamsize>(lp.bias.size() * 8));
    if (!lp.attn.empty()) f.read(reinterpret_cast<char*>(lp.attn.data()), static_cast<std::streamsize>(lp.attn.size() * 8));
  }
  if (!f) throw std::runtime_error("load_params_checkpoint: truncated file '" + path + "'");
  return p;
}

}  // namespace bliss
