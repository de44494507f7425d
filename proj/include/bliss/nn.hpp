#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bliss/graph.hpp"
#include "bliss/matrix.hpp"
#include "bliss/samplers.hpp"

namespace bliss {

// Minimal dense 64-bit neural stack for GraphSAGE / GATv2 over
// SampledBlocks: forward, hand-written reverse-mode gradients, Adam,
// cross-entropy, micro-F1.

enum class Arch { Sage, GatV2 };

enum class AttentionMode { FullSoftmax, BlissFeedback };

struct Activation {
  enum class Kind { ReLU, LeakyReLU, Identity };
  Kind kind = Kind::ReLU;
  double slope = 0.2;  // LeakyReLU only, in (0,1)

  double apply(double x) const {
    switch (kind) {
      case Kind::ReLU: return x > 0.0 ? x : 0.0;
      case Kind::LeakyReLU: return x > 0.0 ? x : slope * x;
      case Kind::Identity: return x;
    }
    return x;
  }
  double deriv(double x) const {
    switch (kind) {
      case Kind::ReLU: return x > 0.0 ? 1.0 : 0.0;
      case Kind::LeakyReLU: return x > 0.0 ? 1.0 : slope;
      case Kind::Identity: return 1.0;
    }
    return 1.0;
  }
};

// One layer's parameters; attn (length 2*out_dim, [dst half | src half])
// is present only for GATv2 layers. The same shapes carry gradients and
// Adam moments.
struct LayerParams {
  Matrix W;                  // in_dim x out_dim
  std::vector<double> bias;  // out_dim
  std::vector<double> attn;  // 2*out_dim for GATv2, empty for SAGE
};

struct GnnParams {
  Arch arch = Arch::Sage;
  std::vector<std::int64_t> dims;  // [in, hidden..., classes], layers = dims.size()-1
  std::vector<LayerParams> layers;
};

using GnnGrads = std::vector<LayerParams>;

// uniform(-1/sqrt(in_dim), 1/sqrt(in_dim)), seeded.
GnnParams init_params(Arch arch, std::span<const std::int64_t> dims, std::uint64_t seed);

GnnGrads zero_grads(const GnnParams& params);

// h_dst_i = act( sum_edges coeff_ij (h_src_j W) + bias ).
Matrix sage_layer_forward(const SampledBlock& block, const Matrix& h_src, const Matrix& W,
                          std::span<const double> bias, Activation act);

struct GatScores {
  std::vector<double> e;        // raw scores per block edge
  std::vector<double> a_tilde;  // exp(e - per-destination max)
};

// e_ij = attn^T LeakyReLU([W h_i || W h_j]) with the GATv2 ordering.
GatScores gatv2_scores(const SampledBlock& block, const Matrix& h_dst, const Matrix& h_src, const Matrix& W,
                       std::span<const double> attn, double slope);

// Full softmax over the sampled neighborhood, or BLISS feedback attention
// (requires the bandit edge probabilities recorded at sampling time).
std::vector<double> attention_normalize(const SampledBlock& block, std::span<const double> a_tilde,
                                        AttentionMode mode, std::span<const double> bandit_q = {});

struct CrossEntropyResult {
  double loss = 0.0;
  Matrix grad;  // (softmax - onehot)/batch
};

CrossEntropyResult cross_entropy(const Matrix& logits, std::span<const std::int32_t> labels);

struct AdamConfig {
  double lr = 0.002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig cfg;
  std::int64_t t = 0;
  std::vector<LayerParams> m, v;
};

AdamState init_adam(const GnnParams& params, AdamConfig cfg = {});
void adam_step(GnnParams& params, const GnnGrads& grads, AdamState& state);

std::vector<std::int32_t> argmax_rows(const Matrix& logits);

// Micro-averaged F1 over masked nodes; equals accuracy for single-label
// multiclass. predictions and labels are aligned arrays.
double micro_f1(std::span<const std::int32_t> predictions, std::span<const std::int32_t> labels,
                std::span<const std::uint8_t> mask);

struct LayerTrace {
  Matrix h_src;   // input actually used by the layer
  Matrix pre;     // pre-activation output (n_dst x out)
  Matrix agg;     // SAGE: aggregated inputs (n_dst x in)
  Matrix u;       // GATv2: h_src W (n_src x out)
  std::vector<double> alpha;       // GATv2: per-edge attention used
  std::vector<double> q_sum;       // GATv2 feedback: per-dst-row surrogate normalizer
  std::vector<std::int32_t> dst_pos;  // GATv2: row of each dst inside src_ids
};

struct ForwardResult {
  Matrix logits;  // rows align with the output block's dst_ids
  // Per layer: embeddings of the layer's source nodes (rows align with
  // block src_ids). post = inputs as used; pre = pre-activation variant.
  std::vector<Matrix> source_post;
  std::vector<Matrix> source_pre;
  // Per layer, per block edge: the aggregation coefficient actually used
  // (alpha_tilde for SAGE, normalized attention for GATv2).
  std::vector<std::vector<double>> coeff_used;
  std::vector<LayerTrace> trace;  // kept only when requested
};

// Blocks ordered input layer first; features indexed by global node id.
// bandit_q (per layer, per edge) is required for BlissFeedback attention.
ForwardResult model_forward(std::span<const SampledBlock> blocks, const Matrix& features, const GnnParams& params,
                            AttentionMode attn_mode, std::span<const std::vector<double>> bandit_q = {},
                            bool keep_trace = false);

GnnGrads model_backward(const ForwardResult& fwd, std::span<const SampledBlock> blocks, const GnnParams& params,
                        const Matrix& dlogits, AttentionMode attn_mode);

// Checkpoint: little-endian uint64 header length, JSON header (arch, dims),
// then per layer raw little-endian float64 arrays W, bias, [attn].
void save_params_checkpoint(const GnnParams& params, const std::string& path);
GnnParams load_params_checkpoint(const std::string& path);

}  // namespace bliss
