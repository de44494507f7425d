#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bliss/graph.hpp"
#include "bliss/matrix.hpp"
#include "bliss/samplers.hpp"

namespace bliss {

// The BLISS core: per-layer EXP3 edge weights, derived edge/node sampling
// distributions, rewards, and the top-down sampling loop. exp3_update is
// the single mutation point; everything else is read-only.

struct BanditState {
  int num_layers = 0;
  double eta = 0.0;    // exploration / learning rate, in (0, 1]
  double delta = 0.0;  // reward scaling, > 0
  std::int64_t step = 0;
  std::vector<std::vector<double>> weights;  // [layer][edge slot]
};

BanditState init_state(const CsrGraph& graph, int num_layers, double eta, double delta);

// Throws if any weight is non-positive or non-finite.
void validate_state(const BanditState& state, const CsrGraph& graph);

// Per-destination edge sampling distribution
// q_ij = (1-eta) w_ij / sum_row w + eta/|N_i|, aligned with CSR row slots.
struct QDistribution {
  std::vector<NodeId> dst_ids;
  std::vector<std::vector<double>> rows;  // rows[i][k] for graph.neighbors(dst_ids[i])[k]
};

QDistribution q_distribution(const BanditState& state, const CsrGraph& graph, int layer,
                             std::span<const NodeId> dst_ids);

// Layer-wise node scores p_j = sqrt(sum_i (q_ij / sum_k q_ik)^2) over the
// frontier; raw scores for the Poisson sampler, not normalized.
LayerProbabilities node_probability(const CsrGraph& graph, const QDistribution& q,
                                    std::span<const NodeId> candidate_ids);

struct SampleRecord {
  std::vector<SampledBlock> blocks;           // input layer first
  std::vector<std::vector<double>> bandit_q;  // per layer, per block edge: q_ij at sampling time
  std::vector<std::int64_t> fanouts;          // aligned with blocks
};

SampleRecord bliss_sample_layers(const CsrGraph& graph, std::span<const NodeId> seed_batch,
                                 const EdgeCoefficients& alpha, std::span<const std::int64_t> fanouts,
                                 const BanditState& state, const ThinningConfig& cfg, Rng& rng);

struct RewardBatch {
  struct Layer {
    std::vector<EdgeId> edge_slots;  // global slots of the surviving edges
    std::vector<NodeId> dst;
    std::vector<double> coeff;  // aggregation coefficient the reward used
    std::vector<double> r;
    std::vector<double> r_hat;
  };
  std::vector<Layer> layers;
};

// Edge rewards r_ij = coeff^2 / (k q_j^2) |h_j|^2 for sampled edges.
// h_src[l] rows align with record.layers[l].block.src_ids; coeff_used[l]
// aligns with the block's edges (alpha_tilde for SAGE-style aggregation,
// feedback attention for attentive models).
RewardBatch compute_rewards(const SampleRecord& record, std::span<const Matrix> h_src,
                            std::span<const std::vector<double>> coeff_used);

// Importance-weighted estimates r_hat = r / q_j (or r_hat = r in
// single-division mode). Fills the r_hat arrays.
void estimated_rewards(RewardBatch& rewards, const SampleRecord& record, bool single_division = false);

// Exponential-weights update w_ij *= exp(delta r_hat / |N_i|), with an overflow guard that
// rescales a row by its max when any weight exceeds 1e100.
void exp3_update(BanditState& state, const CsrGraph& graph, const RewardBatch& rewards);

// Adjusted feedback attention for a single destination row:
// alpha'_j = (sum q) * a_j / (sum a) over the sampled neighbors.
std::vector<double> feedback_attention(std::span<const double> q_sampled, std::span<const double> raw_scores);

// Checkpoint: little-endian uint64 header length, JSON header, then one raw
// little-endian float64 array per layer.
void save_bandit_checkpoint(const BanditState& state, const std::string& path);
BanditState load_bandit_checkpoint(const std::string& path);

}  // namespace bliss
