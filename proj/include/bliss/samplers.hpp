#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bliss/estimator.hpp"
#include "bliss/graph.hpp"
#include "bliss/rng.hpp"

namespace bliss {

// Static layer-wise samplers: LADIES, SKETCH-corrected LADIES, and PLADIES
// (Poisson with skip connections and iterative thinning). Pure given
// (inputs, rng).

struct LayerProbabilities {
  // Categorical: p sums to 1. Raw scores (e.g. from the bandit) are passed
  // with p == pi and thinned inside the Poisson sampler.
  std::vector<NodeId> candidate_ids;  // sorted frontier
  std::vector<double> pi;             // unnormalized importance scores
  std::vector<double> p;              // probabilities (categorical) or raw scores
};

struct ThinningConfig {
  double epsilon = 0.99;
  int n_ref = 20;
};

struct BlockEdge {
  NodeId dst = 0, src = 0;
  std::int32_t dst_row = 0, src_row = 0;  // positions in dst_ids / src_ids
  double alpha_tilde = 0.0;               // aggregation coefficient after reweighting
  double q_used = 1.0;                    // node probability recorded at sampling time
  EdgeId edge_slot = -1;                  // global edge slot in the CsrGraph
};

// One bipartite layer of a mini-batch. dst_ids are the layer's destination
// (seed) nodes; src_ids the selected sources (skip connections guarantee
// dst_ids is a subset). Edges are grouped by destination row.
struct SampledBlock {
  std::vector<NodeId> dst_ids;
  std::vector<NodeId> src_ids;  // sorted
  std::vector<BlockEdge> edges;
  int layer_index = 0;
  bool all_included = false;

  void validate() const;  // throws on a violated block invariant
};

enum class LadiesVariant { Ladies, Sketch };

enum class ReweightScheme { LadiesRowNorm, LadiesDegNorm, SketchSampleCount };

enum class PipelineVariant { Ladies, Sketch, Pladies, Uniform };

// Importance scores over the frontier of dst_ids:
// LADIES pi_j = sum_i alpha_ij^2, SKETCH pi_j = sqrt of that; p = pi/sum.
LayerProbabilities ladies_probs(const CsrGraph& graph, std::span<const NodeId> dst_ids, const EdgeCoefficients& alpha,
                                LadiesVariant variant);

// Base weight alpha/p_src normalized per scheme. edge_dst_rows groups edges
// by destination; c_ij is only read for the degree-normalized scheme.
std::vector<double> reweight_edges(std::span<const std::int32_t> edge_dst_rows, std::span<const double> alpha,
                                   std::span<const double> p_src, ReweightScheme scheme,
                                   std::span<const double> c_ij = {});

// Fixed-point scaling so that sum min(p_j*c, 1) approaches k.
double iterative_thinning(std::span<const double> p, double k, const ThinningConfig& cfg);

// Poisson sampling with skip connections (seed nodes forced in). Node
// probabilities computed internally from LADIES scores.
SampledBlock poisson_sample_with_skips(const CsrGraph& graph, std::span<const NodeId> dst_ids,
                                       const EdgeCoefficients& alpha, std::int64_t k, const ThinningConfig& cfg,
                                       Rng& rng);

// Same, with externally supplied raw probabilities over the frontier
// (the BLISS path). raw.candidate_ids must equal the frontier.
SampledBlock poisson_sample_given_probs(const CsrGraph& graph, std::span<const NodeId> dst_ids,
                                        const EdgeCoefficients& alpha, const LayerProbabilities& raw, std::int64_t k,
                                        const ThinningConfig& cfg, Rng& rng);

// Final per-node inclusion probabilities the Poisson sampler would assign
// (after the all-included branch, thinning, skip forcing and clipping).
std::vector<double> poisson_inclusion_probs(const CsrGraph& graph, std::span<const NodeId> dst_ids,
                                            std::span<const NodeId> frontier, std::span<const double> raw_p,
                                            std::int64_t k, const ThinningConfig& cfg, bool* all_included = nullptr);

// Deterministic core: include frontier[j] iff phis[j] <= p_final[j].
SampledBlock poisson_sample_fixed(const CsrGraph& graph, std::span<const NodeId> dst_ids,
                                  const EdgeCoefficients& alpha, std::span<const NodeId> frontier,
                                  std::span<const double> p_final, std::span<const double> phis, int layer_index,
                                  bool all_included);

// Top-down multi-layer sampling. fanouts are ordered input layer first;
// returned blocks are ordered input layer first as well.
std::vector<SampledBlock> ladies_sample_pipeline(const CsrGraph& graph, std::span<const NodeId> seed_batch,
                                                 const EdgeCoefficients& alpha, std::span<const std::int64_t> fanouts,
                                                 PipelineVariant variant, ReweightScheme scheme,
                                                 const ThinningConfig& cfg, Rng& rng);

// Full-neighborhood blocks (no sampling): alpha_tilde = alpha, q = 1.
std::vector<SampledBlock> full_neighborhood_blocks(const CsrGraph& graph, std::span<const NodeId> seed_batch,
                                                   const EdgeCoefficients& alpha, int num_layers);

}  // namespace bliss
