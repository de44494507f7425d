#include "bliss/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace bliss {

void SampledBlock::validate() const {
  std::vector<std::uint8_t> dst_hit(dst_ids.size(), 0), src_hit(src_ids.size(), 0);
  for (const BlockEdge& e : edges) {
    if (e.dst_row < 0 || static_cast<std::size_t>(e.dst_row) >= dst_ids.size() || dst_ids[static_cast<std::size_t>(e.dst_row)] != e.dst) {
      throw std::runtime_error("SampledBlock: bad dst_row");
    }
    if (e.src_row < 0 || static_cast<std::size_t>(e.src_row) >= src_ids.size() || src_ids[static_cast<std::size_t>(e.src_row)] != e.src) {
      throw std::runtime_error("SampledBlock: bad src_row");
    }
    if (!(e.alpha_tilde >= 0.0) || !std::isfinite(e.alpha_tilde)) {
      throw std::runtime_error("SampledBlock: alpha_tilde not finite and >= 0");
    }
    if (!(e.q_used > 0.0 && e.q_used <= 1.0)) throw std::runtime_error("SampledBlock: q_used outside (0,1]");
    dst_hit[static_cast<std::size_t>(e.dst_row)] = 1;
    src_hit[static_cast<std::size_t>(e.src_row)] = 1;
  }
  for (std::size_t i = 0; i < dst_hit.size(); ++i) {
    if (!dst_hit[i]) {
      throw std::runtime_error("SampledBlock: destination " + std::to_string(dst_ids[i]) + " has no surviving edge");
    }
  }
  for (std::size_t i = 0; i < src_hit.size(); ++i) {
    if (!src_hit[i]) {
      throw std::runtime_error("SampledBlock: source " + std::to_string(src_ids[i]) + " appears in no edge");
    }
  }
}

LayerProbabilities ladies_probs(const CsrGraph& graph, std::span<const NodeId> dst_ids, const EdgeCoefficients& alpha,
                                LadiesVariant variant) {
  if (dst_ids.empty()) throw std::invalid_argument("ladies_probs: empty destination set");
  LayerProbabilities out;
  out.candidate_ids = frontier_of(graph, dst_ids);
  if (out.candidate_ids.empty()) throw std::runtime_error("ladies_probs: empty frontier");
  out.pi.assign(out.candidate_ids.size(), 0.0);
  for (NodeId i : dst_ids) {
    const auto row = graph.neighbors(i);
    for (std::size_t e = 0; e < row.size(); ++e) {
      const double a = alpha.values[static_cast<std::size_t>(graph.row_begin(i)) + e];
      const auto it = std::lower_bound(out.candidate_ids.begin(), out.candidate_ids.end(), row[e]);
      out.pi[static_cast<std::size_t>(it - out.candidate_ids.begin())] += a * a;
    }
  }
  if (variant == LadiesVariant::Sketch) {
    for (double& v : out.pi) v = std::sqrt(v);
  }
  const double total = std::accumulate(out.pi.begin(), out.pi.end(), 0.0);
  out.p.resize(out.pi.size());
  for (std::size_t j = 0; j < out.pi.size(); ++j) out.p[j] = out.pi[j] / total;
  return out;
}

std::vector<double> reweight_edges(std::span<const std::int32_t> edge_dst_rows, std::span<const double> alpha,
                                   std::span<const double> p_src, ReweightScheme scheme,
                                   std::span<const double> c_ij) {
  const std::size_t m = edge_dst_rows.size();
  if (alpha.size() != m || p_src.size() != m) throw std::invalid_argument("reweight_edges: array length mismatch");
  std::vector<double> base(m);
  std::int32_t max_row = -1;
  for (std::size_t e = 0; e < m; ++e) {
    if (p_src[e] <= 0.0) {
      throw std::runtime_error("reweight_edges: surviving edge with zero source probability");
    }
    base[e] = alpha[e] / p_src[e];
    max_row = std::max(max_row, edge_dst_rows[e]);
  }
  switch (scheme) {
    case ReweightScheme::LadiesRowNorm: {
      std::vector<double> row_sum(static_cast<std::size_t>(max_row) + 1, 0.0);
      for (std::size_t e = 0; e < m; ++e) row_sum[static_cast<std::size_t>(edge_dst_rows[e])] += base[e];
      for (std::size_t e = 0; e < m; ++e) base[e] /= row_sum[static_cast<std::size_t>(edge_dst_rows[e])];
      return base;
    }
    case ReweightScheme::LadiesDegNorm: {
      if (c_ij.size() != m) throw std::invalid_argument("reweight_edges: degree normalization needs c_ij");
      for (std::size_t e = 0; e < m; ++e) base[e] /= c_ij[e];
      return base;
    }
    case ReweightScheme::SketchSampleCount: {
      std::vector<double> ns(static_cast<std::size_t>(max_row) + 1, 0.0);
      for (std::size_t e = 0; e < m; ++e) ns[static_cast<std::size_t>(edge_dst_rows[e])] += 1.0;
      for (std::size_t e = 0; e < m; ++e) base[e] /= ns[static_cast<std::size_t>(edge_dst_rows[e])];
      return base;
    }
  }
  throw std::logic_error("reweight_edges: unknown scheme");
}

double iterative_thinning(std::span<const double> p, double k, const ThinningConfig& cfg) {
  if (!(cfg.epsilon > 0.0 && cfg.epsilon < 1.0)) throw std::invalid_argument("iterative_thinning: epsilon outside (0,1)");
  if (cfg.n_ref < 1) throw std::invalid_argument("iterative_thinning: n_ref must be >= 1");
  if (k < 1.0) throw std::invalid_argument("iterative_thinning: k must be >= 1");
  double sum_p = 0.0;
  for (double v : p) {
    if (v < 0.0) throw std::invalid_argument("iterative_thinning: negative probability");
    sum_p += v;
  }
  if (sum_p <= 0.0) throw std::runtime_error("iterative_thinning: probabilities sum to zero");

  double c = 1.0;
  for (int iter = 0; iter < cfg.n_ref; ++iter) {
    double s = 0.0;
    for (double v : p) s += std::min(v * c, 1.0);
    if (std::min(s, k) / std::max(s, k) >= cfg.epsilon) break;
    c = c * k / s;
  }
  return c;
}

std::vector<double> poisson_inclusion_probs(const CsrGraph& graph, std::span<const NodeId> dst_ids,
                                            std::span<const NodeId> frontier, std::span<const double> raw_p,
                                            std::int64_t k, const ThinningConfig& cfg, bool* all_included) {
  (void)graph;
  if (raw_p.size() != frontier.size()) throw std::invalid_argument("poisson_inclusion_probs: length mismatch");
  std::vector<double> p_final(frontier.size(), 1.0);
  if (static_cast<std::int64_t>(frontier.size()) <= k) {
    if (all_included) *all_included = true;
    return p_final;  // include all nodes
  }
  if (all_included) *all_included = false;

  // Seed nodes are forced in and excluded from the thinning budget.
  std::vector<std::uint8_t> is_seed(frontier.size(), 0);
  for (NodeId s : dst_ids) {
    const auto it = std::lower_bound(frontier.begin(), frontier.end(), s);
    if (it != frontier.end() && *it == s) is_seed[static_cast<std::size_t>(it - frontier.begin())] = 1;
  }
  std::vector<double> non_seed_p;
  non_seed_p.reserve(frontier.size());
  for (std::size_t j = 0; j < frontier.size(); ++j) {
    if (!is_seed[j]) non_seed_p.push_back(raw_p[j]);
  }
  if (non_seed_p.empty()) return p_final;  // every candidate is a seed
  const double c = iterative_thinning(non_seed_p, static_cast<double>(k), cfg);
  for (std::size_t j = 0; j < frontier.size(); ++j) {
    if (!is_seed[j]) p_final[j] = std::min(raw_p[j] * c, 1.0);
  }
  return p_final;
}

SampledBlock poisson_sample_fixed(const CsrGraph& graph, std::span<const NodeId> dst_ids,
                                  const EdgeCoefficients& alpha, std::span<const NodeId> frontier,
                                  std::span<const double> p_final, std::span<const double> phis, int layer_index,
                                  bool all_included) {
  if (p_final.size() != frontier.size() || phis.size() != frontier.size()) {
    throw std::invalid_argument("poisson_sample_fixed: length mismatch");
  }
  SampledBlock block;
  block.layer_index = layer_index;
  block.all_included = all_included;
  block.dst_ids.assign(dst_ids.begin(), dst_ids.end());

  std::vector<std::int32_t> src_row_of(frontier.size(), -1);
  for (std::size_t j = 0; j < frontier.size(); ++j) {
    if (phis[j] <= p_final[j]) {
      src_row_of[j] = static_cast<std::int32_t>(block.src_ids.size());
      block.src_ids.push_back(frontier[j]);
    }
  }

  for (std::size_t d = 0; d < block.dst_ids.size(); ++d) {
    const NodeId i = block.dst_ids[d];
    const auto row = graph.neighbors(i);
    bool covered = false;
    for (std::size_t e = 0; e < row.size(); ++e) {
      const auto it = std::lower_bound(frontier.begin(), frontier.end(), row[e]);
      const std::size_t j = static_cast<std::size_t>(it - frontier.begin());
      if (it == frontier.end() || *it != row[e]) {
        throw std::runtime_error("poisson_sample_fixed: neighbor " + std::to_string(row[e]) +
                                 " missing from the frontier");
      }
      if (src_row_of[j] < 0) continue;
      const EdgeId slot = graph.row_begin(i) + static_cast<EdgeId>(e);
      BlockEdge be;
      be.dst = i;
      be.src = row[e];
      be.dst_row = static_cast<std::int32_t>(d);
      be.src_row = src_row_of[j];
      be.q_used = p_final[j];
      be.alpha_tilde = alpha.values[static_cast<std::size_t>(slot)] / p_final[j];
      be.edge_slot = slot;
      block.edges.push_back(be);
      covered = true;
    }
    if (!covered) {
      throw std::runtime_error("poisson_sample_fixed: destination " + std::to_string(i) +
                               " lost all neighbors (no self-loop?)");
    }
  }
  return block;
}

SampledBlock poisson_sample_given_probs(const CsrGraph& graph, std::span<const NodeId> dst_ids,
                                        const EdgeCoefficients& alpha, const LayerProbabilities& raw, std::int64_t k,
                                        const ThinningConfig& cfg, Rng& rng) {
  if (k < 1) throw std::invalid_argument("poisson_sample_given_probs: k must be >= 1");
  bool all_included = false;
  const std::vector<double> p_final =
      poisson_inclusion_probs(graph, dst_ids, raw.candidate_ids, raw.p, k, cfg, &all_included);
  std::vector<double> phis(raw.candidate_ids.size(), 0.0);
  if (!all_included) {
    for (double& phi : phis) phi = uniform01(rng);
  }
  return poisson_sample_fixed(graph, dst_ids, alpha, raw.candidate_ids, p_final, phis, 0, all_included);
}

SampledBlock poisson_sample_with_skips(const CsrGraph& graph, std::span<const NodeId> dst_ids,
                                       const EdgeCoefficients& alpha, std::int64_t k, const ThinningConfig& cfg,
                                       Rng& rng) {
  const LayerProbabilities probs = ladies_probs(graph, dst_ids, alpha, LadiesVariant::Ladies);
  return poisson_sample_given_probs(graph, dst_ids, alpha, probs, k, cfg, rng);
}

namespace {

// Categorical layer sampling: k draws with replacement, deduplicated, then
// unioned with the seed nodes (skip connections).
SampledBlock categorical_sample(const CsrGraph& graph, std::span<const NodeId> dst_ids, const EdgeCoefficients& alpha,
                                const LayerProbabilities& probs, std::int64_t k, ReweightScheme scheme,
                                const EdgeCoefficients* c_source, Rng& rng) {
  const auto& frontier = probs.candidate_ids;
  SampledBlock block;
  block.dst_ids.assign(dst_ids.begin(), dst_ids.end());

  std::vector<std::uint8_t> selected(frontier.size(), 0);
  const bool all_included = static_cast<std::int64_t>(frontier.size()) <= k;
  block.all_included = all_included;
  if (all_included) {
    std::fill(selected.begin(), selected.end(), 1);
  } else {
    for (std::int64_t s = 0; s < k; ++s) {
      selected[categorical_draw(probs.p, 1.0, rng)] = 1;
    }
    for (NodeId seed : dst_ids) {
      const auto it = std::lower_bound(frontier.begin(), frontier.end(), seed);
      if (it != frontier.end() && *it == seed) selected[static_cast<std::size_t>(it - frontier.begin())] = 1;
    }
  }

  std::vector<std::int32_t> src_row_of(frontier.size(), -1);
  for (std::size_t j = 0; j < frontier.size(); ++j) {
    if (selected[j]) {
      src_row_of[j] = static_cast<std::int32_t>(block.src_ids.size());
      block.src_ids.push_back(frontier[j]);
    }
  }

  std::vector<double> raw_alpha, p_of_src, c_vals;
  std::vector<std::int32_t> rows;
  for (std::size_t d = 0; d < block.dst_ids.size(); ++d) {
    const NodeId i = block.dst_ids[d];
    const auto row = graph.neighbors(i);
    bool covered = false;
    for (std::size_t e = 0; e < row.size(); ++e) {
      const auto it = std::lower_bound(frontier.begin(), frontier.end(), row[e]);
      const std::size_t j = static_cast<std::size_t>(it - frontier.begin());
      if (src_row_of[j] < 0) continue;
      const EdgeId slot = graph.row_begin(i) + static_cast<EdgeId>(e);
      BlockEdge be;
      be.dst = i;
      be.src = row[e];
      be.dst_row = static_cast<std::int32_t>(d);
      be.src_row = src_row_of[j];
      be.q_used = all_included ? 1.0 : probs.p[j];
      be.edge_slot = slot;
      be.alpha_tilde = alpha.values[static_cast<std::size_t>(slot)];
      block.edges.push_back(be);
      raw_alpha.push_back(alpha.values[static_cast<std::size_t>(slot)]);
      p_of_src.push_back(be.q_used);
      rows.push_back(be.dst_row);
      if (c_source) c_vals.push_back(1.0 / c_source->values[static_cast<std::size_t>(slot)]);
      covered = true;
    }
    if (!covered) {
      throw std::runtime_error("categorical_sample: destination " + std::to_string(i) +
                               " lost all neighbors (no self-loop?)");
    }
  }

  if (!all_included) {
    // the degree normalizer c_ij is the reciprocal of the aggregation coefficient
    const std::vector<double> tilde = reweight_edges(rows, raw_alpha, p_of_src, scheme, c_vals);
    for (std::size_t e = 0; e < block.edges.size(); ++e) block.edges[e].alpha_tilde = tilde[e];
  }
  return block;
}

}  // namespace

std::vector<SampledBlock> ladies_sample_pipeline(const CsrGraph& graph, std::span<const NodeId> seed_batch,
                                                 const EdgeCoefficients& alpha, std::span<const std::int64_t> fanouts,
                                                 PipelineVariant variant, ReweightScheme scheme,
                                                 const ThinningConfig& cfg, Rng& rng) {
  std::vector<SampledBlock> blocks(fanouts.size());
  std::vector<NodeId> dst(seed_batch.begin(), seed_batch.end());
  for (std::int64_t l = static_cast<std::int64_t>(fanouts.size()) - 1; l >= 0; --l) {
    const std::int64_t k = fanouts[static_cast<std::size_t>(l)];
    SampledBlock block;
    switch (variant) {
      case PipelineVariant::Pladies:
        block = poisson_sample_with_skips(graph, dst, alpha, k, cfg, rng);
        break;
      case PipelineVariant::Ladies:
      case PipelineVariant::Sketch: {
        const LayerProbabilities probs = ladies_probs(
            graph, dst, alpha, variant == PipelineVariant::Sketch ? LadiesVariant::Sketch : LadiesVariant::Ladies);
        block = categorical_sample(graph, dst, alpha, probs, k, scheme, &alpha, rng);
        break;
      }
      case PipelineVariant::Uniform: {
        LayerProbabilities probs;
        probs.candidate_ids = frontier_of(graph, dst);
        if (probs.candidate_ids.empty()) throw std::runtime_error("ladies_sample_pipeline: empty frontier");
        probs.pi.assign(probs.candidate_ids.size(), 1.0);
        probs.p.assign(probs.candidate_ids.size(), 1.0 / static_cast<double>(probs.candidate_ids.size()));
        block = categorical_sample(graph, dst, alpha, probs, k, scheme, &alpha, rng);
        break;
      }
    }
    block.layer_index = static_cast<int>(l);
    blocks[static_cast<std::size_t>(l)] = std::move(block);
    dst = blocks[static_cast<std::size_t>(l)].src_ids;
  }
  return blocks;
}

std::vector<SampledBlock> full_neighborhood_blocks(const CsrGraph& graph, std::span<const NodeId> seed_batch,
                                                   const EdgeCoefficients& alpha, int num_layers) {
  std::vector<SampledBlock> blocks(static_cast<std::size_t>(num_layers));
  std::vector<NodeId> dst(seed_batch.begin(), seed_batch.end());
  for (int l = num_layers - 1; l >= 0; --l) {
    SampledBlock block;
    block.layer_index = l;
    block.all_included = true;
    block.dst_ids = dst;
    block.src_ids = frontier_of(graph, dst);
    for (std::size_t d = 0; d < block.dst_ids.size(); ++d) {
      const NodeId i = block.dst_ids[d];
      const auto row = graph.neighbors(i);
      for (std::size_t e = 0; e < row.size(); ++e) {
        const auto it = std::lower_bound(block.src_ids.begin(), block.src_ids.end(), row[e]);
        const EdgeId slot = graph.row_begin(i) + static_cast<EdgeId>(e);
        BlockEdge be;
        be.dst = i;
        be.src = row[e];
        be.dst_row = static_cast<std::int32_t>(d);
        be.src_row = static_cast<std::int32_t>(it - block.src_ids.begin());
        be.alpha_tilde = alpha.values[static_cast<std::size_t>(slot)];
        be.q_used = 1.0;
        be.edge_slot = slot;
        block.edges.push_back(be);
      }
    }
    blocks[static_cast<std::size_t>(l)] = std::move(block);
    dst = blocks[static_cast<std::size_t>(l)].src_ids;
  }
  return blocks;
}

}  // namespace bliss
