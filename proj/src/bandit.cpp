#include "bliss/bandit.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "bliss/estimator.hpp"

namespace bliss {

using json = nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

BanditState init_state(const CsrGraph& graph, int num_layers, double eta, double delta) {
  if (!(eta > 0.0 && eta <= 1.0)) throw std::invalid_argument("init_state: eta must be in (0, 1]");
  if (!(delta > 0.0)) throw std::invalid_argument("init_state: delta must be > 0");
  if (num_layers < 1) throw std::invalid_argument("init_state: num_layers must be >= 1");
  BanditState s;
  s.num_layers = num_layers;
  s.eta = eta;
  s.delta = delta;
  s.step = 0;
  s.weights.assign(static_cast<std::size_t>(num_layers),
                   std::vector<double>(static_cast<std::size_t>(graph.num_edges()), 1.0));
  return s;
}

void validate_state(const BanditState& state, const CsrGraph& graph) {
  if (state.weights.size() != static_cast<std::size_t>(state.num_layers)) {
    throw std::runtime_error("BanditState: layer count mismatch");
  }
  for (const auto& layer : state.weights) {
    if (layer.size() != static_cast<std::size_t>(graph.num_edges())) {
      throw std::runtime_error("BanditState: weight table size != edge count");
    }
    for (double w : layer) {
      if (!(w > 0.0) || !std::isfinite(w)) throw std::runtime_error("BanditState: non-positive or non-finite weight");
    }
  }
}

QDistribution q_distribution(const BanditState& state, const CsrGraph& graph, int layer,
                             std::span<const NodeId> dst_ids) {
  if (layer < 0 || layer >= state.num_layers) throw std::invalid_argument("q_distribution: layer out of range");
  const auto& w = state.weights[static_cast<std::size_t>(layer)];
  QDistribution q;
  q.dst_ids.assign(dst_ids.begin(), dst_ids.end());
  q.rows.resize(dst_ids.size());
  for (std::size_t d = 0; d < dst_ids.size(); ++d) {
    const NodeId i = dst_ids[d];
    const EdgeId begin = graph.row_begin(i), end = graph.row_end(i);
    const double deg = static_cast<double>(end - begin);
    double total = 0.0;
    for (EdgeId s = begin; s < end; ++s) total += w[static_cast<std::size_t>(s)];
    auto& row = q.rows[d];
    row.resize(static_cast<std::size_t>(end - begin));
    for (EdgeId s = begin; s < end; ++s) {
      row[static_cast<std::size_t>(s - begin)] =
          (1.0 - state.eta) * w[static_cast<std::size_t>(s)] / total + state.eta / deg;
    }
  }
  return q;
}

LayerProbabilities node_probability(const CsrGraph& graph, const QDistribution& q,
                                    std::span<const NodeId> candidate_ids) {
  LayerProbabilities out;
  out.candidate_ids.assign(candidate_ids.begin(), candidate_ids.end());
  std::vector<double> sq(candidate_ids.size(), 0.0);
  for (std::size_t d = 0; d < q.dst_ids.size(); ++d) {
    const NodeId i = q.dst_ids[d];
    const auto row = graph.neighbors(i);
    const auto& qrow = q.rows[d];
    double row_sum = 0.0;
    for (double v : qrow) row_sum += v;
    for (std::size_t e = 0; e < row.size(); ++e) {
      const auto it = std::lower_bound(out.candidate_ids.begin(), out.candidate_ids.end(), row[e]);
      if (it == out.candidate_ids.end() || *it != row[e]) continue;
      const double term = qrow[e] / row_sum;
      sq[static_cast<std::size_t>(it - out.candidate_ids.begin())] += term * term;
    }
  }
  out.pi.resize(sq.size());
  for (std::size_t j = 0; j < sq.size(); ++j) out.pi[j] = std::sqrt(sq[j]);
  out.p = out.pi;  // raw scores; the Poisson sampler thins them
  return out;
}

SampleRecord bliss_sample_layers(const CsrGraph& graph, std::span<const NodeId> seed_batch,
                                 const EdgeCoefficients& alpha, std::span<const std::int64_t> fanouts,
                                 const BanditState& state, const ThinningConfig& cfg, Rng& rng) {
  if (static_cast<int>(fanouts.size()) != state.num_layers) {
    throw std::invalid_argument("bliss_sample_layers: fanouts length != num_layers");
  }
  SampleRecord record;
  record.fanouts.assign(fanouts.begin(), fanouts.end());
  record.blocks.resize(fanouts.size());
  record.bandit_q.resize(fanouts.size());
  std::vector<NodeId> dst(seed_batch.begin(), seed_batch.end());
  for (std::int64_t l = static_cast<std::int64_t>(fanouts.size()) - 1; l >= 0; --l) {
    const QDistribution q = q_distribution(state, graph, static_cast<int>(l), dst);
    const std::vector<NodeId> frontier = frontier_of(graph, dst);
    LayerProbabilities probs = node_probability(graph, q, frontier);
    SampledBlock& block = record.blocks[static_cast<std::size_t>(l)];
    block = poisson_sample_given_probs(graph, dst, alpha, probs, fanouts[static_cast<std::size_t>(l)], cfg, rng);
    block.layer_index = static_cast<int>(l);
    auto& bq = record.bandit_q[static_cast<std::size_t>(l)];
    bq.resize(block.edges.size());
    for (std::size_t e = 0; e < block.edges.size(); ++e) {
      const BlockEdge& be = block.edges[e];
      bq[e] =
          q.rows[static_cast<std::size_t>(be.dst_row)][static_cast<std::size_t>(be.edge_slot - graph.row_begin(be.dst))];
    }
    dst = block.src_ids;
  }
  return record;
}

RewardBatch compute_rewards(const SampleRecord& record, std::span<const Matrix> h_src,
                            std::span<const std::vector<double>> coeff_used) {
  if (h_src.size() != record.blocks.size() || coeff_used.size() != record.blocks.size()) {
    throw std::invalid_argument("compute_rewards: per-layer input length mismatch");
  }
  RewardBatch out;
  out.layers.resize(record.blocks.size());
  for (std::size_t l = 0; l < record.blocks.size(); ++l) {
    const SampledBlock& block = record.blocks[l];
    const Matrix& h = h_src[l];
    if (h.rows != static_cast<std::int64_t>(block.src_ids.size())) {
      throw std::invalid_argument("compute_rewards: h_src rows must align with block src_ids");
    }
    if (coeff_used[l].size() != block.edges.size()) {
      throw std::invalid_argument("compute_rewards: coefficient array must align with block edges");
    }
    const double k = static_cast<double>(record.fanouts[l]);
    auto& layer = out.layers[l];
    layer.edge_slots.reserve(block.edges.size());
    for (std::size_t e = 0; e < block.edges.size(); ++e) {
      const BlockEdge& be = block.edges[e];
      if (!(be.q_used > 0.0)) throw std::runtime_error("compute_rewards: recorded q is zero");
      const double coeff = coeff_used[l][e];
      const double r = coeff * coeff / (k * be.q_used * be.q_used) * row_norm_sq(h, be.src_row);
      layer.edge_slots.push_back(be.edge_slot);
      layer.dst.push_back(be.dst);
      layer.coeff.push_back(coeff);
      layer.r.push_back(r);
    }
  }
  return out;
}

void estimated_rewards(RewardBatch& rewards, const SampleRecord& record, bool single_division) {
  for (std::size_t l = 0; l < rewards.layers.size(); ++l) {
    auto& layer = rewards.layers[l];
    const SampledBlock& block = record.blocks[l];
    layer.r_hat.resize(layer.r.size());
    for (std::size_t e = 0; e < layer.r.size(); ++e) {
      layer.r_hat[e] = single_division ? layer.r[e] : layer.r[e] / block.edges[e].q_used;
    }
  }
}

void exp3_update(BanditState& state, const CsrGraph& graph, const RewardBatch& rewards) {
  if (rewards.layers.size() != static_cast<std::size_t>(state.num_layers)) {
    throw std::invalid_argument("exp3_update: layer count mismatch");
  }
  for (std::size_t l = 0; l < rewards.layers.size(); ++l) {
    const auto& layer = rewards.layers[l];
    auto& w = state.weights[l];
    std::vector<NodeId> touched;
    for (std::size_t e = 0; e < layer.edge_slots.size(); ++e) {
      const double r_hat = layer.r_hat[e];
      if (!(r_hat >= 0.0) || !std::isfinite(r_hat)) throw std::runtime_error("exp3_update: bad estimated reward");
      const NodeId i = layer.dst[e];
      const double deg = static_cast<double>(graph.in_degree(i));
      // Exponents beyond 700 saturate: after the rescale below the rest of
      // the row sits at the positivity floor either way.
      const double x = std::min(state.delta * r_hat / deg, 700.0);
      w[static_cast<std::size_t>(layer.edge_slots[e])] *= std::exp(x);
      touched.push_back(i);
    }
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
    for (NodeId i : touched) {
      const EdgeId begin = graph.row_begin(i), end = graph.row_end(i);
      double row_max = 0.0;
      for (EdgeId s = begin; s < end; ++s) row_max = std::max(row_max, w[static_cast<std::size_t>(s)]);
      if (row_max > 1e100) {
        // q_distribution is invariant to positive per-row rescaling; the
        // floor keeps weights positive when ratios exceed the double range.
        for (EdgeId s = begin; s < end; ++s) {
          w[static_cast<std::size_t>(s)] = std::max(w[static_cast<std::size_t>(s)] / row_max, 1e-300);
        }
      }
      for (EdgeId s = begin; s < end; ++s) {
        if (!std::isfinite(w[static_cast<std::size_t>(s)])) {
          throw std::runtime_error("exp3_update: non-finite weight after update");
        }
      }
    }
  }
  state.step += 1;
}

std::vector<double> feedback_attention(std::span<const double> q_sampled, std::span<const double> raw_scores) {
  if (q_sampled.empty() || q_sampled.size() != raw_scores.size()) {
    throw std::invalid_argument("feedback_attention: sampled set empty or misaligned");
  }
  double q_sum = 0.0, score_sum = 0.0;
  for (std::size_t j = 0; j < q_sampled.size(); ++j) {
    q_sum += q_sampled[j];
    score_sum += raw_scores[j];
  }
  if (!(score_sum > 0.0)) throw std::runtime_error("feedback_attention: attention scores sum to zero");
  std::vector<double> out(q_sampled.size());
  for (std::size_t j = 0; j < q_sampled.size(); ++j) out[j] = q_sum * raw_scores[j] / score_sum;
  return out;
}

void save_bandit_checkpoint(const BanditState& state, const std::string& path) {
  json header = {{"kind", "bliss-bandit-state"},
                 {"version", 1},
                 {"num_layers", state.num_layers},
                 {"num_edges", state.weights.empty() ? 0 : state.weights[0].size()},
                 {"eta", state.eta},
                 {"delta", state.delta},
                 {"step", state.step}};
  const std::string text = header.dump();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_bandit_checkpoint: cannot open '" + path + "'");
  const std::uint64_t len = text.size();
  f.write(reinterpret_cast<const char*>(&len), sizeof(len));
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& layer : state.weights) {
    f.write(reinterpret_cast<const char*>(layer.data()), static_cast<std::streamsize>(layer.size() * sizeof(double)));
  }
  if (!f) throw std::runtime_error("save_bandit_checkpoint: write failed for '" + path + "'");
}

BanditState load_bandit_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("load_bandit_checkpoint: cannot open '" + path + "'");
  std::uint64_t len = 0;
  f.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string text(len, '\0');
  f.read(text.data(), static_cast<std::streamsize>(len));
  const json header = json::parse(text);
  if (header.at("kind") != "bliss-bandit-state") throw std::runtime_error("load_bandit_checkpoint: wrong file kind");
  BanditState s;
  s.num_layers = header.at("num_layers").get<int>();
  s.eta = header.at("eta").get<double>();
  s.delta = header.at("delta").get<double>();
  s.step = header.at("step").get<std::int64_t>();
  const auto num_edges = header.at("num_edges").get<std::size_t>();
  s.weights.assign(static_cast<std::size_t>(s.num_layers), std::vector<double>(num_edges, 0.0));
  for (auto& layer : s.weights) {
    f.read(reinterpret_cast<char*>(layer.data()), static_cast<std::streamsize>(layer.size() * sizeof(double)));
  }
  if (!f) throw std::runtime_error("load_bandit_checkpoint: truncated file '" + path + "'");
  return s;
}

}  // namespace bliss
