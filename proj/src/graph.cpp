#include "bliss/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "bliss/rng.hpp"

namespace bliss {

namespace fs = std::filesystem;
using json = nlohmann::json;

CsrGraph::CsrGraph(NodeId num_nodes, std::vector<EdgeId> offsets, std::vector<NodeId> targets)
    : num_nodes_(num_nodes), offsets_(std::move(offsets)), targets_(std::move(targets)) {
  edge_ids_.resize(targets_.size());
  std::iota(edge_ids_.begin(), edge_ids_.end(), EdgeId{0});
  validate();
}

CsrGraph CsrGraph::from_edge_list(NodeId num_nodes, const std::vector<std::pair<NodeId, NodeId>>& dst_src,
                                  bool symmetrize, bool add_self_loops) {
  if (num_nodes < 0) throw std::invalid_argument("from_edge_list: negative node count");
  std::vector<std::pair<NodeId, NodeId>> edges;
  edges.reserve(dst_src.size() * (symmetrize ? 2 : 1));
  for (const auto& [d, s] : dst_src) {
    if (d < 0 || d >= num_nodes || s < 0 || s >= num_nodes) {
      throw std::runtime_error("validation error: edge (" + std::to_string(s) + " -> " + std::to_string(d) +
                               ") references node " + std::to_string(std::max(d, s)) + " but num_nodes=" +
                               std::to_string(num_nodes));
    }
    edges.emplace_back(d, s);
    if (symmetrize && d != s) edges.emplace_back(s, d);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  if (add_self_loops) {
    std::vector<std::pair<NodeId, NodeId>> completed;
    completed.reserve(edges.size() + static_cast<std::size_t>(num_nodes));
    std::size_t k = 0;
    for (NodeId i = 0; i < num_nodes; ++i) {
      bool has_loop = false;
      while (k < edges.size() && edges[k].first == i) {
        if (edges[k].second == i) has_loop = true;
        completed.push_back(edges[k]);
        ++k;
      }
      if (!has_loop) completed.emplace_back(i, i);
    }
    std::sort(completed.begin(), completed.end());
    edges = std::move(completed);
  }

  std::vector<EdgeId> offsets(static_cast<std::size_t>(num_nodes) + 1, 0);
  std::vector<NodeId> targets(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    offsets[static_cast<std::size_t>(edges[e].first) + 1]++;
    targets[e] = edges[e].second;
  }
  for (std::size_t i = 1; i < offsets.size(); ++i) offsets[i] += offsets[i - 1];
  return CsrGraph(num_nodes, std::move(offsets), std::move(targets));
}

EdgeId CsrGraph::edge_slot(NodeId dst, NodeId src) const {
  const auto row = neighbors(dst);
  const auto it = std::lower_bound(row.begin(), row.end(), src);
  if (it == row.end() || *it != src) return -1;
  return row_begin(dst) + (it - row.begin());
}

void CsrGraph::validate() const {
  if (num_nodes_ < 0) throw std::runtime_error("CsrGraph: negative node count");
  if (offsets_.size() != static_cast<std::size_t>(num_nodes_) + 1) {
    throw std::runtime_error("CsrGraph: offsets length " + std::to_string(offsets_.size()) + ", expected " +
                             std::to_string(num_nodes_ + 1));
  }
  if (offsets_.front() != 0) throw std::runtime_error("CsrGraph: offsets[0] != 0");
  if (offsets_.back() != static_cast<EdgeId>(targets_.size())) {
    throw std::runtime_error("CsrGraph: offsets end " + std::to_string(offsets_.back()) + " != edge count " +
                             std::to_string(targets_.size()));
  }
  for (std::size_t i = 1; i < offsets_.size(); ++i) {
    if (offsets_[i] < offsets_[i - 1]) throw std::runtime_error("CsrGraph: offsets decrease at " + std::to_string(i));
  }
  for (NodeId i = 0; i < num_nodes_; ++i) {
    const auto row = neighbors(i);
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (row[k] < 0 || row[k] >= num_nodes_) {
        throw std::runtime_error("CsrGraph: row " + std::to_string(i) + " references node " + std::to_string(row[k]));
      }
      if (k > 0 && row[k] <= row[k - 1]) {
        throw std::runtime_error("CsrGraph: row " + std::to_string(i) + " not strictly increasing");
      }
    }
  }
  if (edge_ids_.size() != targets_.size()) throw std::runtime_error("CsrGraph: edge_ids length mismatch");
  std::vector<std::uint8_t> seen(targets_.size(), 0);
  for (EdgeId id : edge_ids_) {
    if (id < 0 || id >= static_cast<EdgeId>(targets_.size()) || seen[static_cast<std::size_t>(id)]) {
      throw std::runtime_error("CsrGraph: edge_ids is not a permutation");
    }
    seen[static_cast<std::size_t>(id)] = 1;
  }
}

std::vector<NodeId> mask_to_ids(std::span<const std::uint8_t> mask) {
  std::vector<NodeId> ids;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) ids.push_back(static_cast<NodeId>(i));
  }
  return ids;
}

namespace {

std::ifstream open_or_throw(const fs::path& p) {
  std::ifstream f(p);
  if (!f) throw std::runtime_error("load error: missing file '" + p.string() + "'");
  return f;
}

void validate_bundle(const DatasetBundle& b) {
  const std::size_t n = static_cast<std::size_t>(b.graph.num_nodes());
  if (b.labels.size() != n) throw std::runtime_error("validation error: labels length != num_nodes");
  for (std::size_t i = 0; i < n; ++i) {
    if (b.labels[i] >= b.num_classes) {
      throw std::runtime_error("validation error: label " + std::to_string(b.labels[i]) + " out of range at node " +
                               std::to_string(i));
    }
  }
  if (b.features.rows != b.graph.num_nodes()) throw std::runtime_error("validation error: feature rows != num_nodes");
  for (std::int64_t r = 0; r < b.features.rows; ++r) {
    for (std::int64_t c = 0; c < b.features.cols; ++c) {
      if (!std::isfinite(b.features.at(r, c))) {
        throw std::runtime_error("validation error: non-finite feature at (" + std::to_string(r) + ", " +
                                 std::to_string(c) + ")");
      }
    }
  }
  if (b.train_mask.size() != n || b.val_mask.size() != n || b.test_mask.size() != n) {
    throw std::runtime_error("validation error: mask length != num_nodes");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (b.train_mask[i] + b.val_mask[i] + b.test_mask[i] > 1) {
      throw std::runtime_error("validation error: split masks overlap at node " + std::to_string(i));
    }
  }
}

std::vector<std::uint8_t> ids_to_mask(const json& arr, std::size_t n, const char* name) {
  std::vector<std::uint8_t> mask(n, 0);
  for (const auto& v : arr) {
    const std::int64_t id = v.get<std::int64_t>();
    if (id < 0 || id >= static_cast<std::int64_t>(n)) {
      throw std::runtime_error(std::string("validation error: split '") + name + "' references node " +
                               std::to_string(id));
    }
    mask[static_cast<std::size_t>(id)] = 1;
  }
  return mask;
}

}  // namespace

DatasetBundle load_dataset(const std::string& dir) {
  const fs::path root(dir);

  json meta;
  open_or_throw(root / "meta.json") >> meta;
  const NodeId num_nodes = meta.at("num_nodes").get<NodeId>();
  const std::int64_t num_features = meta.at("num_features").get<std::int64_t>();
  const std::int32_t num_classes = meta.at("num_classes").get<std::int32_t>();
  const bool undirected = meta.value("undirected", false);

  std::vector<std::pair<NodeId, NodeId>> edges;
  EdgeId raw_edge_lines = 0;
  {
    auto f = open_or_throw(root / "edges.tsv");
    std::int64_t src = 0, dst = 0;
    while (f >> src >> dst) {
      // "src dst" means dst aggregates from src.
      edges.emplace_back(static_cast<NodeId>(dst), static_cast<NodeId>(src));
      ++raw_edge_lines;
    }
  }

  DatasetBundle b;
  {
    // Count edges after dedup/symmetrization but before self-loop completion.
    CsrGraph without_loops = CsrGraph::from_edge_list(num_nodes, edges, undirected, /*add_self_loops=*/false);
    b.input_edge_count = without_loops.num_edges();
  }
  b.graph = CsrGraph::from_edge_list(num_nodes, edges, undirected, /*add_self_loops=*/true);

  b.features = Matrix(num_nodes, num_features);
  {
    auto f = open_or_throw(root / "features.csv");
    std::string line;
    for (NodeId r = 0; r < num_nodes; ++r) {
      if (!std::getline(f, line)) {
        throw std::runtime_error("load error: features.csv has fewer than " + std::to_string(num_nodes) + " rows");
      }
      const char* p = line.c_str();
      for (std::int64_t c = 0; c < num_features; ++c) {
        char* end = nullptr;
        const double v = std::strtod(p, &end);
        if (end == p) {
          throw std::runtime_error("load error: features.csv row " + std::to_string(r) + " has fewer than " +
                                   std::to_string(num_features) + " columns");
        }
        b.features.at(r, c) = v;
        p = end;
        while (*p == ',' || *p == ' ' || *p == '\t') ++p;
      }
    }
  }

  b.labels.resize(static_cast<std::size_t>(num_nodes));
  {
    auto f = open_or_throw(root / "labels.csv");
    for (NodeId r = 0; r < num_nodes; ++r) {
      std::int64_t v = 0;
      if (!(f >> v)) throw std::runtime_error("load error: labels.csv has fewer than " + std::to_string(num_nodes) + " rows");
      b.labels[static_cast<std::size_t>(r)] = static_cast<std::int32_t>(v);
    }
  }

  json splits;
  open_or_throw(root / "splits.json") >> splits;
  const std::size_t n = static_cast<std::size_t>(num_nodes);
  b.train_mask = ids_to_mask(splits.at("train"), n, "train");
  b.val_mask = ids_to_mask(splits.at("validation"), n, "validation");
  b.test_mask = ids_to_mask(splits.at("test"), n, "test");
  b.num_classes = num_classes;

  validate_bundle(b);
  return b;
}

void save_dataset(const DatasetBundle& bundle, const std::string& dir, bool undirected) {
  const fs::path root(dir);
  fs::create_directories(root);

  json meta = {{"num_nodes", bundle.graph.num_nodes()},
               {"num_features", bundle.features.cols},
               {"num_classes", bundle.num_classes},
               {"undirected", undirected}};
  std::ofstream(root / "meta.json") << meta.dump(2) << "\n";

  {
    std::ofstream f(root / "edges.tsv");
    const auto& g = bundle.graph;
    for (NodeId i = 0; i < g.num_nodes(); ++i) {
      for (NodeId j : g.neighbors(i)) {
        if (i == j) continue;  // self-loops are re-added at load time
        if (undirected && j > i) continue;
        f << j << "\t" << i << "\n";
      }
    }
  }

  {
    std::ofstream f(root / "features.csv");
    char buf[40];
    for (std::int64_t r = 0; r < bundle.features.rows; ++r) {
      for (std::int64_t c = 0; c < bundle.features.cols; ++c) {
        std::snprintf(buf, sizeof(buf), "%.17g", bundle.features.at(r, c));
        f << (c ? "," : "") << buf;
      }
      f << "\n";
    }
  }

  {
    std::ofstream f(root / "labels.csv");
    for (auto v : bundle.labels) f << v << "\n";
  }

  json splits;
  for (const auto& [name, mask] : {std::pair{"train", &bundle.train_mask}, std::pair{"validation", &bundle.val_mask},
                                   std::pair{"test", &bundle.test_mask}}) {
    json arr = json::array();
    for (NodeId id : mask_to_ids(*mask)) arr.push_back(id);
    splits[name] = std::move(arr);
  }
  std::ofstream(root / "splits.json") << splits.dump(2) << "\n";
}

DatasetBundle synthetic_skewed(NodeId num_nodes, int avg_degree, double norm_skew, std::uint64_t seed) {
  if (num_nodes < 2) throw std::invalid_argument("synthetic_skewed: num_nodes must be >= 2");
  if (avg_degree < 1) throw std::invalid_argument("synthetic_skewed: avg_degree must be >= 1");
  if (norm_skew < 0.0) throw std::invalid_argument("synthetic_skewed: norm_skew must be >= 0");

  Rng rng = make_rng(seed);
  const NodeId half = num_nodes / 2;
  auto community = [half](NodeId i) { return i < half ? 0 : 1; };

  std::vector<std::pair<NodeId, NodeId>> pairs;
  const std::int64_t num_pairs = static_cast<std::int64_t>(num_nodes) * avg_degree / 2;
  for (std::int64_t e = 0; e < num_pairs; ++e) {
    const NodeId u = static_cast<NodeId>(uniform_below(rng, num_nodes));
    const bool intra = uniform01(rng) < 0.8;
    NodeId v = u;
    for (int attempt = 0; attempt < 64 && v == u; ++attempt) {
      const NodeId cand = static_cast<NodeId>(uniform_below(rng, num_nodes));
      if (cand != u && (community(cand) == community(u)) == intra) v = cand;
    }
    if (v == u) v = (u + 1) % num_nodes;
    pairs.emplace_back(u, v);
  }
  DatasetBundle b;
  {
    CsrGraph without_loops = CsrGraph::from_edge_list(num_nodes, pairs, true, false);
    b.input_edge_count = without_loops.num_edges();
  }
  b.graph = CsrGraph::from_edge_list(num_nodes, pairs, true, true);

  // Norm profile: the node with in-degree rank r receives (n/r)^skew, so
  // max/min = n^skew. Ties broken by node id to keep the profile seeded.
  std::vector<NodeId> by_degree(static_cast<std::size_t>(num_nodes));
  std::iota(by_degree.begin(), by_degree.end(), NodeId{0});
  std::sort(by_degree.begin(), by_degree.end(), [&](NodeId a, NodeId c) {
    const EdgeId da = b.graph.in_degree(a), dc = b.graph.in_degree(c);
    return da != dc ? da > dc : a < c;
  });
  std::vector<double> norm(static_cast<std::size_t>(num_nodes));
  for (std::size_t r = 0; r < by_degree.size(); ++r) {
    norm[static_cast<std::size_t>(by_degree[r])] =
        std::pow(static_cast<double>(num_nodes) / static_cast<double>(r + 1), norm_skew);
  }

  const std::int64_t dim = 8;
  b.features = Matrix(num_nodes, dim);
  for (NodeId i = 0; i < num_nodes; ++i) {
    double* row = b.features.row(i);
    row[community(i)] = 2.0;  // community mean on axis 0 or 1
    for (std::int64_t c = 0; c < dim; ++c) row[c] += 0.5 * normal01(rng);
    double len = 0.0;
    for (std::int64_t c = 0; c < dim; ++c) len += row[c] * row[c];
    len = std::sqrt(len);
    const double scale = norm[static_cast<std::size_t>(i)] / (len > 0.0 ? len : 1.0);
    for (std::int64_t c = 0; c < dim; ++c) row[c] *= scale;
  }

  b.labels.resize(static_cast<std::size_t>(num_nodes));
  for (NodeId i = 0; i < num_nodes; ++i) b.labels[static_cast<std::size_t>(i)] = community(i);
  b.num_classes = 2;

  std::vector<NodeId> order(static_cast<std::size_t>(num_nodes));
  std::iota(order.begin(), order.end(), NodeId{0});
  shuffle_vec(order, rng);
  const std::size_t n = static_cast<std::size_t>(num_nodes);
  b.train_mask.assign(n, 0);
  b.val_mask.assign(n, 0);
  b.test_mask.assign(n, 0);
  const std::size_t n_train = (n * 6) / 10;
  const std::size_t n_val = n / 5;
  for (std::size_t k = 0; k < n; ++k) {
    const auto id = static_cast<std::size_t>(order[k]);
    if (k < n_train) {
      b.train_mask[id] = 1;
    } else if (k < n_train + n_val) {
      b.val_mask[id] = 1;
    } else {
      b.test_mask[id] = 1;
    }
  }
  validate_bundle(b);
  return b;
}

EdgeCoefficients edge_coefficients(const CsrGraph& graph, CoeffMode mode) {
  EdgeCoefficients coeff;
  coeff.mode = mode;
  coeff.values.resize(static_cast<std::size_t>(graph.num_edges()));
  for (NodeId i = 0; i < graph.num_nodes(); ++i) {
    const EdgeId deg_i = graph.in_degree(i);
    if (deg_i == 0) throw std::runtime_error("edge_coefficients: node " + std::to_string(i) + " has no in-neighbors");
    const auto row = graph.neighbors(i);
    for (std::size_t k = 0; k < row.size(); ++k) {
      const std::size_t slot = static_cast<std::size_t>(graph.row_begin(i)) + k;
      if (mode == CoeffMode::Sage) {
        coeff.values[slot] = 1.0 / static_cast<double>(deg_i);
      } else {
        const EdgeId deg_j = graph.in_degree(row[k]);
        coeff.values[slot] = 1.0 / (std::sqrt(static_cast<double>(deg_i)) * std::sqrt(static_cast<double>(deg_j)));
      }
    }
  }
  return coeff;
}

}  // namespace bliss
