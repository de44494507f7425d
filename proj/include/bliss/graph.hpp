#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bliss/matrix.hpp"

namespace bliss {

using NodeId = std::int32_t;
using EdgeId = std::int64_t;

// Compressed sparse adjacency over in-neighbors: row i lists the source
// nodes j that send messages to i. Rows are sorted and duplicate free.
// Immutable after construction and safe to share across threads.
class CsrGraph {
 public:
  CsrGraph() = default;
  CsrGraph(NodeId num_nodes, std::vector<EdgeId> offsets, std::vector<NodeId> targets);

  // Builds from (dst, src) pairs. Duplicates are always removed; symmetrize
  // adds the reverse of every edge; add_self_loops completes every row with
  // a self edge. Out-of-range endpoints throw.
  static CsrGraph from_edge_list(NodeId num_nodes, const std::vector<std::pair<NodeId, NodeId>>& dst_src,
                                 bool symmetrize, bool add_self_loops);

  NodeId num_nodes() const { return num_nodes_; }
  EdgeId num_edges() const { return static_cast<EdgeId>(targets_.size()); }
  EdgeId row_begin(NodeId i) const { return offsets_[static_cast<std::size_t>(i)]; }
  EdgeId row_end(NodeId i) const { return offsets_[static_cast<std::size_t>(i) + 1]; }
  EdgeId in_degree(NodeId i) const { return row_end(i) - row_begin(i); }
  std::span<const NodeId> neighbors(NodeId i) const {
    return {targets_.data() + row_begin(i), static_cast<std::size_t>(in_degree(i))};
  }
  const std::vector<EdgeId>& offsets() const { return offsets_; }
  const std::vector<NodeId>& targets() const { return targets_; }
  const std::vector<EdgeId>& edge_ids() const { return edge_ids_; }

  // Global slot of edge (dst <- src), -1 when absent.
  EdgeId edge_slot(NodeId dst, NodeId src) const;

  // Throws std::runtime_error describing the first violated invariant.
  void validate() const;

 private:
  NodeId num_nodes_ = 0;
  std::vector<EdgeId> offsets_{0};
  std::vector<NodeId> targets_;
  std::vector<EdgeId> edge_ids_;
};

struct DatasetBundle {
  CsrGraph graph;
  Matrix features;
  std::vector<std::int32_t> labels;  // -1 marks an unlabeled node
  std::vector<std::uint8_t> train_mask, val_mask, test_mask;
  std::int32_t num_classes = 0;
  // Edge count before self-loop completion (what dataset tables report).
  EdgeId input_edge_count = 0;
};

enum class CoeffMode { Gcn, Sage };

// Per-edge aggregation coefficients aligned with CsrGraph edge slots.
// Sage: 1/|N(i)| (rows sum to 1); Gcn: 1/(sqrt|N(i)| sqrt|N(j)|).
struct EdgeCoefficients {
  CoeffMode mode = CoeffMode::Sage;
  std::vector<double> values;
};

// Directory format: meta.json, edges.tsv, features.csv, labels.csv,
// splits.json. See README for the exact schema.
DatasetBundle load_dataset(const std::string& dir);
void save_dataset(const DatasetBundle& bundle, const std::string& dir, bool undirected = false);

// Random planted-partition graph whose node feature norms follow a power
// law with the given exponent (rank r gets norm (n/r)^skew, assigned by
// descending in-degree). Deterministic given seed.
DatasetBundle synthetic_skewed(NodeId num_nodes, int avg_degree, double norm_skew, std::uint64_t seed);

EdgeCoefficients edge_coefficients(const CsrGraph& graph, CoeffMode mode);

std::vector<NodeId> mask_to_ids(std::span<const std::uint8_t> mask);

}  // namespace bliss
