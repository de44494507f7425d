#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bliss/graph.hpp"
#include "bliss/matrix.hpp"

namespace bliss {

// Exact and Monte Carlo oracles for the layer-wise Horvitz-Thompson
// estimator. Ground truth for the samplers and the bandit; pure functions,
// safe to call concurrently.

enum class DistributionKind {
  Categorical,       // probs sum to 1, sampled with replacement
  PoissonInclusion,  // independent per-node inclusion probabilities in [0,1]
};

struct NodeDistribution {
  DistributionKind kind = DistributionKind::Categorical;
  std::vector<NodeId> candidate_ids;
  std::vector<double> probs;

  double prob_of(NodeId id) const;  // 0 when id is not a candidate
};

// mu_i = sum_{j in N_i} alpha_ij h_j by full summation. Rows of the result
// align with targets; h rows are indexed by global node id.
Matrix exact_mu(const CsrGraph& graph, std::span<const NodeId> targets, const EdgeCoefficients& alpha,
                const Matrix& h);

// k-draw importance-weighted estimate: (1/k) sum_s alpha_{i j_s}/q(j_s) h_{j_s};
// non-neighbor draws contribute zero. Throws if a drawn node has q = 0.
Matrix ht_estimate(const CsrGraph& graph, std::span<const NodeId> targets, std::span<const NodeId> sampled,
                   const NodeDistribution& q, const EdgeCoefficients& alpha, const Matrix& h);

// Poisson form: sum over included neighbors of alpha_ij/p_j h_j (no 1/k).
Matrix poisson_ht_estimate(const CsrGraph& graph, std::span<const NodeId> targets, std::span<const NodeId> included,
                           const NodeDistribution& p, const EdgeCoefficients& alpha, const Matrix& h);

struct VarianceMode {
  enum class Kind { ExactEnumeration, MonteCarlo } kind = Kind::ExactEnumeration;
  std::int64_t trials = 0;
  std::uint64_t seed = 0;

  static VarianceMode exact() { return {}; }
  static VarianceMode monte_carlo(std::int64_t trials, std::uint64_t seed) {
    return {Kind::MonteCarlo, trials, seed};
  }
};

struct VarianceEstimate {
  std::vector<double> per_target;  // E || mu_hat_i - mu_i ||^2
  double total = 0.0;              // sum over targets
  double total_stderr = 0.0;       // Monte Carlo standard error of total (0 in exact mode)
};

// Variance of the k-draw categorical estimator or the Poisson-inclusion
// estimator, by full enumeration (candidate set <= 12) or Monte Carlo.
VarianceEstimate estimator_variance(const CsrGraph& graph, std::span<const NodeId> targets,
                                    const EdgeCoefficients& alpha, const Matrix& h, const NodeDistribution& q, int k,
                                    const VarianceMode& mode);

struct OptimalDistribution {
  // Unnormalized scores of the closed form evaluated as printed,
  // cancellation and all; recorded for reference, never asserted against.
  std::vector<double> printed_scores;
  // Variance-minimizing categorical distribution over the candidate set,
  // found by projected gradient descent on the single-draw variance.
  NodeDistribution minimized;
};

OptimalDistribution optimal_distribution(const CsrGraph& graph, std::span<const NodeId> targets,
                                         const EdgeCoefficients& alpha, const Matrix& h);

// Single-draw categorical variance, closed form: sum_j c_j/q_j - sum_i |mu_i|^2
// with c_j = sum_i alpha_ij^2 |h_j|^2. Used as the optimizer objective and
// checked against enumeration in tests.
double single_draw_variance(const CsrGraph& graph, std::span<const NodeId> targets, const EdgeCoefficients& alpha,
                            const Matrix& h, const NodeDistribution& q);

// Frontier of a target set: sorted union of in-neighborhoods.
std::vector<NodeId> frontier_of(const CsrGraph& graph, std::span<const NodeId> targets);

// Euclidean projection onto the probability simplex.
std::vector<double> project_to_simplex(std::span<const double> v);

}  // namespace bliss
