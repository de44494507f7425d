#include "bliss/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bliss/rng.hpp"

namespace bliss {

double NodeDistribution::prob_of(NodeId id) const {
  if (std::is_sorted(candidate_ids.begin(), candidate_ids.end())) {
    const auto it = std::lower_bound(candidate_ids.begin(), candidate_ids.end(), id);
    if (it == candidate_ids.end() || *it != id) return 0.0;
    return probs[static_cast<std::size_t>(it - candidate_ids.begin())];
  }
  for (std::size_t i = 0; i < candidate_ids.size(); ++i) {
    if (candidate_ids[i] == id) return probs[i];
  }
  return 0.0;
}

std::vector<NodeId> frontier_of(const CsrGraph& graph, std::span<const NodeId> targets) {
  std::vector<NodeId> out;
  for (NodeId i : targets) {
    const auto row = graph.neighbors(i);
    out.insert(out.end(), row.begin(), row.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Matrix exact_mu(const CsrGraph& graph, std::span<const NodeId> targets, const EdgeCoefficients& alpha,
                const Matrix& h) {
  Matrix mu(static_cast<std::int64_t>(targets.size()), h.cols);
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const NodeId i = targets[t];
    if (graph.in_degree(i) == 0) {
      throw std::runtime_error("exact_mu: target " + std::to_string(i) + " has an empty neighborhood");
    }
    const auto row = graph.neighbors(i);
    double* out = mu.row(static_cast<std::int64_t>(t));
    for (std::size_t e = 0; e < row.size(); ++e) {
      const double a = alpha.values[static_cast<std::size_t>(graph.row_begin(i)) + e];
      const double* hj = h.row(row[e]);
      for (std::int64_t c = 0; c < h.cols; ++c) out[c] += a * hj[c];
    }
  }
  return mu;
}

Matrix ht_estimate(const CsrGraph& graph, std::span<const NodeId> targets, std::span<const NodeId> sampled,
                   const NodeDistribution& q, const EdgeCoefficients& alpha, const Matrix& h) {
  const auto k = static_cast<double>(sampled.size());
  Matrix mu(static_cast<std::int64_t>(targets.size()), h.cols);
  for (NodeId j : sampled) {
    if (q.prob_of(j) <= 0.0) {
      throw std::runtime_error("ht_estimate: sampled node " + std::to_string(j) + " has zero probability");
    }
  }
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const NodeId i = targets[t];
    double* out = mu.row(static_cast<std::int64_t>(t));
    for (NodeId j : sampled) {
      const EdgeId slot = graph.edge_slot(i, j);
      if (slot < 0) continue;  // non-neighbor draws contribute zero
      const double w = alpha.values[static_cast<std::size_t>(slot)] / q.prob_of(j) / k;
      const double* hj = h.row(j);
      for (std::int64_t c = 0; c < h.cols; ++c) out[c] += w * hj[c];
    }
  }
  return mu;
}

Matrix poisson_ht_estimate(const CsrGraph& graph, std::span<const NodeId> targets, std::span<const NodeId> included,
                           const NodeDistribution& p, const EdgeCoefficients& alpha, const Matrix& h) {
  Matrix mu(static_cast<std::int64_t>(targets.size()), h.cols);
  for (NodeId j : included) {
    if (p.prob_of(j) <= 0.0) {
      throw std::runtime_error("poisson_ht_estimate: included node " + std::to_string(j) + " has zero probability");
    }
  }
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const NodeId i = targets[t];
    double* out = mu.row(static_cast<std::int64_t>(t));
    for (NodeId j : included) {
      const EdgeId slot = graph.edge_slot(i, j);
      if (slot < 0) continue;
      const double w = alpha.values[static_cast<std::size_t>(slot)] / p.prob_of(j);
      const double* hj = h.row(j);
      for (std::int64_t c = 0; c < h.cols; ++c) out[c] += w * hj[c];
    }
  }
  return mu;
}

namespace {

// alpha looked up once: coeff[t][c] for target t, candidate c (0 if absent).
struct InstanceTable {
  std::vector<std::vector<double>> coeff;
  std::vector<const double*> h_rows;
  std::int64_t dim = 0;
  Matrix mu;
};

InstanceTable build_table(const CsrGraph& graph, std::span<const NodeId> targets, const EdgeCoefficients& alpha,
                          const Matrix& h, std::span<const NodeId> candidates) {
  InstanceTable tab;
  tab.dim = h.cols;
  tab.coeff.assign(targets.size(), std::vector<double>(candidates.size(), 0.0));
  for (std::size_t t = 0; t < targets.size(); ++t) {
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      const EdgeId slot = graph.edge_slot(targets[t], candidates[c]);
      if (slot >= 0) tab.coeff[t][c] = alpha.values[static_cast<std::size_t>(slot)];
    }
  }
  tab.h_rows.resize(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) tab.h_rows[c] = h.row(candidates[c]);
  tab.mu = exact_mu(graph, targets, alpha, h);
  return tab;
}

// Squared deviation sum_i |mu_hat_i - mu_i|^2 for one categorical outcome.
void accumulate_categorical(const InstanceTable& tab, std::span<const std::size_t> draws,
                            std::span<const double> probs, double weight, std::vector<double>& per_target,
                            double* total) {
  const double inv_k = 1.0 / static_cast<double>(draws.size());
  std::vector<double> est(static_cast<std::size_t>(tab.dim));
  for (std::size_t t = 0; t < per_target.size(); ++t) {
    std::fill(est.begin(), est.end(), 0.0);
    for (std::size_t s : draws) {
      const double a = tab.coeff[t][s];
      if (a == 0.0) continue;
      const double w = a / probs[s] * inv_k;
      const double* hj = tab.h_rows[s];
      for (std::int64_t c = 0; c < tab.dim; ++c) est[static_cast<std::size_t>(c)] += w * hj[c];
    }
    double d2 = 0.0;
    const double* mu = tab.mu.row(static_cast<std::int64_t>(t));
    for (std::int64_t c = 0; c < tab.dim; ++c) {
      const double d = est[static_cast<std::size_t>(c)] - mu[c];
      d2 += d * d;
    }
    per_target[t] += weight * d2;
    *total += weight * d2;
  }
}

void accumulate_poisson(const InstanceTable& tab, std::span<const std::uint8_t> pattern, std::span<const double> probs,
                        double weight, std::vector<double>& per_target, double* total) {
  std::vector<double> est(static_cast<std::size_t>(tab.dim));
  for (std::size_t t = 0; t < per_target.size(); ++t) {
    std::fill(est.begin(), est.end(), 0.0);
    for (std::size_t s = 0; s < pattern.size(); ++s) {
      if (!pattern[s]) continue;
      const double a = tab.coeff[t][s];
      if (a == 0.0) continue;
      const double w = a / probs[s];
      const double* hj = tab.h_rows[s];
      for (std::int64_t c = 0; c < tab.dim; ++c) est[static_cast<std::size_t>(c)] += w * hj[c];
    }
    double d2 = 0.0;
    const double* mu = tab.mu.row(static_cast<std::int64_t>(t));
    for (std::int64_t c = 0; c < tab.dim; ++c) {
      const double d = est[static_cast<std::size_t>(c)] - mu[c];
      d2 += d * d;
    }
    per_target[t] += weight * d2;
    *total += weight * d2;
  }
}

}  // namespace

VarianceEstimate estimator_variance(const CsrGraph& graph, std::span<const NodeId> targets,
                                    const EdgeCoefficients& alpha, const Matrix& h, const NodeDistribution& q, int k,
                                    const VarianceMode& mode) {
  const std::size_t n = q.candidate_ids.size();
  VarianceEstimate out;
  out.per_target.assign(targets.size(), 0.0);
  const InstanceTable tab = build_table(graph, targets, alpha, h, q.candidate_ids);

  if (mode.kind == VarianceMode::Kind::ExactEnumeration) {
    if (n > 12) {
      throw std::runtime_error("estimator_variance: exact enumeration limited to 12 candidates, got " +
                               std::to_string(n));
    }
    if (q.kind == DistributionKind::Categorical) {
      // Ordered k-tuples weighted by the product of draw probabilities.
      std::vector<std::size_t> draws(static_cast<std::size_t>(k), 0);
      while (true) {
        double weight = 1.0;
        for (std::size_t s : draws) weight *= q.probs[s];
        if (weight > 0.0) accumulate_categorical(tab, draws, q.probs, weight, out.per_target, &out.total);
        std::size_t d = 0;
        for (; d < draws.size(); ++d) {
          if (++draws[d] < n) break;
          draws[d] = 0;
        }
        if (d == draws.size()) break;
      }
    } else {
      std::vector<std::uint8_t> pattern(n, 0);
      for (std::uint64_t bits = 0; bits < (1ULL << n); ++bits) {
        double weight = 1.0;
        for (std::size_t s = 0; s < n; ++s) {
          pattern[s] = (bits >> s) & 1u;
          weight *= pattern[s] ? q.probs[s] : 1.0 - q.probs[s];
        }
        if (weight > 0.0) accumulate_poisson(tab, pattern, q.probs, weight, out.per_target, &out.total);
      }
    }
    return out;
  }

  // Monte Carlo over independently seeded trials.
  const std::int64_t trials = mode.trials;
  if (trials <= 0) throw std::invalid_argument("estimator_variance: monte carlo needs trials > 0");
  double cum = 0.0, cum_sq = 0.0;
  std::vector<std::size_t> draws(static_cast<std::size_t>(k), 0);
  std::vector<std::uint8_t> pattern(n, 0);
  const double prob_total = std::accumulate(q.probs.begin(), q.probs.end(), 0.0);
  for (std::int64_t trial = 0; trial < trials; ++trial) {
    Rng rng = make_trial_rng(mode.seed, static_cast<std::uint64_t>(trial));
    double trial_total = 0.0;
    std::vector<double> trial_per(targets.size(), 0.0);
    if (q.kind == DistributionKind::Categorical) {
      for (auto& d : draws) d = categorical_draw(q.probs, prob_total, rng);
      accumulate_categorical(tab, draws, q.probs, 1.0, trial_per, &trial_total);
    } else {
      for (std::size_t s = 0; s < n; ++s) pattern[s] = uniform01(rng) <= q.probs[s] ? 1 : 0;
      accumulate_poisson(tab, pattern, q.probs, 1.0, trial_per, &trial_total);
    }
    for (std::size_t t = 0; t < targets.size(); ++t) out.per_target[t] += trial_per[t];
    cum += trial_total;
    cum_sq += trial_total * trial_total;
  }
  for (auto& v : out.per_target) v /= static_cast<double>(trials);
  out.total = cum / static_cast<double>(trials);
  const double var_of_trials =
      std::max(0.0, cum_sq / static_cast<double>(trials) - out.total * out.total);
  out.total_stderr = std::sqrt(var_of_trials / static_cast<double>(trials));
  return out;
}

double single_draw_variance(const CsrGraph& graph, std::span<const NodeId> targets, const EdgeCoefficients& alpha,
                            const Matrix& h, const NodeDistribution& q) {
  double acc = 0.0;
  for (std::size_t c = 0; c < q.candidate_ids.size(); ++c) {
    const NodeId j = q.candidate_ids[c];
    double cj = 0.0;
    for (NodeId i : targets) {
      const EdgeId slot = graph.edge_slot(i, j);
      if (slot < 0) continue;
      const double a = alpha.values[static_cast<std::size_t>(slot)];
      cj += a * a;
    }
    cj *= row_norm_sq(h, j);
    if (cj == 0.0) continue;
    if (q.probs[c] <= 0.0) return std::numeric_limits<double>::infinity();
    acc += cj / q.probs[c];
  }
  const Matrix mu = exact_mu(graph, targets, alpha, h);
  for (std::int64_t t = 0; t < mu.rows; ++t) acc -= row_norm_sq(mu, t);
  return acc;
}

std::vector<double> project_to_simplex(std::span<const double> v) {
  std::vector<double> u(v.begin(), v.end());
  std::sort(u.begin(), u.end(), std::greater<>());
  double css = 0.0, theta = 0.0;
  std::size_t rho = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    css += u[i];
    const double t = (css - 1.0) / static_cast<double>(i + 1);
    if (u[i] - t > 0.0) {
      rho = i + 1;
      theta = t;
    }
  }
  (void)rho;
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::max(0.0, v[i] - theta);
  return out;
}

OptimalDistribution optimal_distribution(const CsrGraph& graph, std::span<const NodeId> targets,
                                         const EdgeCoefficients& alpha, const Matrix& h) {
  if (targets.empty()) throw std::invalid_argument("optimal_distribution: no targets");
  const std::vector<NodeId> cands = frontier_of(graph, targets);
  const std::size_t n = cands.size();

  OptimalDistribution out;
  out.printed_scores.assign(n, 0.0);
  std::vector<double> c(n, 0.0);  // c_j = sum_i alpha_ij^2 |h_j|^2
  for (std::size_t cidx = 0; cidx < n; ++cidx) {
    const NodeId j = cands[cidx];
    const double hnorm = std::sqrt(row_norm_sq(h, j));
    double score_sq = 0.0;
    for (NodeId i : targets) {
      const EdgeId slot = graph.edge_slot(i, j);
      if (slot < 0) continue;
      const double a = alpha.values[static_cast<std::size_t>(slot)];
      c[cidx] += a * a * hnorm * hnorm;
      // Printed closed form, evaluated literally; the inner sum runs over
      // s in N_i with alpha_{s,j} zero when (s <- j) is not an edge. Terms
      // with a vanishing denominator are recorded as zero.
      double denom = 0.0;
      for (NodeId s : graph.neighbors(i)) {
        const EdgeId sj = graph.edge_slot(s, j);
        if (sj >= 0) denom += alpha.values[static_cast<std::size_t>(sj)] * hnorm;
      }
      if (denom > 0.0) {
        const double term = a * hnorm / denom;
        score_sq += term * term;
      }
    }
    out.printed_scores[cidx] = std::sqrt(score_sq);
  }

  const double c_total = std::accumulate(c.begin(), c.end(), 0.0);
  if (c_total <= 0.0) throw std::runtime_error("optimal_distribution: all scores are zero");

  // Projected gradient descent on f(q) = sum_j c_j / q_j over the simplex.
  auto f = [&](const std::vector<double>& q) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (c[j] == 0.0) continue;
      if (q[j] <= 0.0) return std::numeric_limits<double>::infinity();
      acc += c[j] / q[j];
    }
    return acc;
  };
  std::vector<double> q(n, 1.0 / static_cast<double>(n));
  double fq = f(q);
  double step = 1.0 / (c_total * static_cast<double>(n) * static_cast<double>(n));
  std::vector<double> grad(n), trial(n);
  for (int iter = 0; iter < 20000; ++iter) {
    for (std::size_t j = 0; j < n; ++j) {
      grad[j] = c[j] == 0.0 ? 0.0 : -c[j] / (q[j] * q[j]);
    }
    // Projected Armijo: sufficient decrease along the projected step.
    double t = step;
    bool accepted = false;
    for (int bt = 0; bt < 80; ++bt) {
      for (std::size_t j = 0; j < n; ++j) trial[j] = q[j] - t * grad[j];
      trial = project_to_simplex(trial);
      double gd = 0.0, step_inf = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        gd += grad[j] * (trial[j] - q[j]);
        step_inf = std::max(step_inf, std::abs(trial[j] - q[j]));
      }
      if (step_inf < 1e-14) {
        iter = 20000;  // projected step vanished: stationary point
        break;
      }
      const double ft = f(trial);
      if (ft <= fq + 1e-4 * gd) {
        q = trial;
        fq = ft;
        step = t * 2.0;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
  }

  out.minimized.kind = DistributionKind::Categorical;
  out.minimized.candidate_ids = cands;
  out.minimized.probs = std::move(q);
  return out;
}

}  // namespace bliss
