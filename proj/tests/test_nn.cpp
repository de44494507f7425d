#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <functional>

#include "bliss/graph.hpp"
#include "bliss/nn.hpp"
#include "bliss/rng.hpp"
#include "bliss/samplers.hpp"

using namespace bliss;

namespace {

CsrGraph random_graph(Rng& rng, NodeId n, int epn) {
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (NodeId i = 0; i < n; ++i) {
    for (int e = 0; e < epn; ++e) edges.emplace_back(i, static_cast<NodeId>(uniform_below(rng, n)));
  }
  return CsrGraph::from_edge_list(n, edges, true, true);
}

// Dense full-neighborhood reference forward, straightforward loops over the
// adjacency; independent of the block machinery.
Matrix dense_reference_forward(const CsrGraph& g, const Matrix& x, const GnnParams& params,
                               const EdgeCoefficients& alpha) {
  const std::size_t L = params.layers.size();
  Matrix h = x;
  for (std::size_t l = 0; l < L; ++l) {
    const LayerParams& lp = params.layers[l];
    const std::int64_t out_dim = lp.W.cols;
    Matrix next(g.num_nodes(), out_dim);
    if (params.arch == Arch::Sage) {
      for (NodeId i = 0; i < g.num_nodes(); ++i) {
        std::vector<double> agg(static_cast<std::size_t>(h.cols), 0.0);
        const auto row = g.neighbors(i);
        for (std::size_t e = 0; e < row.size(); ++e) {
          const double a = alpha.values[static_cast<std::size_t>(g.row_begin(i)) + e];
          for (std::int64_t c = 0; c < h.cols; ++c) agg[static_cast<std::size_t>(c)] += a * h.at(row[e], c);
        }
        for (std::int64_t o = 0; o < out_dim; ++o) {
          double v = lp.bias[static_cast<std::size_t>(o)];
          for (std::int64_t c = 0; c < h.cols; ++c) v += agg[static_cast<std::size_t>(c)] * lp.W.at(c, o);
          next.at(i, o) = v;
        }
      }
    } else {
      // GATv2, full softmax over the whole neighborhood
      Matrix u(g.num_nodes(), out_dim);
      for (NodeId i = 0; i < g.num_nodes(); ++i) {
        for (std::int64_t o = 0; o < out_dim; ++o) {
          double v = 0.0;
          for (std::int64_t c = 0; c < h.cols; ++c) v += h.at(i, c) * lp.W.at(c, o);
          u.at(i, o) = v;
        }
      }
      auto lrelu = [](double v) { return v > 0.0 ? v : 0.2 * v; };
      for (NodeId i = 0; i < g.num_nodes(); ++i) {
        const auto row = g.neighbors(i);
        std::vector<double> e_scores(row.size());
        double e_max = -1e300;
        for (std::size_t e = 0; e < row.size(); ++e) {
          double s = 0.0;
          for (std::int64_t o = 0; o < out_dim; ++o) {
            s += lp.attn[static_cast<std::size_t>(o)] * lrelu(u.at(i, o));
            s += lp.attn[static_cast<std::size_t>(out_dim + o)] * lrelu(u.at(row[e], o));
          }
          e_scores[e] = s;
          e_max = std::max(e_max, s);
        }
        double z = 0.0;
        for (double& s : e_scores) {
          s = std::exp(s - e_max);
          z += s;
        }
        for (std::int64_t o = 0; o < out_dim; ++o) {
          double v = lp.bias[static_cast<std::size_t>(o)];
          for (std::size_t e = 0; e < row.size(); ++e) v += e_scores[e] / z * u.at(row[e], o);
          next.at(i, o) = v;
        }
      }
    }
    if (l + 1 < L) {
      for (double& v : next.data) v = v > 0.0 ? v : 0.0;  // ReLU on hidden layers
    }
    h = std::move(next);
  }
  return h;
}

std::vector<double*> param_pointers(GnnParams& p) {
  std::vector<double*> out;
  for (LayerParams& lp : p.layers) {
    for (double& v : lp.W.data) out.push_back(&v);
    for (double& v : lp.bias) out.push_back(&v);
    for (double& v : lp.attn) out.push_back(&v);
  }
  return out;
}

std::vector<double> grad_values(const GnnGrads& g) {
  std::vector<double> out;
  for (const LayerParams& lp : g) {
    out.insert(out.end(), lp.W.data.begin(), lp.W.data.end());
    out.insert(out.end(), lp.bias.begin(), lp.bias.end());
    out.insert(out.end(), lp.attn.begin(), lp.attn.end());
  }
  return out;
}

// max relative error of analytic gradients against central differences
double fd_max_rel_error(GnnParams& params, const std::function<double()>& loss_fn, const GnnGrads& analytic) {
  const std::vector<double*> ptrs = param_pointers(params);
  const std::vector<double> grads = grad_values(analytic);
  REQUIRE(ptrs.size() == grads.size());
  const double step = 1e-5;
  double worst = 0.0;
  for (std::size_t i = 0; i < ptrs.size(); ++i) {
    const double saved = *ptrs[i];
    *ptrs[i] = saved + step;
    const double up = loss_fn();
    *ptrs[i] = saved - step;
    const double down = loss_fn();
    *ptrs[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double denom = std::max({std::abs(numeric), std::abs(grads[i]), 1e-6});
    worst = std::max(worst, std::abs(numeric - grads[i]) / denom);
  }
  return worst;
}

struct FdInstance {
  CsrGraph g;
  EdgeCoefficients alpha;
  Matrix x;
  std::vector<NodeId> batch;
  std::vector<std::int32_t> labels;
  std::vector<SampledBlock> blocks;
  std::vector<std::vector<double>> bandit_q;
};

FdInstance make_fd_instance(Rng& rng, Arch arch, bool sampled) {
  FdInstance inst;
  inst.g = random_graph(rng, 8, 2);
  inst.alpha = edge_coefficients(inst.g, CoeffMode::Sage);
  inst.x = Matrix(inst.g.num_nodes(), 3);
  for (double& v : inst.x.data) v = 2.0 * uniform01(rng) - 1.0;
  inst.batch = {1, 3, 6};
  for (std::size_t i = 0; i < inst.batch.size(); ++i) {
    inst.labels.push_back(static_cast<std::int32_t>(uniform_below(rng, 3)));
  }
  const std::vector<std::int64_t> fanouts = {4, 3, 2};
  if (sampled) {
    Rng sample_rng = make_rng(rng());
    inst.blocks = ladies_sample_pipeline(inst.g, inst.batch, inst.alpha, fanouts, PipelineVariant::Pladies,
                                         ReweightScheme::LadiesRowNorm, ThinningConfig{}, sample_rng);
  } else {
    inst.blocks = full_neighborhood_blocks(inst.g, inst.batch, inst.alpha, 3);
  }
  // synthetic bandit probabilities for the feedback mode
  for (const SampledBlock& b : inst.blocks) {
    std::vector<double> q(b.edges.size());
    Rng qrng = make_rng(rng());
    for (double& v : q) v = 0.2 + 0.6 * uniform01(qrng);
    inst.bandit_q.push_back(std::move(q));
  }
  (void)arch;
  return inst;
}

}  // namespace

TEST_CASE("sage_layer_forward basics") {
  SUBCASE("identity pipeline passes the source row through") {
    SampledBlock b;
    b.dst_ids = {0};
    b.src_ids = {5};
    b.edges = {BlockEdge{0, 5, 0, 0, 1.0, 1.0, 0}};
    Matrix h(1, 3);
    h.at(0, 0) = 1.0;
    h.at(0, 1) = -2.0;
    h.at(0, 2) = 0.5;
    Matrix W(3, 3);
    for (int i = 0; i < 3; ++i) W.at(i, i) = 1.0;
    const std::vector<double> bias(3, 0.0);
    const Matrix out = sage_layer_forward(b, h, W, bias, Activation{Activation::Kind::Identity, 0.0});
    for (std::int64_t c = 0; c < 3; ++c) CHECK(out.at(0, c) == doctest::Approx(h.at(0, c)));
  }
  SUBCASE("two neighbors with coefficient 0.5 average") {
    SampledBlock b;
    b.dst_ids = {0};
    b.src_ids = {1, 2};
    b.edges = {BlockEdge{0, 1, 0, 0, 0.5, 1.0, 0}, BlockEdge{0, 2, 0, 1, 0.5, 1.0, 1}};
    Matrix h(2, 2);
    h.at(0, 0) = 2.0;
    h.at(1, 1) = 2.0;
    Matrix W(2, 2);
    W.at(0, 0) = 1.0;
    W.at(1, 1) = 1.0;
    const std::vector<double> bias(2, 0.0);
    const Matrix out = sage_layer_forward(b, h, W, bias, Activation{Activation::Kind::Identity, 0.0});
    CHECK(out.at(0, 0) == doctest::Approx(1.0));
    CHECK(out.at(0, 1) == doctest::Approx(1.0));
  }
}

TEST_CASE("gatv2_scores") {
  SUBCASE("zero attention vector gives zero scores and uniform softmax") {
    SampledBlock b;
    b.dst_ids = {0};
    b.src_ids = {1, 2, 3};
    b.edges = {BlockEdge{0, 1, 0, 0, 1, 1, 0}, BlockEdge{0, 2, 0, 1, 1, 1, 1}, BlockEdge{0, 3, 0, 2, 1, 1, 2}};
    Rng rng = make_rng(5);
    Matrix h_dst(1, 2), h_src(3, 2), W(2, 2);
    for (double& v : h_dst.data) v = uniform01(rng);
    for (double& v : h_src.data) v = uniform01(rng);
    for (double& v : W.data) v = uniform01(rng);
    const std::vector<double> attn(4, 0.0);
    const GatScores s = gatv2_scores(b, h_dst, h_src, W, attn, 0.2);
    for (double e : s.e) CHECK(e == 0.0);
    for (double a : s.a_tilde) CHECK(a == 1.0);
    const std::vector<double> alpha = attention_normalize(b, s.a_tilde, AttentionMode::FullSoftmax);
    for (double a : alpha) CHECK(a == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("hand evaluation in two dimensions") {
    SampledBlock b;
    b.dst_ids = {0};
    b.src_ids = {1};
    b.edges = {BlockEdge{0, 1, 0, 0, 1, 1, 0}};
    Matrix h_dst(1, 2), h_src(1, 2), W(2, 2);
    h_dst.at(0, 0) = 1.0;
    h_dst.at(0, 1) = 2.0;
    h_src.at(0, 0) = -1.0;
    h_src.at(0, 1) = 1.0;
    W.at(0, 0) = 1.0;
    W.at(0, 1) = -1.0;
    W.at(1, 0) = 0.5;
    W.at(1, 1) = 0.25;
    const std::vector<double> attn = {0.3, -0.7, 1.1, 0.9};
    const GatScores s = gatv2_scores(b, h_dst, h_src, W, attn, 0.2);
    // u_dst = (2, -0.5) -> lrelu (2, -0.1); u_src = (-0.5, 1.25) -> lrelu (-0.1, 1.25)
    const double expected = 0.3 * 2.0 + (-0.7) * (-0.1) + 1.1 * (-0.1) + 0.9 * 1.25;
    CHECK(s.e[0] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("attention_normalize") {
  SampledBlock b;
  b.dst_ids = {0};
  b.src_ids = {1, 2};
  b.edges = {BlockEdge{0, 1, 0, 0, 1, 1, 0}, BlockEdge{0, 2, 0, 1, 1, 1, 1}};
  SUBCASE("softmax of (2,6)") {
    const std::vector<double> a_tilde = {2.0, 6.0};
    const std::vector<double> alpha = attention_normalize(b, a_tilde, AttentionMode::FullSoftmax);
    CHECK(alpha[0] == doctest::Approx(0.25));
    CHECK(alpha[1] == doctest::Approx(0.75));
  }
  SUBCASE("feedback mode matches the bandit example") {
    const std::vector<double> a_tilde = {2.0, 6.0};
    const std::vector<double> q = {0.3, 0.5};
    const std::vector<double> alpha = attention_normalize(b, a_tilde, AttentionMode::BlissFeedback, q);
    CHECK(alpha[0] == doctest::Approx(0.2));
    CHECK(alpha[1] == doctest::Approx(0.6));
  }
  SUBCASE("row sums: softmax to 1, feedback to the sampled q mass") {
    Rng rng = make_rng(8);
    std::vector<double> a_tilde = {uniform01(rng) + 0.1, uniform01(rng) + 0.1};
    std::vector<double> q = {0.4 * uniform01(rng), 0.4 * uniform01(rng)};
    const std::vector<double> sm = attention_normalize(b, a_tilde, AttentionMode::FullSoftmax);
    CHECK(sm[0] + sm[1] == doctest::Approx(1.0).epsilon(1e-12));
    const std::vector<double> fb = attention_normalize(b, a_tilde, AttentionMode::BlissFeedback, q);
    CHECK(fb[0] + fb[1] == doctest::Approx(q[0] + q[1]).epsilon(1e-12));
  }
}

TEST_CASE("cross_entropy") {
  SUBCASE("uniform logits give ln C") {
    Matrix logits(4, 7, 0.3);
    const std::vector<std::int32_t> labels = {0, 3, 6, 2};
    const CrossEntropyResult r = cross_entropy(logits, labels);
    CHECK(r.loss == doctest::Approx(std::log(7.0)).epsilon(1e-12));
  }
  SUBCASE("saturated correct logit drives the loss to zero") {
    Matrix logits(1, 3);
    logits.at(0, 1) = 50.0;
    const std::vector<std::int32_t> labels = {1};
    const CrossEntropyResult r = cross_entropy(logits, labels);
    CHECK(r.loss <= 1e-12);
  }
  SUBCASE("label out of range") {
    Matrix logits(1, 3);
    const std::vector<std::int32_t> labels = {3};
    CHECK_THROWS_AS((void)cross_entropy(logits, labels), std::runtime_error);
  }
  SUBCASE("gradient matches finite differences to 1e-6") {
    Rng rng = make_rng(12);
    Matrix logits(5, 4);
    for (double& v : logits.data) v = 2.0 * uniform01(rng) - 1.0;
    std::vector<std::int32_t> labels(5);
    for (auto& l : labels) l = static_cast<std::int32_t>(uniform_below(rng, 4));
    const CrossEntropyResult r = cross_entropy(logits, labels);
    const double step = 1e-6;
    for (std::size_t i = 0; i < logits.data.size(); ++i) {
      const double saved = logits.data[i];
      logits.data[i] = saved + step;
      const double up = cross_entropy(logits, labels).loss;
      logits.data[i] = saved - step;
      const double down = cross_entropy(logits, labels).loss;
      logits.data[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      CHECK(std::abs(numeric - r.grad.data[i]) <= 1e-6 * std::max(1.0, std::abs(numeric)));
    }
  }
}

TEST_CASE("adam_step") {
  const std::vector<std::int64_t> dims = {2, 2};
  SUBCASE("zero gradient is a fixed point") {
    GnnParams p = init_params(Arch::Sage, dims, 1);
    const GnnParams before = p;
    AdamState s = init_adam(p);
    const GnnGrads g = zero_grads(p);
    adam_step(p, g, s);
    CHECK(s.t == 1);
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
      CHECK(p.layers[l].W.data == before.layers[l].W.data);
      CHECK(p.layers[l].bias == before.layers[l].bias);
      for (double m : s.m[l].W.data) CHECK(m == 0.0);
      for (double v : s.v[l].W.data) CHECK(v == 0.0);
    }
  }
  SUBCASE("single step from zero state") {
    GnnParams p = init_params(Arch::Sage, dims, 2);
    const double w0 = p.layers[0].W.at(0, 0);
    AdamState s = init_adam(p, AdamConfig{0.002, 0.9, 0.999, 1e-8});
    GnnGrads g = zero_grads(p);
    const double grad = 0.37;
    g[0].W.at(0, 0) = grad;
    adam_step(p, g, s);
    // bias-corrected m_hat = grad, v_hat = grad^2
    const double expected = w0 - 0.002 * grad / (std::abs(grad) + 1e-8);
    CHECK(p.layers[0].W.at(0, 0) == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("constant gradient drives the update magnitude to lr") {
    GnnParams p = init_params(Arch::Sage, dims, 3);
    AdamState s = init_adam(p, AdamConfig{0.002, 0.9, 0.999, 1e-8});
    GnnGrads g = zero_grads(p);
    g[0].W.at(1, 1) = -0.8;
    double prev = p.layers[0].W.at(1, 1);
    double delta = 0.0;
    for (int step = 0; step < 5000; ++step) {
      adam_step(p, g, s);
      delta = p.layers[0].W.at(1, 1) - prev;
      prev = p.layers[0].W.at(1, 1);
    }
    CHECK(std::abs(std::abs(delta) - 0.002) <= 1e-3 * 0.002);
  }
}

TEST_CASE("micro_f1") {
  const std::vector<std::int32_t> labels = {0, 1, 2, 1};
  const std::vector<std::uint8_t> mask = {1, 1, 1, 1};
  CHECK(micro_f1(std::vector<std::int32_t>{0, 1, 2, 1}, labels, mask) == 1.0);
  CHECK(micro_f1(std::vector<std::int32_t>{1, 2, 0, 0}, labels, mask) == 0.0);
  CHECK(micro_f1(std::vector<std::int32_t>{0, 1, 2, 0}, labels, mask) == 0.75);
  const std::vector<std::uint8_t> empty(4, 0);
  CHECK_THROWS_AS((void)micro_f1(std::vector<std::int32_t>{0, 1, 2, 0}, labels, empty), std::runtime_error);
}

TEST_CASE("model_forward identity base case") {
  // L=1, identity W, zero bias: logits equal the aggregated features
  Rng rng = make_rng(19);
  const CsrGraph g = random_graph(rng, 6, 2);
  const EdgeCoefficients alpha = edge_coefficients(g, CoeffMode::Sage);
  Matrix x(6, 3);
  for (double& v : x.data) v = 2.0 * uniform01(rng) - 1.0;
  const std::vector<NodeId> batch = {0, 4};
  const auto blocks = full_neighborhood_blocks(g, batch, alpha, 1);

  GnnParams p;
  p.arch = Arch::Sage;
  p.dims = {3, 3};
  p.layers.resize(1);
  p.layers[0].W = Matrix(3, 3);
  for (int i = 0; i < 3; ++i) p.layers[0].W.at(i, i) = 1.0;
  p.layers[0].bias.assign(3, 0.0);

  const ForwardResult fwd = model_forward(blocks, x, p, AttentionMode::FullSoftmax);
  for (std::size_t t = 0; t < batch.size(); ++t) {
    const auto row = g.neighbors(batch[t]);
    for (std::int64_t c = 0; c < 3; ++c) {
      double agg = 0.0;
      for (std::size_t e = 0; e < row.size(); ++e) {
        agg += alpha.values[static_cast<std::size_t>(g.row_begin(batch[t])) + e] * x.at(row[e], c);
      }
      CHECK(fwd.logits.at(static_cast<std::int64_t>(t), c) == doctest::Approx(agg).epsilon(1e-12));
    }
  }
}

TEST_CASE("full-neighborhood forward equals the dense reference") {
  Rng rng = make_rng(29);
  for (const Arch arch : {Arch::Sage, Arch::GatV2}) {
    const CsrGraph g = random_graph(rng, 6, 2);
    const EdgeCoefficients alpha = edge_coefficients(g, CoeffMode::Sage);
    Matrix x(6, 3);
    for (double& v : x.data) v = 2.0 * uniform01(rng) - 1.0;
    const std::vector<std::int64_t> dims = {3, 4, 4, 3};
    const GnnParams p = init_params(arch, dims, 7);
    const std::vector<NodeId> batch = {0, 2, 5};
    const auto blocks = full_neighborhood_blocks(g, batch, alpha, 3);
    const ForwardResult fwd = model_forward(blocks, x, p, AttentionMode::FullSoftmax);
    const Matrix dense = dense_reference_forward(g, x, p, alpha);
    for (std::size_t t = 0; t < batch.size(); ++t) {
      for (std::int64_t c = 0; c < 3; ++c) {
        CHECK(std::abs(fwd.logits.at(static_cast<std::int64_t>(t), c) - dense.at(batch[t], c)) <= 1e-12);
      }
    }
  }
}

TEST_CASE("end-to-end gradients match central finite differences") {
  Rng rng = make_rng(43);
  const std::vector<std::int64_t> dims = {3, 4, 4, 3};
  struct Case {
    Arch arch;
    AttentionMode mode;
    bool sampled;
  };
  const Case cases[] = {{Arch::Sage, AttentionMode::FullSoftmax, false},
                        {Arch::Sage, AttentionMode::FullSoftmax, true},
                        {Arch::GatV2, AttentionMode::FullSoftmax, false},
                        {Arch::GatV2, AttentionMode::FullSoftmax, true},
                        {Arch::GatV2, AttentionMode::BlissFeedback, true}};
  for (const Case& c : cases) {
    for (int seed = 0; seed < 4; ++seed) {
      FdInstance inst = make_fd_instance(rng, c.arch, c.sampled);
      GnnParams params = init_params(c.arch, dims, static_cast<std::uint64_t>(100 + seed));
      auto loss_fn = [&]() {
        const ForwardResult fwd = model_forward(inst.blocks, inst.x, params, c.mode, inst.bandit_q);
        return cross_entropy(fwd.logits, inst.labels).loss;
      };
      const ForwardResult fwd = model_forward(inst.blocks, inst.x, params, c.mode, inst.bandit_q, true);
      const CrossEntropyResult ce = cross_entropy(fwd.logits, inst.labels);
      const GnnGrads grads = model_backward(fwd, inst.blocks, params, ce.grad, c.mode);
      const double err = fd_max_rel_error(params, loss_fn, grads);
      CHECK(err < 1e-4);
    }
  }
}

TEST_CASE("full-sampling equivalence: huge fanouts reproduce the dense forward") {
  Rng rng = make_rng(47);
  const CsrGraph g = random_graph(rng, 6, 2);
  const EdgeCoefficients alpha = edge_coefficients(g, CoeffMode::Sage);
  Matrix x(6, 3);
  for (double& v : x.data) v = 2.0 * uniform01(rng) - 1.0;
  const std::vector<NodeId> batch = {1, 3};
  const std::vector<std::int64_t> fanouts = {50, 50, 50};
  for (const Arch arch : {Arch::Sage, Arch::GatV2}) {
    const GnnParams p = init_params(arch, std::vector<std::int64_t>{3, 4, 4, 2}, 11);
    for (const auto variant : {PipelineVariant::Ladies, PipelineVariant::Pladies, PipelineVariant::Uniform}) {
      Rng local = make_rng(13);
      const auto blocks = ladies_sample_pipeline(g, batch, alpha, fanouts, variant, ReweightScheme::LadiesRowNorm,
                                                 ThinningConfig{}, local);
      const ForwardResult fwd = model_forward(blocks, x, p, AttentionMode::FullSoftmax);
      const Matrix dense = dense_reference_forward(g, x, p, alpha);
      for (std::size_t t = 0; t < batch.size(); ++t) {
        for (std::int64_t c = 0; c < 2; ++c) {
          CHECK(std::abs(fwd.logits.at(static_cast<std::int64_t>(t), c) - dense.at(batch[t], c)) <= 1e-10);
        }
      }
    }
  }
}

TEST_CASE("params checkpoint round-trips") {
  const GnnParams p = init_params(Arch::GatV2, std::vector<std::int64_t>{5, 4, 3}, 77);
  const std::string path = (std::filesystem::temp_directory_path() / "bliss_params_ckpt.bin").string();
  save_params_checkpoint(p, path);
  const GnnParams r = load_params_checkpoint(path);
  CHECK(r.arch == p.arch);
  CHECK(r.dims == p.dims);
  REQUIRE(r.layers.size() == p.layers.size());
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    CHECK(r.layers[l].W.data == p.layers[l].W.data);
    CHECK(r.layers[l].bias == p.layers[l].bias);
    CHECK(r.layers[l].attn == p.layers[l].attn);
  }
}
