#include "bliss/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "bliss/estimator.hpp"

namespace bliss {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string to_string(SamplerKind s) {
  switch (s) {
    case SamplerKind::Bliss: return "BLISS";
    case SamplerKind::Pladies: return "PLADIES";
    case SamplerKind::Ladies: return "LADIES";
    case SamplerKind::Uniform: return "UNIFORM";
  }
  return "?";
}

std::string to_string(Arch a) { return a == Arch::Sage ? "SAGE" : "GATv2"; }

namespace {

SamplerKind parse_sampler(const std::string& s) {
  if (s == "BLISS") return SamplerKind::Bliss;
  if (s == "PLADIES") return SamplerKind::Pladies;
  if (s == "LADIES") return SamplerKind::Ladies;
  if (s == "UNIFORM") return SamplerKind::Uniform;
  throw std::runtime_error("config error: unknown sampler '" + s + "'");
}

Arch parse_arch(const std::string& s) {
  if (s == "SAGE") return Arch::Sage;
  if (s == "GATv2") return Arch::GatV2;
  throw std::runtime_error("config error: unknown arch '" + s + "'");
}

ReweightScheme parse_reweight(const std::string& s) {
  if (s == "rownorm") return ReweightScheme::LadiesRowNorm;
  if (s == "degnorm") return ReweightScheme::LadiesDegNorm;
  if (s == "samplecount") return ReweightScheme::SketchSampleCount;
  throw std::runtime_error("config error: unknown reweight scheme '" + s + "'");
}

const char* const kKnownKeys[] = {
    "dataset",      "arch",           "sampler",       "batch_size",      "fanouts",
    "steps",        "hidden_dim",     "lr",            "eta",             "delta",
    "thinning_epsilon", "thinning_n_ref", "seeds",     "eval_every",      "reweight",
    "attention",    "reward_single_division", "reward_pre_activation", "record_timings",
    "metrics_out",  "summary_out",    "checkpoint_dir", "max_parallel_runs", "profile"};

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  const json j = json::parse(text);
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find_if(std::begin(kKnownKeys), std::end(kKnownKeys),
                     [&](const char* k) { return key == k; }) == std::end(kKnownKeys)) {
      throw std::runtime_error("config error: unknown key '" + key + "'");
    }
  }
  ExperimentConfig cfg;
  const std::string profile = j.value("profile", std::string("desk"));
  if (profile == "full") {
    cfg.hidden_dim = 256;
    cfg.steps = 1000;
  } else if (profile != "desk") {
    throw std::runtime_error("config error: unknown profile '" + profile + "'");
  }
  cfg.dataset_dir = j.at("dataset").get<std::string>();
  if (j.contains("arch")) cfg.arch = parse_arch(j["arch"].get<std::string>());
  if (j.contains("sampler")) cfg.sampler = parse_sampler(j["sampler"].get<std::string>());
  if (j.contains("batch_size")) cfg.batch_size = j["batch_size"].get<std::int64_t>();
  if (j.contains("fanouts")) cfg.fanouts = j["fanouts"].get<std::vector<std::int64_t>>();
  if (j.contains("steps")) cfg.steps = j["steps"].get<std::int64_t>();
  if (j.contains("hidden_dim")) cfg.hidden_dim = j["hidden_dim"].get<std::int64_t>();
  if (j.contains("lr")) cfg.lr = j["lr"].get<double>();
  if (j.contains("eta")) cfg.eta = j["eta"].get<double>();
  cfg.delta = j.contains("delta") ? j["delta"].get<double>() : cfg.eta / 1e6;
  if (j.contains("thinning_epsilon")) cfg.thinning.epsilon = j["thinning_epsilon"].get<double>();
  if (j.contains("thinning_n_ref")) cfg.thinning.n_ref = j["thinning_n_ref"].get<int>();
  if (j.contains("seeds")) cfg.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
  if (j.contains("eval_every")) cfg.eval_every = j["eval_every"].get<std::int64_t>();
  if (j.contains("reweight")) cfg.reweight = parse_reweight(j["reweight"].get<std::string>());
  if (j.contains("attention")) {
    const std::string a = j["attention"].get<std::string>();
    if (a == "softmax") {
      cfg.attention = AttentionMode::FullSoftmax;
    } else if (a == "feedback") {
      cfg.attention = AttentionMode::BlissFeedback;
    } else if (a != "auto") {
      throw std::runtime_error("config error: unknown attention mode '" + a + "'");
    }
  }
  if (j.contains("reward_single_division")) cfg.reward_single_division = j["reward_single_division"].get<bool>();
  if (j.contains("reward_pre_activation")) cfg.reward_pre_activation = j["reward_pre_activation"].get<bool>();
  if (j.contains("record_timings")) cfg.record_timings = j["record_timings"].get<bool>();
  if (j.contains("metrics_out")) cfg.metrics_out = j["metrics_out"].get<std::string>();
  if (j.contains("summary_out")) cfg.summary_out = j["summary_out"].get<std::string>();
  if (j.contains("checkpoint_dir")) cfg.checkpoint_dir = j["checkpoint_dir"].get<std::string>();
  if (j.contains("max_parallel_runs")) cfg.max_parallel_runs = j["max_parallel_runs"].get<int>();

  if (cfg.fanouts.empty()) throw std::runtime_error("config error: fanouts must be non-empty");
  if (cfg.batch_size < 1) throw std::runtime_error("config error: batch_size must be >= 1");
  if (cfg.steps < 1) throw std::runtime_error("config error: steps must be >= 1");
  if (cfg.seeds.empty()) throw std::runtime_error("config error: seeds must be non-empty");
  if (cfg.eval_every < 1) throw std::runtime_error("config error: eval_every must be >= 1");
  return cfg;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("config error: cannot open '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return from_json_text(ss.str());
}

std::vector<NodeId> draw_batch(Rng& rng, std::span<const NodeId> pool, std::int64_t batch_size) {
  std::vector<NodeId> v(pool.begin(), pool.end());
  const std::int64_t n = static_cast<std::int64_t>(v.size());
  const std::int64_t b = std::min(batch_size, n);
  for (std::int64_t i = 0; i < b; ++i) {
    const std::int64_t j = i + uniform_below(rng, n - i);
    std::swap(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(j)]);
  }
  v.resize(static_cast<std::size_t>(b));
  return v;
}

std::uint64_t run_param_seed(std::uint64_t run_seed) { return splitmix64(run_seed ^ 0x70617261AB5EEDULL); }

TrainLoop::TrainLoop(const ExperimentConfig& cfg, const DatasetBundle& data, std::uint64_t seed)
    : cfg_(cfg), data_(data), rng_(make_rng(seed)) {
  if (cfg.resolved_attention() == AttentionMode::BlissFeedback && cfg.sampler != SamplerKind::Bliss &&
      cfg.arch == Arch::GatV2) {
    throw std::invalid_argument("TrainLoop: feedback attention requires the BLISS sampler");
  }
  alpha_ = edge_coefficients(data.graph, CoeffMode::Sage);
  train_ids_ = mask_to_ids(data.train_mask);
  if (train_ids_.empty()) throw std::invalid_argument("TrainLoop: empty train split");

  std::vector<std::int64_t> dims;
  dims.push_back(data.features.cols);
  for (int l = 0; l + 1 < cfg.num_layers(); ++l) dims.push_back(cfg.hidden_dim);
  dims.push_back(data.num_classes);
  params_ = init_params(cfg.arch, dims, run_param_seed(seed));
  adam_ = init_adam(params_, AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});
  if (cfg.sampler == SamplerKind::Bliss) {
    bandit_ = init_state(data.graph, cfg.num_layers(), cfg.eta, cfg.delta);
  }
}

const BanditState& TrainLoop::bandit() const {
  if (!bandit_) throw std::logic_error("TrainLoop: no bandit state for this sampler");
  return *bandit_;
}

TrainLoop::StepResult TrainLoop::step() {
  std::vector<NodeId> batch = draw_batch(rng_, train_ids_, cfg_.batch_size);
  StepResult res = train_step(batch);
  res.batch = std::move(batch);
  ++steps_done_;
  return res;
}

TrainLoop::StepResult TrainLoop::train_step(std::span<const NodeId> batch) {
  const AttentionMode attn = cfg_.resolved_attention();
  SampleRecord record;
  std::vector<SampledBlock> pipeline_blocks;
  const bool is_bliss = cfg_.sampler == SamplerKind::Bliss;
  if (is_bliss) {
    record = bliss_sample_layers(data_.graph, batch, alpha_, cfg_.fanouts, *bandit_, cfg_.thinning, rng_);
  } else {
    PipelineVariant variant = PipelineVariant::Uniform;
    if (cfg_.sampler == SamplerKind::Ladies) variant = PipelineVariant::Ladies;
    if (cfg_.sampler == SamplerKind::Pladies) variant = PipelineVariant::Pladies;
    pipeline_blocks =
        ladies_sample_pipeline(data_.graph, batch, alpha_, cfg_.fanouts, variant, cfg_.reweight, cfg_.thinning, rng_);
  }
  const std::span<const SampledBlock> blocks = is_bliss ? std::span<const SampledBlock>(record.blocks)
                                                        : std::span<const SampledBlock>(pipeline_blocks);
  const std::span<const std::vector<double>> bandit_q =
      is_bliss ? std::span<const std::vector<double>>(record.bandit_q) : std::span<const std::vector<double>>();

  ForwardResult fwd = model_forward(blocks, data_.features, params_, attn, bandit_q, /*keep_trace=*/true);

  std::vector<std::int32_t> batch_labels(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) batch_labels[i] = data_.labels[static_cast<std::size_t>(batch[i])];
  const CrossEntropyResult ce = cross_entropy(fwd.logits, batch_labels);
  const GnnGrads grads = model_backward(fwd, blocks, params_, ce.grad, attn);
  adam_step(params_, grads, adam_);

  if (is_bliss) {
    const auto& h_src = cfg_.reward_pre_activation ? fwd.source_pre : fwd.source_post;
    RewardBatch rewards = compute_rewards(record, h_src, fwd.coeff_used);
    estimated_rewards(rewards, record, cfg_.reward_single_division);
    exp3_update(*bandit_, data_.graph, rewards);
  }

  StepResult res;
  res.loss = ce.loss;
  const std::vector<std::int32_t> preds = argmax_rows(fwd.logits);
  const std::vector<std::uint8_t> ones(batch.size(), 1);
  res.f1 = micro_f1(preds, batch_labels, ones);
  return res;
}

EvalResult evaluate(const DatasetBundle& data, const GnnParams& params, std::span<const std::uint8_t> mask) {
  const std::vector<NodeId> ids = mask_to_ids(mask);
  if (ids.empty()) throw std::runtime_error("evaluate: empty split");
  const EdgeCoefficients alpha = edge_coefficients(data.graph, CoeffMode::Sage);
  const int L = static_cast<int>(params.layers.size());
  constexpr std::size_t kEvalBatch = 512;

  double loss_sum = 0.0;
  std::int64_t correct = 0;
  for (std::size_t start = 0; start < ids.size(); start += kEvalBatch) {
    const std::size_t end = std::min(ids.size(), start + kEvalBatch);
    const std::span<const NodeId> chunk(ids.data() + start, end - start);
    const std::vector<SampledBlock> blocks = full_neighborhood_blocks(data.graph, chunk, alpha, L);
    const ForwardResult fwd = model_forward(blocks, data.features, params, AttentionMode::FullSoftmax);
    std::vector<std::int32_t> labels(chunk.size());
    for (std::size_t i = 0; i < chunk.size(); ++i) labels[i] = data.labels[static_cast<std::size_t>(chunk[i])];
    const CrossEntropyResult ce = cross_entropy(fwd.logits, labels);
    loss_sum += ce.loss * static_cast<double>(chunk.size());
    const std::vector<std::int32_t> preds = argmax_rows(fwd.logits);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      if (preds[i] == labels[i]) ++correct;
    }
  }
  EvalResult res;
  res.loss = loss_sum / static_cast<double>(ids.size());
  res.f1 = static_cast<double>(correct) / static_cast<double>(ids.size());
  return res;
}

namespace {

struct SeedRun {
  std::vector<MetricsRow> rows;
  SeedSummary summary;
};

SeedRun run_one_seed(const ExperimentConfig& cfg, const DatasetBundle& data, std::uint64_t seed) {
  SeedRun out;
  out.summary.seed = seed;
  TrainLoop loop(cfg, data, seed);
  for (std::int64_t step = 1; step <= cfg.steps; ++step) {
    const auto t0 = std::chrono::steady_clock::now();
    const TrainLoop::StepResult sr = loop.step();
    double secs = 0.0;
    if (cfg.record_timings) {
      secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    out.rows.push_back({seed, step, "train", sr.loss, sr.f1, secs});
    if (step % cfg.eval_every == 0 || step == cfg.steps) {
      const EvalResult val = evaluate(data, loop.params(), data.val_mask);
      const EvalResult test = evaluate(data, loop.params(), data.test_mask);
      out.rows.push_back({seed, step, "val", val.loss, val.f1, 0.0});
      out.rows.push_back({seed, step, "test", test.loss, test.f1, 0.0});
    }
  }
  out.summary.train = evaluate(data, loop.params(), data.train_mask);
  out.summary.val = evaluate(data, loop.params(), data.val_mask);
  out.summary.test = evaluate(data, loop.params(), data.test_mask);

  if (!cfg.checkpoint_dir.empty()) {
    fs::create_directories(cfg.checkpoint_dir);
    const std::string base = cfg.checkpoint_dir + "/seed_" + std::to_string(seed);
    save_params_checkpoint(loop.params(), base + ".params.bin");
    if (cfg.sampler == SamplerKind::Bliss) save_bandit_checkpoint(loop.bandit(), base + ".bandit.bin");
  }
  return out;
}

double population_std(std::span<const double> v, double mean) {
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return v.empty() ? 0.0 : std::sqrt(acc / static_cast<double>(v.size()));
}

void append_double(std::string& s, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  s += buf;
}

}  // namespace

RunSummary run_experiment(const ExperimentConfig& cfg) {
  const DatasetBundle data = load_dataset(cfg.dataset_dir);

  const int hw = static_cast<int>(std::thread::hardware_concurrency());
  const int parallel = std::max(1, cfg.max_parallel_runs > 0 ? cfg.max_parallel_runs : hw);

  std::vector<SeedRun> runs(cfg.seeds.size());
  for (std::size_t start = 0; start < cfg.seeds.size(); start += static_cast<std::size_t>(parallel)) {
    const std::size_t end = std::min(cfg.seeds.size(), start + static_cast<std::size_t>(parallel));
    std::vector<std::future<SeedRun>> futs;
    for (std::size_t i = start; i < end; ++i) {
      futs.push_back(std::async(std::launch::async,
                                [&cfg, &data, seed = cfg.seeds[i]]() { return run_one_seed(cfg, data, seed); }));
    }
    for (std::size_t i = start; i < end; ++i) runs[i] = futs[i - start].get();
  }

  RunSummary summary;
  std::vector<double> test_f1;
  for (auto& run : runs) {
    summary.rows.insert(summary.rows.end(), run.rows.begin(), run.rows.end());
    summary.per_seed.push_back(run.summary);
    test_f1.push_back(run.summary.test.f1);
  }
  summary.mean_test_f1 = std::accumulate(test_f1.begin(), test_f1.end(), 0.0) / static_cast<double>(test_f1.size());
  summary.std_test_f1 = population_std(test_f1, summary.mean_test_f1);

  if (!cfg.metrics_out.empty()) write_metrics_csv(summary.rows, cfg.metrics_out);
  if (!cfg.summary_out.empty()) {
    json per_seed = json::array();
    for (const SeedSummary& s : summary.per_seed) {
      per_seed.push_back({{"seed", s.seed},
                          {"train", {{"loss", s.train.loss}, {"f1", s.train.f1}}},
                          {"val", {{"loss", s.val.loss}, {"f1", s.val.f1}}},
                          {"test", {{"loss", s.test.loss}, {"f1", s.test.f1}}}});
    }
    const json out = {{"mean_test_f1", summary.mean_test_f1},
                      {"std_test_f1", summary.std_test_f1},
                      {"per_seed", per_seed}};
    std::ofstream(cfg.summary_out) << out.dump(2) << "\n";
  }
  return summary;
}

void write_metrics_csv(std::span<const MetricsRow> rows, const std::string& path) {
  std::string out = "seed,step,split,loss,f1,seconds\n";
  for (const MetricsRow& r : rows) {
    out += std::to_string(r.seed);
    out += ',';
    out += std::to_string(r.step);
    out += ',';
    out += r.split;
    out += ',';
    append_double(out, r.loss);
    out += ',';
    append_double(out, r.f1);
    out += ',';
    append_double(out, r.seconds);
    out += '\n';
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("write_metrics_csv: cannot open '" + path + "'");
  f << out;
}

std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_metrics_csv: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(f, line) || line != "seed,step,split,loss,f1,seconds") {
    throw std::runtime_error("read_metrics_csv: bad header in '" + path + "'");
  }
  std::vector<MetricsRow> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    MetricsRow r;
    std::getline(ss, field, ',');
    r.seed = std::stoull(field);
    std::getline(ss, field, ',');
    r.step = std::stoll(field);
    std::getline(ss, r.split, ',');
    std::getline(ss, field, ',');
    r.loss = std::strtod(field.c_str(), nullptr);
    std::getline(ss, field, ',');
    r.f1 = std::strtod(field.c_str(), nullptr);
    std::getline(ss, field, ',');
    r.seconds = std::strtod(field.c_str(), nullptr);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<VarianceBenchRow> bench_variance(const DatasetBundle& data, const VarianceBenchConfig& cfg) {
  const EdgeCoefficients alpha = edge_coefficients(data.graph, cfg.coeff_mode);
  Rng batch_rng = make_rng(cfg.seed ^ 0xBA7C4ULL);
  const std::vector<NodeId> train_ids = mask_to_ids(data.train_mask);
  const std::vector<NodeId> targets = draw_batch(batch_rng, train_ids, cfg.batch_size);
  const std::vector<NodeId> frontier = frontier_of(data.graph, targets);
  const Matrix mu = exact_mu(data.graph, targets, alpha, data.features);

  std::vector<VarianceBenchRow> out;
  for (SamplerKind sampler : cfg.samplers) {
    // Per-trial estimator depends on the sampler's native scheme.
    NodeDistribution dist;
    dist.candidate_ids = frontier;
    std::int64_t warmup = 0;

    if (static_cast<std::int64_t>(frontier.size()) <= cfg.fanout) {
      // All-included branch of every sampler: the layer is exact.
      out.push_back({sampler, sampler == SamplerKind::Bliss ? cfg.warmup_rounds : 0, 0.0, 0.0});
      continue;
    }
    if (sampler == SamplerKind::Uniform) {
      dist.kind = DistributionKind::Categorical;
      dist.probs.assign(frontier.size(), 1.0 / static_cast<double>(frontier.size()));
    } else if (sampler == SamplerKind::Ladies) {
      dist.kind = DistributionKind::Categorical;
      dist.probs = ladies_probs(data.graph, targets, alpha, LadiesVariant::Ladies).p;
    } else if (sampler == SamplerKind::Pladies) {
      dist.kind = DistributionKind::PoissonInclusion;
      const LayerProbabilities probs = ladies_probs(data.graph, targets, alpha, LadiesVariant::Ladies);
      dist.probs = poisson_inclusion_probs(data.graph, targets, frontier, probs.p, cfg.fanout, cfg.thinning);
    } else {
      // BLISS: adapt a single-layer bandit on frozen features, then measure
      // the Poisson estimator under the adapted distribution.
      warmup = cfg.warmup_rounds;
      BanditState state = init_state(data.graph, 1, cfg.eta, cfg.delta);
      Rng warm_rng = make_rng(cfg.seed ^ 0xB115ULL);
      const std::vector<std::int64_t> fanouts = {cfg.fanout};
      for (std::int64_t round = 0; round < cfg.warmup_rounds; ++round) {
        SampleRecord record = bliss_sample_layers(data.graph, targets, alpha, fanouts, state, cfg.thinning, warm_rng);
        Matrix h_src(static_cast<std::int64_t>(record.blocks[0].src_ids.size()), data.features.cols);
        for (std::size_t r = 0; r < record.blocks[0].src_ids.size(); ++r) {
          const double* src = data.features.row(record.blocks[0].src_ids[r]);
          std::copy(src, src + data.features.cols, h_src.row(static_cast<std::int64_t>(r)));
        }
        std::vector<double> coeff(record.blocks[0].edges.size());
        for (std::size_t e = 0; e < coeff.size(); ++e) coeff[e] = record.blocks[0].edges[e].alpha_tilde;
        const std::vector<Matrix> h = {std::move(h_src)};
        const std::vector<std::vector<double>> coeffs = {std::move(coeff)};
        RewardBatch rewards = compute_rewards(record, h, coeffs);
        estimated_rewards(rewards, record, false);
        exp3_update(state, data.graph, rewards);
      }
      const QDistribution q = q_distribution(state, data.graph, 0, targets);
      const LayerProbabilities probs = node_probability(data.graph, q, frontier);
      dist.kind = DistributionKind::PoissonInclusion;
      dist.probs = poisson_inclusion_probs(data.graph, targets, frontier, probs.p, cfg.fanout, cfg.thinning);
    }

    const VarianceEstimate est =
        estimator_variance(data.graph, targets, alpha, data.features, dist, static_cast<int>(cfg.fanout),
                           VarianceMode::monte_carlo(cfg.trials, cfg.seed ^ 0x7124A15ULL));
    out.push_back({sampler, warmup, est.total, est.total_stderr});
  }
  return out;
}

void export_plots(const std::string& metrics_csv, const std::string& out_csv) {
  const std::vector<MetricsRow> rows = read_metrics_csv(metrics_csv);
  std::map<std::pair<std::int64_t, std::string>, std::pair<std::vector<double>, std::vector<double>>> grouped;
  for (const MetricsRow& r : rows) {
    auto& bucket = grouped[{r.step, r.split}];
    bucket.first.push_back(r.f1);
    bucket.second.push_back(r.loss);
  }
  std::string out = "step,split,mean_f1,std_f1,mean_loss,std_loss\n";
  for (const auto& [key, bucket] : grouped) {
    const auto& [f1s, losses] = bucket;
    const double mf = std::accumulate(f1s.begin(), f1s.end(), 0.0) / static_cast<double>(f1s.size());
    const double ml = std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
    out += std::to_string(key.first);
    out += ',';
    out += key.second;
    out += ',';
    append_double(out, mf);
    out += ',';
    append_double(out, population_std(f1s, mf));
    out += ',';
    append_double(out, ml);
    out += ',';
    append_double(out, population_std(losses, ml));
    out += '\n';
  }
  std::ofstream f(out_csv, std::ios::binary);
  if (!f) throw std::runtime_error("export_plots: cannot open '" + out_csv + "'");
  f << out;
}

namespace {

int cmd_train(const std::string& config_path) {
  const ExperimentConfig cfg = ExperimentConfig::from_json_file(config_path);
  const RunSummary summary = run_experiment(cfg);
  for (const SeedSummary& s : summary.per_seed) {
    std::printf("seed %llu: train f1 %.4f  val f1 %.4f  test f1 %.4f\n", static_cast<unsigned long long>(s.seed),
                s.train.f1, s.val.f1, s.test.f1);
  }
  std::printf("test f1: %.4f +- %.4f over %zu seeds\n", summary.mean_test_f1, summary.std_test_f1,
              summary.per_seed.size());
  if (!cfg.metrics_out.empty()) std::printf("wrote %s\n", cfg.metrics_out.c_str());
  if (!cfg.summary_out.empty()) std::printf("wrote %s\n", cfg.summary_out.c_str());
  return 0;
}

int cmd_bench(const std::string& config_path) {
  std::ifstream f(config_path);
  if (!f) throw std::runtime_error("config error: cannot open '" + config_path + "'");
  json j;
  f >> j;
  const DatasetBundle data = load_dataset(j.at("dataset").get<std::string>());
  VarianceBenchConfig cfg;
  if (j.contains("samplers")) {
    cfg.samplers.clear();
    for (const auto& s : j["samplers"]) cfg.samplers.push_back(parse_sampler(s.get<std::string>()));
  }
  if (j.contains("fanout")) cfg.fanout = j["fanout"].get<std::int64_t>();
  if (j.contains("trials")) cfg.trials = j["trials"].get<std::int64_t>();
  if (j.contains("warmup_rounds")) cfg.warmup_rounds = j["warmup_rounds"].get<std::int64_t>();
  if (j.contains("batch_size")) cfg.batch_size = j["batch_size"].get<std::int64_t>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("eta")) cfg.eta = j["eta"].get<double>();
  cfg.delta = j.contains("delta") ? j["delta"].get<double>() : cfg.eta / 1e6;
  if (j.contains("thinning_epsilon")) cfg.thinning.epsilon = j["thinning_epsilon"].get<double>();
  if (j.contains("thinning_n_ref")) cfg.thinning.n_ref = j["thinning_n_ref"].get<int>();

  const std::vector<VarianceBenchRow> rows = bench_variance(data, cfg);
  std::string out = "sampler,T,variance,stderr\n";
  for (const VarianceBenchRow& r : rows) {
    out += to_string(r.sampler);
    out += ',';
    out += std::to_string(r.warmup);
    out += ',';
    append_double(out, r.variance);
    out += ',';
    append_double(out, r.stderr_mean);
    out += '\n';
  }
  std::fputs(out.c_str(), stdout);
  if (j.contains("output")) {
    std::ofstream o(j["output"].get<std::string>(), std::ios::binary);
    o << out;
  }
  return 0;
}

int cmd_inspect(const std::string& dir) {
  const DatasetBundle data = load_dataset(dir);
  std::printf("nodes: %d\n", data.graph.num_nodes());
  std::printf("edges: %lld (stored with self-loops: %lld)\n", static_cast<long long>(data.input_edge_count),
              static_cast<long long>(data.graph.num_edges()));
  std::printf("features: %lld\n", static_cast<long long>(data.features.cols));
  std::printf("classes: %d\n", data.num_classes);
  std::printf("train/val/test: %zu/%zu/%zu\n", mask_to_ids(data.train_mask).size(), mask_to_ids(data.val_mask).size(),
              mask_to_ids(data.test_mask).size());
  return 0;
}

}  // namespace

int cli(int argc, const char* const* argv) {
  CLI::App app{"BLISS: bandit-driven layer-wise importance sampling for GNN training"};
  app.require_subcommand(1);

  std::string train_config, bench_config, inspect_dir, metrics_path, plots_out;

  CLI::App* train = app.add_subcommand("train", "run a seeded training experiment");
  train->add_option("--config", train_config, "experiment config (JSON)")->required();

  CLI::App* bench = app.add_subcommand("bench-variance", "Monte Carlo estimator variance per sampler");
  bench->add_option("--config", bench_config, "bench config (JSON)")->required();

  CLI::App* inspect = app.add_subcommand("inspect-dataset", "print dataset shape and splits");
  inspect->add_option("dir", inspect_dir, "dataset directory")->required();

  CLI::App* plots = app.add_subcommand("export-plots", "aggregate a metrics CSV into mean/std curves");
  plots->add_option("metrics", metrics_path, "metrics CSV from train")->required();
  plots->add_option("-o,--output", plots_out, "output CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    std::fputs(app.help().c_str(), stderr);
    return 2;
  }

  try {
    if (train->parsed()) return cmd_train(train_config);
    if (bench->parsed()) return cmd_bench(bench_config);
    if (inspect->parsed()) return cmd_inspect(inspect_dir);
    if (plots->parsed()) {
      const std::string out = plots_out.empty() ? metrics_path + ".plots.csv" : plots_out;
      export_plots(metrics_path, out);
      std::printf("wrote %s\n", out.c_str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}

}  // namespace bliss
