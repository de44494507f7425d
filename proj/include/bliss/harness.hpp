#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bliss/bandit.hpp"
#include "bliss/graph.hpp"
#include "bliss/nn.hpp"
#include "bliss/samplers.hpp"

namespace bliss {

// Experiment orchestration: configuration, seeded multi-run training,
// full-neighborhood evaluation, metric logging, sampler variance benchmarks
// and the CLI.

enum class SamplerKind { Bliss, Pladies, Ladies, Uniform };

std::string to_string(SamplerKind s);
std::string to_string(Arch a);

struct ExperimentConfig {
  std::string dataset_dir;
  Arch arch = Arch::Sage;
  SamplerKind sampler = SamplerKind::Bliss;
  std::int64_t batch_size = 32;
  std::vector<std::int64_t> fanouts = {512, 256, 128};  // input layer first
  std::int64_t steps = 300;
  std::int64_t hidden_dim = 64;
  double lr = 0.002;
  double eta = 0.4;
  double delta = 0.4e-6;  // eta / 1e6
  ThinningConfig thinning;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::int64_t eval_every = 100;
  ReweightScheme reweight = ReweightScheme::LadiesRowNorm;
  std::optional<AttentionMode> attention;  // unset = feedback for BLISS, softmax otherwise
  bool reward_single_division = false;
  bool reward_pre_activation = false;
  bool record_timings = false;
  std::string metrics_out;
  std::string summary_out;
  std::string checkpoint_dir;
  int max_parallel_runs = 0;  // 0 = hardware concurrency

  AttentionMode resolved_attention() const {
    if (attention) return *attention;
    return sampler == SamplerKind::Bliss ? AttentionMode::BlissFeedback : AttentionMode::FullSoftmax;
  }
  int num_layers() const { return static_cast<int>(fanouts.size()); }

  static ExperimentConfig from_json_file(const std::string& path);
  static ExperimentConfig from_json_text(const std::string& text);
};

struct MetricsRow {
  std::uint64_t seed = 0;
  std::int64_t step = 0;
  std::string split;
  double loss = 0.0;
  double f1 = 0.0;
  double seconds = 0.0;
};

void write_metrics_csv(std::span<const MetricsRow> rows, const std::string& path);
std::vector<MetricsRow> read_metrics_csv(const std::string& path);

struct EvalResult {
  double loss = 0.0;
  double f1 = 0.0;
};

// Full-neighborhood (unsampled) evaluation over the masked nodes, batched.
EvalResult evaluate(const DatasetBundle& data, const GnnParams& params, std::span<const std::uint8_t> mask);

// Uniform draw without replacement.
std::vector<NodeId> draw_batch(Rng& rng, std::span<const NodeId> pool, std::int64_t batch_size);

// Seed for parameter initialization of one run; shared with test oracles so
// a reference implementation can start from identical weights.
std::uint64_t run_param_seed(std::uint64_t run_seed);

// One seeded training run, stepwise. Holds the model, optimizer and (for
// BLISS) the bandit state; rng consumption per step is batch draw then
// sampling, so reference implementations can mirror the batch sequence.
class TrainLoop {
 public:
  TrainLoop(const ExperimentConfig& cfg, const DatasetBundle& data, std::uint64_t seed);

  struct StepResult {
    double loss = 0.0;
    double f1 = 0.0;  // batch micro-F1
    std::vector<NodeId> batch;
  };
  StepResult step();

  const GnnParams& params() const { return params_; }
  const BanditState& bandit() const;
  std::int64_t steps_done() const { return steps_done_; }

 private:
  StepResult train_step(std::span<const NodeId> batch);

  const ExperimentConfig cfg_;
  const DatasetBundle& data_;
  EdgeCoefficients alpha_;
  std::vector<NodeId> train_ids_;
  Rng rng_;
  GnnParams params_;
  AdamState adam_;
  std::optional<BanditState> bandit_;
  std::int64_t steps_done_ = 0;
};

struct SeedSummary {
  std::uint64_t seed = 0;
  EvalResult train, val, test;  // full-neighborhood at the final step
};

struct RunSummary {
  std::vector<MetricsRow> rows;
  std::vector<SeedSummary> per_seed;
  double mean_test_f1 = 0.0;
  double std_test_f1 = 0.0;
};

RunSummary run_experiment(const ExperimentConfig& cfg);

struct VarianceBenchConfig {
  std::vector<SamplerKind> samplers = {SamplerKind::Uniform, SamplerKind::Ladies, SamplerKind::Pladies,
                                       SamplerKind::Bliss};
  std::int64_t fanout = 10;
  std::int64_t trials = 20000;
  std::int64_t warmup_rounds = 500;  // BLISS bandit warm-up
  std::int64_t batch_size = 32;
  std::uint64_t seed = 1;
  double eta = 0.4;
  double delta = 0.4e-6;
  ThinningConfig thinning;
  CoeffMode coeff_mode = CoeffMode::Sage;
};

struct VarianceBenchRow {
  SamplerKind sampler = SamplerKind::Uniform;
  std::int64_t warmup = 0;
  double variance = 0.0;      // mean over trials of sum_i |mu_hat_i - mu_i|^2
  double stderr_mean = 0.0;   // Monte Carlo standard error of that mean
};

std::vector<VarianceBenchRow> bench_variance(const DatasetBundle& data, const VarianceBenchConfig& cfg);

// Aggregates a metrics CSV into per-(step, split) mean/std curves:
// step,split,mean_f1,std_f1,mean_loss,std_loss.
void export_plots(const std::string& metrics_csv, const std::string& out_csv);

// Subcommands: train, bench-variance, inspect-dataset, export-plots.
int cli(int argc, const char* const* argv);

}  // namespace bliss
