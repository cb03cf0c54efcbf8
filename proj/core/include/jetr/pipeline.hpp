#pragma once

// Training and evaluation orchestration: candidate retrieval, pair
// sampling against the frozen generator's losses, joint loss and gradient
// accumulation through the enhancer, AdamW steps, checkpointing, and
// metric evaluation of the raw vs enhanced scorers.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "jetr/dataset.hpp"
#include "jetr/losses.hpp"
#include "jetr/metrics.hpp"
#include "jetr/optimizer.hpp"

namespace jetr {

struct TrainConfig {
  std::size_t batch_size = 16;
  double learning_rate = 0.001;
  std::size_t epochs = 30;
  double lambda_gen = 1.0;
  std::size_t k_candidates = 10;
  std::size_t max_pairs_per_query = 45;
  double epsilon_clamp = 1e-6;
  std::uint64_t seed = 0;
  bool deterministic = true;
  // Missing logits for a retrieved candidate: skip with a warning, or fail.
  bool strict_logits = false;
  // Enhancer hidden widths; input/output width comes from the corpus.
  std::size_t d_h1 = 256;
  std::size_t d_h2 = 512;
  OptConfig optimizer;  // learning_rate above wins over the copy in here
};

void validate(const TrainConfig& cfg);
// Starts from `base` (which carries any environment-derived defaults) and
// overrides with the file's keys.
TrainConfig train_config_from_json_file(const std::filesystem::path& path,
                                        const TrainConfig& base = {});

struct StepRecord {
  std::size_t step = 0;
  double rank_loss = 0.0;
  double gen_loss_mean = 0.0;
  double total_loss = 0.0;
  std::size_t contributing_pairs = 0;
};

using TrainHistory = std::vector<StepRecord>;

// CSV with header "step,rank_loss,gen_loss,total_loss,pairs"; shortest
// round-trip float formatting, stable across runs.
void write_history_csv(const TrainHistory& history,
                       const std::filesystem::path& path);

struct Checkpoint {
  EnhancerParams params;
  OptState opt_state;
  TrainConfig config;
  std::uint64_t step = 0;
  std::uint64_t corpus_fingerprint = 0;
};

// Binary .jetr-ckpt format; save(load(x)) is byte-identical.
void save_checkpoint(const Checkpoint& ckpt,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Raw-cosine top-k candidates (both modalities) for one query, expanded
// into ranked-lexicographic document pairs carrying the current enhanced
// scores and the frozen generator losses. Pairs whose generator losses tie
// are dropped.
std::vector<PairSample> sample_pairs(const QueryRecord& query,
                                     const Corpus& corpus,
                                     const EnhancerParams& params,
                                     const TrainConfig& cfg,
                                     std::vector<std::string>* warnings =
                                         nullptr);

// Loss and enhancer gradient over one batch of queries, shared by
// train_step and the gradient checks. The gen term is the mean generator
// cross-entropy over all retrieved candidates; it is monitored only and
// contributes no gradient (the logits behind it are frozen).
struct BatchLoss {
  double rank_loss = 0.0;
  double gen_loss_mean = 0.0;
  double total_loss = 0.0;
  std::size_t contributing_pairs = 0;
  EnhancerGrads grads;
};

BatchLoss batch_loss_and_grad(std::span<const std::string> query_ids,
                              const Corpus& corpus,
                              const EnhancerParams& params,
                              const TrainConfig& cfg,
                              std::vector<std::string>* warnings = nullptr);

// One optimizer step over a batch. Only the enhancer parameters move.
StepRecord train_step(std::span<const std::string> query_ids,
                      const Corpus& corpus, EnhancerParams& params,
                      OptState& opt_state, const TrainConfig& cfg,
                      std::size_t step_index);

struct TrainResult {
  Checkpoint checkpoint;
  TrainHistory history;
};

// Full training run: seeded per-epoch shuffles of the train split,
// fixed-size batches, one checkpoint at the end. `resume` continues a
// previous run from its epoch boundary and must match the config and
// corpus. `on_epoch_end` (when set) observes the checkpoint after every
// epoch.
TrainResult train(const Corpus& corpus, const TrainConfig& cfg,
                  const Checkpoint* resume = nullptr,
                  const std::function<void(const Checkpoint&)>& on_epoch_end =
                      {});

struct PerQueryMetrics {
  std::string query_id;
  MetricsReport raw;
  std::optional<MetricsReport> enhanced;
};

struct EvalResult {
  MetricsReport raw;
  std::optional<MetricsReport> enhanced;
  std::vector<PerQueryMetrics> per_query;
  std::size_t unevaluable = 0;  // queries with no same-lesson text docs
};

// Ranks the text documents for every evaluable query of the split under
// the raw scorer and, when params are given, the enhanced scorer; computes
// all metrics at cutoff k and aggregates.
EvalResult evaluate(const Corpus& corpus, const std::string& split_name,
                    const EnhancerParams* params, std::size_t k);

struct TTestResult {
  double mean_diff = 0.0;
  double t_statistic = 0.0;
  double p_value = 1.0;  // two-sided
  std::size_t n = 0;
};

// Paired t-test over per-query metric arrays.
TTestResult paired_significance(std::span<const double> a,
                                std::span<const double> b);

// "*" for p < 0.05, "†" for p < 0.1, "" otherwise.
std::string significance_annotation(double p_value);

}  // namespace jetr
