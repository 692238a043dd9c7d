#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "drift/corpus.hpp"
#include "drift/datagen.hpp"
#include "drift/encoder.hpp"
#include "drift/eval.hpp"
#include "drift/losses.hpp"

namespace drift {

enum class LossMode { contrastive_only, combined };

std::string_view to_string(LossMode mode);
LossMode parse_loss_mode(std::string_view name);

struct TrainConfig {
  double learning_rate = 2e-4;
  std::size_t batch_size = 256;
  std::size_t max_epochs = 30;
  double dev_fraction = 0.1;
  std::uint64_t seed = 0;
  LossMode loss_mode = LossMode::combined;
  LossConfig loss;
};

struct Checkpoint {
  std::size_t epoch = 0;
  EncoderParams params;
  double dev_loss = 0.0;
};

struct EpochStats {
  std::size_t epoch = 0;  // 0 = the untouched initial parameters
  double train_loss = 0.0;
  double dev_loss = 0.0;
};

struct TrainResult {
  Checkpoint best;  // lowest dev loss, earliest epoch on ties
  std::vector<EpochStats> trace;
};

struct SplitResult {
  std::vector<TrainingExample> train;
  std::vector<TrainingExample> dev;
};

// Seeded-shuffle split; |dev| = round(dev_fraction * N), at least 1 and at
// most N - 1. Throws InsufficientDataError for fewer than 2 examples.
SplitResult split_train_dev(std::span<const TrainingExample> examples, double dev_fraction,
                            std::uint64_t seed);

// Adam loop over shuffled batches; per-epoch dev loss drives checkpoint
// selection. Single-threaded with fixed reduction order, so a fixed
// (config, data, seed) triple reproduces the checkpoint bitwise. Throws
// NonFiniteLossError naming the offending batch.
TrainResult train(const TrainConfig& config, std::span<const TrainingExample> examples,
                  const Corpus& corpus, const EncoderConfig& encoder_config,
                  EncoderParams initial);

struct EvalQuery {
  std::string query_id;
  std::string text;
};

struct EvalOutcome {
  Run run;
  MetricReport ndcg;
  MetricReport recall;
};

// Indexes the corpus under the given parameters, retrieves for every eval
// query, and scores the run against the qrels.
EvalOutcome evaluate_params(const EncoderParams& params, const EncoderConfig& encoder_config,
                            const Corpus& corpus, std::span<const EvalQuery> queries,
                            const Qrels& qrels, std::size_t ndcg_k = 10,
                            std::size_t recall_k = 100);

struct SweepInputs {
  std::span<const TrainingExample> examples;
  const Corpus* corpus = nullptr;
  EncoderConfig encoder_config;
  const EncoderParams* initial = nullptr;
  std::span<const EvalQuery> eval_queries;
  const Qrels* qrels = nullptr;
};

struct SweepRow {
  double threshold = 0.0;
  double dev_loss = 0.0;
  double ndcg10 = 0.0;
  double recall100 = 0.0;
  std::string error;  // nonempty when this cell failed; metrics then unset
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<std::string> warnings;
};

// Re-derives the false-negative masks at each threshold, retrains from the
// same initial parameters, and evaluates. Cell failures are recorded and the
// sweep continues. Duplicate thresholds are dropped with a warning.
SweepResult threshold_sweep(const TrainConfig& config, const SweepInputs& inputs,
                            std::span<const double> thresholds);

std::string format_trace(std::span<const EpochStats> trace);
void save_trace(std::span<const EpochStats> trace, const std::filesystem::path& path);

std::string format_sweep(const SweepResult& sweep);
void save_sweep(const SweepResult& sweep, const std::filesystem::path& path);

}  // namespace drift
