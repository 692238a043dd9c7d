#include "drift/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "drift/errors.hpp"
#include "drift/io.hpp"
#include "drift/retrieval.hpp"
#include "drift/rng.hpp"

namespace drift {

std::string_view to_string(LossMode mode) {
  switch (mode) {
    case LossMode::contrastive_only: return "contrastive_only";
    case LossMode::combined: return "combined";
  }
  return "combined";
}

LossMode parse_loss_mode(std::string_view name) {
  if (name == "contrastive_only") return LossMode::contrastive_only;
  if (name == "combined") return LossMode::combined;
  throw ParseError("unknown loss mode '" + std::string(name) + "'");
}

SplitResult split_train_dev(std::span<const TrainingExample> examples, double dev_fraction,
                            std::uint64_t seed) {
  if (!(dev_fraction > 0.0 && dev_fraction < 1.0)) {
    throw std::invalid_argument("dev_fraction must lie strictly between 0 and 1");
  }
  const std::size_t n = examples.size();
  if (n < 2) {
    throw InsufficientDataError("split_train_dev needs at least 2 examples, have " +
                                std::to_string(n));
  }
  std::size_t dev_count = static_cast<std::size_t>(
      std::llround(dev_fraction * static_cast<double>(n)));
  dev_count = std::clamp<std::size_t>(dev_count, 1, n - 1);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);

  SplitResult split;
  split.dev.reserve(dev_count);
  split.train.reserve(n - dev_count);
  for (std::size_t i = 0; i < n; ++i) {
    if (i < dev_count) {
      split.dev.push_back(examples[order[i]]);
    } else {
      split.train.push_back(examples[order[i]]);
    }
  }
  return split;
}

namespace {

struct Prepared {
  std::vector<SparseFeatures> query_features;            // per example
  std::vector<std::size_t> positive_slot;                // per example
  std::vector<std::vector<std::size_t>> negative_slots;  // per example
  std::vector<SparseFeatures> passage_features;          // per slot
};

Prepared prepare(std::span<const TrainingExample> examples, const Corpus& corpus,
                 const EncoderConfig& config) {
  std::map<std::string, std::size_t> passage_index;
  for (std::size_t i = 0; i < corpus.passages.size(); ++i) {
    passage_index[corpus.passages[i].id] = i;
  }
  Prepared prep;
  std::map<std::string, std::size_t> slot_of;
  auto slot_for = [&](const std::string& id) {
    const auto [it, inserted] = slot_of.try_emplace(id, prep.passage_features.size());
    if (inserted) {
      const auto pit = passage_index.find(id);
      if (pit == passage_index.end()) {
        throw std::invalid_argument("training example references unknown passage " + id);
      }
      prep.passage_features.push_back(
          featurize(corpus.passages[pit->second].normalized_text, config));
    }
    return it->second;
  };
  for (const TrainingExample& ex : examples) {
    prep.query_features.push_back(featurize(normalize_text(ex.query.text), config));
    prep.positive_slot.push_back(slot_for(ex.positive_id));
    std::vector<std::size_t> negs;
    negs.reserve(ex.negatives.size());
    for (const std::string& id : ex.negatives) negs.push_back(slot_for(id));
    prep.negative_slots.push_back(std::move(negs));
  }
  return prep;
}

// Mean-per-query loss for one batch; dense parameter gradients are
// accumulated into grad_buffer when given (assumed zeroed by the caller).
double batch_loss_and_grad(const TrainConfig& config, std::span<const TrainingExample> examples,
                           const Prepared& prep, const EncoderParams& params,
                           std::span<const std::size_t> batch, std::vector<double>* grad_buffer) {
  const std::size_t n = batch.size();

  // Batch-local slots in first-touch order keep every run identical.
  std::vector<std::size_t> locals;
  std::map<std::size_t, std::size_t> local_of;
  auto local_for = [&](std::size_t slot) {
    const auto [it, inserted] = local_of.try_emplace(slot, locals.size());
    if (inserted) locals.push_back(slot);
    return it->second;
  };

  std::vector<std::size_t> col_local;
  std::vector<std::size_t> neg_col_start(n);
  for (std::size_t i = 0; i < n; ++i) col_local.push_back(local_for(prep.positive_slot[batch[i]]));
  for (std::size_t i = 0; i < n; ++i) {
    neg_col_start[i] = col_local.size();
    for (const std::size_t slot : prep.negative_slots[batch[i]]) {
      col_local.push_back(local_for(slot));
    }
  }
  const std::size_t cols = col_local.size();

  std::vector<Embedding> query_emb(n);
  for (std::size_t i = 0; i < n; ++i) {
    query_emb[i] = encode(params, prep.query_features[batch[i]]);
  }
  std::vector<Embedding> slot_emb(locals.size());
  for (std::size_t l = 0; l < locals.size(); ++l) {
    slot_emb[l] = encode(params, prep.passage_features[locals[l]]);
  }

  BatchSimilarities sims;
  sims.resize(n, cols);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < cols; ++c) {
      sims.sim(i, c) = cosine(query_emb[i], slot_emb[col_local[c]]);
    }
  }
  // Masked hard negatives are also excluded as in-batch negatives for their
  // query, wherever the same passage shows up in the columns.
  std::vector<char> flagged(locals.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const TrainingExample& ex = examples[batch[i]];
    std::vector<std::size_t> touched;
    for (std::size_t j = 0; j < ex.negatives.size(); ++j) {
      if (!ex.mask[j]) continue;
      const std::size_t l = local_of.at(prep.negative_slots[batch[i]][j]);
      if (!flagged[l]) {
        flagged[l] = 1;
        touched.push_back(l);
      }
    }
    if (!touched.empty()) {
      for (std::size_t c = 0; c < cols; ++c) {
        if (c == i) continue;
        if (flagged[col_local[c]]) sims.mask_at(i, c) = 1;
      }
    }
    for (const std::size_t l : touched) flagged[l] = 0;
  }

  const BatchLoss contrastive = infonce(sims, config.loss.tau_contrastive);

  double loss = 0.0;
  std::vector<double> grad(n * cols, 0.0);
  if (config.loss_mode == LossMode::contrastive_only) {
    loss = contrastive.loss;
    grad = contrastive.grad;
  } else {
    const double inv_n = 1.0 / static_cast<double>(n);
    double distill = 0.0;
    std::vector<double> student;
    for (std::size_t i = 0; i < n; ++i) {
      const TrainingExample& ex = examples[batch[i]];
      const std::size_t k = ex.negatives.size();
      student.assign(1 + k, 0.0);
      student[0] = sims.sim(i, i);
      for (std::size_t j = 0; j < k; ++j) student[1 + j] = sims.sim(i, neg_col_start[i] + j);
      const BatchLoss kl =
          listwise_kl(student, ex.scores, config.loss.tau_student, config.loss.tau_teacher);
      distill += kl.loss * inv_n;
      grad[i * cols + i] += kl.grad[0] * inv_n;
      for (std::size_t j = 0; j < k; ++j) {
        grad[i * cols + neg_col_start[i] + j] += kl.grad[1 + j] * inv_n;
      }
    }
    loss = combined(distill, contrastive.loss, config.loss.contrastive_weight);
    for (std::size_t i = 0; i < grad.size(); ++i) {
      grad[i] += config.loss.contrastive_weight * contrastive.grad[i];
    }
  }

  if (grad_buffer != nullptr) {
    const std::uint32_t d = params.embed_dim;
    std::vector<std::vector<double>> grad_q(n, std::vector<double>(d, 0.0));
    std::vector<std::vector<double>> grad_slot(locals.size(), std::vector<double>(d, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < cols; ++c) {
        const double g = grad[i * cols + c];
        if (g == 0.0) continue;
        const std::size_t l = col_local[c];
        const double* pe = slot_emb[l].v.data();
        const double* qe = query_emb[i].v.data();
        double* gq = grad_q[i].data();
        double* gp = grad_slot[l].data();
        for (std::uint32_t j = 0; j < d; ++j) {
          gq[j] += g * pe[j];
          gp[j] += g * qe[j];
        }
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      encode_backward_accumulate(params, prep.query_features[batch[i]], grad_q[i], *grad_buffer);
    }
    for (std::size_t l = 0; l < locals.size(); ++l) {
      encode_backward_accumulate(params, prep.passage_features[locals[l]], grad_slot[l],
                                 *grad_buffer);
    }
  }
  return loss;
}

double epoch_mean_loss(const TrainConfig& config, std::span<const TrainingExample> examples,
                       const Prepared& prep, const EncoderParams& params) {
  const std::size_t n = examples.size();
  if (n == 0) return 0.0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  double total = 0.0;
  for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
    const std::size_t end = std::min(n, begin + config.batch_size);
    const std::span<const std::size_t> batch(order.data() + begin, end - begin);
    total += batch_loss_and_grad(config, examples, prep, params, batch, nullptr) *
             static_cast<double>(batch.size());
  }
  return total / static_cast<double>(n);
}

}  // namespace

TrainResult train(const TrainConfig& config, std::span<const TrainingExample> examples,
                  const Corpus& corpus, const EncoderConfig& encoder_config,
                  EncoderParams initial) {
  if (config.batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
  const SplitResult split =
      split_train_dev(examples, config.dev_fraction, derive_seed(config.seed, "split"));
  const Prepared train_prep = prepare(split.train, corpus, encoder_config);
  const Prepared dev_prep = prepare(split.dev, corpus, encoder_config);

  EncoderParams params = std::move(initial);
  TrainResult result;
  {
    const double tl = epoch_mean_loss(config, split.train, train_prep, params);
    const double dl = epoch_mean_loss(config, split.dev, dev_prep, params);
    result.trace.push_back({0, tl, dl});
    result.best = {0, params, dl};
  }

  const std::size_t n_train = split.train.size();
  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(derive_seed(config.seed, "shuffle"));

  std::vector<double> grad(params.projection.size(), 0.0);
  std::vector<double> m(params.projection.size(), 0.0);
  std::vector<double> v(params.projection.size(), 0.0);
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  double beta1_pow = 1.0;
  double beta2_pow = 1.0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double train_total = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < n_train; begin += config.batch_size, ++batch_index) {
      const std::size_t end = std::min(n_train, begin + config.batch_size);
      const std::span<const std::size_t> batch(order.data() + begin, end - begin);
      std::fill(grad.begin(), grad.end(), 0.0);
      const double loss =
          batch_loss_and_grad(config, split.train, train_prep, params, batch, &grad);
      if (!std::isfinite(loss)) {
        throw NonFiniteLossError("epoch " + std::to_string(epoch) + " batch " +
                                 std::to_string(batch_index));
      }
      train_total += loss * static_cast<double>(batch.size());

      beta1_pow *= kBeta1;
      beta2_pow *= kBeta2;
      const double bc1 = 1.0 - beta1_pow;
      const double bc2 = 1.0 - beta2_pow;
      for (std::size_t i = 0; i < params.projection.size(); ++i) {
        const double g = grad[i];
        m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g;
        v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g * g;
        params.projection[i] -=
            config.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + kEps);
      }
    }
    const double train_loss = train_total / static_cast<double>(n_train);
    const double dev_loss = epoch_mean_loss(config, split.dev, dev_prep, params);
    result.trace.push_back({epoch, train_loss, dev_loss});
    if (dev_loss < result.best.dev_loss) {
      result.best = {epoch, params, dev_loss};
    }
  }
  return result;
}

EvalOutcome evaluate_params(const EncoderParams& params, const EncoderConfig& encoder_config,
                            const Corpus& corpus, std::span<const EvalQuery> queries,
                            const Qrels& qrels, std::size_t ndcg_k, std::size_t recall_k) {
  const IndexBuildResult built = build_index(corpus, params, encoder_config);
  const std::size_t depth = std::max(ndcg_k, recall_k);
  EvalOutcome outcome;
  for (const EvalQuery& q : queries) {
    RankedList ranked;
    ranked.query_id = q.query_id;
    try {
      const Embedding e = encode(params, featurize(normalize_text(q.text), encoder_config));
      ranked = top_k(built.index, e, depth, q.query_id);
    } catch (const EmptyTextError&) {
    } catch (const DegenerateEmbeddingError&) {
    }
    outcome.run[q.query_id] = std::move(ranked);
  }
  outcome.ndcg = ndcg_at_k(outcome.run, qrels, ndcg_k);
  outcome.recall = recall_at_k(outcome.run, qrels, recall_k);
  return outcome;
}

SweepResult threshold_sweep(const TrainConfig& config, const SweepInputs& inputs,
                            std::span<const double> thresholds) {
  if (inputs.corpus == nullptr || inputs.initial == nullptr || inputs.qrels == nullptr) {
    throw std::invalid_argument("threshold_sweep needs corpus, initial params, and qrels");
  }
  for (const double t : thresholds) {
    if (!(t >= 0.0 && t <= 1.0)) {
      throw std::invalid_argument("sweep thresholds must lie in [0, 1]");
    }
  }

  SweepResult result;
  std::vector<double> kept;
  for (const double t : thresholds) {
    if (std::find(kept.begin(), kept.end(), t) != kept.end()) {
      std::ostringstream warning;
      warning << "duplicate threshold " << t << " dropped";
      result.warnings.push_back(warning.str());
      continue;
    }
    kept.push_back(t);
  }

  for (const double threshold : kept) {
    SweepRow row;
    row.threshold = threshold;
    try {
      std::vector<TrainingExample> masked(inputs.examples.begin(), inputs.examples.end());
      for (TrainingExample& ex : masked) {
        for (std::size_t j = 0; j < ex.negatives.size(); ++j) {
          ex.mask[j] = ex.scores[1 + j] > threshold * ex.scores[0];
        }
      }
      TrainConfig cell_config = config;
      cell_config.loss.mask_threshold = threshold;
      const TrainResult trained =
          train(cell_config, masked, *inputs.corpus, inputs.encoder_config, *inputs.initial);
      row.dev_loss = trained.best.dev_loss;
      const EvalOutcome outcome =
          evaluate_params(trained.best.params, inputs.encoder_config, *inputs.corpus,
                          inputs.eval_queries, *inputs.qrels);
      row.ndcg10 = outcome.ndcg.mean;
      row.recall100 = outcome.recall.mean;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    result.rows.push_back(std::move(row));
  }
  return result;
}

std::string format_trace(std::span<const EpochStats> trace) {
  std::ostringstream out;
  char buf[96];
  out << "epoch  train_loss    dev_loss\n";
  for (const EpochStats& row : trace) {
    std::snprintf(buf, sizeof(buf), "%5zu  %10.6f  %10.6f\n", row.epoch, row.train_loss,
                  row.dev_loss);
    out << buf;
  }
  return out.str();
}

void save_trace(std::span<const EpochStats> trace, const std::filesystem::path& path) {
  atomic_write_file(path, format_trace(trace));
}

std::string format_sweep(const SweepResult& sweep) {
  std::ostringstream out;
  for (const std::string& w : sweep.warnings) out << "# " << w << "\n";
  out << "threshold    dev_loss     ndcg@10  recall@100\n";
  char buf[160];
  for (const SweepRow& row : sweep.rows) {
    if (row.error.empty()) {
      std::snprintf(buf, sizeof(buf), "%9.2f  %10.6f  %10.6f  %10.6f\n", row.threshold,
                    row.dev_loss, row.ndcg10, row.recall100);
      out << buf;
    } else {
      std::snprintf(buf, sizeof(buf), "%9.2f  failed: %s\n", row.threshold, row.error.c_str());
      out << buf;
    }
  }
  return out.str();
}

void save_sweep(const SweepResult& sweep, const std::filesystem::path& path) {
  atomic_write_file(path, format_sweep(sweep));
}

}  // namespace drift
