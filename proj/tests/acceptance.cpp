// Release gate: nine end-to-end checks, one summary line each. Exits nonzero
// if any check fails. Run through ctest or directly from the build tree.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "drift/corpus.hpp"
#include "drift/datagen.hpp"
#include "drift/encoder.hpp"
#include "drift/eval.hpp"
#include "drift/losses.hpp"
#include "drift/retrieval.hpp"
#include "drift/rng.hpp"
#include "drift/teacher.hpp"

namespace fs = std::filesystem;
using namespace drift;

namespace {

constexpr double kLossGradRelTol = 1e-5;
constexpr double kChainGradRelTol = 1e-4;
constexpr double kIdentityTol = 1e-12;
constexpr double kMetricOracleTol = 1e-9;
constexpr double kHandValueTol = 1e-5;
constexpr double kStatTol = 1e-3;
constexpr double kAnchorTol = 1e-6;
constexpr double kGradSuiteBudgetSec = 30.0;
constexpr double kDedupBudgetSec = 60.0;
constexpr double kDemoBudgetSec = 300.0;

// First-build reference metrics for the seed-42 demo pipeline.
constexpr double kAnchorCombinedNdcg = 0.923442878504941;
constexpr double kAnchorCombinedRecall = 0.3416032987942579;
constexpr double kAnchorContrastiveNdcg = 0.8665263602394554;
constexpr double kAnchorContrastiveRecall = 0.27885291830350706;
constexpr double kAnchorUntrainedNdcg = 0.7254291468088927;
constexpr double kAnchorUntrainedRecall = 0.20847931892933366;

struct Check {
  std::vector<std::string> failures;

  void require(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  template <typename T>
  std::string str(const T& v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
  }
};

double elapsed_sec(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::string random_word(Rng& rng) {
  const std::size_t len = 1 + rng.uniform_index(8);
  std::string w;
  for (std::size_t i = 0; i < len; ++i) {
    w.push_back(static_cast<char>('a' + rng.uniform_index(26)));
  }
  return w;
}

std::vector<std::string> random_words(Rng& rng, std::size_t n) {
  std::vector<std::string> words;
  words.reserve(n);
  for (std::size_t i = 0; i < n; ++i) words.push_back(random_word(rng));
  return words;
}

std::string join_words(const std::vector<std::string>& words, std::size_t begin, std::size_t end) {
  std::string s;
  for (std::size_t i = begin; i < end; ++i) {
    if (i > begin) s.push_back(' ');
    s += words[i];
  }
  return s;
}

bool rel_close(double analytic, double numeric, double tol) {
  const double denom = std::max({1e-3, std::fabs(analytic), std::fabs(numeric)});
  return std::fabs(analytic - numeric) <= tol * denom;
}

// ---- criterion 1: gradients -----------------------------------------------

BatchSimilarities random_batch(Rng& rng, std::size_t n, std::size_t k) {
  BatchSimilarities b;
  b.resize(n, n + n * k);
  for (double& s : b.sims) s = rng.uniform(-1.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < b.cols; ++c) {
      if (c != i && rng.uniform() < 0.2) b.mask_at(i, c) = 1;
    }
  }
  return b;
}

void check_infonce_grad(Check& check, Rng& rng) {
  const std::size_t n = 1 + rng.uniform_index(4);
  const std::size_t k = 1 + rng.uniform_index(5);
  BatchSimilarities b = random_batch(rng, n, k);
  const double tau = rng.uniform(0.05, 1.0);
  const BatchLoss out = infonce(b, tau);
  const double h = 1e-6;
  for (std::size_t idx = 0; idx < b.sims.size(); ++idx) {
    const double keep = b.sims[idx];
    b.sims[idx] = keep + h;
    const double up = infonce(b, tau).loss;
    b.sims[idx] = keep - h;
    const double down = infonce(b, tau).loss;
    b.sims[idx] = keep;
    const double numeric = (up - down) / (2.0 * h);
    if (!rel_close(out.grad[idx], numeric, kLossGradRelTol)) {
      check.require(false, "contrastive grad mismatch at entry " + check.str(idx) + ": analytic " +
                               check.str(out.grad[idx]) + " numeric " + check.str(numeric));
      return;
    }
  }
}

void check_kl_grad(Check& check, Rng& rng) {
  const std::size_t k = 1 + rng.uniform_index(5);
  std::vector<double> student(1 + k), teacher(1 + k);
  for (double& s : student) s = rng.uniform(-1.0, 1.0);
  for (double& t : teacher) t = rng.uniform(0.0, 1.0);
  const double tau_s = 0.05, tau_t = 0.3;
  const BatchLoss out = listwise_kl(student, teacher, tau_s, tau_t);
  const double h = 1e-6;
  for (std::size_t idx = 0; idx < student.size(); ++idx) {
    const double keep = student[idx];
    student[idx] = keep + h;
    const double up = listwise_kl(student, teacher, tau_s, tau_t).loss;
    student[idx] = keep - h;
    const double down = listwise_kl(student, teacher, tau_s, tau_t).loss;
    student[idx] = keep;
    const double numeric = (up - down) / (2.0 * h);
    if (!rel_close(out.grad[idx], numeric, kLossGradRelTol)) {
      check.require(false, "distillation grad mismatch at entry " + check.str(idx));
      return;
    }
  }
}

// Blended loss over encoded embeddings, differentiated end to end through the
// encoder's normalization Jacobian.
struct ChainInstance {
  EncoderConfig config;
  EncoderParams params;
  std::size_t n = 0, k = 0;
  std::vector<SparseFeatures> queries;
  std::vector<SparseFeatures> passages;  // n positives then n*k negatives
  std::vector<std::vector<double>> teacher;
  std::vector<std::uint8_t> mask;
};

ChainInstance make_chain_instance(Rng& rng) {
  ChainInstance ci;
  ci.config = EncoderConfig{32, static_cast<std::uint32_t>(3 + rng.uniform_index(6)),
                            rng.next_u64()};
  ci.params = init_params(ci.config, rng.next_u64());
  ci.n = 2 + rng.uniform_index(3);
  ci.k = 1 + rng.uniform_index(5);
  auto sentence = [&]() {
    std::string s;
    const std::size_t words = 3 + rng.uniform_index(6);
    for (std::size_t i = 0; i < words; ++i) {
      if (i) s.push_back(' ');
      s += random_word(rng);
    }
    return s;
  };
  for (std::size_t i = 0; i < ci.n; ++i) ci.queries.push_back(featurize(sentence(), ci.config));
  for (std::size_t i = 0; i < ci.n * (1 + ci.k); ++i) {
    ci.passages.push_back(featurize(sentence(), ci.config));
  }
  for (std::size_t i = 0; i < ci.n; ++i) {
    std::vector<double> t(1 + ci.k);
    for (double& v : t) v = rng.uniform(0.0, 1.0);
    ci.teacher.push_back(std::move(t));
  }
  const std::size_t cols = ci.n + ci.n * ci.k;
  ci.mask.assign(ci.n * cols, 0);
  for (std::size_t i = 0; i < ci.n; ++i) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (c != i && rng.uniform() < 0.15) ci.mask[i * cols + c] = 1;
    }
  }
  return ci;
}

double chain_loss(const ChainInstance& ci, const EncoderParams& params,
                  std::vector<double>* grad_buffer) {
  const std::size_t cols = ci.n + ci.n * ci.k;
  std::vector<Embedding> qe(ci.n), pe(cols);
  for (std::size_t i = 0; i < ci.n; ++i) qe[i] = encode(params, ci.queries[i]);
  for (std::size_t c = 0; c < cols; ++c) pe[c] = encode(params, ci.passages[c]);

  BatchSimilarities sims;
  sims.resize(ci.n, cols);
  sims.mask = ci.mask;
  for (std::size_t i = 0; i < ci.n; ++i) {
    for (std::size_t c = 0; c < cols; ++c) sims.sim(i, c) = cosine(qe[i], pe[c]);
  }
  const BatchLoss contrastive = infonce(sims, 0.05);

  const double inv_n = 1.0 / static_cast<double>(ci.n);
  const double weight = 0.1;
  double distill = 0.0;
  std::vector<double> grad(ci.n * cols, 0.0);
  std::vector<double> student(1 + ci.k);
  for (std::size_t i = 0; i < ci.n; ++i) {
    student[0] = sims.sim(i, i);
    for (std::size_t j = 0; j < ci.k; ++j) student[1 + j] = sims.sim(i, ci.n + i * ci.k + j);
    const BatchLoss kl = listwise_kl(student, ci.teacher[i], 0.05, 0.3);
    distill += kl.loss * inv_n;
    grad[i * cols + i] += kl.grad[0] * inv_n;
    for (std::size_t j = 0; j < ci.k; ++j) {
      grad[i * cols + ci.n + i * ci.k + j] += kl.grad[1 + j] * inv_n;
    }
  }
  const double loss = combined(distill, contrastive.loss, weight);
  if (grad_buffer != nullptr) {
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += weight * contrastive.grad[i];
    const std::uint32_t d = params.embed_dim;
    std::vector<std::vector<double>> gq(ci.n, std::vector<double>(d, 0.0));
    std::vector<std::vector<double>> gp(cols, std::vector<double>(d, 0.0));
    for (std::size_t i = 0; i < ci.n; ++i) {
      for (std::size_t c = 0; c < cols; ++c) {
        const double g = grad[i * cols + c];
        if (g == 0.0) continue;
        for (std::uint32_t j = 0; j < d; ++j) {
          gq[i][j] += g * pe[c].v[j];
          gp[c][j] += g * qe[i].v[j];
        }
      }
    }
    for (std::size_t i = 0; i < ci.n; ++i) {
      encode_backward_accumulate(params, ci.queries[i], gq[i], *grad_buffer);
    }
    for (std::size_t c = 0; c < cols; ++c) {
      encode_backward_accumulate(params, ci.passages[c], gp[c], *grad_buffer);
    }
  }
  return loss;
}

void check_chain_grad(Check& check, Rng& rng) {
  const ChainInstance ci = make_chain_instance(rng);
  EncoderParams params = ci.params;
  std::vector<double> analytic(params.projection.size(), 0.0);
  chain_loss(ci, params, &analytic);
  const double h = 1e-5;
  for (int probe = 0; probe < 20; ++probe) {
    const std::size_t idx = rng.uniform_index(params.projection.size());
    const double keep = params.projection[idx];
    params.projection[idx] = keep + h;
    const double up = chain_loss(ci, params, nullptr);
    params.projection[idx] = keep - h;
    const double down = chain_loss(ci, params, nullptr);
    params.projection[idx] = keep;
    const double numeric = (up - down) / (2.0 * h);
    if (!rel_close(analytic[idx], numeric, kChainGradRelTol)) {
      check.require(false, "encoder chain grad mismatch at parameter " + check.str(idx) +
                               ": analytic " + check.str(analytic[idx]) + " numeric " +
                               check.str(numeric));
      return;
    }
  }
}

std::string criterion_gradients(Check& check) {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(20240806);
  for (int i = 0; i < 40 && check.failures.empty(); ++i) check_infonce_grad(check, rng);
  for (int i = 0; i < 40 && check.failures.empty(); ++i) check_kl_grad(check, rng);
  for (int i = 0; i < 30 && check.failures.empty(); ++i) check_chain_grad(check, rng);
  const double sec = elapsed_sec(start);
  check.require(sec < kGradSuiteBudgetSec,
                "gradient suite took " + check.str(sec) + "s, budget " +
                    check.str(kGradSuiteBudgetSec) + "s");
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1fs", sec);
  return std::string("110 instances, ") + buf;
}

// ---- criterion 2: loss identities -----------------------------------------

std::string criterion_identities(Check& check) {
  const double ln2 = 0.6931471805599453;

  BatchSimilarities lone;
  lone.resize(1, 1);
  lone.sim(0, 0) = 0.37;
  check.require(infonce(lone, 0.01).loss == 0.0, "single-candidate contrastive loss not exactly 0");

  BatchSimilarities pair;
  pair.resize(1, 2);
  pair.sim(0, 0) = 0.4;
  pair.sim(0, 1) = 0.4;
  check.require(std::fabs(infonce(pair, 0.01).loss - ln2) <= kIdentityTol,
                "equal-logit two-candidate contrastive loss is not ln 2");

  Rng rng(77);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t k = 1 + rng.uniform_index(5);
    std::vector<double> student(1 + k), teacher(1 + k);
    for (double& s : student) s = rng.uniform(-1.0, 1.0);
    for (double& t : teacher) t = rng.uniform(0.0, 1.0);
    const double loss = listwise_kl(student, teacher, 0.05, 0.3).loss;
    if (loss < -kIdentityTol) {
      check.require(false, "distillation loss went negative: " + check.str(loss));
      break;
    }
  }

  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 1 + rng.uniform_index(5);
    std::vector<double> student(1 + k);
    for (double& s : student) s = rng.uniform(-1.0, 1.0);
    const double shift = rng.uniform(-2.0, 2.0);

    std::vector<double> shifted = student;
    for (double& s : shifted) s += shift;
    const double same_temp = listwise_kl(student, shifted, 0.05, 0.05).loss;
    if (std::fabs(same_temp) > kIdentityTol) {
      check.require(false, "shifted equal-temperature distillation loss not 0: " +
                               check.str(same_temp));
      break;
    }

    std::vector<double> rescaled(student.size());
    for (std::size_t i = 0; i < student.size(); ++i) {
      rescaled[i] = student[i] * (0.3 / 0.05) + shift;
    }
    const double cross_temp = listwise_kl(student, rescaled, 0.05, 0.3).loss;
    if (std::fabs(cross_temp) > kIdentityTol) {
      check.require(false, "distribution-matched distillation loss not 0: " +
                               check.str(cross_temp));
      break;
    }
  }
  return "";
}

// ---- criterion 3: metric oracles ------------------------------------------

double oracle_ndcg(const RankedList& list, const std::map<std::string, int>& judged,
                   std::size_t k) {
  double dcg = 0.0;
  const std::size_t depth = std::min(k, list.entries.size());
  for (std::size_t i = 0; i < depth; ++i) {
    const auto it = judged.find(list.entries[i].passage_id);
    const int rel = it == judged.end() ? 0 : it->second;
    dcg += rel / std::log2(static_cast<double>(i) + 2.0);
  }
  std::vector<int> grades;
  for (const auto& [id, g] : judged) grades.push_back(g);
  std::sort(grades.rbegin(), grades.rend());
  double idcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, grades.size()); ++i) {
    idcg += grades[i] / std::log2(static_cast<double>(i) + 2.0);
  }
  return idcg == 0.0 ? 0.0 : dcg / idcg;
}

double oracle_recall(const RankedList& list, const std::map<std::string, int>& judged,
                     std::size_t k) {
  std::size_t relevant = 0;
  for (const auto& [id, g] : judged) relevant += g >= 1;
  if (relevant == 0) return 0.0;
  std::size_t found = 0;
  for (std::size_t i = 0; i < std::min(k, list.entries.size()); ++i) {
    const auto it = judged.find(list.entries[i].passage_id);
    found += it != judged.end() && it->second >= 1;
  }
  return static_cast<double>(found) / static_cast<double>(relevant);
}

std::string criterion_metrics(Check& check) {
  Rng rng(555);
  for (int trial = 0; trial < 1000 && check.failures.empty(); ++trial) {
    const std::size_t universe = 4 + rng.uniform_index(17);
    std::vector<std::string> docs;
    for (std::size_t d = 0; d < universe; ++d) docs.push_back("d" + std::to_string(d));

    RankedList list;
    list.query_id = "q";
    std::vector<std::string> shuffled = docs;
    rng.shuffle(shuffled);
    const std::size_t run_len = 1 + rng.uniform_index(universe);
    double score = 1.0;
    for (std::size_t i = 0; i < run_len; ++i) {
      list.entries.push_back({shuffled[i], score});
      score -= 0.001;
    }

    std::map<std::string, int> judged;
    for (const std::string& d : docs) {
      if (rng.uniform() < 0.6) judged[d] = static_cast<int>(rng.uniform_index(4));
    }
    judged["extra-unranked"] = static_cast<int>(rng.uniform_index(4));

    Run run;
    run["q"] = list;
    Qrels qrels;
    qrels.by_query["q"] = judged;
    const std::size_t k = 1 + rng.uniform_index(12);

    const double lib_ndcg = ndcg_at_k(run, qrels, k).per_query.at("q");
    const double ref_ndcg = oracle_ndcg(list, judged, k);
    check.require(std::fabs(lib_ndcg - ref_ndcg) <= kMetricOracleTol,
                  "ndcg mismatch on trial " + check.str(trial) + ": " + check.str(lib_ndcg) +
                      " vs oracle " + check.str(ref_ndcg));

    const double lib_recall = recall_at_k(run, qrels, k).per_query.at("q");
    const double ref_recall = oracle_recall(list, judged, k);
    check.require(std::fabs(lib_recall - ref_recall) <= kMetricOracleTol,
                  "recall mismatch on trial " + check.str(trial));
  }

  Run run;
  RankedList list;
  list.query_id = "q1";
  list.entries.push_back({"d1", 0.9});
  list.entries.push_back({"d2", 0.8});
  run["q1"] = list;
  Qrels qrels;
  qrels.by_query["q1"]["d2"] = 1;
  const double hand = ndcg_at_k(run, qrels, 10).mean;
  check.require(std::fabs(hand - 0.63093) <= kHandValueTol,
                "rank-2 hand value off: " + check.str(hand));
  return "";
}

// ---- criterion 4: statistics ----------------------------------------------

std::string criterion_statistics(Check& check) {
  const std::vector<double> a{2.0, 4.0, 6.0};
  const std::vector<double> b{1.0, 2.0, 3.0};
  const double p = paired_t_one_sided(a, b);
  check.require(std::fabs(p - 0.0371) <= kStatTol,
                "paired test p-value off: " + check.str(p) + " vs 0.0371");

  const SignificanceResult both = holm_bonferroni(std::vector<double>{0.01, 0.04}, 0.05);
  check.require(both.rejected == std::vector<bool>{true, true},
                "step-down correction should reject both of (0.01, 0.04)");
  const SignificanceResult none = holm_bonferroni(std::vector<double>{0.03, 0.04}, 0.05);
  check.require(none.rejected == std::vector<bool>{false, false},
                "step-down correction should reject neither of (0.03, 0.04)");
  return "";
}

// ---- criterion 5: mask boundary and filter monotonicity -------------------

std::string criterion_masking(Check& check) {
  GeneratedQuery q;
  q.query_id = "q";
  q.passage_id = "pos";
  q.text = "anything";
  RankedList ranked;
  ranked.query_id = "q";
  ranked.entries.push_back({"pos", 0.99});
  ranked.entries.push_back({"edge", 0.98});
  ranked.entries.push_back({"over", 0.97});
  TeacherScores scores;
  scores.set("q", "pos", 1.0);
  scores.set("q", "edge", 0.60);
  scores.set("q", "over", 0.60 + 1e-9);
  const TrainingExample ex = build_example(q, ranked, scores, 0.6);
  check.require(ex.negatives == std::vector<std::string>{"edge", "over"},
                "boundary example negatives wrong");
  check.require(ex.mask.size() == 2 && ex.mask[0] == false,
                "a score at exactly 60% of the positive must stay unmasked");
  check.require(ex.mask.size() == 2 && ex.mask[1] == true,
                "a score just above 60% of the positive must be masked");

  Rng rng(99191);
  std::vector<GeneratedQuery> queries;
  Run candidates;
  TeacherScores raw;
  for (int i = 0; i < 10000; ++i) {
    const std::string qid = "q" + std::to_string(i);
    GeneratedQuery gen;
    gen.query_id = qid;
    gen.passage_id = "p" + std::to_string(i);
    gen.query_type = QueryType::question;
    gen.text = "text";
    gen.word_count = 1;
    queries.push_back(gen);

    RankedList list;
    list.query_id = qid;
    const std::size_t depth = 5 + rng.uniform_index(20);
    const bool plant = rng.uniform() < 0.7;
    const std::size_t slot = rng.uniform_index(depth);
    double score = 1.0;
    for (std::size_t r = 0; r < depth; ++r) {
      const std::string pid = plant && r == slot ? gen.passage_id
                                                 : "n" + std::to_string(i) + "-" +
                                                       std::to_string(r);
      list.entries.push_back({pid, score});
      score -= 1e-3;
      raw.set(qid, pid, rng.uniform(-2.0, 5.0));
    }
    if (plant && rng.uniform() < 0.5) raw.set(qid, gen.passage_id, 10.0);
    candidates[qid] = std::move(list);
  }

  AssemblyInputs inputs;
  inputs.queries = queries;
  inputs.candidates = &candidates;
  const std::vector<TeacherScores> tables{raw};
  inputs.raw_scores = tables;
  inputs.blend.weights = {1.0};
  const AssemblyResult result = assemble_examples(inputs);
  const TypeCounts& t = result.report.total;
  check.require(t.generated == 10000, "generated count should be 10000");
  check.require(t.generated >= t.passed_stage1, "stage-1 count exceeds generated");
  check.require(t.passed_stage1 >= t.passed_stage2, "stage-2 count exceeds stage 1");
  check.require(result.report.stage2_ties <= t.passed_stage2,
                "tie count exceeds stage-2 survivors");
  check.require(result.examples.size() == t.passed_stage2,
                "example count disagrees with the stage-2 count");
  check.require(t.passed_stage2 > 0 && t.passed_stage1 > t.passed_stage2,
                "filter fixture too degenerate to exercise both stages");
  return "counts " + check.str(t.generated) + " / " + check.str(t.passed_stage1) + " / " +
         check.str(t.passed_stage2);
}

// ---- criterion 6: dedup at scale ------------------------------------------

std::string criterion_dedup(Check& check) {
  Rng rng(4242);
  Corpus corpus;
  std::vector<std::vector<std::string>> base_words;
  const std::size_t n_base = 6500, n_planted = 3500;
  for (std::size_t i = 0; i < n_base; ++i) {
    const std::size_t words = 8 + rng.uniform_index(13);
    base_words.push_back(random_words(rng, words));
    corpus.passages.push_back(
        make_passage("base-" + std::to_string(i), join_words(base_words.back(), 0, words)));
  }
  for (std::size_t i = 0; i < n_planted; ++i) {
    const std::size_t src = rng.uniform_index(n_base);
    const std::vector<std::string>& words = base_words[src];
    const std::size_t len = 2 + rng.uniform_index(words.size() - 2);
    const std::size_t begin = rng.uniform_index(words.size() - len + 1);
    corpus.passages.push_back(
        make_passage("sub-" + std::to_string(i), join_words(words, begin, begin + len)));
  }
  Rng order_rng(7);
  order_rng.shuffle(corpus.passages);

  const auto start = std::chrono::steady_clock::now();
  const DedupResult first = dedup_corpus(corpus);
  const double sec = elapsed_sec(start);
  check.require(sec < kDedupBudgetSec,
                "dedup took " + check.str(sec) + "s, budget " + check.str(kDedupBudgetSec) + "s");

  for (const Passage& p : first.corpus.passages) {
    if (p.id.rfind("sub-", 0) == 0) {
      check.require(false, "planted contained passage survived: " + p.id);
      break;
    }
  }

  const DedupResult second = dedup_corpus(first.corpus);
  check.require(second.removed.empty(), "second pass still removed passages");
  check.require(second.corpus.passages.size() == first.corpus.passages.size(),
                "second pass changed the corpus size");

  Rng sample_rng(12);
  std::vector<std::size_t> picks;
  for (int i = 0; i < 400; ++i) picks.push_back(sample_rng.uniform_index(first.corpus.passages.size()));
  for (const std::size_t a : picks) {
    for (const std::size_t b : picks) {
      if (a == b) continue;
      const std::string& sa = first.corpus.passages[a].normalized_text;
      const std::string& sb = first.corpus.passages[b].normalized_text;
      if (sb.find(sa) != std::string::npos) {
        check.require(false, "kept passage " + first.corpus.passages[a].id +
                                 " is contained in " + first.corpus.passages[b].id);
        return "";
      }
    }
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1fs", sec);
  return "kept " + check.str(first.corpus.passages.size()) + " of 10000, " + buf;
}

// ---- criteria 7-9: pipeline runs ------------------------------------------

int run_tool(const std::string& args, const fs::path& log) {
  const std::string cmd =
      std::string(DRIFT_CLI_PATH) + " " + args + " >" + log.string() + " 2>&1";
  const int raw = std::system(cmd.c_str());
  if (raw == -1 || !WIFEXITED(raw)) return -1;
  return WEXITSTATUS(raw);
}

struct DemoMetrics {
  double ndcg = 0.0;
  double recall = 0.0;
};

std::map<std::string, DemoMetrics> load_demo_metrics(const fs::path& report_path) {
  const nlohmann::json doc = nlohmann::json::parse(slurp(report_path));
  std::map<std::string, DemoMetrics> out;
  for (const auto& [name, entry] : doc.at("metrics").items()) {
    out[name] = {entry.at("ndcg@10").get<double>(), entry.at("recall@100").get<double>()};
  }
  return out;
}

fs::path g_work;
fs::path g_demo_a;

std::string criterion_end_to_end(Check& check) {
  g_demo_a = g_work / "demo-a";
  const auto start = std::chrono::steady_clock::now();
  const int code = run_tool("demo --out " + g_demo_a.string() + " --seed 42",
                            g_work / "demo-a.log");
  const double sec = elapsed_sec(start);
  check.require(code == 0, "demo run exited with code " + check.str(code));
  if (code != 0) return "";
  check.require(sec < kDemoBudgetSec,
                "demo took " + check.str(sec) + "s, budget " + check.str(kDemoBudgetSec) + "s");

  const std::map<std::string, DemoMetrics> m = load_demo_metrics(g_demo_a / "report.json");
  const DemoMetrics untrained = m.at("untrained");
  const DemoMetrics contrastive = m.at("contrastive_only");
  const DemoMetrics comb = m.at("combined");
  check.require(comb.ndcg >= contrastive.ndcg,
                "combined ndcg " + check.str(comb.ndcg) + " below contrastive-only " +
                    check.str(contrastive.ndcg));
  check.require(contrastive.ndcg > untrained.ndcg,
                "contrastive-only ndcg failed to beat the untrained encoder");
  check.require(comb.ndcg > untrained.ndcg, "combined ndcg failed to beat the untrained encoder");

  check.require(std::fabs(comb.ndcg - kAnchorCombinedNdcg) <= kAnchorTol,
                "combined ndcg drifted from the recorded anchor: " + check.str(comb.ndcg));
  check.require(std::fabs(comb.recall - kAnchorCombinedRecall) <= kAnchorTol,
                "combined recall drifted from the recorded anchor");
  check.require(std::fabs(contrastive.ndcg - kAnchorContrastiveNdcg) <= kAnchorTol,
                "contrastive-only ndcg drifted from the recorded anchor");
  check.require(std::fabs(contrastive.recall - kAnchorContrastiveRecall) <= kAnchorTol,
                "contrastive-only recall drifted from the recorded anchor");
  check.require(std::fabs(untrained.ndcg - kAnchorUntrainedNdcg) <= kAnchorTol,
                "untrained ndcg drifted from the recorded anchor");
  check.require(std::fabs(untrained.recall - kAnchorUntrainedRecall) <= kAnchorTol,
                "untrained recall drifted from the recorded anchor");

  char buf[96];
  std::snprintf(buf, sizeof(buf), "ndcg %0.4f / %0.4f / %0.4f, %.1fs", untrained.ndcg,
                contrastive.ndcg, comb.ndcg, sec);
  return buf;
}

std::string criterion_determinism(Check& check) {
  if (g_demo_a.empty() || !fs::exists(g_demo_a / "report.json")) {
    check.require(false, "no first demo run to compare against");
    return "";
  }
  const fs::path demo_b = g_work / "demo-b";
  const int code = run_tool("demo --out " + demo_b.string() + " --seed 42",
                            g_work / "demo-b.log");
  check.require(code == 0, "second demo run exited with code " + check.str(code));
  if (code != 0) return "";

  std::size_t compared = 0;
  for (const fs::directory_entry& entry : fs::recursive_directory_iterator(g_demo_a)) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), g_demo_a);
    const fs::path other = demo_b / rel;
    if (!fs::exists(other)) {
      check.require(false, "second run is missing " + rel.string());
      continue;
    }
    if (slurp(entry.path()) != slurp(other)) {
      check.require(false, "outputs differ at " + rel.string());
    }
    ++compared;
  }
  check.require(compared > 10, "suspiciously few demo outputs: " + check.str(compared));
  return check.str(compared) + " files identical";
}

std::string criterion_sweep(Check& check) {
  if (g_demo_a.empty() || !fs::exists(g_demo_a / "examples.jsonl")) {
    check.require(false, "no demo artifacts to sweep over");
    return "";
  }
  const fs::path out = g_work / "sweep.txt";
  const std::string args = "sweep --examples " + (g_demo_a / "examples.jsonl").string() +
                           " --corpus " + (g_demo_a / "deduped.jsonl").string() +
                           " --eval-queries " + (g_demo_a / "eval_queries.jsonl").string() +
                           " --qrels " + (g_demo_a / "qrels.txt").string() +
                           " --thresholds 0.0,0.2,0.4,0.6,0.8,1.0 --epochs 4 --seed 7 --out " +
                           out.string();
  const int code = run_tool(args, g_work / "sweep.log");
  check.require(code == 0, "sweep exited with code " + check.str(code));
  if (code != 0) return "";

  std::istringstream table(slurp(out));
  std::string line;
  std::vector<std::string> rows;
  bool saw_header = false;
  while (std::getline(table, line)) {
    if (line.empty()) continue;
    if (line.find("threshold") != std::string::npos) {
      saw_header = true;
      continue;
    }
    if (line[0] == '#') continue;
    rows.push_back(line);
  }
  check.require(saw_header, "sweep table has no header");
  check.require(rows.size() == 6, "expected 6 sweep rows, found " + check.str(rows.size()));
  const std::vector<double> expected{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  for (std::size_t i = 0; i < rows.size() && i < expected.size(); ++i) {
    std::istringstream cells(rows[i]);
    double threshold = -1.0, dev_loss = 0.0, ndcg = 0.0, recall = 0.0;
    cells >> threshold >> dev_loss >> ndcg >> recall;
    check.require(bool(cells), "sweep row " + check.str(i) + " is not fully populated: " + rows[i]);
    check.require(std::fabs(threshold - expected[i]) < 1e-9,
                  "sweep row " + check.str(i) + " has threshold " + check.str(threshold));
    check.require(rows[i].find("failed:") == std::string::npos,
                  "sweep row " + check.str(i) + " recorded a failure");
  }
  return "6 rows";
}

}  // namespace

int main() {
  g_work = fs::temp_directory_path() /
           ("drift-acceptance-" + std::to_string(static_cast<unsigned>(::getpid())));
  fs::create_directories(g_work);

  struct Entry {
    int id;
    const char* label;
    std::function<std::string(Check&)> fn;
  };
  const std::vector<Entry> criteria{
      {1, "gradient checks", criterion_gradients},
      {2, "loss identities", criterion_identities},
      {3, "metric oracles", criterion_metrics},
      {4, "statistics", criterion_statistics},
      {5, "mask boundary and filter monotonicity", criterion_masking},
      {6, "dedup at scale", criterion_dedup},
      {7, "end-to-end ordering", criterion_end_to_end},
      {8, "end-to-end determinism", criterion_determinism},
      {9, "threshold sweep table", criterion_sweep},
  };

  bool all_pass = true;
  for (const Entry& entry : criteria) {
    Check check;
    std::string note;
    try {
      note = entry.fn(check);
    } catch (const std::exception& e) {
      check.failures.push_back(std::string("unhandled error: ") + e.what());
    }
    if (check.failures.empty()) {
      std::printf("criterion %d (%s): PASS%s%s\n", entry.id, entry.label,
                  note.empty() ? "" : " - ", note.c_str());
    } else {
      all_pass = false;
      std::printf("criterion %d (%s): FAIL - %s\n", entry.id, entry.label,
                  check.failures.front().c_str());
      for (std::size_t i = 1; i < check.failures.size(); ++i) {
        std::printf("    also: %s\n", check.failures[i].c_str());
      }
    }
    std::fflush(stdout);
  }

  std::error_code ec;
  fs::remove_all(g_work, ec);
  return all_pass ? 0 : 1;
}
