#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "drift/retrieval.hpp"

namespace drift {

// Graded relevance judgments, query_id -> passage_id -> grade >= 0.
struct Qrels {
  std::map<std::string, std::map<std::string, int>> by_query;
};

struct MetricReport {
  std::map<std::string, double> per_query;
  double mean = 0.0;  // arithmetic mean over the run's queries
};

// Linear-gain DCG rel_i / log2(i + 1) over the run order, normalized by the
// ideal ranking from qrels; 0 for queries with no relevant documents.
MetricReport ndcg_at_k(const Run& run, const Qrels& qrels, std::size_t k = 10);

// Fraction of grade >= 1 passages found in the top k; 0 when none exist.
MetricReport recall_at_k(const Run& run, const Qrels& qrels, std::size_t k = 100);

// Upper tail of Student's t with df degrees of freedom, via the regularized
// incomplete beta function. Exposed for direct testing.
double student_t_upper_tail(double t, double df);

// One-sided paired t-test of H1: mean(a - b) > 0. Values are paired by
// position. Degenerate zero-variance differences give p = 0 when the mean is
// positive and p = 1 otherwise.
double paired_t_one_sided(std::span<const double> a, std::span<const double> b);

struct SignificanceResult {
  std::vector<double> p_values;  // input order
  std::vector<bool> rejected;    // input order
  double alpha = 0.05;
};

// Step-down correction: ascending p_(i) is rejected while
// p_(i) <= alpha / (m - i + 1); the first failure stops the walk.
SignificanceResult holm_bonferroni(std::span<const double> p_values, double alpha = 0.05);

// Qrels file: whitespace-separated "query_id 0 passage_id grade" lines.
Qrels load_qrels(const std::filesystem::path& path);
void save_qrels(const Qrels& qrels, const std::filesystem::path& path);

void save_metric_report(const MetricReport& report, const std::string& metric_name,
                        const std::filesystem::path& path);

}  // namespace drift
