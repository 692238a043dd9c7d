#include "drift/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "drift/errors.hpp"
#include "drift/io.hpp"

using json = nlohmann::json;

namespace drift {

namespace {

const std::map<std::string, int>* judgments_for(const Qrels& qrels, const std::string& query_id) {
  const auto it = qrels.by_query.find(query_id);
  return it == qrels.by_query.end() ? nullptr : &it->second;
}

}  // namespace

MetricReport ndcg_at_k(const Run& run, const Qrels& qrels, std::size_t k) {
  if (run.empty()) throw EmptyRunError("ndcg_at_k on an empty run");
  MetricReport report;
  double sum = 0.0;
  for (const auto& [qid, ranked] : run) {
    double value = 0.0;
    if (const auto* judged = judgments_for(qrels, qid)) {
      double dcg = 0.0;
      const std::size_t depth = std::min(k, ranked.entries.size());
      for (std::size_t i = 0; i < depth; ++i) {
        const auto it = judged->find(ranked.entries[i].passage_id);
        if (it == judged->end()) continue;
        dcg += static_cast<double>(it->second) / std::log2(static_cast<double>(i) + 2.0);
      }
      std::vector<int> grades;
      grades.reserve(judged->size());
      for (const auto& [pid, grade] : *judged) grades.push_back(grade);
      std::sort(grades.begin(), grades.end(), std::greater<int>());
      double idcg = 0.0;
      for (std::size_t i = 0; i < std::min(k, grades.size()); ++i) {
        idcg += static_cast<double>(grades[i]) / std::log2(static_cast<double>(i) + 2.0);
      }
      if (idcg > 0.0) value = dcg / idcg;
    }
    report.per_query[qid] = value;
    sum += value;
  }
  report.mean = sum / static_cast<double>(report.per_query.size());
  return report;
}

MetricReport recall_at_k(const Run& run, const Qrels& qrels, std::size_t k) {
  if (run.empty()) throw EmptyRunError("recall_at_k on an empty run");
  MetricReport report;
  double sum = 0.0;
  for (const auto& [qid, ranked] : run) {
    double value = 0.0;
    if (const auto* judged = judgments_for(qrels, qid)) {
      std::size_t relevant = 0;
      for (const auto& [pid, grade] : *judged) relevant += grade >= 1 ? 1 : 0;
      if (relevant > 0) {
        std::size_t hits = 0;
        const std::size_t depth = std::min(k, ranked.entries.size());
        for (std::size_t i = 0; i < depth; ++i) {
          const auto it = judged->find(ranked.entries[i].passage_id);
          if (it != judged->end() && it->second >= 1) ++hits;
        }
        value = static_cast<double>(hits) / static_cast<double>(relevant);
      }
    }
    report.per_query[qid] = value;
    sum += value;
  }
  report.mean = sum / static_cast<double>(report.per_query.size());
  return report;
}

namespace {

// Continued fraction for the regularized incomplete beta, modified Lentz.
double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-14;
  constexpr double kFpMin = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

double reg_incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

}  // namespace

double student_t_upper_tail(double t, double df) {
  if (df <= 0.0) throw std::invalid_argument("student_t_upper_tail needs df > 0");
  const double tail = 0.5 * reg_incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
  return t >= 0.0 ? tail : 1.0 - tail;
}

double paired_t_one_sided(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw LengthMismatchError("paired_t_one_sided got " + std::to_string(a.size()) + " vs " +
                              std::to_string(b.size()) + " values");
  }
  const std::size_t n = a.size();
  if (n < 2) throw InsufficientDataError("paired_t_one_sided needs at least 2 pairs");
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = (a[i] - b[i]) - mean;
    ss += d * d;
  }
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (sd == 0.0) return mean > 0.0 ? 0.0 : 1.0;
  const double t = mean / (sd / std::sqrt(static_cast<double>(n)));
  return student_t_upper_tail(t, static_cast<double>(n - 1));
}

SignificanceResult holm_bonferroni(std::span<const double> p_values, double alpha) {
  for (const double p : p_values) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw std::invalid_argument("holm_bonferroni p-values must lie in [0, 1]");
    }
  }
  SignificanceResult result;
  result.alpha = alpha;
  result.p_values.assign(p_values.begin(), p_values.end());
  result.rejected.assign(p_values.size(), false);

  const std::size_t m = p_values.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return p_values[i] < p_values[j]; });
  for (std::size_t i = 0; i < m; ++i) {
    const double threshold = alpha / static_cast<double>(m - i);
    if (result.p_values[order[i]] > threshold) break;
    result.rejected[order[i]] = true;
  }
  return result;
}

Qrels load_qrels(const std::filesystem::path& path) {
  Qrels qrels;
  for_each_line(path, [&](const std::string& line, std::size_t lineno) {
    std::istringstream ss(line);
    std::string qid, iteration, pid;
    long grade = 0;
    if (!(ss >> qid >> iteration >> pid >> grade) || grade < 0) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad qrels line");
    }
    qrels.by_query[qid][pid] = static_cast<int>(grade);
  });
  return qrels;
}

void save_qrels(const Qrels& qrels, const std::filesystem::path& path) {
  std::ostringstream out;
  for (const auto& [qid, judged] : qrels.by_query) {
    for (const auto& [pid, grade] : judged) {
      out << qid << " 0 " << pid << " " << grade << "\n";
    }
  }
  atomic_write_file(path, out.str());
}

void save_metric_report(const MetricReport& report, const std::string& metric_name,
                        const std::filesystem::path& path) {
  json per_query = json::object();
  for (const auto& [qid, value] : report.per_query) per_query[qid] = value;
  const json doc = {{"metric", metric_name}, {"mean", report.mean}, {"per_query", per_query}};
  atomic_write_file(path, doc.dump(2) + "\n");
}

}  // namespace drift
