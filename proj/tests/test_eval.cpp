#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "drift/errors.hpp"
#include "drift/eval.hpp"
#include "drift/io.hpp"
#include "drift/retrieval.hpp"
#include "drift/rng.hpp"
#include "test_helpers.hpp"

using namespace drift;
using drift::testing::TempDir;

namespace {

Run run_of(const std::string& qid, std::initializer_list<const char*> docs) {
  Run r;
  RankedList list;
  list.query_id = qid;
  double score = 1.0;
  for (const char* d : docs) {
    list.entries.push_back({d, score});
    score -= 0.01;
  }
  r[qid] = list;
  return r;
}

Qrels qrels_of(const std::string& qid,
               std::initializer_list<std::pair<const char*, int>> grades) {
  Qrels q;
  for (const auto& [doc, g] : grades) q.by_query[qid][doc] = g;
  return q;
}

// Definition-level reference: DCG with linear gain over the first k ranks,
// normalized by the DCG of grades sorted descending.
double oracle_ndcg(const std::vector<int>& ranked_grades, const std::vector<int>& all_grades,
                   std::size_t k) {
  double dcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, ranked_grades.size()); ++i) {
    dcg += static_cast<double>(ranked_grades[i]) /
           std::log2(static_cast<double>(i) + 2.0);
  }
  std::vector<int> ideal = all_grades;
  std::sort(ideal.begin(), ideal.end(), std::greater<int>());
  double idcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, ideal.size()); ++i) {
    idcg += static_cast<double>(ideal[i]) / std::log2(static_cast<double>(i) + 2.0);
  }
  return idcg == 0.0 ? 0.0 : dcg / idcg;
}

double oracle_recall(const std::vector<bool>& ranked_relevant, std::size_t total_relevant,
                     std::size_t k) {
  if (total_relevant == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < std::min(k, ranked_relevant.size()); ++i) {
    if (ranked_relevant[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(total_relevant);
}

}  // namespace

TEST_CASE("ndcg is one for a perfect single-relevant ranking") {
  const Run r = run_of("q", {"a", "b", "c"});
  const Qrels q = qrels_of("q", {{"a", 1}});
  const MetricReport report = ndcg_at_k(r, q, 10);
  CHECK(report.per_query.at("q") == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ndcg discounts a relevant document at rank two") {
  const Run r = run_of("q", {"b", "a", "c"});
  const Qrels q = qrels_of("q", {{"a", 1}});
  const MetricReport report = ndcg_at_k(r, q, 10);
  CHECK(report.per_query.at("q") == doctest::Approx(0.63093).epsilon(1e-5));
  CHECK(report.per_query.at("q") == doctest::Approx(1.0 / std::log2(3.0)).epsilon(1e-12));
}

TEST_CASE("queries with no relevant documents score zero") {
  const Run r = run_of("q", {"a", "b"});
  Qrels empty;
  const MetricReport ndcg = ndcg_at_k(r, empty, 10);
  CHECK(ndcg.per_query.at("q") == 0.0);
  const MetricReport recall = recall_at_k(r, empty, 100);
  CHECK(recall.per_query.at("q") == 0.0);
  CHECK(ndcg.mean == 0.0);
}

TEST_CASE("recall counts retrieved relevant over all relevant") {
  const Run full = run_of("q", {"a", "b", "c"});
  const Qrels three = qrels_of("q", {{"a", 1}, {"b", 2}, {"c", 1}});
  CHECK(recall_at_k(full, three, 100).per_query.at("q") == doctest::Approx(1.0));

  const Run one = run_of("q", {"a", "x", "y"});
  const Qrels four = qrels_of("q", {{"a", 1}, {"b", 1}, {"c", 1}, {"d", 1}});
  CHECK(recall_at_k(one, four, 100).per_query.at("q") == doctest::Approx(0.25));
}

TEST_CASE("recall ignores grade magnitude but not grade zero") {
  const Run r = run_of("q", {"a", "b"});
  const Qrels q = qrels_of("q", {{"a", 2}, {"b", 0}, {"c", 1}});
  CHECK(recall_at_k(r, q, 100).per_query.at("q") == doctest::Approx(0.5));
}

TEST_CASE("metrics reject an empty run") {
  const Run empty;
  const Qrels q = qrels_of("q", {{"a", 1}});
  CHECK_THROWS_AS(ndcg_at_k(empty, q, 10), EmptyRunError);
  CHECK_THROWS_AS(recall_at_k(empty, q, 100), EmptyRunError);
}

TEST_CASE("ndcg ignores ordering below rank k") {
  Run a = run_of("q", {"r1", "x", "y", "z", "w"});
  Run b = run_of("q", {"r1", "x", "y", "w", "z"});
  const Qrels q = qrels_of("q", {{"r1", 2}, {"x", 1}, {"y", 1}});
  const double na = ndcg_at_k(a, q, 3).per_query.at("q");
  const double nb = ndcg_at_k(b, q, 3).per_query.at("q");
  CHECK(na == nb);
}

TEST_CASE("metrics match the exhaustive oracle on random instances") {
  Rng rng(93);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n_docs = 1 + rng.uniform_index(20);
    const std::size_t k = 1 + rng.uniform_index(25);
    Run run;
    RankedList list;
    list.query_id = "q";
    std::vector<int> ranked_grades;
    std::vector<bool> ranked_relevant;
    Qrels qrels;
    std::vector<int> all_grades;
    std::size_t total_relevant = 0;
    for (std::size_t d = 0; d < n_docs; ++d) {
      const std::string id = "d" + std::to_string(d);
      list.entries.push_back({id, 1.0 - 0.001 * static_cast<double>(d)});
      const int grade = static_cast<int>(rng.uniform_index(4)) - 1;  // -1..2, -1 = unjudged
      if (grade >= 0) {
        qrels.by_query["q"][id] = grade;
        all_grades.push_back(grade);
        if (grade > 0) ++total_relevant;
      }
      ranked_grades.push_back(grade > 0 ? grade : 0);
      ranked_relevant.push_back(grade > 0);
    }
    // Judged documents the run missed.
    const std::size_t extra = rng.uniform_index(4);
    for (std::size_t e = 0; e < extra; ++e) {
      const int grade = 1 + static_cast<int>(rng.uniform_index(2));
      qrels.by_query["q"]["m" + std::to_string(e)] = grade;
      all_grades.push_back(grade);
      ++total_relevant;
    }
    run["q"] = list;

    const double got_ndcg = ndcg_at_k(run, qrels, k).per_query.at("q");
    const double want_ndcg = oracle_ndcg(ranked_grades, all_grades, k);
    CHECK(std::abs(got_ndcg - want_ndcg) < 1e-9);

    const double got_recall = recall_at_k(run, qrels, k).per_query.at("q");
    const double want_recall = oracle_recall(ranked_relevant, total_relevant, k);
    CHECK(std::abs(got_recall - want_recall) < 1e-9);

    CHECK(got_ndcg >= 0.0);
    CHECK(got_ndcg <= 1.0 + 1e-12);
    CHECK(got_recall >= 0.0);
    CHECK(got_recall <= 1.0 + 1e-12);
  }
}

TEST_CASE("the mean covers every run query including zero scorers") {
  Run r;
  r["q1"] = {"q1", {{"a", 0.9}}};
  r["q2"] = {"q2", {{"b", 0.8}}};
  Qrels q = qrels_of("q1", {{"a", 1}});
  const MetricReport report = ndcg_at_k(r, q, 10);
  CHECK(report.per_query.size() == 2);
  CHECK(report.per_query.at("q2") == 0.0);
  CHECK(report.mean == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("paired t-test on the worked difference vector") {
  const std::vector<double> a{2.0, 4.0, 6.0};
  const std::vector<double> b{1.0, 2.0, 3.0};
  const double p = paired_t_one_sided(a, b);
  CHECK(p == doctest::Approx(0.0371).epsilon(1e-3 / 0.0371));
  // Closed form for df = 2: p = (1 - t / sqrt(t^2 + 2)) / 2 at t = 2 sqrt(3).
  const double t = 2.0 * std::sqrt(3.0);
  const double closed = 0.5 * (1.0 - t / std::sqrt(t * t + 2.0));
  CHECK(p == doctest::Approx(closed).epsilon(1e-9));
}

TEST_CASE("identical samples give p = 1") {
  const std::vector<double> a{0.3, 0.5, 0.7};
  CHECK(paired_t_one_sided(a, a) == 1.0);
}

TEST_CASE("constant positive differences give p = 0") {
  const std::vector<double> a{1.5, 2.5, 3.5};
  const std::vector<double> b{1.0, 2.0, 3.0};
  CHECK(paired_t_one_sided(a, b) == 0.0);
}

TEST_CASE("constant negative differences give p = 1") {
  const std::vector<double> a{1.0, 2.0, 3.0};
  const std::vector<double> b{1.5, 2.5, 3.5};
  CHECK(paired_t_one_sided(a, b) == 1.0);
}

TEST_CASE("paired t-test rejects mismatched or tiny samples") {
  const std::vector<double> a{1.0, 2.0};
  const std::vector<double> b{1.0};
  CHECK_THROWS_AS(paired_t_one_sided(a, b), LengthMismatchError);
  const std::vector<double> one{1.0};
  CHECK_THROWS_AS(paired_t_one_sided(one, one), InsufficientDataError);
}

TEST_CASE("p values fall as the mean improvement grows") {
  Rng rng(97);
  std::vector<double> base(30);
  for (double& x : base) x = rng.uniform();
  double prev_p = 1.1;
  for (const double lift : {0.01, 0.05, 0.2}) {
    std::vector<double> improved = base;
    for (std::size_t i = 0; i < improved.size(); ++i) {
      improved[i] += lift + 0.001 * static_cast<double>(i % 3);
    }
    const double p = paired_t_one_sided(improved, base);
    CHECK(p < prev_p);
    prev_p = p;
  }
}

TEST_CASE("holm rejects both hands of the worked pattern") {
  const SignificanceResult r = holm_bonferroni(std::vector<double>{0.01, 0.04}, 0.05);
  REQUIRE(r.rejected.size() == 2);
  CHECK(r.rejected[0]);
  CHECK(r.rejected[1]);
}

TEST_CASE("holm stops at the first failure") {
  const SignificanceResult r = holm_bonferroni(std::vector<double>{0.03, 0.04}, 0.05);
  REQUIRE(r.rejected.size() == 2);
  CHECK_FALSE(r.rejected[0]);
  CHECK_FALSE(r.rejected[1]);
}

TEST_CASE("holm keeps decisions aligned with input order") {
  const SignificanceResult r =
      holm_bonferroni(std::vector<double>{0.04, 0.001, 0.9}, 0.05);
  CHECK(r.p_values == std::vector<double>{0.04, 0.001, 0.9});
  CHECK(r.rejected[1]);
  CHECK_FALSE(r.rejected[2]);
}

TEST_CASE("holm on an empty list decides nothing") {
  const SignificanceResult r = holm_bonferroni(std::vector<double>{}, 0.05);
  CHECK(r.p_values.empty());
  CHECK(r.rejected.empty());
}

TEST_CASE("holm rejects out-of-range p values") {
  CHECK_THROWS_AS(holm_bonferroni(std::vector<double>{-0.1}, 0.05), std::invalid_argument);
  CHECK_THROWS_AS(holm_bonferroni(std::vector<double>{1.2}, 0.05), std::invalid_argument);
}

TEST_CASE("lowering one p value never un-rejects another") {
  Rng rng(103);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 1 + rng.uniform_index(6);
    std::vector<double> p(m);
    for (double& x : p) x = rng.uniform();
    const SignificanceResult before = holm_bonferroni(p, 0.05);
    std::vector<double> lowered = p;
    const std::size_t target = rng.uniform_index(m);
    lowered[target] *= rng.uniform();
    const SignificanceResult after = holm_bonferroni(lowered, 0.05);
    for (std::size_t i = 0; i < m; ++i) {
      if (before.rejected[i]) CHECK(after.rejected[i]);
    }
  }
}

TEST_CASE("qrels file round-trip") {
  const TempDir dir("qrels");
  Qrels q;
  q.by_query["q1"]["a"] = 2;
  q.by_query["q1"]["b"] = 1;
  q.by_query["q2"]["c"] = 1;
  save_qrels(q, dir.file("q.txt"));
  const Qrels back = load_qrels(dir.file("q.txt"));
  CHECK(back.by_query == q.by_query);
  const std::string content = read_file(dir.file("q.txt"));
  CHECK(content.find("q1 0 a 2") == 0);
}

TEST_CASE("metric report file carries per-query values and the mean") {
  const TempDir dir("report");
  MetricReport report;
  report.per_query["q1"] = 0.25;
  report.per_query["q2"] = 0.75;
  report.mean = 0.5;
  save_metric_report(report, "ndcg@10", dir.file("m.json"));
  const std::string content = read_file(dir.file("m.json"));
  CHECK(content.find("ndcg@10") != std::string::npos);
  CHECK(content.find("\"q1\": 0.25") != std::string::npos);
  CHECK(content.find("\"mean\": 0.5") != std::string::npos);
}
