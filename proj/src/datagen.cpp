#include "drift/datagen.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "drift/errors.hpp"
#include "drift/io.hpp"

using json = nlohmann::json;

namespace drift {

namespace {

std::span<const RankedEntry> stage1_window(const RankedList& ranked) {
  const std::size_t n = std::min<std::size_t>(ranked.entries.size(), kCandidateDepth);
  return {ranked.entries.data(), n};
}

}  // namespace

bool stage1_filter(const GeneratedQuery& q, const RankedList& ranked) {
  for (const RankedEntry& e : stage1_window(ranked)) {
    if (e.passage_id == q.passage_id) return true;
  }
  return false;
}

Stage2Result stage2_filter(const GeneratedQuery& q, const RankedList& ranked,
                           const TeacherScores& scores) {
  const double positive = scores.get(q.query_id, q.passage_id);
  Stage2Result result;
  result.pass = true;
  for (const RankedEntry& e : stage1_window(ranked)) {
    if (e.passage_id == q.passage_id) continue;
    const double s = scores.get(q.query_id, e.passage_id);
    if (s > positive) return {false, false};
    if (s == positive) result.tie = true;
  }
  return result;
}

TrainingExample build_example(const GeneratedQuery& q, const RankedList& ranked,
                              const TeacherScores& normalized_scores, double threshold) {
  TrainingExample ex;
  ex.query = q;
  ex.positive_id = q.passage_id;
  const double positive = normalized_scores.get(q.query_id, q.passage_id);
  ex.scores.push_back(positive);
  bool saw_positive = false;
  for (const RankedEntry& e : stage1_window(ranked)) {
    if (e.passage_id == q.passage_id) {
      saw_positive = true;
      continue;
    }
    const double s = normalized_scores.get(q.query_id, e.passage_id);
    ex.negatives.push_back(e.passage_id);
    ex.scores.push_back(s);
    ex.mask.push_back(s > threshold * positive);
  }
  if (!saw_positive) {
    throw std::invalid_argument("build_example: positive " + q.passage_id +
                                " is not in the candidate window for " + q.query_id);
  }
  return ex;
}

AssemblyResult assemble_examples(const AssemblyInputs& inputs) {
  if (inputs.candidates == nullptr) {
    throw std::invalid_argument("assemble_examples needs candidate lists");
  }
  if (inputs.raw_scores.size() != inputs.blend.weights.size()) {
    throw ArityMismatchError("assemble_examples got " + std::to_string(inputs.raw_scores.size()) +
                             " score tables for " + std::to_string(inputs.blend.weights.size()) +
                             " blend weights");
  }

  AssemblyResult out;
  for (const TeacherScores& table : inputs.raw_scores) {
    out.stats.push_back(fit_normalization(table));
  }

  struct Survivor {
    const GeneratedQuery* query;
    const RankedList* ranked;
  };
  std::vector<Survivor> survivors;
  for (const GeneratedQuery& q : inputs.queries) {
    ++out.report.total.generated;
    ++out.report.by_type[q.query_type].generated;
    const auto it = inputs.candidates->find(q.query_id);
    if (it == inputs.candidates->end()) continue;
    if (!stage1_filter(q, it->second)) continue;
    ++out.report.total.passed_stage1;
    ++out.report.by_type[q.query_type].passed_stage1;
    survivors.push_back({&q, &it->second});
  }

  std::vector<double> per_teacher(inputs.raw_scores.size());
  for (const Survivor& s : survivors) {
    for (const RankedEntry& e : stage1_window(*s.ranked)) {
      for (std::size_t t = 0; t < inputs.raw_scores.size(); ++t) {
        per_teacher[t] =
            normalize(inputs.raw_scores[t].get(s.query->query_id, e.passage_id), out.stats[t]);
      }
      out.blended.set(s.query->query_id, e.passage_id, blend(per_teacher, inputs.blend));
    }
  }

  for (const Survivor& s : survivors) {
    const Stage2Result verdict = stage2_filter(*s.query, *s.ranked, out.blended);
    if (!verdict.pass) continue;
    if (verdict.tie) ++out.report.stage2_ties;
    ++out.report.total.passed_stage2;
    ++out.report.by_type[s.query->query_type].passed_stage2;
    out.examples.push_back(
        build_example(*s.query, *s.ranked, out.blended, inputs.mask_threshold));
  }
  return out;
}

std::vector<TrainingExample> load_examples(const std::filesystem::path& path) {
  std::vector<TrainingExample> examples;
  for_each_line(path, [&](const std::string& line, std::size_t lineno) {
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad JSON: " + e.what());
    }
    TrainingExample ex;
    ex.query.query_id = rec.at("query_id").get<std::string>();
    ex.query.passage_id = rec.at("passage_id").get<std::string>();
    ex.query.query_type = parse_query_type(rec.at("query_type").get<std::string>());
    ex.query.text = rec.at("text").get<std::string>();
    ex.query.word_count =
        rec.contains("words") ? rec["words"].get<std::size_t>() : count_words(ex.query.text);
    ex.positive_id = ex.query.passage_id;
    ex.negatives = rec.at("negatives").get<std::vector<std::string>>();
    ex.scores = rec.at("scores").get<std::vector<double>>();
    const auto mask = rec.at("mask").get<std::vector<int>>();
    ex.mask.assign(mask.begin(), mask.end());
    if (ex.scores.size() != ex.negatives.size() + 1 || ex.mask.size() != ex.negatives.size()) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": inconsistent example arity");
    }
    examples.push_back(std::move(ex));
  });
  return examples;
}

void save_examples(const std::vector<TrainingExample>& examples,
                   const std::filesystem::path& path) {
  std::ostringstream out;
  for (const TrainingExample& ex : examples) {
    json mask = json::array();
    for (const bool m : ex.mask) mask.push_back(m ? 1 : 0);
    out << json{{"query_id", ex.query.query_id},
                {"passage_id", ex.positive_id},
                {"query_type", std::string(to_string(ex.query.query_type))},
                {"text", ex.query.text},
                {"words", ex.query.word_count},
                {"negatives", ex.negatives},
                {"scores", ex.scores},
                {"mask", mask}}
               .dump()
        << "\n";
  }
  atomic_write_file(path, out.str());
}

void save_filter_report(const FilterReport& report, const std::filesystem::path& path) {
  json by_type = json::object();
  for (const auto& [type, counts] : report.by_type) {
    by_type[std::string(to_string(type))] = {{"generated", counts.generated},
                                             {"passed_stage1", counts.passed_stage1},
                                             {"passed_stage2", counts.passed_stage2}};
  }
  const json doc = {{"generated", report.total.generated},
                    {"passed_stage1", report.total.passed_stage1},
                    {"passed_stage2", report.total.passed_stage2},
                    {"stage2_ties", report.stage2_ties},
                    {"by_type", by_type}};
  atomic_write_file(path, doc.dump(2) + "\n");
}

}  // namespace drift
