#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "drift/querygen.hpp"
#include "drift/retrieval.hpp"
#include "drift/teacher.hpp"

namespace drift {

inline constexpr std::size_t kCandidateDepth = 20;  // stage-1 window, K = 19 negatives
inline constexpr double kDefaultMaskThreshold = 0.6;

struct TrainingExample {
  GeneratedQuery query;
  std::string positive_id;
  std::vector<std::string> negatives;  // candidate order, at most kCandidateDepth - 1
  // Normalized teacher scores: scores[0] is the positive, scores[1 + j] pairs
  // with negatives[j].
  std::vector<double> scores;
  std::vector<bool> mask;  // per negative, true = treated as false negative
};

struct TypeCounts {
  std::size_t generated = 0;
  std::size_t passed_stage1 = 0;
  std::size_t passed_stage2 = 0;
};

struct FilterReport {
  TypeCounts total;
  std::map<QueryType, TypeCounts> by_type;
  std::size_t stage2_ties = 0;  // ties pass; their count is surfaced
};

// Pass iff the source positive appears among the first kCandidateDepth
// entries of the retriever's list.
bool stage1_filter(const GeneratedQuery& q, const RankedList& ranked);

struct Stage2Result {
  bool pass = false;
  bool tie = false;  // passed only by the positive-wins tie rule
};

// Pass iff the positive's score is >= every candidate's score over the
// stage-1 window. Throws MissingScoreError for unscored candidates.
Stage2Result stage2_filter(const GeneratedQuery& q, const RankedList& ranked,
                           const TeacherScores& scores);

// Assembles one example from the stage-1 window: negatives are the candidates
// minus the positive, order preserved; mask[j] is true iff
// score_j > threshold * score_positive (strictly).
TrainingExample build_example(const GeneratedQuery& q, const RankedList& ranked,
                              const TeacherScores& normalized_scores,
                              double threshold = kDefaultMaskThreshold);

struct AssemblyInputs {
  std::span<const GeneratedQuery> queries;
  const Run* candidates = nullptr;                    // retriever lists by query_id
  std::span<const TeacherScores> raw_scores;          // one table per teacher
  BlendConfig blend;                                  // weights aligned with raw_scores
  double mask_threshold = kDefaultMaskThreshold;
};

struct AssemblyResult {
  std::vector<TrainingExample> examples;  // query input order
  FilterReport report;
  std::vector<NormalizationStats> stats;  // per teacher, fitted on its pooled scores
  TeacherScores blended;                  // normalized + blended, stage-1 survivors only
};

// Full path from generated queries to training examples: stage-1 filter on
// the retriever lists, per-teacher min-max normalization fitted on each
// table's pooled population, weighted blend, stage-2 filter, example
// assembly.
AssemblyResult assemble_examples(const AssemblyInputs& inputs);

// Example file: one JSON record per line {query_id, passage_id, query_type,
// text, words, negatives[], scores[], mask[]}.
std::vector<TrainingExample> load_examples(const std::filesystem::path& path);
void save_examples(const std::vector<TrainingExample>& examples,
                   const std::filesystem::path& path);

void save_filter_report(const FilterReport& report, const std::filesystem::path& path);

}  // namespace drift
