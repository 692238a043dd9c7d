#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace drift {

struct Candidate {
  std::string passage_id;
  std::string text;
};

// Raw cross-encoder relevance scores keyed by (query_id, passage_id).
struct TeacherScores {
  std::map<std::string, std::map<std::string, double>> by_query;

  void set(const std::string& query_id, const std::string& passage_id, double score) {
    by_query[query_id][passage_id] = score;
  }
  // Throws MissingScoreError when absent.
  double get(const std::string& query_id, const std::string& passage_id) const;
  bool contains(const std::string& query_id, const std::string& passage_id) const;
  std::size_t size() const;
};

struct NormalizationStats {
  double p1 = 0.0;
  double p99 = 0.0;
};

struct BlendConfig {
  std::vector<double> weights;  // per-teacher, >= 0, at least one positive
};

class Teacher {
 public:
  virtual ~Teacher() = default;
  // One raw score per candidate, in candidate order.
  virtual std::vector<double> score(const std::string& query_id, const std::string& query_text,
                                    std::span<const Candidate> candidates) = 0;
};

// Scores one query's candidates and records them. Candidates must be
// nonempty.
TeacherScores score_candidates(Teacher& teacher, const std::string& query_id,
                               const std::string& query_text,
                               std::span<const Candidate> candidates);

// 1st/99th percentiles by linear interpolation over the pooled population of
// all recorded scores. Throws InsufficientDataError for fewer than 2 scores.
NormalizationStats fit_normalization(const TeacherScores& scores);

// Clips to [p1, p99] then maps affinely to [0, 1]; 0.5 when p1 == p99.
double normalize(double raw, const NormalizationStats& stats);

// Weighted sum; one score per configured teacher or ArityMismatchError.
double blend(std::span<const double> scores_per_teacher, const BlendConfig& config);

// Serves scores loaded from a score file; throws MissingScoreError for
// unscored pairs.
class FileTeacher : public Teacher {
 public:
  explicit FileTeacher(TeacherScores scores) : scores_(std::move(scores)) {}
  std::vector<double> score(const std::string& query_id, const std::string& query_text,
                            std::span<const Candidate> candidates) override;

 private:
  TeacherScores scores_;
};

// Planted topic model: ids carry latent topic vectors and the raw score is a
// scaled dot product plus seeded noise, giving graded non-binary relevance.
struct TopicTable {
  std::map<std::string, std::vector<double>> vectors;
};

class SyntheticOracleTeacher : public Teacher {
 public:
  SyntheticOracleTeacher(TopicTable table, double scale, std::uint64_t noise_seed,
                         double noise_amplitude = 0.01)
      : table_(std::move(table)),
        scale_(scale),
        noise_seed_(noise_seed),
        noise_amplitude_(noise_amplitude) {}
  std::vector<double> score(const std::string& query_id, const std::string& query_text,
                            std::span<const Candidate> candidates) override;

  // Noise-free planted affinity, the ground truth for oracle tests.
  double affinity(const std::string& query_id, const std::string& passage_id) const;

 private:
  TopicTable table_;
  double scale_;
  std::uint64_t noise_seed_;
  double noise_amplitude_;
};

// Scores via a JSON HTTP service: request {query, passages[]}, response
// {scores[]}. Retries with exponential backoff; ServiceError after the
// attempt budget is exhausted.
class RemoteTeacher : public Teacher {
 public:
  RemoteTeacher(std::string base_url, int max_attempts = 3, int retry_base_ms = 100)
      : base_url_(std::move(base_url)), max_attempts_(max_attempts), retry_base_ms_(retry_base_ms) {}
  std::vector<double> score(const std::string& query_id, const std::string& query_text,
                            std::span<const Candidate> candidates) override;

 private:
  std::string base_url_;
  int max_attempts_;
  int retry_base_ms_;
};

// Score file: one "query_id passage_id score" line per record.
TeacherScores load_scores(const std::filesystem::path& path);
void save_scores(const TeacherScores& scores, const std::filesystem::path& path);

// Topic table file: one JSON record per line {id, vec}.
TopicTable load_topic_table(const std::filesystem::path& path);
void save_topic_table(const TopicTable& table, const std::filesystem::path& path);

}  // namespace drift
