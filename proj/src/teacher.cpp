#include "drift/teacher.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "httplib.h"

#include "drift/errors.hpp"
#include "drift/io.hpp"
#include "drift/rng.hpp"

using json = nlohmann::json;

namespace drift {

double TeacherScores::get(const std::string& query_id, const std::string& passage_id) const {
  const auto qit = by_query.find(query_id);
  if (qit == by_query.end()) throw MissingScoreError(query_id, passage_id);
  const auto pit = qit->second.find(passage_id);
  if (pit == qit->second.end()) throw MissingScoreError(query_id, passage_id);
  return pit->second;
}

bool TeacherScores::contains(const std::string& query_id, const std::string& passage_id) const {
  const auto qit = by_query.find(query_id);
  return qit != by_query.end() && qit->second.count(passage_id) > 0;
}

std::size_t TeacherScores::size() const {
  std::size_t n = 0;
  for (const auto& [qid, scores] : by_query) n += scores.size();
  return n;
}

TeacherScores score_candidates(Teacher& teacher, const std::string& query_id,
                               const std::string& query_text,
                               std::span<const Candidate> candidates) {
  if (candidates.empty()) {
    throw std::invalid_argument("score_candidates requires a nonempty candidate list");
  }
  const std::vector<double> raw = teacher.score(query_id, query_text, candidates);
  TeacherScores scores;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    scores.set(query_id, candidates[i].passage_id, raw[i]);
  }
  return scores;
}

namespace {

double linear_percentile(const std::vector<double>& sorted, double q) {
  const std::size_t n = sorted.size();
  const double h = static_cast<double>(n - 1) * q / 100.0;
  const std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= n) return sorted[n - 1];
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

NormalizationStats fit_normalization(const TeacherScores& scores) {
  std::vector<double> pool;
  pool.reserve(scores.size());
  for (const auto& [qid, per_passage] : scores.by_query) {
    for (const auto& [pid, s] : per_passage) pool.push_back(s);
  }
  if (pool.size() < 2) {
    throw InsufficientDataError("need at least 2 scores to fit normalization, have " +
                                std::to_string(pool.size()));
  }
  std::sort(pool.begin(), pool.end());
  return {linear_percentile(pool, 1.0), linear_percentile(pool, 99.0)};
}

double normalize(double raw, const NormalizationStats& stats) {
  if (stats.p1 == stats.p99) return 0.5;
  const double clipped = std::clamp(raw, stats.p1, stats.p99);
  return (clipped - stats.p1) / (stats.p99 - stats.p1);
}

double blend(std::span<const double> scores_per_teacher, const BlendConfig& config) {
  if (scores_per_teacher.size() != config.weights.size()) {
    throw ArityMismatchError("blend got " + std::to_string(scores_per_teacher.size()) +
                             " scores for " + std::to_string(config.weights.size()) + " weights");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < config.weights.size(); ++i) {
    sum += config.weights[i] * scores_per_teacher[i];
  }
  return sum;
}

std::vector<double> FileTeacher::score(const std::string& query_id, const std::string& query_text,
                                       std::span<const Candidate> candidates) {
  (void)query_text;
  std::vector<double> out;
  out.reserve(candidates.size());
  for (const Candidate& c : candidates) out.push_back(scores_.get(query_id, c.passage_id));
  return out;
}

double SyntheticOracleTeacher::affinity(const std::string& query_id,
                                        const std::string& passage_id) const {
  const auto qit = table_.vectors.find(query_id);
  const auto pit = table_.vectors.find(passage_id);
  if (qit == table_.vectors.end() || pit == table_.vectors.end()) {
    throw MissingScoreError(query_id, passage_id);
  }
  double dot = 0.0;
  const std::size_t d = std::min(qit->second.size(), pit->second.size());
  for (std::size_t j = 0; j < d; ++j) dot += qit->second[j] * pit->second[j];
  return dot;
}

std::vector<double> SyntheticOracleTeacher::score(const std::string& query_id,
                                                  const std::string& query_text,
                                                  std::span<const Candidate> candidates) {
  (void)query_text;
  std::vector<double> out;
  out.reserve(candidates.size());
  for (const Candidate& c : candidates) {
    // Noise is keyed by (seed, query_id, passage_id) so scores are stable
    // regardless of call order.
    std::uint64_t h = fnv1a64(query_id, noise_seed_ ^ 1469598103934665603ULL);
    h = fnv1a64("\x1f", h);
    h = fnv1a64(c.passage_id, h);
    h ^= h >> 33;
    h *= 0xFF51AFD7ED558CCDULL;
    h ^= h >> 33;
    const double noise = (static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 - 1.0) * noise_amplitude_;
    out.push_back(scale_ * affinity(query_id, c.passage_id) + noise);
  }
  return out;
}

std::vector<double> RemoteTeacher::score(const std::string& query_id,
                                         const std::string& query_text,
                                         std::span<const Candidate> candidates) {
  (void)query_id;
  json request;
  request["query"] = query_text;
  json passages = json::array();
  for (const Candidate& c : candidates) passages.push_back(c.text);
  request["passages"] = std::move(passages);
  const std::string body = request.dump();

  std::string last_error;
  for (int attempt = 1; attempt <= max_attempts_; ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(
          std::chrono::milliseconds(retry_base_ms_ << (attempt - 2)));
    }
    httplib::Client client(base_url_);
    client.set_connection_timeout(10);
    client.set_read_timeout(60);
    auto res = client.Post("/score", body, "application/json");
    if (!res) {
      last_error = "transport error " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP status " + std::to_string(res->status);
      continue;
    }
    try {
      const json reply = json::parse(res->body);
      std::vector<double> out = reply.at("scores").get<std::vector<double>>();
      if (out.size() != candidates.size()) {
        last_error = "score count mismatch";
        continue;
      }
      return out;
    } catch (const json::exception& e) {
      last_error = std::string("bad response JSON: ") + e.what();
      continue;
    }
  }
  throw ServiceError("remote teacher " + base_url_ + " failed: " + last_error, max_attempts_);
}

TeacherScores load_scores(const std::filesystem::path& path) {
  TeacherScores scores;
  for_each_line(path, [&](const std::string& line, std::size_t lineno) {
    std::istringstream ss(line);
    std::string qid, pid;
    double score = 0.0;
    if (!(ss >> qid >> pid >> score)) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad score line");
    }
    scores.set(qid, pid, score);
  });
  return scores;
}

void save_scores(const TeacherScores& scores, const std::filesystem::path& path) {
  std::ostringstream out;
  char buf[64];
  for (const auto& [qid, per_passage] : scores.by_query) {
    for (const auto& [pid, s] : per_passage) {
      std::snprintf(buf, sizeof(buf), "%.12g", s);
      out << qid << " " << pid << " " << buf << "\n";
    }
  }
  atomic_write_file(path, out.str());
}

TopicTable load_topic_table(const std::filesystem::path& path) {
  TopicTable table;
  for_each_line(path, [&](const std::string& line, std::size_t lineno) {
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad JSON: " + e.what());
    }
    table.vectors[rec.at("id").get<std::string>()] = rec.at("vec").get<std::vector<double>>();
  });
  return table;
}

void save_topic_table(const TopicTable& table, const std::filesystem::path& path) {
  std::ostringstream out;
  for (const auto& [id, vec] : table.vectors) {
    out << json{{"id", id}, {"vec", vec}}.dump() << "\n";
  }
  atomic_write_file(path, out.str());
}

}  // namespace drift
