#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "drift/corpus.hpp"
#include "drift/eval.hpp"
#include "drift/querygen.hpp"
#include "drift/teacher.hpp"
#include "drift/trainer.hpp"

namespace drift {

// Planted-topic world: every passage draws its words from a primary topic's
// vocabulary (plus filler, an optional secondary topic, and one passage-unique
// name token) and carries a latent topic vector the oracle teacher and the
// relevance grades are derived from.
struct SynthWorldConfig {
  std::size_t passage_count = 2000;
  std::size_t topic_count = 12;
  std::size_t words_per_topic = 30;
  std::size_t shared_words = 60;
  std::size_t min_words = 15;
  std::size_t max_words = 28;
  double secondary_fraction = 0.35;   // passages that also lean on a second topic
  double secondary_weight_low = 0.3;  // grade-1 affinity levels
  double secondary_weight_high = 0.6;
  std::size_t fingerprint_dim = 256;  // per-passage identity axes
  double fingerprint_weight = 0.4;
  std::size_t eval_queries_per_topic = 8;
  std::size_t eval_query_min_words = 3;
  std::size_t eval_query_max_words = 5;
  double grade2_min_affinity = 0.95;
  double grade1_min_affinity = 0.25;
  std::uint64_t seed = 42;
};

struct SynthWorld {
  Corpus corpus;                        // raw generator output, not deduplicated
  TopicTable passage_topics;            // passage_id -> latent vector
  std::vector<EvalQuery> eval_queries;  // held out, one-hot on their topic
  TopicTable eval_query_topics;
  Qrels qrels;  // grades from affinity thresholds against the eval queries
};

SynthWorld build_world(const SynthWorldConfig& config);

// Generated queries inherit the latent vector of their source passage, which
// is what lets the oracle teacher score them.
TopicTable inherit_query_topics(std::span<const GeneratedQuery> queries,
                                const TopicTable& passage_topics);

}  // namespace drift
