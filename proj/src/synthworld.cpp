#include "drift/synthworld.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "drift/rng.hpp"

namespace drift {

namespace {

constexpr const char* kSyllables[] = {
    "ba", "be", "bi", "bo", "bu", "da", "de", "di", "do", "du", "fa", "fe",
    "fi", "fo", "ka", "ke", "ki", "ko", "ku", "la", "le", "li", "lo", "lu",
    "ma", "me", "mi", "mo", "mu", "na", "ne", "ni", "no", "nu", "ra", "re",
    "ri", "ro", "ru", "sa", "se", "si", "so", "su", "ta", "te", "ti", "to",
    "tu", "va", "ve", "vi", "vo", "zu"};
constexpr std::size_t kSyllableCount = sizeof(kSyllables) / sizeof(kSyllables[0]);

std::string fresh_word(Rng& rng, std::set<std::string>& taken) {
  while (true) {
    std::string word;
    const std::size_t syllables = 2 + rng.uniform_index(3);
    for (std::size_t s = 0; s < syllables; ++s) word += kSyllables[rng.uniform_index(kSyllableCount)];
    if (taken.insert(word).second) return word;
  }
}

}  // namespace

SynthWorld build_world(const SynthWorldConfig& config) {
  if (config.topic_count < 2) throw std::invalid_argument("build_world needs at least 2 topics");
  if (config.min_words < 1 || config.max_words < config.min_words) {
    throw std::invalid_argument("build_world got an empty word-count range");
  }

  SynthWorld world;
  std::set<std::string> taken;

  Rng vocab_rng(derive_seed(config.seed, "vocab"));
  std::vector<std::vector<std::string>> topic_vocab(config.topic_count);
  for (std::size_t t = 0; t < config.topic_count; ++t) {
    for (std::size_t w = 0; w < config.words_per_topic; ++w) {
      topic_vocab[t].push_back(fresh_word(vocab_rng, taken));
    }
  }
  std::vector<std::string> filler;
  for (std::size_t w = 0; w < config.shared_words; ++w) {
    filler.push_back(fresh_word(vocab_rng, taken));
  }

  const std::size_t dim = config.topic_count + config.fingerprint_dim;
  Rng passage_rng(derive_seed(config.seed, "passages"));
  char idbuf[32];
  for (std::size_t i = 0; i < config.passage_count; ++i) {
    std::snprintf(idbuf, sizeof(idbuf), "p%05zu", i);
    const std::string id = idbuf;
    const std::size_t primary = i % config.topic_count;

    std::size_t secondary = primary;
    double secondary_weight = 0.0;
    if (passage_rng.uniform() < config.secondary_fraction) {
      secondary = passage_rng.uniform_index(config.topic_count - 1);
      if (secondary >= primary) ++secondary;
      secondary_weight = passage_rng.uniform() < 0.5 ? config.secondary_weight_low
                                                     : config.secondary_weight_high;
    }

    std::vector<double> vec(dim, 0.0);
    vec[primary] = 1.0;
    if (secondary_weight > 0.0) vec[secondary] = secondary_weight;
    if (config.fingerprint_dim > 0) {
      const std::uint64_t h = fnv1a64(id);
      vec[config.topic_count + h % config.fingerprint_dim] =
          (h >> 32 & 1) ? config.fingerprint_weight : -config.fingerprint_weight;
    }
    world.passage_topics.vectors[id] = std::move(vec);

    const std::size_t words =
        config.min_words + passage_rng.uniform_index(config.max_words - config.min_words + 1);
    std::vector<std::string> drawn;
    drawn.reserve(words + 1);
    for (std::size_t w = 0; w < words; ++w) {
      const double r = passage_rng.uniform();
      if (r < 0.15) {
        drawn.push_back(filler[passage_rng.uniform_index(filler.size())]);
      } else if (secondary_weight > 0.0 && r < 0.30) {
        drawn.push_back(topic_vocab[secondary][passage_rng.uniform_index(config.words_per_topic)]);
      } else {
        drawn.push_back(topic_vocab[primary][passage_rng.uniform_index(config.words_per_topic)]);
      }
    }
    drawn.insert(drawn.begin() + static_cast<std::ptrdiff_t>(passage_rng.uniform_index(words + 1)),
                 fresh_word(passage_rng, taken));

    std::string text;
    for (const std::string& w : drawn) {
      if (!text.empty()) text += " ";
      text += w;
    }
    world.corpus.passages.push_back(make_passage(id, text));
  }

  Rng eval_rng(derive_seed(config.seed, "eval"));
  char qbuf[48];
  for (std::size_t t = 0; t < config.topic_count; ++t) {
    for (std::size_t q = 0; q < config.eval_queries_per_topic; ++q) {
      std::snprintf(qbuf, sizeof(qbuf), "eval-t%02zu-q%02zu", t, q);
      const std::string qid = qbuf;
      const std::size_t want =
          std::min(config.words_per_topic,
                   config.eval_query_min_words +
                       eval_rng.uniform_index(config.eval_query_max_words -
                                              config.eval_query_min_words + 1));
      std::set<std::size_t> picked;
      while (picked.size() < want) picked.insert(eval_rng.uniform_index(config.words_per_topic));
      std::string text;
      for (const std::size_t w : picked) {
        if (!text.empty()) text += " ";
        text += topic_vocab[t][w];
      }
      world.eval_queries.push_back({qid, text});

      std::vector<double> vec(dim, 0.0);
      vec[t] = 1.0;
      world.eval_query_topics.vectors[qid] = std::move(vec);

      for (const auto& [pid, pvec] : world.passage_topics.vectors) {
        const double affinity = pvec[t];
        int grade = 0;
        if (affinity >= config.grade2_min_affinity) {
          grade = 2;
        } else if (affinity >= config.grade1_min_affinity) {
          grade = 1;
        }
        if (grade > 0) world.qrels.by_query[qid][pid] = grade;
      }
    }
  }
  return world;
}

TopicTable inherit_query_topics(std::span<const GeneratedQuery> queries,
                                const TopicTable& passage_topics) {
  TopicTable out;
  for (const GeneratedQuery& q : queries) {
    const auto it = passage_topics.vectors.find(q.passage_id);
    if (it == passage_topics.vectors.end()) {
      throw std::invalid_argument("no topic vector for source passage " + q.passage_id +
                                  " of query " + q.query_id);
    }
    out.vectors[q.query_id] = it->second;
  }
  return out;
}

}  // namespace drift
