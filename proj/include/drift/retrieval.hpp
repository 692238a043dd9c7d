#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "drift/corpus.hpp"
#include "drift/encoder.hpp"

namespace drift {

struct RankedEntry {
  std::string passage_id;
  double score = 0.0;
};

// Sorted by score descending, ties broken by ascending passage_id.
struct RankedList {
  std::string query_id;
  std::vector<RankedEntry> entries;
};

// query_id -> ranked list; std::map keeps iteration deterministic.
using Run = std::map<std::string, RankedList>;

struct Index {
  std::vector<std::string> ids;
  std::vector<Embedding> embeddings;
};

struct IndexBuildResult {
  Index index;
  std::vector<std::string> skipped_ids;  // passages the encoder rejected
};

// Encodes every passage once; skips passages that fail to featurize or
// produce a degenerate embedding, recording their ids.
IndexBuildResult build_index(const Corpus& corpus, const EncoderParams& params,
                             const EncoderConfig& config);

// Exhaustive scan over the whole index for the k highest-cosine passages.
RankedList top_k(const Index& index, const Embedding& query_embedding, std::size_t k,
                 const std::string& query_id = "");

// Truncates each list to its top `cap` entries and unions the passage ids,
// first-seen order. Ordering of the pooled set is deferred to teacher
// reranking. Throws MixedQueryError when the lists disagree on query_id.
std::vector<std::string> pool_candidates(std::span<const RankedList> lists, std::size_t cap);

// Run file: "query_id Q0 passage_id rank score tag" per line, rank from 1.
void save_run(const Run& run, const std::filesystem::path& path, const std::string& tag);
Run load_run(const std::filesystem::path& path);

// Index file: u64 passage count, u64 embed_dim, then per passage a u32 id
// length, the id bytes, and embed_dim little-endian doubles.
void save_index(const Index& index, const std::filesystem::path& path);
Index load_index(const std::filesystem::path& path);

}  // namespace drift
