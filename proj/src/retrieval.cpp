#include "drift/retrieval.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <sstream>
#include <unordered_set>

#include "drift/errors.hpp"
#include "drift/io.hpp"

namespace drift {

namespace {

bool entry_before(const RankedEntry& a, const RankedEntry& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.passage_id < b.passage_id;
}

}  // namespace

IndexBuildResult build_index(const Corpus& corpus, const EncoderParams& params,
                             const EncoderConfig& config) {
  IndexBuildResult result;
  result.index.ids.reserve(corpus.passages.size());
  result.index.embeddings.reserve(corpus.passages.size());
  for (const Passage& p : corpus.passages) {
    try {
      SparseFeatures features = featurize(p.normalized_text, config);
      result.index.embeddings.push_back(encode(params, features));
      result.index.ids.push_back(p.id);
    } catch (const EmptyTextError&) {
      result.skipped_ids.push_back(p.id);
    } catch (const DegenerateEmbeddingError&) {
      result.skipped_ids.push_back(p.id);
    }
  }
  return result;
}

RankedList top_k(const Index& index, const Embedding& query_embedding, std::size_t k,
                 const std::string& query_id) {
  RankedList list;
  list.query_id = query_id;
  list.entries.reserve(index.ids.size());
  for (std::size_t i = 0; i < index.ids.size(); ++i) {
    list.entries.push_back({index.ids[i], cosine(query_embedding, index.embeddings[i])});
  }
  const std::size_t keep = std::min(k, list.entries.size());
  std::partial_sort(list.entries.begin(), list.entries.begin() + keep, list.entries.end(),
                    entry_before);
  list.entries.resize(keep);
  return list;
}

std::vector<std::string> pool_candidates(std::span<const RankedList> lists, std::size_t cap) {
  std::vector<std::string> pooled;
  std::unordered_set<std::string_view> seen;
  const std::string* qid = nullptr;
  for (const RankedList& list : lists) {
    if (qid == nullptr) {
      qid = &list.query_id;
    } else if (list.query_id != *qid) {
      throw MixedQueryError("pool_candidates got lists for '" + *qid + "' and '" + list.query_id +
                            "'");
    }
    const std::size_t take = std::min(cap, list.entries.size());
    for (std::size_t i = 0; i < take; ++i) {
      const std::string& pid = list.entries[i].passage_id;
      if (seen.insert(pid).second) pooled.push_back(pid);
    }
  }
  return pooled;
}

void save_run(const Run& run, const std::filesystem::path& path, const std::string& tag) {
  std::ostringstream out;
  char score_buf[64];
  for (const auto& [qid, list] : run) {
    for (std::size_t i = 0; i < list.entries.size(); ++i) {
      std::snprintf(score_buf, sizeof(score_buf), "%.9f", list.entries[i].score);
      out << qid << " Q0 " << list.entries[i].passage_id << " " << (i + 1) << " " << score_buf
          << " " << tag << "\n";
    }
  }
  atomic_write_file(path, out.str());
}

Run load_run(const std::filesystem::path& path) {
  Run run;
  for_each_line(path, [&](const std::string& line, std::size_t lineno) {
    std::istringstream ss(line);
    std::string qid, q0, pid, tag;
    std::size_t rank = 0;
    double score = 0.0;
    if (!(ss >> qid >> q0 >> pid >> rank >> score >> tag)) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad run line");
    }
    RankedList& list = run[qid];
    list.query_id = qid;
    list.entries.push_back({pid, score});
  });
  for (auto& [qid, list] : run) {
    if (!std::is_sorted(list.entries.begin(), list.entries.end(), entry_before)) {
      std::sort(list.entries.begin(), list.entries.end(), entry_before);
    }
  }
  return run;
}

namespace {

void put_u64_le(std::string& out, std::uint64_t v) {
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
}

void put_u32_le(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
}

std::uint64_t get_u64_le(const std::string& data, std::size_t off) {
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[off + std::size_t(k)])) << (8 * k);
  }
  return v;
}

std::uint32_t get_u32_le(const std::string& data, std::size_t off) {
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[off + std::size_t(k)])) << (8 * k);
  }
  return v;
}

}  // namespace

void save_index(const Index& index, const std::filesystem::path& path) {
  std::string out;
  const std::size_t dim = index.embeddings.empty() ? 0 : index.embeddings.front().v.size();
  put_u64_le(out, index.ids.size());
  put_u64_le(out, dim);
  for (std::size_t i = 0; i < index.ids.size(); ++i) {
    put_u32_le(out, static_cast<std::uint32_t>(index.ids[i].size()));
    out.append(index.ids[i]);
    for (const double x : index.embeddings[i].v) put_u64_le(out, std::bit_cast<std::uint64_t>(x));
  }
  atomic_write_file(path, out);
}

Index load_index(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  if (data.size() < 16) throw IoError("index " + path.string() + " truncated header");
  Index index;
  const std::uint64_t count = get_u64_le(data, 0);
  const std::uint64_t dim = get_u64_le(data, 8);
  std::size_t off = 16;
  for (std::uint64_t i = 0; i < count; ++i) {
    if (off + 4 > data.size()) throw IoError("index " + path.string() + " truncated id length");
    const std::uint32_t id_len = get_u32_le(data, off);
    off += 4;
    if (off + id_len + dim * 8 > data.size()) {
      throw IoError("index " + path.string() + " truncated record");
    }
    index.ids.push_back(data.substr(off, id_len));
    off += id_len;
    Embedding e;
    e.v.resize(dim);
    for (std::uint64_t j = 0; j < dim; ++j) {
      e.v[j] = std::bit_cast<double>(get_u64_le(data, off));
      off += 8;
    }
    index.embeddings.push_back(std::move(e));
  }
  return index;
}

}  // namespace drift
