#include "drift/corpus.hpp"

#include <algorithm>
#include <cstring>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "drift/errors.hpp"
#include "drift/io.hpp"
#include "drift/rng.hpp"

using json = nlohmann::json;

namespace drift {

namespace {

constexpr char32_t kReplacement = 0xFFFD;

// Decodes one UTF-8 code point starting at s[i]; advances i. Invalid bytes
// decode to U+FFFD one byte at a time.
char32_t decode_utf8(std::string_view s, std::size_t& i) {
  const unsigned char b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++i;
    return kReplacement;
  }
  if (i + static_cast<std::size_t>(len) > s.size()) {
    ++i;
    return kReplacement;
  }
  for (int k = 1; k < len; ++k) {
    const unsigned char bk = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
    if ((bk & 0xC0) != 0x80) {
      ++i;
      return kReplacement;
    }
    cp = (cp << 6) | (bk & 0x3F);
  }
  // Reject overlong encodings and surrogates.
  if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
      (cp >= 0xD800 && cp <= 0xDFFF) || cp > 0x10FFFF) {
    ++i;
    return kReplacement;
  }
  i += static_cast<std::size_t>(len);
  return cp;
}

void encode_utf8(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool is_space_cp(char32_t cp) {
  switch (cp) {
    case 0x09:
    case 0x0A:
    case 0x0B:
    case 0x0C:
    case 0x0D:
    case 0x20:
    case 0x85:    // NEL
    case 0xA0:    // NBSP
    case 0x1680:  // ogham space
    case 0x2028:  // line separator
    case 0x2029:  // paragraph separator
    case 0x202F:  // narrow NBSP
    case 0x205F:  // medium mathematical space
    case 0x3000:  // ideographic space
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;  // en/em/thin/hair spaces
  }
}

// Appends the compatibility-folded, case-folded form of cp.
void fold_codepoint(char32_t cp, std::u32string& out) {
  // Fullwidth ASCII first so the folds below apply to the mapped character.
  if (cp >= 0xFF01 && cp <= 0xFF5E) cp = cp - 0xFF01 + 0x21;

  if (cp >= 'A' && cp <= 'Z') {
    out.push_back(cp + 0x20);
    return;
  }
  if (cp < 0x80) {
    out.push_back(cp);
    return;
  }
  switch (cp) {
    case 0x00DF:  // sharp s
      out.append(U"ss");
      return;
    case 0x0130:  // I with dot above
      out.push_back(U'i');
      out.push_back(0x0307);
      return;
    case 0x0178:  // Y with diaeresis
      out.push_back(0x00FF);
      return;
    case 0x017F:  // long s
      out.push_back(U's');
      return;
    case 0x03C2:  // final sigma
      out.push_back(0x03C3);
      return;
    case 0xFB00:
      out.append(U"ff");
      return;
    case 0xFB01:
      out.append(U"fi");
      return;
    case 0xFB02:
      out.append(U"fl");
      return;
    case 0xFB03:
      out.append(U"ffi");
      return;
    case 0xFB04:
      out.append(U"ffl");
      return;
    default:
      break;
  }
  if (cp >= 0x00C0 && cp <= 0x00DE && cp != 0x00D7) {  // Latin-1 uppercase
    out.push_back(cp + 0x20);
    return;
  }
  if (cp >= 0x0100 && cp <= 0x0137) {  // Latin Extended-A, even = uppercase
    out.push_back((cp % 2 == 0) ? cp + 1 : cp);
    return;
  }
  if (cp >= 0x0139 && cp <= 0x0148) {  // odd = uppercase in this stretch
    out.push_back((cp % 2 == 1) ? cp + 1 : cp);
    return;
  }
  if (cp >= 0x014A && cp <= 0x0177) {
    out.push_back((cp % 2 == 0) ? cp + 1 : cp);
    return;
  }
  if (cp >= 0x0179 && cp <= 0x017E) {
    out.push_back((cp % 2 == 1) ? cp + 1 : cp);
    return;
  }
  if (cp >= 0x0391 && cp <= 0x03A9 && cp != 0x03A2) {  // Greek uppercase
    out.push_back(cp + 0x20);
    return;
  }
  if (cp >= 0x0400 && cp <= 0x040F) {  // Cyrillic Ѐ-Џ
    out.push_back(cp + 0x50);
    return;
  }
  if (cp >= 0x0410 && cp <= 0x042F) {  // Cyrillic А-Я
    out.push_back(cp + 0x20);
    return;
  }
  out.push_back(cp);
}

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 33;
  x *= 0xFF51AFD7ED558CCDULL;
  x ^= x >> 33;
  x *= 0xC4CEB9FE1A85EC53ULL;
  x ^= x >> 33;
  return x;
}

constexpr std::size_t kGram = 8;

std::uint64_t gram_hash(const char* p) {
  std::uint64_t x;
  std::memcpy(&x, p, kGram);
  return mix64(x);
}

}  // namespace

std::string normalize_text(std::string_view raw) {
  std::u32string folded;
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  std::size_t i = 0;
  while (i < raw.size()) {
    const char32_t cp = decode_utf8(raw, i);
    if (is_space_cp(cp)) {
      pending_space = true;
      continue;
    }
    folded.clear();
    fold_codepoint(cp, folded);
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    for (const char32_t f : folded) encode_utf8(f, out);
  }
  return out;
}

Passage make_passage(std::string id, std::string text) {
  Passage p;
  p.normalized_text = normalize_text(text);
  p.id = std::move(id);
  p.text = std::move(text);
  return p;
}

DedupResult dedup_corpus(const Corpus& corpus) {
  const std::size_t n = corpus.passages.size();

  // Group exact duplicates; the smallest id represents each text.
  std::unordered_map<std::string_view, std::uint32_t> rep_of_text;
  rep_of_text.reserve(n * 2);
  for (std::uint32_t i = 0; i < n; ++i) {
    const Passage& p = corpus.passages[i];
    auto [it, inserted] = rep_of_text.emplace(p.normalized_text, i);
    if (!inserted && p.id < corpus.passages[it->second].id) it->second = i;
  }

  struct UniqueText {
    std::string_view text;
    std::uint32_t rep;  // passage index of the representative
  };
  std::vector<UniqueText> uniques;
  uniques.reserve(rep_of_text.size());
  for (const auto& [text, rep] : rep_of_text) uniques.push_back({text, rep});
  std::sort(uniques.begin(), uniques.end(), [](const UniqueText& a, const UniqueText& b) {
    if (a.text.size() != b.text.size()) return a.text.size() > b.text.size();
    return a.text < b.text;
  });

  // Longest-first containment. A gram index over retained texts filters the
  // candidates to verify: a containment implies every gram of the candidate
  // occurs in the container, so probing a few grams and verifying against the
  // shortest posting list is exact.
  std::vector<std::uint32_t> retained_unique;          // indices into uniques
  std::vector<std::int64_t> container_of(uniques.size(), -1);  // index into uniques
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> gram_index;
  std::vector<std::uint32_t> probe_list;

  for (std::uint32_t u = 0; u < uniques.size(); ++u) {
    const std::string_view text = uniques[u].text;
    std::int64_t found = -1;
    if (text.size() < kGram) {
      for (const std::uint32_t r : retained_unique) {
        if (uniques[r].text.size() > text.size() &&
            uniques[r].text.find(text) != std::string_view::npos) {
          found = r;
          break;
        }
      }
    } else {
      probe_list.clear();
      const std::vector<std::uint32_t>* shortest = nullptr;
      bool impossible = false;
      const std::size_t last = text.size() - kGram;
      for (std::size_t off = 0;; off += 4) {
        if (off > last) off = last;
        const auto it = gram_index.find(gram_hash(text.data() + off));
        if (it == gram_index.end() || it->second.empty()) {
          impossible = true;
          break;
        }
        if (shortest == nullptr || it->second.size() < shortest->size()) shortest = &it->second;
        if (off == last) break;
      }
      if (!impossible && shortest != nullptr) {
        std::uint32_t prev = UINT32_MAX;
        for (const std::uint32_t r : *shortest) {
          if (r == prev) continue;  // posting lists repeat ids contiguously
          prev = r;
          if (uniques[r].text.size() > text.size() &&
              uniques[r].text.find(text) != std::string_view::npos) {
            found = r;
            break;
          }
        }
      }
    }
    if (found >= 0) {
      container_of[u] = found;
    } else {
      retained_unique.push_back(u);
      if (text.size() >= kGram) {
        for (std::size_t off = 0; off + kGram <= text.size(); ++off) {
          auto& list = gram_index[gram_hash(text.data() + off)];
          if (list.empty() || list.back() != u) list.push_back(u);
        }
      }
    }
  }

  // Map each original passage to kept / removed-with-retainer.
  std::unordered_map<std::string_view, std::uint32_t> unique_idx_of_text;
  unique_idx_of_text.reserve(uniques.size() * 2);
  for (std::uint32_t u = 0; u < uniques.size(); ++u) unique_idx_of_text.emplace(uniques[u].text, u);

  DedupResult result;
  result.corpus.dedup_applied = true;
  for (std::uint32_t i = 0; i < n; ++i) {
    const Passage& p = corpus.passages[i];
    const std::uint32_t u = unique_idx_of_text.at(p.normalized_text);
    if (container_of[u] < 0) {
      if (uniques[u].rep == i) {
        result.corpus.passages.push_back(p);
      } else {
        result.removed.push_back({p.id, corpus.passages[uniques[u].rep].id});
      }
    } else {
      const std::uint32_t c = static_cast<std::uint32_t>(container_of[u]);
      result.removed.push_back({p.id, corpus.passages[uniques[c].rep].id});
    }
  }
  return result;
}

Corpus sample_passages(const Corpus& corpus, std::size_t n, std::uint64_t seed) {
  if (!corpus.dedup_applied) {
    throw std::invalid_argument("sample_passages requires a deduplicated corpus");
  }
  const std::size_t total = corpus.passages.size();
  const std::size_t k = std::min(n, total);
  std::vector<std::uint32_t> idx(total);
  for (std::uint32_t i = 0; i < total; ++i) idx[i] = i;
  Rng rng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform_index(total - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  Corpus out;
  out.dedup_applied = true;
  out.passages.reserve(k);
  for (const std::uint32_t i : idx) out.passages.push_back(corpus.passages[i]);
  return out;
}

Corpus load_corpus(const std::filesystem::path& path) {
  Corpus corpus;
  std::unordered_set<std::string> seen;
  for_each_line(path, [&](const std::string& line, std::size_t lineno) {
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad JSON: " + e.what());
    }
    if (!rec.contains("id") || !rec.contains("text")) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": record needs id and text");
    }
    std::string id = rec["id"].get<std::string>();
    if (id.empty()) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": empty id");
    }
    if (!seen.insert(id).second) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": duplicate id " + id);
    }
    corpus.passages.push_back(make_passage(std::move(id), rec["text"].get<std::string>()));
  });
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ostringstream out;
  for (const Passage& p : corpus.passages) {
    out << json{{"id", p.id}, {"text", p.text}}.dump() << "\n";
  }
  atomic_write_file(path, out.str());
}

void save_removal_report(const std::vector<RemovalRecord>& removed,
                         const std::filesystem::path& path) {
  std::ostringstream out;
  for (const RemovalRecord& r : removed) {
    out << json{{"removed", r.removed_id}, {"retained_by", r.retained_by}}.dump() << "\n";
  }
  atomic_write_file(path, out.str());
}

}  // namespace drift
