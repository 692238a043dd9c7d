#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace drift {

struct Passage {
  std::string id;
  std::string text;
  std::string normalized_text;
};

struct Corpus {
  std::vector<Passage> passages;
  bool dedup_applied = false;
};

struct RemovalRecord {
  std::string removed_id;
  std::string retained_by;
};

struct DedupResult {
  Corpus corpus;
  std::vector<RemovalRecord> removed;
};

// Compatibility-normalizes Unicode, case-folds, collapses whitespace runs to
// single spaces and trims. Covers ASCII, Latin-1, Latin Extended-A, Greek and
// Cyrillic letters, common ligatures and fullwidth forms, and the Unicode
// whitespace set; other code points pass through unchanged.
std::string normalize_text(std::string_view raw);

Passage make_passage(std::string id, std::string text);

// Removes every passage whose normalized text is a substring (proper or equal)
// of another retained passage's normalized text. Among exact duplicates the
// passage with the smallest id is retained. Input order is preserved.
DedupResult dedup_corpus(const Corpus& corpus);

// Uniform sample without replacement of min(n, |corpus|) passages, original
// order preserved. Deterministic for a fixed seed. Requires a deduplicated
// corpus.
Corpus sample_passages(const Corpus& corpus, std::size_t n, std::uint64_t seed);

// Corpus file: one JSON record per line with fields {id, text}, UTF-8.
// normalized_text is derived on load.
Corpus load_corpus(const std::filesystem::path& path);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

// Removal report: one JSON record per line {removed, retained_by}.
void save_removal_report(const std::vector<RemovalRecord>& removed,
                         const std::filesystem::path& path);

}  // namespace drift
