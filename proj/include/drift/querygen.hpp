#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "drift/corpus.hpp"

namespace drift {

enum class QueryType { question, claim, title, keywords, user_zero_shot, user_few_shot };

constexpr std::array<QueryType, 6> kAllQueryTypes = {
    QueryType::question,       QueryType::claim,         QueryType::title,
    QueryType::keywords,       QueryType::user_zero_shot, QueryType::user_few_shot};

std::string_view to_string(QueryType type);
QueryType parse_query_type(std::string_view name);  // ParseError on unknown

struct GeneratedQuery {
  std::string query_id;
  std::string passage_id;  // source positive
  QueryType query_type = QueryType::question;
  std::string text;
  std::size_t word_count = 0;
};

std::size_t count_words(std::string_view text);

struct PromptExample {
  std::string passage;
  std::string query;
};

struct PromptTemplate {
  std::string instruction;
  std::vector<PromptExample> examples;  // at most 3
};

// Editable prompt assets with slots for up to three examples. The built-in
// set ships neutral placeholder examples; a directory of overrides replaces
// individual types (<type>.txt for the instruction, <type>.examples.jsonl
// for examples). Zero-shot user queries carry no examples.
class PromptSet {
 public:
  static PromptSet builtin();
  void load_overrides(const std::filesystem::path& dir);
  const PromptTemplate& get(QueryType type) const;
  std::string render(QueryType type, std::string_view passage_text) const;

 private:
  std::map<QueryType, PromptTemplate> templates_;
};

struct GenerationEndpoint {
  std::string base_url;  // e.g. http://127.0.0.1:8080
  std::string path = "/v1/chat/completions";
  std::string model = "default";
  std::string auth_token;  // sent as a Bearer header when nonempty
  int max_tokens = 64;
  double temperature = 0.0;
  int max_attempts = 3;
  int retry_base_ms = 100;
  int concurrency = 8;
};

struct GenerationFailure {
  std::string passage_id;
  std::string error;
  bool service_error = false;  // vs parse error
};

struct TranscriptEntry {
  std::string passage_id;
  std::string request;
  std::string response;  // raw body, or the error string on failure
  bool ok = false;
};

struct GenerationOutcome {
  std::vector<GeneratedQuery> queries;       // input order, non-erroring passages only
  std::vector<GenerationFailure> failures;   // input order
  std::vector<TranscriptEntry> transcript;   // every request/response, input order
};

// Single query string from a completion: first non-empty line, a leading
// "Query:" prefix stripped, surrounding quotes removed; empty when nothing
// usable remains. Exposed for direct testing.
std::string extract_query_text(const std::string& content);

// One chat-completion request; throws ServiceError after the retry budget or
// ParseError when no query can be extracted from the response.
GeneratedQuery generate_one(const GenerationEndpoint& endpoint, const Passage& passage,
                            QueryType type, const PromptSet& prompts,
                            TranscriptEntry* transcript = nullptr);

// One request per passage with bounded concurrent in-flight requests;
// per-passage errors are isolated and recorded, output order matches input
// order regardless of completion order.
GenerationOutcome generate_queries(const GenerationEndpoint& endpoint, const Corpus& passages,
                                   QueryType type, const PromptSet& prompts);

enum class RejectReason { none, empty, too_long, copy };

struct ValidationResult {
  bool accepted = false;
  RejectReason reason = RejectReason::none;
};

// Rejects empty queries, degenerate run-ons over 30 words, and copies of the
// source passage.
ValidationResult validate_query(const GeneratedQuery& q, std::string_view source_normalized_text);

std::string_view to_string(RejectReason reason);

// Query file: one JSON record per line {query_id, passage_id, query_type,
// text, words}.
std::vector<GeneratedQuery> load_queries(const std::filesystem::path& path);
void save_queries(const std::vector<GeneratedQuery>& queries, const std::filesystem::path& path);

void save_transcript(const std::vector<TranscriptEntry>& transcript,
                     const std::filesystem::path& path);

}  // namespace drift
