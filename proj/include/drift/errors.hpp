#pragma once

#include <stdexcept>
#include <string>

namespace drift {

struct EmptyTextError : std::runtime_error {
  explicit EmptyTextError(const std::string& what) : std::runtime_error(what) {}
};

struct DegenerateEmbeddingError : std::runtime_error {
  explicit DegenerateEmbeddingError(const std::string& what) : std::runtime_error(what) {}
};

struct MixedQueryError : std::runtime_error {
  explicit MixedQueryError(const std::string& what) : std::runtime_error(what) {}
};

struct MissingScoreError : std::runtime_error {
  MissingScoreError(const std::string& query_id, const std::string& passage_id)
      : std::runtime_error("missing teacher score for (" + query_id + ", " + passage_id + ")"),
        query_id(query_id),
        passage_id(passage_id) {}
  std::string query_id;
  std::string passage_id;
};

struct ServiceError : std::runtime_error {
  ServiceError(const std::string& what, int attempts)
      : std::runtime_error(what + " (after " + std::to_string(attempts) + " attempts)"),
        attempts(attempts) {}
  int attempts;
};

struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

struct ArityMismatchError : std::runtime_error {
  explicit ArityMismatchError(const std::string& what) : std::runtime_error(what) {}
};

struct InsufficientDataError : std::runtime_error {
  explicit InsufficientDataError(const std::string& what) : std::runtime_error(what) {}
};

struct LengthMismatchError : std::runtime_error {
  explicit LengthMismatchError(const std::string& what) : std::runtime_error(what) {}
};

struct NonFiniteLossError : std::runtime_error {
  NonFiniteLossError(const std::string& batch_id)
      : std::runtime_error("non-finite loss in batch " + batch_id), batch_id(batch_id) {}
  std::string batch_id;
};

struct EmptyRunError : std::runtime_error {
  explicit EmptyRunError(const std::string& what) : std::runtime_error(what) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace drift
