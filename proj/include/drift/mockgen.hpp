#pragma once

#include <cstdint>
#include <memory>
#include <string>

namespace drift {

// Local stand-ins for the generation and scoring services, used by tests and
// the demo subcommand. Both bind 127.0.0.1 on an ephemeral port and serve from
// a background thread until destroyed.

struct MockGenerationConfig {
  std::uint64_t seed = 0;
  int fail_first = 0;        // respond 500 to this many initial requests
  std::string expect_auth;   // when nonempty, require this bearer token
  std::string empty_for;     // prompts containing this get an empty completion
  std::string garbage_for;   // prompts containing this get a non-JSON body
};

// Answers chat-completion requests with a deterministic query built from
// words of the prompt's final passage block.
class MockGenerationServer {
 public:
  explicit MockGenerationServer(MockGenerationConfig config = {});
  ~MockGenerationServer();
  MockGenerationServer(const MockGenerationServer&) = delete;
  MockGenerationServer& operator=(const MockGenerationServer&) = delete;

  std::string base_url() const;
  std::size_t request_count() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct MockScoringConfig {
  int fail_first = 0;        // respond 500 to this many initial requests
  int short_reply_first = 0; // drop one score from this many initial replies
};

// Scores passages against the query by token overlap.
class MockScoringServer {
 public:
  explicit MockScoringServer(MockScoringConfig config = {});
  ~MockScoringServer();
  MockScoringServer(const MockScoringServer&) = delete;
  MockScoringServer& operator=(const MockScoringServer&) = delete;

  std::string base_url() const;
  std::size_t request_count() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace drift
