#include "drift/mockgen.hpp"

#include <atomic>
#include <chrono>
#include <set>
#include <sstream>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "httplib.h"

#include "drift/rng.hpp"

using json = nlohmann::json;

namespace drift {

namespace {

std::vector<std::string> split_words(const std::string& text) {
  std::istringstream ss(text);
  std::vector<std::string> words;
  std::string w;
  while (ss >> w) words.push_back(w);
  return words;
}

// The prompt ends with "...\nPassage: <text>\nQuery:"; pull out <text>.
std::string final_passage_block(const std::string& prompt) {
  const std::size_t query_at = prompt.rfind("\nQuery:");
  if (query_at == std::string::npos) return "";
  const std::size_t passage_at = prompt.rfind("\nPassage: ", query_at);
  if (passage_at == std::string::npos) return "";
  const std::size_t begin = passage_at + 10;
  return prompt.substr(begin, query_at - begin);
}

struct ServerState {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<std::size_t> requests{0};

  void start() {
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    while (!server.is_running()) std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }

  ~ServerState() {
    server.stop();
    if (thread.joinable()) thread.join();
  }
};

}  // namespace

struct MockGenerationServer::Impl {
  MockGenerationConfig config;
  ServerState state;
};

MockGenerationServer::MockGenerationServer(MockGenerationConfig config)
    : impl_(std::make_unique<Impl>()) {
  impl_->config = std::move(config);
  Impl* impl = impl_.get();
  impl->state.server.Post("/v1/chat/completions",
                          [impl](const httplib::Request& req, httplib::Response& res) {
    const std::size_t n = ++impl->state.requests;
    const MockGenerationConfig& cfg = impl->config;
    if (n <= static_cast<std::size_t>(cfg.fail_first)) {
      res.status = 500;
      res.set_content("{\"error\":\"synthetic outage\"}", "application/json");
      return;
    }
    if (!cfg.expect_auth.empty() &&
        req.get_header_value("Authorization") != "Bearer " + cfg.expect_auth) {
      res.status = 401;
      res.set_content("{\"error\":\"bad token\"}", "application/json");
      return;
    }
    std::string prompt;
    try {
      const json body = json::parse(req.body);
      prompt = body.at("messages").at(0).at("content").get<std::string>();
    } catch (const json::exception&) {
      res.status = 400;
      res.set_content("{\"error\":\"bad request\"}", "application/json");
      return;
    }
    if (!cfg.garbage_for.empty() && prompt.find(cfg.garbage_for) != std::string::npos) {
      res.set_content("not json at all", "text/plain");
      return;
    }
    std::string content;
    if (cfg.empty_for.empty() || prompt.find(cfg.empty_for) == std::string::npos) {
      const std::vector<std::string> words = split_words(final_passage_block(prompt));
      if (!words.empty()) {
        // Word choice is a pure function of (seed, prompt) so reruns agree.
        Rng rng(fnv1a64(prompt, cfg.seed ^ 1469598103934665603ULL));
        const std::size_t want = std::min<std::size_t>(words.size(), 3 + rng.uniform_index(4));
        std::set<std::size_t> picked;
        while (picked.size() < want) picked.insert(rng.uniform_index(words.size()));
        std::string q;
        for (const std::size_t i : picked) {
          if (!q.empty()) q += " ";
          q += words[i];
        }
        content = "Query: " + q;
      }
    }
    const json reply = {
        {"choices", json::array({json{{"message", json{{"role", "assistant"},
                                                       {"content", content}}}}})}};
    res.set_content(reply.dump(), "application/json");
  });
  impl->state.start();
}

MockGenerationServer::~MockGenerationServer() = default;

std::string MockGenerationServer::base_url() const {
  return "http://127.0.0.1:" + std::to_string(impl_->state.port);
}

std::size_t MockGenerationServer::request_count() const { return impl_->state.requests.load(); }

struct MockScoringServer::Impl {
  MockScoringConfig config;
  ServerState state;
};

MockScoringServer::MockScoringServer(MockScoringConfig config)
    : impl_(std::make_unique<Impl>()) {
  impl_->config = config;
  Impl* impl = impl_.get();
  impl->state.server.Post("/score", [impl](const httplib::Request& req, httplib::Response& res) {
    const std::size_t n = ++impl->state.requests;
    const MockScoringConfig& cfg = impl->config;
    if (n <= static_cast<std::size_t>(cfg.fail_first)) {
      res.status = 500;
      res.set_content("{\"error\":\"synthetic outage\"}", "application/json");
      return;
    }
    std::string query;
    std::vector<std::string> passages;
    try {
      const json body = json::parse(req.body);
      query = body.at("query").get<std::string>();
      passages = body.at("passages").get<std::vector<std::string>>();
    } catch (const json::exception&) {
      res.status = 400;
      res.set_content("{\"error\":\"bad request\"}", "application/json");
      return;
    }
    const std::vector<std::string> query_words = split_words(query);
    const std::set<std::string> query_set(query_words.begin(), query_words.end());
    std::vector<double> scores;
    scores.reserve(passages.size());
    for (const std::string& p : passages) {
      std::size_t hits = 0;
      for (const std::string& w : split_words(p)) hits += query_set.count(w);
      scores.push_back(static_cast<double>(hits) /
                       static_cast<double>(std::max<std::size_t>(1, query_words.size())));
    }
    if (n <= static_cast<std::size_t>(cfg.short_reply_first) && !scores.empty()) {
      scores.pop_back();
    }
    res.set_content(json{{"scores", scores}}.dump(), "application/json");
  });
  impl->state.start();
}

MockScoringServer::~MockScoringServer() = default;

std::string MockScoringServer::base_url() const {
  return "http://127.0.0.1:" + std::to_string(impl_->state.port);
}

std::size_t MockScoringServer::request_count() const { return impl_->state.requests.load(); }

}  // namespace drift
