#include "drift/querygen.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "httplib.h"

#include "drift/errors.hpp"
#include "drift/io.hpp"

using json = nlohmann::json;

namespace drift {

std::string_view to_string(QueryType type) {
  switch (type) {
    case QueryType::question: return "question";
    case QueryType::claim: return "claim";
    case QueryType::title: return "title";
    case QueryType::keywords: return "keywords";
    case QueryType::user_zero_shot: return "user_zero_shot";
    case QueryType::user_few_shot: return "user_few_shot";
  }
  return "question";
}

QueryType parse_query_type(std::string_view name) {
  for (const QueryType t : kAllQueryTypes) {
    if (to_string(t) == name) return t;
  }
  throw ParseError("unknown query type '" + std::string(name) + "'");
}

std::size_t count_words(std::string_view text) {
  std::size_t words = 0;
  bool in_word = false;
  for (const char c : text) {
    const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!space && !in_word) ++words;
    in_word = !space;
  }
  return words;
}

namespace {

PromptTemplate neutral_template(QueryType type) {
  PromptTemplate t;
  switch (type) {
    case QueryType::question:
      t.instruction =
          "Write one question, in under 20 words, that the passage below answers. "
          "Respond with the question only.";
      t.examples = {{"The first placeholder passage describes a process.",
                     "what does the first placeholder process do"},
                    {"The second placeholder passage defines a term.",
                     "what is the second placeholder term"}};
      break;
    case QueryType::claim:
      t.instruction =
          "Write one factual claim, in under 20 words, that the passage below supports. "
          "Respond with the claim only.";
      t.examples = {{"The first placeholder passage describes a process.",
                     "the first placeholder process works in stages"}};
      break;
    case QueryType::title:
      t.instruction =
          "Write a title, in under 20 words, for the passage below. "
          "Respond with the title only.";
      t.examples = {{"The first placeholder passage describes a process.",
                     "overview of the first placeholder process"}};
      break;
    case QueryType::keywords:
      t.instruction =
          "Write a short keyword search string, in under 20 words, for which the passage "
          "below is relevant. Respond with the keywords only.";
      t.examples = {{"The first placeholder passage describes a process.",
                     "placeholder process stages"}};
      break;
    case QueryType::user_zero_shot:
      t.instruction =
          "Write one natural web search query, in under 20 words, for which the passage "
          "below is relevant. Respond with the query only.";
      break;
    case QueryType::user_few_shot:
      t.instruction =
          "Write one natural web search query, in under 20 words, for which the passage "
          "below is relevant. Respond with the query only.";
      t.examples = {{"The first placeholder passage describes a process.",
                     "how placeholder process works"},
                    {"The second placeholder passage defines a term.",
                     "placeholder term meaning"}};
      break;
  }
  return t;
}

}  // namespace

PromptSet PromptSet::builtin() {
  PromptSet set;
  for (const QueryType t : kAllQueryTypes) set.templates_[t] = neutral_template(t);
  return set;
}

void PromptSet::load_overrides(const std::filesystem::path& dir) {
  for (const QueryType t : kAllQueryTypes) {
    const std::string name(to_string(t));
    const auto instruction_path = dir / (name + ".txt");
    if (std::filesystem::exists(instruction_path)) {
      std::string text = read_file(instruction_path);
      while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.pop_back();
      templates_[t].instruction = text;
    }
    const auto examples_path = dir / (name + ".examples.jsonl");
    if (std::filesystem::exists(examples_path)) {
      std::vector<PromptExample> examples;
      for_each_line(examples_path, [&](const std::string& line, std::size_t lineno) {
        json rec;
        try {
          rec = json::parse(line);
        } catch (const json::parse_error& e) {
          throw ParseError(examples_path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        examples.push_back({rec.at("passage").get<std::string>(), rec.at("query").get<std::string>()});
      });
      if (examples.size() > 3) {
        throw ParseError(examples_path.string() + ": at most 3 examples are allowed");
      }
      if (t == QueryType::user_zero_shot && !examples.empty()) {
        throw ParseError(examples_path.string() + ": zero-shot user queries carry no examples");
      }
      templates_[t].examples = std::move(examples);
    }
  }
}

const PromptTemplate& PromptSet::get(QueryType type) const { return templates_.at(type); }

std::string PromptSet::render(QueryType type, std::string_view passage_text) const {
  const PromptTemplate& t = get(type);
  std::string out = t.instruction;
  out += "\n";
  for (const PromptExample& ex : t.examples) {
    out += "\nPassage: " + ex.passage + "\nQuery: " + ex.query + "\n";
  }
  out += "\nPassage: ";
  out += passage_text;
  out += "\nQuery:";
  return out;
}

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

bool iequals_prefix(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[i])) !=
        std::tolower(static_cast<unsigned char>(prefix[i]))) {
      return false;
    }
  }
  return true;
}

}  // namespace

std::string extract_query_text(const std::string& content) {
  std::istringstream lines(content);
  std::string line;
  while (std::getline(lines, line)) {
    std::string text = trim(line);
    if (iequals_prefix(text, "query:")) text = trim(std::string_view(text).substr(6));
    if (text.size() >= 2 && text.front() == '"' && text.back() == '"') {
      text = trim(std::string_view(text).substr(1, text.size() - 2));
    }
    if (!text.empty()) return text;
  }
  return "";
}

namespace {

std::string build_request_body(const GenerationEndpoint& endpoint, const std::string& prompt) {
  json request;
  request["model"] = endpoint.model;
  request["messages"] = json::array({json{{"role", "user"}, {"content", prompt}}});
  request["max_tokens"] = endpoint.max_tokens;
  request["temperature"] = endpoint.temperature;
  return request.dump();
}

}  // namespace

GeneratedQuery generate_one(const GenerationEndpoint& endpoint, const Passage& passage,
                            QueryType type, const PromptSet& prompts,
                            TranscriptEntry* transcript) {
  const std::string prompt = prompts.render(type, passage.text);
  const std::string body = build_request_body(endpoint, prompt);
  if (transcript != nullptr) {
    transcript->passage_id = passage.id;
    transcript->request = body;
    transcript->ok = false;
  }

  std::string last_error;
  std::string content;
  bool got_response = false;
  for (int attempt = 1; attempt <= endpoint.max_attempts; ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(std::chrono::milliseconds(endpoint.retry_base_ms << (attempt - 2)));
    }
    httplib::Client client(endpoint.base_url);
    client.set_connection_timeout(10);
    client.set_read_timeout(120);
    httplib::Headers headers;
    if (!endpoint.auth_token.empty()) {
      headers.emplace("Authorization", "Bearer " + endpoint.auth_token);
    }
    auto res = client.Post(endpoint.path, headers, body, "application/json");
    if (!res) {
      last_error = "transport error " + httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP status " + std::to_string(res->status);
      continue;
    }
    try {
      const json reply = json::parse(res->body);
      content = reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
      if (transcript != nullptr) transcript->response = res->body;
      throw ParseError("malformed completion for passage " + passage.id + ": " + e.what());
    }
    if (transcript != nullptr) {
      transcript->response = res->body;
      transcript->ok = true;
    }
    got_response = true;
    break;
  }
  if (!got_response) {
    if (transcript != nullptr) transcript->response = last_error;
    throw ServiceError("generation request for passage " + passage.id + " failed: " + last_error,
                       endpoint.max_attempts);
  }

  GeneratedQuery q;
  q.passage_id = passage.id;
  q.query_type = type;
  q.query_id = "q-" + std::string(to_string(type)) + "-" + passage.id;
  q.text = extract_query_text(content);
  if (q.text.empty()) {
    throw ParseError("no extractable query in completion for passage " + passage.id);
  }
  q.word_count = count_words(q.text);
  return q;
}

GenerationOutcome generate_queries(const GenerationEndpoint& endpoint, const Corpus& passages,
                                   QueryType type, const PromptSet& prompts) {
  const std::size_t n = passages.passages.size();
  GenerationOutcome outcome;
  outcome.transcript.resize(n);

  struct Slot {
    bool ok = false;
    GeneratedQuery query;
    GenerationFailure failure;
  };
  std::vector<Slot> slots(n);

  const int workers =
      std::max(1, std::min<int>(endpoint.concurrency, static_cast<int>(n == 0 ? 1 : n)));
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) break;
      const Passage& p = passages.passages[i];
      try {
        slots[i].query = generate_one(endpoint, p, type, prompts, &outcome.transcript[i]);
        slots[i].ok = true;
      } catch (const ServiceError& e) {
        slots[i].failure = {p.id, e.what(), true};
      } catch (const ParseError& e) {
        slots[i].failure = {p.id, e.what(), false};
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  for (std::thread& t : pool) t.join();

  for (Slot& slot : slots) {
    if (slot.ok) {
      outcome.queries.push_back(std::move(slot.query));
    } else {
      outcome.failures.push_back(std::move(slot.failure));
    }
  }
  return outcome;
}

ValidationResult validate_query(const GeneratedQuery& q, std::string_view source_normalized_text) {
  if (trim(q.text).empty()) return {false, RejectReason::empty};
  if (count_words(q.text) > 30) return {false, RejectReason::too_long};
  if (normalize_text(q.text) == source_normalized_text) return {false, RejectReason::copy};
  return {true, RejectReason::none};
}

std::string_view to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::none: return "none";
    case RejectReason::empty: return "empty";
    case RejectReason::too_long: return "too_long";
    case RejectReason::copy: return "copy";
  }
  return "none";
}

std::vector<GeneratedQuery> load_queries(const std::filesystem::path& path) {
  std::vector<GeneratedQuery> queries;
  for_each_line(path, [&](const std::string& line, std::size_t lineno) {
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad JSON: " + e.what());
    }
    GeneratedQuery q;
    q.query_id = rec.at("query_id").get<std::string>();
    q.passage_id = rec.at("passage_id").get<std::string>();
    q.query_type = parse_query_type(rec.at("query_type").get<std::string>());
    q.text = rec.at("text").get<std::string>();
    q.word_count = rec.contains("words") ? rec["words"].get<std::size_t>() : count_words(q.text);
    queries.push_back(std::move(q));
  });
  return queries;
}

void save_queries(const std::vector<GeneratedQuery>& queries, const std::filesystem::path& path) {
  std::ostringstream out;
  for (const GeneratedQuery& q : queries) {
    out << json{{"query_id", q.query_id},
                {"passage_id", q.passage_id},
                {"query_type", std::string(to_string(q.query_type))},
                {"text", q.text},
                {"words", q.word_count}}
               .dump()
        << "\n";
  }
  atomic_write_file(path, out.str());
}

void save_transcript(const std::vector<TranscriptEntry>& transcript,
                     const std::filesystem::path& path) {
  std::ostringstream out;
  for (const TranscriptEntry& t : transcript) {
    out << json{{"passage_id", t.passage_id},
                {"request", t.request},
                {"response", t.response},
                {"ok", t.ok}}
               .dump()
        << "\n";
  }
  atomic_write_file(path, out.str());
}

}  // namespace drift
