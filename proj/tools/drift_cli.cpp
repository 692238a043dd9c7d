// Pipeline driver: one subcommand per stage plus an end-to-end synthetic
// demo. Usage errors exit 2, data errors exit 1 naming the failing stage.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"

#include "drift/corpus.hpp"
#include "drift/datagen.hpp"
#include "drift/encoder.hpp"
#include "drift/errors.hpp"
#include "drift/eval.hpp"
#include "drift/io.hpp"
#include "drift/losses.hpp"
#include "drift/mockgen.hpp"
#include "drift/querygen.hpp"
#include "drift/retrieval.hpp"
#include "drift/rng.hpp"
#include "drift/synthworld.hpp"
#include "drift/teacher.hpp"
#include "drift/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace drift;

namespace {

std::string g_stage = "drift";

constexpr std::size_t kGenerationSampleCap = 100000;

// Hash-gated stage idempotence: a completed stage re-runs only when its
// inputs, flags, or outputs changed, or when --force is given.
struct StageGate {
  std::string stage;
  std::string key;
  std::vector<fs::path> outputs;

  static StageGate make(std::string stage, const std::vector<fs::path>& inputs,
                        const std::string& flags, std::vector<fs::path> outputs) {
    std::string blob = stage + "\x1f" + flags;
    for (const fs::path& in : inputs) {
      blob += "\x1f";
      blob += file_content_hash(in);
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(blob)));
    return {std::move(stage), buf, std::move(outputs)};
  }

  fs::path stamp_path() const { return outputs.at(0).string() + ".stamp"; }

  bool up_to_date() const {
    if (!fs::exists(stamp_path())) return false;
    json stamp;
    try {
      stamp = json::parse(read_file(stamp_path()));
    } catch (...) {
      return false;
    }
    if (!stamp.contains("key") || stamp["key"] != key) return false;
    if (!stamp.contains("outputs")) return false;
    for (const fs::path& out : outputs) {
      const std::string name = out.filename().string();
      if (!stamp["outputs"].contains(name)) return false;
      if (!fs::exists(out)) return false;
      if (stamp["outputs"][name] != file_content_hash(out)) return false;
    }
    return true;
  }

  void stamp() const {
    json outs = json::object();
    for (const fs::path& out : outputs) {
      outs[out.filename().string()] = file_content_hash(out);
    }
    const json doc = {{"stage", stage}, {"key", key}, {"outputs", outs}};
    atomic_write_file(stamp_path(), doc.dump(2) + "\n");
  }
};

std::vector<double> parse_csv_doubles(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ParseError("bad number '" + item + "' in list '" + csv + "'");
    }
  }
  return out;
}

// "ndcg@10" -> ("ndcg", 10)
std::pair<std::string, std::size_t> parse_metric(const std::string& arg) {
  const std::size_t at = arg.find('@');
  if (at == std::string::npos) throw ParseError("metric must look like ndcg@10 or recall@100");
  const std::string name = arg.substr(0, at);
  if (name != "ndcg" && name != "recall") throw ParseError("unknown metric '" + name + "'");
  std::size_t k = 0;
  try {
    k = static_cast<std::size_t>(std::stoul(arg.substr(at + 1)));
  } catch (const std::exception&) {
    throw ParseError("bad cutoff in metric '" + arg + "'");
  }
  if (k == 0) throw ParseError("metric cutoff must be positive");
  return {name, k};
}

std::vector<EvalQuery> load_eval_queries(const fs::path& path) {
  std::vector<EvalQuery> queries;
  for_each_line(path, [&](const std::string& line, std::size_t lineno) {
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad JSON: " + e.what());
    }
    queries.push_back({rec.at("query_id").get<std::string>(), rec.at("text").get<std::string>()});
  });
  return queries;
}

void save_eval_queries(std::span<const EvalQuery> queries, const fs::path& path) {
  std::ostringstream out;
  for (const EvalQuery& q : queries) {
    out << json{{"query_id", q.query_id}, {"text", q.text}}.dump() << "\n";
  }
  atomic_write_file(path, out.str());
}

MetricReport load_metric_report(const fs::path& path) {
  const json doc = json::parse(read_file(path));
  MetricReport report;
  report.mean = doc.at("mean").get<double>();
  for (const auto& [qid, v] : doc.at("per_query").items()) {
    report.per_query[qid] = v.get<double>();
  }
  return report;
}

struct EncoderFlags {
  std::string checkpoint;
  std::uint32_t hash_dim = 2048;
  std::uint32_t embed_dim = 24;
  std::uint64_t seed = 42;

  void add_init_options(CLI::App* cmd) {
    cmd->add_option("--hash-dim", hash_dim, "feature hash buckets for a fresh encoder");
    cmd->add_option("--embed-dim", embed_dim, "embedding width for a fresh encoder");
  }

  // Loads the checkpoint when given, otherwise derives a fresh seeded
  // encoder from --seed.
  std::pair<EncoderParams, EncoderConfig> resolve() const {
    if (!checkpoint.empty()) {
      auto [params, hash_seed] = load_checkpoint(checkpoint);
      return {std::move(params), {params.hash_dim, params.embed_dim, hash_seed}};
    }
    const EncoderConfig config{hash_dim, embed_dim, derive_seed(seed, "hash")};
    return {init_params(config, derive_seed(seed, "init")), config};
  }
};

struct TrainFlags {
  double learning_rate = 2e-4;
  std::size_t batch_size = 256;
  std::size_t epochs = 30;
  double dev_fraction = 0.1;
  double tau_contrastive = 0.01;
  double tau_student = 0.05;
  double tau_teacher = 0.3;
  double contrastive_weight = 0.1;

  void add_options(CLI::App* cmd) {
    cmd->add_option("--lr", learning_rate, "learning rate");
    cmd->add_option("--batch-size", batch_size, "queries per batch");
    cmd->add_option("--epochs", epochs, "maximum training epochs");
    cmd->add_option("--dev-fraction", dev_fraction, "held-out dev fraction");
    cmd->add_option("--tau-contrastive", tau_contrastive, "contrastive softmax temperature");
    cmd->add_option("--tau-student", tau_student, "student distillation temperature");
    cmd->add_option("--tau-teacher", tau_teacher, "teacher distillation temperature");
    cmd->add_option("--contrastive-weight", contrastive_weight,
                    "contrastive term weight in the combined loss");
  }

  TrainConfig to_config(LossMode mode, std::uint64_t seed, double mask_threshold) const {
    TrainConfig config;
    config.learning_rate = learning_rate;
    config.batch_size = batch_size;
    config.max_epochs = epochs;
    config.dev_fraction = dev_fraction;
    config.seed = seed;
    config.loss_mode = mode;
    config.loss.tau_contrastive = tau_contrastive;
    config.loss.tau_student = tau_student;
    config.loss.tau_teacher = tau_teacher;
    config.loss.contrastive_weight = contrastive_weight;
    config.loss.mask_threshold = mask_threshold;
    return config;
  }
};

std::map<std::string, const Passage*> passages_by_id(const Corpus& corpus) {
  std::map<std::string, const Passage*> by_id;
  for (const Passage& p : corpus.passages) by_id[p.id] = &p;
  return by_id;
}

// ---- dedup ----------------------------------------------------------------

struct DedupOpts {
  std::string in, out, report;
  bool force = false;
};

void run_dedup(const DedupOpts& o) {
  std::vector<fs::path> outputs{o.out};
  if (!o.report.empty()) outputs.push_back(o.report);
  const StageGate gate = StageGate::make("dedup", {o.in}, "", outputs);
  if (!o.force && gate.up_to_date()) {
    std::cout << "dedup: up to date\n";
    return;
  }
  const Corpus corpus = load_corpus(o.in);
  const DedupResult result = dedup_corpus(corpus);
  save_corpus(result.corpus, o.out);
  if (!o.report.empty()) save_removal_report(result.removed, o.report);
  gate.stamp();
  std::cout << "dedup: kept " << result.corpus.passages.size() << " of "
            << corpus.passages.size() << " passages, removed " << result.removed.size() << "\n";
}

// ---- index ----------------------------------------------------------------

struct IndexOpts {
  std::string corpus, out, write_checkpoint;
  EncoderFlags encoder;
  bool force = false;
};

void run_index(const IndexOpts& o) {
  std::vector<fs::path> outputs{o.out};
  if (!o.write_checkpoint.empty()) outputs.push_back(o.write_checkpoint);
  std::vector<fs::path> inputs{o.corpus};
  if (!o.encoder.checkpoint.empty()) inputs.push_back(o.encoder.checkpoint);
  std::ostringstream flags;
  flags << o.encoder.hash_dim << "," << o.encoder.embed_dim << "," << o.encoder.seed;
  const StageGate gate = StageGate::make("index", inputs, flags.str(), outputs);
  if (!o.force && gate.up_to_date()) {
    std::cout << "index: up to date\n";
    return;
  }
  const Corpus corpus = load_corpus(o.corpus);
  const auto [params, config] = o.encoder.resolve();
  const IndexBuildResult built = build_index(corpus, params, config);
  save_index(built.index, o.out);
  if (!o.write_checkpoint.empty()) save_checkpoint(params, config.hash_seed, o.write_checkpoint);
  gate.stamp();
  std::cout << "index: embedded " << built.index.ids.size() << " passages, skipped "
            << built.skipped_ids.size() << "\n";
}

// ---- retrieve -------------------------------------------------------------

struct RetrieveOpts {
  std::string index, queries, checkpoint, out, tag = "drift";
  std::size_t k = 20;
  bool force = false;
};

void run_retrieve(const RetrieveOpts& o) {
  std::ostringstream flags;
  flags << o.k << "," << o.tag;
  const StageGate gate =
      StageGate::make("retrieve", {o.index, o.queries, o.checkpoint}, flags.str(), {o.out});
  if (!o.force && gate.up_to_date()) {
    std::cout << "retrieve: up to date\n";
    return;
  }
  const Index index = load_index(o.index);
  const auto [params, hash_seed] = load_checkpoint(o.checkpoint);
  const EncoderConfig config{params.hash_dim, params.embed_dim, hash_seed};
  const std::vector<EvalQuery> queries = load_eval_queries(o.queries);
  Run run;
  for (const EvalQuery& q : queries) {
    RankedList ranked;
    ranked.query_id = q.query_id;
    try {
      const Embedding e = encode(params, featurize(normalize_text(q.text), config));
      ranked = top_k(index, e, o.k, q.query_id);
    } catch (const EmptyTextError&) {
    } catch (const DegenerateEmbeddingError&) {
    }
    run[q.query_id] = std::move(ranked);
  }
  save_run(run, o.out, o.tag);
  gate.stamp();
  std::cout << "retrieve: wrote top-" << o.k << " lists for " << run.size() << " queries\n";
}

// ---- genqueries -----------------------------------------------------------

struct GenOpts {
  std::string corpus, out, transcript, prompts_dir, type = "all";
  std::string endpoint_url, model = "mock-generator", auth_token;
  std::size_t sample = 0;
  std::uint64_t seed = 42;
  int concurrency = 8;
  int max_attempts = 3;
  int retry_base_ms = 100;
  bool force = false;
};

void run_genqueries(const GenOpts& o) {
  std::vector<fs::path> outputs{o.out};
  if (!o.transcript.empty()) outputs.push_back(o.transcript);
  std::ostringstream flags;
  flags << o.type << "," << o.sample << "," << o.seed << "," << o.endpoint_url << "," << o.model;
  const StageGate gate = StageGate::make("genqueries", {o.corpus}, flags.str(), outputs);
  if (!o.force && gate.up_to_date()) {
    std::cout << "genqueries: up to date\n";
    return;
  }

  Corpus corpus = load_corpus(o.corpus);
  // The stage contract takes the deduplicated corpus as input; the file
  // format does not carry the flag.
  corpus.dedup_applied = true;
  const std::size_t want = o.sample > 0 ? o.sample : kGenerationSampleCap;
  const Corpus sources = sample_passages(corpus, want, derive_seed(o.seed, "sample"));

  std::vector<QueryType> types;
  if (o.type == "all") {
    types.assign(kAllQueryTypes.begin(), kAllQueryTypes.end());
  } else {
    types.push_back(parse_query_type(o.type));
  }

  PromptSet prompts = PromptSet::builtin();
  if (!o.prompts_dir.empty()) prompts.load_overrides(o.prompts_dir);

  GenerationEndpoint endpoint;
  endpoint.base_url = o.endpoint_url;
  endpoint.model = o.model;
  endpoint.auth_token = o.auth_token;
  endpoint.concurrency = o.concurrency;
  endpoint.max_attempts = o.max_attempts;
  endpoint.retry_base_ms = o.retry_base_ms;

  std::map<std::string, const Passage*> by_id = passages_by_id(sources);
  std::vector<GeneratedQuery> accepted;
  std::vector<TranscriptEntry> transcript;
  std::size_t generated = 0, failures = 0;
  std::map<RejectReason, std::size_t> rejected;
  for (const QueryType type : types) {
    GenerationOutcome outcome = generate_queries(endpoint, sources, type, prompts);
    generated += outcome.queries.size();
    failures += outcome.failures.size();
    for (GeneratedQuery& q : outcome.queries) {
      const ValidationResult verdict = validate_query(q, by_id.at(q.passage_id)->normalized_text);
      if (verdict.accepted) {
        accepted.push_back(std::move(q));
      } else {
        ++rejected[verdict.reason];
      }
    }
    transcript.insert(transcript.end(), std::make_move_iterator(outcome.transcript.begin()),
                      std::make_move_iterator(outcome.transcript.end()));
  }
  save_queries(accepted, o.out);
  if (!o.transcript.empty()) save_transcript(transcript, o.transcript);
  gate.stamp();
  std::cout << "genqueries: generated " << generated << ", accepted " << accepted.size()
            << ", rejected " << (generated - accepted.size()) << ", request failures " << failures
            << "\n";
}

// ---- teacher-score --------------------------------------------------------

struct ScoreOpts {
  std::string queries, run, corpus, teacher, out;
  double oracle_scale = 1.0;
  double noise_amplitude = 0.01;
  std::uint64_t seed = 42;
  int max_attempts = 3;
  bool force = false;
};

void run_teacher_score(const ScoreOpts& o) {
  std::ostringstream flags;
  flags << o.teacher << "," << o.oracle_scale << "," << o.noise_amplitude << "," << o.seed;
  std::vector<fs::path> inputs{o.queries, o.run};
  if (!o.corpus.empty()) inputs.push_back(o.corpus);
  const StageGate gate = StageGate::make("teacher-score", inputs, flags.str(), {o.out});
  if (!o.force && gate.up_to_date()) {
    std::cout << "teacher-score: up to date\n";
    return;
  }

  const std::vector<GeneratedQuery> queries = load_queries(o.queries);
  const Run run = load_run(o.run);
  Corpus corpus;
  if (!o.corpus.empty()) corpus = load_corpus(o.corpus);
  const std::map<std::string, const Passage*> by_id = passages_by_id(corpus);

  std::unique_ptr<Teacher> teacher;
  const std::size_t colon = o.teacher.find(':');
  const std::string kind = o.teacher.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : o.teacher.substr(colon + 1);
  if (kind == "file") {
    teacher = std::make_unique<FileTeacher>(load_scores(arg));
  } else if (kind == "oracle") {
    // The topic table must cover the queries too.
    teacher = std::make_unique<SyntheticOracleTeacher>(load_topic_table(arg), o.oracle_scale,
                                                       derive_seed(o.seed, "teacher-noise"),
                                                       o.noise_amplitude);
  } else if (kind == "remote") {
    teacher = std::make_unique<RemoteTeacher>(arg, o.max_attempts);
  } else {
    throw ParseError("teacher must be file:<scores>, oracle:<topics>, or remote:<url>");
  }

  TeacherScores scores;
  std::size_t scored = 0;
  for (const GeneratedQuery& q : queries) {
    const auto it = run.find(q.query_id);
    if (it == run.end()) continue;
    if (!stage1_filter(q, it->second)) continue;
    std::vector<Candidate> candidates;
    const std::size_t depth = std::min<std::size_t>(it->second.entries.size(), kCandidateDepth);
    for (std::size_t i = 0; i < depth; ++i) {
      const std::string& pid = it->second.entries[i].passage_id;
      std::string text;
      if (const auto pit = by_id.find(pid); pit != by_id.end()) text = pit->second->text;
      candidates.push_back({pid, std::move(text)});
    }
    const std::vector<double> raw = teacher->score(q.query_id, q.text, candidates);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      scores.set(q.query_id, candidates[i].passage_id, raw[i]);
    }
    ++scored;
  }
  save_scores(scores, o.out);
  gate.stamp();
  std::cout << "teacher-score: scored " << scored << " of " << queries.size()
            << " queries (stage-1 survivors)\n";
}

// ---- filter / build-train -------------------------------------------------

struct FilterOpts {
  std::string queries, run, out, report;
  std::vector<std::string> scores;
  std::string weights;
  double threshold = kDefaultMaskThreshold;
  bool force = false;
};

AssemblyResult run_assembly(const FilterOpts& o) {
  const std::vector<GeneratedQuery> queries = load_queries(o.queries);
  const Run run = load_run(o.run);
  std::vector<TeacherScores> tables;
  for (const std::string& path : o.scores) tables.push_back(load_scores(path));
  BlendConfig blend;
  if (o.weights.empty()) {
    blend.weights.assign(tables.size(), 1.0 / static_cast<double>(std::max<std::size_t>(1, tables.size())));
  } else {
    blend.weights = parse_csv_doubles(o.weights);
  }
  AssemblyInputs inputs;
  inputs.queries = queries;
  inputs.candidates = &run;
  inputs.raw_scores = tables;
  inputs.blend = std::move(blend);
  inputs.mask_threshold = o.threshold;
  return assemble_examples(inputs);
}

void run_filter(const FilterOpts& o) {
  std::vector<fs::path> inputs{o.queries, o.run};
  for (const std::string& s : o.scores) inputs.emplace_back(s);
  std::vector<fs::path> outputs{o.out};
  if (!o.report.empty()) outputs.push_back(o.report);
  const StageGate gate = StageGate::make("filter", inputs, o.weights, outputs);
  if (!o.force && gate.up_to_date()) {
    std::cout << "filter: up to date\n";
    return;
  }
  const AssemblyResult result = run_assembly(o);
  std::vector<GeneratedQuery> survivors;
  survivors.reserve(result.examples.size());
  for (const TrainingExample& ex : result.examples) survivors.push_back(ex.query);
  save_queries(survivors, o.out);
  if (!o.report.empty()) save_filter_report(result.report, o.report);
  gate.stamp();
  std::cout << "filter: " << result.report.total.generated << " generated, "
            << result.report.total.passed_stage1 << " passed stage 1, "
            << result.report.total.passed_stage2 << " passed stage 2 ("
            << result.report.stage2_ties << " ties)\n";
}

void run_build_train(const FilterOpts& o) {
  std::vector<fs::path> inputs{o.queries, o.run};
  for (const std::string& s : o.scores) inputs.emplace_back(s);
  std::ostringstream flags;
  flags << o.weights << "," << o.threshold;
  std::vector<fs::path> outputs{o.out};
  if (!o.report.empty()) outputs.push_back(o.report);
  const StageGate gate = StageGate::make("build-train", inputs, flags.str(), outputs);
  if (!o.force && gate.up_to_date()) {
    std::cout << "build-train: up to date\n";
    return;
  }
  const AssemblyResult result = run_assembly(o);
  save_examples(result.examples, o.out);
  if (!o.report.empty()) save_filter_report(result.report, o.report);
  gate.stamp();
  std::size_t masked = 0, negatives = 0;
  for (const TrainingExample& ex : result.examples) {
    negatives += ex.mask.size();
    for (const bool m : ex.mask) masked += m ? 1 : 0;
  }
  std::cout << "build-train: " << result.examples.size() << " examples, " << masked << " of "
            << negatives << " negatives masked at threshold " << o.threshold << "\n";
}

// ---- train ----------------------------------------------------------------

struct TrainOpts {
  std::string examples, corpus, out, trace, init_checkpoint, mode = "combined";
  std::uint64_t seed = 42;
  double mask_threshold = kDefaultMaskThreshold;
  EncoderFlags encoder;
  TrainFlags flags;
  bool force = false;
};

void run_train(const TrainOpts& o) {
  std::vector<fs::path> inputs{o.examples, o.corpus};
  if (!o.init_checkpoint.empty()) inputs.push_back(o.init_checkpoint);
  std::ostringstream fl;
  fl << o.mode << "," << o.seed << "," << o.flags.learning_rate << "," << o.flags.batch_size << ","
     << o.flags.epochs << "," << o.flags.dev_fraction << "," << o.flags.tau_contrastive << ","
     << o.flags.tau_student << "," << o.flags.tau_teacher << "," << o.flags.contrastive_weight
     << "," << o.encoder.hash_dim << "," << o.encoder.embed_dim;
  std::vector<fs::path> outputs{o.out};
  if (!o.trace.empty()) outputs.push_back(o.trace);
  const StageGate gate = StageGate::make("train", inputs, fl.str(), outputs);
  if (!o.force && gate.up_to_date()) {
    std::cout << "train: up to date\n";
    return;
  }

  const std::vector<TrainingExample> examples = load_examples(o.examples);
  const Corpus corpus = load_corpus(o.corpus);
  EncoderFlags enc = o.encoder;
  enc.checkpoint = o.init_checkpoint;
  enc.seed = o.seed;
  auto [params, config] = enc.resolve();
  const TrainConfig train_config =
      o.flags.to_config(parse_loss_mode(o.mode), o.seed, o.mask_threshold);
  const TrainResult result = train(train_config, examples, corpus, config, std::move(params));
  save_checkpoint(result.best.params, config.hash_seed, o.out);
  if (!o.trace.empty()) save_trace(result.trace, o.trace);
  gate.stamp();
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", result.best.dev_loss);
  std::cout << "train: best epoch " << result.best.epoch << " dev loss " << buf << " ("
            << o.mode << ")\n";
}

// ---- sweep ----------------------------------------------------------------

struct SweepOpts {
  std::string examples, corpus, eval_queries, qrels, out, json_out, mode = "combined";
  std::string thresholds = "0.0,0.2,0.4,0.6,0.8,1.0";
  std::string init_checkpoint;
  std::uint64_t seed = 42;
  EncoderFlags encoder;
  TrainFlags flags;
  bool force = false;
};

void run_sweep(const SweepOpts& o) {
  std::vector<fs::path> inputs{o.examples, o.corpus, o.eval_queries, o.qrels};
  if (!o.init_checkpoint.empty()) inputs.push_back(o.init_checkpoint);
  std::ostringstream fl;
  fl << o.thresholds << "," << o.mode << "," << o.seed << "," << o.flags.epochs << ","
     << o.flags.batch_size << "," << o.flags.learning_rate;
  std::vector<fs::path> outputs{o.out};
  if (!o.json_out.empty()) outputs.push_back(o.json_out);
  const StageGate gate = StageGate::make("sweep", inputs, fl.str(), outputs);
  if (!o.force && gate.up_to_date()) {
    std::cout << "sweep: up to date\n";
    return;
  }

  const std::vector<TrainingExample> examples = load_examples(o.examples);
  const Corpus corpus = load_corpus(o.corpus);
  const std::vector<EvalQuery> eval_queries = load_eval_queries(o.eval_queries);
  const Qrels qrels = load_qrels(o.qrels);
  EncoderFlags enc = o.encoder;
  enc.checkpoint = o.init_checkpoint;
  enc.seed = o.seed;
  const auto [params, config] = enc.resolve();
  const TrainConfig train_config =
      o.flags.to_config(parse_loss_mode(o.mode), o.seed, kDefaultMaskThreshold);

  SweepInputs sweep_inputs;
  sweep_inputs.examples = examples;
  sweep_inputs.corpus = &corpus;
  sweep_inputs.encoder_config = config;
  sweep_inputs.initial = &params;
  sweep_inputs.eval_queries = eval_queries;
  sweep_inputs.qrels = &qrels;
  const std::vector<double> thresholds = parse_csv_doubles(o.thresholds);
  const SweepResult result = threshold_sweep(train_config, sweep_inputs, thresholds);

  save_sweep(result, o.out);
  if (!o.json_out.empty()) {
    json series = {{"thresholds", json::array()},
                   {"dev_loss", json::array()},
                   {"ndcg10", json::array()},
                   {"recall100", json::array()},
                   {"errors", json::array()}};
    for (const SweepRow& row : result.rows) {
      series["thresholds"].push_back(row.threshold);
      series["dev_loss"].push_back(row.dev_loss);
      series["ndcg10"].push_back(row.ndcg10);
      series["recall100"].push_back(row.recall100);
      series["errors"].push_back(row.error);
    }
    atomic_write_file(o.json_out, series.dump(2) + "\n");
  }
  gate.stamp();
  std::cout << format_sweep(result);
}

// ---- evaluate -------------------------------------------------------------

struct EvalOpts {
  std::string run, qrels, metric = "ndcg@10", out;
  bool force = false;
};

void run_evaluate(const EvalOpts& o) {
  std::vector<fs::path> outputs;
  if (!o.out.empty()) outputs.push_back(o.out);
  if (!outputs.empty()) {
    const StageGate gate = StageGate::make("evaluate", {o.run, o.qrels}, o.metric, outputs);
    if (!o.force && gate.up_to_date()) {
      std::cout << "evaluate: up to date\n";
      return;
    }
  }
  const Run run = load_run(o.run);
  const Qrels qrels = load_qrels(o.qrels);
  const auto [name, k] = parse_metric(o.metric);
  const MetricReport report =
      name == "ndcg" ? ndcg_at_k(run, qrels, k) : recall_at_k(run, qrels, k);
  if (!o.out.empty()) {
    save_metric_report(report, o.metric, o.out);
    const StageGate gate = StageGate::make("evaluate", {o.run, o.qrels}, o.metric, outputs);
    gate.stamp();
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", report.mean);
  std::cout << o.metric << " mean " << buf << " over " << report.per_query.size()
            << " queries\n";
}

// ---- significance ---------------------------------------------------------

struct SigOpts {
  std::string baseline, out;
  std::vector<std::string> candidates;
  double alpha = 0.05;
  bool force = false;
};

void run_significance(const SigOpts& o) {
  std::vector<fs::path> inputs{o.baseline};
  for (const std::string& c : o.candidates) inputs.emplace_back(c);
  std::ostringstream fl;
  fl << o.alpha;
  std::vector<fs::path> outputs;
  if (!o.out.empty()) outputs.push_back(o.out);
  if (!outputs.empty()) {
    const StageGate gate = StageGate::make("significance", inputs, fl.str(), outputs);
    if (!o.force && gate.up_to_date()) {
      std::cout << "significance: up to date\n";
      return;
    }
  }

  const MetricReport baseline = load_metric_report(o.baseline);
  std::vector<double> base_values;
  for (const auto& [qid, v] : baseline.per_query) base_values.push_back(v);

  std::vector<double> p_values;
  std::vector<std::string> names;
  for (const std::string& path : o.candidates) {
    const MetricReport candidate = load_metric_report(path);
    if (candidate.per_query.size() != baseline.per_query.size()) {
      throw LengthMismatchError("candidate " + path + " covers " +
                                std::to_string(candidate.per_query.size()) +
                                " queries, baseline covers " +
                                std::to_string(baseline.per_query.size()));
    }
    std::vector<double> cand_values;
    for (const auto& [qid, v] : candidate.per_query) {
      if (!baseline.per_query.contains(qid)) {
        throw LengthMismatchError("candidate " + path + " query " + qid +
                                  " is missing from the baseline");
      }
      cand_values.push_back(v);
    }
    p_values.push_back(paired_t_one_sided(cand_values, base_values));
    names.push_back(fs::path(path).filename().string());
  }

  const SignificanceResult result = holm_bonferroni(p_values, o.alpha);
  json comparisons = json::array();
  char buf[64];
  for (std::size_t i = 0; i < names.size(); ++i) {
    comparisons.push_back({{"candidate", names[i]},
                           {"p", result.p_values[i]},
                           {"rejected", static_cast<bool>(result.rejected[i])}});
    std::snprintf(buf, sizeof(buf), "%.6f", result.p_values[i]);
    std::cout << names[i] << " p=" << buf
              << (result.rejected[i] ? " (significant)" : " (not significant)") << "\n";
  }
  if (!o.out.empty()) {
    const json doc = {{"alpha", o.alpha},
                      {"baseline", fs::path(o.baseline).filename().string()},
                      {"comparisons", comparisons}};
    atomic_write_file(o.out, doc.dump(2) + "\n");
    const StageGate gate = StageGate::make("significance", inputs, fl.str(), outputs);
    gate.stamp();
  }
}

// ---- demo -----------------------------------------------------------------

struct DemoOpts {
  std::string out;
  std::uint64_t seed = 42;
  std::size_t passages = 2000;
  std::size_t gen_passages = 300;
  std::size_t target_examples = 500;
  TrainFlags flags;
};

struct DemoModel {
  std::string name;
  EncoderParams params;
};

void run_demo(const DemoOpts& o) {
  const fs::path dir = o.out;
  fs::create_directories(dir);

  // World and corpus.
  SynthWorldConfig world_config;
  world_config.passage_count = o.passages;
  world_config.seed = derive_seed(o.seed, "world");
  const SynthWorld world = build_world(world_config);
  save_corpus(world.corpus, dir / "corpus.jsonl");
  save_eval_queries(world.eval_queries, dir / "eval_queries.jsonl");
  save_qrels(world.qrels, dir / "qrels.txt");

  const DedupResult dedup = dedup_corpus(world.corpus);
  save_corpus(dedup.corpus, dir / "deduped.jsonl");
  save_removal_report(dedup.removed, dir / "removals.jsonl");
  std::cout << "demo: corpus " << world.corpus.passages.size() << " passages, "
            << dedup.removed.size() << " removed as duplicates\n";

  // Untrained encoder and candidate index.
  const EncoderConfig config{2048, 24, derive_seed(o.seed, "hash")};
  const EncoderParams untrained = init_params(config, derive_seed(o.seed, "init"));
  save_checkpoint(untrained, config.hash_seed, dir / "untrained.bin");
  const IndexBuildResult built = build_index(dedup.corpus, untrained, config);

  // Synthetic queries through the mock endpoint.
  const Corpus sources =
      sample_passages(dedup.corpus, o.gen_passages, derive_seed(o.seed, "sample"));
  const std::map<std::string, const Passage*> source_by_id = passages_by_id(sources);
  MockGenerationConfig mock_config;
  mock_config.seed = derive_seed(o.seed, "mock");
  const MockGenerationServer server(mock_config);
  GenerationEndpoint endpoint;
  endpoint.base_url = server.base_url();
  endpoint.model = "mock-generator";

  const PromptSet prompts = PromptSet::builtin();
  std::vector<GeneratedQuery> queries;
  std::size_t generated = 0;
  for (const QueryType type : kAllQueryTypes) {
    GenerationOutcome outcome = generate_queries(endpoint, sources, type, prompts);
    generated += outcome.queries.size();
    if (!outcome.failures.empty()) {
      throw ServiceError("mock generation failed for " +
                             std::to_string(outcome.failures.size()) + " passages",
                         endpoint.max_attempts);
    }
    for (GeneratedQuery& q : outcome.queries) {
      if (validate_query(q, source_by_id.at(q.passage_id)->normalized_text).accepted) {
        queries.push_back(std::move(q));
      }
    }
  }
  save_queries(queries, dir / "queries.jsonl");
  std::cout << "demo: generated " << generated << " queries, " << queries.size()
            << " accepted by validation\n";

  // Candidate retrieval with the untrained encoder.
  Run candidates;
  for (const GeneratedQuery& q : queries) {
    RankedList ranked;
    ranked.query_id = q.query_id;
    try {
      const Embedding e = encode(untrained, featurize(normalize_text(q.text), config));
      ranked = top_k(built.index, e, kCandidateDepth, q.query_id);
    } catch (const EmptyTextError&) {
    } catch (const DegenerateEmbeddingError&) {
    }
    candidates[q.query_id] = std::move(ranked);
  }
  save_run(candidates, dir / "candidates.trec", "untrained");

  // Oracle teacher over the planted topics; queries inherit their source
  // passage's latent vector.
  TopicTable table = world.passage_topics;
  for (auto& [qid, vec] : inherit_query_topics(queries, world.passage_topics).vectors) {
    table.vectors[qid] = std::move(vec);
  }
  SyntheticOracleTeacher teacher(std::move(table), 1.0, derive_seed(o.seed, "teacher-noise"));

  TeacherScores raw;
  for (const GeneratedQuery& q : queries) {
    const RankedList& ranked = candidates.at(q.query_id);
    if (!stage1_filter(q, ranked)) continue;
    std::vector<Candidate> window;
    const std::size_t depth = std::min<std::size_t>(ranked.entries.size(), kCandidateDepth);
    for (std::size_t i = 0; i < depth; ++i) window.push_back({ranked.entries[i].passage_id, ""});
    const std::vector<double> scores = teacher.score(q.query_id, q.text, window);
    for (std::size_t i = 0; i < window.size(); ++i) {
      raw.set(q.query_id, window[i].passage_id, scores[i]);
    }
  }
  save_scores(raw, dir / "teacher_scores.txt");

  // Two-stage filtering and example assembly.
  AssemblyInputs assembly;
  assembly.queries = queries;
  assembly.candidates = &candidates;
  const std::vector<TeacherScores> tables{raw};
  assembly.raw_scores = tables;
  assembly.blend.weights = {1.0};
  AssemblyResult assembled = assemble_examples(assembly);
  save_filter_report(assembled.report, dir / "filter_report.json");
  std::cout << "demo: filter kept " << assembled.report.total.passed_stage2 << " of "
            << assembled.report.total.generated << " queries (stage 1 "
            << assembled.report.total.passed_stage1 << ", ties " << assembled.report.stage2_ties
            << ")\n";

  if (assembled.examples.size() > o.target_examples) {
    assembled.examples.resize(o.target_examples);
  }
  save_examples(assembled.examples, dir / "examples.jsonl");
  std::cout << "demo: training on " << assembled.examples.size() << " examples\n";

  // Both loss modes from the same initial parameters, split, and shuffles.
  std::vector<DemoModel> models;
  models.push_back({"untrained", untrained});
  for (const LossMode mode : {LossMode::contrastive_only, LossMode::combined}) {
    const std::string name(to_string(mode));
    const TrainConfig train_config =
        o.flags.to_config(mode, derive_seed(o.seed, "train"), kDefaultMaskThreshold);
    const TrainResult result =
        train(train_config, assembled.examples, dedup.corpus, config, untrained);
    save_checkpoint(result.best.params, config.hash_seed, dir / (name + ".bin"));
    save_trace(result.trace, dir / ("trace_" + name + ".txt"));
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", result.best.dev_loss);
    std::cout << "demo: " << name << " best epoch " << result.best.epoch << " dev loss " << buf
              << "\n";
    models.push_back({name, result.best.params});
  }

  // Held-out evaluation.
  std::map<std::string, EvalOutcome> outcomes;
  for (const DemoModel& model : models) {
    EvalOutcome outcome =
        evaluate_params(model.params, config, dedup.corpus, world.eval_queries, world.qrels);
    save_run(outcome.run, dir / ("run_" + model.name + ".trec"), model.name);
    save_metric_report(outcome.ndcg, "ndcg@10", dir / ("ndcg10_" + model.name + ".json"));
    save_metric_report(outcome.recall, "recall@100", dir / ("recall100_" + model.name + ".json"));
    outcomes[model.name] = std::move(outcome);
  }

  // Paired one-sided tests on per-query NDCG@10, Holm-corrected.
  struct Comparison {
    std::string name;
    const MetricReport* a;
    const MetricReport* b;
  };
  const std::vector<Comparison> comparisons{
      {"combined>untrained", &outcomes.at("combined").ndcg, &outcomes.at("untrained").ndcg},
      {"contrastive_only>untrained", &outcomes.at("contrastive_only").ndcg,
       &outcomes.at("untrained").ndcg},
      {"combined>contrastive_only", &outcomes.at("combined").ndcg,
       &outcomes.at("contrastive_only").ndcg},
  };
  std::vector<double> p_values;
  for (const Comparison& c : comparisons) {
    std::vector<double> a, b;
    for (const auto& [qid, v] : c.a->per_query) {
      a.push_back(v);
      b.push_back(c.b->per_query.at(qid));
    }
    p_values.push_back(paired_t_one_sided(a, b));
  }
  const SignificanceResult significance = holm_bonferroni(p_values, 0.05);
  json sig_json = json::array();
  for (std::size_t i = 0; i < comparisons.size(); ++i) {
    sig_json.push_back({{"comparison", comparisons[i].name},
                        {"p", significance.p_values[i]},
                        {"rejected", static_cast<bool>(significance.rejected[i])}});
  }
  atomic_write_file(dir / "significance.json",
                    json{{"alpha", significance.alpha}, {"metric", "ndcg@10"},
                         {"comparisons", sig_json}}
                            .dump(2) +
                        "\n");

  json metrics = json::object();
  for (const DemoModel& model : models) {
    metrics[model.name] = {{"ndcg@10", outcomes.at(model.name).ndcg.mean},
                           {"recall@100", outcomes.at(model.name).recall.mean}};
  }
  const json report = {{"seed", o.seed},
                       {"passages", world.corpus.passages.size()},
                       {"examples_used", assembled.examples.size()},
                       {"filter",
                        {{"generated", assembled.report.total.generated},
                         {"passed_stage1", assembled.report.total.passed_stage1},
                         {"passed_stage2", assembled.report.total.passed_stage2},
                         {"stage2_ties", assembled.report.stage2_ties}}},
                       {"metrics", metrics},
                       {"significance", sig_json}};
  atomic_write_file(dir / "report.json", report.dump(2) + "\n");

  std::cout << "\nmodel               ndcg@10  recall@100\n";
  char buf[96];
  for (const DemoModel& model : models) {
    std::snprintf(buf, sizeof(buf), "%-18s  %7.4f  %10.4f\n", model.name.c_str(),
                  outcomes.at(model.name).ndcg.mean, outcomes.at(model.name).recall.mean);
    std::cout << buf;
  }
  for (std::size_t i = 0; i < comparisons.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%-28s p=%.6f%s\n", comparisons[i].name.c_str(),
                  significance.p_values[i], significance.rejected[i] ? " *" : "");
    std::cout << buf;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"corpus-adapted dense retriever pipeline"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key/value configuration file");

  auto dedup_opts = std::make_shared<DedupOpts>();
  CLI::App* dedup = app.add_subcommand("dedup", "remove contained duplicate passages");
  dedup->add_option("--in", dedup_opts->in, "corpus file")->required();
  dedup->add_option("--out", dedup_opts->out, "deduplicated corpus file")->required();
  dedup->add_option("--report", dedup_opts->report, "removal report file");
  dedup->add_flag("--force", dedup_opts->force, "re-run even if up to date");
  dedup->callback([dedup_opts] {
    g_stage = "dedup";
    run_dedup(*dedup_opts);
  });

  auto index_opts = std::make_shared<IndexOpts>();
  CLI::App* index = app.add_subcommand("index", "embed a corpus into a dense index");
  index->add_option("--corpus", index_opts->corpus, "corpus file")->required();
  index->add_option("--out", index_opts->out, "index file")->required();
  index->add_option("--checkpoint", index_opts->encoder.checkpoint, "encoder checkpoint");
  index->add_option("--seed", index_opts->encoder.seed, "seed for a fresh encoder");
  index->add_option("--write-checkpoint", index_opts->write_checkpoint,
                    "save the (possibly fresh) encoder here");
  index_opts->encoder.add_init_options(index);
  index->add_flag("--force", index_opts->force, "re-run even if up to date");
  index->callback([index_opts] {
    g_stage = "index";
    run_index(*index_opts);
  });

  auto retrieve_opts = std::make_shared<RetrieveOpts>();
  CLI::App* retrieve = app.add_subcommand("retrieve", "run top-k retrieval for a query file");
  retrieve->add_option("--index", retrieve_opts->index, "index file")->required();
  retrieve->add_option("--queries", retrieve_opts->queries, "query file")->required();
  retrieve->add_option("--checkpoint", retrieve_opts->checkpoint, "encoder checkpoint")
      ->required();
  retrieve->add_option("--k", retrieve_opts->k, "list depth");
  retrieve->add_option("--out", retrieve_opts->out, "run file")->required();
  retrieve->add_option("--tag", retrieve_opts->tag, "run tag");
  retrieve->add_flag("--force", retrieve_opts->force, "re-run even if up to date");
  retrieve->callback([retrieve_opts] {
    g_stage = "retrieve";
    run_retrieve(*retrieve_opts);
  });

  auto gen_opts = std::make_shared<GenOpts>();
  CLI::App* gen = app.add_subcommand("genqueries", "generate synthetic queries via a service");
  gen->add_option("--corpus", gen_opts->corpus, "deduplicated corpus file")->required();
  gen->add_option("--out", gen_opts->out, "accepted query file")->required();
  gen->add_option("--endpoint", gen_opts->endpoint_url, "chat-completion service URL")
      ->required();
  gen->add_option("--model", gen_opts->model, "model name sent to the service");
  gen->add_option("--auth-token", gen_opts->auth_token, "bearer token for the service")
      ->envname("DRIFT_AUTH_TOKEN");
  gen->add_option("--type", gen_opts->type,
                  "question|claim|title|keywords|user_zero_shot|user_few_shot|all");
  gen->add_option("--sample", gen_opts->sample, "passages to sample (0 = up to 100k)");
  gen->add_option("--seed", gen_opts->seed, "sampling seed");
  gen->add_option("--prompts", gen_opts->prompts_dir, "prompt template override directory");
  gen->add_option("--transcript", gen_opts->transcript, "request/response log file");
  gen->add_option("--concurrency", gen_opts->concurrency, "in-flight request limit");
  gen->add_option("--max-attempts", gen_opts->max_attempts, "retry budget per request");
  gen->add_option("--retry-base-ms", gen_opts->retry_base_ms, "base backoff in milliseconds");
  gen->add_flag("--force", gen_opts->force, "re-run even if up to date");
  gen->callback([gen_opts] {
    g_stage = "genqueries";
    run_genqueries(*gen_opts);
  });

  auto score_opts = std::make_shared<ScoreOpts>();
  CLI::App* score = app.add_subcommand("teacher-score", "score candidate windows with a teacher");
  score->add_option("--queries", score_opts->queries, "query file")->required();
  score->add_option("--run", score_opts->run, "candidate run file")->required();
  score->add_option("--corpus", score_opts->corpus, "corpus file for candidate texts");
  score->add_option("--teacher", score_opts->teacher,
                    "file:<scores> | oracle:<topics> | remote:<url>")
      ->required();
  score->add_option("--out", score_opts->out, "score file")->required();
  score->add_option("--oracle-scale", score_opts->oracle_scale, "oracle affinity scale");
  score->add_option("--noise-amplitude", score_opts->noise_amplitude, "oracle noise amplitude");
  score->add_option("--seed", score_opts->seed, "oracle noise seed");
  score->add_option("--max-attempts", score_opts->max_attempts, "remote retry budget");
  score->add_flag("--force", score_opts->force, "re-run even if up to date");
  score->callback([score_opts] {
    g_stage = "teacher-score";
    run_teacher_score(*score_opts);
  });

  auto filter_opts = std::make_shared<FilterOpts>();
  CLI::App* filter = app.add_subcommand("filter", "two-stage filter for generated queries");
  filter->add_option("--queries", filter_opts->queries, "query file")->required();
  filter->add_option("--run", filter_opts->run, "candidate run file")->required();
  filter->add_option("--scores", filter_opts->scores, "teacher score file (repeatable)")
      ->required();
  filter->add_option("--weights", filter_opts->weights, "comma-separated blend weights");
  filter->add_option("--out", filter_opts->out, "surviving query file")->required();
  filter->add_option("--report", filter_opts->report, "filter report file");
  filter->add_flag("--force", filter_opts->force, "re-run even if up to date");
  filter->callback([filter_opts] {
    g_stage = "filter";
    run_filter(*filter_opts);
  });

  auto build_opts = std::make_shared<FilterOpts>();
  CLI::App* build = app.add_subcommand("build-train", "assemble training examples");
  build->add_option("--queries", build_opts->queries, "query file")->required();
  build->add_option("--run", build_opts->run, "candidate run file")->required();
  build->add_option("--scores", build_opts->scores, "teacher score file (repeatable)")
      ->required();
  build->add_option("--weights", build_opts->weights, "comma-separated blend weights");
  build->add_option("--threshold", build_opts->threshold, "false-negative mask threshold");
  build->add_option("--out", build_opts->out, "training example file")->required();
  build->add_option("--report", build_opts->report, "filter report file");
  build->add_flag("--force", build_opts->force, "re-run even if up to date");
  build->callback([build_opts] {
    g_stage = "build-train";
    run_build_train(*build_opts);
  });

  auto train_opts = std::make_shared<TrainOpts>();
  CLI::App* train_cmd = app.add_subcommand("train", "fine-tune the encoder");
  train_cmd->add_option("--examples", train_opts->examples, "training example file")->required();
  train_cmd->add_option("--corpus", train_opts->corpus, "corpus file")->required();
  train_cmd->add_option("--out", train_opts->out, "best checkpoint file")->required();
  train_cmd->add_option("--trace", train_opts->trace, "per-epoch loss table file");
  train_cmd->add_option("--mode", train_opts->mode, "contrastive_only | combined");
  train_cmd->add_option("--seed", train_opts->seed, "training seed");
  train_cmd->add_option("--init-checkpoint", train_opts->init_checkpoint,
                        "starting parameters (fresh seeded encoder otherwise)");
  train_opts->encoder.add_init_options(train_cmd);
  train_opts->flags.add_options(train_cmd);
  train_cmd->add_flag("--force", train_opts->force, "re-run even if up to date");
  train_cmd->callback([train_opts] {
    g_stage = "train";
    run_train(*train_opts);
  });

  auto sweep_opts = std::make_shared<SweepOpts>();
  CLI::App* sweep = app.add_subcommand("sweep", "mask-threshold sweep with retraining");
  sweep->add_option("--examples", sweep_opts->examples, "training example file")->required();
  sweep->add_option("--corpus", sweep_opts->corpus, "corpus file")->required();
  sweep->add_option("--eval-queries", sweep_opts->eval_queries, "held-out query file")
      ->required();
  sweep->add_option("--qrels", sweep_opts->qrels, "relevance judgments file")->required();
  sweep->add_option("--thresholds", sweep_opts->thresholds, "comma-separated thresholds");
  sweep->add_option("--out", sweep_opts->out, "sweep table file")->required();
  sweep->add_option("--json", sweep_opts->json_out, "plot-ready series file");
  sweep->add_option("--mode", sweep_opts->mode, "contrastive_only | combined");
  sweep->add_option("--seed", sweep_opts->seed, "training seed");
  sweep->add_option("--init-checkpoint", sweep_opts->init_checkpoint, "starting parameters");
  sweep_opts->encoder.add_init_options(sweep);
  sweep_opts->flags.add_options(sweep);
  sweep->add_flag("--force", sweep_opts->force, "re-run even if up to date");
  sweep->callback([sweep_opts] {
    g_stage = "sweep";
    run_sweep(*sweep_opts);
  });

  auto eval_opts = std::make_shared<EvalOpts>();
  CLI::App* evaluate = app.add_subcommand("evaluate", "score a run against qrels");
  evaluate->add_option("--run", eval_opts->run, "run file")->required();
  evaluate->add_option("--qrels", eval_opts->qrels, "relevance judgments file")->required();
  evaluate->add_option("--metric", eval_opts->metric, "ndcg@K or recall@K");
  evaluate->add_option("--out", eval_opts->out, "metric report file");
  evaluate->add_flag("--force", eval_opts->force, "re-run even if up to date");
  evaluate->callback([eval_opts] {
    g_stage = "evaluate";
    run_evaluate(*eval_opts);
  });

  auto sig_opts = std::make_shared<SigOpts>();
  CLI::App* sig = app.add_subcommand("significance", "paired one-sided tests with Holm correction");
  sig->add_option("--baseline", sig_opts->baseline, "baseline metric report")->required();
  sig->add_option("--candidates", sig_opts->candidates, "candidate metric reports (repeatable)")
      ->required();
  sig->add_option("--alpha", sig_opts->alpha, "family-wise error rate");
  sig->add_option("--out", sig_opts->out, "significance report file");
  sig->add_flag("--force", sig_opts->force, "re-run even if up to date");
  sig->callback([sig_opts] {
    g_stage = "significance";
    run_significance(*sig_opts);
  });

  auto demo_opts = std::make_shared<DemoOpts>();
  CLI::App* demo = app.add_subcommand("demo", "end-to-end run on a planted-topic corpus");
  demo->add_option("--out", demo_opts->out, "output directory")->required();
  demo->add_option("--seed", demo_opts->seed, "pipeline seed");
  demo->add_option("--passages", demo_opts->passages, "corpus size");
  demo->add_option("--gen-passages", demo_opts->gen_passages, "passages sampled for generation");
  demo->add_option("--target-examples", demo_opts->target_examples,
                   "training examples kept after filtering");
  demo_opts->flags.add_options(demo);
  demo->callback([demo_opts] {
    g_stage = "demo";
    run_demo(*demo_opts);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "drift " << g_stage << ": " << e.what() << "\n";
    return 1;
  }
  return 0;
}
