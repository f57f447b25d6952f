#include "swag/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "cli/config.hpp"
#include "swag/dataset.hpp"
#include "swag/dpo_math.hpp"
#include "swag/evaluation.hpp"
#include "swag/io.hpp"
#include "swag/parallel.hpp"
#include "swag/swag_loop.hpp"

namespace swag::cli {
namespace {

namespace fs = std::filesystem;

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string new_run_id() {
  std::random_device rd;
  char buf[17];
  std::snprintf(buf, sizeof buf, "%08x%08x", rd(), rd());
  return buf;
}

// Options shared by every verb. Flags override the config file.
struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> concurrency;
  std::string actions;

  void add_to(CLI::App* app) {
    app->add_option("--config", config, "JSON config file (default: $SWAG_CONFIG)");
    app->add_option("--seed", seed, "run seed");
    app->add_option("--concurrency", concurrency, "simultaneous backend calls")->check(CLI::Range(1, 1024));
    app->add_option("--actions", actions, "action space file, one label per line");
  }

  AppConfig load() const {
    auto config = load_config(this->config.empty() ? std::nullopt
                                                   : std::optional<fs::path>(this->config));
    if (seed) config.seed = *seed;
    if (concurrency) config.concurrency = *concurrency;
    if (!actions.empty()) config.actions_file = fs::path(actions);
    resolve_resources(config);
    return config;
  }
};

/// Run manifest: written before the first backend call, rewritten at the end.
class Manifest {
 public:
  Manifest(fs::path file, const std::string& command, const std::vector<std::string>& args,
           const AppConfig& config, const std::vector<std::string>& roles)
      : file_(std::move(file)) {
    json backends = json::object();
    for (const auto& role : roles) backends[role] = describe(config.backend(role));
    json templates = json::object();
    for (const auto& [name, hash] : config.loop.templates.hashes()) templates[name] = hash;
    doc_ = {{"run_id", new_run_id()},
            {"command", command},
            {"args", args},
            {"run_seed", config.seed},
            {"concurrency", config.concurrency},
            {"config_file", config.path ? json(config.path->string()) : json(nullptr)},
            {"backends", std::move(backends)},
            {"action_space_hash", config.loop.action_space.hash()},
            {"template_hashes", std::move(templates)}};
  }

  void start() {
    doc_["status"] = "running";
    doc_["started_at"] = timestamp_utc();
    doc_["finished_at"] = nullptr;
    write();
  }

  void finish(std::size_t succeeded, std::size_t failed, json failures = json::array()) {
    doc_["status"] = "finished";
    doc_["finished_at"] = timestamp_utc();
    doc_["counts"] = {{"succeeded", succeeded}, {"failed", failed}};
    doc_["failures"] = std::move(failures);
    write();
  }

  json& doc() { return doc_; }

 private:
  void write() const { io::write_text(file_, doc_.dump(2) + "\n"); }

  fs::path file_;
  json doc_;
};

fs::path sidecar(const fs::path& out, const std::string& suffix) {
  return fs::path(out.string() + suffix);
}

// ---------------------------------------------------------------------------

struct GenerateFlags {
  CommonFlags common;
  std::string mode;
  std::string prompts;
  std::string out;
  std::optional<std::size_t> k;
  std::optional<std::size_t> max_action_retries;
  std::string on_unresolved;
  bool skip_final_action = false;
  bool no_timing = false;
};

int cmd_generate(const GenerateFlags& f, const std::vector<std::string>& args, std::ostream& out,
                 std::ostream& err) {
  auto config = f.common.load();
  auto& loop = config.loop;
  if (f.k) loop.k = *f.k;
  if (f.max_action_retries) loop.max_action_retries = *f.max_action_retries;
  if (!f.on_unresolved.empty()) loop.on_unresolved = parse_unresolved_policy(f.on_unresolved);
  if (f.skip_final_action) loop.skip_final_action = true;
  loop.validate();

  const auto mode = parse_story_mode(f.mode);
  std::vector<std::string> roles{"story"};
  if (mode == StoryMode::swag) roles.push_back("ad");
  auto story_backend = make_backend(config.backend("story"), config.seed);
  BackendPtr ad_backend;
  if (mode == StoryMode::swag) ad_backend = make_backend(config.backend("ad"), config.seed);
  const auto prompts = io::load_prompts(f.prompts);

  const fs::path out_path(f.out);
  Manifest manifest(sidecar(out_path, ".manifest.json"), "generate", args, config, roles);
  manifest.doc()["mode"] = to_string(mode);
  manifest.doc()["loop"] = {{"k", loop.k},
                            {"max_action_retries", loop.max_action_retries},
                            {"on_unresolved", to_string(loop.on_unresolved)},
                            {"skip_final_action", loop.skip_final_action}};
  manifest.start();

  std::vector<std::optional<Story>> stories(prompts.size());
  std::vector<json> failures(prompts.size());
  parallel_for(prompts.size(), config.concurrency, [&](std::size_t i) {
    const auto& prompt = prompts[i];
    try {
      switch (mode) {
        case StoryMode::swag:
          stories[i] = run_swag(prompt, *story_backend, *ad_backend, loop, config.seed);
          break;
        case StoryMode::e2e:
          stories[i] = run_e2e(prompt, *story_backend, loop, config.seed);
          break;
        case StoryMode::random_ad:
          stories[i] = run_random_ad(prompt, *story_backend, loop, config.seed);
          break;
      }
    } catch (const LoopError& e) {
      failures[i] = {{"prompt_id", prompt.id},
                     {"reason", e.what()},
                     {"iteration", e.iteration()},
                     {"partial_paragraphs", e.partial_paragraphs()}};
    } catch (const Error& e) {
      failures[i] = {{"prompt_id", prompt.id}, {"reason", e.what()}};
    }
  });

  std::vector<json> rows;
  json failed = json::array();
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    if (stories[i]) {
      rows.push_back(io::to_json(*stories[i], !f.no_timing));
    } else {
      failed.push_back(failures[i]);
      err << "generate: prompt " << prompts[i].id << " failed: " << failures[i]["reason"].get<std::string>()
          << "\n";
    }
  }
  io::write_text(out_path, io::to_jsonl(rows));
  const auto failures_file = sidecar(out_path, ".failures.jsonl");
  if (failed.empty()) {
    fs::remove(failures_file);  // stale from an earlier run
  } else {
    io::write_text(failures_file, io::to_jsonl(std::vector<json>(failed.begin(), failed.end())));
  }
  manifest.finish(rows.size(), failed.size(), failed);
  out << "generate: " << rows.size() << " of " << prompts.size() << " stories written to "
      << out_path.string() << "\n";
  return failed.empty() ? kExitOk : kExitPartial;
}

// ---------------------------------------------------------------------------

struct DatasetFlags {
  CommonFlags common;
  std::string prompts;
  std::string states;
  std::string records;
  std::string out;
  std::string out_dir;
  std::string dominant = "add suspense";
  std::size_t merge_sample = 3000;
  std::size_t threshold = 100;
  std::size_t sft = 0;
  std::size_t dpo = 0;
  std::size_t eval = 0;
};

json failures_json(const std::vector<ItemFailure>& failures) {
  json arr = json::array();
  for (const auto& f : failures) arr.push_back(io::to_json(f));
  return arr;
}

void write_failures(const fs::path& file, const std::vector<ItemFailure>& failures, std::ostream& err) {
  if (failures.empty()) {
    fs::remove(file);
    return;
  }
  std::vector<json> rows;
  for (const auto& f : failures) {
    rows.push_back(io::to_json(f));
    err << "skipped " << f.prompt_id << ": " << f.reason;
    if (!f.raw_output.empty()) err << " (raw output: " << json(f.raw_output).dump() << ")";
    err << "\n";
  }
  io::write_text(file, io::to_jsonl(rows));
}

std::vector<PreferenceRecord> load_records(const fs::path& path) {
  return io::read_jsonl_as<PreferenceRecord>(path, io::preference_from_json);
}

std::vector<InitialState> load_states(const fs::path& path) {
  return io::read_jsonl_as<InitialState>(path, io::initial_state_from_json);
}

template <typename T>
std::vector<json> to_rows(const std::vector<T>& items) {
  std::vector<json> rows;
  rows.reserve(items.size());
  for (const auto& item : items) rows.push_back(io::to_json(item));
  return rows;
}

int cmd_init_states(const DatasetFlags& f, const std::vector<std::string>& args, std::ostream& out,
                    std::ostream& err) {
  auto config = f.common.load();
  auto teacher = make_backend(config.backend("teacher"), config.seed);
  const auto prompts = io::load_prompts(f.prompts);
  const fs::path out_path(f.out);
  Manifest manifest(sidecar(out_path, ".manifest.json"), "dataset init-states", args, config, {"teacher"});
  manifest.start();

  auto result = build_initial_states(prompts, *teacher, config.preferences);
  io::write_text(out_path, io::to_jsonl(to_rows(result.states)));
  write_failures(sidecar(out_path, ".failures.jsonl"), result.failures, err);
  manifest.finish(result.states.size(), result.failures.size(), failures_json(result.failures));
  out << "init-states: " << result.states.size() << " of " << prompts.size() << " states written\n";
  return result.failures.empty() ? kExitOk : kExitPartial;
}

int cmd_prefs(const DatasetFlags& f, const std::vector<std::string>& args, std::ostream& out,
              std::ostream& err) {
  auto config = f.common.load();
  auto teacher = make_backend(config.backend("teacher"), config.seed);
  const auto states = load_states(f.states);
  const fs::path out_path(f.out);
  Manifest manifest(sidecar(out_path, ".manifest.json"), "dataset prefs", args, config, {"teacher"});
  manifest.start();

  auto batch = generate_preferences(states, config.loop.action_space, *teacher, config.seed,
                                    config.preferences);
  io::write_text(out_path, io::to_jsonl(to_rows(batch.records)));
  write_failures(sidecar(out_path, ".skipped.jsonl"), batch.skipped, err);
  manifest.finish(batch.records.size(), batch.skipped.size(), failures_json(batch.skipped));
  out << "prefs: " << batch.records.size() << " records written, " << batch.skipped.size()
      << " skipped\n";
  return batch.skipped.empty() ? kExitOk : kExitPartial;
}

int cmd_rebalance(const DatasetFlags& f, const std::vector<std::string>& args, std::ostream& out,
                  std::ostream& err) {
  auto config = f.common.load();
  auto teacher = make_backend(config.backend("teacher"), config.seed);
  const auto dominant = Action::canonicalize(f.dominant);
  const auto records = load_records(f.records);
  const auto states = load_states(f.states);
  const fs::path out_path(f.out);
  Manifest manifest(sidecar(out_path, ".manifest.json"), "dataset rebalance", args, config, {"teacher"});
  manifest.doc()["dominant"] = dominant.label();
  manifest.doc()["merge_sample"] = f.merge_sample;
  manifest.start();

  auto result = rebalance(records, dominant, states, *teacher, f.merge_sample, config.seed,
                          config.loop.action_space, config.preferences);
  io::write_text(out_path, io::to_jsonl(to_rows(result.records)));
  write_failures(sidecar(out_path, ".skipped.jsonl"), result.skipped, err);
  manifest.finish(result.records.size(), result.skipped.size(), failures_json(result.skipped));
  out << "rebalance: " << result.regenerated << " regenerated + " << result.merged
      << " merged records written, " << result.skipped.size() << " skipped\n";
  return result.skipped.empty() ? kExitOk : kExitPartial;
}

int cmd_stats(const DatasetFlags& f, std::ostream& out, std::ostream& err) {
  const auto hist = action_histogram(load_records(f.records));
  const auto tsv = hist.to_tsv(f.threshold);
  if (!f.out.empty()) io::write_text(f.out, tsv);
  out << tsv;
  err << "stats: " << hist.total << " records, " << hist.counts.size() << " distinct actions, "
      << hist.sorted(f.threshold).size() << " shown (threshold " << f.threshold << ")\n";
  return kExitOk;
}

int cmd_split(const DatasetFlags& f, std::ostream& out) {
  const auto config = f.common.load();
  // Lines are split verbatim so any JSONL corpus keeps its bytes.
  std::vector<std::string> lines;
  {
    std::istringstream in(io::read_text(f.records));
    std::size_t line_no = 0;
    for (std::string line; std::getline(in, line);) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      if (!json::parse(line, nullptr, false).is_object()) {
        throw Error(Errc::parse_error, f.records + ":" + std::to_string(line_no) + ": not a JSON object");
      }
      lines.push_back(std::move(line));
    }
  }
  auto split = split_corpus(lines, f.sft, f.dpo, f.eval, config.seed);
  const fs::path dir(f.out_dir);
  auto write = [&](const char* name, const std::vector<std::string>& part) {
    std::string text;
    for (const auto& l : part) text += l + "\n";
    io::write_text(dir / name, text);
  };
  write("sft.jsonl", split.sft);
  write("dpo.jsonl", split.dpo);
  write("eval.jsonl", split.eval);
  out << "split: sft=" << split.sft.size() << " dpo=" << split.dpo.size()
      << " eval=" << split.eval.size() << " written to " << dir.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvalFlags {
  CommonFlags common;
  std::string stories_x;
  std::string stories_y;
  std::string method_x;
  std::string method_y;
  std::string out_dir;
  std::string policy;
};

int cmd_eval(const EvalFlags& f, const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err) {
  auto config = f.common.load();
  if (!f.policy.empty()) config.policy = parse_denominator_policy(f.policy);
  auto xs = io::read_jsonl_as<Story>(f.stories_x, io::story_from_json);
  auto ys = io::read_jsonl_as<Story>(f.stories_y, io::story_from_json);

  std::map<std::string, const Story*> by_id;
  for (const auto& s : ys) by_id[s.state.prompt.id] = &s;
  std::set<std::string> x_ids;
  std::vector<std::string> unmatched;
  for (const auto& s : xs) {
    x_ids.insert(s.state.prompt.id);
    if (!by_id.count(s.state.prompt.id)) unmatched.push_back(s.state.prompt.id + " (missing from " + f.stories_y + ")");
  }
  for (const auto& s : ys) {
    if (!x_ids.count(s.state.prompt.id)) unmatched.push_back(s.state.prompt.id + " (missing from " + f.stories_x + ")");
  }
  if (!unmatched.empty()) {
    err << "eval: corpora do not align on prompt_id; unmatched ids:\n";
    for (const auto& id : unmatched) err << "  " << id << "\n";
    return kExitConfig;
  }
  if (xs.empty()) throw Error(Errc::invalid_argument, "no stories to compare");

  auto label_x = f.method_x.empty() ? std::string(to_string(xs.front().mode)) : f.method_x;
  auto label_y = f.method_y.empty() ? std::string(to_string(ys.front().mode)) : f.method_y;
  if (label_x == label_y) {
    label_x = fs::path(f.stories_x).stem().string();
    label_y = fs::path(f.stories_y).stem().string();
  }
  if (label_x == label_y) {
    label_x = "x";
    label_y = "y";
  }

  auto judge = make_backend(config.backend("judge"), config.seed);
  std::vector<ComparisonPair> pairs;
  pairs.reserve(xs.size());
  for (const auto& s : xs) {
    pairs.push_back(ComparisonPair{s.state.prompt.id, s, *by_id[s.state.prompt.id], label_x, label_y});
  }

  const fs::path dir(f.out_dir);
  Manifest manifest(dir / "manifest.json", "eval", args, config, {"judge"});
  manifest.doc()["methods"] = {label_x, label_y};
  manifest.start();

  TournamentOptions options{config.judge, config.concurrency, config.policy};
  auto result = run_tournament(pairs, *judge, config.seed, options);

  std::vector<json> rows;
  json failed = json::array();
  for (const auto& r : result.results) {
    rows.push_back(io::to_json(r));
    if (!r.error.empty()) failed.push_back({{"pair_id", r.pair_id}, {"reason", r.error}});
  }
  io::write_text(dir / "judgments.jsonl", io::to_jsonl(rows));
  io::write_text(dir / "summary.json", io::to_json(result.summary).dump(2) + "\n");
  const auto table = render_markdown_table({result.summary});
  io::write_text(dir / "summary.md", table);
  manifest.finish(result.results.size() - failed.size(), failed.size(), failed);

  out << table;
  char line[160];
  std::snprintf(line, sizeof line,
                "win rate (%s): %.1f%% over valid comparisons, %.1f%% over attempted (%zu invalid)\n",
                label_x.c_str(), result.summary.win_rate_valid * 100.0,
                result.summary.win_rate_attempted * 100.0, result.summary.invalid);
  out << line;
  return failed.empty() ? kExitOk : kExitPartial;
}

// ---------------------------------------------------------------------------

struct DpoFlags {
  CommonFlags common;
  std::string logprobs;
  std::optional<double> beta;
  std::size_t bins = 10;
  std::string out;
};

int cmd_dpo_check(const DpoFlags& f, std::ostream& out) {
  const auto config = f.common.load();
  const dpo::Beta beta(f.beta.value_or(config.beta));
  auto batch = io::read_jsonl_as<dpo::PreferenceLogProbs>(f.logprobs, io::logprobs_from_json);
  if (batch.empty()) throw Error(Errc::empty_batch, f.logprobs + " holds no log-probability records");
  auto report = io::to_json(dpo::diagnose(batch, beta, f.bins));
  report["beta"] = beta.value();
  const auto text = report.dump(2) + "\n";
  if (!f.out.empty()) io::write_text(f.out, text);
  out << text;
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Action-guided story generation, preference data and pairwise evaluation", "swag"};
  app.require_subcommand(1);

  GenerateFlags gen;
  auto* generate = app.add_subcommand("generate", "generate stories for every prompt");
  gen.common.add_to(generate);
  generate->add_option("--mode", gen.mode, "swag | e2e | random-ad")
      ->required()
      ->check(CLI::IsMember({"swag", "e2e", "random-ad", "random_ad"}));
  generate->add_option("--prompts", gen.prompts, "prompts file (JSONL {id,text} or one per line)")->required();
  generate->add_option("--out", gen.out, "output Story JSONL")->required();
  generate->add_option("--k", gen.k, "feedback iterations")->check(CLI::Range(0, 1000));
  generate->add_option("--max-action-retries", gen.max_action_retries);
  generate->add_option("--on-unresolved", gen.on_unresolved, "fail | fallback_random");
  generate->add_flag("--skip-final-action", gen.skip_final_action, "skip the unused last action call");
  generate->add_flag("--no-timing", gen.no_timing, "omit per-step timing from the JSONL");

  DatasetFlags ds;
  auto* dataset = app.add_subcommand("dataset", "preference dataset tools");
  dataset->require_subcommand(1);
  auto* init_states = dataset->add_subcommand("init-states", "opening paragraph per prompt");
  ds.common.add_to(init_states);
  init_states->add_option("--prompts", ds.prompts)->required();
  init_states->add_option("--out", ds.out)->required();
  auto* prefs = dataset->add_subcommand("prefs", "chosen/rejected action records");
  ds.common.add_to(prefs);
  prefs->add_option("--states", ds.states)->required();
  prefs->add_option("--out", ds.out)->required();
  auto* rebal = dataset->add_subcommand("rebalance", "regenerate without the dominant action and merge a sample back");
  ds.common.add_to(rebal);
  rebal->add_option("--records", ds.records)->required();
  rebal->add_option("--states", ds.states)->required();
  rebal->add_option("--dominant", ds.dominant, "dominant action label")->capture_default_str();
  rebal->add_option("--merge-sample", ds.merge_sample)->capture_default_str();
  rebal->add_option("--out", ds.out)->required();
  auto* stats = dataset->add_subcommand("stats", "chosen-action histogram as TSV");
  stats->add_option("--records", ds.records)->required();
  stats->add_option("--threshold", ds.threshold, "hide actions chosen fewer times")->capture_default_str();
  stats->add_option("--out", ds.out, "also write the TSV here");
  auto* split = dataset->add_subcommand("split", "seeded SFT/DPO/eval partition");
  ds.common.add_to(split);
  split->add_option("--records", ds.records)->required();
  split->add_option("--sft", ds.sft)->required();
  split->add_option("--dpo", ds.dpo)->required();
  split->add_option("--eval", ds.eval)->required();
  split->add_option("--out-dir", ds.out_dir)->required();

  EvalFlags ev;
  auto* eval = app.add_subcommand("eval", "pairwise judge tournament between two story corpora");
  ev.common.add_to(eval);
  eval->add_option("--stories-x", ev.stories_x)->required();
  eval->add_option("--stories-y", ev.stories_y)->required();
  eval->add_option("--method-x", ev.method_x);
  eval->add_option("--method-y", ev.method_y);
  eval->add_option("--policy", ev.policy, "valid_only | attempted");
  eval->add_option("--out-dir", ev.out_dir)->required();

  DpoFlags dp;
  auto* dpo_check = app.add_subcommand("dpo-check", "DPO loss and ranking diagnostics over a log-prob file");
  dp.common.add_to(dpo_check);
  dpo_check->add_option("--logprobs", dp.logprobs)->required();
  dpo_check->add_option("--beta", dp.beta);
  dpo_check->add_option("--bins", dp.bins)->capture_default_str();
  dpo_check->add_option("--out", dp.out, "also write the JSON report here");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitConfig;
  }

  std::vector<std::string> full{"swag"};
  full.insert(full.end(), args.begin(), args.end());
  try {
    if (generate->parsed()) return cmd_generate(gen, full, out, err);
    if (init_states->parsed()) return cmd_init_states(ds, full, out, err);
    if (prefs->parsed()) return cmd_prefs(ds, full, out, err);
    if (rebal->parsed()) return cmd_rebalance(ds, full, out, err);
    if (stats->parsed()) return cmd_stats(ds, out, err);
    if (split->parsed()) return cmd_split(ds, out);
    if (eval->parsed()) return cmd_eval(ev, full, out, err);
    if (dpo_check->parsed()) return cmd_dpo_check(dp, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}

}  // namespace swag::cli
