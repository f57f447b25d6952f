#include <gtest/gtest.h>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdlib>
#include <thread>

#include "cli/config.hpp"
#include "support/fixtures.hpp"
#include "swag/io.hpp"

namespace swag {
namespace {

using nlohmann::json;
using testing::run_cli;
using testing::TempDir;

const std::string kDesk = testing::desk_dir().string();

std::vector<std::string> generate_args(const std::string& mode, const std::filesystem::path& out) {
  return {"generate", "--config", kDesk + "/config.json", "--mode", mode,
          "--prompts", kDesk + "/prompts.txt", "--out", out.string(), "--no-timing"};
}

/// Sets an environment variable for the lifetime of the guard.
class EnvGuard {
 public:
  EnvGuard(const char* name, const std::string& value) : name_(name) { ::setenv(name, value.c_str(), 1); }
  ~EnvGuard() { ::unsetenv(name_); }
  EnvGuard(const EnvGuard&) = delete;
  EnvGuard& operator=(const EnvGuard&) = delete;

 private:
  const char* name_;
};

TEST(Config, DefaultsEnvThenFile) {
  ::unsetenv("SWAG_CONFIG");
  {
    EnvGuard seed("SWAG_SEED", "77");
    EnvGuard conc("SWAG_CONCURRENCY", "2");
    auto c = cli::load_config(std::nullopt);
    EXPECT_EQ(c.seed, 77u);
    EXPECT_EQ(c.concurrency, 2u);
    EXPECT_EQ(c.loop.k, 5u);
    auto f = cli::load_config(testing::desk_dir() / "config.json");
    EXPECT_EQ(f.seed, 7u);  // file beats environment
    EXPECT_EQ(f.concurrency, 4u);
    EXPECT_EQ(f.backends.size(), 4u);
  }
  EnvGuard bad("SWAG_SEED", "seven");
  EXPECT_ERRC(cli::load_config(std::nullopt), Errc::config_error);
}

TEST(Config, ConfigFromEnvironmentVariable) {
  EnvGuard path("SWAG_CONFIG", kDesk + "/config.json");
  EXPECT_EQ(cli::load_config(std::nullopt).seed, 7u);
}

TEST(Config, RejectsLiteralKeysAndUnknownTypes) {
  TempDir dir;
  io::write_text(dir / "c.json", R"({"backends": {"story": {"base_url": "http://x", "model": "m", "api_key": "sk-1"}}})");
  EXPECT_ERRC(cli::load_config(dir / "c.json"), Errc::config_error);
  io::write_text(dir / "d.json", R"({"backends": {"story": {"type": "grpc"}}})");
  EXPECT_ERRC(cli::load_config(dir / "d.json"), Errc::config_error);
  io::write_text(dir / "e.json", R"({"backends": {"story": {"type": "scripted", "script": {"mode": "rules", "fallback": {"error": "Nope"}}}}})");
  EXPECT_ERRC(cli::load_config(dir / "e.json"), Errc::config_error);
  io::write_text(dir / "f.json", "[1, 2]");
  EXPECT_ERRC(cli::load_config(dir / "f.json"), Errc::config_error);
  EXPECT_ERRC(cli::AppConfig{}.backend("judge"), Errc::config_error);
}

TEST(Config, ScriptedFromJsonModes) {
  auto ordered = cli::scripted_from_json(json::parse(R"({"replies": ["a", {"error": "RateLimited"}]})"), "s");
  GenerationRequest r;
  r.messages.push_back({Role::user, "x"});
  EXPECT_EQ(ordered->generate(r), "a");
  EXPECT_ERRC(ordered->generate(r), Errc::rate_limited);
  auto keyed = cli::scripted_from_json(
      json{{"mode", "keyed"}, {"replies", {{request_fingerprint(r), {{"reply", "k"}}}}}}, "s");
  EXPECT_EQ(keyed->generate(r), "k");
  EXPECT_ERRC(cli::scripted_from_json(json{{"mode", "random"}}, "s"), Errc::config_error);
}

TEST(Generate, MissingAdBackendFailsBeforeAnyCall) {
  TempDir dir;
  io::write_text(dir / "c.json", R"({"backends": {"story": {"type": "scripted", "script": {"mode": "rules", "fallback": "x"}}}})");
  auto r = run_cli({"generate", "--config", (dir / "c.json").string(), "--mode", "swag", "--prompts",
                    kDesk + "/prompts.txt", "--out", (dir / "out.jsonl").string()});
  EXPECT_EQ(r.code, cli::kExitConfig);
  EXPECT_NE(r.err.find("backends.ad"), std::string::npos) << r.err;
  EXPECT_FALSE(std::filesystem::exists(dir / "out.jsonl"));
  EXPECT_FALSE(std::filesystem::exists(dir / "out.jsonl.manifest.json"));

  auto e2e = run_cli({"generate", "--config", (dir / "c.json").string(), "--mode", "e2e", "--prompts",
                      kDesk + "/prompts.txt", "--out", (dir / "out.jsonl").string(), "--k", "1"});
  EXPECT_EQ(e2e.code, cli::kExitOk) << e2e.err;
}

TEST(Generate, BadFlagsExitOne) {
  EXPECT_EQ(run_cli({"generate", "--mode", "poetry"}).code, cli::kExitConfig);
  EXPECT_EQ(run_cli({}).code, cli::kExitConfig);
  EXPECT_EQ(run_cli({"--help"}).code, cli::kExitOk);
}

TEST(Generate, ByteReproducibleAndManifest) {
  TempDir a, b;
  ASSERT_EQ(run_cli(generate_args("swag", a / "s.jsonl")).code, 0);
  ASSERT_EQ(run_cli(generate_args("swag", b / "s.jsonl")).code, 0);
  EXPECT_EQ(io::read_text(a / "s.jsonl"), io::read_text(b / "s.jsonl"));

  const auto manifest = json::parse(io::read_text(a / "s.jsonl.manifest.json"));
  EXPECT_EQ(manifest["status"], "finished");
  EXPECT_EQ(manifest["run_seed"], 7);
  EXPECT_EQ(manifest["counts"]["succeeded"], 10);
  EXPECT_EQ(manifest["action_space_hash"], ActionSpace::default_space().hash());
  EXPECT_EQ(manifest["template_hashes"].size(), 5u);
  EXPECT_TRUE(manifest["backends"].contains("ad"));
  EXPECT_FALSE(manifest["started_at"].get<std::string>().empty());
}

TEST(Generate, TimingPresentUnlessDisabled) {
  TempDir dir;
  auto args = generate_args("random-ad", dir / "r.jsonl");
  args.pop_back();
  ASSERT_EQ(run_cli(args).code, 0);
  io::read_jsonl(dir / "r.jsonl", [](std::size_t, const json& j) {
    ASSERT_TRUE(j.contains("timing"));
    EXPECT_EQ(j["timing"].size(), 6u);
  });
}

TEST(Generate, FlagsOverrideConfig) {
  TempDir dir;
  auto args = generate_args("swag", dir / "s.jsonl");
  for (const char* extra : {"--k", "2", "--seed", "1", "--skip-final-action"}) args.push_back(extra);
  ASSERT_EQ(run_cli(args).code, 0);
  io::read_jsonl(dir / "s.jsonl", [](std::size_t, const json& j) {
    EXPECT_EQ(j["paragraphs"].size(), 3u);
    EXPECT_EQ(j["action_trace"].size(), 2u);
    EXPECT_EQ(j["run_seed"], 1);
  });
}

TEST(Generate, PartialFailureExitsTwo) {
  TempDir dir;
  io::write_text(dir / "c.json", R"({
    "loop": {"k": 1},
    "backends": {"story": {"type": "scripted", "script": {"mode": "rules",
      "rules": [{"contains": "train of the night", "error": "RateLimited"}], "fallback": "Text."}}}})");
  auto r = run_cli({"generate", "--config", (dir / "c.json").string(), "--mode", "e2e", "--prompts",
                    kDesk + "/prompts.txt", "--out", (dir / "o.jsonl").string()});
  EXPECT_EQ(r.code, cli::kExitPartial);
  std::size_t rows = 0;
  io::read_jsonl(dir / "o.jsonl", [&](std::size_t, const json&) { ++rows; });
  EXPECT_EQ(rows, 9u);
  const auto failure = json::parse(io::read_text(dir / "o.jsonl.failures.jsonl"));
  EXPECT_EQ(failure["prompt_id"], "2");
  EXPECT_EQ(failure["iteration"], 0);
  const auto manifest = json::parse(io::read_text(dir / "o.jsonl.manifest.json"));
  EXPECT_EQ(manifest["counts"]["failed"], 1);
}

TEST(Generate, HttpBackendManifestHasNoSecrets) {
  const std::string secret = "sk-do-not-leak-4242";
  EnvGuard key("SWAG_TEST_API_KEY", secret);
  httplib::Server server;
  std::atomic<int> unauthorized{0};
  server.Post("/v1/chat/completions", [&](const httplib::Request& rq, httplib::Response& rs) {
    if (rq.get_header_value("Authorization") != "Bearer " + secret) ++unauthorized;
    const auto body = json::parse(rq.body);
    const std::string content = body["messages"].back()["content"];
    const std::string reply = content.find("Here is a set of actions") != std::string::npos
                                  ? "Add humor."
                                  : "A paragraph from the stub.";
    rs.set_content(json{{"choices", {{{"message", {{"role", "assistant"}, {"content", reply}}}}}}}.dump(),
                   "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  TempDir dir;
  const std::string backend = R"({"base_url": "http://127.0.0.1:)" + std::to_string(port) +
                              R"(/v1", "model": "stub", "api_key_env": "SWAG_TEST_API_KEY", "backoff_base_s": 0.01})";
  io::write_text(dir / "c.json", R"({"loop": {"k": 1}, "backends": {"story": )" + backend +
                                     R"(, "ad": )" + backend + "}}");
  io::write_text(dir / "p.txt", "One prompt.\nAnother prompt.\n");
  auto r = run_cli({"generate", "--config", (dir / "c.json").string(), "--mode", "swag", "--prompts",
                    (dir / "p.txt").string(), "--out", (dir / "o.jsonl").string()});
  server.stop();
  thread.join();

  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(unauthorized.load(), 0);
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir.path())) {
    if (!entry.is_regular_file()) continue;
    EXPECT_EQ(io::read_text(entry.path()).find(secret), std::string::npos) << entry.path();
  }
  EXPECT_EQ(r.out.find(secret), std::string::npos);
  EXPECT_EQ(r.err.find(secret), std::string::npos);
  const auto manifest = json::parse(io::read_text(dir / "o.jsonl.manifest.json"));
  EXPECT_EQ(manifest["backends"]["story"]["api_key_env"], "SWAG_TEST_API_KEY");
  io::read_jsonl(dir / "o.jsonl", [](std::size_t, const json& j) {
    EXPECT_EQ(j["action_trace"][0], "add humor");
    EXPECT_EQ(j["backend_ids"]["story"], "http:stub");
  });
}

TEST(Dataset, StatsTsvAndThreshold) {
  TempDir dir;
  ASSERT_EQ(run_cli({"dataset", "init-states", "--config", kDesk + "/config.json", "--prompts",
                     kDesk + "/prompts.txt", "--out", (dir / "s.jsonl").string()}).code, 0);
  ASSERT_EQ(run_cli({"dataset", "prefs", "--config", kDesk + "/config.json", "--states",
                     (dir / "s.jsonl").string(), "--out", (dir / "p.jsonl").string()}).code, 0);
  auto stats = run_cli({"dataset", "stats", "--records", (dir / "p.jsonl").string(), "--threshold", "1"});
  EXPECT_EQ(stats.code, 0);
  EXPECT_EQ(stats.out, "add suspense\t10\n");
  auto hidden = run_cli({"dataset", "stats", "--records", (dir / "p.jsonl").string()});
  EXPECT_EQ(hidden.out, "");
  EXPECT_NE(hidden.err.find("10 records"), std::string::npos);

  auto rebalance = run_cli({"dataset", "rebalance", "--config", kDesk + "/config.json", "--records",
                            (dir / "p.jsonl").string(), "--states", (dir / "s.jsonl").string(),
                            "--out", (dir / "r.jsonl").string()});
  EXPECT_EQ(rebalance.code, cli::kExitConfig);
  EXPECT_NE(rebalance.err.find("InsufficientDominantRecords"), std::string::npos) << rebalance.err;
}

TEST(Dataset, SplitKeepsLinesVerbatim) {
  TempDir dir;
  io::write_text(dir / "in.jsonl", "{\"b\":1,\"a\":2}\n{\"n\":2}\n{\"n\":3}\n");
  auto r = run_cli({"dataset", "split", "--records", (dir / "in.jsonl").string(), "--sft", "1", "--dpo", "1",
                    "--eval", "1", "--out-dir", (dir / "out").string(), "--seed", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto all = io::read_text(dir / "out/sft.jsonl") + io::read_text(dir / "out/dpo.jsonl") +
                   io::read_text(dir / "out/eval.jsonl");
  EXPECT_NE(all.find("{\"b\":1,\"a\":2}\n"), std::string::npos);
  EXPECT_EQ(all.size(), io::read_text(dir / "in.jsonl").size());
  EXPECT_EQ(run_cli({"dataset", "split", "--records", (dir / "in.jsonl").string(), "--sft", "3", "--dpo",
                     "1", "--eval", "0", "--out-dir", (dir / "out").string()}).code,
            cli::kExitConfig);
}

TEST(Eval, UnalignedCorporaListIds) {
  TempDir dir;
  ASSERT_EQ(run_cli(generate_args("swag", dir / "x.jsonl")).code, 0);
  io::write_text(dir / "y.jsonl", "");
  auto r = run_cli({"eval", "--config", kDesk + "/config.json", "--stories-x", (dir / "x.jsonl").string(),
                    "--stories-y", (dir / "y.jsonl").string(), "--out-dir", (dir / "ev").string()});
  EXPECT_EQ(r.code, cli::kExitConfig);
  EXPECT_NE(r.err.find("\n  1 (missing from"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("\n  10 (missing from"), std::string::npos) << r.err;
}

TEST(Eval, WritesAllArtifacts) {
  TempDir dir;
  ASSERT_EQ(run_cli(generate_args("swag", dir / "x.jsonl")).code, 0);
  ASSERT_EQ(run_cli(generate_args("e2e", dir / "y.jsonl")).code, 0);
  auto r = run_cli({"eval", "--config", kDesk + "/config.json", "--stories-x", (dir / "x.jsonl").string(),
                    "--stories-y", (dir / "y.jsonl").string(), "--out-dir", (dir / "ev").string(),
                    "--policy", "attempted"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto summary = json::parse(io::read_text(dir / "ev/summary.json"));
  EXPECT_EQ(summary["method_x"], "swag");
  EXPECT_EQ(summary["method_y"], "e2e");
  EXPECT_EQ(summary["attempted"], 10);
  EXPECT_EQ(summary["policy"], "attempted");
  EXPECT_TRUE(summary.contains("win_rate_valid"));
  EXPECT_EQ(io::read_text(dir / "ev/summary.md").rfind("| swag vs e2e |", 0), 0u);
  EXPECT_NE(r.out.find("| swag vs e2e |"), std::string::npos);
  std::size_t flips = 0, rows = 0;
  io::read_jsonl(dir / "ev/judgments.jsonl", [&](std::size_t, const json& j) {
    ++rows;
    flips += j["presented_a"] == "e2e";
  });
  EXPECT_EQ(rows, 10u);
  EXPECT_EQ(flips, 5u);
  EXPECT_TRUE(std::filesystem::exists(dir / "ev/manifest.json"));
}

TEST(DpoCheck, ReportAndErrors) {
  TempDir dir;
  io::write_text(dir / "lp.jsonl",
                 R"({"logp_chosen_policy":-1,"logp_rejected_policy":-3,"logp_chosen_ref":-2,"logp_rejected_ref":-2})"
                 "\n");
  auto ok = run_cli({"dpo-check", "--logprobs", (dir / "lp.jsonl").string(), "--beta", "0.1"});
  ASSERT_EQ(ok.code, 0) << ok.err;
  const auto report = json::parse(ok.out);
  EXPECT_NEAR(report["mean_loss"].get<double>(), 0.5981389, 1e-7);
  EXPECT_EQ(report["accuracy"], 1.0);

  io::write_text(dir / "bad.jsonl", "{\"logp_chosen_policy\": -1}\n");
  auto bad = run_cli({"dpo-check", "--logprobs", (dir / "bad.jsonl").string()});
  EXPECT_EQ(bad.code, cli::kExitConfig);
  EXPECT_NE(bad.err.find("bad.jsonl:1"), std::string::npos) << bad.err;

  io::write_text(dir / "empty.jsonl", "\n");
  auto empty = run_cli({"dpo-check", "--logprobs", (dir / "empty.jsonl").string()});
  EXPECT_EQ(empty.code, cli::kExitConfig);
  EXPECT_NE(empty.err.find("EmptyBatch"), std::string::npos);
}

/// Writes x/y story corpora where the judge script below yields the given
/// counts from x's side.
void write_tournament_fixture(const TempDir& dir, std::size_t wins, std::size_t losses, std::size_t ties) {
  std::vector<json> xs, ys;
  std::size_t n = wins + losses + ties;
  for (std::size_t i = 0; i < n; ++i) {
    Story x, y;
    x.state.prompt = y.state.prompt = StoryPrompt::make(std::to_string(i + 1), "Prompt " + std::to_string(i));
    const char* tag = i < wins ? "WIN" : i < wins + losses ? "LOSE" : "EVEN";
    x.state.paragraphs = {std::string(tag) + " story " + std::to_string(i)};
    y.state.paragraphs = {"baseline story " + std::to_string(i)};
    x.mode = StoryMode::swag;
    y.mode = StoryMode::e2e;
    xs.push_back(io::to_json(x, false));
    ys.push_back(io::to_json(y, false));
  }
  io::write_text(dir / "x.jsonl", io::to_jsonl(xs));
  io::write_text(dir / "y.jsonl", io::to_jsonl(ys));
  io::write_text(dir / "c.json", R"({"backends": {"judge": {"type": "scripted", "script": {"mode": "rules",
    "rules": [{"contains": "Story A:\nWIN", "reply": "[[A]]"}, {"contains": "Story B:\nWIN", "reply": "[[B]]"},
              {"contains": "Story A:\nLOSE", "reply": "[[B]]"}, {"contains": "Story B:\nLOSE", "reply": "[[A]]"}],
    "fallback": "[[C]]"}}}})");
}

TEST(Eval, ReproducesReportedCounts) {
  TempDir dir;
  write_tournament_fixture(dir, 58, 22, 20);
  auto r = run_cli({"eval", "--config", (dir / "c.json").string(), "--stories-x", (dir / "x.jsonl").string(),
                    "--stories-y", (dir / "y.jsonl").string(), "--out-dir", (dir / "ev").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("| swag | 68.0% | 58 | 22 | 20 | 0 |"), std::string::npos) << r.out;
}

TEST(Eval, IdenticalCorporaWithTieJudgeGiveHalf) {
  TempDir dir;
  write_tournament_fixture(dir, 0, 0, 6);
  auto r = run_cli({"eval", "--config", (dir / "c.json").string(), "--stories-x", (dir / "x.jsonl").string(),
                    "--stories-y", (dir / "x.jsonl").string(), "--out-dir", (dir / "ev").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto summary = json::parse(io::read_text(dir / "ev/summary.json"));
  EXPECT_EQ(summary["win_rate"], 0.5);
  EXPECT_NE(summary["method_x"], summary["method_y"]);
}

TEST(Dataset, StatsOnEmptyCorpus) {
  TempDir dir;
  io::write_text(dir / "empty.jsonl", "");
  auto r = run_cli({"dataset", "stats", "--records", (dir / "empty.jsonl").string()});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "");
}

TEST(Dataset, SplitSizes) {
  TempDir dir;
  std::string text;
  for (int i = 0; i < 10; ++i) text += "{\"n\":" + std::to_string(i) + "}\n";
  io::write_text(dir / "in.jsonl", text);
  ASSERT_EQ(run_cli({"dataset", "split", "--records", (dir / "in.jsonl").string(), "--sft", "5", "--dpo", "3",
                     "--eval", "2", "--out-dir", (dir / "out").string()}).code, 0);
  auto lines = [&](const char* name) {
    std::size_t n = 0;
    io::read_jsonl(dir / "out" / name, [&](std::size_t, const json&) { ++n; });
    return n;
  };
  EXPECT_EQ(lines("sft.jsonl"), 5u);
  EXPECT_EQ(lines("dpo.jsonl"), 3u);
  EXPECT_EQ(lines("eval.jsonl"), 2u);
}

TEST(DpoCheck, AllEqualLogProbs) {
  TempDir dir;
  std::string text;
  for (int i = 0; i < 4; ++i) {
    text += R"({"logp_chosen_policy":-4,"logp_rejected_policy":-4,"logp_chosen_ref":-4,"logp_rejected_ref":-4})" "\n";
  }
  io::write_text(dir / "lp.jsonl", text);
  auto r = run_cli({"dpo-check", "--logprobs", (dir / "lp.jsonl").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = json::parse(r.out);
  EXPECT_NEAR(report["mean_loss"].get<double>(), std::log(2.0), 1e-12);
  EXPECT_EQ(report["accuracy"], 0.5);
}

}  // namespace
}  // namespace swag
