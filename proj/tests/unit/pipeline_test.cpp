#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "support/fake_llm_server.hpp"
#include "support/golden_fixture.hpp"
#include "tsf/pipeline.hpp"

using namespace tsf;
using namespace tsf::testing;

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("tsf_pipeline_" + std::to_string(::getpid()) + "_" + std::to_string(counter_++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  static inline int counter_ = 0;
  fs::path path_;
};

Dataset two_series_dataset() {
  Dataset ds = golden_dataset();
  Series t = ds.series[0];
  t.id = "temperature";
  for (auto& v : t.values) v = std::round((v / 4.0 + 1.0) * 100.0) / 100.0;
  ds.series.push_back(std::move(t));
  return ds;
}

RunConfig mock_config(std::vector<PromptStrategy> strategies, std::vector<std::size_t> horizons = {1, 3}) {
  RunConfig cfg;
  cfg.strategies = std::move(strategies);
  cfg.horizons = std::move(horizons);
  cfg.backend.kind = BackendKind::MockPersistence;
  return cfg;
}

// Metric fields only: record and replay runs differ in backend id.
void expect_same_metrics(const std::vector<RunReport>& a, const std::vector<RunReport>& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].dataset, b[i].dataset);
    EXPECT_EQ(a[i].strategy, b[i].strategy);
    EXPECT_EQ(a[i].horizon, b[i].horizon);
    EXPECT_EQ(a[i].n_windows, b[i].n_windows);
    EXPECT_EQ(a[i].n_parsed, b[i].n_parsed);
    EXPECT_EQ(a[i].mean_mse, b[i].mean_mse);
    EXPECT_EQ(a[i].mean_mae, b[i].mean_mae);
    EXPECT_EQ(a[i].total_input_tokens, b[i].total_input_tokens);
    EXPECT_EQ(a[i].total_output_tokens, b[i].total_output_tokens);
    EXPECT_EQ(a[i].mean_latency_seconds, b[i].mean_latency_seconds);
    EXPECT_EQ(a[i].mean_patch_exact_fraction, b[i].mean_patch_exact_fraction);
    EXPECT_EQ(a[i].template_version, b[i].template_version);
  }
}

// Answers in prose for every other window (stride 10 alternates the tens digit).
class FlakyBackend final : public Backend {
 public:
  LlmResponse complete(const PromptBundle& b) override {
    if (b.window_id[b.window_id.size() - 2] % 2 == 0) return MockPersistenceBackend{}.complete(b);
    LlmResponse r;
    r.text = "I am unable to forecast this.";
    return r;
  }
  std::string id() const override { return "flaky"; }
};

// Runs the CLI with TSF_API_KEY cleared unless `env` sets it.
// Keeps every bundle it is asked to complete.
class CapturingBackend final : public Backend {
 public:
  LlmResponse complete(const PromptBundle& b) override {
    std::lock_guard lock(mutex_);
    seen.push_back(b);
    return MockPersistenceBackend{}.complete(b);
  }
  std::string id() const override { return "capture"; }
  std::vector<PromptBundle> seen;

 private:
  std::mutex mutex_;
};

int run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = "env -u TSF_API_KEY " + env + " " + TSF_CLI_PATH + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(SelectWindows, SkipsWarmupAndKeepsTimeOrder) {
  const auto ds = golden_dataset();
  RunConfig cfg;
  const auto ws = select_windows(ds.series[0], cfg, 3);
  ASSERT_EQ(ws.size(), 3u);
  EXPECT_EQ(ws[0].context_start, 96u);
  EXPECT_EQ(ws[1].context_start, 192u);
  EXPECT_EQ(ws[2].context_start, 288u);
}

TEST(SelectWindows, SeededSubsample) {
  const auto ds = golden_dataset();
  RunConfig cfg;
  cfg.stride = 1;
  cfg.max_windows = 20;
  const auto a = select_windows(ds.series[0], cfg, 2);
  const auto b = select_windows(ds.series[0], cfg, 2);
  ASSERT_EQ(a.size(), 20u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].context_start, b[i].context_start);
    EXPECT_GE(a[i].context_start, 96u);
    if (i > 0) EXPECT_LT(a[i - 1].context_start, a[i].context_start);
  }
  cfg.seed = 7;
  const auto c = select_windows(ds.series[0], cfg, 2);
  std::set<std::size_t> sa, sc;
  for (const auto& w : a) sa.insert(w.context_start);
  for (const auto& w : c) sc.insert(w.context_start);
  EXPECT_NE(sa, sc);

  cfg.max_windows = 0;
  EXPECT_EQ(select_windows(ds.series[0], cfg, 2).size(), 400u - 96 - 96 - 2 + 1);
}

TEST(RunConfig, Validation) {
  RunConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.horizons = {0};
  EXPECT_THROW(cfg.validate(), Error);
  cfg = RunConfig{};
  cfg.context_len = 2;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = RunConfig{};
  cfg.backend.kind = BackendKind::Http;
  cfg.backend.endpoint_url = "http://127.0.0.1:9/v1";
  cfg.backend.model_name = "m";
  try {
    cfg.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigError);
    EXPECT_NE(std::string(e.what()).find("TSF_API_KEY"), std::string::npos);
  }
  cfg.backend.api_key = "k";
  EXPECT_NO_THROW(cfg.validate());
}

TEST(RunPipeline, PersistenceOnConstantSeriesIsExact) {
  Series s;
  s.id = "flat";
  s.interval_seconds = 600;
  for (int i = 0; i < 500; ++i) {
    s.values.push_back(8.35);
    s.timestamps.push_back(static_cast<EpochSeconds>(i) * 600);
  }
  const Dataset ds{"flat", {s}, 0};
  auto cfg = mock_config({PromptStrategy::Zeroshot, PromptStrategy::PatchInstruct, PromptStrategy::Neighs});
  const auto out = run_pipeline(ds, cfg, std::make_shared<MockPersistenceBackend>(), TemplateLibrary::builtin());
  ASSERT_TRUE(out.ok());
  ASSERT_EQ(out.reports.size(), 6u);
  for (const auto& r : out.reports) {
    EXPECT_EQ(r.mean_mse, 0.0);
    EXPECT_EQ(r.mean_mae, 0.0);
  }
}

TEST(RunPipeline, EveryStrategyAndOrdering) {
  const auto ds = two_series_dataset();
  std::vector<PromptStrategy> all;
  for (auto name : {"zeroshot", "patch-instruct", "neighs", "patch-neighs", "basic-patch", "nonoverlap-patch",
                    "str-patch", "reverse-patch", "meta-patch"}) {
    all.push_back(*parse_strategy(name));
  }
  auto cfg = mock_config(all, {1, 12});
  cfg.backend.parallelism = 4;
  const auto out = run_pipeline(ds, cfg, std::make_shared<MockLinearBackend>(), TemplateLibrary::builtin());
  ASSERT_TRUE(out.ok());
  ASSERT_EQ(out.reports.size(), 2u * 2 * 9);
  std::size_t i = 0;
  for (const char* series : {"weather/humidity", "weather/temperature"}) {
    for (std::size_t h : {1u, 12u}) {
      for (auto s : all) {
        const auto& r = out.reports[i++];
        EXPECT_EQ(r.dataset, series);
        EXPECT_EQ(r.horizon, h);
        EXPECT_EQ(r.strategy, strategy_name(s));
        EXPECT_EQ(r.n_windows, 3u);
        EXPECT_EQ(r.n_parsed, 3u);
        EXPECT_EQ(r.backend_id, "mock-linear");
        EXPECT_EQ(r.token_source, "estimated");
      }
    }
  }
  EXPECT_EQ(out.template_versions.size(), 9u);
}

TEST(RunPipeline, FeatureSelection) {
  const auto ds = two_series_dataset();
  auto cfg = mock_config({PromptStrategy::Zeroshot}, {2});
  cfg.features = {"temperature"};
  const auto out = run_pipeline(ds, cfg, std::make_shared<MockPersistenceBackend>(), TemplateLibrary::builtin());
  ASSERT_EQ(out.reports.size(), 1u);
  EXPECT_EQ(out.reports[0].dataset, "weather/temperature");
  cfg.features = {"pressure"};
  EXPECT_THROW(run_pipeline(ds, cfg, std::make_shared<MockPersistenceBackend>(), TemplateLibrary::builtin()), Error);
}

TEST(RunPipeline, ParseFailuresAreCountedNotFatal) {
  const auto ds = golden_dataset();
  auto cfg = mock_config({PromptStrategy::PatchInstruct}, {1});
  cfg.stride = 10;
  cfg.max_windows = 0;
  const auto out = run_pipeline(ds, cfg, std::make_shared<FlakyBackend>(), TemplateLibrary::builtin());
  ASSERT_TRUE(out.ok());
  ASSERT_EQ(out.reports.size(), 1u);
  const auto& r = out.reports[0];
  EXPECT_LT(r.n_parsed, r.n_windows);
  EXPECT_GT(r.n_parsed, 0u);
  EXPECT_NEAR(r.parse_failure_rate, 1.0 - static_cast<double>(r.n_parsed) / r.n_windows, 1e-15);
}

TEST(RunPipeline, BackendErrorsAreFatalWithContext) {
  const auto ds = golden_dataset();
  auto cfg = mock_config({PromptStrategy::Neighs}, {2});
  cfg.backend.kind = BackendKind::Replay;
  cfg.backend.fixture_path = "unused.jsonl";
  const auto out = run_pipeline(ds, cfg, std::make_shared<ReplayBackend>(FixtureStore{}), TemplateLibrary::builtin());
  EXPECT_FALSE(out.ok());
  EXPECT_TRUE(out.reports.empty());
  ASSERT_EQ(out.failures.size(), 3u);
  EXPECT_EQ(out.failures[0].code, ErrorCode::ReplayMiss);
  const auto text = out.failures[0].describe();
  EXPECT_NE(text.find("strategy=neighs"), std::string::npos);
  EXPECT_NE(text.find("horizon=2"), std::string::npos);
  EXPECT_NE(text.find("window=humidity@96"), std::string::npos);
}

TEST(RunPipeline, PromptFlagsReachTheBundles) {
  const auto ds = golden_dataset();
  auto cfg = mock_config({PromptStrategy::Zeroshot, PromptStrategy::Neighs}, {2});
  auto plain = std::make_shared<CapturingBackend>();
  run_pipeline(ds, cfg, plain, TemplateLibrary::builtin());
  cfg.neighbor_continuation = true;
  cfg.generic_zeroshot = true;
  auto flagged = std::make_shared<CapturingBackend>();
  run_pipeline(ds, cfg, flagged, TemplateLibrary::builtin());
  ASSERT_EQ(plain->seen.size(), flagged->seen.size());
  // Neighbors that end right at the target context have no continuation to show.
  std::size_t with_continuation = 0;
  for (std::size_t i = 0; i < plain->seen.size(); ++i) {
    const auto& a = plain->seen[i];
    const auto& b = flagged->seen[i];
    if (a.strategy == PromptStrategy::Zeroshot) {
      EXPECT_TRUE(a.system.empty());
      EXPECT_FALSE(b.system.empty());
    } else {
      EXPECT_EQ(a.user.find("followed by"), std::string::npos);
      if (b.user.find("followed by") != std::string::npos) ++with_continuation;
    }
  }
  EXPECT_GT(with_continuation, 0u);
}

TEST(RecordReplay, ReportsMatchAndTemplateDriftMisses) {
  FakeLlmServer server;
  const auto ds = golden_dataset();
  auto cfg = mock_config({PromptStrategy::PatchInstruct, PromptStrategy::PatchInstructNeighs}, {1, 3});
  cfg.backend.kind = BackendKind::Http;
  cfg.backend.endpoint_url = server.endpoint();
  cfg.backend.model_name = "test-model";
  cfg.backend.api_key = "secret";
  cfg.backend.parallelism = 3;

  auto recorder = std::make_shared<RecordingBackend>(make_backend(cfg.backend));
  const auto recorded = run_pipeline(ds, cfg, recorder, TemplateLibrary::builtin());
  ASSERT_TRUE(recorded.ok());
  EXPECT_EQ(recorder->fixtures().size(), 12u);
  for (const auto& r : recorded.reports) {
    EXPECT_EQ(r.token_source, "reported");
    ASSERT_TRUE(r.mean_patch_exact_fraction);
    if (r.strategy == "patch-instruct") EXPECT_EQ(*r.mean_patch_exact_fraction, 1.0);
  }

  TempDir dir;
  recorder->fixtures().save(dir / "fixtures.jsonl");
  auto replay_cfg = cfg;
  replay_cfg.backend.kind = BackendKind::Replay;
  replay_cfg.backend.fixture_path = dir / "fixtures.jsonl";
  const auto replayed = run_pipeline(ds, replay_cfg, make_backend(replay_cfg.backend), TemplateLibrary::builtin());
  ASSERT_TRUE(replayed.ok());
  expect_same_metrics(recorded.reports, replayed.reports);
  const auto again = run_pipeline(ds, replay_cfg, make_backend(replay_cfg.backend), TemplateLibrary::builtin());
  EXPECT_EQ(render_report(replayed.reports, ReportFormat::Json), render_report(again.reports, ReportFormat::Json));

  TemplateLibrary drifted = TemplateLibrary::builtin();
  auto tmpl = drifted.for_strategy(PromptStrategy::PatchInstruct);
  tmpl.version += "-edited";
  drifted.put(tmpl);
  const auto missed = run_pipeline(ds, replay_cfg, make_backend(replay_cfg.backend), drifted);
  EXPECT_FALSE(missed.ok());
  ASSERT_FALSE(missed.failures.empty());
  for (const auto& f : missed.failures) {
    EXPECT_EQ(f.code, ErrorCode::ReplayMiss);
    EXPECT_EQ(f.strategy, "patch-instruct");
  }
}

TEST(Manifest, RecordsConfigTemplatesAndBackend) {
  TempDir dir;
  const auto ds = golden_dataset();
  {
    std::ofstream csv(dir / "weather.csv");
    write_csv(ds, csv);
  }
  auto cfg = mock_config({PromptStrategy::Zeroshot, PromptStrategy::StrDecomposePI}, {1});
  cfg.dataset_path = dir / "weather.csv";
  const auto out = run_pipeline(load_dataset(cfg), cfg, make_backend(cfg.backend), load_templates(cfg));
  const auto j = nlohmann::json::parse(render_manifest(cfg, out, "mock-persistence"));
  EXPECT_EQ(j["backend_id"], "mock-persistence");
  EXPECT_EQ(j["config"]["strategies"], "zeroshot,str-patch");
  EXPECT_EQ(j["templates"]["str-patch"], TemplateLibrary::builtin().for_strategy(PromptStrategy::StrDecomposePI).version);
  EXPECT_EQ(j["dataset_sha256"].get<std::string>().size(), 64u);
  EXPECT_EQ(j["reports"], 2);
  EXPECT_TRUE(j["failures"].empty());
  EXPECT_EQ(manifest_path("r.json"), fs::path("r.json.manifest.json"));
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    std::ofstream csv(dir_ / "weather.csv");
    write_csv(two_series_dataset(), csv);
  }
  std::string data() const { return "--dataset " + (dir_ / "weather.csv").string(); }
  fs::path path(const std::string& name) const { return dir_ / name; }

  TempDir dir_;
};

TEST_F(Cli, RunWithMock) {
  const auto out = path("r.json");
  EXPECT_EQ(run_cli("run " + data() + " --strategy reverse-patch --horizon 3 --backend mock-persistence --out " +
                    out.string()),
            0);
  const auto reports = load_report(out);
  ASSERT_EQ(reports.size(), 2u);
  EXPECT_EQ(reports[0].strategy, "reverse-patch");
  EXPECT_EQ(reports[0].horizon, 3u);
  EXPECT_TRUE(fs::exists(manifest_path(out)));
}

TEST_F(Cli, OutputFormatsFollowExtension) {
  const auto csv = path("r.csv");
  ASSERT_EQ(run_cli("run " + data() + " --strategy zeroshot,neighs --horizon 1 --horizon 2 --out " + csv.string()), 0);
  const auto text = slurp(csv);
  EXPECT_EQ(text.rfind("dataset,strategy,horizon,", 0), 0u);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1 + 2 * 2 * 2);
  const auto md = path("r.md");
  ASSERT_EQ(run_cli("run " + data() + " --horizon 1 --out " + md.string()), 0);
  EXPECT_NE(slurp(md).find("| weather/humidity | 1 |"), std::string::npos);
}

TEST_F(Cli, HttpWithoutApiKeyIsAConfigError) {
  FakeLlmServer server;
  EXPECT_EQ(run_cli("run " + data() + " --backend http --endpoint " + server.endpoint() + " --model m --horizon 1 --out " +
                    path("r.json").string()),
            2);
  EXPECT_TRUE(server.requests().empty());
  EXPECT_FALSE(fs::exists(path("r.json")));
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run_cli("run " + data() + " --strategy bogus --out " + path("r.json").string()), 2);
  EXPECT_EQ(run_cli("record " + data() + " --backend mock-persistence --fixtures " + path("f.jsonl").string() +
                    " --out " + path("r.json").string()),
            2);
  EXPECT_FALSE(fs::exists(path("f.jsonl")));
  EXPECT_EQ(run_cli("replay " + data() + " --out " + path("r.json").string()), 2);
}

TEST_F(Cli, RecordReplayCompare) {
  FakeLlmServer server;
  const std::string common = data() + " --strategy patch-instruct,neighs --horizon 1,2 --parallel 2 --endpoint " +
                             server.endpoint() + " --model test-model --fixtures " + path("f.jsonl").string();
  ASSERT_EQ(run_cli("record " + common + " --backend http --out " + path("rec.json").string(), "TSF_API_KEY=secret"), 0);
  EXPECT_EQ(server.requests().size(), 2u * 2 * 2 * 3);
  EXPECT_EQ(server.requests()[0].authorization, "Bearer secret");

  // Replay needs neither the server nor the key.
  ASSERT_EQ(run_cli("replay " + common + " --out " + path("a.json").string()), 0);
  ASSERT_EQ(run_cli("replay " + common + " --out " + path("b.json").string()), 0);
  EXPECT_EQ(server.requests().size(), 2u * 2 * 2 * 3);
  EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));
  expect_same_metrics(load_report(path("rec.json")), load_report(path("a.json")));

  ASSERT_EQ(run_cli("compare " + path("a.json").string() + " " + path("a.json").string() + " -o " +
                    path("cmp.md").string()),
            0);
  const auto md = slurp(path("cmp.md"));
  EXPECT_NE(md.find("0.00%"), std::string::npos);
  EXPECT_EQ(md.find("**"), std::string::npos);

  // Editing a template changes the bundle hash, so replay misses.
  fs::create_directories(path("tmpl"));
  {
    std::ofstream t(path("tmpl") / "patch-instruct.txt");
    t << "# version: 9.9\n" << TemplateLibrary::builtin().for_strategy(PromptStrategy::PatchInstruct).system_text;
  }
  EXPECT_EQ(run_cli("replay " + common + " --templates " + path("tmpl").string() + " --out " + path("c.json").string()),
            1);
}

TEST_F(Cli, CompareDisjointReports) {
  ASSERT_EQ(run_cli("run " + data() + " --horizon 1 --out " + path("h1.json").string()), 0);
  ASSERT_EQ(run_cli("run " + data() + " --horizon 2 --out " + path("h2.json").string()), 0);
  EXPECT_EQ(run_cli("compare " + path("h1.json").string() + " " + path("h2.json").string()), 1);
}
