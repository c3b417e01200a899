// tsf: run, compare, record and replay forecasting benchmarks.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "tsf/evaluation.hpp"
#include "tsf/llm_gateway.hpp"
#include "tsf/pipeline.hpp"

namespace {

enum class Mode { Run, Record, Replay };

struct Flags {
  std::string dataset;
  std::string schema;
  std::vector<std::string> features;
  std::size_t context_len = tsf::kDefaultContextLen;
  std::vector<std::size_t> horizons = {1, 2, 3, 4, 5, 6, 12};
  std::size_t stride = tsf::kDefaultEvalStride;
  std::vector<std::string> strategies = {"patch-instruct"};
  std::size_t patch_window = tsf::kDefaultPatchWindow;
  std::size_t patch_stride = tsf::kDefaultPatchStride;
  std::size_t k = tsf::kDefaultNeighbors;
  std::string backend = "mock-persistence";
  std::string endpoint;
  std::string model;
  double temperature = 0.0;
  std::size_t parallel = 1;
  int timeout = 60;
  int retries = 3;
  std::size_t max_windows = tsf::kDefaultMaxWindows;
  std::uint64_t seed = 0;
  bool lenient = false;
  bool znorm_neighbors = false;
  bool neighbor_continuation = false;
  bool generic_zeroshot = false;
  std::string out = "report.json";
  std::string fixtures;
  std::string templates;
};

void add_run_options(CLI::App& app, Flags& f) {
  app.add_option("--dataset", f.dataset, "CSV file with a header row");
  app.add_option("--schema", f.schema, "JSON column schema");
  app.add_option("--features", f.features, "Series to evaluate (default: all)")->delimiter(',');
  app.add_option("--context-len", f.context_len, "Context length L")->capture_default_str();
  app.add_option("--horizon", f.horizons, "Forecast horizon, repeatable")->delimiter(',')->capture_default_str();
  app.add_option("--stride", f.stride, "Step between evaluation windows")->capture_default_str();
  app.add_option("--strategy", f.strategies, "Prompting strategy, repeatable")->delimiter(',')->capture_default_str();
  app.add_option("--patch-window", f.patch_window)->capture_default_str();
  app.add_option("--patch-stride", f.patch_stride)->capture_default_str();
  app.add_option("--k", f.k, "Neighbors per prompt")->capture_default_str();
  app.add_option("--backend", f.backend, "http, mock-persistence, mock-linear or replay")->capture_default_str();
  app.add_option("--endpoint", f.endpoint, "Chat completions base URL");
  app.add_option("--model", f.model);
  app.add_option("--temperature", f.temperature)->capture_default_str();
  app.add_option("--parallel", f.parallel, "Requests in flight")->capture_default_str();
  app.add_option("--timeout", f.timeout, "Per-request timeout in seconds")->capture_default_str();
  app.add_option("--retries", f.retries, "Retries after a failed request")->capture_default_str();
  app.add_option("--max-windows", f.max_windows, "Windows per feature and horizon, 0 for all")->capture_default_str();
  app.add_option("--seed", f.seed, "Window subsampling seed")->capture_default_str();
  app.add_flag("--lenient", f.lenient, "Truncate or pad wrong-length forecasts");
  app.add_flag("--znorm-neighbors", f.znorm_neighbors, "Rank neighbors on z-normalized windows");
  app.add_flag("--neighbor-continuation", f.neighbor_continuation,
               "Show each neighbor's known next values after its window");
  app.add_flag("--generic-zeroshot", f.generic_zeroshot, "Give zeroshot a one-line system prompt");
  app.add_option("--out", f.out, "Report path; .json, .csv or .md")->capture_default_str();
  app.add_option("--fixtures", f.fixtures, "Fixture file for record and replay");
  app.add_option("--templates", f.templates, "Directory overriding the builtin templates");
}

tsf::RunConfig to_config(const Flags& f, Mode mode) {
  tsf::RunConfig cfg;
  cfg.dataset_path = f.dataset;
  cfg.schema_path = f.schema;
  cfg.features = f.features;
  cfg.context_len = f.context_len;
  cfg.horizons = f.horizons;
  cfg.stride = f.stride;
  cfg.strategies.clear();
  for (const auto& name : f.strategies) {
    auto s = tsf::parse_strategy(name);
    if (!s) throw tsf::Error(tsf::ErrorCode::ConfigError, "unknown strategy '" + name + "'");
    cfg.strategies.push_back(*s);
  }
  cfg.patch_window = f.patch_window;
  cfg.patch_stride = f.patch_stride;
  cfg.k = f.k;
  const std::string backend = mode == Mode::Replay ? "replay" : f.backend;
  auto kind = tsf::parse_backend_kind(backend);
  if (!kind) throw tsf::Error(tsf::ErrorCode::ConfigError, "unknown backend '" + backend + "'");
  if (mode == Mode::Record && *kind != tsf::BackendKind::Http) {
    throw tsf::Error(tsf::ErrorCode::ConfigError, "only the http backend can be recorded");
  }
  cfg.backend.kind = *kind;
  cfg.backend.endpoint_url = f.endpoint;
  cfg.backend.model_name = f.model;
  cfg.backend.temperature = f.temperature;
  cfg.backend.parallelism = f.parallel;
  cfg.backend.timeout_seconds = f.timeout;
  cfg.backend.max_retries = f.retries;
  cfg.backend.fixture_path = f.fixtures;
  if (const char* key = std::getenv("TSF_API_KEY")) cfg.backend.api_key = key;
  if (mode != Mode::Run && f.fixtures.empty()) {
    throw tsf::Error(tsf::ErrorCode::ConfigError, "--fixtures is required");
  }
  cfg.max_windows = f.max_windows;
  cfg.seed = f.seed;
  cfg.lenient = f.lenient;
  cfg.znorm_neighbors = f.znorm_neighbors;
  cfg.neighbor_continuation = f.neighbor_continuation;
  cfg.generic_zeroshot = f.generic_zeroshot;
  cfg.out = f.out;
  cfg.templates_dir = f.templates;
  return cfg;
}

int execute(const Flags& flags, Mode mode) {
  const tsf::RunConfig cfg = to_config(flags, mode);
  cfg.validate();
  const tsf::Dataset dataset = tsf::load_dataset(cfg);
  const tsf::TemplateLibrary templates = tsf::load_templates(cfg);

  std::shared_ptr<tsf::RecordingBackend> recorder;
  std::shared_ptr<tsf::Backend> backend;
  if (mode == Mode::Record) {
    recorder = std::make_shared<tsf::RecordingBackend>(tsf::make_backend(cfg.backend));
    backend = recorder;
  } else {
    backend = tsf::make_backend(cfg.backend);
  }
  const std::string backend_id = backend->id();

  const auto outcome = tsf::run_pipeline(dataset, cfg, backend, templates);
  tsf::emit_report(outcome.reports, tsf::format_for_path(cfg.out), cfg.out);
  {
    std::ofstream manifest(tsf::manifest_path(cfg.out), std::ios::binary | std::ios::trunc);
    manifest << tsf::render_manifest(cfg, outcome, backend_id);
  }
  if (recorder) {
    recorder->fixtures().save(cfg.backend.fixture_path);
    std::cerr << "recorded " << recorder->fixtures().size() << " fixtures to " << cfg.backend.fixture_path.string()
              << "\n";
  }
  std::cerr << "wrote " << outcome.reports.size() << " reports to " << cfg.out.string() << "\n";
  if (!outcome.ok()) {
    std::cerr << outcome.failures.size() << " window failures:\n";
    for (const auto& f : outcome.failures) std::cerr << "  " << f.describe() << "\n";
    return 1;
  }
  return 0;
}

int compare_reports(const std::string& a, const std::string& b, const std::string& format, const std::string& out) {
  const auto left = tsf::load_report(a);
  const auto right = tsf::load_report(b);
  const auto rows = tsf::compare(left, right);
  const std::string text =
      format == "csv" ? tsf::render_comparison_csv(rows) : tsf::render_comparison_markdown(rows);
  if (out.empty()) {
    std::cout << text;
  } else {
    std::ofstream f(out, std::ios::binary | std::ios::trunc);
    if (!f) throw tsf::Error(tsf::ErrorCode::IoError, "cannot write " + out);
    f << text;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LLM time-series forecasting benchmark"};
  app.set_config("--config", "", "TOML or INI file mirroring the flags; flags take precedence");
  app.require_subcommand(1);

  Flags flags;
  add_run_options(app, flags);

  auto* run = app.add_subcommand("run", "Evaluate strategies against a backend");
  auto* record = app.add_subcommand("record", "Run against a live http backend and save fixtures");
  auto* replay = app.add_subcommand("replay", "Rerun offline from saved fixtures");
  for (auto* sub : {run, record, replay}) sub->fallthrough();

  std::string report_a, report_b, compare_format = "markdown", compare_out;
  auto* cmp = app.add_subcommand("compare", "Compare two reports; B's improvement over A");
  cmp->add_option("report_a", report_a, "Baseline report (JSON)")->required();
  cmp->add_option("report_b", report_b, "Candidate report (JSON)")->required();
  cmp->add_option("--format", compare_format, "markdown or csv")->check(CLI::IsMember({"markdown", "csv"}));
  cmp->add_option("-o,--output", compare_out, "Write here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*cmp) return compare_reports(report_a, report_b, compare_format, compare_out);
    if (*record) return execute(flags, Mode::Record);
    if (*replay) return execute(flags, Mode::Replay);
    return execute(flags, Mode::Run);
  } catch (const tsf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == tsf::ErrorCode::ConfigError ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
