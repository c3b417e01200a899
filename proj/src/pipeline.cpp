#include "tsf/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include "json.hpp"

#include "detail/sha256.hpp"
#include "tsf/neighbors.hpp"
#include "tsf/parsing.hpp"

namespace tsf {

namespace {

std::string shortest(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

template <typename Range, typename Fn>
std::string join(const Range& items, Fn&& fn) {
  std::string out;
  for (const auto& item : items) {
    if (!out.empty()) out += ",";
    out += fn(item);
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Job {
  PromptStrategy strategy;
  std::size_t window_index;
};

}  // namespace

void RunConfig::validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::ConfigError, why); };
  if (horizons.empty()) fail("at least one horizon is required");
  if (std::find(horizons.begin(), horizons.end(), std::size_t{0}) != horizons.end()) fail("horizons must be >= 1");
  if (strategies.empty()) fail("at least one strategy is required");
  if (context_len < std::max<std::size_t>(patch_window, 1)) {
    fail("context length " + std::to_string(context_len) + " is shorter than the patch window");
  }
  if (patch_window == 0 || patch_stride == 0) fail("patch window and stride must be >= 1");
  if (stride == 0) fail("eval stride must be >= 1");
  if (k == 0) fail("k must be >= 1");
  backend.validate();
  if (backend.kind == BackendKind::Http && backend.api_key.empty()) {
    fail("the http backend needs TSF_API_KEY in the environment");
  }
}

std::map<std::string, std::string> RunConfig::snapshot() const {
  std::map<std::string, std::string> s;
  s["dataset"] = dataset_path.generic_string();
  s["schema"] = schema_path.generic_string();
  s["features"] = join(features, [](const std::string& f) { return f; });
  s["context_len"] = std::to_string(context_len);
  s["horizons"] = join(horizons, [](std::size_t h) { return std::to_string(h); });
  s["stride"] = std::to_string(stride);
  s["strategies"] = join(strategies, [](PromptStrategy p) { return std::string(strategy_name(p)); });
  s["patch_window"] = std::to_string(patch_window);
  s["patch_stride"] = std::to_string(patch_stride);
  s["k"] = std::to_string(k);
  s["backend"] = std::string(to_string(backend.kind));
  s["endpoint"] = backend.endpoint_url;
  s["model"] = backend.model_name;
  s["temperature"] = shortest(backend.temperature);
  s["max_windows"] = std::to_string(max_windows);
  s["seed"] = std::to_string(seed);
  s["lenient"] = lenient ? "true" : "false";
  s["znorm_neighbors"] = znorm_neighbors ? "true" : "false";
  s["neighbor_continuation"] = neighbor_continuation ? "true" : "false";
  s["generic_zeroshot"] = generic_zeroshot ? "true" : "false";
  s["templates"] = templates_dir.generic_string();
  return s;
}

std::vector<EvalWindow> select_windows(const Series& series, const RunConfig& cfg, std::size_t horizon) {
  auto all = slice_windows(series, cfg.context_len, horizon, cfg.stride);
  std::erase_if(all, [&](const EvalWindow& w) { return w.context_start < cfg.context_len; });
  if (cfg.max_windows == 0 || all.size() <= cfg.max_windows) return all;

  // Partial Fisher-Yates with a plain modulo draw: std distributions are not
  // specified bit-for-bit across standard libraries.
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                    static_cast<std::uint32_t>(horizon)};
  std::mt19937_64 rng(seq);
  std::vector<std::size_t> idx(all.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < cfg.max_windows; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(cfg.max_windows);
  std::sort(idx.begin(), idx.end());
  std::vector<EvalWindow> picked;
  picked.reserve(idx.size());
  for (auto i : idx) picked.push_back(std::move(all[i]));
  return picked;
}

std::string WindowFailure::describe() const {
  return "strategy=" + strategy + " horizon=" + std::to_string(horizon) + " window=" + window_id + ": " + message;
}

std::string report_dataset_label(const Dataset& dataset, const Series& series) {
  return dataset.series.size() > 1 ? dataset.name + "/" + series.id : dataset.name;
}

RunOutcome run_pipeline(const Dataset& dataset, const RunConfig& cfg, std::shared_ptr<Backend> backend,
                        const TemplateLibrary& templates) {
  cfg.validate();
  RunOutcome outcome;
  for (auto s : cfg.strategies) {
    outcome.template_versions.push_back(templates.for_strategy(s, cfg.generic_zeroshot).version);
  }

  std::vector<const Series*> selected;
  if (cfg.features.empty()) {
    for (const auto& s : dataset.series) selected.push_back(&s);
  } else {
    for (const auto& f : cfg.features) selected.push_back(&dataset.find(f));
  }

  const bool any_neighbors = std::any_of(cfg.strategies.begin(), cfg.strategies.end(), uses_neighbors);
  Gateway gateway(std::move(backend), cfg.backend.parallelism);
  const auto config = cfg.snapshot();
  ParseOptions parse_options;
  parse_options.lenient = cfg.lenient;

  for (const Series* series : selected) {
    PromptParams params = PromptParams::for_series(*series, dataset.utc_offset_minutes);
    params.patch_window = cfg.patch_window;
    params.patch_stride = cfg.patch_stride;
    params.neighbor_continuation = cfg.neighbor_continuation;
    params.generic_zeroshot_system = cfg.generic_zeroshot;
    const std::string label = report_dataset_label(dataset, *series);

    for (std::size_t horizon : cfg.horizons) {
      std::vector<EvalWindow> windows;
      try {
        windows = select_windows(*series, cfg, horizon);
      } catch (const Error& e) {
        outcome.failures.push_back({series->id, "*", horizon, "-", e.code(), e.what()});
        continue;
      }

      std::vector<std::optional<NeighborSet>> neighbors(windows.size());
      if (any_neighbors) {
        TopKOptions topk_options;
        topk_options.znormalize = cfg.znorm_neighbors;
        for (std::size_t i = 0; i < windows.size(); ++i) {
          try {
            const auto pool = build_pool(dataset, windows[i]);
            neighbors[i] = top_k(windows[i], pool, cfg.k, topk_options);
          } catch (const Error& e) {
            outcome.failures.push_back({series->id, "neighbors", horizon, windows[i].id(), e.code(), e.what()});
          }
        }
      }

      std::vector<PromptBundle> bundles;
      std::vector<Job> jobs;
      for (auto strategy : cfg.strategies) {
        for (std::size_t i = 0; i < windows.size(); ++i) {
          if (uses_neighbors(strategy) && !neighbors[i]) continue;
          try {
            bundles.push_back(assemble(strategy, windows[i], params,
                                       uses_neighbors(strategy) ? neighbors[i] : std::nullopt, templates));
            jobs.push_back({strategy, i});
          } catch (const Error& e) {
            outcome.failures.push_back(
                {series->id, std::string(strategy_name(strategy)), horizon, windows[i].id(), e.code(), e.what()});
          }
        }
      }

      const auto dispatched = gateway.dispatch(bundles);

      for (auto strategy : cfg.strategies) {
        const std::string name(strategy_name(strategy));
        std::vector<WindowResult> results;
        std::string token_source;
        for (std::size_t j = 0; j < jobs.size(); ++j) {
          if (jobs[j].strategy != strategy) continue;
          const EvalWindow& w = windows[jobs[j].window_index];
          const DispatchResult& d = dispatched[j];
          if (!d.response) {
            outcome.failures.push_back(
                {series->id, name, horizon, w.id(), d.error_code.value_or(ErrorCode::TransportError), d.error});
            continue;
          }
          const LlmResponse& resp = *d.response;
          if (token_source.empty()) token_source = std::string(to_string(resp.token_source));

          WindowResult r;
          try {
            Forecast f = parse_forecast(resp.text, horizon, parse_options);
            r = WindowResult::scored(w.id(), f.values, w.truth);
            r.repaired = f.repaired;
            if (echoes_patches(strategy) && f.echoed_patches) {
              if (auto ref = reference_patches(strategy, w, params)) {
                r.patch_exact_fraction = patch_fidelity(*f.echoed_patches, *ref).exact_fraction;
              }
            }
          } catch (const Error& e) {
            r = WindowResult::failed(w.id(), w.truth, e.what());
          }
          r.input_tokens = resp.input_tokens;
          r.output_tokens = resp.output_tokens;
          r.latency_seconds = resp.latency_seconds;
          results.push_back(std::move(r));
        }
        if (results.empty()) continue;

        RunMetadata meta{label,
                         name,
                         horizon,
                         templates.for_strategy(strategy, cfg.generic_zeroshot).version,
                         gateway.backend().id(),
                         token_source,
                         config};
        try {
          outcome.reports.push_back(aggregate(results, meta));
        } catch (const Error& e) {
          outcome.failures.push_back({series->id, name, horizon, "*", e.code(), e.what()});
        }
      }
    }
  }
  return outcome;
}

Dataset load_dataset(const RunConfig& cfg) {
  if (cfg.dataset_path.empty()) throw Error(ErrorCode::ConfigError, "no dataset given");
  const CsvSchema schema = cfg.schema_path.empty() ? CsvSchema{} : CsvSchema::from_json_file(cfg.schema_path);
  return load_csv(cfg.dataset_path, schema);
}

TemplateLibrary load_templates(const RunConfig& cfg) {
  return cfg.templates_dir.empty() ? TemplateLibrary::builtin() : TemplateLibrary::from_directory(cfg.templates_dir);
}

std::string render_manifest(const RunConfig& cfg, const RunOutcome& outcome, const std::string& backend_id) {
  nlohmann::ordered_json j;
  j["config"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : cfg.snapshot()) j["config"][k] = v;
  j["dataset_sha256"] = cfg.dataset_path.empty() ? std::string() : detail::sha256_hex(read_file(cfg.dataset_path));
  j["backend_id"] = backend_id;
  j["fixtures"] = cfg.backend.fixture_path.generic_string();
  j["templates"] = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < cfg.strategies.size() && i < outcome.template_versions.size(); ++i) {
    j["templates"][std::string(strategy_name(cfg.strategies[i]))] = outcome.template_versions[i];
  }
  j["reports"] = outcome.reports.size();
  j["failures"] = nlohmann::ordered_json::array();
  for (const auto& f : outcome.failures) j["failures"].push_back(f.describe());
  return j.dump(2) + "\n";
}

std::filesystem::path manifest_path(const std::filesystem::path& report_path) {
  auto p = report_path;
  p += ".manifest.json";
  return p;
}

}  // namespace tsf
