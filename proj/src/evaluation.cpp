#include "tsf/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include "json.hpp"

#include "tsf/error.hpp"

namespace tsf {

namespace {

using ordered_json = nlohmann::ordered_json;

void check_lengths(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size() || pred.empty()) {
    throw Error(ErrorCode::LengthMismatch,
                "pred has " + std::to_string(pred.size()) + " values, truth has " + std::to_string(truth.size()));
  }
}

std::string shortest(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

// Four decimals like the published tables; tiny nonzero values switch to
// scientific so they do not print as zero.
std::string table_number(double x) {
  char buf[64];
  if (x != 0.0 && std::abs(x) < 5e-5) {
    std::snprintf(buf, sizeof buf, "%.2e", x);
  } else {
    std::snprintf(buf, sizeof buf, "%.4f", x);
  }
  return buf;
}

double mean_of(double sum, std::size_t n) { return n == 0 ? 0.0 : sum / static_cast<double>(n); }

ordered_json to_json(const RunReport& r) {
  ordered_json j;
  j["dataset"] = r.dataset;
  j["strategy"] = r.strategy;
  j["horizon"] = r.horizon;
  j["n_windows"] = r.n_windows;
  j["n_parsed"] = r.n_parsed;
  j["n_repaired"] = r.n_repaired;
  j["parse_failure_rate"] = r.parse_failure_rate;
  j["mean_mse"] = r.mean_mse;
  j["mean_mae"] = r.mean_mae;
  j["total_input_tokens"] = r.total_input_tokens;
  j["total_output_tokens"] = r.total_output_tokens;
  j["mean_input_tokens"] = r.mean_input_tokens;
  j["mean_output_tokens"] = r.mean_output_tokens;
  j["mean_latency_seconds"] = r.mean_latency_seconds;
  j["n_patch_echoes"] = r.n_patch_echoes;
  j["mean_patch_exact_fraction"] =
      r.mean_patch_exact_fraction ? ordered_json(*r.mean_patch_exact_fraction) : ordered_json(nullptr);
  j["token_source"] = r.token_source;
  j["template_version"] = r.template_version;
  j["backend_id"] = r.backend_id;
  j["config"] = ordered_json::object();
  for (const auto& [k, v] : r.config) j["config"][k] = v;
  return j;
}

RunReport from_json(const nlohmann::json& j) {
  RunReport r;
  r.dataset = j.at("dataset").get<std::string>();
  r.strategy = j.at("strategy").get<std::string>();
  r.horizon = j.at("horizon").get<std::size_t>();
  r.n_windows = j.at("n_windows").get<std::size_t>();
  r.n_parsed = j.at("n_parsed").get<std::size_t>();
  r.n_repaired = j.value("n_repaired", std::size_t{0});
  r.parse_failure_rate = j.at("parse_failure_rate").get<double>();
  r.mean_mse = j.at("mean_mse").get<double>();
  r.mean_mae = j.at("mean_mae").get<double>();
  r.total_input_tokens = j.at("total_input_tokens").get<std::size_t>();
  r.total_output_tokens = j.at("total_output_tokens").get<std::size_t>();
  r.mean_input_tokens = j.at("mean_input_tokens").get<double>();
  r.mean_output_tokens = j.at("mean_output_tokens").get<double>();
  r.mean_latency_seconds = j.at("mean_latency_seconds").get<double>();
  r.n_patch_echoes = j.value("n_patch_echoes", std::size_t{0});
  if (j.contains("mean_patch_exact_fraction") && !j["mean_patch_exact_fraction"].is_null()) {
    r.mean_patch_exact_fraction = j["mean_patch_exact_fraction"].get<double>();
  }
  r.token_source = j.value("token_source", "");
  r.template_version = j.value("template_version", "");
  r.backend_id = j.value("backend_id", "");
  r.config = j.value("config", std::map<std::string, std::string>{});
  return r;
}

std::string render_json(std::span<const RunReport> reports) {
  ordered_json arr = ordered_json::array();
  for (const auto& r : reports) arr.push_back(to_json(r));
  return arr.dump(2) + "\n";
}

std::string render_csv(std::span<const RunReport> reports) {
  std::string out = "dataset,strategy,horizon,n_windows,n_parsed,mean_mse,mean_mae,mean_it,mean_ot,mean_latency_s\n";
  for (const auto& r : reports) {
    out += r.dataset + "," + r.strategy + "," + std::to_string(r.horizon) + "," + std::to_string(r.n_windows) + "," +
           std::to_string(r.n_parsed) + "," + shortest(r.mean_mse) + "," + shortest(r.mean_mae) + "," +
           shortest(r.mean_input_tokens) + "," + shortest(r.mean_output_tokens) + "," +
           shortest(r.mean_latency_seconds) + "\n";
  }
  return out;
}

// Dataset x Horizon rows, one MSE and one MAE column per strategy.
std::string render_markdown(std::span<const RunReport> reports) {
  std::vector<std::string> strategies;
  std::vector<std::pair<std::string, std::size_t>> keys;
  for (const auto& r : reports) {
    if (std::find(strategies.begin(), strategies.end(), r.strategy) == strategies.end()) {
      strategies.push_back(r.strategy);
    }
    const auto key = std::make_pair(r.dataset, r.horizon);
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
  }
  std::sort(keys.begin(), keys.end());

  std::string out = "| Dataset | Horizon |";
  std::string rule = "|---|---|";
  for (const auto& s : strategies) {
    out += " " + s + " MSE | " + s + " MAE |";
    rule += "---|---|";
  }
  out += "\n" + rule + "\n";
  for (const auto& [dataset, horizon] : keys) {
    out += "| " + dataset + " | " + std::to_string(horizon) + " |";
    for (const auto& s : strategies) {
      auto it = std::find_if(reports.begin(), reports.end(), [&](const RunReport& r) {
        return r.dataset == dataset && r.horizon == horizon && r.strategy == s;
      });
      if (it == reports.end()) {
        out += " - | - |";
      } else {
        out += " " + table_number(it->mean_mse) + " | " + table_number(it->mean_mae) + " |";
      }
    }
    out += "\n";
  }
  return out;
}

std::string bold_if(bool bold, const std::string& cell) { return bold ? "**" + cell + "**" : cell; }

}  // namespace

double mse(std::span<const double> pred, std::span<const double> truth) {
  check_lengths(pred, truth);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    sum += d * d;
  }
  return sum / static_cast<double>(pred.size());
}

double mae(std::span<const double> pred, std::span<const double> truth) {
  check_lengths(pred, truth);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += std::abs(pred[i] - truth[i]);
  return sum / static_cast<double>(pred.size());
}

WindowResult WindowResult::scored(std::string window_id, std::vector<double> forecast, std::vector<double> truth) {
  WindowResult r;
  r.mse = tsf::mse(forecast, truth);
  r.mae = tsf::mae(forecast, truth);
  r.window_id = std::move(window_id);
  r.forecast = std::move(forecast);
  r.truth = std::move(truth);
  return r;
}

WindowResult WindowResult::failed(std::string window_id, std::vector<double> truth, std::string reason) {
  WindowResult r;
  r.window_id = std::move(window_id);
  r.truth = std::move(truth);
  r.parse_status = ParseStatus::Failed;
  r.failure_reason = std::move(reason);
  return r;
}

RunReport aggregate(std::span<const WindowResult> results, const RunMetadata& meta) {
  if (results.empty()) throw Error(ErrorCode::NoParsedWindows, "no windows to aggregate");

  std::vector<const WindowResult*> ordered;
  ordered.reserve(results.size());
  for (const auto& r : results) ordered.push_back(&r);
  std::sort(ordered.begin(), ordered.end(), [](const WindowResult* a, const WindowResult* b) {
    return std::tie(a->window_id, a->mse, a->mae, a->input_tokens, a->output_tokens, a->latency_seconds) <
           std::tie(b->window_id, b->mse, b->mae, b->input_tokens, b->output_tokens, b->latency_seconds);
  });

  RunReport rep;
  rep.dataset = meta.dataset;
  rep.strategy = meta.strategy;
  rep.horizon = meta.horizon;
  rep.template_version = meta.template_version;
  rep.backend_id = meta.backend_id;
  rep.token_source = meta.token_source;
  rep.config = meta.config;
  rep.n_windows = ordered.size();

  double mse_sum = 0.0, mae_sum = 0.0, latency_sum = 0.0, patch_sum = 0.0;
  for (const auto* r : ordered) {
    rep.total_input_tokens += r->input_tokens;
    rep.total_output_tokens += r->output_tokens;
    latency_sum += r->latency_seconds;
    if (r->parse_status != ParseStatus::Ok) continue;
    ++rep.n_parsed;
    mse_sum += r->mse;
    mae_sum += r->mae;
    if (r->repaired) ++rep.n_repaired;
    if (r->patch_exact_fraction) {
      ++rep.n_patch_echoes;
      patch_sum += *r->patch_exact_fraction;
    }
  }
  if (rep.n_parsed == 0) {
    throw Error(ErrorCode::NoParsedWindows, "none of " + std::to_string(rep.n_windows) + " windows parsed");
  }
  rep.mean_mse = mean_of(mse_sum, rep.n_parsed);
  rep.mean_mae = mean_of(mae_sum, rep.n_parsed);
  rep.parse_failure_rate =
      static_cast<double>(rep.n_windows - rep.n_parsed) / static_cast<double>(rep.n_windows);
  rep.mean_input_tokens = mean_of(static_cast<double>(rep.total_input_tokens), rep.n_windows);
  rep.mean_output_tokens = mean_of(static_cast<double>(rep.total_output_tokens), rep.n_windows);
  rep.mean_latency_seconds = mean_of(latency_sum, rep.n_windows);
  if (rep.n_patch_echoes > 0) rep.mean_patch_exact_fraction = mean_of(patch_sum, rep.n_patch_echoes);
  return rep;
}

double improvement(double baseline_mse, double ours_mse) {
  if (baseline_mse == 0.0) throw Error(ErrorCode::ZeroBaseline, "baseline MSE is zero");
  return 100.0 * (baseline_mse - ours_mse) / baseline_mse;
}

double improvement(const RunReport& baseline, const RunReport& ours) {
  if (baseline.dataset != ours.dataset || baseline.horizon != ours.horizon) {
    throw Error(ErrorCode::MismatchedRuns, "cannot compare " + baseline.dataset + "/h" +
                                               std::to_string(baseline.horizon) + " with " + ours.dataset + "/h" +
                                               std::to_string(ours.horizon));
  }
  return improvement(baseline.mean_mse, ours.mean_mse);
}

std::optional<ReportFormat> parse_report_format(std::string_view name) {
  if (name == "json") return ReportFormat::Json;
  if (name == "csv") return ReportFormat::Csv;
  if (name == "markdown" || name == "md") return ReportFormat::Markdown;
  return std::nullopt;
}

ReportFormat format_for_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".csv") return ReportFormat::Csv;
  if (ext == ".md") return ReportFormat::Markdown;
  return ReportFormat::Json;
}

std::string render_report(std::span<const RunReport> reports, ReportFormat format) {
  switch (format) {
    case ReportFormat::Json:
      return render_json(reports);
    case ReportFormat::Csv:
      return render_csv(reports);
    case ReportFormat::Markdown:
      return render_markdown(reports);
  }
  return {};
}

void emit_report(std::span<const RunReport> reports, ReportFormat format, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << render_report(reports, format);
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::vector<RunReport> parse_report_json(std::string_view json) {
  try {
    const auto j = nlohmann::json::parse(json);
    std::vector<RunReport> out;
    for (const auto& item : j) out.push_back(from_json(item));
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IoError, std::string("malformed report: ") + e.what());
  }
}

std::vector<RunReport> load_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_report_json(ss.str());
}

std::vector<ComparisonRow> compare(std::span<const RunReport> a, std::span<const RunReport> b) {
  std::set<std::pair<std::string, std::size_t>> keys;
  for (const auto& r : a) keys.emplace(r.dataset, r.horizon);

  std::vector<ComparisonRow> rows;
  for (const auto& [dataset, horizon] : keys) {
    auto select = [&](std::span<const RunReport> side) {
      std::vector<const RunReport*> out;
      for (const auto& r : side) {
        if (r.dataset == dataset && r.horizon == horizon) out.push_back(&r);
      }
      return out;
    };
    const auto left = select(a);
    const auto right = select(b);
    const bool single = left.size() == 1 && right.size() == 1;
    for (const auto* x : left) {
      for (const auto* y : right) {
        if (!single && x->strategy != y->strategy) continue;
        ComparisonRow row{dataset, horizon, x->strategy, y->strategy, x->mean_mse, x->mean_mae,
                          y->mean_mse, y->mean_mae, std::nullopt};
        if (x->mean_mse != 0.0) row.improvement = improvement(*x, *y);
        rows.push_back(std::move(row));
      }
    }
  }
  if (rows.empty()) throw Error(ErrorCode::NoOverlap, "the two reports share no (dataset, horizon) key");
  return rows;
}

std::string render_comparison_markdown(std::span<const ComparisonRow> rows) {
  std::string out =
      "| Dataset | Horizon | A | B | A MSE | A MAE | B MSE | B MAE | Improvement |\n"
      "|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    char pct[32] = "n/a";
    if (r.improvement) std::snprintf(pct, sizeof pct, "%.2f%%", *r.improvement);
    out += "| " + r.dataset + " | " + std::to_string(r.horizon) + " | " + r.strategy_a + " | " + r.strategy_b +
           " | " + bold_if(r.mse_a < r.mse_b, table_number(r.mse_a)) + " | " +
           bold_if(r.mae_a < r.mae_b, table_number(r.mae_a)) + " | " +
           bold_if(r.mse_b < r.mse_a, table_number(r.mse_b)) + " | " +
           bold_if(r.mae_b < r.mae_a, table_number(r.mae_b)) + " | " + pct + " |\n";
  }
  return out;
}

std::string render_comparison_csv(std::span<const ComparisonRow> rows) {
  std::string out = "dataset,horizon,strategy_a,strategy_b,mse_a,mae_a,mse_b,mae_b,improvement_pct\n";
  for (const auto& r : rows) {
    out += r.dataset + "," + std::to_string(r.horizon) + "," + r.strategy_a + "," + r.strategy_b + "," +
           shortest(r.mse_a) + "," + shortest(r.mae_a) + "," + shortest(r.mse_b) + "," + shortest(r.mae_b) + "," +
           (r.improvement ? shortest(*r.improvement) : std::string()) + "\n";
  }
  return out;
}

}  // namespace tsf
