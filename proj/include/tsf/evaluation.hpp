#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tsf {

double mse(std::span<const double> pred, std::span<const double> truth);
double mae(std::span<const double> pred, std::span<const double> truth);

enum class ParseStatus { Ok, Failed };

struct WindowResult {
  std::string window_id;
  std::vector<double> forecast;
  std::vector<double> truth;
  double mse = 0.0;
  double mae = 0.0;
  std::size_t input_tokens = 0;
  std::size_t output_tokens = 0;
  double latency_seconds = 0.0;
  ParseStatus parse_status = ParseStatus::Ok;
  std::string failure_reason;  // set when parse_status is Failed
  bool repaired = false;
  std::optional<double> patch_exact_fraction;

  /// Scores a parsed forecast against its truth.
  static WindowResult scored(std::string window_id, std::vector<double> forecast, std::vector<double> truth);
  static WindowResult failed(std::string window_id, std::vector<double> truth, std::string reason);
};

struct RunMetadata {
  std::string dataset;
  std::string strategy;
  std::size_t horizon = 0;
  std::string template_version;
  std::string backend_id;
  std::string token_source;
  std::map<std::string, std::string> config;
};

struct RunReport {
  std::string dataset;
  std::string strategy;
  std::size_t horizon = 0;
  std::size_t n_windows = 0;
  std::size_t n_parsed = 0;
  std::size_t n_repaired = 0;
  double parse_failure_rate = 0.0;
  double mean_mse = 0.0;
  double mean_mae = 0.0;
  std::size_t total_input_tokens = 0;
  std::size_t total_output_tokens = 0;
  double mean_input_tokens = 0.0;
  double mean_output_tokens = 0.0;
  double mean_latency_seconds = 0.0;
  std::size_t n_patch_echoes = 0;
  std::optional<double> mean_patch_exact_fraction;
  std::string token_source;
  std::string template_version;
  std::string backend_id;
  std::map<std::string, std::string> config;

  friend bool operator==(const RunReport&, const RunReport&) = default;
};

/// Error means cover parsed windows; token and latency figures cover every
/// dispatched window. The result does not depend on the order of `results`.
RunReport aggregate(std::span<const WindowResult> results, const RunMetadata& meta);

/// 100 * (baseline - ours) / baseline.
double improvement(double baseline_mse, double ours_mse);
double improvement(const RunReport& baseline, const RunReport& ours);

enum class ReportFormat { Json, Csv, Markdown };

std::optional<ReportFormat> parse_report_format(std::string_view name);
/// Format implied by a file extension; Json when unknown.
ReportFormat format_for_path(const std::filesystem::path& path);

std::string render_report(std::span<const RunReport> reports, ReportFormat format);
void emit_report(std::span<const RunReport> reports, ReportFormat format, const std::filesystem::path& path);

std::vector<RunReport> parse_report_json(std::string_view json);
std::vector<RunReport> load_report(const std::filesystem::path& path);

struct ComparisonRow {
  std::string dataset;
  std::size_t horizon = 0;
  std::string strategy_a;
  std::string strategy_b;
  double mse_a = 0.0;
  double mae_a = 0.0;
  double mse_b = 0.0;
  double mae_b = 0.0;
  std::optional<double> improvement;  // of b over a; empty for a zero baseline
};

/// Pairs reports on (dataset, horizon). When either side holds several
/// strategies for a key, only equal strategy names are paired. Raises NoOverlap
/// when nothing pairs.
std::vector<ComparisonRow> compare(std::span<const RunReport> a, std::span<const RunReport> b);

/// Side-by-side table; the lower MSE and MAE cell of each row is bolded.
std::string render_comparison_markdown(std::span<const ComparisonRow> rows);
std::string render_comparison_csv(std::span<const ComparisonRow> rows);

}  // namespace tsf
