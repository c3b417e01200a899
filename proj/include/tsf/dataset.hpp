#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace tsf {

using EpochSeconds = std::int64_t;

/// One uniformly sampled, named sequence of finite values.
struct Series {
  std::string id;
  std::string description;  // e.g. "the total regional humidity"
  std::string label;        // short name used inside prompts, e.g. "Humidity"
  std::int64_t interval_seconds = 0;
  std::vector<EpochSeconds> timestamps;
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
};

/// A set of aligned series sharing one sampling grid.
struct Dataset {
  std::string name;
  std::vector<Series> series;
  int utc_offset_minutes = 0;  // clock used for time-of-day slots

  std::size_t feature_count() const noexcept { return series.size(); }
  std::int64_t interval_seconds() const { return series.empty() ? 0 : series.front().interval_seconds; }
  const Series& find(const std::string& id) const;
};

/// Column mapping for CSV ingestion. An empty value_columns list selects every
/// column other than the timestamp column.
struct CsvSchema {
  std::string name;
  std::string timestamp_column;
  std::vector<std::string> value_columns;
  std::map<std::string, std::string> descriptions;
  std::map<std::string, std::string> labels;
  int utc_offset_minutes = 0;
  std::int64_t interval_seconds = 0;  // only consulted for single-row files

  static CsvSchema from_json_file(const std::filesystem::path& path);
};

/// A context of L values followed by its h-value ground truth.
struct EvalWindow {
  std::string series_id;
  std::size_t context_start = 0;
  std::size_t horizon = 0;
  std::vector<double> context;
  std::vector<double> truth;
  std::vector<EpochSeconds> context_timestamps;

  std::size_t context_len() const noexcept { return context.size(); }
  /// Stable textual id, "series@start".
  std::string id() const;
};

/// Reads a header-first CSV file. With an empty timestamp_column the first
/// header column is used; with an empty name the file stem is used.
Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
Dataset parse_csv(std::istream& in, const CsvSchema& schema);

/// Writes epoch timestamps and format_value-rendered values.
void write_csv(const Dataset& dataset, std::ostream& out);

/// Parses `YYYY-MM-DDTHH:MM:SS` (a space separator is also accepted) as UTC.
EpochSeconds parse_iso8601(std::string_view text);

std::vector<EvalWindow> slice_windows(const Series& series, std::size_t context_len, std::size_t horizon,
                                      std::size_t stride);

/// Renders a finite value with at most max_decimals fractional digits.
/// Rounding is half-to-even on the shortest round-trip decimal form of x, so
/// 0.80325 renders as "0.8032". Trailing zeros are stripped, a leading zero is
/// kept for |x| < 1 and negative zero renders as "0".
std::string format_value(double x, int max_decimals = 4);

/// ", "-joined format_value rendering.
std::string join_values(std::span<const double> values, int max_decimals = 4);

/// "every 10 minutes", "every hour", ...
std::string describe_interval(std::int64_t seconds);
/// "10-min cadence", "1-hour cadence", ...
std::string describe_cadence(std::int64_t seconds);

}  // namespace tsf
