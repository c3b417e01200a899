#include "tsf/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "tsf/error.hpp"

namespace tsf {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_row(std::string_view line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      fields.emplace_back(trim(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  fields.emplace_back(trim(current));
  return fields;
}

bool parse_double(std::string_view text, double& out) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return false;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && ptr == text.data() + text.size() && std::isfinite(out);
}

bool looks_like_epoch(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '-') text.remove_prefix(1);
  return !text.empty() && std::all_of(text.begin(), text.end(), [](char c) { return c >= '0' && c <= '9'; });
}

int parse_fixed_int(std::string_view text, std::size_t pos, std::size_t len) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, value);
  if (ec != std::errc{} || ptr != text.data() + pos + len) throw std::invalid_argument("bad digits");
  return value;
}

// Decimal digits of the shortest round-trip representation: |x| == digits * 10^exponent.
struct ShortestDecimal {
  bool negative = false;
  std::string digits;
  int exponent = 0;
};

ShortestDecimal shortest_decimal(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::scientific);
  std::string_view s(buf, static_cast<std::size_t>(ptr - buf));
  ShortestDecimal out;
  if (s.front() == '-') {
    out.negative = true;
    s.remove_prefix(1);
  }
  const auto e_pos = s.find('e');
  const std::string_view mantissa = s.substr(0, e_pos);
  int exp10 = 0;
  std::string_view exp_text = s.substr(e_pos + 1);
  if (exp_text.front() == '+') exp_text.remove_prefix(1);
  std::from_chars(exp_text.data(), exp_text.data() + exp_text.size(), exp10);
  for (char c : mantissa) {
    if (c != '.') out.digits.push_back(c);
  }
  out.exponent = exp10 - static_cast<int>(out.digits.size()) + 1;
  return out;
}

}  // namespace

const Series& Dataset::find(const std::string& id) const {
  for (const auto& s : series) {
    if (s.id == id) return s;
  }
  throw Error(ErrorCode::MissingColumn, "no series named '" + id + "' in dataset " + name);
}

CsvSchema CsvSchema::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open schema " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, "schema " + path.string() + ": " + e.what());
  }
  CsvSchema schema;
  schema.name = j.value("name", "");
  schema.timestamp_column = j.value("timestamp_column", "");
  schema.value_columns = j.value("value_columns", std::vector<std::string>{});
  schema.descriptions = j.value("descriptions", std::map<std::string, std::string>{});
  schema.labels = j.value("labels", std::map<std::string, std::string>{});
  schema.utc_offset_minutes = j.value("utc_offset_minutes", 0);
  schema.interval_seconds = j.value("interval_seconds", std::int64_t{0});
  return schema;
}

std::string EvalWindow::id() const { return series_id + "@" + std::to_string(context_start); }

EpochSeconds parse_iso8601(std::string_view text) {
  text = trim(text);
  // YYYY-MM-DDTHH:MM:SS
  if (text.size() != 19 || text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' ') ||
      text[13] != ':' || text[16] != ':') {
    throw Error(ErrorCode::NonNumericValue, "not an ISO-8601 timestamp: '" + std::string(text) + "'");
  }
  try {
    using namespace std::chrono;
    const year_month_day ymd{year{parse_fixed_int(text, 0, 4)}, month{static_cast<unsigned>(parse_fixed_int(text, 5, 2))},
                             day{static_cast<unsigned>(parse_fixed_int(text, 8, 2))}};
    const int hh = parse_fixed_int(text, 11, 2);
    const int mm = parse_fixed_int(text, 14, 2);
    const int ss = parse_fixed_int(text, 17, 2);
    if (!ymd.ok() || hh > 23 || mm > 59 || ss > 59) throw std::invalid_argument("out of range");
    const auto days = sys_days{ymd}.time_since_epoch().count();
    return static_cast<EpochSeconds>(days) * 86400 + hh * 3600 + mm * 60 + ss;
  } catch (const std::invalid_argument&) {
    throw Error(ErrorCode::NonNumericValue, "not an ISO-8601 timestamp: '" + std::string(text) + "'");
  }
}

Dataset parse_csv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  std::vector<std::string> header;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (!trim(line).empty()) {
      header = split_row(line);
      break;
    }
  }
  if (header.empty()) throw Error(ErrorCode::EmptyFile, "no header row");

  auto column_index = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(ErrorCode::MissingColumn, "column '" + name + "' not in header");
    return static_cast<std::size_t>(it - header.begin());
  };

  const std::string ts_name = schema.timestamp_column.empty() ? header.front() : schema.timestamp_column;
  const std::size_t ts_col = column_index(ts_name);
  std::vector<std::size_t> value_cols;
  if (schema.value_columns.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c != ts_col) value_cols.push_back(c);
    }
  } else {
    for (const auto& name : schema.value_columns) value_cols.push_back(column_index(name));
  }
  if (value_cols.empty()) throw Error(ErrorCode::MissingColumn, "no value columns");

  struct Row {
    EpochSeconds ts;
    std::vector<double> values;
  };
  std::vector<Row> rows;
  bool epoch_format = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_row(line);
    auto field = [&](std::size_t col) -> const std::string& {
      if (col >= fields.size()) {
        throw Error(ErrorCode::NonNumericValue,
                    "row " + std::to_string(line_no) + ", column '" + header[col] + "': missing field");
      }
      return fields[col];
    };
    Row row;
    const std::string& ts_text = field(ts_col);
    if (rows.empty()) epoch_format = looks_like_epoch(ts_text);
    if (epoch_format) {
      std::string_view t = trim(ts_text);
      auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), row.ts);
      if (ec != std::errc{} || ptr != t.data() + t.size()) {
        throw Error(ErrorCode::NonNumericValue,
                    "row " + std::to_string(line_no) + ", column '" + ts_name + "': '" + ts_text + "'");
      }
    } else {
      try {
        row.ts = parse_iso8601(ts_text);
      } catch (const Error&) {
        throw Error(ErrorCode::NonNumericValue,
                    "row " + std::to_string(line_no) + ", column '" + ts_name + "': '" + ts_text + "'");
      }
    }
    row.values.reserve(value_cols.size());
    for (std::size_t col : value_cols) {
      double v = 0.0;
      if (!parse_double(field(col), v)) {
        throw Error(ErrorCode::NonNumericValue,
                    "row " + std::to_string(line_no) + ", column '" + header[col] + "': '" + field(col) + "'");
      }
      row.values.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorCode::EmptyFile, "header present but no data rows");

  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.ts < b.ts; });
  std::int64_t interval = rows.size() > 1 ? rows[1].ts - rows[0].ts : schema.interval_seconds;
  if (interval <= 0 && rows.size() == 1) interval = 1;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto gap = rows[i].ts - rows[i - 1].ts;
    if (gap != interval || gap <= 0) {
      throw Error(ErrorCode::NonUniformSampling, "gap of " + std::to_string(gap) + " s between timestamps " +
                                                     std::to_string(rows[i - 1].ts) + " and " +
                                                     std::to_string(rows[i].ts) + " (expected " +
                                                     std::to_string(interval) + " s)");
    }
  }

  Dataset ds;
  ds.name = schema.name;
  ds.utc_offset_minutes = schema.utc_offset_minutes;
  for (std::size_t k = 0; k < value_cols.size(); ++k) {
    Series s;
    s.id = header[value_cols[k]];
    auto d = schema.descriptions.find(s.id);
    s.description = d != schema.descriptions.end() ? d->second : s.id;
    auto l = schema.labels.find(s.id);
    s.label = l != schema.labels.end() ? l->second : s.id;
    s.interval_seconds = interval;
    s.timestamps.reserve(rows.size());
    s.values.reserve(rows.size());
    for (const auto& row : rows) {
      s.timestamps.push_back(row.ts);
      s.values.push_back(row.values[k]);
    }
    ds.series.push_back(std::move(s));
  }
  return ds;
}

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  Dataset ds = parse_csv(in, schema);
  if (ds.name.empty()) ds.name = path.stem().string();
  return ds;
}

void write_csv(const Dataset& dataset, std::ostream& out) {
  out << "timestamp";
  for (const auto& s : dataset.series) out << ',' << s.id;
  out << '\n';
  if (dataset.series.empty()) return;
  const auto& ts = dataset.series.front().timestamps;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    out << ts[i];
    for (const auto& s : dataset.series) out << ',' << format_value(s.values[i]);
    out << '\n';
  }
}

std::vector<EvalWindow> slice_windows(const Series& series, std::size_t context_len, std::size_t horizon,
                                      std::size_t stride) {
  if (context_len == 0 || horizon == 0 || stride == 0) {
    throw std::invalid_argument("slice_windows: context_len, horizon and stride must be positive");
  }
  if (series.size() < context_len + horizon) {
    throw Error(ErrorCode::SeriesTooShort, "series '" + series.id + "' has " + std::to_string(series.size()) +
                                               " values, need " + std::to_string(context_len + horizon));
  }
  std::vector<EvalWindow> windows;
  for (std::size_t start = 0; start + context_len + horizon <= series.size(); start += stride) {
    EvalWindow w;
    w.series_id = series.id;
    w.context_start = start;
    w.horizon = horizon;
    const auto first = series.values.begin() + static_cast<std::ptrdiff_t>(start);
    w.context.assign(first, first + static_cast<std::ptrdiff_t>(context_len));
    w.truth.assign(first + static_cast<std::ptrdiff_t>(context_len),
                   first + static_cast<std::ptrdiff_t>(context_len + horizon));
    const auto ts = series.timestamps.begin() + static_cast<std::ptrdiff_t>(start);
    w.context_timestamps.assign(ts, ts + static_cast<std::ptrdiff_t>(context_len));
    windows.push_back(std::move(w));
  }
  return windows;
}

std::string format_value(double x, int max_decimals) {
  if (!std::isfinite(x)) throw Error(ErrorCode::NonFiniteValue, "cannot render non-finite value");
  if (max_decimals < 0) throw std::invalid_argument("format_value: max_decimals must be >= 0");
  if (x == 0.0) return "0";

  const ShortestDecimal dec = shortest_decimal(x);
  const int n = static_cast<int>(dec.digits.size());
  // Number of leading digits that survive when scaling by 10^max_decimals.
  const int keep = n + dec.exponent + max_decimals;

  std::string scaled;
  if (keep >= n) {
    scaled = dec.digits + std::string(static_cast<std::size_t>(keep - n), '0');
  } else {
    std::string rest;
    if (keep > 0) {
      scaled = dec.digits.substr(0, static_cast<std::size_t>(keep));
      rest = dec.digits.substr(static_cast<std::size_t>(keep));
    } else {
      rest = std::string(static_cast<std::size_t>(-keep), '0') + dec.digits;
    }
    const bool above_half = rest[0] > '5' || (rest[0] == '5' && rest.find_first_not_of('0', 1) != std::string::npos);
    const bool tie = rest[0] == '5' && !above_half;
    const bool last_odd = !scaled.empty() && ((scaled.back() - '0') % 2 == 1);
    if (above_half || (tie && last_odd)) {
      int i = static_cast<int>(scaled.size()) - 1;
      while (i >= 0 && scaled[static_cast<std::size_t>(i)] == '9') scaled[static_cast<std::size_t>(i--)] = '0';
      if (i < 0) {
        scaled.insert(scaled.begin(), '1');
      } else {
        ++scaled[static_cast<std::size_t>(i)];
      }
    }
  }

  const auto nz = scaled.find_first_not_of('0');
  if (nz == std::string::npos) return "0";
  scaled.erase(0, nz);
  const auto decimals = static_cast<std::size_t>(max_decimals);
  if (scaled.size() <= decimals) scaled.insert(0, decimals + 1 - scaled.size(), '0');
  std::string out = dec.negative ? "-" : "";
  out += scaled.substr(0, scaled.size() - decimals);
  std::string frac = scaled.substr(scaled.size() - decimals);
  while (!frac.empty() && frac.back() == '0') frac.pop_back();
  if (!frac.empty()) out += "." + frac;
  return out;
}

std::string join_values(std::span<const double> values, int max_decimals) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    out += format_value(values[i], max_decimals);
  }
  return out;
}

std::string describe_interval(std::int64_t seconds) {
  auto unit = [](std::int64_t n, const char* singular, const char* plural) {
    return n == 1 ? std::string("every ") + singular : "every " + std::to_string(n) + " " + plural;
  };
  if (seconds > 0 && seconds % 86400 == 0) return unit(seconds / 86400, "day", "days");
  if (seconds > 0 && seconds % 3600 == 0) return unit(seconds / 3600, "hour", "hours");
  if (seconds > 0 && seconds % 60 == 0) return unit(seconds / 60, "minute", "minutes");
  return unit(seconds, "second", "seconds");
}

std::string describe_cadence(std::int64_t seconds) {
  if (seconds > 0 && seconds % 86400 == 0) return std::to_string(seconds / 86400) + "-day cadence";
  if (seconds > 0 && seconds % 3600 == 0) return std::to_string(seconds / 3600) + "-hour cadence";
  if (seconds > 0 && seconds % 60 == 0) return std::to_string(seconds / 60) + "-min cadence";
  return std::to_string(seconds) + "-s cadence";
}

}  // namespace tsf
