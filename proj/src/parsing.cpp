#include "tsf/parsing.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "tsf/error.hpp"

namespace tsf {

namespace {

constexpr std::string_view kPredictionMarker = "Prediction:";
constexpr std::string_view kPatchesMarker = "Patches:";

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

struct Span {
  std::size_t open;   // index of '['
  std::size_t close;  // index of matching ']'
  bool nested;
};

// Matching bracket for text[open] == '[', or npos when unbalanced.
std::size_t match_bracket(std::string_view text, std::size_t open, bool& nested) {
  int depth = 0;
  nested = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    if (text[i] == '[') {
      if (++depth > 1) nested = true;
    } else if (text[i] == ']') {
      if (--depth == 0) return i;
    }
  }
  return std::string_view::npos;
}

std::vector<Span> top_level_lists(std::string_view text) {
  std::vector<Span> spans;
  std::size_t pos = 0;
  while ((pos = text.find('[', pos)) != std::string_view::npos) {
    bool nested = false;
    const auto close = match_bracket(text, pos, nested);
    if (close == std::string_view::npos) break;
    spans.push_back({pos, close, nested});
    pos = close + 1;
  }
  return spans;
}

bool parse_number(std::string_view item, double& out) {
  item = trim(item);
  if (!item.empty() && item.front() == '+') item.remove_prefix(1);
  if (item.empty()) return false;
  auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), out);
  return ec == std::errc{} && ptr == item.data() + item.size() && std::isfinite(out);
}

// Elements of a flat list body (text between the brackets). Returns false and
// the offending element on the first non-number.
bool parse_flat(std::string_view body, std::vector<double>& values, std::string& bad) {
  values.clear();
  if (trim(body).empty()) return true;
  while (true) {
    const auto comma = body.find(',');
    const std::string_view item = body.substr(0, comma);
    double v = 0.0;
    if (!parse_number(item, v)) {
      bad = std::string(trim(item));
      return false;
    }
    values.push_back(v);
    if (comma == std::string_view::npos) return true;
    body.remove_prefix(comma + 1);
  }
}

std::string_view body_of(std::string_view text, const Span& s) { return text.substr(s.open + 1, s.close - s.open - 1); }

// The prediction list without the count check.
std::vector<double> locate_prediction(std::string_view text) {
  std::vector<double> values;
  std::string bad;
  const auto marker = text.rfind(kPredictionMarker);
  if (marker != std::string_view::npos) {
    const auto open = text.find('[', marker + kPredictionMarker.size());
    bool nested = false;
    const auto close = open == std::string_view::npos ? open : match_bracket(text, open, nested);
    if (close == std::string_view::npos) throw Error(ErrorCode::NoListFound, "no list after 'Prediction:'");
    if (nested || !parse_flat(body_of(text, {open, close, nested}), values, bad)) {
      throw Error(ErrorCode::NonNumericElement, "prediction element '" + (nested ? std::string("[") : bad) + "'");
    }
    return values;
  }
  const auto spans = top_level_lists(text);
  auto it = std::find_if(spans.rbegin(), spans.rend(), [&](const Span& s) {
    return !s.nested && parse_flat(body_of(text, s), values, bad) && !values.empty();
  });
  if (it == spans.rend()) throw Error(ErrorCode::NoListFound, "no numeric list in response");
  return values;
}

}  // namespace

std::vector<double> parse_prediction(std::string_view text, std::size_t horizon) {
  if (horizon == 0) throw std::invalid_argument("parse_prediction: horizon must be >= 1");
  auto values = locate_prediction(text);
  if (values.size() != horizon) {
    throw Error(ErrorCode::WrongCount,
                "found " + std::to_string(values.size()) + " values, expected " + std::to_string(horizon));
  }
  return values;
}

Forecast parse_forecast(std::string_view text, std::size_t horizon, const ParseOptions& options) {
  if (horizon == 0) throw std::invalid_argument("parse_forecast: horizon must be >= 1");
  Forecast f;
  f.raw_text = std::string(text);
  f.values = locate_prediction(text);
  if (f.values.size() != horizon) {
    if (!options.lenient || f.values.empty()) {
      throw Error(ErrorCode::WrongCount,
                  "found " + std::to_string(f.values.size()) + " values, expected " + std::to_string(horizon));
    }
    const double last = f.values.back();
    f.values.resize(horizon, last);
    f.repaired = true;
  }
  try {
    f.echoed_patches = parse_patches(text);
  } catch (const Error&) {
    f.patches_malformed = true;
  }
  return f;
}

std::optional<std::vector<Patch>> parse_patches(std::string_view text) {
  const auto marker = text.rfind(kPatchesMarker);
  if (marker == std::string_view::npos) return std::nullopt;
  std::string_view rest = text.substr(marker + kPatchesMarker.size());
  auto malformed = [](const std::string& why) { return Error(ErrorCode::MalformedPatchList, why); };

  const auto first = rest.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos || rest[first] != '[') throw malformed("no list after 'Patches:'");
  bool nested = false;
  const auto close = match_bracket(rest, first, nested);
  if (close == std::string_view::npos) throw malformed("unbalanced brackets after 'Patches:'");

  std::vector<Patch> patches;
  std::vector<double> values;
  std::string bad;
  if (!nested) {
    // Bare "[..]\n[..]" rows without an enclosing list.
    std::size_t pos = first;
    while (pos < rest.size() && rest[pos] == '[') {
      bool inner_nested = false;
      const auto end = match_bracket(rest, pos, inner_nested);
      if (end == std::string_view::npos || inner_nested) throw malformed("bad patch row");
      if (!parse_flat(rest.substr(pos + 1, end - pos - 1), values, bad)) throw malformed("non-numeric '" + bad + "'");
      patches.push_back(Patch{values, {}, {}});
      pos = rest.find_first_not_of(" \t\r\n,", end + 1);
    }
    return patches;
  }

  std::string_view body = rest.substr(first + 1, close - first - 1);
  std::size_t pos = 0;
  while (true) {
    pos = body.find_first_not_of(" \t\r\n,", pos);
    if (pos == std::string_view::npos) break;
    if (body[pos] != '[') throw malformed("unexpected '" + std::string(1, body[pos]) + "' between patches");
    bool inner_nested = false;
    const auto end = match_bracket(body, pos, inner_nested);
    if (end == std::string_view::npos || inner_nested) throw malformed("patch is not a flat list");
    if (!parse_flat(body.substr(pos + 1, end - pos - 1), values, bad)) throw malformed("non-numeric '" + bad + "'");
    patches.push_back(Patch{values, {}, {}});
    pos = end + 1;
  }
  return patches;
}

PatchFidelity patch_fidelity(const std::vector<Patch>& echoed, const PatchSet& truth, double tol) {
  PatchFidelity out;
  const std::size_t denom = std::max(echoed.size(), truth.patches.size());
  out.compared = denom;
  if (denom == 0) return out;
  std::size_t exact = 0;
  double dev_sum = 0.0;
  std::size_t dev_count = 0;
  const std::size_t aligned = std::min(echoed.size(), truth.patches.size());
  for (std::size_t i = 0; i < aligned; ++i) {
    const auto& e = echoed[i].values;
    const auto& t = truth.patches[i].values;
    bool match = e.size() == t.size();
    for (std::size_t j = 0; j < std::min(e.size(), t.size()); ++j) {
      const double dev = std::abs(e[j] - t[j]);
      dev_sum += dev;
      ++dev_count;
      if (!(dev <= tol)) match = false;
    }
    if (match) ++exact;
  }
  out.exact_fraction = static_cast<double>(exact) / static_cast<double>(denom);
  if (dev_count > 0) out.mean_abs_dev = dev_sum / static_cast<double>(dev_count);
  return out;
}

}  // namespace tsf
