#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tsf/patching.hpp"

namespace tsf {

struct Forecast {
  std::vector<double> values;
  std::optional<std::vector<Patch>> echoed_patches;
  std::string raw_text;
  bool repaired = false;  // lenient mode truncated or padded the list
  bool patches_malformed = false;
};

struct ParseOptions {
  /// Truncate surplus values or pad with the last value instead of failing
  /// with WrongCount.
  bool lenient = false;
};

/// Reads the list after the last "Prediction:" marker, or the last top-level
/// flat numeric list when there is no marker.
std::vector<double> parse_prediction(std::string_view text, std::size_t horizon);

Forecast parse_forecast(std::string_view text, std::size_t horizon, const ParseOptions& options = {});

/// The list of lists after a "Patches:" marker; nullopt without the marker.
std::optional<std::vector<Patch>> parse_patches(std::string_view text);

struct PatchFidelity {
  double exact_fraction = 0.0;
  std::optional<double> mean_abs_dev;  // empty when no elements align
  std::size_t compared = 0;
};

/// Positional comparison of echoed patches against the reference set. A
/// patch matches when it has the reference length and every element is
/// within tol. Missing or surplus patches count as mismatches.
PatchFidelity patch_fidelity(const std::vector<Patch>& echoed, const PatchSet& truth, double tol = 1e-4);

}  // namespace tsf
