#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "tsf/dataset.hpp"

namespace tsf {

enum class PatchStrategy { Basic, NonOverlapping, StrDecompose, ReverseOrdered, MetaTokens };
enum class PatchOrder { Natural, Reversed };

std::string_view to_string(PatchStrategy strategy);

struct TrendResidual {
  double trend = 0.0;
  double residual = 0.0;

  friend bool operator==(const TrendResidual&, const TrendResidual&) = default;
};

/// A contiguous run of context values. `slots` is filled for meta-token
/// patches and `components` for decomposed patches; either is empty or has
/// one entry per value.
struct Patch {
  std::vector<double> values;
  std::vector<int> slots;
  std::vector<TrendResidual> components;

  friend bool operator==(const Patch&, const Patch&) = default;
};

struct PatchSet {
  PatchStrategy strategy = PatchStrategy::Basic;
  std::size_t window = 3;
  std::size_t stride = 1;
  PatchOrder order = PatchOrder::Natural;
  std::vector<Patch> patches;
};

struct Decomposition {
  std::vector<double> trend;
  std::vector<double> residual;
  std::size_t trend_window = 5;
};

inline constexpr std::size_t kDefaultPatchWindow = 3;
inline constexpr std::size_t kDefaultPatchStride = 1;
inline constexpr std::size_t kDefaultTrendWindow = 5;
inline constexpr int kSlotsPerDay = 144;

/// Patches of `window` values at offsets 0, stride, 2*stride, ...
PatchSet overlapping_patches(std::span<const double> context, std::size_t window = kDefaultPatchWindow,
                             std::size_t stride = kDefaultPatchStride);

/// Reverses the patch list and flips its order tag. Applying it twice gives
/// back the original list.
PatchSet reverse_patches(PatchSet ps);

/// Window == stride == horizon, aligned so the last patch ends on the most
/// recent value. The oldest `L mod horizon` values are dropped.
PatchSet nonoverlapping_patches(std::span<const double> context, std::size_t horizon);

/// Centered moving average trend (window shrinks at the edges) plus the
/// residual series minus trend.
Decomposition str_decompose(std::span<const double> context, std::size_t trend_window = kDefaultTrendWindow);

std::vector<TrendResidual> composite_tokens(const Decomposition& d);

/// Overlapping patches over (trend, residual) tokens; patch values carry the
/// raw series.
PatchSet str_patches(std::span<const double> context, std::size_t window = kDefaultPatchWindow,
                     std::size_t stride = kDefaultPatchStride, std::size_t trend_window = kDefaultTrendWindow);

/// floor((60*hour + minute) / 10), 0..143.
int slot_index(int hour, int minute);

/// Slot of an epoch timestamp on the clock shifted by utc_offset_minutes.
int slot_of(EpochSeconds ts, int utc_offset_minutes = 0);

std::vector<std::pair<double, int>> meta_tokens(std::span<const double> context,
                                                std::span<const EpochSeconds> timestamps, int utc_offset_minutes = 0);

PatchSet meta_patches(std::span<const double> context, std::span<const EpochSeconds> timestamps,
                      int utc_offset_minutes = 0, std::size_t window = kDefaultPatchWindow,
                      std::size_t stride = kDefaultPatchStride);

}  // namespace tsf
