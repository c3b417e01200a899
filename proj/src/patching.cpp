#include "tsf/patching.hpp"

#include <algorithm>
#include <string>

#include "tsf/error.hpp"

namespace tsf {

std::string_view to_string(PatchStrategy strategy) {
  switch (strategy) {
    case PatchStrategy::Basic: return "basic";
    case PatchStrategy::NonOverlapping: return "non-overlapping";
    case PatchStrategy::StrDecompose: return "str-decompose";
    case PatchStrategy::ReverseOrdered: return "reverse-ordered";
    case PatchStrategy::MetaTokens: return "meta-tokens";
  }
  return "unknown";
}

PatchSet overlapping_patches(std::span<const double> context, std::size_t window, std::size_t stride) {
  if (stride == 0 || window == 0) throw std::invalid_argument("overlapping_patches: window and stride must be >= 1");
  if (window > context.size()) {
    throw Error(ErrorCode::WindowTooLarge,
                "window " + std::to_string(window) + " exceeds context length " + std::to_string(context.size()));
  }
  PatchSet ps{PatchStrategy::Basic, window, stride, PatchOrder::Natural, {}};
  ps.patches.reserve((context.size() - window) / stride + 1);
  for (std::size_t start = 0; start + window <= context.size(); start += stride) {
    auto part = context.subspan(start, window);
    ps.patches.push_back(Patch{{part.begin(), part.end()}, {}, {}});
  }
  return ps;
}

PatchSet reverse_patches(PatchSet ps) {
  std::reverse(ps.patches.begin(), ps.patches.end());
  ps.order = ps.order == PatchOrder::Natural ? PatchOrder::Reversed : PatchOrder::Natural;
  if (ps.strategy == PatchStrategy::Basic && ps.order == PatchOrder::Reversed) {
    ps.strategy = PatchStrategy::ReverseOrdered;
  } else if (ps.strategy == PatchStrategy::ReverseOrdered && ps.order == PatchOrder::Natural) {
    ps.strategy = PatchStrategy::Basic;
  }
  return ps;
}

PatchSet nonoverlapping_patches(std::span<const double> context, std::size_t horizon) {
  if (horizon == 0) throw std::invalid_argument("nonoverlapping_patches: horizon must be >= 1");
  if (horizon > context.size()) {
    throw Error(ErrorCode::WindowTooLarge,
                "horizon " + std::to_string(horizon) + " exceeds context length " + std::to_string(context.size()));
  }
  PatchSet ps{PatchStrategy::NonOverlapping, horizon, horizon, PatchOrder::Natural, {}};
  for (std::size_t start = context.size() % horizon; start < context.size(); start += horizon) {
    auto part = context.subspan(start, horizon);
    ps.patches.push_back(Patch{{part.begin(), part.end()}, {}, {}});
  }
  return ps;
}

Decomposition str_decompose(std::span<const double> context, std::size_t trend_window) {
  if (trend_window % 2 == 0) {
    throw Error(ErrorCode::EvenTrendWindow, "trend window must be odd, got " + std::to_string(trend_window));
  }
  if (trend_window > context.size()) {
    throw Error(ErrorCode::WindowTooLarge, "trend window " + std::to_string(trend_window) +
                                               " exceeds context length " + std::to_string(context.size()));
  }
  const std::size_t n = context.size();
  const std::size_t half = trend_window / 2;
  Decomposition d;
  d.trend_window = trend_window;
  d.trend.resize(n);
  d.residual.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t lo = t >= half ? t - half : 0;
    const std::size_t hi = std::min(n - 1, t + half);
    double sum = 0.0;
    for (std::size_t i = lo; i <= hi; ++i) sum += context[i];
    double trend = sum / static_cast<double>(hi - lo + 1);
    double residual = context[t] - trend;
    // x - t can round; nudging the trend to x - r restores trend + residual == x
    // in most cases. It cannot always: with |x| far below |trend| the sum of
    // two doubles near trend lands on a grid coarser than x.
    for (int attempt = 0; attempt < 4 && trend + residual != context[t]; ++attempt) {
      trend = context[t] - residual;
      residual = context[t] - trend;
    }
    d.trend[t] = trend;
    d.residual[t] = residual;
  }
  return d;
}

std::vector<TrendResidual> composite_tokens(const Decomposition& d) {
  if (d.trend.size() != d.residual.size()) {
    throw Error(ErrorCode::LengthMismatch, "trend and residual lengths differ");
  }
  std::vector<TrendResidual> tokens(d.trend.size());
  for (std::size_t t = 0; t < tokens.size(); ++t) tokens[t] = {d.trend[t], d.residual[t]};
  return tokens;
}

PatchSet str_patches(std::span<const double> context, std::size_t window, std::size_t stride,
                     std::size_t trend_window) {
  const auto tokens = composite_tokens(str_decompose(context, trend_window));
  PatchSet ps = overlapping_patches(context, window, stride);
  ps.strategy = PatchStrategy::StrDecompose;
  for (std::size_t p = 0; p < ps.patches.size(); ++p) {
    const auto first = tokens.begin() + static_cast<std::ptrdiff_t>(p * stride);
    ps.patches[p].components.assign(first, first + static_cast<std::ptrdiff_t>(window));
  }
  return ps;
}

int slot_index(int hour, int minute) {
  if (hour < 0 || hour > 23 || minute < 0 || minute > 59) {
    throw Error(ErrorCode::InvalidClockTime, std::to_string(hour) + ":" + std::to_string(minute));
  }
  return (60 * hour + minute) / 10;
}

int slot_of(EpochSeconds ts, int utc_offset_minutes) {
  constexpr EpochSeconds kDay = 86400;
  const EpochSeconds local = ts + static_cast<EpochSeconds>(utc_offset_minutes) * 60;
  const EpochSeconds second_of_day = ((local % kDay) + kDay) % kDay;
  return slot_index(static_cast<int>(second_of_day / 3600), static_cast<int>((second_of_day % 3600) / 60));
}

std::vector<std::pair<double, int>> meta_tokens(std::span<const double> context,
                                                std::span<const EpochSeconds> timestamps, int utc_offset_minutes) {
  if (context.size() != timestamps.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(context.size()) + " values vs " +
                                               std::to_string(timestamps.size()) + " timestamps");
  }
  std::vector<std::pair<double, int>> tokens;
  tokens.reserve(context.size());
  for (std::size_t i = 0; i < context.size(); ++i) {
    tokens.emplace_back(context[i], slot_of(timestamps[i], utc_offset_minutes));
  }
  return tokens;
}

PatchSet meta_patches(std::span<const double> context, std::span<const EpochSeconds> timestamps,
                      int utc_offset_minutes, std::size_t window, std::size_t stride) {
  const auto tokens = meta_tokens(context, timestamps, utc_offset_minutes);
  PatchSet ps = overlapping_patches(context, window, stride);
  ps.strategy = PatchStrategy::MetaTokens;
  for (std::size_t p = 0; p < ps.patches.size(); ++p) {
    auto& slots = ps.patches[p].slots;
    for (std::size_t i = 0; i < window; ++i) slots.push_back(tokens[p * stride + i].second);
  }
  return ps;
}

}  // namespace tsf
