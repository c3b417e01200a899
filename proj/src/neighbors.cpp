#include "tsf/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <tuple>

#include "tsf/error.hpp"

namespace tsf {

namespace {

struct Scored {
  double distance;
  std::size_t index;  // into the pool
};

bool before(const Scored& a, const Scored& b, std::span<const CandidateWindow> pool) {
  if (a.distance != b.distance) return a.distance < b.distance;
  const auto& wa = pool[a.index];
  const auto& wb = pool[b.index];
  return std::tie(wa.series_id, wa.start_index) < std::tie(wb.series_id, wb.start_index);
}

std::vector<Scored> scan(std::span<const double> target, std::span<const CandidateWindow> pool, std::size_t begin,
                         std::size_t end, std::size_t k, bool znorm) {
  std::vector<Scored> best;
  best.reserve(std::min(k, end - begin) + 1);
  auto cmp = [&](const Scored& a, const Scored& b) { return before(a, b, pool); };
  for (std::size_t i = begin; i < end; ++i) {
    const double d = znorm ? euclidean(target, znormalize(pool[i].values)) : euclidean(target, pool[i].values);
    Scored s{d, i};
    if (best.size() == k && !cmp(s, best.back())) continue;
    best.insert(std::upper_bound(best.begin(), best.end(), s, cmp), s);
    if (best.size() > k) best.pop_back();
  }
  return best;
}

}  // namespace

std::vector<CandidateWindow> build_pool(const Dataset& dataset, const EvalWindow& target, const PoolOptions& options) {
  if (options.candidate_stride == 0) throw std::invalid_argument("build_pool: candidate_stride must be >= 1");
  const std::size_t len = target.context_len();
  if (len == 0 || target.context_timestamps.empty()) throw std::invalid_argument("build_pool: empty target context");
  const EpochSeconds context_begin = target.context_timestamps.front();

  std::vector<CandidateWindow> pool;
  for (const auto& series : dataset.series) {
    if (options.same_series_only && series.id != target.series_id) continue;
    for (std::size_t start = 0; start + len <= series.size(); start += options.candidate_stride) {
      if (series.timestamps[start + len - 1] >= context_begin) break;
      CandidateWindow c;
      c.series_id = series.id;
      c.start_index = start;
      const auto first = series.values.begin() + static_cast<std::ptrdiff_t>(start);
      c.values.assign(first, first + static_cast<std::ptrdiff_t>(len));
      for (std::size_t j = start + len; j < series.size() && c.continuation.size() < target.horizon &&
                                        series.timestamps[j] < context_begin;
           ++j) {
        c.continuation.push_back(series.values[j]);
      }
      pool.push_back(std::move(c));
    }
  }
  if (pool.empty()) {
    throw Error(ErrorCode::EmptyPool, "no past windows precede " + target.id());
  }
  return pool;
}

double euclidean(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

std::vector<double> znormalize(std::span<const double> values) {
  std::vector<double> out(values.begin(), values.end());
  if (out.empty()) return out;
  const double mean = std::accumulate(out.begin(), out.end(), 0.0) / static_cast<double>(out.size());
  double var = 0.0;
  for (double v : out) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(out.size()));
  for (double& v : out) v = sd > 0.0 ? (v - mean) / sd : 0.0;
  return out;
}

NeighborSet top_k(const EvalWindow& target, std::span<const CandidateWindow> pool, std::size_t k,
                  const TopKOptions& options) {
  if (k == 0) throw std::invalid_argument("top_k: k must be >= 1");
  if (pool.empty()) throw Error(ErrorCode::EmptyPool, "empty candidate pool for " + target.id());

  const std::vector<double> query =
      options.znormalize ? znormalize(target.context) : std::vector<double>(target.context);

  const std::size_t workers = std::clamp<std::size_t>(options.workers, 1, pool.size());
  std::vector<Scored> merged;
  if (workers == 1) {
    merged = scan(query, pool, 0, pool.size(), k, options.znormalize);
  } else {
    std::vector<std::future<std::vector<Scored>>> parts;
    const std::size_t chunk = (pool.size() + workers - 1) / workers;
    for (std::size_t begin = 0; begin < pool.size(); begin += chunk) {
      const std::size_t end = std::min(pool.size(), begin + chunk);
      parts.push_back(std::async(std::launch::async, [&, begin, end] {
        return scan(query, pool, begin, end, k, options.znormalize);
      }));
    }
    for (auto& part : parts) {
      auto best = part.get();
      merged.insert(merged.end(), best.begin(), best.end());
    }
    std::sort(merged.begin(), merged.end(), [&](const Scored& a, const Scored& b) { return before(a, b, pool); });
    if (merged.size() > k) merged.resize(k);
  }

  NeighborSet ns;
  ns.k = k;
  ns.entries.reserve(merged.size());
  for (const auto& s : merged) ns.entries.push_back(Neighbor{pool[s.index], s.distance});
  return ns;
}

}  // namespace tsf
