#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tsf/dataset.hpp"

namespace tsf {

/// A historical length-L window. `continuation` holds up to h values that
/// follow the window and still precede the target context.
struct CandidateWindow {
  std::string series_id;
  std::size_t start_index = 0;
  std::vector<double> values;
  std::vector<double> continuation;
};

struct Neighbor {
  CandidateWindow window;
  double distance = 0.0;
};

struct NeighborSet {
  std::size_t k = 5;
  std::vector<Neighbor> entries;  // ascending distance, ties by (series_id, start_index)
};

struct PoolOptions {
  std::size_t candidate_stride = 1;
  bool same_series_only = false;
};

inline constexpr std::size_t kDefaultNeighbors = 5;

/// Every length-L window of the dataset that ends strictly before the target
/// context begins.
std::vector<CandidateWindow> build_pool(const Dataset& dataset, const EvalWindow& target,
                                        const PoolOptions& options = {});

double euclidean(std::span<const double> a, std::span<const double> b);

/// Per-window z-normalization; a constant window maps to zeros.
std::vector<double> znormalize(std::span<const double> values);

struct TopKOptions {
  bool znormalize = false;
  std::size_t workers = 1;  // the scan is split into this many chunks, merged by the same order
};

NeighborSet top_k(const EvalWindow& target, std::span<const CandidateWindow> pool, std::size_t k,
                  const TopKOptions& options = {});

}  // namespace tsf
