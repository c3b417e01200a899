#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <tuple>

#include "tsf/error.hpp"
#include "tsf/neighbors.hpp"

using namespace tsf;

namespace {

Series make_series(const std::string& id, std::vector<double> values) {
  Series s;
  s.id = id;
  s.interval_seconds = 600;
  s.values = std::move(values);
  for (std::size_t i = 0; i < s.values.size(); ++i) s.timestamps.push_back(static_cast<EpochSeconds>(i) * 600);
  return s;
}

EvalWindow window_at(const Series& s, std::size_t start, std::size_t len, std::size_t h) {
  EvalWindow w;
  w.series_id = s.id;
  w.context_start = start;
  w.horizon = h;
  w.context.assign(s.values.begin() + static_cast<long>(start), s.values.begin() + static_cast<long>(start + len));
  w.context_timestamps.assign(s.timestamps.begin() + static_cast<long>(start),
                              s.timestamps.begin() + static_cast<long>(start + len));
  return w;
}

std::vector<double> coarse_values(std::mt19937_64& rng, std::size_t n) {
  std::uniform_int_distribution<int> d(0, 3);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// Full sort of every candidate by (distance, series_id, start_index).
std::vector<std::tuple<double, std::string, std::size_t>> brute_force(const EvalWindow& target,
                                                                      const std::vector<CandidateWindow>& pool,
                                                                      std::size_t k) {
  std::vector<std::tuple<double, std::string, std::size_t>> all;
  for (const auto& c : pool) {
    double sum = 0;
    for (std::size_t i = 0; i < c.values.size(); ++i) sum += (c.values[i] - target.context[i]) * (c.values[i] - target.context[i]);
    all.emplace_back(std::sqrt(sum), c.series_id, c.start_index);
  }
  std::sort(all.begin(), all.end());
  all.resize(std::min(k, all.size()));
  return all;
}

}  // namespace

TEST(BuildPool, EmptyAtSeriesStart) {
  Dataset ds{"d", {make_series("a", std::vector<double>(20, 1.0))}, 0};
  try {
    build_pool(ds, window_at(ds.series[0], 0, 5, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyPool);
  }
}

TEST(BuildPool, LengthTwoLHasOneWindow) {
  const std::size_t L = 8;
  std::vector<double> v(2 * L);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
  Dataset ds{"d", {make_series("a", v)}, 0};
  const auto pool = build_pool(ds, window_at(ds.series[0], L, L, 1));
  ASSERT_EQ(pool.size(), 1u);
  EXPECT_EQ(pool[0].start_index, 0u);
  EXPECT_EQ(pool[0].values.front(), 0.0);
  EXPECT_EQ(pool[0].values.back(), static_cast<double>(L - 1));
  EXPECT_TRUE(pool[0].continuation.empty());
}

TEST(BuildPool, SpansEverySeriesUnlessRestricted) {
  std::vector<double> v(30, 1.0);
  Dataset ds{"d", {make_series("a", v), make_series("b", v)}, 0};
  const auto target = window_at(ds.series[0], 20, 5, 2);
  const auto pool = build_pool(ds, target);
  EXPECT_TRUE(std::any_of(pool.begin(), pool.end(), [](const auto& c) { return c.series_id == "b"; }));
  PoolOptions only_a;
  only_a.same_series_only = true;
  for (const auto& c : build_pool(ds, target, only_a)) EXPECT_EQ(c.series_id, "a");
}

TEST(BuildPool, WindowsAndContinuationsStayInThePast) {
  std::mt19937_64 rng(1);
  Dataset ds{"d", {make_series("a", coarse_values(rng, 200))}, 0};
  const auto target = window_at(ds.series[0], 100, 24, 6);
  const auto pool = build_pool(ds, target);
  EXPECT_EQ(pool.size(), 100u - 24 + 1);
  for (const auto& c : pool) {
    EXPECT_LE(c.start_index + 24 + c.continuation.size(), 100u);
    EXPECT_LE(c.continuation.size(), 6u);
  }
  EXPECT_EQ(pool.front().continuation.size(), 6u);
}

TEST(BuildPool, CandidateStride) {
  std::vector<double> v(100, 0.0);
  Dataset ds{"d", {make_series("a", v)}, 0};
  PoolOptions opt;
  opt.candidate_stride = 10;
  const auto pool = build_pool(ds, window_at(ds.series[0], 60, 10, 1), opt);
  ASSERT_EQ(pool.size(), 6u);
  EXPECT_EQ(pool.back().start_index, 50u);
}

TEST(Euclidean, Examples) {
  const std::vector<double> zero{0, 0}, p{3, 4};
  EXPECT_EQ(euclidean(zero, p), 5.0);
  EXPECT_EQ(euclidean(p, p), 0.0);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  std::vector<double> a(50), b(50);
  for (int i = 0; i < 50; ++i) {
    a[i] = n(rng);
    b[i] = n(rng);
  }
  EXPECT_EQ(euclidean(a, b), euclidean(b, a));
  const std::vector<double> three{1, 2, 3};
  EXPECT_THROW(euclidean(p, three), Error);
}

TEST(Znormalize, ConstantMapsToZeros) {
  const std::vector<double> c(5, 3.0);
  EXPECT_EQ(znormalize(c), std::vector<double>(5, 0.0));
}

TEST(TopK, ExactCopyComesFirst) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> v(120);
  for (auto& x : v) x = u(rng);
  std::copy(v.begin() + 100, v.begin() + 110, v.begin() + 30);  // plant the target's context in the past
  Dataset ds{"d", {make_series("a", v)}, 0};
  const auto target = window_at(ds.series[0], 100, 10, 1);
  const auto ns = top_k(target, build_pool(ds, target), 5);
  ASSERT_EQ(ns.entries.size(), 5u);
  EXPECT_EQ(ns.entries[0].distance, 0.0);
  EXPECT_EQ(ns.entries[0].window.start_index, 30u);
}

TEST(TopK, SaturatesWhenKExceedsPool) {
  std::mt19937_64 rng(4);
  Dataset ds{"d", {make_series("a", coarse_values(rng, 14))}, 0};
  const auto target = window_at(ds.series[0], 10, 4, 1);
  const auto pool = build_pool(ds, target);
  const auto ns = top_k(target, pool, 50);
  EXPECT_EQ(ns.entries.size(), pool.size());
  for (std::size_t i = 1; i < ns.entries.size(); ++i) EXPECT_LE(ns.entries[i - 1].distance, ns.entries[i].distance);
}

TEST(TopK, MatchesBruteForceWithTies) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    Dataset ds{"d", {make_series("b", coarse_values(rng, 230)), make_series("a", coarse_values(rng, 230))}, 0};
    const auto target = window_at(ds.series[trial % 2], 210, 6, 3);
    const auto pool = build_pool(ds, target);
    const auto expected = brute_force(target, pool, 5);
    for (std::size_t workers : {1u, 3u, 8u}) {
      TopKOptions opt;
      opt.workers = workers;
      const auto ns = top_k(target, pool, 5, opt);
      ASSERT_EQ(ns.entries.size(), expected.size());
      for (std::size_t i = 0; i < expected.size(); ++i) {
        EXPECT_EQ(ns.entries[i].distance, std::get<0>(expected[i]));
        EXPECT_EQ(ns.entries[i].window.series_id, std::get<1>(expected[i]));
        EXPECT_EQ(ns.entries[i].window.start_index, std::get<2>(expected[i]));
      }
    }
  }
}

TEST(TopK, PermutationInvariantAndStableUnderFarCandidates) {
  std::mt19937_64 rng(6);
  Dataset ds{"d", {make_series("a", coarse_values(rng, 150))}, 0};
  const auto target = window_at(ds.series[0], 140, 8, 1);
  auto pool = build_pool(ds, target);
  const auto base = top_k(target, pool, 5);

  std::shuffle(pool.begin(), pool.end(), rng);
  const auto shuffled = top_k(target, pool, 5);
  CandidateWindow far{"z", 0, std::vector<double>(8, 1000.0), {}};
  pool.push_back(far);
  const auto extended = top_k(target, pool, 5);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(shuffled.entries[i].window.start_index, base.entries[i].window.start_index);
    EXPECT_EQ(extended.entries[i].window.start_index, base.entries[i].window.start_index);
  }
}

TEST(TopK, ZnormRanksByShape) {
  Dataset ds{"d", {make_series("a", {0, 1, 2, 10, 20, 30, 5, 5, 5, 0, 1, 2})}, 0};
  const auto target = window_at(ds.series[0], 9, 3, 1);
  const auto pool = build_pool(ds, target);
  TopKOptions opt;
  opt.znormalize = true;
  const auto ns = top_k(target, pool, 2, opt);
  // [0,1,2] and [10,20,30] share a shape; raw distance would prefer [5,5,5]-ish windows.
  EXPECT_EQ(ns.entries[0].window.start_index, 0u);
  EXPECT_EQ(ns.entries[1].window.start_index, 3u);
  EXPECT_NEAR(ns.entries[1].distance, 0.0, 1e-12);
}

TEST(TopK, EmptyPoolRejected) {
  Dataset ds{"d", {make_series("a", {1, 2, 3})}, 0};
  const std::vector<CandidateWindow> none;
  EXPECT_THROW(top_k(window_at(ds.series[0], 0, 3, 1), none, 5), Error);
}
