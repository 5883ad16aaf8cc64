#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "fixtures.hpp"
#include "partsel/sketch.hpp"

using namespace partsel;
using partsel::testing::numbers;
using partsel::testing::pairs;
using partsel::testing::scratch_dir;
using partsel::testing::xyz_rows;

TEST(Measures, SmallColumn) {
  auto set = build_sketchset(numbers({1, 2, 3}), 0);
  const auto& m = *set.columns[0].measures;
  EXPECT_EQ(m.min, 1);
  EXPECT_EQ(m.max, 3);
  EXPECT_EQ(m.sum, 6);
  EXPECT_EQ(m.sum_sq, 14);
  EXPECT_TRUE(m.all_positive);
  EXPECT_DOUBLE_EQ(m.log_sum, std::log(6.0));
  EXPECT_DOUBLE_EQ(m.variance(), 14.0 / 3 - 4.0);
}

TEST(Measures, NonPositiveDisablesLogs) {
  auto set = build_sketchset(numbers({0, 2}), 0);
  EXPECT_FALSE(set.columns[0].measures->all_positive);
  EXPECT_EQ(set.columns[0].measures->log_mean(), 0.0);
}

TEST(Histogram, EqualDepthOnDistinctValues) {
  Rng rng(2);
  for (std::size_t n : {100u, 1000u, 997u, 12345u}) {
    std::vector<double> v(n);
    for (auto& x : v) x = uniform01(rng);
    auto h = EquiDepthHistogram::build(v, 10);
    ASSERT_EQ(h.bucket_count(), 10u);
    std::uint64_t total = 0;
    for (auto c : h.counts) {
      EXPECT_LE(std::abs(static_cast<double>(c) - static_cast<double>(n) / 10.0), 1.0);
      total += c;
    }
    EXPECT_EQ(total, n);
    EXPECT_TRUE(std::is_sorted(h.boundaries.begin(), h.boundaries.end()));
  }
}

TEST(Histogram, CdfOnUniformIntegers) {
  std::vector<double> v;
  for (int i = 1; i <= 100; ++i) v.push_back(i);
  auto h = EquiDepthHistogram::build(v, 10);
  EXPECT_NEAR(h.cdf_le(50), 0.5, 0.1);
  EXPECT_EQ(h.cdf_lt(1), 0.0);
  EXPECT_EQ(h.cdf_le(100), 1.0);
  EXPECT_EQ(h.cdf_le(0), 0.0);
}

TEST(Histogram, PointMass) {
  auto h = EquiDepthHistogram::build(std::vector<double>(20, 5.0), 4);
  EXPECT_EQ(h.cdf_le(5), 1.0);
  EXPECT_EQ(h.cdf_lt(5), 0.0);
}

TEST(Akmv, BelowKIsExact) {
  std::vector<std::pair<double, std::string>> rows;
  for (int i = 0; i < 500; ++i) rows.push_back({static_cast<double>(i % 50), "v" + std::to_string(i % 50)});
  auto set = build_sketchset(pairs(rows), 0);
  for (std::size_t c = 0; c < 2; ++c) {
    const auto& a = set.columns[c].akmv;
    EXPECT_EQ(a.size(), 50u);
    EXPECT_EQ(akmv_distinct_count(a), 50.0);
    auto stats = akmv_value_stats(a);
    EXPECT_EQ(stats.sum, 500.0);
    EXPECT_EQ(stats.avg, 10.0);
    EXPECT_EQ(stats.min, 10.0);
    EXPECT_EQ(stats.max, 10.0);
  }
}

TEST(Akmv, SingleValue) {
  auto set = build_sketchset(numbers(std::vector<double>(30, 4.0)), 0);
  EXPECT_EQ(akmv_distinct_count(set.columns[0].akmv), 1.0);
}

TEST(Akmv, MultiplicityStats) {
  AkmvSketch s(8);
  s.add(10, 1);
  s.add(20, 5);
  auto st = akmv_value_stats(s);
  EXPECT_EQ(st.avg, 3);
  EXPECT_EQ(st.max, 5);
  EXPECT_EQ(st.min, 1);
  EXPECT_EQ(st.sum, 6);
  EXPECT_THROW(akmv_distinct_count(AkmvSketch(4)), RangeError);
}

TEST(Akmv, KeepsKSmallestAndMerges) {
  AkmvSketch a(4), b(4), all(4);
  for (std::uint64_t h = 100; h > 0; --h) {
    (h % 2 ? a : b).add(h * 1000);
    all.add(h * 1000);
  }
  a.merge(b);
  EXPECT_EQ(a.entries(), all.entries());
  EXPECT_EQ(a.entries().begin()->first, 1000u);
  EXPECT_EQ(a.entries().rbegin()->first, 4000u);
}

TEST(Akmv, LargeDistinctUnbiasedWithKnownSpread) {
  // Relative standard deviation of (k - 1) / U(k) is 1 / sqrt(k - 2).
  const int seeds = 1000;
  double sum = 0, sum_sq = 0;
  int within = 0;
  for (int seed = 0; seed < seeds; ++seed) {
    AkmvSketch s(128);
    for (int v = 0; v < 10000; ++v) s.add(hash_number(v, derive_seed(5, "akmv-test", seed)));
    const double e = akmv_distinct_count(s) / 10000.0 - 1.0;
    sum += e;
    sum_sq += e * e;
    within += std::abs(e) <= 0.15;
  }
  EXPECT_LE(std::abs(sum / seeds), 0.01);
  EXPECT_NEAR(std::sqrt(sum_sq / seeds), 1.0 / std::sqrt(126.0), 0.01);
  EXPECT_GE(within, 880);
}

TEST(LossyCounting, ReportsHeavyItemsWithBoundedError) {
  // Exact counts are the oracle.
  Rng rng(4);
  std::map<std::uint64_t, std::uint64_t> truth;
  LossyCounter lc(0.01, 0.001);
  const std::size_t n = 200000;
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t key = uniform01(rng) < 0.3 ? uniform_index(rng, 10) : 100 + uniform_index(rng, 100000);
    ++truth[key];
    lc.add(key);
  }
  std::map<std::uint64_t, LossyCounter::Entry> reported;
  for (const auto& e : lc.report()) reported[e.key] = e;
  for (const auto& [key, count] : truth) {
    if (static_cast<double>(count) >= 0.01 * n) {
      ASSERT_TRUE(reported.count(key)) << key;
    }
    if (auto it = reported.find(key); it != reported.end()) {
      EXPECT_LE(it->second.count, count);
      EXPECT_LE(static_cast<double>(count - it->second.count), 0.001 * n);
      EXPECT_LE(count, it->second.count + it->second.max_error);
    }
  }
}

TEST(HeavyHitters, HalfOfColumnIsReported) {
  std::vector<std::pair<double, std::string>> rows;
  for (int i = 0; i < 1000; ++i) rows.push_back({0.0, i % 2 ? "a" : "z" + std::to_string(i)});
  auto set = build_sketchset(pairs(rows), 0);
  const auto* a = set.columns[1].heavy_hitters.find("a");
  ASSERT_NE(a, nullptr);
  EXPECT_GE(static_cast<double>(a->count), 500.0 - 0.001 * 1000);
  EXPECT_EQ(set.columns[1].heavy_hitters.items.front().item, "a");
}

TEST(HeavyHitters, NumericItemsUseNumberText) {
  auto set = build_sketchset(numbers({2.5, 2.5, 2.5, 7}), 0);
  EXPECT_NE(set.columns[0].heavy_hitters.find("2.5"), nullptr);
}

TEST(ExactValues, KeptOnlyForLowDistinctColumns) {
  std::vector<std::pair<double, std::string>> few, many;
  for (int i = 0; i < 300; ++i) {
    few.push_back({0, "v" + std::to_string(i % 3)});
    many.push_back({0, "v" + std::to_string(i)});
  }
  auto a = build_sketchset(pairs(few), 0);
  ASSERT_TRUE(a.columns[1].exact_values.has_value());
  EXPECT_EQ(a.columns[1].exact_values->at("v1"), 100u);
  EXPECT_FALSE(a.columns[0].exact_values.has_value());
  auto b = build_sketchset(pairs(many), 0);
  EXPECT_FALSE(b.columns[1].exact_values.has_value());
}

TEST(SketchSet, JsonRoundTripIsLossless) {
  auto dir = scratch_dir("sketch_json");
  auto set = build_sketchset(xyz_rows(300, 7), 3);
  save_sketchset(set, dir / "s.json");
  auto back = load_sketchset(dir / "s.json");
  EXPECT_EQ(back.partition, 3u);
  EXPECT_EQ(back.rows, 300u);
  ASSERT_EQ(back.columns.size(), set.columns.size());
  for (std::size_t c = 0; c < set.columns.size(); ++c) {
    EXPECT_EQ(back.columns[c].akmv.entries(), set.columns[c].akmv.entries());
    EXPECT_EQ(back.columns[c].histogram.boundaries, set.columns[c].histogram.boundaries);
    EXPECT_EQ(back.columns[c].histogram.counts, set.columns[c].histogram.counts);
    EXPECT_EQ(back.columns[c].heavy_hitters.items.size(), set.columns[c].heavy_hitters.items.size());
    EXPECT_EQ(back.columns[c].exact_values, set.columns[c].exact_values);
  }
  EXPECT_EQ(back.columns[0].measures->sum, set.columns[0].measures->sum);
}

TEST(SketchSet, IncrementalBuilderMatchesOneShot) {
  RowBlock rows = xyz_rows(250, 9);
  SketchBuilder b(rows.schema(), {});
  RowBlock first = rows.slice(0, 100), second = rows.slice(100, 150);
  for (std::size_t r = 0; r < first.row_count(); ++r) b.add_row(first, r);
  for (std::size_t r = 0; r < second.row_count(); ++r) b.add_row(second, r);
  auto inc = b.finish(0);
  auto one = build_sketchset(rows, 0);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_EQ(inc.columns[c].akmv.entries(), one.columns[c].akmv.entries());
    EXPECT_EQ(inc.columns[c].histogram.boundaries, one.columns[c].histogram.boundaries);
  }
}

TEST(SketchSet, EmptyPartitionRejected) {
  RowBlock empty(Schema({{"x", ColumnKind::Numeric}}));
  EXPECT_THROW(build_sketchset(empty, 0), RangeError);
}

TEST(GlobalDistinct, MergesPartitions) {
  auto all = xyz_rows(90, 9);
  std::vector<SketchSet> parts;
  for (std::size_t p = 0; p < 3; ++p) parts.push_back(build_sketchset(all.slice(p * 30, 30), p));
  auto d = global_distinct_estimates(parts);
  EXPECT_EQ(d[0], 90.0);
  EXPECT_EQ(d[2], 9.0);
}
