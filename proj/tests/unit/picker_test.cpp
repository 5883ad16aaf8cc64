#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "fixtures.hpp"
#include "partsel/estimate.hpp"
#include "partsel/picker.hpp"

using namespace partsel;

namespace {

FeatureMatrix zeros(std::size_t rows, std::size_t cols) { return {rows, cols, std::vector<double>(rows * cols, 0.0)}; }

std::vector<std::size_t> iota_ids(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

// A model that predicts a constant.
GbtModel constant_model(double value) {
  FeatureMatrix x = zeros(2, 1);
  return train_gbt(x, std::vector<double>{value, value});
}

// Model predicting positive exactly when column `col` exceeds `cut`.
GbtModel threshold_model(std::size_t cols, std::size_t col, double cut) {
  FeatureMatrix x = zeros(400, cols);
  std::vector<double> y(400);
  for (std::size_t r = 0; r < 400; ++r) {
    x.at(r, col) = static_cast<double>(r) / 400.0;
    y[r] = x.at(r, col) > cut ? 1.0 : -1.0;
  }
  return train_gbt(x, y);
}

}  // namespace

TEST(Config, ValidationAndJson) {
  PickerConfig c;
  c.excluded = {FeatureKind::Bitmap, FeatureKind::StdDev};
  c.exemplar = ExemplarMode::RandomMember;
  c.method = ClusterMethod::Ward;
  auto back = PickerConfig::from_json(c.to_json());
  EXPECT_EQ(back.excluded, c.excluded);
  EXPECT_EQ(back.exemplar, c.exemplar);
  EXPECT_EQ(back.method, c.method);
  c.alpha = 1.0;
  EXPECT_THROW(c.validate(), RangeError);
  c.alpha = 2;
  c.outlier_fraction = 1.5;
  EXPECT_THROW(c.validate(), RangeError);
}

TEST(Outliers, SmallBucketIsOutlying) {
  FeatureMatrix f = zeros(100, 2);
  for (std::size_t p = 0; p < 100; ++p) {
    f.at(p, 0) = 1;
    f.at(p, 1) = p >= 95;
  }
  auto split = detect_outliers(f, iota_ids(100), {{0, 2}}, 100);
  EXPECT_EQ(split.outliers, (std::vector<std::size_t>{95, 96, 97, 98, 99}));
  EXPECT_EQ(split.inliers.size(), 95u);
}

TEST(Outliers, EvenBucketsAreNotOutlying) {
  FeatureMatrix f = zeros(1000, 7);
  for (std::size_t p = 0; p < 1000; ++p) {
    for (std::size_t b = 0; b < 7; ++b) f.at(p, b) = (p / 10) >> b & 1;
  }
  auto split = detect_outliers(f, iota_ids(1000), {{0, 7}}, 1000);
  EXPECT_TRUE(split.outliers.empty());
}

TEST(Outliers, NoGroupByNoOutliers) {
  FeatureMatrix f = zeros(10, 1);
  f.at(0, 0) = 1;
  auto split = detect_outliers(f, iota_ids(10), {}, 10);
  EXPECT_TRUE(split.outliers.empty());
  EXPECT_EQ(split.inliers.size(), 10u);
}

TEST(Outliers, CapTakesSmallestBucketsFirst) {
  // Buckets: 200 x key0, 4 x key1, 2 x key2, 3 x key3.
  FeatureMatrix f = zeros(209, 2);
  for (std::size_t p = 200; p < 204; ++p) f.at(p, 0) = 1;
  for (std::size_t p = 204; p < 206; ++p) f.at(p, 1) = 1;
  for (std::size_t p = 206; p < 209; ++p) f.at(p, 0) = f.at(p, 1) = 1;
  auto split = detect_outliers(f, iota_ids(209), {{0, 2}}, 6);
  EXPECT_EQ(split.outliers, (std::vector<std::size_t>{200, 204, 205, 206, 207, 208}));
  EXPECT_EQ(split.inliers.size(), 203u);
}

TEST(Importance, ConstantNegativeModelsGiveOneGroup) {
  FeatureMatrix f = zeros(6, 2);
  for (std::size_t p = 0; p < 6; ++p) f.at(p, 1) = 0.5;
  FunnelModels funnel;
  funnel.models = {constant_model(-1), constant_model(-1)};
  funnel.levels = default_levels(2);
  auto groups = importance_group(f, 1, iota_ids(6), funnel);
  ASSERT_EQ(groups.size(), 3u);
  EXPECT_EQ(groups[0].size(), 6u);
  EXPECT_TRUE(groups[1].empty());
  EXPECT_TRUE(groups[2].empty());
}

TEST(Importance, ZeroUpperExcluded) {
  FeatureMatrix f = zeros(4, 2);
  f.at(0, 1) = 0.2;
  f.at(2, 1) = 1.0;
  auto groups = importance_group(f, 1, iota_ids(4), FunnelModels{});
  ASSERT_EQ(groups.size(), 1u);
  EXPECT_EQ(groups[0], (std::vector<std::size_t>{0, 2}));
}

TEST(Importance, TwoModelFunnelMatchesThresholds) {
  FeatureMatrix f = zeros(50, 2);
  for (std::size_t p = 0; p < 50; ++p) {
    f.at(p, 0) = (static_cast<double>(p) + 0.5) / 50.0;
    f.at(p, 1) = 1.0;
  }
  FunnelModels funnel;
  funnel.models = {threshold_model(2, 0, 0.3), threshold_model(2, 0, 0.7)};
  funnel.levels = default_levels(2);
  auto groups = importance_group(f, 1, iota_ids(50), funnel);
  for (std::size_t p = 0; p < 50; ++p) {
    const double v = f.at(p, 0);
    const std::size_t expect = v > 0.7 ? 2 : v > 0.3 ? 1 : 0;
    EXPECT_TRUE(std::find(groups[expect].begin(), groups[expect].end(), p) != groups[expect].end()) << p;
  }
}

TEST(Allocate, TwoEqualGroups) {
  auto a = allocate_samples({100, 100}, 30, 2.0);
  EXPECT_EQ(a.counts, (std::vector<std::size_t>{10, 20}));
  EXPECT_NEAR(a.rates[1] / a.rates[0], 2.0, 1e-12);
}

TEST(Allocate, SingleGroupAndFullBudget) {
  auto one = allocate_samples({40}, 10, 2.0);
  EXPECT_EQ(one.counts[0], 10u);
  EXPECT_DOUBLE_EQ(one.rates[0], 0.25);
  auto full = allocate_samples({5, 7, 0, 3}, 15, 2.0);
  EXPECT_EQ(full.counts, (std::vector<std::size_t>{5, 7, 0, 3}));
  for (std::size_t i : {0u, 1u, 3u}) EXPECT_EQ(full.rates[i], 1.0);
  EXPECT_EQ(allocate_samples({5, 5}, 100, 2.0).counts, (std::vector<std::size_t>{5, 5}));
}

TEST(Allocate, SumsToBudgetAndKeepsRatio) {
  Rng rng(5);
  for (int t = 0; t < 2000; ++t) {
    const std::size_t g = 1 + uniform_index(rng, 6);
    std::vector<std::size_t> sizes(g);
    std::size_t total = 0;
    for (auto& s : sizes) {
      s = uniform01(rng) < 0.2 ? 0 : uniform_index(rng, 300);
      total += s;
    }
    if (total == 0) continue;
    const std::size_t budget = 1 + uniform_index(rng, total);
    const double alpha = 1.1 + 3.0 * uniform01(rng);
    auto a = allocate_samples(sizes, budget, alpha);
    EXPECT_EQ(std::accumulate(a.counts.begin(), a.counts.end(), std::size_t{0}), budget);
    std::size_t prev = g;
    for (std::size_t i = 0; i < g; ++i) {
      EXPECT_LE(a.counts[i], sizes[i]);
      if (sizes[i] == 0) continue;
      EXPECT_LE(a.rates[i], 1.0);
      if (prev != g) {
        EXPECT_GE(a.rates[i], a.rates[prev] - 1e-12);
        if (a.rates[i] < 1.0) EXPECT_NEAR(a.rates[i] / a.rates[prev], alpha, 1e-9);
      }
      prev = i;
    }
  }
}

TEST(Exemplar, MedianClosestWithTies) {
  FeatureMatrix f{5, 1, {0, 4, 5, 6, 100}};
  Rng rng(1);
  EXPECT_EQ(choose_exemplar(f, {0}, {0, 1, 2, 3, 4}, ExemplarMode::MedianClosest, rng), 2u);
  // Even count: median 5 between 4 and 6, both at distance 1; lower index wins.
  EXPECT_EQ(choose_exemplar(f, {0}, {3, 1}, ExemplarMode::MedianClosest, rng), 1u);
}

TEST(Exemplar, RandomModeIsUniform) {
  FeatureMatrix f{4, 1, {0, 1, 2, 3}};
  Rng rng(2);
  std::vector<int> hits(4, 0);
  for (int i = 0; i < 40000; ++i) ++hits[choose_exemplar(f, {0}, {0, 1, 2, 3}, ExemplarMode::RandomMember, rng)];
  for (int h : hits) EXPECT_NEAR(h, 10000, 400);
}

TEST(ClusterSample, EveryMemberOwnCluster) {
  FeatureMatrix f{4, 1, {1, 7, 3, 9}};
  Rng rng(3);
  auto cs = cluster_sample(f, {0}, {3, 0, 2, 1}, 4, PickerConfig{}, rng);
  ASSERT_EQ(cs.exemplars.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(cs.exemplars[i].partition, i);
    EXPECT_EQ(cs.exemplars[i].weight, 1.0);
  }
}

TEST(ClusterSample, IdenticalVectorsOneExemplar) {
  FeatureMatrix f{6, 2, std::vector<double>(12, 0.4)};
  Rng rng(4);
  auto cs = cluster_sample(f, {0, 1}, iota_ids(6), 1, PickerConfig{}, rng);
  ASSERT_EQ(cs.exemplars.size(), 1u);
  EXPECT_EQ(cs.exemplars[0].weight, 6.0);
  auto three = cluster_sample(f, {0, 1}, iota_ids(6), 3, PickerConfig{}, rng);
  ASSERT_EQ(three.exemplars.size(), 3u);
  for (const auto& w : three.exemplars) EXPECT_EQ(w.weight, 2.0);
}

TEST(ClusterSample, TwoBlobs) {
  FeatureMatrix f = zeros(10, 2);
  for (std::size_t p = 0; p < 10; ++p) {
    const bool far = p == 2 || p == 5 || p == 9;
    f.at(p, 0) = (far ? 50.0 : 0.0) + 0.01 * static_cast<double>(p);
    f.at(p, 1) = far ? -20.0 : 1.0;
  }
  for (auto method : {ClusterMethod::KMeans, ClusterMethod::Ward}) {
    PickerConfig c;
    c.method = method;
    Rng rng(5);
    auto cs = cluster_sample(f, {0, 1}, iota_ids(10), 2, c, rng);
    ASSERT_EQ(cs.exemplars.size(), 2u);
    std::multiset<double> weights{cs.exemplars[0].weight, cs.exemplars[1].weight};
    EXPECT_EQ(weights, (std::multiset<double>{3.0, 7.0}));
    const auto& blob3 = cs.exemplars[0].weight == 3.0 ? cs.exemplars[0] : cs.exemplars[1];
    EXPECT_TRUE(blob3.partition == 2 || blob3.partition == 5 || blob3.partition == 9);
  }
}

TEST(ClusterSample, WeightsConserveGroupSize) {
  Rng rng(6);
  for (int t = 0; t < 100; ++t) {
    const std::size_t m = 2 + uniform_index(rng, 40);
    FeatureMatrix f{m, 3, std::vector<double>(3 * m)};
    for (auto& v : f.values) v = static_cast<double>(uniform_index(rng, 4));
    const std::size_t n = 1 + uniform_index(rng, m);
    auto cs = cluster_sample(f, {0, 1, 2}, iota_ids(m), n, PickerConfig{}, rng);
    double w = 0;
    std::set<std::size_t> ids;
    for (const auto& e : cs.exemplars) {
      w += e.weight;
      ids.insert(e.partition);
    }
    EXPECT_EQ(w, static_cast<double>(m));
    EXPECT_EQ(ids.size(), cs.exemplars.size());
    EXPECT_LE(cs.exemplars.size(), n);
  }
}

TEST(ClusterSample, RejectsBadCount) {
  FeatureMatrix f = zeros(3, 1);
  Rng rng(7);
  EXPECT_THROW(cluster_sample(f, {0}, {0, 1}, 3, PickerConfig{}, rng), RangeError);
  EXPECT_THROW(cluster_sample(f, {0}, {0, 1}, 0, PickerConfig{}, rng), RangeError);
}

namespace {

// Ten partitions of ten rows, x = 1..100 in order; g cycles over 3 values.
struct TenPartitions {
  std::vector<RowBlock> blocks;
  FeatureContext ctx;

  TenPartitions() {
    RowBlock all = partsel::testing::xyz_rows(100, 3);
    std::vector<SketchSet> sk;
    for (std::size_t p = 0; p < 10; ++p) {
      blocks.push_back(all.slice(p * 10, 10));
      sk.push_back(build_sketchset(blocks.back(), p));
    }
    ctx = FeatureContext(all.schema(), std::move(sk));
  }
};

}  // namespace

TEST(Pick, FilterLeavesThreePartitions) {
  TenPartitions t;
  Query q = parse_query("SELECT SUM(x) FROM t WHERE x >= 21 AND x <= 50");
  auto f = t.ctx.featurize(q);
  auto res = pick(make_pick_input(t.ctx, q, f), 5, FunnelModels{}, PickerConfig{});
  ASSERT_EQ(res.selection.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(res.selection[i].partition, 2 + i);
    EXPECT_EQ(res.selection[i].weight, 1.0);
  }
  // The exact filter oracle agrees.
  for (std::size_t p = 0; p < 10; ++p) {
    const bool match = !evaluate_exact(q, t.blocks[p]).empty();
    EXPECT_EQ(match, p >= 2 && p <= 4);
  }
}

TEST(Pick, ManyClausesFallBackToRandom) {
  TenPartitions t;
  std::string where = "x > 0";
  for (int i = 1; i <= 20; ++i) where += (i % 2 ? " OR x < " : " AND x > ") + std::to_string(-i);
  Query q = parse_query("SELECT SUM(x) FROM t WHERE " + where);
  ASSERT_EQ(q.predicate.clause_count(), 21u);
  auto f = t.ctx.featurize(q);
  auto res = pick(make_pick_input(t.ctx, q, f), 4, FunnelModels{}, PickerConfig{});
  EXPECT_EQ(res.selection.size(), 4u);
  bool random = false;
  for (const auto& line : res.explain) random = random || line.find("random within groups") != std::string::npos;
  EXPECT_TRUE(random);

  Query few = parse_query("SELECT SUM(x) FROM t WHERE x > 0");
  auto f2 = t.ctx.featurize(few);
  auto res2 = pick(make_pick_input(t.ctx, few, f2), 4, FunnelModels{}, PickerConfig{});
  bool clustering = false;
  for (const auto& line : res2.explain) clustering = clustering || line.find("clustering") != std::string::npos;
  EXPECT_TRUE(clustering);
}

TEST(Pick, FullBudgetIsExact) {
  TenPartitions t;
  for (const char* text : {"SELECT SUM(x), COUNT(*), g FROM t GROUP BY g",
                           "SELECT AVG(x), g FROM t WHERE x < 77 OR g = 'b' GROUP BY g"}) {
    Query q = parse_query(text);
    auto f = t.ctx.featurize(q);
    auto res = pick(make_pick_input(t.ctx, q, f), 10, FunnelModels{}, PickerConfig{});
    std::vector<GroupedAnswer> partials;
    for (const auto& b : t.blocks) partials.push_back(evaluate_exact(q, b));
    auto err = error_metrics(merge_answers(res.selection, partials), exact_answer(partials));
    EXPECT_EQ(err.avg_relative_error, 0.0);
    EXPECT_EQ(err.missed_groups, 0.0);
  }
}

TEST(Pick, SizeDistinctAndDeterministic) {
  TenPartitions t;
  Query q = parse_query("SELECT SUM(x), g FROM t WHERE x > 15 GROUP BY g");
  auto f = t.ctx.featurize(q);
  auto in = make_pick_input(t.ctx, q, f);
  for (std::size_t n = 1; n <= 12; ++n) {
    auto a = pick(in, n, FunnelModels{}, PickerConfig{});
    auto b = pick(in, n, FunnelModels{}, PickerConfig{});
    EXPECT_EQ(a.selection.size(), std::min<std::size_t>(n, 9));
    std::set<std::size_t> ids;
    double w = 0;
    for (std::size_t i = 0; i < a.selection.size(); ++i) {
      ids.insert(a.selection[i].partition);
      w += a.selection[i].weight;
      EXPECT_EQ(a.selection[i].partition, b.selection[i].partition);
      EXPECT_EQ(a.selection[i].weight, b.selection[i].weight);
    }
    EXPECT_EQ(ids.size(), a.selection.size());
    EXPECT_EQ(w, 9.0);
  }
  EXPECT_THROW(pick(in, 0, FunnelModels{}, PickerConfig{}), RangeError);
}

TEST(FeatureSelection, ConstantScoreExcludesNothing) {
  auto r = select_features([](const ExclusionMask&) { return 1.0; }, 22, 10, 1);
  EXPECT_EQ(std::count(r.excluded.begin(), r.excluded.end(), 1), 0);
  EXPECT_EQ(r.restarts.size(), 10u);
}

TEST(FeatureSelection, SeparableScoreFindsOptimum) {
  // Excluding units 3 and 5 helps, excluding anything else hurts.
  auto score = [](const ExclusionMask& m) {
    double s = 10.0;
    for (std::size_t i = 0; i < m.size(); ++i) s += m[i] ? (i == 3 || i == 5 ? -1.0 : 0.5) : 0.0;
    return s;
  };
  auto r = select_features(score, 8, 5, 2);
  ExclusionMask want(8, 0);
  want[3] = want[5] = 1;
  EXPECT_EQ(r.excluded, want);
  EXPECT_EQ(r.score, 8.0);
}

namespace {

// Partitions whose SUM is driven by a signal column; a second column is noise.
struct NoiseInstance {
  FeatureMatrix features;
  std::vector<std::vector<GroupedAnswer>> partials;
  std::vector<GroupedAnswer> truths;

  explicit NoiseInstance(std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t n = 60;
    features = {n, 2, std::vector<double>(2 * n)};
    std::vector<double> signal(n);
    for (std::size_t p = 0; p < n; ++p) {
      signal[p] = static_cast<double>(p % 3);
      features.at(p, 0) = signal[p];
      features.at(p, 1) = 5.0 * uniform01(rng);
    }
    for (int q = 0; q < 4; ++q) {
      std::vector<GroupedAnswer> parts(n);
      for (std::size_t p = 0; p < n; ++p) {
        parts[p].kinds = {Aggregate::Kind::Sum};
        parts[p].groups[{}] = {{std::pow(3.0, signal[p]) * (1 + q)}, 1.0};
      }
      truths.push_back(exact_answer(parts));
      partials.push_back(std::move(parts));
    }
  }

  double score(const ExclusionMask& mask) const {
    std::vector<std::size_t> cols;
    for (std::size_t c = 0; c < 2; ++c) {
      if (!mask[c]) cols.push_back(c);
    }
    std::vector<std::size_t> all(features.rows);
    std::iota(all.begin(), all.end(), std::size_t{0});
    double total = 0;
    for (std::size_t q = 0; q < partials.size(); ++q) {
      Rng rng(q);
      auto cs = cluster_sample(features, cols, all, 4, PickerConfig{}, rng);
      total += error_metrics(merge_answers(cs.exemplars, partials[q]), truths[q]).avg_relative_error;
    }
    return total / static_cast<double>(partials.size());
  }
};

}  // namespace

TEST(FeatureSelection, NoiseColumnExcluded) {
  NoiseInstance inst(9);
  auto r = select_features([&](const ExclusionMask& m) { return inst.score(m); }, 2, 10, 3);
  int noise_out = 0;
  for (const auto& m : r.restarts) noise_out += m[1];
  EXPECT_GE(noise_out, 8);
  EXPECT_EQ(r.excluded[1], 1);
  EXPECT_EQ(r.excluded[0], 0);
}

TEST(FeatureSelection, ResultIsOneStepLocalOptimum) {
  Rng rng(10);
  std::vector<double> w(12);
  for (auto& v : w) v = uniform01(rng) - 0.5;
  // Non-separable score with interactions between neighbouring units.
  auto score = [&](const ExclusionMask& m) {
    double s = 0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      s += m[i] * w[i];
      if (i + 1 < m.size()) s += m[i] * m[i + 1] * 0.3;
    }
    return s;
  };
  auto r = select_features(score, 12, 10, 4);
  for (std::size_t u = 0; u < 12; ++u) {
    if (r.excluded[u]) continue;
    ExclusionMask more = r.excluded;
    more[u] = 1;
    EXPECT_GE(score(more), r.score);
  }
  for (const auto& m : r.restarts) EXPECT_GE(score(m), r.score);
}
