#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "partsel/experiment.hpp"

using namespace partsel;

namespace {

ExperimentConfig tiny(const std::string& name) {
  ExperimentConfig c;
  c.out = partsel::testing::scratch_dir(name);
  SyntheticSpec s;
  s.rows = 2000;
  s.numeric_columns = 2;
  s.categorical_columns = 2;
  s.cardinalities = {5, 3};
  s.days = 100;
  s.seed = 3;
  c.synthetic = s;
  c.layout = LayoutSpec::parse("sorted:day");
  c.partitions = 8;
  c.train_queries = 10;
  c.test_queries = 5;
  c.budgets = {0.25, 1.0};
  c.repetitions = 2;
  c.feature_selection = false;
  c.seed = 7;
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(Budget, HalfUpAndAtLeastOne) {
  EXPECT_EQ(budget_partitions(0.01, 100), 1u);
  EXPECT_EQ(budget_partitions(0.005, 100), 1u);
  EXPECT_EQ(budget_partitions(0.025, 100), 3u);
  EXPECT_EQ(budget_partitions(0.2, 1000), 200u);
  EXPECT_EQ(budget_partitions(1.0, 7), 7u);
  EXPECT_EQ(budget_partitions(0.0001, 3), 1u);
}

TEST(Summary, MeansPerStrategyAndBudget) {
  std::vector<ResultRow> rows;
  for (std::size_t q = 0; q < 2; ++q) {
    for (std::size_t run = 0; run < 2; ++run) {
      ResultRow r;
      r.query = q;
      r.strategy = "ps3";
      r.budget = 0.1;
      r.partitions = 10;
      r.run = run;
      r.error.avg_relative_error = static_cast<double>(q + run);
      r.error.missed_groups = 0.5 * static_cast<double>(run);
      rows.push_back(r);
    }
  }
  rows.push_back({0, "uniform", 0.1, 10, 0, {}});
  rows.back().error.avg_relative_error = 9;
  auto s = summarize(rows);
  ASSERT_EQ(s.size(), 2u);
  const auto& ps3 = s[0].strategy == "ps3" ? s[0] : s[1];
  const auto& uni = s[0].strategy == "ps3" ? s[1] : s[0];
  EXPECT_DOUBLE_EQ(ps3.avg_relative_error, 1.0);
  EXPECT_DOUBLE_EQ(ps3.missed_groups, 0.25);
  EXPECT_EQ(ps3.runs, 4u);
  EXPECT_DOUBLE_EQ(uni.avg_relative_error, 9.0);
}

TEST(Config, JsonRoundTripAndValidation) {
  auto c = tiny("exp_cfg");
  auto back = ExperimentConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json().dump(), c.to_json().dump());
  c.budgets = {1.5};
  EXPECT_THROW(c.validate(), RangeError);
  c.budgets = {0.1};
  c.strategies = {"bogus"};
  EXPECT_THROW(c.validate(), RangeError);
}

TEST(Experiment, TinyRunWritesOutputs) {
  auto c = tiny("exp_run");
  auto r = run_experiment(c);
  // Median-mode ps3 runs once; the others once per repetition.
  EXPECT_EQ(r.rows.size(), 5u * 2u * (3u * 2u + 1u));
  EXPECT_EQ(r.summary.size(), 2u * 4u);
  for (const char* f : {"results.csv", "summary.csv", "run.json"}) EXPECT_TRUE(std::filesystem::exists(c.out / f)) << f;
  // Every strategy is exact at the full budget.
  for (const auto& s : r.summary) {
    if (s.budget == 1.0) {
      EXPECT_EQ(s.avg_relative_error, 0.0) << s.strategy;
      EXPECT_EQ(s.missed_groups, 0.0) << s.strategy;
    }
  }
}

TEST(Experiment, SameSeedSameBytes) {
  auto a = tiny("exp_det_a");
  auto b = tiny("exp_det_b");
  run_experiment(a);
  run_experiment(b);
  EXPECT_EQ(slurp(a.out / "summary.csv"), slurp(b.out / "summary.csv"));
  EXPECT_EQ(slurp(a.out / "results.csv"), slurp(b.out / "results.csv"));
}
