#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "partsel/estimate.hpp"
#include "partsel/learn.hpp"
#include "partsel/picker.hpp"
#include "partsel/synthetic.hpp"
#include "partsel/workload.hpp"

namespace partsel {

inline constexpr std::string_view kStrategies[] = {"uniform", "uniform+filter", "lss", "ps3"};

struct ExperimentConfig {
  std::filesystem::path out = "experiment";
  // Data source: a delimited file with its schema, or a synthetic spec.
  std::optional<std::filesystem::path> input;
  Schema schema;
  std::optional<SyntheticSpec> synthetic;

  LayoutSpec layout;
  std::size_t partitions = 100;
  SketchParams sketch;
  std::optional<WorkloadSpec> workload;  // derived from the schema when absent
  std::size_t train_queries = 400;
  std::size_t test_queries = 100;
  std::vector<double> budgets{0.01, 0.05, 0.10, 0.20, 0.50};
  std::vector<std::string> strategies{kStrategies, kStrategies + 4};
  PickerConfig picker;
  FunnelParams funnel;
  bool feature_selection = true;
  std::size_t selection_restarts = 10;
  double selection_sample = 0.20;  // share of training queries used for scoring
  double selection_budget = 0.10;
  std::size_t repetitions = 10;
  std::uint64_t seed = 42;

  void validate() const;
  json to_json() const;
  static ExperimentConfig from_json(const json& doc);
};

// Partition count of a budget fraction: half-up rounding, at least 1.
std::size_t budget_partitions(double fraction, std::size_t partition_count);

// Sums of every numeric column, COUNT(*) and AVG of the first numeric column;
// group-by over categorical columns with at most `group_limit` distinct values.
WorkloadSpec default_workload_spec(const Schema& schema, const std::vector<SketchSet>& sketches,
                                   std::size_t group_limit = 1000);

struct ResultRow {
  std::size_t query = 0;
  std::string strategy;
  double budget = 0.0;
  std::size_t partitions = 0;
  std::size_t run = 0;
  ErrorReport error;
};

struct SummaryRow {
  std::string strategy;
  double budget = 0.0;
  std::size_t partitions = 0;
  std::size_t runs = 0;
  double missed_groups = 0.0;
  double avg_relative_error = 0.0;
  double abs_over_true = 0.0;
};

std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows);
void write_results_csv(const std::vector<ResultRow>& rows, const std::filesystem::path& path);
void write_summary_csv(const std::vector<SummaryRow>& rows, const std::filesystem::path& path);

struct ExperimentResult {
  std::vector<ResultRow> rows;
  std::vector<SummaryRow> summary;
  std::vector<FeatureKind> excluded;
  std::vector<std::string> warnings;
};

// ingest -> sketch -> workload -> oracle -> train -> evaluate. Writes
// results.csv, summary.csv and run.json under config.out. A failing stage
// throws Error naming the stage after flushing finished rows.
ExperimentResult run_experiment(const ExperimentConfig& config);

// Strata count per budget minimizing mean average relative error over the
// training queries.
struct LssTrainingQuery {
  const FeatureMatrix* features = nullptr;  // normalized
  const std::vector<GroupedAnswer>* partials = nullptr;
  const GroupedAnswer* truth = nullptr;
};
LssModel train_lss(const std::vector<TrainingQuery>& train, const std::vector<LssTrainingQuery>& scoring,
                   const std::vector<std::size_t>& budgets, std::size_t upper_column, const GbtParams& params,
                   std::uint64_t seed);

}  // namespace partsel
