#pragma once

#include <map>
#include <optional>
#include <vector>

#include "partsel/answer.hpp"
#include "partsel/gbt.hpp"

namespace partsel {

struct ErrorReport {
  double missed_groups = 0.0;
  double avg_relative_error = 0.0;
  double abs_over_true = 0.0;
  std::size_t skipped_pairs = 0;  // (group, aggregate) pairs with a zero true value
};

// Scores an approximate answer against the exact one. Groups only in the
// estimate are ignored. Throws RangeError for an empty truth.
ErrorReport error_metrics(const GroupedAnswer& estimate, const GroupedAnswer& truth);

// Simple random n of the given partitions, each weighted population / n.
Selection uniform_select(const std::vector<std::size_t>& population, std::size_t n, Rng& rng);
Selection uniform_select(std::size_t partition_count, std::size_t n, Rng& rng);

// Partitions whose selectivity upper bound (raw or normalized feature) is > 0.
std::vector<std::size_t> filter_eligible(const FeatureMatrix& features, std::size_t upper_column);

// Equi-width strata over the prediction range, proportional allocation by
// floor plus largest remainder, uniform draws inside each stratum.
Selection stratified_select(const std::vector<std::size_t>& population, const std::vector<double>& predictions,
                            std::size_t strata, std::size_t n, Rng& rng);

struct LssModel {
  GbtModel model;
  std::map<std::size_t, std::size_t> strata;  // budget -> strata count

  std::size_t strata_for(std::size_t budget) const;
  json to_json() const;
  static LssModel from_json(const json& doc);
};

struct VarianceReport {
  double estimate = 0.0;
  std::optional<double> true_variance;
  double estimated_variance = 0.0;
  double inclusion = 0.0;        // first-order inclusion probability
  double joint_inclusion = 0.0;  // second-order, distinct units
};

// Horvitz-Thompson total under Poisson sampling with a common inclusion
// probability p in (0, 1]. `sampled` holds indices into y. The true variance
// is reported only when every y is known (full_population).
VarianceReport ht_variance(const std::vector<double>& y, double p, const std::vector<std::size_t>& sampled,
                           bool full_population = true);

struct RowPartitionVariance {
  double row = 0.0;
  double partition = 0.0;
};

// Variance of the HT total when rows are sampled independently versus when
// whole partitions are, both at rate p.
RowPartitionVariance row_vs_partition_variance(const std::vector<double>& values,
                                               const std::vector<std::size_t>& partition_of, double p);

}  // namespace partsel
