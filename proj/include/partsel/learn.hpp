#pragma once

#include <optional>
#include <string>
#include <vector>

#include "partsel/answer.hpp"
#include "partsel/gbt.hpp"

namespace partsel {

// Per partition: max over groups and aggregates of its share of the full
// answer, skipping zero totals and flooring at 0. AVG uses its SUM part.
std::vector<double> contribution(const std::vector<GroupedAnswer>& partials, const GroupedAnswer& full);

// +sqrt(c / positives) for partitions flagged positive, -sqrt(c / negatives)
// otherwise; nullopt when every or no partition is positive.
std::optional<std::vector<double>> generate_labels(const std::vector<char>& positive, double c = 1.0);
std::optional<std::vector<double>> generate_labels(const std::vector<double>& contributions, double threshold,
                                                   double c = 1.0);

struct FunnelLevel {
  enum class Kind { NonZero, TopFraction };
  Kind kind = Kind::NonZero;
  double fraction = 1.0;  // TopFraction: share of all partitions

  // Partitions whose contribution passes this level for one query. TopFraction
  // takes the ceil(fraction * n) best-ranked partitions with contribution > 0,
  // ranked by contribution desc then index asc.
  std::vector<char> passes(const std::vector<double>& contributions) const;
  std::string describe() const;
};

// Level 1 is "contribution > 0"; the rest are top fractions spaced
// geometrically from 25% down to 1%.
std::vector<FunnelLevel> default_levels(std::size_t k);

struct TrainingQuery {
  FeatureMatrix features;  // normalized, one row per partition
  std::vector<double> contributions;
};

struct FunnelParams {
  std::size_t k = 4;
  double label_c = 1.0;
  std::size_t min_queries = 50;
  std::size_t min_positive_rows = 5;
  GbtParams gbt;
};

struct FunnelModels {
  std::vector<FunnelLevel> levels;
  std::vector<GbtModel> models;
  std::vector<std::string> warnings;

  std::size_t size() const { return models.size(); }
  json to_json() const;
  static FunnelModels from_json(const json& doc);
};

FunnelModels train_funnel(const std::vector<TrainingQuery>& train, const FunnelParams& params = {});

struct FeatureImportance {
  // Percent of the total split gain per category; empty when no model split.
  std::vector<std::pair<FeatureCategory, double>> shares;

  bool empty() const { return shares.empty(); }
  double share(FeatureCategory c) const;
};

FeatureImportance feature_importance(const std::vector<const GbtModel*>& models, const FeatureSchema& layout);
FeatureImportance feature_importance(const FunnelModels& funnel, const FeatureSchema& layout);

}  // namespace partsel
