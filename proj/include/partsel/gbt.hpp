#pragma once

#include <span>
#include <vector>

#include "partsel/featurize.hpp"

namespace partsel {

struct GbtParams {
  std::size_t trees = 50;
  std::size_t max_depth = 4;
  double learning_rate = 0.1;
  double lambda = 1.0;  // L2 penalty on leaf values
  double min_child_weight = 1.0;
  // Candidate thresholds per feature; features with fewer distinct training
  // values are split exactly between every pair of neighbours.
  std::size_t max_bins = 256;

  json to_json() const;
  static GbtParams from_json(const json& doc);
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // x <= threshold goes left
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf output, already scaled by the learning rate
  double gain = 0.0;
};

class GbtModel {
 public:
  double predict(std::span<const double> x) const;
  std::size_t tree_count() const { return trees_.size(); }
  std::size_t dimension() const { return dimension_; }
  double base_score() const { return base_score_; }
  const std::vector<std::vector<TreeNode>>& trees() const { return trees_; }

  // Sum of split gains per feature.
  std::vector<double> feature_gain() const;

  json to_json() const;
  static GbtModel from_json(const json& doc);

 private:
  friend GbtModel train_gbt(const FeatureMatrix&, std::span<const std::size_t>, std::span<const double>,
                            const GbtParams&);
  GbtParams params_;
  std::size_t dimension_ = 0;
  double base_score_ = 0.0;
  std::vector<std::vector<TreeNode>> trees_;
};

// Squared-error gradient boosting on the given rows of a matrix; labels[i]
// belongs to rows[i]. Constant labels yield a tree-less model.
GbtModel train_gbt(const FeatureMatrix& x, std::span<const std::size_t> rows, std::span<const double> labels,
                   const GbtParams& params = {});
GbtModel train_gbt(const FeatureMatrix& x, std::span<const double> labels, const GbtParams& params = {});

}  // namespace partsel
