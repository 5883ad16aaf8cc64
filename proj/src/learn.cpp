#include "partsel/learn.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace partsel {

std::vector<double> contribution(const std::vector<GroupedAnswer>& partials, const GroupedAnswer& full) {
  std::vector<double> out(partials.size(), 0.0);
  for (std::size_t i = 0; i < partials.size(); ++i) {
    double best = 0.0;
    for (const auto& [key, g] : partials[i].groups) {
      auto it = full.groups.find(key);
      if (it == full.groups.end()) continue;
      const auto& total = it->second.sums;
      for (std::size_t j = 0; j < g.sums.size() && j < total.size(); ++j) {
        if (total[j] == 0.0) continue;
        best = std::max(best, g.sums[j] / total[j]);
      }
    }
    out[i] = best;
  }
  return out;
}

std::optional<std::vector<double>> generate_labels(const std::vector<char>& positive, double c) {
  const std::size_t n = positive.size();
  const auto pos = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), 1));
  if (pos == 0 || pos == n) return std::nullopt;
  const double up = std::sqrt(c / static_cast<double>(pos));
  const double down = -std::sqrt(c / static_cast<double>(n - pos));
  std::vector<double> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = positive[i] ? up : down;
  return labels;
}

std::optional<std::vector<double>> generate_labels(const std::vector<double>& contributions, double threshold,
                                                   double c) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw RangeError("label threshold must be in [0, 1]");
  std::vector<char> positive(contributions.size());
  for (std::size_t i = 0; i < contributions.size(); ++i) positive[i] = contributions[i] > threshold;
  return generate_labels(positive, c);
}

std::vector<char> FunnelLevel::passes(const std::vector<double>& contributions) const {
  const std::size_t n = contributions.size();
  std::vector<char> out(n, 0);
  if (kind == Kind::NonZero) {
    for (std::size_t i = 0; i < n; ++i) out[i] = contributions[i] > 0.0;
    return out;
  }
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < n; ++i) {
    if (contributions[i] > 0.0) order.push_back(i);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (contributions[a] != contributions[b]) return contributions[a] > contributions[b];
    return a < b;
  });
  const auto take = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
  for (std::size_t i = 0; i < order.size() && i < take; ++i) out[order[i]] = 1;
  return out;
}

std::string FunnelLevel::describe() const {
  if (kind == Kind::NonZero) return "contribution > 0";
  return "top " + format_number(fraction * 100.0) + "%";
}

std::vector<FunnelLevel> default_levels(std::size_t k) {
  if (k == 0) throw RangeError("funnel needs at least one model");
  std::vector<FunnelLevel> levels{{FunnelLevel::Kind::NonZero, 1.0}};
  if (k == 2) levels.push_back({FunnelLevel::Kind::TopFraction, 0.01});
  for (std::size_t i = 2; k > 2 && i <= k; ++i) {
    const double t = static_cast<double>(i - 2) / static_cast<double>(k - 2);
    levels.push_back({FunnelLevel::Kind::TopFraction, 0.25 * std::pow(0.01 / 0.25, t)});
  }
  return levels;
}

json FunnelModels::to_json() const {
  json lv = json::array();
  for (const auto& l : levels) {
    lv.push_back({{"kind", l.kind == FunnelLevel::Kind::NonZero ? "nonzero" : "top"}, {"fraction", l.fraction}});
  }
  json ms = json::array();
  for (const auto& m : models) ms.push_back(m.to_json());
  return json{{"levels", lv}, {"models", ms}, {"warnings", warnings}};
}

FunnelModels FunnelModels::from_json(const json& doc) {
  FunnelModels f;
  for (const auto& l : doc.at("levels")) {
    const std::string kind = l.at("kind").get<std::string>();
    f.levels.push_back({kind == "nonzero" ? FunnelLevel::Kind::NonZero : FunnelLevel::Kind::TopFraction,
                        l.at("fraction").get<double>()});
  }
  for (const auto& m : doc.at("models")) f.models.push_back(GbtModel::from_json(m));
  f.warnings = doc.value("warnings", std::vector<std::string>{});
  if (f.levels.size() != f.models.size()) throw ParseError("funnel levels and models differ in count");
  return f;
}

FunnelModels train_funnel(const std::vector<TrainingQuery>& train, const FunnelParams& params) {
  if (train.size() < params.min_queries) {
    throw RangeError("funnel training needs at least " + std::to_string(params.min_queries) + " queries, got " +
                     std::to_string(train.size()));
  }
  const std::size_t cols = train.front().features.cols;
  FeatureMatrix stacked;
  stacked.cols = cols;
  for (const auto& q : train) {
    if (q.features.cols != cols || q.features.rows != q.contributions.size()) {
      throw RangeError("training query shapes disagree");
    }
    stacked.values.insert(stacked.values.end(), q.features.values.begin(), q.features.values.end());
    stacked.rows += q.features.rows;
  }

  FunnelModels funnel;
  for (const auto& level : default_levels(params.k)) {
    std::vector<std::size_t> rows;
    std::vector<double> labels;
    std::size_t positives = 0;
    std::size_t offset = 0;
    for (const auto& q : train) {
      const auto pass = level.passes(q.contributions);
      if (auto y = generate_labels(pass, params.label_c)) {
        for (std::size_t i = 0; i < y->size(); ++i) {
          rows.push_back(offset + i);
          labels.push_back((*y)[i]);
          positives += pass[i] ? 1 : 0;
        }
      }
      offset += q.features.rows;
    }
    if (positives < params.min_positive_rows) {
      funnel.warnings.push_back("dropped model for " + level.describe() + ": only " + std::to_string(positives) +
                                " positive training rows");
      continue;
    }
    funnel.levels.push_back(level);
    funnel.models.push_back(train_gbt(stacked, rows, labels, params.gbt));
  }
  return funnel;
}

double FeatureImportance::share(FeatureCategory c) const {
  for (const auto& [cat, s] : shares) {
    if (cat == c) return s;
  }
  return 0.0;
}

FeatureImportance feature_importance(const std::vector<const GbtModel*>& models, const FeatureSchema& layout) {
  std::array<double, 4> totals{};
  for (const GbtModel* m : models) {
    const auto gain = m->feature_gain();
    for (std::size_t i = 0; i < gain.size() && i < layout.dimension(); ++i) {
      totals[static_cast<std::size_t>(category_of(layout[i].kind))] += gain[i];
    }
  }
  FeatureImportance report;
  const double sum = std::accumulate(totals.begin(), totals.end(), 0.0);
  if (sum <= 0.0) return report;
  for (auto c : {FeatureCategory::Selectivity, FeatureCategory::HeavyHitter, FeatureCategory::Distinct,
                 FeatureCategory::Measures}) {
    report.shares.emplace_back(c, 100.0 * totals[static_cast<std::size_t>(c)] / sum);
  }
  return report;
}

FeatureImportance feature_importance(const FunnelModels& funnel, const FeatureSchema& layout) {
  std::vector<const GbtModel*> models;
  for (const auto& m : funnel.models) models.push_back(&m);
  return feature_importance(models, layout);
}

}  // namespace partsel
