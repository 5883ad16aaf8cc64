#include "partsel/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace partsel {

ErrorReport error_metrics(const GroupedAnswer& estimate, const GroupedAnswer& truth) {
  if (truth.empty()) throw RangeError("error metrics are undefined for an empty true answer");
  const auto est = estimate.finalize();
  const auto exact = truth.finalize();
  const std::size_t aggs = truth.aggregate_count();

  ErrorReport r;
  std::size_t missed = 0;
  double rel_sum = 0.0;
  std::size_t rel_pairs = 0;
  std::vector<double> abs_err(aggs, 0.0), abs_true(aggs, 0.0);
  for (const auto& [key, a] : exact) {
    auto it = est.find(key);
    const bool found = it != est.end();
    if (!found) ++missed;
    for (std::size_t j = 0; j < aggs; ++j) {
      const double e = found ? it->second[j] : 0.0;
      abs_err[j] += std::fabs(e - a[j]);
      abs_true[j] += std::fabs(a[j]);
      if (a[j] == 0.0) {
        ++r.skipped_pairs;
        continue;
      }
      rel_sum += found ? std::fabs(e - a[j]) / std::fabs(a[j]) : 1.0;
      ++rel_pairs;
    }
  }
  const double groups = static_cast<double>(exact.size());
  r.missed_groups = static_cast<double>(missed) / groups;
  r.avg_relative_error = rel_pairs ? rel_sum / static_cast<double>(rel_pairs) : 0.0;
  double ratio_sum = 0.0;
  std::size_t ratio_count = 0;
  for (std::size_t j = 0; j < aggs; ++j) {
    if (abs_true[j] == 0.0) continue;
    ratio_sum += (abs_err[j] / groups) / (abs_true[j] / groups);
    ++ratio_count;
  }
  r.abs_over_true = ratio_count ? ratio_sum / static_cast<double>(ratio_count) : 0.0;
  return r;
}

Selection uniform_select(const std::vector<std::size_t>& population, std::size_t n, Rng& rng) {
  n = std::min(n, population.size());
  Selection out;
  if (n == 0) return out;
  const double w = static_cast<double>(population.size()) / static_cast<double>(n);
  for (auto i : sample_without_replacement(population.size(), n, rng)) out.push_back({population[i], w});
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.partition < b.partition; });
  return out;
}

Selection uniform_select(std::size_t partition_count, std::size_t n, Rng& rng) {
  std::vector<std::size_t> all(partition_count);
  std::iota(all.begin(), all.end(), std::size_t{0});
  return uniform_select(all, n, rng);
}

std::vector<std::size_t> filter_eligible(const FeatureMatrix& features, std::size_t upper_column) {
  std::vector<std::size_t> out;
  for (std::size_t p = 0; p < features.rows; ++p) {
    if (features.at(p, upper_column) > 0.0) out.push_back(p);
  }
  return out;
}

Selection stratified_select(const std::vector<std::size_t>& population, const std::vector<double>& predictions,
                            std::size_t strata, std::size_t n, Rng& rng) {
  if (predictions.size() != population.size()) throw RangeError("one prediction per partition expected");
  if (strata == 0) throw RangeError("strata count must be positive");
  n = std::min(n, population.size());
  if (n == 0) return {};
  const auto [lo_it, hi_it] = std::minmax_element(predictions.begin(), predictions.end());
  const double lo = *lo_it, hi = *hi_it;
  std::vector<std::vector<std::size_t>> bins(strata);
  for (std::size_t i = 0; i < population.size(); ++i) {
    std::size_t b = 0;
    if (hi > lo) {
      b = static_cast<std::size_t>((predictions[i] - lo) / (hi - lo) * static_cast<double>(strata));
      b = std::min(b, strata - 1);
    }
    bins[b].push_back(population[i]);
  }
  std::erase_if(bins, [](const auto& b) { return b.empty(); });

  const double total = static_cast<double>(population.size());
  std::vector<std::size_t> counts(bins.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t used = 0;
  for (std::size_t s = 0; s < bins.size(); ++s) {
    const double exact = static_cast<double>(n) * static_cast<double>(bins[s].size()) / total;
    counts[s] = std::min(bins[s].size(), static_cast<std::size_t>(std::floor(exact)));
    used += counts[s];
    remainders.emplace_back(exact - static_cast<double>(counts[s]), s);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  while (used < n) {
    bool progressed = false;
    for (const auto& [rem, s] : remainders) {
      if (used == n) break;
      if (counts[s] < bins[s].size()) {
        ++counts[s];
        ++used;
        progressed = true;
      }
    }
    if (!progressed) break;
  }

  Selection out;
  for (std::size_t s = 0; s < bins.size(); ++s) {
    if (counts[s] == 0) continue;
    auto part = uniform_select(bins[s], counts[s], rng);
    out.insert(out.end(), part.begin(), part.end());
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.partition < b.partition; });
  return out;
}

std::size_t LssModel::strata_for(std::size_t budget) const {
  if (strata.empty()) return 2;
  auto it = strata.lower_bound(budget);
  if (it == strata.end()) return std::prev(it)->second;
  return it->second;
}

json LssModel::to_json() const {
  json s = json::array();
  for (const auto& [b, k] : strata) s.push_back({b, k});
  return json{{"model", model.to_json()}, {"strata", s}};
}

LssModel LssModel::from_json(const json& doc) {
  LssModel m;
  m.model = GbtModel::from_json(doc.at("model"));
  for (const auto& e : doc.at("strata")) m.strata[e.at(0).get<std::size_t>()] = e.at(1).get<std::size_t>();
  return m;
}

VarianceReport ht_variance(const std::vector<double>& y, double p, const std::vector<std::size_t>& sampled,
                           bool full_population) {
  if (!(p > 0.0 && p <= 1.0)) throw RangeError("inclusion probability must be in (0, 1]");
  VarianceReport r;
  r.inclusion = p;
  r.joint_inclusion = p * p;
  const double coef = 1.0 / (p * p) - 1.0 / p;
  for (auto i : sampled) {
    if (i >= y.size()) throw RangeError("sampled index out of range");
    r.estimate += y[i] / p;
    r.estimated_variance += coef * y[i] * y[i];
  }
  if (full_population) {
    double v = 0.0;
    for (double yi : y) v += (1.0 / p - 1.0) * yi * yi;
    r.true_variance = v;
  }
  return r;
}

RowPartitionVariance row_vs_partition_variance(const std::vector<double>& values,
                                               const std::vector<std::size_t>& partition_of, double p) {
  if (values.size() != partition_of.size()) throw RangeError("one partition assignment per row expected");
  if (!(p > 0.0 && p <= 1.0)) throw RangeError("sampling rate must be in (0, 1]");
  const double coef = 1.0 / (p * p) - 1.0 / p;
  std::map<std::size_t, std::pair<double, double>> blocks;  // sum, sum of squares
  RowPartitionVariance r;
  for (std::size_t i = 0; i < values.size(); ++i) {
    r.row += coef * values[i] * values[i];
    auto& b = blocks[partition_of[i]];
    b.first += values[i];
    b.second += values[i] * values[i];
  }
  double cross = 0.0;
  for (const auto& [id, b] : blocks) cross += b.first * b.first - b.second;
  r.partition = r.row + coef * cross;
  return r;
}

}  // namespace partsel
