#include "partsel/picker.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "partsel/cluster.hpp"
#include "partsel/estimate.hpp"

namespace partsel {

void PickerConfig::validate() const {
  if (!(alpha > 1.0)) throw RangeError("decay rate must exceed 1");
  if (!(outlier_fraction >= 0.0 && outlier_fraction <= 1.0)) throw RangeError("outlier fraction must be in [0, 1]");
  if (k == 0) throw RangeError("funnel size must be positive");
}

json PickerConfig::to_json() const {
  std::vector<std::string> ex;
  for (auto kind : excluded) ex.emplace_back(to_string(kind));
  return json{{"alpha", alpha},
              {"k", k},
              {"outlier_fraction", outlier_fraction},
              {"outlier_absolute", outlier_absolute},
              {"outlier_relative", outlier_relative},
              {"clause_threshold", clause_threshold},
              {"exemplar", exemplar == ExemplarMode::MedianClosest ? "median" : "random"},
              {"method", method == ClusterMethod::KMeans ? "kmeans" : "ward"},
              {"excluded", ex},
              {"seed", seed}};
}

PickerConfig PickerConfig::from_json(const json& doc) {
  PickerConfig c;
  c.alpha = doc.value("alpha", c.alpha);
  c.k = doc.value("k", c.k);
  c.outlier_fraction = doc.value("outlier_fraction", c.outlier_fraction);
  c.outlier_absolute = doc.value("outlier_absolute", c.outlier_absolute);
  c.outlier_relative = doc.value("outlier_relative", c.outlier_relative);
  c.clause_threshold = doc.value("clause_threshold", c.clause_threshold);
  const std::string ex = doc.value("exemplar", std::string("median"));
  if (ex != "median" && ex != "random") throw ParseError("exemplar must be 'median' or 'random'");
  c.exemplar = ex == "median" ? ExemplarMode::MedianClosest : ExemplarMode::RandomMember;
  const std::string m = doc.value("method", std::string("kmeans"));
  if (m != "kmeans" && m != "ward") throw ParseError("method must be 'kmeans' or 'ward'");
  c.method = m == "kmeans" ? ClusterMethod::KMeans : ClusterMethod::Ward;
  for (const auto& name : doc.value("excluded", std::vector<std::string>{})) c.excluded.push_back(parse_feature_kind(name));
  c.seed = doc.value("seed", c.seed);
  c.validate();
  return c;
}

PickInput make_pick_input(const FeatureContext& context, const Query& query, const FeatureMatrix& normalized) {
  PickInput in;
  in.features = &normalized;
  in.layout = &context.layout;
  in.clause_count = query.predicate.clause_count();
  for (const auto& name : query.group_by) {
    const std::size_t c = context.schema.index_of(name);
    const int offset = context.layout.bitmap_offset(c);
    if (offset < 0 || c >= context.global.items.size() || context.global.items[c].empty()) continue;
    const auto begin = static_cast<std::size_t>(offset);
    in.group_bitmaps.push_back({begin, begin + context.global.items[c].size()});
  }
  return in;
}

OutlierSplit detect_outliers(const FeatureMatrix& features, const std::vector<std::size_t>& candidates,
                             const std::vector<BitmapRange>& group_bitmaps, std::size_t cap,
                             const PickerConfig& config) {
  OutlierSplit split;
  if (group_bitmaps.empty() || candidates.empty()) {
    split.inliers = candidates;
    return split;
  }
  std::map<std::vector<char>, std::vector<std::size_t>> buckets;
  for (auto p : candidates) {
    std::vector<char> key;
    for (const auto& r : group_bitmaps) {
      for (std::size_t i = r.begin; i < r.end; ++i) key.push_back(features.at(p, i) != 0.0);
    }
    buckets[key].push_back(p);
  }
  std::size_t largest = 0;
  for (const auto& [key, members] : buckets) largest = std::max(largest, members.size());

  std::vector<const std::vector<std::size_t>*> small;
  for (const auto& [key, members] : buckets) {
    const double size = static_cast<double>(members.size());
    if (members.size() < config.outlier_absolute && size < config.outlier_relative * static_cast<double>(largest)) {
      small.push_back(&members);
    }
  }
  std::sort(small.begin(), small.end(), [](const auto* a, const auto* b) {
    if (a->size() != b->size()) return a->size() < b->size();
    return a->front() < b->front();
  });
  std::set<std::size_t> chosen;
  for (const auto* members : small) {
    for (auto p : *members) {
      if (chosen.size() >= cap) break;
      chosen.insert(p);
    }
  }
  split.outliers.assign(chosen.begin(), chosen.end());
  for (auto p : candidates) {
    if (!chosen.count(p)) split.inliers.push_back(p);
  }
  return split;
}

std::vector<std::vector<std::size_t>> importance_group(const FeatureMatrix& features, std::size_t upper_column,
                                                       const std::vector<std::size_t>& inliers,
                                                       const FunnelModels& funnel) {
  std::vector<std::vector<std::size_t>> groups(funnel.size() + 1);
  std::vector<std::size_t> examine;
  for (auto p : inliers) {
    if (features.at(p, upper_column) > 0.0) examine.push_back(p);
  }
  for (std::size_t level = 0; level < funnel.size(); ++level) {
    std::vector<std::size_t> next;
    for (auto p : examine) {
      (funnel.models[level].predict(features.row(p)) > 0.0 ? next : groups[level]).push_back(p);
    }
    examine = std::move(next);
  }
  groups.back() = std::move(examine);
  for (auto& g : groups) std::sort(g.begin(), g.end());
  return groups;
}

Allocation allocate_samples(const std::vector<std::size_t>& group_sizes, std::size_t budget, double alpha) {
  if (!(alpha > 1.0)) throw RangeError("decay rate must exceed 1");
  const std::size_t g = group_sizes.size();
  const std::size_t population = std::accumulate(group_sizes.begin(), group_sizes.end(), std::size_t{0});
  budget = std::min(budget, population);
  Allocation a;
  a.rates.assign(g, 0.0);
  a.counts.assign(g, 0);
  if (budget == 0) return a;

  std::vector<double> weight(g, 0.0);
  std::size_t rank = 0;
  for (std::size_t i = 0; i < g; ++i) {
    if (group_sizes[i] == 0) continue;
    weight[i] = std::pow(alpha, static_cast<double>(rank++));
  }
  // Saturate the most important groups until the remaining rate fits.
  std::vector<char> capped(g, 0);
  double r = 0.0;
  for (;;) {
    double rest = static_cast<double>(budget);
    double denom = 0.0;
    for (std::size_t i = 0; i < g; ++i) {
      if (capped[i]) rest -= static_cast<double>(group_sizes[i]);
      else denom += static_cast<double>(group_sizes[i]) * weight[i];
    }
    r = denom > 0.0 ? rest / denom : 0.0;
    std::size_t top = g;
    for (std::size_t i = 0; i < g; ++i) {
      if (!capped[i] && group_sizes[i] > 0 && r * weight[i] > 1.0) top = i;
    }
    if (top == g) break;
    capped[top] = 1;
  }
  std::size_t used = 0;
  for (std::size_t i = 0; i < g; ++i) {
    if (group_sizes[i] == 0) continue;
    a.rates[i] = capped[i] ? 1.0 : r * weight[i];
    const double exact = a.rates[i] * static_cast<double>(group_sizes[i]);
    a.counts[i] = std::min(group_sizes[i], static_cast<std::size_t>(std::floor(exact + 1e-9)));
    used += a.counts[i];
  }
  while (used < budget) {
    for (std::size_t i = g; i-- > 0 && used < budget;) {
      if (a.counts[i] < group_sizes[i]) {
        ++a.counts[i];
        ++used;
      }
    }
  }
  while (used > budget) {
    for (std::size_t i = 0; i < g && used > budget; ++i) {
      if (a.counts[i] > 0) {
        --a.counts[i];
        --used;
      }
    }
  }
  return a;
}

std::vector<std::size_t> clustering_columns(const FeatureSchema& layout, const std::vector<FeatureKind>& excluded) {
  std::vector<std::size_t> cols;
  for (std::size_t i = 0; i < layout.dimension(); ++i) {
    if (std::find(excluded.begin(), excluded.end(), layout[i].kind) == excluded.end()) cols.push_back(i);
  }
  return cols;
}

std::size_t choose_exemplar(const FeatureMatrix& features, const std::vector<std::size_t>& columns,
                            const std::vector<std::size_t>& members, ExemplarMode mode, Rng& rng) {
  if (members.empty()) throw RangeError("cannot choose an exemplar of an empty cluster");
  if (mode == ExemplarMode::RandomMember) return members[uniform_index(rng, members.size())];
  const std::size_t m = members.size();
  std::vector<double> median(columns.size());
  std::vector<double> tmp(m);
  for (std::size_t c = 0; c < columns.size(); ++c) {
    for (std::size_t i = 0; i < m; ++i) tmp[i] = features.at(members[i], columns[c]);
    std::sort(tmp.begin(), tmp.end());
    median[c] = m % 2 ? tmp[m / 2] : 0.5 * (tmp[m / 2 - 1] + tmp[m / 2]);
  }
  std::size_t best = members.front();
  double best_d = -1.0;
  for (auto p : members) {
    double d = 0.0;
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const double x = features.at(p, columns[c]) - median[c];
      d += x * x;
    }
    if (best_d < 0.0 || d < best_d || (d == best_d && p < best)) {
      best_d = d;
      best = p;
    }
  }
  return best;
}

ClusterSample cluster_sample(const FeatureMatrix& features, const std::vector<std::size_t>& columns,
                             const std::vector<std::size_t>& members, std::size_t n, const PickerConfig& config,
                             Rng& rng, std::uint64_t cluster_seed) {
  if (n == 0 || n > members.size()) throw RangeError("cluster count must be in [1, group size]");
  std::vector<std::size_t> sorted = members;
  std::sort(sorted.begin(), sorted.end());

  // Columns constant over the group carry no distance information.
  std::vector<std::size_t> used;
  for (auto c : columns) {
    const double first = features.at(sorted.front(), c);
    for (auto p : sorted) {
      if (features.at(p, c) != first) {
        used.push_back(c);
        break;
      }
    }
  }

  ClusterSample out;
  std::vector<std::size_t> label(sorted.size(), 0);
  if (n == sorted.size()) {
    std::iota(label.begin(), label.end(), std::size_t{0});
  } else if (n > 1 && !used.empty()) {
    Points pts;
    pts.count = sorted.size();
    pts.dim = used.size();
    pts.values.reserve(pts.count * pts.dim);
    for (auto p : sorted) {
      for (auto c : used) pts.values.push_back(features.at(p, c));
    }
    label = config.method == ClusterMethod::KMeans ? kmeans(pts, n, derive_seed(config.seed, "cluster", cluster_seed))
                                                   : ward(pts, n);
  } else if (n > 1) {
    // Indistinguishable members: split by index into n runs.
    for (std::size_t i = 0; i < sorted.size(); ++i) label[i] = i * n / sorted.size();
  }
  out.clusters.assign(n, {});
  for (std::size_t i = 0; i < sorted.size(); ++i) out.clusters[label[i]].push_back(sorted[i]);
  std::erase_if(out.clusters, [](const auto& c) { return c.empty(); });
  std::sort(out.clusters.begin(), out.clusters.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
  for (const auto& c : out.clusters) {
    out.exemplars.push_back({choose_exemplar(features, used, c, config.exemplar, rng), static_cast<double>(c.size())});
  }
  return out;
}

PickResult pick(const PickInput& input, std::size_t n, const FunnelModels& funnel, const PickerConfig& config,
                std::uint64_t run) {
  config.validate();
  if (!input.features || !input.layout) throw RangeError("pick input lacks features");
  const FeatureMatrix& f = *input.features;
  if (n == 0) throw RangeError("budget must be at least 1");
  n = std::min(n, f.rows);
  Rng rng = make_rng(config.seed, "pick", run);

  PickResult result;
  std::vector<std::pair<WeightedPartition, std::string>> chosen;
  const auto eligible = filter_eligible(f, input.upper_column());
  result.explain.push_back("filter: " + std::to_string(eligible.size()) + " of " + std::to_string(f.rows) +
                           " partitions may match");
  if (eligible.size() <= n) {
    for (auto p : eligible) chosen.push_back({{p, 1.0}, "group_0"});
    result.explain.push_back("budget covers every eligible partition");
  } else {
    const auto cap = static_cast<std::size_t>(std::floor(config.outlier_fraction * static_cast<double>(n) + 1e-9));
    const auto split = detect_outliers(f, eligible, input.group_bitmaps, cap, config);
    for (auto p : split.outliers) chosen.push_back({{p, 1.0}, "outlier"});
    result.explain.push_back("outliers: " + std::to_string(split.outliers.size()) + " (cap " + std::to_string(cap) +
                             ")");
    const std::size_t remaining = n - split.outliers.size();

    auto groups = importance_group(f, input.upper_column(), split.inliers, funnel);
    std::vector<std::size_t> sizes;
    for (const auto& g : groups) sizes.push_back(g.size());
    const Allocation alloc = allocate_samples(sizes, remaining, config.alpha);
    for (std::size_t i = 0; i < groups.size(); ++i) {
      result.explain.push_back("group_" + std::to_string(i) + ": " + std::to_string(sizes[i]) + " partitions, " +
                               std::to_string(alloc.counts[i]) + " samples, rate " + format_number(alloc.rates[i]));
    }

    // A nonempty group left without samples joins the nearest sampled group,
    // the more important one on ties.
    std::vector<std::vector<std::size_t>> members = groups;
    for (std::size_t i = 0; i < groups.size(); ++i) {
      if (groups[i].empty() || alloc.counts[i] > 0) continue;
      std::size_t target = groups.size();
      for (std::size_t d = 1; d < groups.size() && target == groups.size(); ++d) {
        if (i + d < groups.size() && alloc.counts[i + d] > 0) target = i + d;
        else if (i >= d && alloc.counts[i - d] > 0) target = i - d;
      }
      if (target == groups.size()) continue;
      members[target].insert(members[target].end(), groups[i].begin(), groups[i].end());
      members[i].clear();
      result.explain.push_back("group_" + std::to_string(i) + " merged into group_" + std::to_string(target));
    }

    const bool random = input.clause_count > config.clause_threshold;
    result.explain.push_back(random ? "sampling: random within groups (" + std::to_string(input.clause_count) +
                                          " clauses > " + std::to_string(config.clause_threshold) + ")"
                                    : std::string("sampling: clustering (") +
                                          (config.method == ClusterMethod::KMeans ? "kmeans" : "ward") + ")");
    const auto columns = clustering_columns(*input.layout, config.excluded);
    for (std::size_t i = 0; i < members.size(); ++i) {
      if (alloc.counts[i] == 0 || members[i].empty()) continue;
      const std::string source = "group_" + std::to_string(i);
      std::sort(members[i].begin(), members[i].end());
      if (random) {
        for (const auto& w : uniform_select(members[i], alloc.counts[i], rng)) chosen.push_back({w, source});
      } else {
        const auto cs = cluster_sample(f, columns, members[i], alloc.counts[i], config, rng, i);
        for (const auto& w : cs.exemplars) chosen.push_back({w, source});
      }
    }
  }
  std::sort(chosen.begin(), chosen.end(),
            [](const auto& a, const auto& b) { return a.first.partition < b.first.partition; });
  for (auto& [w, s] : chosen) {
    result.selection.push_back(w);
    result.sources.push_back(std::move(s));
  }
  return result;
}

std::vector<FeatureKind> excluded_kinds(const ExclusionMask& mask) {
  std::vector<FeatureKind> out;
  for (std::size_t i = 0; i < mask.size() && i < kFeatureKindCount; ++i) {
    if (mask[i]) out.push_back(static_cast<FeatureKind>(i));
  }
  return out;
}

FeatureSelectionResult select_features(const std::function<double(const ExclusionMask&)>& score, std::size_t units,
                                       std::size_t restarts, std::uint64_t seed) {
  FeatureSelectionResult result;
  std::map<ExclusionMask, double> memo;
  auto eval = [&](const ExclusionMask& m) {
    auto it = memo.find(m);
    if (it != memo.end()) return it->second;
    ++result.evaluations;
    const double s = score(m);
    memo.emplace(m, s);
    return s;
  };
  auto improves = [&](const ExclusionMask& from, const ExclusionMask& to) { return eval(to) < eval(from); };

  Rng rng = make_rng(seed, "feature-selection");
  result.excluded.assign(units, 0);
  std::vector<std::size_t> order(units);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t r = 0; r < restarts; ++r) {
    shuffle(order, rng);
    ExclusionMask current(units, 0);
    for (bool changed = true; changed;) {
      changed = false;
      for (auto u : order) {
        if (current[u]) continue;
        ExclusionMask next = current;
        next[u] = 1;
        if (improves(current, next)) {
          current = std::move(next);
          changed = true;
        }
      }
    }
    result.restarts.push_back(current);
    if (improves(result.excluded, current)) result.excluded = current;
  }
  result.score = eval(result.excluded);
  return result;
}

double clustering_score(const std::vector<ScoringQuery>& queries, const FeatureSchema& layout,
                        const ExclusionMask& mask, std::size_t budget, const PickerConfig& config) {
  if (queries.empty()) return 0.0;
  const auto columns = clustering_columns(layout, excluded_kinds(mask));
  PickerConfig cfg = config;
  cfg.exemplar = ExemplarMode::MedianClosest;
  double total = 0.0;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const auto& sq = queries[q];
    const auto eligible = filter_eligible(sq.features, layout.selectivity_offset());
    if (eligible.size() <= budget || budget == 0) continue;
    Rng rng = make_rng(config.seed, "score", q);
    const auto cs = cluster_sample(sq.features, columns, eligible, budget, cfg, rng);
    total += error_metrics(merge_answers(cs.exemplars, *sq.partials), sq.truth).avg_relative_error;
  }
  return total / static_cast<double>(queries.size());
}

}  // namespace partsel
