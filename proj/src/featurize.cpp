#include "partsel/featurize.hpp"

#include <algorithm>
#include <cmath>

namespace partsel {

std::string_view to_string(FeatureKind kind) {
  static constexpr std::string_view kNames[] = {
      "mean",        "min",         "max",         "mean_sq",     "std",          "log_mean",
      "log_mean_sq", "log_min",     "log_max",     "dv_count",    "dv_avg_freq",  "dv_max_freq",
      "dv_min_freq", "dv_sum_freq", "hh_count",    "hh_avg_freq", "hh_max_freq",  "hh_bitmap",
      "sel_upper",   "sel_indep",   "sel_min",     "sel_max"};
  return kNames[static_cast<std::size_t>(kind)];
}

FeatureKind parse_feature_kind(std::string_view name) {
  for (std::size_t i = 0; i < kFeatureKindCount; ++i) {
    const auto k = static_cast<FeatureKind>(i);
    if (to_string(k) == name) return k;
  }
  throw ParseError("unknown feature kind '" + std::string(name) + "'");
}

std::string_view to_string(FeatureCategory category) {
  switch (category) {
    case FeatureCategory::Selectivity: return "selectivity";
    case FeatureCategory::HeavyHitter: return "heavy_hitter";
    case FeatureCategory::Distinct: return "distinct";
    case FeatureCategory::Measures: return "measures";
  }
  return "measures";
}

FeatureCategory category_of(FeatureKind kind) {
  const auto k = static_cast<int>(kind);
  if (k <= static_cast<int>(FeatureKind::LogMax)) return FeatureCategory::Measures;
  if (k <= static_cast<int>(FeatureKind::DistinctSumFreq)) return FeatureCategory::Distinct;
  if (k <= static_cast<int>(FeatureKind::Bitmap)) return FeatureCategory::HeavyHitter;
  return FeatureCategory::Selectivity;
}

FeatureSchema::FeatureSchema(const Schema& schema) {
  bitmap_offset_.assign(schema.size(), -1);
  auto add = [&](FeatureKind kind, int column, int bit) {
    std::string name = column >= 0 ? schema[static_cast<std::size_t>(column)].name + "." : "";
    name += to_string(kind);
    if (bit >= 0) name += "." + std::to_string(bit);
    slots_.push_back({kind, column, bit, std::move(name)});
  };
  for (std::size_t c = 0; c < schema.size(); ++c) {
    const int col = static_cast<int>(c);
    if (is_numeric(schema[c].kind)) {
      for (int k = static_cast<int>(FeatureKind::Mean); k <= static_cast<int>(FeatureKind::LogMax); ++k) {
        add(static_cast<FeatureKind>(k), col, -1);
      }
    }
    for (int k = static_cast<int>(FeatureKind::DistinctCount); k <= static_cast<int>(FeatureKind::HeavyMaxFreq);
         ++k) {
      add(static_cast<FeatureKind>(k), col, -1);
    }
    if (schema[c].kind == ColumnKind::Categorical) {
      bitmap_offset_[c] = static_cast<int>(slots_.size());
      for (std::size_t b = 0; b < kBitmapBits; ++b) add(FeatureKind::Bitmap, col, static_cast<int>(b));
    }
  }
  selectivity_offset_ = slots_.size();
  for (auto k : {FeatureKind::SelUpper, FeatureKind::SelIndep, FeatureKind::SelMin, FeatureKind::SelMax}) {
    add(k, -1, -1);
  }
}

json GlobalHeavyHitters::to_json() const { return json(items); }

GlobalHeavyHitters GlobalHeavyHitters::from_json(const json& doc) {
  GlobalHeavyHitters g;
  g.items = doc.get<std::vector<std::vector<std::string>>>();
  return g;
}

GlobalHeavyHitters build_global_hh(const std::vector<SketchSet>& sketches, std::size_t cap) {
  GlobalHeavyHitters g;
  if (sketches.empty()) return g;
  const std::size_t columns = sketches.front().columns.size();
  g.items.resize(columns);
  for (std::size_t c = 0; c < columns; ++c) {
    std::map<std::string, std::uint64_t> totals;
    for (const auto& s : sketches) {
      for (const auto& h : s.columns.at(c).heavy_hitters.items) totals[h.item] += h.count;
    }
    std::vector<std::pair<std::string, std::uint64_t>> ranked(totals.begin(), totals.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    for (std::size_t i = 0; i < ranked.size() && i < cap; ++i) g.items[c].push_back(ranked[i].first);
  }
  return g;
}

std::vector<char> occurrence_bitmap(const GlobalHeavyHitters& global, const HeavyHitterSketch& partition,
                                    std::size_t column) {
  const auto& items = global.items.at(column);
  std::vector<char> bits(items.size(), 0);
  for (std::size_t i = 0; i < items.size(); ++i) bits[i] = partition.find(items[i]) != nullptr;
  return bits;
}

std::vector<double> partition_features(const FeatureSchema& layout, const SketchSet& sketches,
                                       const GlobalHeavyHitters& global) {
  std::vector<double> f(layout.dimension(), 0.0);
  const double rows = static_cast<double>(std::max<std::uint64_t>(1, sketches.rows));
  for (std::size_t i = 0; i < layout.dimension(); ++i) {
    const FeatureSlot& slot = layout[i];
    if (slot.column < 0) continue;
    const ColumnSketch& col = sketches.columns.at(static_cast<std::size_t>(slot.column));
    const MeasureSketch* m = col.measures ? &*col.measures : nullptr;
    const bool logs = m && m->all_positive;
    double v = 0.0;
    switch (slot.kind) {
      case FeatureKind::Mean: v = m ? m->mean() : 0.0; break;
      case FeatureKind::Min: v = m ? m->min : 0.0; break;
      case FeatureKind::Max: v = m ? m->max : 0.0; break;
      case FeatureKind::MeanSquare: v = m ? m->mean_sq() : 0.0; break;
      case FeatureKind::StdDev: v = m ? m->stddev() : 0.0; break;
      case FeatureKind::LogMean: v = logs ? m->log_mean() : 0.0; break;
      case FeatureKind::LogMeanSquare: v = logs ? m->log_mean_sq() : 0.0; break;
      case FeatureKind::LogMin: v = logs ? m->log_min : 0.0; break;
      case FeatureKind::LogMax: v = logs ? m->log_max : 0.0; break;
      case FeatureKind::DistinctCount: v = col.akmv.empty() ? 0.0 : akmv_distinct_count(col.akmv); break;
      case FeatureKind::DistinctAvgFreq: v = col.akmv.empty() ? 0.0 : akmv_value_stats(col.akmv).avg; break;
      case FeatureKind::DistinctMaxFreq: v = col.akmv.empty() ? 0.0 : akmv_value_stats(col.akmv).max; break;
      case FeatureKind::DistinctMinFreq: v = col.akmv.empty() ? 0.0 : akmv_value_stats(col.akmv).min; break;
      case FeatureKind::DistinctSumFreq: v = col.akmv.empty() ? 0.0 : akmv_value_stats(col.akmv).sum; break;
      case FeatureKind::HeavyCount: v = static_cast<double>(col.heavy_hitters.items.size()); break;
      case FeatureKind::HeavyAvgFreq: {
        const auto& items = col.heavy_hitters.items;
        double sum = 0.0;
        for (const auto& h : items) sum += static_cast<double>(h.count);
        v = items.empty() ? 0.0 : sum / static_cast<double>(items.size()) / rows;
        break;
      }
      case FeatureKind::HeavyMaxFreq: {
        const auto& items = col.heavy_hitters.items;
        v = items.empty() ? 0.0 : static_cast<double>(items.front().count) / rows;
        break;
      }
      case FeatureKind::Bitmap: {
        const auto& items = global.items.at(static_cast<std::size_t>(slot.column));
        const auto bit = static_cast<std::size_t>(slot.bit);
        v = bit < items.size() && col.heavy_hitters.find(items[bit]) ? 1.0 : 0.0;
        break;
      }
      default: break;
    }
    f[i] = v;
  }
  return f;
}

std::vector<double> assemble(const FeatureSchema& layout, const Schema& schema, const Query& query,
                             const SketchSet& sketches, const std::vector<double>& base) {
  std::vector<char> used(schema.size(), 0), grouped(schema.size(), 0);
  for (const auto& name : query.referenced_columns()) used[schema.index_of(name)] = 1;
  for (const auto& name : query.group_by) grouped[schema.index_of(name)] = 1;
  std::vector<double> f(layout.dimension(), 0.0);
  for (std::size_t i = 0; i < layout.dimension(); ++i) {
    const FeatureSlot& slot = layout[i];
    if (slot.column < 0) continue;
    const auto col = static_cast<std::size_t>(slot.column);
    const bool keep = slot.kind == FeatureKind::Bitmap ? grouped[col] : used[col];
    if (keep) f[i] = base[i];
  }
  const SelectivityFeatures s = selectivity_features(query.predicate, sketches, schema);
  const std::size_t off = layout.selectivity_offset();
  f[off] = s.upper;
  f[off + 1] = s.indep;
  f[off + 2] = s.min;
  f[off + 3] = s.max;
  return f;
}

std::vector<double> assemble(const FeatureSchema& layout, const Schema& schema, const Query& query,
                             const SketchSet& sketches, const GlobalHeavyHitters& global) {
  return assemble(layout, schema, query, sketches, partition_features(layout, sketches, global));
}

FeatureContext::FeatureContext(Schema s, std::vector<SketchSet> sets)
    : schema(std::move(s)), layout(schema), global(build_global_hh(sets)), sketches(std::move(sets)) {
  base.resize(sketches.size());
  for (std::size_t p = 0; p < sketches.size(); ++p) base[p] = partition_features(layout, sketches[p], global);
}

FeatureMatrix FeatureContext::featurize(const Query& query) const {
  FeatureMatrix m;
  m.rows = sketches.size();
  m.cols = layout.dimension();
  m.values.resize(m.rows * m.cols);
  for (std::size_t p = 0; p < m.rows; ++p) {
    const auto f = assemble(layout, schema, query, sketches[p], base[p]);
    std::copy(f.begin(), f.end(), m.values.begin() + static_cast<std::ptrdiff_t>(p * m.cols));
  }
  return m;
}

double raw_transform(FeatureKind kind, double value) {
  if (category_of(kind) == FeatureCategory::Selectivity) return std::cbrt(value);
  return std::copysign(std::log1p(std::fabs(value)), value);
}

Normalizer Normalizer::fit(const FeatureSchema& layout, const std::vector<const FeatureMatrix*>& train) {
  Normalizer n;
  const std::size_t dim = layout.dimension();
  n.cube_root_.resize(dim);
  for (std::size_t i = 0; i < dim; ++i) n.cube_root_[i] = category_of(layout[i].kind) == FeatureCategory::Selectivity;
  std::vector<double> sum(dim, 0.0);
  std::size_t rows = 0;
  for (const FeatureMatrix* m : train) {
    if (m->cols != dim) throw RangeError("feature matrix does not match the feature layout");
    for (std::size_t r = 0; r < m->rows; ++r) {
      for (std::size_t i = 0; i < dim; ++i) sum[i] += std::fabs(raw_transform(layout[i].kind, m->at(r, i)));
    }
    rows += m->rows;
  }
  if (rows == 0) throw RangeError("cannot fit a normalizer on an empty training set");
  n.divisors_.resize(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    const double mean = sum[i] / static_cast<double>(rows);
    n.divisors_[i] = mean > 0.0 ? mean : 1.0;
  }
  return n;
}

double Normalizer::transform(std::size_t feature, double value) const {
  const double t = cube_root_[feature] ? std::cbrt(value) : std::copysign(std::log1p(std::fabs(value)), value);
  return t / divisors_[feature];
}

void Normalizer::apply(std::vector<double>& values) const {
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = transform(i, values[i]);
}

FeatureMatrix Normalizer::apply(const FeatureMatrix& m) const {
  FeatureMatrix out = m;
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t i = 0; i < m.cols; ++i) out.at(r, i) = transform(i, m.at(r, i));
  }
  return out;
}

json Normalizer::to_json() const {
  std::vector<int> cube(cube_root_.begin(), cube_root_.end());
  return json{{"cube_root", cube}, {"divisors", divisors_}};
}

Normalizer Normalizer::from_json(const json& doc) {
  Normalizer n;
  const auto cube = doc.at("cube_root").get<std::vector<int>>();
  n.cube_root_.assign(cube.begin(), cube.end());
  n.divisors_ = doc.at("divisors").get<std::vector<double>>();
  if (n.cube_root_.size() != n.divisors_.size()) throw ParseError("normalizer arrays differ in length");
  return n;
}

}  // namespace partsel
