#include "partsel/sketch.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>

namespace partsel {

json SketchParams::to_json() const {
  return json{{"buckets", buckets},
              {"akmv_k", akmv_k},
              {"hh_support", hh_support},
              {"hh_epsilon", epsilon()},
              {"exact_table_limit", exact_table_limit},
              {"hash_seed", hash_seed}};
}

SketchParams SketchParams::from_json(const json& doc) {
  SketchParams p;
  p.buckets = doc.value("buckets", p.buckets);
  p.akmv_k = doc.value("akmv_k", p.akmv_k);
  p.hh_support = doc.value("hh_support", p.hh_support);
  p.hh_epsilon = doc.value("hh_epsilon", p.hh_epsilon);
  p.exact_table_limit = doc.value("exact_table_limit", p.exact_table_limit);
  p.hash_seed = doc.value("hash_seed", p.hash_seed);
  return p;
}

double MeasureSketch::variance() const {
  if (!count) return 0.0;
  const double m = mean();
  return std::max(0.0, mean_sq() - m * m);
}

double MeasureSketch::stddev() const { return std::sqrt(variance()); }

EquiDepthHistogram EquiDepthHistogram::build(std::vector<double> values, std::size_t buckets) {
  if (buckets == 0) throw RangeError("histogram needs at least one bucket");
  EquiDepthHistogram h;
  h.total = values.size();
  h.counts.assign(buckets, 0);
  h.boundaries.assign(buckets + 1, 0.0);
  if (values.empty()) return h;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  for (std::size_t i = 0; i < buckets; ++i) {
    const std::size_t lo = i * n / buckets;
    const std::size_t hi = (i + 1) * n / buckets;
    h.counts[i] = hi - lo;
    h.boundaries[i] = values[std::min(lo, n - 1)];
  }
  h.boundaries[buckets] = values.back();
  return h;
}

namespace {

// Fraction of bucket [lo, hi] at or below v (strict selects "< v").
double bucket_fraction(double lo, double hi, double v, bool strict) {
  if (strict ? v <= lo : v < lo) return 0.0;
  if (strict ? v > hi : v >= hi) return 1.0;
  if (hi <= lo) return strict ? (v > lo ? 1.0 : 0.0) : 1.0;
  return (v - lo) / (hi - lo);
}

double histogram_cdf(const EquiDepthHistogram& h, double v, bool strict) {
  if (h.total == 0) return 0.0;
  double mass = 0.0;
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    if (!h.counts[i]) continue;
    mass += static_cast<double>(h.counts[i]) * bucket_fraction(h.boundaries[i], h.boundaries[i + 1], v, strict);
  }
  return std::clamp(mass / static_cast<double>(h.total), 0.0, 1.0);
}

}  // namespace

double EquiDepthHistogram::cdf_le(double v) const { return histogram_cdf(*this, v, false); }
double EquiDepthHistogram::cdf_lt(double v) const { return histogram_cdf(*this, v, true); }

void AkmvSketch::add(std::uint64_t hash, std::uint64_t multiplicity) {
  if (auto it = entries_.find(hash); it != entries_.end()) {
    it->second += multiplicity;
    return;
  }
  if (entries_.size() >= k_ && hash > entries_.rbegin()->first) return;
  entries_.emplace(hash, multiplicity);
  if (entries_.size() > k_) entries_.erase(std::prev(entries_.end()));
}

void AkmvSketch::merge(const AkmvSketch& other) {
  for (const auto& [h, m] : other.entries_) add(h, m);
}

double akmv_distinct_count(const AkmvSketch& sketch) {
  if (sketch.empty()) throw RangeError("distinct count of an empty sketch");
  if (sketch.size() < sketch.k()) return static_cast<double>(sketch.size());
  const long double kth = static_cast<long double>(sketch.entries().rbegin()->first);
  const long double r = kth / 18446744073709551616.0L;
  return static_cast<double>((static_cast<long double>(sketch.k()) - 1.0L) / r);
}

MultiplicityStats akmv_value_stats(const AkmvSketch& sketch) {
  if (sketch.empty()) throw RangeError("value statistics of an empty sketch");
  MultiplicityStats s;
  s.min = static_cast<double>(sketch.entries().begin()->second);
  for (const auto& [h, m] : sketch.entries()) {
    const auto v = static_cast<double>(m);
    s.sum += v;
    s.max = std::max(s.max, v);
    s.min = std::min(s.min, v);
  }
  s.avg = s.sum / static_cast<double>(sketch.size());
  return s;
}

const HeavyHitter* HeavyHitterSketch::find(std::string_view item) const {
  for (const auto& h : items) {
    if (h.item == item) return &h;
  }
  return nullptr;
}

LossyCounter::LossyCounter(double support, double epsilon) : support_(support), epsilon_(epsilon) {
  if (!(support > 0.0 && support <= 1.0)) throw RangeError("heavy-hitter support must be in (0, 1]");
  if (!(epsilon > 0.0 && epsilon <= support)) throw RangeError("lossy-counting epsilon must be in (0, support]");
  width_ = static_cast<std::uint64_t>(std::ceil(1.0 / epsilon));
}

void LossyCounter::add(std::uint64_t key) {
  ++rows_;
  auto [it, inserted] = table_.try_emplace(key, Slot{1, bucket_ - 1});
  if (!inserted) ++it->second.count;
  if (rows_ % width_ == 0) {
    prune();
    ++bucket_;
  }
}

void LossyCounter::prune() {
  for (auto it = table_.begin(); it != table_.end();) {
    if (it->second.count + it->second.max_error <= bucket_) {
      it = table_.erase(it);
    } else {
      ++it;
    }
  }
}

std::vector<LossyCounter::Entry> LossyCounter::report() const {
  std::vector<Entry> out;
  const double floor = (support_ - epsilon_) * static_cast<double>(rows_);
  for (const auto& [key, slot] : table_) {
    if (static_cast<double>(slot.count) >= floor) out.push_back({key, slot.count, slot.max_error});
  }
  return out;
}

double hashed_coordinate(std::string_view value, std::uint64_t seed) {
  return static_cast<double>(hash_bytes(value, seed) >> 11);
}

SketchBuilder::SketchBuilder(const Schema& schema, SketchParams params) : schema_(schema), params_(params) {
  if (params_.buckets == 0 || params_.akmv_k == 0) throw RangeError("sketch sizes must be positive");
  for (const auto& c : schema_.columns()) state_.emplace_back(c.kind, params_);
}

void SketchBuilder::add_row(const RowBlock& block, std::size_t row) {
  if (&block != block_) {
    block_ = &block;
    for (std::size_t c = 0; c < state_.size(); ++c) {
      if (state_[c].kind != ColumnKind::Categorical) continue;
      state_[c].code_hash.assign(block.dictionary(c).size(), 0);
      state_[c].code_known.assign(block.dictionary(c).size(), 0);
    }
  }
  for (std::size_t c = 0; c < state_.size(); ++c) {
    auto& s = state_[c];
    if (s.kind == ColumnKind::Categorical) {
      const std::uint32_t code = block.codes(c)[row];
      if (!s.code_known[code]) {
        const auto& text = block.dictionary(c)[code];
        s.code_hash[code] = hash_bytes(text, params_.hash_seed);
        s.code_known[code] = 1;
        s.names.try_emplace(s.code_hash[code], text);
      }
      const std::uint64_t h = s.code_hash[code];
      s.coordinates.push_back(static_cast<double>(h >> 11));
      s.akmv.add(h);
      s.counter.add(h);
      if (!s.exact_overflow) {
        ++s.exact[h];
        if (s.exact.size() > params_.exact_table_limit) {
          s.exact_overflow = true;
          s.exact.clear();
        }
      }
    } else {
      double v = block.number(c, row);
      if (v == 0.0) v = 0.0;
      if (rows_ == 0) {
        s.min = s.max = v;
      } else {
        s.min = std::min(s.min, v);
        s.max = std::max(s.max, v);
      }
      const long double lv = v;
      s.sum += lv;
      s.sum_sq += lv * lv;
      if (v > 0.0) {
        const double lg = std::log(v);
        if (rows_ == 0) {
          s.log_min = s.log_max = lg;
        } else {
          s.log_min = std::min(s.log_min, lg);
          s.log_max = std::max(s.log_max, lg);
        }
        s.log_sum += lg;
        s.log_sum_sq += static_cast<long double>(lg) * lg;
      } else {
        s.all_positive = false;
      }
      s.coordinates.push_back(v);
      s.akmv.add(hash_number(v, params_.hash_seed));
      s.counter.add(std::bit_cast<std::uint64_t>(v));
    }
  }
  ++rows_;
}

namespace {

double narrow(long double v, const std::string& column) {
  const auto d = static_cast<double>(v);
  if (!std::isfinite(d)) throw RangeError("numeric overflow in column '" + column + "'");
  return d;
}

}  // namespace

SketchSet SketchBuilder::finish(std::size_t partition) {
  if (rows_ == 0) throw RangeError("cannot sketch an empty partition");
  SketchSet set;
  set.partition = partition;
  set.rows = rows_;
  set.params = params_;
  for (std::size_t c = 0; c < state_.size(); ++c) {
    auto& s = state_[c];
    const std::string& name = schema_[c].name;
    ColumnSketch col;
    col.kind = s.kind;
    if (s.kind != ColumnKind::Categorical) {
      MeasureSketch m;
      m.count = rows_;
      m.min = s.min;
      m.max = s.max;
      m.sum = narrow(s.sum, name);
      m.sum_sq = narrow(s.sum_sq, name);
      m.all_positive = s.all_positive;
      if (s.all_positive) {
        m.log_min = s.log_min;
        m.log_max = s.log_max;
        m.log_sum = narrow(s.log_sum, name);
        m.log_sum_sq = narrow(s.log_sum_sq, name);
      }
      col.measures = m;
    }
    col.histogram = EquiDepthHistogram::build(std::move(s.coordinates), params_.buckets);
    col.akmv = std::move(s.akmv);

    auto& hh = col.heavy_hitters;
    hh.support = params_.hh_support;
    hh.epsilon = params_.epsilon();
    hh.rows = rows_;
    for (const auto& e : s.counter.report()) {
      std::string item = s.kind == ColumnKind::Categorical ? s.names.at(e.key)
                                                           : format_number(std::bit_cast<double>(e.key));
      hh.items.push_back({std::move(item), e.count, e.max_error});
    }
    std::sort(hh.items.begin(), hh.items.end(), [](const HeavyHitter& a, const HeavyHitter& b) {
      if (a.count != b.count) return a.count > b.count;
      return a.item < b.item;
    });
    const auto cap = static_cast<std::size_t>(std::ceil(1.0 / params_.hh_support - 1e-9));
    if (hh.items.size() > cap) hh.items.resize(cap);

    if (s.kind == ColumnKind::Categorical && !s.exact_overflow) {
      std::map<std::string, std::uint64_t> table;
      for (const auto& [h, count] : s.exact) table.emplace(s.names.at(h), count);
      col.exact_values = std::move(table);
    }
    set.columns.push_back(std::move(col));
  }
  return set;
}

SketchSet build_sketchset(const RowBlock& block, std::size_t partition, const SketchParams& params) {
  if (block.row_count() == 0) throw RangeError("cannot sketch an empty partition");
  SketchBuilder builder(block.schema(), params);
  for (std::size_t r = 0; r < block.row_count(); ++r) builder.add_row(block, r);
  return builder.finish(partition);
}

json SketchSet::to_json() const {
  json cols = json::array();
  for (const auto& c : columns) {
    json col{{"kind", to_string(c.kind)}};
    if (c.measures) {
      const auto& m = *c.measures;
      col["measures"] = {{"count", m.count},       {"min", m.min},         {"max", m.max},
                         {"sum", m.sum},           {"sum_sq", m.sum_sq},   {"all_positive", m.all_positive},
                         {"log_min", m.log_min},   {"log_max", m.log_max}, {"log_sum", m.log_sum},
                         {"log_sum_sq", m.log_sum_sq}};
    }
    col["histogram"] = {{"boundaries", c.histogram.boundaries},
                        {"counts", c.histogram.counts},
                        {"total", c.histogram.total}};
    json akmv = json::array();
    for (const auto& [h, m] : c.akmv.entries()) akmv.push_back({h, m});
    col["akmv"] = {{"k", c.akmv.k()}, {"entries", akmv}};
    json hh = json::array();
    for (const auto& h : c.heavy_hitters.items) hh.push_back({h.item, h.count, h.max_error});
    col["heavy_hitters"] = {{"support", c.heavy_hitters.support},
                            {"epsilon", c.heavy_hitters.epsilon},
                            {"rows", c.heavy_hitters.rows},
                            {"items", hh}};
    if (c.exact_values) col["exact_values"] = *c.exact_values;
    cols.push_back(std::move(col));
  }
  return json{{"partition_id", partition + 1}, {"rows", rows}, {"params", params.to_json()}, {"columns", cols}};
}

SketchSet SketchSet::from_json(const json& doc) {
  SketchSet set;
  try {
    set.partition = doc.at("partition_id").get<std::size_t>() - 1;
    set.rows = doc.at("rows").get<std::uint64_t>();
    set.params = SketchParams::from_json(doc.at("params"));
    for (const auto& col : doc.at("columns")) {
      ColumnSketch c;
      c.kind = parse_column_kind(col.at("kind").get<std::string>());
      if (col.contains("measures")) {
        const auto& j = col["measures"];
        MeasureSketch m;
        m.count = j.at("count");
        m.min = j.at("min");
        m.max = j.at("max");
        m.sum = j.at("sum");
        m.sum_sq = j.at("sum_sq");
        m.all_positive = j.at("all_positive");
        m.log_min = j.at("log_min");
        m.log_max = j.at("log_max");
        m.log_sum = j.at("log_sum");
        m.log_sum_sq = j.at("log_sum_sq");
        c.measures = m;
      }
      const auto& h = col.at("histogram");
      c.histogram.boundaries = h.at("boundaries").get<std::vector<double>>();
      c.histogram.counts = h.at("counts").get<std::vector<std::uint64_t>>();
      c.histogram.total = h.at("total");
      const auto& a = col.at("akmv");
      c.akmv = AkmvSketch(a.at("k").get<std::size_t>());
      for (const auto& e : a.at("entries")) c.akmv.add(e[0].get<std::uint64_t>(), e[1].get<std::uint64_t>());
      const auto& hh = col.at("heavy_hitters");
      c.heavy_hitters.support = hh.at("support");
      c.heavy_hitters.epsilon = hh.at("epsilon");
      c.heavy_hitters.rows = hh.at("rows");
      for (const auto& e : hh.at("items")) {
        c.heavy_hitters.items.push_back({e[0].get<std::string>(), e[1].get<std::uint64_t>(), e[2].get<std::uint64_t>()});
      }
      if (col.contains("exact_values")) c.exact_values = col["exact_values"].get<std::map<std::string, std::uint64_t>>();
      set.columns.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad sketch document: ") + e.what());
  }
  return set;
}

void save_sketchset(const SketchSet& set, const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << set.to_json().dump() << '\n';
}

SketchSet load_sketchset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("missing sketch file '" + path.string() + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError("bad sketch file '" + path.string() + "': " + e.what());
  }
  return SketchSet::from_json(doc);
}

std::vector<SketchSet> sketch_dataset(const PartitionedDataset& dataset, const SketchParams& params) {
  SketchParams p = params;
  p.hash_seed = dataset.hash_seed;
  std::vector<SketchSet> sets(dataset.partition_count());
  parallel_for(sets.size(), [&](std::size_t i) {
    sets[i] = build_sketchset(load_partition(dataset, i), i, p);
    save_sketchset(sets[i], dataset.stats_path(i));
  });
  return sets;
}

std::vector<SketchSet> load_dataset_sketches(const PartitionedDataset& dataset) {
  std::vector<SketchSet> sets(dataset.partition_count());
  parallel_for(sets.size(), [&](std::size_t i) { sets[i] = load_sketchset(dataset.stats_path(i)); });
  return sets;
}

std::vector<double> global_distinct_estimates(const std::vector<SketchSet>& sketches) {
  if (sketches.empty()) return {};
  const std::size_t cols = sketches.front().columns.size();
  std::vector<double> out(cols, 0.0);
  for (std::size_t c = 0; c < cols; ++c) {
    AkmvSketch merged(sketches.front().columns[c].akmv.k());
    for (const auto& s : sketches) merged.merge(s.columns.at(c).akmv);
    out[c] = merged.empty() ? 0.0 : akmv_distinct_count(merged);
  }
  return out;
}

}  // namespace partsel
