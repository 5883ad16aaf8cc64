#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "partsel/datastore.hpp"

namespace partsel {

struct SketchParams {
  std::size_t buckets = 10;
  std::size_t akmv_k = 128;
  double hh_support = 0.01;
  // Lossy-counting error; 0 means hh_support / 10.
  double hh_epsilon = 0.0;
  // Categorical columns with at most this many distinct values keep exact counts.
  std::size_t exact_table_limit = 100;
  std::uint64_t hash_seed = kDefaultHashSeed;

  double epsilon() const { return hh_epsilon > 0.0 ? hh_epsilon : hh_support / 10.0; }
  json to_json() const;
  static SketchParams from_json(const json& doc);
};

struct MeasureSketch {
  std::uint64_t count = 0;
  double min = 0.0;
  double max = 0.0;
  double sum = 0.0;
  double sum_sq = 0.0;
  bool all_positive = true;
  // Over log(x); meaningful only when all_positive.
  double log_min = 0.0;
  double log_max = 0.0;
  double log_sum = 0.0;
  double log_sum_sq = 0.0;

  double mean() const { return count ? sum / static_cast<double>(count) : 0.0; }
  double mean_sq() const { return count ? sum_sq / static_cast<double>(count) : 0.0; }
  double variance() const;
  double stddev() const;
  double log_mean() const { return count && all_positive ? log_sum / static_cast<double>(count) : 0.0; }
  double log_mean_sq() const { return count && all_positive ? log_sum_sq / static_cast<double>(count) : 0.0; }
};

// Equal-depth histogram over positions of the sorted column. Bucket i holds
// sorted positions [floor(i*n/B), floor((i+1)*n/B)); its lower boundary is the
// value at the first position and the last boundary is the column maximum.
struct EquiDepthHistogram {
  std::vector<double> boundaries;  // B + 1 values
  std::vector<std::uint64_t> counts;
  std::uint64_t total = 0;

  static EquiDepthHistogram build(std::vector<double> values, std::size_t buckets);

  std::size_t bucket_count() const { return counts.size(); }
  // Estimated fraction of rows with value <= v (resp. < v). Linear
  // interpolation inside buckets; a zero-width bucket is a point mass.
  double cdf_le(double v) const;
  double cdf_lt(double v) const;
};

class AkmvSketch {
 public:
  explicit AkmvSketch(std::size_t k = 128) : k_(k) {}

  void add(std::uint64_t hash, std::uint64_t multiplicity = 1);
  // Union of hash sets keeping the k smallest.
  void merge(const AkmvSketch& other);

  std::size_t k() const { return k_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::map<std::uint64_t, std::uint64_t>& entries() const { return entries_; }

 private:
  std::size_t k_;
  std::map<std::uint64_t, std::uint64_t> entries_;
};

struct MultiplicityStats {
  double avg = 0.0;
  double max = 0.0;
  double min = 0.0;
  double sum = 0.0;
};

// Exact stored count below k, otherwise (k - 1) / r with r the k-th smallest
// hash scaled to [0, 1]. Throws on an empty sketch.
double akmv_distinct_count(const AkmvSketch& sketch);
MultiplicityStats akmv_value_stats(const AkmvSketch& sketch);

struct HeavyHitter {
  std::string item;
  std::uint64_t count = 0;      // lower bound of the true count
  std::uint64_t max_error = 0;  // true count <= count + max_error
};

struct HeavyHitterSketch {
  double support = 0.01;
  double epsilon = 0.001;
  std::uint64_t rows = 0;
  std::vector<HeavyHitter> items;  // count desc, item asc

  const HeavyHitter* find(std::string_view item) const;
};

// Lossy counting over 64-bit item keys (Manku & Motwani).
class LossyCounter {
 public:
  LossyCounter(double support, double epsilon);

  void add(std::uint64_t key);
  std::uint64_t rows() const { return rows_; }

  struct Entry {
    std::uint64_t key;
    std::uint64_t count;
    std::uint64_t max_error;
  };
  // Entries whose count reaches (support - epsilon) * rows.
  std::vector<Entry> report() const;

 private:
  void prune();

  double support_;
  double epsilon_;
  std::uint64_t width_;
  std::uint64_t rows_ = 0;
  std::uint64_t bucket_ = 1;
  struct Slot {
    std::uint64_t count;
    std::uint64_t max_error;
  };
  std::unordered_map<std::uint64_t, Slot> table_;
};

struct ColumnSketch {
  ColumnKind kind = ColumnKind::Numeric;
  std::optional<MeasureSketch> measures;  // numeric and date columns
  EquiDepthHistogram histogram;           // hashed values for categorical columns
  AkmvSketch akmv;
  HeavyHitterSketch heavy_hitters;
  std::optional<std::map<std::string, std::uint64_t>> exact_values;  // low-distinct categorical
};

struct SketchSet {
  std::size_t partition = 0;
  std::uint64_t rows = 0;
  SketchParams params;
  std::vector<ColumnSketch> columns;

  json to_json() const;
  static SketchSet from_json(const json& doc);
};

// Histogram coordinate of a categorical value.
double hashed_coordinate(std::string_view value, std::uint64_t seed);

// Incremental one-pass builder; add_row() must be called once per row.
class SketchBuilder {
 public:
  SketchBuilder(const Schema& schema, SketchParams params);

  void add_row(const RowBlock& block, std::size_t row);
  std::uint64_t rows_seen() const { return rows_; }
  SketchSet finish(std::size_t partition);

 private:
  struct ColumnState {
    ColumnKind kind = ColumnKind::Numeric;
    long double sum = 0, sum_sq = 0, log_sum = 0, log_sum_sq = 0;
    double min = 0, max = 0, log_min = 0, log_max = 0;
    bool all_positive = true;
    std::vector<double> coordinates;
    AkmvSketch akmv;
    LossyCounter counter;
    // Categorical only: per-code hash cache for the current block, hash -> text,
    // and exact counts until the distinct limit is exceeded.
    std::vector<std::uint64_t> code_hash;
    std::vector<char> code_known;
    std::unordered_map<std::uint64_t, std::string> names;
    std::unordered_map<std::uint64_t, std::uint64_t> exact;
    bool exact_overflow = false;

    ColumnState(ColumnKind k, const SketchParams& p)
        : kind(k), akmv(p.akmv_k), counter(p.hh_support, p.epsilon()) {}
  };

  Schema schema_;
  SketchParams params_;
  std::uint64_t rows_ = 0;
  const RowBlock* block_ = nullptr;
  std::vector<ColumnState> state_;
};

SketchSet build_sketchset(const RowBlock& block, std::size_t partition, const SketchParams& params = {});

void save_sketchset(const SketchSet& set, const std::filesystem::path& path);
SketchSet load_sketchset(const std::filesystem::path& path);

// Sketches every partition of a dataset and writes stats/<id>.json.
std::vector<SketchSet> sketch_dataset(const PartitionedDataset& dataset, const SketchParams& params);
std::vector<SketchSet> load_dataset_sketches(const PartitionedDataset& dataset);

// Per column, the distinct estimate of the union of all partition AKMV sketches.
std::vector<double> global_distinct_estimates(const std::vector<SketchSet>& sketches);

}  // namespace partsel
