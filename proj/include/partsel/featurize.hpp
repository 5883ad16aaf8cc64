#pragma once

#include <string>
#include <vector>

#include "partsel/query.hpp"
#include "partsel/selectivity.hpp"
#include "partsel/sketch.hpp"

namespace partsel {

enum class FeatureKind {
  Mean,
  Min,
  Max,
  MeanSquare,
  StdDev,
  LogMean,
  LogMeanSquare,
  LogMin,
  LogMax,
  DistinctCount,
  DistinctAvgFreq,
  DistinctMaxFreq,
  DistinctMinFreq,
  DistinctSumFreq,
  HeavyCount,
  HeavyAvgFreq,
  HeavyMaxFreq,
  Bitmap,
  SelUpper,
  SelIndep,
  SelMin,
  SelMax,
};

inline constexpr std::size_t kFeatureKindCount = 22;

enum class FeatureCategory { Selectivity, HeavyHitter, Distinct, Measures };

std::string_view to_string(FeatureKind kind);
std::string_view to_string(FeatureCategory category);
FeatureCategory category_of(FeatureKind kind);
// Inverse of to_string; throws ParseError.
FeatureKind parse_feature_kind(std::string_view name);

inline constexpr std::size_t kBitmapBits = 25;

struct FeatureSlot {
  FeatureKind kind;
  int column = -1;  // -1 for the query-level selectivity features
  int bit = -1;     // bitmap position
  std::string name;
};

// Ordered feature layout derived from the table schema alone.
class FeatureSchema {
 public:
  FeatureSchema() = default;
  explicit FeatureSchema(const Schema& schema);

  std::size_t dimension() const { return slots_.size(); }
  const std::vector<FeatureSlot>& slots() const { return slots_; }
  const FeatureSlot& operator[](std::size_t i) const { return slots_[i]; }
  // First slot of the bitmap block of a categorical column, or -1.
  int bitmap_offset(std::size_t column) const { return bitmap_offset_.at(column); }
  std::size_t selectivity_offset() const { return selectivity_offset_; }

 private:
  std::vector<FeatureSlot> slots_;
  std::vector<int> bitmap_offset_;
  std::size_t selectivity_offset_ = 0;
};

// Per column, up to 25 items ranked by summed per-partition counts.
struct GlobalHeavyHitters {
  std::vector<std::vector<std::string>> items;

  json to_json() const;
  static GlobalHeavyHitters from_json(const json& doc);
};

GlobalHeavyHitters build_global_hh(const std::vector<SketchSet>& sketches, std::size_t cap = kBitmapBits);

std::vector<char> occurrence_bitmap(const GlobalHeavyHitters& global, const HeavyHitterSketch& partition,
                                    std::size_t column);

// Query-independent feature values of one partition (selectivity slots left 0,
// bitmap bits always filled).
std::vector<double> partition_features(const FeatureSchema& layout, const SketchSet& sketches,
                                       const GlobalHeavyHitters& global);

// Masks the precomputed partition features for a query and fills selectivity.
std::vector<double> assemble(const FeatureSchema& layout, const Schema& schema, const Query& query,
                             const SketchSet& sketches, const std::vector<double>& base);
std::vector<double> assemble(const FeatureSchema& layout, const Schema& schema, const Query& query,
                             const SketchSet& sketches, const GlobalHeavyHitters& global);

// Row-major partitions x features matrix for one query.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
};

// Everything needed to featurize queries against one dataset.
struct FeatureContext {
  Schema schema;
  FeatureSchema layout;
  GlobalHeavyHitters global;
  std::vector<SketchSet> sketches;
  std::vector<std::vector<double>> base;  // per partition

  FeatureContext() = default;
  FeatureContext(Schema schema, std::vector<SketchSet> sketches);

  std::size_t partition_count() const { return sketches.size(); }
  FeatureMatrix featurize(const Query& query) const;
};

class Normalizer {
 public:
  Normalizer() = default;

  // Fit on stacked training matrices.
  static Normalizer fit(const FeatureSchema& layout, const std::vector<const FeatureMatrix*>& train);

  double transform(std::size_t feature, double value) const;
  void apply(std::vector<double>& values) const;
  FeatureMatrix apply(const FeatureMatrix& m) const;
  const std::vector<double>& divisors() const { return divisors_; }

  json to_json() const;
  static Normalizer from_json(const json& doc);

 private:
  std::vector<char> cube_root_;  // selectivity features
  std::vector<double> divisors_;
};

// sign(x) * log1p(|x|) for statistics, cube root for selectivity.
double raw_transform(FeatureKind kind, double value);

}  // namespace partsel
