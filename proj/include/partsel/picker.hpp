#pragma once

#include <functional>
#include <string>
#include <vector>

#include "partsel/answer.hpp"
#include "partsel/learn.hpp"

namespace partsel {

enum class ExemplarMode { MedianClosest, RandomMember };
enum class ClusterMethod { KMeans, Ward };

struct PickerConfig {
  double alpha = 2.0;
  std::size_t k = 4;
  double outlier_fraction = 0.10;
  std::size_t outlier_absolute = 10;
  double outlier_relative = 0.10;
  std::size_t clause_threshold = 10;
  ExemplarMode exemplar = ExemplarMode::MedianClosest;
  ClusterMethod method = ClusterMethod::KMeans;
  std::vector<FeatureKind> excluded;
  std::uint64_t seed = 0;

  void validate() const;
  json to_json() const;
  static PickerConfig from_json(const json& doc);
};

// Half-open slot range of one group-by column's occurrence bitmap.
struct BitmapRange {
  std::size_t begin = 0;
  std::size_t end = 0;
};

// What pick needs to know about one query besides its feature matrix.
struct PickInput {
  const FeatureMatrix* features = nullptr;  // normalized
  const FeatureSchema* layout = nullptr;
  std::vector<BitmapRange> group_bitmaps;  // group-by columns with global heavy hitters
  std::size_t clause_count = 0;

  std::size_t upper_column() const { return layout->selectivity_offset(); }
};

PickInput make_pick_input(const FeatureContext& context, const Query& query, const FeatureMatrix& normalized);

struct OutlierSplit {
  std::vector<std::size_t> outliers;
  std::vector<std::size_t> inliers;
};

// Buckets candidates by whole-bitmap equality over the group-by columns; a
// bucket is outlying when it is small both absolutely and relative to the
// largest bucket. At most `cap` outliers, smallest buckets first.
OutlierSplit detect_outliers(const FeatureMatrix& features, const std::vector<std::size_t>& candidates,
                             const std::vector<BitmapRange>& group_bitmaps, std::size_t cap,
                             const PickerConfig& config = {});

// groups[i] holds the partitions that passed exactly the first i models,
// least important first. Partitions with a zero selectivity upper bound are
// dropped.
std::vector<std::vector<std::size_t>> importance_group(const FeatureMatrix& features, std::size_t upper_column,
                                                       const std::vector<std::size_t>& inliers,
                                                       const FunnelModels& funnel);

struct Allocation {
  std::vector<double> rates;
  std::vector<std::size_t> counts;
};

// Sampling rates growing by alpha per importance rank (ranks over nonempty
// groups, least important = 0), capped at 1, summing to the budget. Counts
// are floored, then the residue goes out one at a time most important first.
Allocation allocate_samples(const std::vector<std::size_t>& group_sizes, std::size_t budget, double alpha);

struct ClusterSample {
  Selection exemplars;
  std::vector<std::vector<std::size_t>> clusters;  // members per exemplar
};

// Slots whose feature kind is not excluded.
std::vector<std::size_t> clustering_columns(const FeatureSchema& layout, const std::vector<FeatureKind>& excluded);

// Clusters the members into n clusters over the given feature columns and
// returns one exemplar per cluster weighted by cluster size.
ClusterSample cluster_sample(const FeatureMatrix& features, const std::vector<std::size_t>& columns,
                             const std::vector<std::size_t>& members, std::size_t n, const PickerConfig& config,
                             Rng& rng, std::uint64_t cluster_seed = 0);

// Member closest to the coordinate-wise median of the cluster, lowest index on
// ties, or a uniform member.
std::size_t choose_exemplar(const FeatureMatrix& features, const std::vector<std::size_t>& columns,
                            const std::vector<std::size_t>& members, ExemplarMode mode, Rng& rng);

struct PickResult {
  Selection selection;               // ascending partition index
  std::vector<std::string> sources;  // "outlier" or "group_<i>", per selection entry
  std::vector<std::string> explain;
};

PickResult pick(const PickInput& input, std::size_t n, const FunnelModels& funnel, const PickerConfig& config,
                std::uint64_t run = 0);

// Exclusion mask indexed by FeatureKind.
using ExclusionMask = std::vector<char>;

std::vector<FeatureKind> excluded_kinds(const ExclusionMask& mask);

struct FeatureSelectionResult {
  ExclusionMask excluded;
  double score = 0.0;
  std::vector<ExclusionMask> restarts;  // locally optimal set of each restart
  std::size_t evaluations = 0;
};

// Greedy exclusion search with shuffled restarts. Within a restart each unit
// is tried in turn and kept excluded when the score strictly drops; passes
// repeat until none helps. Lower scores are better.
FeatureSelectionResult select_features(const std::function<double(const ExclusionMask&)>& score,
                                       std::size_t units = kFeatureKindCount, std::size_t restarts = 10,
                                       std::uint64_t seed = 0);

struct ScoringQuery {
  FeatureMatrix features;  // normalized
  const std::vector<GroupedAnswer>* partials = nullptr;
  GroupedAnswer truth;
};

// Mean average relative error of clustering the filter-passing partitions
// into budget clusters, one clustering per query.
double clustering_score(const std::vector<ScoringQuery>& queries, const FeatureSchema& layout,
                        const ExclusionMask& mask, std::size_t budget, const PickerConfig& config);

}  // namespace partsel
