#pragma once

#include <map>
#include <string>
#include <vector>

#include "partsel/query.hpp"

namespace partsel {

using GroupKey = std::vector<std::string>;

// Additive per-group state: one running sum per aggregate (SUM expression,
// row count for COUNT(*), numerator for AVG) plus the matching row count.
struct GroupPartial {
  std::vector<double> sums;
  double rows = 0.0;

  friend bool operator==(const GroupPartial&, const GroupPartial&) = default;
};

struct GroupedAnswer {
  std::vector<Aggregate::Kind> kinds;
  std::map<GroupKey, GroupPartial> groups;

  std::size_t aggregate_count() const { return kinds.size(); }
  bool empty() const { return groups.empty(); }
  // Final aggregate values per group; AVG = sum / rows.
  std::map<GroupKey, std::vector<double>> finalize() const;
  void write_csv(std::ostream& out, const std::vector<std::string>& group_columns) const;

  friend bool operator==(const GroupedAnswer&, const GroupedAnswer&) = default;
};

struct WeightedPartition {
  std::size_t partition = 0;
  double weight = 1.0;
};

using Selection = std::vector<WeightedPartition>;

// Exact answer over one block. Groups without matching rows are absent.
GroupedAnswer evaluate_exact(const Query& query, const RowBlock& block);

// Row mask of the predicate over a block.
std::vector<char> predicate_mask(const Predicate& predicate, const RowBlock& block);

// Weighted sum of partial answers, accumulated in ascending partition order.
// Throws when a selected partition has no partial answer.
GroupedAnswer merge_answers(const Selection& selection, const std::vector<GroupedAnswer>& partials);

// Every partition with weight 1.
Selection full_selection(std::size_t partition_count);

// The reference answer: merge of all partials with weight 1.
GroupedAnswer exact_answer(const std::vector<GroupedAnswer>& partials);

}  // namespace partsel
