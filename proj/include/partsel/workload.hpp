#pragma once

#include <set>
#include <string>
#include <vector>

#include "partsel/featurize.hpp"
#include "partsel/query.hpp"

namespace partsel {

// Constants for generated clauses: numeric columns draw from [min, max],
// categorical columns from their global heavy hitters.
struct ColumnDomain {
  std::string name;
  ColumnKind kind = ColumnKind::Numeric;
  double min = 0.0;
  double max = 0.0;
  bool integral = false;
  std::vector<std::string> values;
};

std::vector<ColumnDomain> column_domains(const Schema& schema, const std::vector<SketchSet>& sketches,
                                         const GlobalHeavyHitters& global);

struct WorkloadSpec {
  // Explicit group-by column sets; when empty, columns are drawn from group_by_columns.
  std::vector<std::vector<std::string>> group_by_sets;
  std::vector<std::string> group_by_columns;
  std::vector<Aggregate> aggregates;
  std::vector<std::string> predicate_columns;
  std::size_t min_clauses = 0;
  std::size_t max_clauses = 5;
  std::size_t min_group_by = 0;
  std::size_t max_group_by = 8;
  std::size_t min_aggregates = 1;
  std::size_t max_aggregates = 3;
  double and_probability = 0.7;
  double negation_probability = 0.1;
  std::uint64_t seed = 1;

  json to_json() const;
  static WorkloadSpec from_json(const json& doc);
};

// Draws `count` distinct queries. Queries whose canonical text is already in
// `seen` are rejected and redrawn; accepted ones are added to it.
std::vector<Query> generate_workload(const WorkloadSpec& spec, const std::vector<ColumnDomain>& domains,
                                     std::size_t count, std::set<std::string>& seen, std::uint64_t stream = 0);

// Draws a single query (no duplicate control).
Query random_query(const WorkloadSpec& spec, const std::vector<ColumnDomain>& domains, Rng& rng);

}  // namespace partsel
