#pragma once

#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "partsel/datastore.hpp"

namespace partsel {

enum class CompareOp { Lt, Le, Gt, Ge, Eq, Ne, In, Like };

std::string_view to_string(CompareOp op);

// Numbers, or text (categorical values, LIKE patterns, ISO dates).
using Literal = std::variant<double, std::string>;

struct Clause {
  std::string column;
  CompareOp op = CompareOp::Eq;
  std::vector<Literal> values;  // one value except for IN

  friend bool operator==(const Clause&, const Clause&) = default;
};

struct Predicate {
  enum class Kind { True, Leaf, And, Or, Not };

  Kind kind = Kind::True;
  Clause clause;                   // Leaf
  std::vector<Predicate> children;  // And, Or (>= 2), Not (exactly 1)

  static Predicate always() { return {}; }
  static Predicate leaf(Clause c);
  // Flatten nested nodes of the same connective; a single child is returned as is.
  static Predicate all_of(std::vector<Predicate> parts);
  static Predicate any_of(std::vector<Predicate> parts);
  static Predicate negate(Predicate p);

  bool is_true() const { return kind == Kind::True; }
  std::size_t clause_count() const;
  void collect_columns(std::set<std::string>& out) const;

  friend bool operator==(const Predicate&, const Predicate&) = default;
};

struct AggregateTerm {
  std::string column;
  bool negative = false;

  friend bool operator==(const AggregateTerm&, const AggregateTerm&) = default;
};

struct Aggregate {
  enum class Kind { Sum, CountStar, Avg };

  Kind kind = Kind::Sum;
  std::vector<AggregateTerm> terms;  // empty for COUNT(*)

  static Aggregate count_star() { return {Kind::CountStar, {}}; }
  static Aggregate sum(std::string column) { return {Kind::Sum, {{std::move(column), false}}}; }
  static Aggregate avg(std::string column) { return {Kind::Avg, {{std::move(column), false}}}; }

  std::string to_sql() const;
  friend bool operator==(const Aggregate&, const Aggregate&) = default;
};

struct Query {
  std::vector<Aggregate> aggregates;
  Predicate predicate;
  std::vector<std::string> group_by;

  std::string to_sql() const;
  std::set<std::string> referenced_columns() const;

  friend bool operator==(const Query&, const Query&) = default;
};

std::string to_sql(const Predicate& p);

// SELECT <aggs and group columns> FROM <table> [WHERE <pred>] [GROUP BY <cols>].
// Throws ParseError on bad syntax and ScopeError on constructs outside the
// supported class (MAX/MIN and other functions, nested queries, joins, ...).
Query parse_query(std::string_view text);

struct ScopeOptions {
  // Per-column global distinct estimates (indexed like the schema); empty skips the guard.
  std::vector<double> distinct_estimates;
  double group_by_cardinality_limit = 1000.0;
};

// Validates columns, kinds and operators against the schema. Throws
// SchemaError for unknown columns and ScopeError for everything else.
void check_scope(const Query& query, const Schema& schema, const ScopeOptions& options = {});

// Numeric value of a literal compared against a numeric or date column.
double numeric_literal(const Literal& value, ColumnKind kind);
std::string text_literal(const Literal& value);

// SQL LIKE with % and _ wildcards.
bool like_match(std::string_view text, std::string_view pattern);

std::vector<Query> read_workload(const std::filesystem::path& path);
void write_workload(const std::vector<Query>& queries, const std::filesystem::path& path);

}  // namespace partsel
