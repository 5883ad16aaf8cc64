#pragma once

#include <limits>
#include <vector>

#include "partsel/query.hpp"
#include "partsel/sketch.hpp"

namespace partsel {

// Union of disjoint intervals over the reals, kept sorted.
class NumericSet {
 public:
  struct Interval {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    bool lo_closed = false;
    bool hi_closed = false;
  };

  static NumericSet everything();
  static NumericSet nothing() { return {}; }
  static NumericSet from_clause(CompareOp op, const std::vector<double>& values);

  NumericSet complement() const;
  NumericSet intersect(const NumericSet& other) const;
  NumericSet unite(const NumericSet& other) const;

  bool empty() const { return intervals_.empty(); }
  bool contains(double x) const;
  // True when every point of [lo, hi] is in the set.
  bool covers(double lo, double hi) const;
  // True when some point of [lo, hi] is in the set.
  bool meets(double lo, double hi) const;
  const std::vector<Interval>& intervals() const { return intervals_; }

 private:
  static NumericSet normalized(std::vector<Interval> parts);
  std::vector<Interval> intervals_;
};

struct SelectivityFeatures {
  double upper = 1.0;
  double indep = 1.0;
  double min = 1.0;
  double max = 1.0;
};

// Estimated fraction of the partition's rows satisfying one clause
// (optionally negated). Zero only when the sketches prove no row matches.
double clause_selectivity(const SketchSet& sketches, const Schema& schema, const Clause& clause,
                          bool negated = false);

// The four predicate-level surrogates. Negations are pushed to the clauses
// first and clauses on one column under the same connective are evaluated
// jointly; AND takes min / product, OR takes capped sum / min.
SelectivityFeatures selectivity_features(const Predicate& predicate, const SketchSet& sketches,
                                         const Schema& schema);

}  // namespace partsel
