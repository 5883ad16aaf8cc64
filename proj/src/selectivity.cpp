#include "partsel/selectivity.hpp"

#include <algorithm>
#include <cmath>

namespace partsel {

namespace {

using Interval = NumericSet::Interval;

bool is_empty(const Interval& i) {
  if (i.lo > i.hi) return true;
  if (i.lo == i.hi) return !(i.lo_closed && i.hi_closed) || std::isinf(i.lo);
  return false;
}

Interval point(double v) { return {v, v, true, true}; }

}  // namespace

NumericSet NumericSet::everything() {
  NumericSet s;
  s.intervals_.push_back(Interval{});
  return s;
}

NumericSet NumericSet::normalized(std::vector<Interval> parts) {
  for (auto& p : parts) {
    if (std::isinf(p.lo)) p.lo_closed = false;
    if (std::isinf(p.hi)) p.hi_closed = false;
  }
  std::erase_if(parts, is_empty);
  std::sort(parts.begin(), parts.end(), [](const Interval& a, const Interval& b) {
    if (a.lo != b.lo) return a.lo < b.lo;
    return a.lo_closed && !b.lo_closed;
  });
  NumericSet out;
  for (const auto& p : parts) {
    if (!out.intervals_.empty()) {
      Interval& last = out.intervals_.back();
      const bool touches = p.lo < last.hi || (p.lo == last.hi && (last.hi_closed || p.lo_closed));
      if (touches) {
        if (p.hi > last.hi) {
          last.hi = p.hi;
          last.hi_closed = p.hi_closed;
        } else if (p.hi == last.hi) {
          last.hi_closed = last.hi_closed || p.hi_closed;
        }
        continue;
      }
    }
    out.intervals_.push_back(p);
  }
  return out;
}

NumericSet NumericSet::from_clause(CompareOp op, const std::vector<double>& values) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const double v = values.empty() ? 0.0 : values.front();
  switch (op) {
    case CompareOp::Lt: return normalized({{-inf, v, false, false}});
    case CompareOp::Le: return normalized({{-inf, v, false, true}});
    case CompareOp::Gt: return normalized({{v, inf, false, false}});
    case CompareOp::Ge: return normalized({{v, inf, true, false}});
    case CompareOp::Eq: return normalized({point(v)});
    case CompareOp::Ne: return normalized({point(v)}).complement();
    case CompareOp::In: {
      std::vector<Interval> parts;
      for (double x : values) parts.push_back(point(x));
      return normalized(std::move(parts));
    }
    case CompareOp::Like: break;
  }
  throw ScopeError("LIKE does not apply to numeric columns");
}

NumericSet NumericSet::complement() const {
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<Interval> gaps;
  double lo = -inf;
  bool lo_closed = false;
  for (const auto& i : intervals_) {
    gaps.push_back({lo, i.lo, lo_closed, !i.lo_closed});
    lo = i.hi;
    lo_closed = !i.hi_closed;
  }
  gaps.push_back({lo, inf, lo_closed, false});
  return normalized(std::move(gaps));
}

NumericSet NumericSet::intersect(const NumericSet& other) const {
  std::vector<Interval> parts;
  for (const auto& a : intervals_) {
    for (const auto& b : other.intervals_) {
      Interval c;
      if (a.lo > b.lo) {
        c.lo = a.lo;
        c.lo_closed = a.lo_closed;
      } else if (b.lo > a.lo) {
        c.lo = b.lo;
        c.lo_closed = b.lo_closed;
      } else {
        c.lo = a.lo;
        c.lo_closed = a.lo_closed && b.lo_closed;
      }
      if (a.hi < b.hi) {
        c.hi = a.hi;
        c.hi_closed = a.hi_closed;
      } else if (b.hi < a.hi) {
        c.hi = b.hi;
        c.hi_closed = b.hi_closed;
      } else {
        c.hi = a.hi;
        c.hi_closed = a.hi_closed && b.hi_closed;
      }
      parts.push_back(c);
    }
  }
  return normalized(std::move(parts));
}

NumericSet NumericSet::unite(const NumericSet& other) const {
  std::vector<Interval> parts = intervals_;
  parts.insert(parts.end(), other.intervals_.begin(), other.intervals_.end());
  return normalized(std::move(parts));
}

bool NumericSet::contains(double x) const {
  for (const auto& i : intervals_) {
    const bool above = x > i.lo || (x == i.lo && i.lo_closed);
    const bool below = x < i.hi || (x == i.hi && i.hi_closed);
    if (above && below) return true;
  }
  return false;
}

bool NumericSet::covers(double lo, double hi) const {
  for (const auto& i : intervals_) {
    const bool left = i.lo < lo || (i.lo == lo && i.lo_closed);
    const bool right = i.hi > hi || (i.hi == hi && i.hi_closed);
    if (left && right) return true;
  }
  return false;
}

bool NumericSet::meets(double lo, double hi) const {
  return !intersect(normalized({{lo, hi, true, true}})).empty();
}

namespace {

const ColumnSketch& column_sketch(const SketchSet& sketches, const Schema& schema, const std::string& name,
                                  std::size_t* index = nullptr) {
  const std::size_t col = schema.index_of(name);
  if (col >= sketches.columns.size()) throw SchemaError("sketch has no column '" + name + "'");
  if (index) *index = col;
  return sketches.columns[col];
}

double numeric_set_selectivity(const NumericSet& set, const ColumnSketch& col, double rows) {
  const MeasureSketch& m = *col.measures;
  if (!set.meets(m.min, m.max)) return 0.0;
  if (set.covers(m.min, m.max)) return 1.0;
  const auto& h = col.histogram;
  double mass = 0.0;
  for (const auto& i : set.intervals()) {
    const double upper = std::isinf(i.hi) ? 1.0 : (i.hi_closed ? h.cdf_le(i.hi) : h.cdf_lt(i.hi));
    const double lower = std::isinf(i.lo) ? 0.0 : (i.lo_closed ? h.cdf_lt(i.lo) : h.cdf_le(i.lo));
    mass += std::max(0.0, upper - lower);
  }
  // Some rows match and some do not, so neither 0 nor 1 is possible.
  return std::clamp(mass, 1.0 / rows, 1.0 - 1.0 / rows);
}

NumericSet clause_set(const Clause& c, ColumnKind kind, bool negated) {
  std::vector<double> values;
  for (const auto& v : c.values) values.push_back(numeric_literal(v, kind));
  NumericSet s = NumericSet::from_clause(c.op, values);
  return negated ? s.complement() : s;
}

struct CatLeaf {
  const Clause* clause;
  bool negated;
};

bool leaf_matches(const CatLeaf& leaf, const std::string& value) {
  const Clause& c = *leaf.clause;
  bool hit = false;
  switch (c.op) {
    case CompareOp::Eq: hit = value == text_literal(c.values.at(0)); break;
    case CompareOp::Ne: hit = value != text_literal(c.values.at(0)); break;
    case CompareOp::In:
      for (const auto& v : c.values) hit = hit || value == text_literal(v);
      break;
    case CompareOp::Like: hit = like_match(value, text_literal(c.values.at(0))); break;
    default:
      throw ScopeError("operator " + std::string(to_string(c.op)) + " does not apply to categorical column '" +
                       c.column + "'");
  }
  return hit != leaf.negated;
}

// Finite set of values, or the complement of one.
struct CatSet {
  std::set<std::string> values;
  bool complement = false;
};

CatSet leaf_set(const CatLeaf& leaf) {
  const Clause& c = *leaf.clause;
  CatSet s;
  for (const auto& v : c.values) s.values.insert(text_literal(v));
  if (c.op == CompareOp::Ne) s.complement = true;
  else if (c.op != CompareOp::Eq && c.op != CompareOp::In) {
    throw ScopeError("operator " + std::string(to_string(c.op)) + " does not apply to categorical column '" +
                     c.column + "'");
  }
  if (leaf.negated) s.complement = !s.complement;
  return s;
}

std::set<std::string> set_and(const std::set<std::string>& a, const std::set<std::string>& b) {
  std::set<std::string> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.end()));
  return out;
}
std::set<std::string> set_or(const std::set<std::string>& a, const std::set<std::string>& b) {
  std::set<std::string> out = a;
  out.insert(b.begin(), b.end());
  return out;
}
std::set<std::string> set_minus(const std::set<std::string>& a, const std::set<std::string>& b) {
  std::set<std::string> out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.end()));
  return out;
}

CatSet combine(const CatSet& a, const CatSet& b, bool is_and) {
  if (is_and) {
    if (!a.complement && !b.complement) return {set_and(a.values, b.values), false};
    if (!a.complement) return {set_minus(a.values, b.values), false};
    if (!b.complement) return {set_minus(b.values, a.values), false};
    return {set_or(a.values, b.values), true};
  }
  if (!a.complement && !b.complement) return {set_or(a.values, b.values), false};
  if (!a.complement) return {set_minus(b.values, a.values), true};
  if (!b.complement) return {set_minus(a.values, b.values), true};
  return {set_and(a.values, b.values), true};
}

// Row count of one value, exact when the sketches pin it down.
struct ValueCount {
  double rows;
  bool exact;
};

ValueCount value_count(const ColumnSketch& col, const std::string& value, double rows, std::uint64_t seed) {
  const auto& entries = col.akmv.entries();
  const std::uint64_t h = hash_bytes(value, seed);
  if (!entries.empty()) {
    if (auto it = entries.find(h); it != entries.end()) return {static_cast<double>(it->second), true};
    const bool complete = col.akmv.size() < col.akmv.k();
    if (complete || h < entries.rbegin()->first) return {0.0, true};
  }
  if (const HeavyHitter* hh = col.heavy_hitters.find(value)) return {static_cast<double>(hh->count), false};
  const double distinct = col.akmv.empty() ? 1.0 : akmv_distinct_count(col.akmv);
  return {rows / std::max(1.0, distinct), false};
}

double categorical_selectivity(const ColumnSketch& col, const std::vector<CatLeaf>& leaves, bool is_and,
                               double rows, std::uint64_t seed) {
  if (col.exact_values) {
    double hits = 0.0;
    for (const auto& [value, count] : *col.exact_values) {
      bool match = is_and;
      for (const auto& leaf : leaves) {
        const bool m = leaf_matches(leaf, value);
        match = is_and ? (match && m) : (match || m);
      }
      if (match) hits += static_cast<double>(count);
    }
    return std::clamp(hits / rows, 0.0, 1.0);
  }
  // Substring patterns need the stored values; without them they only bound from above.
  std::vector<CatLeaf> usable;
  for (const auto& leaf : leaves) {
    if (leaf.clause->op == CompareOp::Like) {
      if (!is_and) return 1.0;
    } else {
      usable.push_back(leaf);
    }
  }
  if (usable.empty()) return 1.0;
  CatSet set = leaf_set(usable.front());
  for (std::size_t i = 1; i < usable.size(); ++i) set = combine(set, leaf_set(usable[i]), is_and);

  double total = 0.0;
  bool exact = true;
  for (const auto& v : set.values) {
    const auto vc = value_count(col, v, rows, seed);
    total += vc.rows;
    exact = exact && vc.exact;
  }
  const bool complete = !col.akmv.empty() && col.akmv.size() < col.akmv.k();
  if (set.complement) {
    if (exact && complete) return std::clamp(1.0 - total / rows, 0.0, 1.0);
    return std::clamp(1.0 - total / rows, 1.0 / rows, 1.0);
  }
  if (exact) return std::clamp(total / rows, 0.0, 1.0);
  return std::clamp(total / rows, 1.0 / rows, 1.0);
}

// Negation-normal form: negations live on the clauses.
struct Node {
  enum class Kind { True, False, Leaf, And, Or } kind = Kind::True;
  const Clause* clause = nullptr;
  bool negated = false;
  std::vector<Node> children;
};

Node to_nnf(const Predicate& p, bool negate) {
  Node n;
  switch (p.kind) {
    case Predicate::Kind::True: n.kind = negate ? Node::Kind::False : Node::Kind::True; break;
    case Predicate::Kind::Leaf:
      n.kind = Node::Kind::Leaf;
      n.clause = &p.clause;
      n.negated = negate;
      break;
    case Predicate::Kind::Not: return to_nnf(p.children.at(0), !negate);
    case Predicate::Kind::And:
    case Predicate::Kind::Or: {
      const bool is_and = (p.kind == Predicate::Kind::And) != negate;
      n.kind = is_and ? Node::Kind::And : Node::Kind::Or;
      for (const auto& c : p.children) {
        Node child = to_nnf(c, negate);
        if (child.kind == n.kind) {
          for (auto& g : child.children) n.children.push_back(std::move(g));
        } else {
          n.children.push_back(std::move(child));
        }
      }
      break;
    }
  }
  return n;
}

struct Evaluator {
  const SketchSet& sketches;
  const Schema& schema;
  double rows;

  double joint(const std::vector<const Node*>& leaves, bool is_and) const {
    std::size_t index = 0;
    const ColumnSketch& col = column_sketch(sketches, schema, leaves.front()->clause->column, &index);
    const ColumnKind kind = schema[index].kind;
    if (kind == ColumnKind::Categorical) {
      std::vector<CatLeaf> cat;
      for (const Node* n : leaves) cat.push_back({n->clause, n->negated});
      return categorical_selectivity(col, cat, is_and, rows, sketches.params.hash_seed);
    }
    NumericSet set = clause_set(*leaves.front()->clause, kind, leaves.front()->negated);
    for (std::size_t i = 1; i < leaves.size(); ++i) {
      const NumericSet next = clause_set(*leaves[i]->clause, kind, leaves[i]->negated);
      set = is_and ? set.intersect(next) : set.unite(next);
    }
    return numeric_set_selectivity(set, col, rows);
  }

  SelectivityFeatures eval(const Node& n) const {
    switch (n.kind) {
      case Node::Kind::True: return {1.0, 1.0, 1.0, 1.0};
      case Node::Kind::False: return {0.0, 0.0, 0.0, 0.0};
      case Node::Kind::Leaf: {
        const double s = joint({&n}, true);
        return {s, s, s, s};
      }
      case Node::Kind::And:
      case Node::Kind::Or: break;
    }
    const bool is_and = n.kind == Node::Kind::And;
    std::vector<SelectivityFeatures> parts;
    std::vector<std::string> order;
    std::map<std::string, std::vector<const Node*>> by_column;
    for (const auto& c : n.children) {
      if (c.kind == Node::Kind::Leaf) {
        auto [it, inserted] = by_column.try_emplace(c.clause->column);
        if (inserted) order.push_back(c.clause->column);
        it->second.push_back(&c);
      } else {
        parts.push_back(eval(c));
      }
    }
    for (const auto& column : order) {
      const double s = joint(by_column[column], is_and);
      parts.push_back({s, s, s, s});
    }
    SelectivityFeatures f = parts.front();
    for (std::size_t i = 1; i < parts.size(); ++i) {
      const auto& p = parts[i];
      if (is_and) {
        f.upper = std::min(f.upper, p.upper);
        f.indep *= p.indep;
      } else {
        f.upper = std::min(1.0, f.upper + p.upper);
        f.indep = std::min(f.indep, p.indep);
      }
      f.min = std::min(f.min, p.min);
      f.max = std::max(f.max, p.max);
    }
    return f;
  }
};

}  // namespace

double clause_selectivity(const SketchSet& sketches, const Schema& schema, const Clause& clause, bool negated) {
  Node n;
  n.kind = Node::Kind::Leaf;
  n.clause = &clause;
  n.negated = negated;
  const Evaluator ev{sketches, schema, static_cast<double>(std::max<std::uint64_t>(1, sketches.rows))};
  return ev.eval(n).upper;
}

SelectivityFeatures selectivity_features(const Predicate& predicate, const SketchSet& sketches,
                                         const Schema& schema) {
  const Node root = to_nnf(predicate, false);
  const Evaluator ev{sketches, schema, static_cast<double>(std::max<std::uint64_t>(1, sketches.rows))};
  SelectivityFeatures f = ev.eval(root);
  f.upper = std::clamp(f.upper, 0.0, 1.0);
  f.indep = std::clamp(f.indep, 0.0, 1.0);
  f.min = std::clamp(f.min, 0.0, 1.0);
  f.max = std::clamp(f.max, 0.0, 1.0);
  return f;
}

}  // namespace partsel
