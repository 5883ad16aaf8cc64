#include "partsel/workload.hpp"

#include <cmath>

namespace partsel {

std::vector<ColumnDomain> column_domains(const Schema& schema, const std::vector<SketchSet>& sketches,
                                         const GlobalHeavyHitters& global) {
  std::vector<ColumnDomain> out;
  for (std::size_t c = 0; c < schema.size(); ++c) {
    ColumnDomain d;
    d.name = schema[c].name;
    d.kind = schema[c].kind;
    if (is_numeric(d.kind)) {
      bool first = true;
      d.integral = true;
      for (const auto& s : sketches) {
        const auto& m = s.columns.at(c).measures;
        if (!m || m->count == 0) continue;
        d.min = first ? m->min : std::min(d.min, m->min);
        d.max = first ? m->max : std::max(d.max, m->max);
        first = false;
        d.integral = d.integral && m->min == std::floor(m->min) && m->max == std::floor(m->max) &&
                     m->sum == std::floor(m->sum);
      }
      if (d.kind == ColumnKind::Date) d.integral = true;
    } else if (c < global.items.size()) {
      d.values = global.items[c];
    }
    out.push_back(std::move(d));
  }
  return out;
}

json WorkloadSpec::to_json() const {
  std::vector<std::string> aggs;
  for (const auto& a : aggregates) aggs.push_back(a.to_sql());
  return json{{"group_by_sets", group_by_sets},
              {"group_by_columns", group_by_columns},
              {"aggregates", aggs},
              {"predicate_columns", predicate_columns},
              {"clauses", {min_clauses, max_clauses}},
              {"group_by", {min_group_by, max_group_by}},
              {"aggregate_count", {min_aggregates, max_aggregates}},
              {"and_probability", and_probability},
              {"negation_probability", negation_probability},
              {"seed", seed}};
}

WorkloadSpec WorkloadSpec::from_json(const json& doc) {
  WorkloadSpec s;
  s.group_by_sets = doc.value("group_by_sets", s.group_by_sets);
  s.group_by_columns = doc.value("group_by_columns", s.group_by_columns);
  for (const auto& text : doc.value("aggregates", std::vector<std::string>{})) {
    const Query q = parse_query("SELECT " + text + " FROM t");
    if (q.aggregates.size() != 1) throw ParseError("bad aggregate '" + text + "'");
    s.aggregates.push_back(q.aggregates.front());
  }
  s.predicate_columns = doc.value("predicate_columns", s.predicate_columns);
  auto range = [&](const char* key, std::size_t& lo, std::size_t& hi) {
    if (!doc.contains(key)) return;
    const auto r = doc.at(key).get<std::vector<std::size_t>>();
    if (r.size() != 2 || r[0] > r[1]) throw ParseError(std::string("bad range '") + key + "'");
    lo = r[0];
    hi = r[1];
  };
  range("clauses", s.min_clauses, s.max_clauses);
  range("group_by", s.min_group_by, s.max_group_by);
  range("aggregate_count", s.min_aggregates, s.max_aggregates);
  s.and_probability = doc.value("and_probability", s.and_probability);
  s.negation_probability = doc.value("negation_probability", s.negation_probability);
  s.seed = doc.value("seed", s.seed);
  return s;
}

namespace {

std::size_t draw_between(Rng& rng, std::size_t lo, std::size_t hi) {
  if (hi < lo) throw RangeError("workload pool too small for the requested range");
  return lo + uniform_index(rng, hi - lo + 1);
}

const ColumnDomain& domain_of(const std::vector<ColumnDomain>& domains, const std::string& name) {
  for (const auto& d : domains) {
    if (d.name == name) return d;
  }
  throw SchemaError("unknown column '" + name + "' in workload spec");
}

Literal numeric_constant(const ColumnDomain& d, Rng& rng) {
  double v = d.min + uniform01(rng) * (d.max - d.min);
  if (d.kind == ColumnKind::Date) return format_iso_date(static_cast<std::int64_t>(std::llround(v)));
  v = d.integral ? std::round(v) : std::round(v * 100.0) / 100.0;
  return v;
}

Predicate random_clause(const ColumnDomain& d, Rng& rng) {
  Clause c;
  c.column = d.name;
  if (is_numeric(d.kind)) {
    static constexpr CompareOp kOps[] = {CompareOp::Lt, CompareOp::Le, CompareOp::Gt, CompareOp::Ge};
    c.op = kOps[uniform_index(rng, 4)];
    c.values.push_back(numeric_constant(d, rng));
    return Predicate::leaf(std::move(c));
  }
  const double u = uniform01(rng);
  if (u < 0.3 && d.values.size() >= 2) {
    c.op = CompareOp::In;
    const std::size_t k = std::min<std::size_t>(d.values.size(), 2 + uniform_index(rng, 2));
    for (auto i : sample_without_replacement(d.values.size(), k, rng)) c.values.push_back(d.values[i]);
  } else {
    c.op = u < 0.8 ? CompareOp::Eq : CompareOp::Ne;
    c.values.push_back(d.values[uniform_index(rng, d.values.size())]);
  }
  return Predicate::leaf(std::move(c));
}

}  // namespace

Query random_query(const WorkloadSpec& spec, const std::vector<ColumnDomain>& domains, Rng& rng) {
  if (spec.aggregates.empty()) throw RangeError("workload spec has no aggregate candidates");
  Query q;
  const std::size_t agg_count =
      draw_between(rng, std::max<std::size_t>(1, spec.min_aggregates), std::min(spec.max_aggregates, spec.aggregates.size()));
  for (auto i : sample_without_replacement(spec.aggregates.size(), agg_count, rng)) {
    q.aggregates.push_back(spec.aggregates[i]);
  }

  if (!spec.group_by_sets.empty()) {
    q.group_by = spec.group_by_sets[uniform_index(rng, spec.group_by_sets.size())];
  } else if (!spec.group_by_columns.empty()) {
    const std::size_t g =
        draw_between(rng, spec.min_group_by, std::min(spec.max_group_by, spec.group_by_columns.size()));
    for (auto i : sample_without_replacement(spec.group_by_columns.size(), g, rng)) {
      q.group_by.push_back(spec.group_by_columns[i]);
    }
  }

  std::vector<const ColumnDomain*> pool;
  for (const auto& name : spec.predicate_columns) {
    const ColumnDomain& d = domain_of(domains, name);
    if (is_numeric(d.kind) || !d.values.empty()) pool.push_back(&d);
  }
  const std::size_t clauses = pool.empty() ? 0 : draw_between(rng, spec.min_clauses, spec.max_clauses);
  Predicate pred = Predicate::always();
  for (std::size_t i = 0; i < clauses; ++i) {
    Predicate c = random_clause(*pool[uniform_index(rng, pool.size())], rng);
    if (uniform01(rng) < spec.negation_probability) c = Predicate::negate(std::move(c));
    if (i == 0) {
      pred = std::move(c);
    } else if (uniform01(rng) < spec.and_probability) {
      pred = Predicate::all_of({std::move(pred), std::move(c)});
    } else {
      pred = Predicate::any_of({std::move(pred), std::move(c)});
    }
  }
  q.predicate = std::move(pred);
  return q;
}

std::vector<Query> generate_workload(const WorkloadSpec& spec, const std::vector<ColumnDomain>& domains,
                                     std::size_t count, std::set<std::string>& seen, std::uint64_t stream) {
  Rng rng = make_rng(spec.seed, "workload", stream);
  std::vector<Query> out;
  const std::size_t limit = 200 * count + 1000;
  for (std::size_t attempt = 0; out.size() < count; ++attempt) {
    if (attempt >= limit) {
      throw RangeError("workload pool too small: produced " + std::to_string(out.size()) + " distinct queries of " +
                       std::to_string(count));
    }
    Query q = random_query(spec, domains, rng);
    if (seen.insert(q.to_sql()).second) out.push_back(std::move(q));
  }
  return out;
}

}  // namespace partsel
