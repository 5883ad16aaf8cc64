#include "partsel/answer.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <unordered_map>

namespace partsel {

std::map<GroupKey, std::vector<double>> GroupedAnswer::finalize() const {
  std::map<GroupKey, std::vector<double>> out;
  for (const auto& [key, g] : groups) {
    std::vector<double> values(g.sums);
    for (std::size_t j = 0; j < kinds.size(); ++j) {
      if (kinds[j] == Aggregate::Kind::Avg) values[j] = g.rows != 0.0 ? g.sums[j] / g.rows : 0.0;
    }
    out.emplace(key, std::move(values));
  }
  return out;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace

void GroupedAnswer::write_csv(std::ostream& out, const std::vector<std::string>& group_columns) const {
  bool first = true;
  for (const auto& g : group_columns) {
    out << (first ? "" : ",") << csv_field(g);
    first = false;
  }
  for (std::size_t j = 0; j < kinds.size(); ++j) {
    out << (first ? "" : ",") << "agg" << j + 1;
    first = false;
  }
  out << '\n';
  for (const auto& [key, values] : finalize()) {
    first = true;
    for (const auto& k : key) {
      out << (first ? "" : ",") << csv_field(k);
      first = false;
    }
    for (double v : values) {
      out << (first ? "" : ",") << format_number(v);
      first = false;
    }
    out << '\n';
  }
}

namespace {

void leaf_mask(const Clause& c, const RowBlock& block, std::vector<char>& mask) {
  const std::size_t col = block.schema().index_of(c.column);
  const ColumnKind kind = block.schema()[col].kind;
  const std::size_t n = block.row_count();
  mask.assign(n, 0);
  if (kind == ColumnKind::Categorical) {
    const auto& dict = block.dictionary(col);
    std::vector<char> match(dict.size(), 0);
    std::vector<std::string> values;
    for (const auto& v : c.values) values.push_back(text_literal(v));
    for (std::size_t code = 0; code < dict.size(); ++code) {
      const std::string& text = dict[code];
      bool hit = false;
      switch (c.op) {
        case CompareOp::Eq: hit = text == values.at(0); break;
        case CompareOp::Ne: hit = text != values.at(0); break;
        case CompareOp::In: hit = std::find(values.begin(), values.end(), text) != values.end(); break;
        case CompareOp::Like: hit = like_match(text, values.at(0)); break;
        default:
          throw ScopeError("operator " + std::string(to_string(c.op)) + " does not apply to categorical column '" +
                           c.column + "'");
      }
      match[code] = hit;
    }
    const auto codes = block.codes(col);
    for (std::size_t r = 0; r < n; ++r) mask[r] = match[codes[r]];
    return;
  }
  const auto xs = block.numbers(col);
  std::vector<double> values;
  for (const auto& v : c.values) values.push_back(numeric_literal(v, kind));
  const double v = values.at(0);
  switch (c.op) {
    case CompareOp::Lt: for (std::size_t r = 0; r < n; ++r) mask[r] = xs[r] < v; break;
    case CompareOp::Le: for (std::size_t r = 0; r < n; ++r) mask[r] = xs[r] <= v; break;
    case CompareOp::Gt: for (std::size_t r = 0; r < n; ++r) mask[r] = xs[r] > v; break;
    case CompareOp::Ge: for (std::size_t r = 0; r < n; ++r) mask[r] = xs[r] >= v; break;
    case CompareOp::Eq: for (std::size_t r = 0; r < n; ++r) mask[r] = xs[r] == v; break;
    case CompareOp::Ne: for (std::size_t r = 0; r < n; ++r) mask[r] = xs[r] != v; break;
    case CompareOp::In:
      for (std::size_t r = 0; r < n; ++r) mask[r] = std::find(values.begin(), values.end(), xs[r]) != values.end();
      break;
    case CompareOp::Like: throw ScopeError("LIKE does not apply to numeric column '" + c.column + "'");
  }
}

}  // namespace

std::vector<char> predicate_mask(const Predicate& p, const RowBlock& block) {
  const std::size_t n = block.row_count();
  std::vector<char> mask;
  switch (p.kind) {
    case Predicate::Kind::True: mask.assign(n, 1); break;
    case Predicate::Kind::Leaf: leaf_mask(p.clause, block, mask); break;
    case Predicate::Kind::Not:
      mask = predicate_mask(p.children.at(0), block);
      for (auto& m : mask) m = !m;
      break;
    case Predicate::Kind::And:
      mask.assign(n, 1);
      for (const auto& c : p.children) {
        const auto sub = predicate_mask(c, block);
        for (std::size_t r = 0; r < n; ++r) mask[r] = mask[r] && sub[r];
      }
      break;
    case Predicate::Kind::Or:
      mask.assign(n, 0);
      for (const auto& c : p.children) {
        const auto sub = predicate_mask(c, block);
        for (std::size_t r = 0; r < n; ++r) mask[r] = mask[r] || sub[r];
      }
      break;
  }
  return mask;
}

GroupedAnswer evaluate_exact(const Query& query, const RowBlock& block) {
  GroupedAnswer answer;
  for (const auto& a : query.aggregates) answer.kinds.push_back(a.kind);
  const Schema& schema = block.schema();
  const std::size_t n = block.row_count();
  const std::size_t d = query.aggregates.size();

  // Aggregate expressions as (column, sign) lists.
  std::vector<std::vector<std::pair<std::span<const double>, bool>>> terms(d);
  for (std::size_t j = 0; j < d; ++j) {
    for (const auto& t : query.aggregates[j].terms) {
      const std::size_t col = schema.index_of(t.column);
      if (!is_numeric(schema[col].kind)) throw ScopeError("aggregate over non-numeric column '" + t.column + "'");
      terms[j].emplace_back(block.numbers(col), t.negative);
    }
  }

  const auto mask = predicate_mask(query.predicate, block);

  // Local ids per group-by column and their rendered text.
  const std::size_t gcount = query.group_by.size();
  std::vector<std::vector<std::uint32_t>> local(gcount);
  std::vector<std::vector<std::string>> names(gcount);
  for (std::size_t k = 0; k < gcount; ++k) {
    const std::size_t col = schema.index_of(query.group_by[k]);
    local[k].resize(n);
    if (schema[col].kind == ColumnKind::Categorical) {
      const auto codes = block.codes(col);
      std::copy(codes.begin(), codes.end(), local[k].begin());
      names[k] = block.dictionary(col);
    } else {
      std::unordered_map<double, std::uint32_t> ids;
      const auto xs = block.numbers(col);
      for (std::size_t r = 0; r < n; ++r) {
        if (!mask[r]) continue;
        auto [it, inserted] = ids.try_emplace(xs[r], static_cast<std::uint32_t>(names[k].size()));
        if (inserted) names[k].push_back(block.cell_text(col, r));
        local[k][r] = it->second;
      }
    }
  }

  bool radix_fits = true;
  unsigned __int128 span = 1;
  for (std::size_t k = 0; k < gcount; ++k) {
    span *= std::max<std::size_t>(1, names[k].size());
    if (span > (static_cast<unsigned __int128>(1) << 63)) radix_fits = false;
  }

  std::vector<GroupPartial> slots;
  std::vector<std::vector<std::uint32_t>> slot_ids;
  std::unordered_map<std::uint64_t, std::size_t> by_code;
  std::map<std::vector<std::uint32_t>, std::size_t> by_tuple;
  std::vector<std::uint32_t> tuple(gcount);

  for (std::size_t r = 0; r < n; ++r) {
    if (!mask[r]) continue;
    std::size_t slot;
    if (radix_fits) {
      std::uint64_t code = 0;
      for (std::size_t k = 0; k < gcount; ++k) code = code * std::max<std::size_t>(1, names[k].size()) + local[k][r];
      auto [it, inserted] = by_code.try_emplace(code, slots.size());
      slot = it->second;
    } else {
      for (std::size_t k = 0; k < gcount; ++k) tuple[k] = local[k][r];
      auto [it, inserted] = by_tuple.try_emplace(tuple, slots.size());
      slot = it->second;
    }
    if (slot == slots.size()) {
      slots.push_back({std::vector<double>(d, 0.0), 0.0});
      std::vector<std::uint32_t> ids(gcount);
      for (std::size_t k = 0; k < gcount; ++k) ids[k] = local[k][r];
      slot_ids.push_back(std::move(ids));
    }
    GroupPartial& g = slots[slot];
    g.rows += 1.0;
    for (std::size_t j = 0; j < d; ++j) {
      if (query.aggregates[j].kind == Aggregate::Kind::CountStar) {
        g.sums[j] += 1.0;
        continue;
      }
      double v = 0.0;
      for (const auto& [xs, negative] : terms[j]) v += negative ? -xs[r] : xs[r];
      g.sums[j] += v;
    }
  }

  for (std::size_t s = 0; s < slots.size(); ++s) {
    GroupKey key(gcount);
    for (std::size_t k = 0; k < gcount; ++k) key[k] = names[k][slot_ids[s][k]];
    answer.groups.emplace(std::move(key), std::move(slots[s]));
  }
  return answer;
}

GroupedAnswer merge_answers(const Selection& selection, const std::vector<GroupedAnswer>& partials) {
  Selection order = selection;
  std::sort(order.begin(), order.end(),
            [](const WeightedPartition& a, const WeightedPartition& b) { return a.partition < b.partition; });
  GroupedAnswer out;
  if (!partials.empty()) out.kinds = partials.front().kinds;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i && order[i].partition == order[i - 1].partition) {
      throw RangeError("partition " + std::to_string(order[i].partition + 1) + " selected twice");
    }
    if (order[i].partition >= partials.size()) {
      throw RangeError("no partial answer for partition " + std::to_string(order[i].partition + 1));
    }
    const double w = order[i].weight;
    if (!std::isfinite(w) || w < 0.0) throw RangeError("selection weights must be finite and nonnegative");
    const GroupedAnswer& part = partials[order[i].partition];
    if (part.kinds != out.kinds) throw RangeError("partial answers disagree on aggregates");
    for (const auto& [key, g] : part.groups) {
      auto [it, inserted] = out.groups.try_emplace(key, GroupPartial{std::vector<double>(g.sums.size(), 0.0), 0.0});
      GroupPartial& acc = it->second;
      for (std::size_t j = 0; j < g.sums.size(); ++j) acc.sums[j] += w * g.sums[j];
      acc.rows += w * g.rows;
    }
  }
  return out;
}

Selection full_selection(std::size_t partition_count) {
  Selection s(partition_count);
  for (std::size_t i = 0; i < partition_count; ++i) s[i] = {i, 1.0};
  return s;
}

GroupedAnswer exact_answer(const std::vector<GroupedAnswer>& partials) {
  return merge_answers(full_selection(partials.size()), partials);
}

}  // namespace partsel
