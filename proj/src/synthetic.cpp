#include "partsel/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace partsel {

json SyntheticSpec::to_json() const {
  return json{{"rows", rows},
              {"numeric_columns", numeric_columns},
              {"categorical_columns", categorical_columns},
              {"skew", skew},
              {"cardinalities", cardinalities},
              {"days", days},
              {"burst_probability", burst_probability},
              {"seed", seed}};
}

SyntheticSpec SyntheticSpec::from_json(const json& doc) {
  SyntheticSpec s;
  s.rows = doc.value("rows", s.rows);
  s.numeric_columns = doc.value("numeric_columns", s.numeric_columns);
  s.categorical_columns = doc.value("categorical_columns", s.categorical_columns);
  s.skew = doc.value("skew", s.skew);
  s.cardinalities = doc.value("cardinalities", s.cardinalities);
  s.days = doc.value("days", s.days);
  s.burst_probability = doc.value("burst_probability", s.burst_probability);
  s.seed = doc.value("seed", s.seed);
  if (s.cardinalities.empty() || std::find(s.cardinalities.begin(), s.cardinalities.end(), 0u) != s.cardinalities.end()) {
    throw RangeError("cardinalities must be positive");
  }
  if (s.days == 0) throw RangeError("days must be positive");
  return s;
}

Schema synthetic_schema(const SyntheticSpec& spec) {
  std::vector<ColumnSpec> cols{{"day", ColumnKind::Date}};
  for (std::size_t i = 0; i < spec.numeric_columns; ++i) cols.push_back({"m" + std::to_string(i), ColumnKind::Numeric});
  for (std::size_t i = 0; i < spec.categorical_columns; ++i) {
    cols.push_back({"c" + std::to_string(i), ColumnKind::Categorical});
  }
  return Schema(std::move(cols));
}

std::vector<double> zipf_cdf(std::size_t n, double skew) {
  std::vector<double> cdf(n);
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    total += 1.0 / std::pow(static_cast<double>(r + 1), skew);
    cdf[r] = total;
  }
  for (auto& c : cdf) c /= total;
  return cdf;
}

namespace {

double normal(Rng& rng) {
  const double u1 = 1.0 - uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t draw_rank(const std::vector<double>& cdf, Rng& rng) {
  const double u = uniform01(rng);
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

std::string label(std::size_t column, char tag, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "c%zu_%c%03zu", column, tag, index);
  return buf;
}

double cents(double v) { return std::round(v * 100.0) / 100.0; }

}  // namespace

RowBlock make_synthetic(const SyntheticSpec& spec) {
  const Schema schema = synthetic_schema(spec);
  RowBlock block(schema);
  Rng rng = make_rng(spec.seed, "synthetic");
  const std::int64_t start = *parse_iso_date("2015-01-01");
  const std::size_t ncat = spec.categorical_columns;
  const std::size_t nnum = spec.numeric_columns;
  constexpr std::size_t kBursts = 50;

  std::vector<std::size_t> card(ncat);
  std::vector<std::vector<double>> cdf(ncat);
  std::vector<std::vector<std::string>> names(ncat), burst_names(ncat);
  for (std::size_t c = 0; c < ncat; ++c) {
    card[c] = spec.cardinalities[c % spec.cardinalities.size()];
    cdf[c] = zipf_cdf(card[c], spec.skew);
    for (std::size_t v = 0; v < card[c]; ++v) names[c].push_back(label(c, 'v', v));
    for (std::size_t b = 0; b < kBursts; ++b) burst_names[c].push_back(label(c, 'b', b));
  }
  // Per-value scale of the tied measure; burst values are far larger.
  const std::size_t tied = ncat > 1 ? 1 : 0;
  auto value_scale = [&](std::size_t index, bool burst) {
    const double base = 10.0 * static_cast<double>(1 + mix64(index + (burst ? 7919 : 0)) % 20);
    return burst ? base * 20.0 : base;
  };

  std::vector<std::size_t> chosen(ncat);
  std::vector<char> is_burst(ncat);
  for (std::size_t r = 0; r < spec.rows; ++r) {
    const std::size_t day = uniform_index(rng, spec.days);
    const double t = spec.days > 1 ? static_cast<double>(day) / static_cast<double>(spec.days - 1) : 0.0;
    block.push_number(0, static_cast<double>(start + static_cast<std::int64_t>(day)));

    for (std::size_t c = 0; c < ncat; ++c) {
      const std::size_t rank = draw_rank(cdf[c], rng);
      is_burst[c] = 0;
      if (c == 0) {
        chosen[c] = rank;
        continue;
      }
      if (uniform01(rng) < spec.burst_probability) {
        is_burst[c] = 1;
        chosen[c] = std::min(kBursts - 1, static_cast<std::size_t>(t * kBursts));
        continue;
      }
      const auto shift = static_cast<std::size_t>(t * static_cast<double>(card[c]));
      chosen[c] = (rank + shift) % card[c];
    }

    for (std::size_t m = 0; m < nnum; ++m) {
      double v = 0.0;
      switch (m % 4) {
        case 0:
          v = static_cast<double>(1 + uniform_index(rng, 50));
          break;
        case 1:
          v = cents(std::exp(2.0 + 1.5 * t + 0.7 * normal(rng)) *
                    (ncat == 0 ? 1.0 : value_scale(chosen[tied], is_burst[tied]) / 100.0));
          break;
        case 2:
          v = ncat == 0 ? cents(100.0 + 10.0 * normal(rng))
                        : cents(value_scale(chosen[tied], is_burst[tied]) * (1.0 + 0.1 * normal(rng)));
          break;
        default:
          v = std::round(20.0 + 5.0 * std::sin(6.0 * std::numbers::pi * t) + 10.0 * normal(rng));
          break;
      }
      block.push_number(1 + m, v);
    }
    for (std::size_t c = 0; c < ncat; ++c) {
      block.push_text(1 + nnum + c, is_burst[c] ? burst_names[c][chosen[c]] : names[c][chosen[c]]);
    }
    block.end_row();
  }
  return block;
}

}  // namespace partsel
