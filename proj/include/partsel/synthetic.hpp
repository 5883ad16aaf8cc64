#pragma once

#include <vector>

#include "partsel/datastore.hpp"

namespace partsel {

// Zipf-skewed mixed table. Columns: `day` (date), numeric m0..m{k-1},
// categorical c0..c{j-1}. c0 is stationary; the other categorical columns
// rotate their popular values over time and emit short-lived burst values.
struct SyntheticSpec {
  std::size_t rows = 1'000'000;
  std::size_t numeric_columns = 4;
  std::size_t categorical_columns = 4;
  double skew = 1.0;
  std::vector<std::size_t> cardinalities{167, 40, 12, 6};  // cycled over the categorical columns
  std::size_t days = 2556;
  double burst_probability = 0.01;
  std::uint64_t seed = 1;

  json to_json() const;
  static SyntheticSpec from_json(const json& doc);
};

Schema synthetic_schema(const SyntheticSpec& spec);
RowBlock make_synthetic(const SyntheticSpec& spec);

// Cumulative Zipf(skew) distribution over ranks 1..n.
std::vector<double> zipf_cdf(std::size_t n, double skew);

}  // namespace partsel
