#pragma once

#include <cstddef>
#include <vector>

#include "partsel/common.hpp"

namespace partsel {

// Dense row-major point set.
struct Points {
  std::size_t count = 0;
  std::size_t dim = 0;
  std::vector<double> values;

  const double* operator[](std::size_t i) const { return values.data() + i * dim; }
};

double squared_distance(const double* a, const double* b, std::size_t dim);

// Cluster label per point, labels in [0, k). Every cluster is nonempty when
// k <= number of distinct points.
//
// Farthest-point seeding: the first centre is a seeded random point, each
// further centre the point farthest from all chosen ones (lowest index on
// ties). Lloyd iterations follow.
std::vector<std::size_t> kmeans(const Points& points, std::size_t k, std::uint64_t seed,
                                std::size_t max_iterations = 50);

// Agglomerative clustering with Ward linkage, merged down to k clusters.
std::vector<std::size_t> ward(const Points& points, std::size_t k);

}  // namespace partsel
