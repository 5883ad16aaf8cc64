#include "partsel/cluster.hpp"

#include <algorithm>
#include <limits>

namespace partsel {

double squared_distance(const double* a, const double* b, std::size_t dim) {
  double s = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

namespace {

void check_k(const Points& points, std::size_t k) {
  if (k == 0 || k > points.count) throw RangeError("cluster count must be in [1, point count]");
}

}  // namespace

std::vector<std::size_t> kmeans(const Points& points, std::size_t k, std::uint64_t seed, std::size_t max_iterations) {
  check_k(points, k);
  const std::size_t n = points.count, dim = points.dim;
  std::vector<std::size_t> label(n, 0);
  if (k == 1) return label;

  std::vector<double> centres;
  centres.reserve(k * dim);
  Rng rng = make_rng(seed, "kmeans");
  std::size_t first = uniform_index(rng, n);
  centres.insert(centres.end(), points[first], points[first] + dim);
  std::vector<double> nearest(n);
  for (std::size_t i = 0; i < n; ++i) nearest[i] = squared_distance(points[i], points[first], dim);
  // Remaining seeds: farthest point from the chosen ones.
  for (std::size_t c = 1; c < k; ++c) {
    std::size_t far = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if (nearest[i] > nearest[far]) far = i;
    }
    centres.insert(centres.end(), points[far], points[far] + dim);
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(points[i], points[far], dim));
    }
  }

  auto assign = [&] {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = squared_distance(points[i], &centres[c * dim], dim);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      nearest[i] = best_d;
      if (label[i] != best) changed = true;
      label[i] = best;
    }
    return changed;
  };

  assign();
  std::vector<std::size_t> size(k);
  for (std::size_t it = 0; it < max_iterations; ++it) {
    std::fill(centres.begin(), centres.end(), 0.0);
    std::fill(size.begin(), size.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++size[label[i]];
      double* c = &centres[label[i] * dim];
      for (std::size_t d = 0; d < dim; ++d) c[d] += points[i][d];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (size[c] == 0) continue;
      for (std::size_t d = 0; d < dim; ++d) centres[c * dim + d] /= static_cast<double>(size[c]);
    }
    // Empty clusters take the point farthest from its centre in the largest cluster.
    for (std::size_t c = 0; c < k; ++c) {
      if (size[c] != 0) continue;
      const std::size_t big = static_cast<std::size_t>(std::max_element(size.begin(), size.end()) - size.begin());
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (label[i] != big) continue;
        if (far == n || nearest[i] > nearest[far]) far = i;
      }
      if (far == n || nearest[far] == 0.0) continue;
      std::copy(points[far], points[far] + dim, &centres[c * dim]);
      label[far] = c;
      nearest[far] = 0.0;
      --size[big];
      size[c] = 1;
    }
    if (!assign() && it > 0) break;
  }
  // Coincident points can still leave a cluster empty; split off members of
  // the largest cluster so every label is used.
  std::fill(size.begin(), size.end(), 0);
  for (auto l : label) ++size[l];
  for (std::size_t c = 0; c < k; ++c) {
    if (size[c] != 0) continue;
    const std::size_t big = static_cast<std::size_t>(std::max_element(size.begin(), size.end()) - size.begin());
    std::size_t far = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (label[i] == big && (far == n || nearest[i] > nearest[far])) far = i;
    }
    label[far] = c;
    --size[big];
    size[c] = 1;
  }
  return label;
}

std::vector<std::size_t> ward(const Points& points, std::size_t k) {
  check_k(points, k);
  const std::size_t n = points.count;
  // Lance-Williams update on the matrix of Ward merge costs.
  std::vector<double> cost(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      cost[i * n + j] = cost[j * n + i] = 0.5 * squared_distance(points[i], points[j], points.dim);
    }
  }
  std::vector<double> size(n, 1.0);
  std::vector<char> alive(n, 1);
  std::vector<std::size_t> parent(n);
  for (std::size_t i = 0; i < n; ++i) parent[i] = i;

  for (std::size_t clusters = n; clusters > k; --clusters) {
    std::size_t bi = 0, bj = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (!alive[i]) continue;
      for (std::size_t j = i + 1; j < n; ++j) {
        if (alive[j] && cost[i * n + j] < best) {
          best = cost[i * n + j];
          bi = i;
          bj = j;
        }
      }
    }
    for (std::size_t m = 0; m < n; ++m) {
      if (!alive[m] || m == bi || m == bj) continue;
      const double t = size[bi] + size[bj] + size[m];
      const double v = ((size[bi] + size[m]) * cost[bi * n + m] + (size[bj] + size[m]) * cost[bj * n + m] -
                        size[m] * cost[bi * n + bj]) /
                       t;
      cost[bi * n + m] = cost[m * n + bi] = v;
    }
    size[bi] += size[bj];
    alive[bj] = 0;
    for (auto& p : parent) {
      if (p == bj) p = bi;
    }
  }

  std::vector<std::size_t> label(n);
  std::vector<std::size_t> remap(n, n);
  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (remap[parent[i]] == n) remap[parent[i]] = next++;
    label[i] = remap[parent[i]];
  }
  return label;
}

}  // namespace partsel
