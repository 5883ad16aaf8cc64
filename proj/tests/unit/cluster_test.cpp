#include <gtest/gtest.h>

#include <set>

#include "partsel/cluster.hpp"

using namespace partsel;

namespace {

// Blobs of the given sizes around (10*b, -10*b) with small jitter.
Points blobs(const std::vector<std::size_t>& sizes, Rng& rng) {
  Points p;
  p.dim = 2;
  for (std::size_t b = 0; b < sizes.size(); ++b) {
    for (std::size_t i = 0; i < sizes[b]; ++i) {
      p.values.push_back(10.0 * static_cast<double>(b) + uniform01(rng) * 0.5);
      p.values.push_back(-10.0 * static_cast<double>(b) + uniform01(rng) * 0.5);
      ++p.count;
    }
  }
  return p;
}

// Same partition of points up to label renaming.
bool same_partition(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a.size(); ++j) {
      if ((a[i] == a[j]) != (b[i] == b[j])) return false;
    }
  }
  return true;
}

std::vector<std::size_t> blob_truth(const std::vector<std::size_t>& sizes) {
  std::vector<std::size_t> t;
  for (std::size_t b = 0; b < sizes.size(); ++b) t.insert(t.end(), sizes[b], b);
  return t;
}

}  // namespace

TEST(KMeans, RecoversSeparatedBlobs) {
  Rng rng(1);
  const std::vector<std::size_t> sizes{12, 5, 30, 1};
  auto pts = blobs(sizes, rng);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    EXPECT_TRUE(same_partition(kmeans(pts, 4, seed), blob_truth(sizes))) << seed;
  }
}

TEST(KMeans, DeterministicForSeed) {
  Rng rng(2);
  Points p{200, 3, std::vector<double>(600)};
  for (auto& v : p.values) v = uniform01(rng);
  EXPECT_EQ(kmeans(p, 7, 42), kmeans(p, 7, 42));
}

TEST(KMeans, EveryLabelUsed) {
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 2 + uniform_index(rng, 60);
    const std::size_t k = 1 + uniform_index(rng, n);
    Points p{n, 2, std::vector<double>(2 * n)};
    // Coarse grid: duplicates are common but there are at least k distinct points.
    for (std::size_t i = 0; i < n; ++i) {
      p.values[2 * i] = static_cast<double>(i < k ? i : uniform_index(rng, k));
      p.values[2 * i + 1] = 0.0;
    }
    auto label = kmeans(p, k, static_cast<std::uint64_t>(t));
    std::set<std::size_t> used(label.begin(), label.end());
    EXPECT_EQ(used.size(), k);
    EXPECT_LT(*used.rbegin(), k);
  }
}

TEST(KMeans, RejectsBadK) {
  Points p{3, 1, {1, 2, 3}};
  EXPECT_THROW(kmeans(p, 0, 1), RangeError);
  EXPECT_THROW(kmeans(p, 4, 1), RangeError);
}

TEST(Ward, RecoversSeparatedBlobs) {
  Rng rng(4);
  const std::vector<std::size_t> sizes{6, 9, 2};
  auto pts = blobs(sizes, rng);
  EXPECT_TRUE(same_partition(ward(pts, 3), blob_truth(sizes)));
}

TEST(Ward, MergesCheapestPairFirst) {
  // On a line 0, 1, 10, 30 the first merge is {0, 1}, then {0, 1, 10}.
  Points p{4, 1, {0, 1, 10, 30}};
  EXPECT_TRUE(same_partition(ward(p, 3), {0, 0, 1, 2}));
  EXPECT_TRUE(same_partition(ward(p, 2), {0, 0, 0, 1}));
  EXPECT_TRUE(same_partition(ward(p, 4), {0, 1, 2, 3}));
}
