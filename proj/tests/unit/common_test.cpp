#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

#include "partsel/common.hpp"

using namespace partsel;

TEST(Numbers, FormatRoundTrips) {
  Rng rng(7);
  for (int i = 0; i < 2000; ++i) {
    const double v = (uniform01(rng) - 0.5) * std::pow(10.0, static_cast<int>(uniform_index(rng, 30)) - 15);
    const auto back = parse_number(format_number(v));
    ASSERT_TRUE(back.has_value());
    EXPECT_EQ(*back, v);
  }
  EXPECT_EQ(format_number(3.0), "3");
  EXPECT_EQ(format_number(0.1), "0.1");
}

TEST(Numbers, ParseRejectsJunk) {
  EXPECT_FALSE(parse_number("").has_value());
  EXPECT_FALSE(parse_number("1.5x").has_value());
  EXPECT_FALSE(parse_number("abc").has_value());
  EXPECT_EQ(*parse_number(" 2.5 "), 2.5);
}

TEST(Dates, KnownDays) {
  EXPECT_EQ(*parse_iso_date("1970-01-01"), 0);
  EXPECT_EQ(*parse_iso_date("2000-03-01"), 11017);
  EXPECT_EQ(format_iso_date(11017), "2000-03-01");
  EXPECT_FALSE(parse_iso_date("2001-02-29").has_value());
  EXPECT_TRUE(parse_iso_date("2000-02-29").has_value());
  EXPECT_FALSE(parse_iso_date("2000-13-01").has_value());
}

TEST(Dates, RoundTripAcrossCenturies) {
  for (std::int64_t d = -40000; d < 80000; d += 37) {
    EXPECT_EQ(*parse_iso_date(format_iso_date(d)), d);
  }
}

TEST(Seeds, StreamsAreDistinctAndStable) {
  EXPECT_EQ(derive_seed(1, "a"), derive_seed(1, "a"));
  EXPECT_NE(derive_seed(1, "a"), derive_seed(1, "b"));
  EXPECT_NE(derive_seed(1, "a"), derive_seed(2, "a"));
  EXPECT_NE(derive_seed(1, "a", 0), derive_seed(1, "a", 1));
}

TEST(Random, UniformIndexCoversRangeEvenly) {
  Rng rng(3);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 70000; ++i) ++hits[uniform_index(rng, 7)];
  for (int h : hits) EXPECT_NEAR(h, 10000, 500);
}

TEST(Random, SampleWithoutReplacementIsSortedAndDistinct) {
  Rng rng(5);
  for (std::size_t k = 0; k <= 20; ++k) {
    auto s = sample_without_replacement(20, k, rng);
    ASSERT_EQ(s.size(), k);
    EXPECT_TRUE(std::is_sorted(s.begin(), s.end()));
    EXPECT_EQ(std::set<std::size_t>(s.begin(), s.end()).size(), k);
  }
  EXPECT_THROW(sample_without_replacement(3, 4, rng), RangeError);
}

TEST(Hash, SeedChangesHash) {
  EXPECT_NE(hash_bytes("abc", 1), hash_bytes("abc", 2));
  EXPECT_EQ(hash_bytes("abc", 1), hash_bytes("abc", 1));
  EXPECT_EQ(hash_number(0.0, 9), hash_number(-0.0, 9));
}

TEST(Parallel, EverySlotWrittenOnce) {
  std::vector<int> out(1000, 0);
  parallel_for(out.size(), [&](std::size_t i) { out[i] += static_cast<int>(i); });
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], static_cast<int>(i));
}

TEST(Parallel, ExceptionPropagates) {
  EXPECT_THROW(parallel_for(10, [](std::size_t i) {
                 if (i == 4) throw RangeError("boom");
               }),
               RangeError);
}
