#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace partsel {

// Error hierarchy. Every failure surfaced by the library is one of these.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input does not match the declared schema, or a column is unknown.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Malformed text: CSV cells, query syntax, JSON documents.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Query is syntactically fine but outside the supported query class.
class ScopeError : public Error {
 public:
  using Error::Error;
};

// Argument outside its documented domain.
class RangeError : public Error {
 public:
  using Error::Error;
};

inline constexpr std::uint64_t kDefaultHashSeed = 0x9e3779b97f4a7c15ULL;

// splitmix64 finalizer; bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

// Seeded multiply-xor-shift hash shared by every sketch.
std::uint64_t hash_bytes(std::string_view bytes, std::uint64_t seed);
std::uint64_t hash_number(double value, std::uint64_t seed);

// Shortest decimal text that parses back to the same double.
std::string format_number(double value);
std::optional<double> parse_number(std::string_view text);

// ISO-8601 calendar dates <-> days since 1970-01-01.
std::optional<std::int64_t> parse_iso_date(std::string_view text);
std::string format_iso_date(std::int64_t days);

std::string to_lower(std::string_view text);
std::string trim(std::string_view text);

// Named, independent random substreams derived from one root seed.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream, std::uint64_t index = 0);

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t root, std::string_view stream, std::uint64_t index = 0) {
  return Rng(derive_seed(root, stream, index));
}

// Uniform double in [0, 1) that does not depend on the standard library's
// distribution implementation, so results are stable across toolchains.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, bound). bound must be > 0.
inline std::size_t uniform_index(Rng& rng, std::size_t bound) {
  // Lemire's multiply-shift with rejection.
  const std::uint64_t range = bound;
  std::uint64_t x = rng();
  __uint128_t m = static_cast<__uint128_t>(x) * range;
  auto low = static_cast<std::uint64_t>(m);
  if (low < range) {
    const std::uint64_t threshold = (0 - range) % range;
    while (low < threshold) {
      x = rng();
      m = static_cast<__uint128_t>(x) * range;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::size_t>(m >> 64);
}

// Fisher-Yates with uniform_index.
template <class T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::swap(items[i - 1], items[uniform_index(rng, i)]);
  }
}

// k distinct indices from [0, n), in ascending order.
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, Rng& rng);

// Runs body(i) for i in [0, n). Work is split into contiguous chunks across
// hardware threads; results must be written to per-index slots.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  const std::size_t workers =
      std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace partsel
