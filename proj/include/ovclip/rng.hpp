#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "ovclip/errors.hpp"

namespace ovclip {

// Deterministic randomness. Every stochastic choice in the library draws from
// a std::mt19937_64 whose seed is derived from a user seed plus a short tag,
// so independent concerns (batch order, interpolation coefficients, parameter
// init, corpus noise) consume independent streams and adding draws to one
// stream never perturbs another.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64(std::string_view s,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a64(s.data(), s.size(), h);
}

// Derive a stream seed from (seed, tag, indices...). Mixing through splitmix64
// decorrelates nearby seeds and tags.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  return splitmix64(seed ^ splitmix64(fnv1a64(tag)));
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag,
                                 std::uint64_t a) {
  return splitmix64(derive_seed(seed, tag) ^ splitmix64(a + 0x9e37));
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag,
                                 std::uint64_t a, std::uint64_t b) {
  return splitmix64(derive_seed(seed, tag, a) ^ splitmix64(b + 0x79b9));
}

inline std::mt19937_64 make_engine(std::uint64_t seed, std::string_view tag) {
  return std::mt19937_64(derive_seed(seed, tag));
}

// Uniform in [0,1). Hand-rolled from raw 64-bit output (53 mantissa bits) so
// the value sequence is pinned by the engine alone, not by a library
// distribution whose algorithm may differ across standard libraries.
inline double uniform01(std::mt19937_64& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

inline double uniform_range(std::mt19937_64& eng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(eng);
}

// Standard normal via Box-Muller. Always consumes exactly two engine draws,
// which keeps draw counts easy to reason about when replaying streams.
inline double normal01(std::mt19937_64& eng) {
  double u1 = uniform01(eng);
  double u2 = uniform01(eng);
  while (u1 <= 0.0) u1 = uniform01(eng);  // avoid log(0); essentially never
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * 3.14159265358979323846 * u2);
}

// Uniform integer in [0, n). Rejection-free modulo is fine here: n is tiny
// relative to 2^64 so the bias is far below anything observable.
inline std::uint64_t uniform_index(std::mt19937_64& eng, std::uint64_t n) {
  if (n == 0) throw InvalidArgument("uniform_index: n must be positive");
  return eng() % n;
}

// In-place Fisher-Yates. Hand-rolled instead of std::shuffle so the permutation
// is identical under every standard library.
template <typename T>
void shuffle_inplace(std::vector<T>& v, std::mt19937_64& eng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(uniform_index(eng, i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace ovclip
