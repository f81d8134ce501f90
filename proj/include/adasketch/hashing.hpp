// Copyright 2026 The adasketch Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ADASKETCH_HASHING_HPP_
#define ADASKETCH_HASHING_HPP_

#include <bit>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "adasketch/prng.hpp"

namespace adasketch {

/// 2^61 - 1. Mersenne primes admit a shift-add modular reduction, and the
/// selector bias O(b/P) is negligible at this size.
inline constexpr std::uint64_t kMersenne61 = (std::uint64_t{1} << 61) - 1;

enum class HashMode { kPolynomial, kFullyRandom };

/// A seedable k-wise independent family. `independence` is the number of
/// polynomial coefficients; any k >= 2 is accepted (the sketches use 2, 3
/// and 5). `prime` must be >= 2^domain_bits; it is configurable so tests can
/// instantiate tiny exhaustive families.
struct HashFamilySpec {
  int independence = 2;
  int domain_bits = 32;
  HashMode mode = HashMode::kPolynomial;
  std::uint64_t prime = kMersenne61;
};

namespace detail {

inline std::uint64_t mulmod(std::uint64_t a, std::uint64_t b,
                            std::uint64_t p) {
  const unsigned __int128 x =
      static_cast<unsigned __int128>(a) * static_cast<unsigned __int128>(b);
  if (p == kMersenne61) {
    std::uint64_t r = static_cast<std::uint64_t>(x & kMersenne61) +
                      static_cast<std::uint64_t>(x >> 61);
    if (r >= kMersenne61) r -= kMersenne61;
    return r;
  }
  return static_cast<std::uint64_t>(x % p);
}

inline std::uint64_t addmod(std::uint64_t a, std::uint64_t b,
                            std::uint64_t p) {
  std::uint64_t r = a + b;  // a, b < p <= 2^61, no overflow
  if (r >= p) r -= p;
  return r;
}

/// Stateless keyed mix for the fully-random mode; order-independent and
/// thread-safe by construction.
inline std::uint64_t keyed_mix(std::uint64_t seed, std::uint64_t key) {
  return splitmix64(seed ^ splitmix64(key * 0x9ddfea08eb382d69ULL + 1));
}

/// Horner evaluation of a degree-(k-1) polynomial mod p at `key`.
inline std::uint64_t poly_eval(const std::uint64_t* coeffs, int k,
                               std::uint64_t key, std::uint64_t p) {
  const std::uint64_t x = key % p;
  std::uint64_t acc = 0;
  for (int j = k; j-- > 0;) {
    acc = addmod(mulmod(acc, x, p), coeffs[j], p);
  }
  return acc;
}

/// Uniform value in [0, bound) from a splitmix64 stream, exact via
/// rejection on the smallest covering power of two. Much cheaper than
/// seeding a full engine; sketches construct two hash functions per bucket.
inline std::uint64_t bounded_from_stream(std::uint64_t& state,
                                         std::uint64_t bound) {
  const int bits = bound <= 2 ? 1 : std::bit_width(bound - 1);
  for (;;) {
    state = splitmix64(state + 0x9e3779b97f4a7c15ULL);
    const std::uint64_t candidate = state >> (64 - bits);
    if (candidate < bound) return candidate;
  }
}

}  // namespace detail

/// One member of the family. Immutable after construction in polynomial
/// mode, hence safe to share between threads. Fully-random mode is a keyed
/// mix (stateless), so it is equally shareable; outputs do not depend on
/// evaluation order.
class HashFunction {
 public:
  HashFunction() = default;

  /// Explicit-coefficient constructor, for exhaustive small-prime tests.
  HashFunction(HashFamilySpec spec, std::vector<std::uint64_t> coefficients)
      : spec_(spec), seed_(0), coefficients_(std::move(coefficients)) {}

  /// Raw hash value in [0, prime). Same seed + key => same output, across
  /// processes and platforms.
  std::uint64_t raw(std::uint64_t key) const {
    if (spec_.mode == HashMode::kFullyRandom) {
      return detail::keyed_mix(seed_, key) % spec_.prime;
    }
    return detail::poly_eval(coefficients_.data(),
                             static_cast<int>(coefficients_.size()), key,
                             spec_.prime);
  }

  /// Selector bit with Pr[1] = 1/b (up to O(b/P) in polynomial mode).
  int eval_selector(std::uint64_t key, std::uint64_t b) const {
    if (b == 0) throw std::invalid_argument("eval_selector: b must be >= 1");
    return raw(key) % b == 0 ? 1 : 0;
  }

  /// Balanced sign in {-1, +1}.
  int eval_sign(std::uint64_t key) const {
    return (raw(key) & 1u) ? 1 : -1;
  }

  /// Bucket index in [0, b), for CountSketch rows.
  std::uint32_t eval_range(std::uint64_t key, std::uint64_t b) const {
    if (b == 0) throw std::invalid_argument("eval_range: b must be >= 1");
    return static_cast<std::uint32_t>(raw(key) % b);
  }

  const HashFamilySpec& spec() const { return spec_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<std::uint64_t>& coefficients() const {
    return coefficients_;
  }

  friend HashFunction make_hash(const HashFamilySpec&, std::uint64_t);

 private:
  HashFamilySpec spec_;
  std::uint64_t seed_ = 0;
  std::vector<std::uint64_t> coefficients_;
};

/// Builds a hash function whose coefficients are derived deterministically
/// from `seed`.
inline HashFunction make_hash(const HashFamilySpec& spec, std::uint64_t seed) {
  if (spec.independence < 2) {
    throw std::invalid_argument("make_hash: independence must be >= 2");
  }
  if (spec.prime < 2) {
    throw std::invalid_argument("make_hash: prime must be >= 2");
  }
  HashFunction h;
  h.spec_ = spec;
  h.seed_ = seed;
  if (spec.mode == HashMode::kPolynomial) {
    std::uint64_t stream = splitmix64(seed);
    h.coefficients_.resize(static_cast<std::size_t>(spec.independence));
    for (auto& c : h.coefficients_) {
      c = detail::bounded_from_stream(stream, spec.prime);
    }
  }
  return h;
}

}  // namespace adasketch

#endif  // ADASKETCH_HASHING_HPP_
