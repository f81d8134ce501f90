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

#ifndef ADASKETCH_PRNG_HPP_
#define ADASKETCH_PRNG_HPP_

#include <cmath>
#include <cstdint>
#include <random>

namespace adasketch {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a master seed. Used everywhere a
/// component needs its own randomness so that one 64-bit seed pins the whole
/// run.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(master ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

/// Deterministic random source. mt19937_64 is fully specified by the
/// standard; the std distributions are not, so every sampling routine the
/// library needs is hand-rolled here. Same seed => same values on every
/// platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  /// Uniform in the open interval (0, 1); never returns an endpoint.
  double uniform_open() {
    return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n), rejection-sampled (exact).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t rej = (~std::uint64_t{0} % n + 1) % n;
    for (;;) {
      const std::uint64_t x = gen_();
      if (x >= rej) return x % n;
    }
  }

  /// Fair sign in {-1, +1}.
  int sign() { return (gen_() & 1u) ? 1 : -1; }

  bool coin() { return (gen_() & 1u) != 0; }

  /// Laplace(0, scale) via the inverse CDF applied to a uniform draw.
  double laplace(double scale) { return laplace_icdf(uniform_open(), scale); }

  /// Standard normal via Box-Muller.
  double normal() {
    const double u1 = uniform_open();
    const double u2 = uniform_open();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925286766559 * u2);
  }

  /// Number of failures before the first success of a Bernoulli(p) process,
  /// p in (0, 1]. Used for thinning scans over sparse supports.
  std::uint64_t geometric_skips(double p) {
    if (p >= 1.0) return 0;
    const double u = uniform_open();
    const double g = std::floor(std::log(u) / std::log1p(-p));
    return g < 0 ? 0 : static_cast<std::uint64_t>(g);
  }

  /// Inverse CDF of Laplace(0, scale); u in (0, 1), u = 0.5 maps to 0.
  static double laplace_icdf(double u, double scale) {
    if (u < 0.5) return scale * std::log(2.0 * u);
    return -scale * std::log(2.0 * (1.0 - u));
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace adasketch

#endif  // ADASKETCH_PRNG_HPP_
