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

#ifndef ADASKETCH_ESTIMATORS_HPP_
#define ADASKETCH_ESTIMATORS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <vector>

#include "adasketch/prng.hpp"
#include "adasketch/sketch.hpp"
#include "adasketch/sparse_vector.hpp"

namespace adasketch {

/// Sign-alignment constants. The defaults are the proven values
/// (C_a = 50, C_b = 30, tau_a = 59/60, tau_b = 399/400); those thresholds
/// leave a gap of 17/1200 and need very large d/b to separate, so
/// experiments may run with relaxed() instead, which is clearly non-proven
/// territory.
struct EstimatorConstants {
  double c_a = 50.0;
  double c_b = 30.0;
  double tau_a = 59.0 / 60.0;
  double tau_b = 399.0 / 400.0;

  double tau_m() const { return (tau_a + tau_b) / 2.0; }
  double tau_m1() const { return tau_a + (tau_b - tau_a) / 5.0; }
  double tau_m2() const { return tau_b - (tau_b - tau_a) / 5.0; }
  double tau_delta_threshold() const { return (tau_b - tau_a) / 10.0; }
  double tau_delta_stable() const { return (tau_b - tau_a) / 25.0; }
  double flip_low() const { return tau_a + 2.0 * (tau_b - tau_a) / 5.0; }
  double flip_high() const { return tau_b - 2.0 * (tau_b - tau_a) / 5.0; }

  bool valid() const {
    return 0.5 < tau_a && tau_a < tau_b && tau_b < 1.0 && c_a > 0 && c_b > 0;
  }

  static EstimatorConstants paper() { return EstimatorConstants{}; }

  static EstimatorConstants relaxed() {
    EstimatorConstants c;
    c.tau_a = 0.6;
    c.tau_b = 0.9;
    return c;
  }
};

inline double median_of(std::vector<double> values) {
  const std::size_t n = values.size();
  const std::size_t mid = n / 2;
  std::nth_element(values.begin(),
                   values.begin() + static_cast<std::ptrdiff_t>(mid),
                   values.end());
  if (n % 2 == 1) return values[mid];
  const double hi = values[mid];
  const double lo =
      *std::max_element(values.begin(),
                        values.begin() + static_cast<std::ptrdiff_t>(mid));
  return (lo + hi) / 2.0;
}

/// Nearest-rank quantile (q in [0, 1]); q = 0.5 picks the lower-middle
/// element rather than the averaged median.
inline double quantile_of(std::vector<double> values, double q) {
  const std::size_t n = values.size();
  auto idx = static_cast<std::size_t>(
      std::floor(q * static_cast<double>(n - 1)));
  if (idx >= n) idx = n - 1;
  std::nth_element(values.begin(),
                   values.begin() + static_cast<std::ptrdiff_t>(idx),
                   values.end());
  return values[idx];
}

/// Classic median estimate of v[i]; unavailable when T_i is empty. Even
/// cardinality takes the mean of the two central values.
template <typename CounterT>
std::optional<double> median_estimate(const SketchRandomness& rand,
                                      const SketchState<CounterT>& state,
                                      std::uint64_t i) {
  auto values = bucket_estimates(rand, state, i);
  if (values.empty()) return std::nullopt;
  return median_of(std::move(values));
}

template <typename CounterT>
std::optional<double> quantile_estimate(const SketchRandomness& rand,
                                        const SketchState<CounterT>& state,
                                        std::uint64_t i, double q) {
  auto values = bucket_estimates(rand, state, i);
  if (values.empty()) return std::nullopt;
  return quantile_of(std::move(values), q);
}

/// The k' keys with largest |median estimate| among `candidates`, ties
/// broken toward the smaller key. Estimates are attached.
template <typename CounterT>
std::vector<std::pair<Key, double>> median_topk(
    const SketchRandomness& rand, const SketchState<CounterT>& state,
    std::size_t k_prime, std::span<const Key> candidates) {
  if (k_prime < 1) throw std::invalid_argument("median_topk: k_prime >= 1");
  std::vector<std::pair<Key, double>> scored;
  scored.reserve(candidates.size());
  for (const Key i : candidates) {
    const auto est = median_estimate(rand, state, i);
    scored.emplace_back(i, est.value_or(0.0));
  }
  const std::size_t take = std::min(k_prime, scored.size());
  std::partial_sort(scored.begin(),
                    scored.begin() + static_cast<std::ptrdiff_t>(take),
                    scored.end(), [](const auto& a, const auto& b) {
                      const double ma = std::fabs(a.second);
                      const double mb = std::fabs(b.second);
                      if (ma != mb) return ma > mb;
                      return a.first < b.first;
                    });
  scored.resize(take);
  return scored;
}

template <typename CounterT>
std::vector<std::pair<Key, double>> median_topk(
    const SketchRandomness& rand, const SketchState<CounterT>& state,
    std::size_t k_prime) {
  std::vector<Key> all(rand.params().n);
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<Key>(i);
  return median_topk(rand, state, k_prime, std::span<const Key>(all));
}

/// Basic sign-alignment estimate, Eq. form (b/d) * sum_t 1{mu_t[i] c_t
/// sigma > 0}. Note the normalization is by d/b, not |T_i|; zero products
/// count toward neither sign.
template <typename CounterT>
double basic_p_hat(const Participation& p, const SketchState<CounterT>& state,
                   const SketchParams& params, int sigma) {
  std::uint32_t matches = 0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double prod = static_cast<double>(p.signs[j]) *
                        static_cast<double>(state.counters[p.buckets[j]]) *
                        static_cast<double>(sigma);
    if (prod > 0.0) ++matches;
  }
  return static_cast<double>(matches) * static_cast<double>(params.b) /
         static_cast<double>(params.d);
}

template <typename CounterT>
double basic_p_hat(const SketchRandomness& rand,
                   const SketchState<CounterT>& state, std::uint64_t i,
                   int sigma) {
  check_state(rand, state);
  return basic_p_hat(rand.participating_buckets(i), state, rand.params(),
                     sigma);
}

/// Threshold sign-alignment reporter: { i : max(p^+, p^-) >= tau_m }.
template <typename CounterT>
std::vector<Key> threshold_report(const SketchRandomness& rand,
                                  const SketchState<CounterT>& state,
                                  const EstimatorConstants& constants,
                                  std::span<const Key> candidates) {
  check_state(rand, state);
  std::vector<Key> out;
  const double tau_m = constants.tau_m();
  for (const Key i : candidates) {
    const Participation p = rand.participating_buckets(i);
    const double plus = basic_p_hat(p, state, rand.params(), +1);
    const double minus = basic_p_hat(p, state, rand.params(), -1);
    if (std::max(plus, minus) >= tau_m) out.push_back(i);
  }
  return out;
}

template <typename CounterT>
std::vector<Key> threshold_report(const SketchRandomness& rand,
                                  const SketchState<CounterT>& state,
                                  const EstimatorConstants& constants) {
  std::vector<Key> all(rand.params().n);
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<Key>(i);
  return threshold_report(rand, state, constants, std::span<const Key>(all));
}

/// Continuously reported set K^+ u K^- for the stable estimator.
struct StableReportState {
  std::set<Key> k_plus;
  std::set<Key> k_minus;

  bool reported(Key i) const {
    return k_plus.count(i) != 0 || k_minus.count(i) != 0;
  }
  std::size_t size() const { return k_plus.size() + k_minus.size(); }
};

/// One step of the stable estimator over the given candidates: a
/// non-reported key enters K^sigma when p^sigma >= tau_m2, a reported key
/// exits when its p^sigma drops below tau_m1. The band between the two
/// thresholds never changes membership.
template <typename CounterT>
void stable_step(StableReportState& s, const SketchRandomness& rand,
                 const SketchState<CounterT>& state,
                 const EstimatorConstants& constants,
                 std::span<const Key> candidates) {
  check_state(rand, state);
  const double enter = constants.tau_m2();
  const double exit = constants.tau_m1();
  for (const Key i : candidates) {
    const Participation p = rand.participating_buckets(i);
    if (!s.reported(i)) {
      if (basic_p_hat(p, state, rand.params(), +1) >= enter) {
        s.k_plus.insert(i);
      } else if (basic_p_hat(p, state, rand.params(), -1) >= enter) {
        s.k_minus.insert(i);
      }
    } else if (s.k_plus.count(i) != 0) {
      if (basic_p_hat(p, state, rand.params(), +1) < exit) s.k_plus.erase(i);
    } else {
      if (basic_p_hat(p, state, rand.params(), -1) < exit) s.k_minus.erase(i);
    }
  }
}

/// Monte Carlo estimate of p^sigma(v, i) = Pr_mu[h^sigma | mu[i] != 0] with
/// fresh fully-random buckets and forced participation of i. This is the
/// test oracle the sketch-side estimates are checked against; it never
/// touches SketchRandomness.
struct OracleEstimate {
  double p = 0.0;
  double std_err = 0.0;
};

inline OracleEstimate oracle_p(const SparseVector& v, Key i, int sigma,
                               std::uint32_t b, std::uint64_t num_samples,
                               std::uint64_t seed) {
  if (num_samples < 1) {
    throw std::invalid_argument("oracle_p: num_samples >= 1");
  }
  if (b < 1) throw std::invalid_argument("oracle_p: b >= 1");
  std::vector<double> others;
  others.reserve(v.support_size());
  for (const auto& [key, value] : v.entries()) {
    if (key != i) others.push_back(value);
  }
  const double vi = v.value(i);
  const double p_participate = 1.0 / static_cast<double>(b);
  Rng rng(seed);
  std::uint64_t hits = 0;
  for (std::uint64_t s = 0; s < num_samples; ++s) {
    const int si = rng.sign();
    double c = vi * si;
    if (b == 1) {
      for (const double value : others) c += value * rng.sign();
    } else {
      // Thinning: walk the support with geometric skips instead of flipping
      // a coin per key.
      std::size_t pos = rng.geometric_skips(p_participate);
      while (pos < others.size()) {
        c += others[pos] * rng.sign();
        pos += 1 + rng.geometric_skips(p_participate);
      }
    }
    if (c * si * sigma > 0.0) ++hits;
  }
  OracleEstimate est;
  est.p = static_cast<double>(hits) / static_cast<double>(num_samples);
  est.std_err =
      std::sqrt(est.p * (1.0 - est.p) / static_cast<double>(num_samples));
  return est;
}

enum class HeavyLabel { kHeavy, kSuspectOnly, kNeither };

/// Ground-truth classification from Lemma 1's two branches, with tail norms
/// computed exactly. heavy: v[i]^2 > (C_b^2/b) ||tail[b/C_b^2]||^2;
/// neither: v[i]^2 <= (1/b) ||tail[C_a b]||^2.
inline HeavyLabel classify_key(const SparseVector& v, Key i,
                               const EstimatorConstants& constants,
                               std::uint32_t b) {
  const double vi2 = v.value(i) * v.value(i);
  const auto heavy_tail_index = static_cast<std::size_t>(
      std::floor(static_cast<double>(b) / (constants.c_b * constants.c_b)));
  const auto neither_tail_index = static_cast<std::size_t>(
      std::floor(constants.c_a * static_cast<double>(b)));
  const double heavy_rhs = constants.c_b * constants.c_b /
                           static_cast<double>(b) *
                           v.tail_norm2_squared(heavy_tail_index);
  if (vi2 > heavy_rhs) return HeavyLabel::kHeavy;
  const double neither_rhs =
      v.tail_norm2_squared(neither_tail_index) / static_cast<double>(b);
  if (vi2 <= neither_rhs) return HeavyLabel::kNeither;
  return HeavyLabel::kSuspectOnly;
}

/// Labels for every support key of v (zeros elsewhere are trivially
/// neither).
inline std::vector<std::pair<Key, HeavyLabel>> classify_heavy_suspect(
    const SparseVector& v, const EstimatorConstants& constants,
    std::uint32_t b) {
  std::vector<std::pair<Key, HeavyLabel>> out;
  out.reserve(v.support_size());
  for (const auto& [key, value] : v.entries()) {
    out.emplace_back(key, classify_key(v, key, constants, b));
  }
  return out;
}

}  // namespace adasketch

#endif  // ADASKETCH_ESTIMATORS_HPP_
