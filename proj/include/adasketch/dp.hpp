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

#ifndef ADASKETCH_DP_HPP_
#define ADASKETCH_DP_HPP_

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "adasketch/prng.hpp"

namespace adasketch::dp {

inline double sample_laplace(double scale, Rng& rng) {
  if (scale <= 0.0) throw std::invalid_argument("sample_laplace: scale > 0");
  return rng.laplace(scale);
}

inline double laplace_cdf(double x, double scale) {
  if (x < 0.0) return 0.5 * std::exp(x / scale);
  return 1.0 - 0.5 * std::exp(-x / scale);
}

/// Injectable noise for the monitor: either a seeded Laplace source or the
/// zero source used to unit-test control flow deterministically.
class NoiseSource {
 public:
  static NoiseSource zero() { return NoiseSource(true, 0); }
  static NoiseSource seeded(std::uint64_t seed) {
    return NoiseSource(false, seed);
  }

  double laplace(double scale) {
    if (zero_) return 0.0;
    return rng_.laplace(scale);
  }

  double uniform() { return rng_.uniform(); }

  bool is_zero() const { return zero_; }

 private:
  NoiseSource(bool zero, std::uint64_t seed) : zero_(zero), rng_(seed) {}

  bool zero_;
  Rng rng_;
};

/// (epsilon, delta, L) plus the derived monitor scale
/// Delta = (1/eps) ln(1/delta) ln((1/eps) ln(1/delta)), natural logs.
struct PrivacyParams {
  double epsilon = 0.0;
  double delta = 0.0;
  std::int64_t access_limit = 0;
  double Delta = 0.0;        // clip bound; coarse noise has scale 10*Delta
  double small_scale = 0.0;  // (1/eps) ln(1/delta)

  static PrivacyParams make(double epsilon, double delta,
                            std::int64_t access_limit) {
    if (epsilon <= 0.0) {
      throw std::invalid_argument("PrivacyParams: epsilon > 0 required");
    }
    if (!(delta > 0.0 && delta < 1.0)) {
      throw std::invalid_argument("PrivacyParams: delta in (0,1) required");
    }
    if (access_limit < 1) {
      throw std::invalid_argument("PrivacyParams: access limit >= 1 required");
    }
    PrivacyParams p;
    p.epsilon = epsilon;
    p.delta = delta;
    p.access_limit = access_limit;
    p.small_scale = std::log(1.0 / delta) / epsilon;
    p.Delta = p.small_scale * std::log(p.small_scale);
    if (!(p.Delta > 0.0)) {
      throw std::invalid_argument(
          "PrivacyParams: (1/eps) log(1/delta) must exceed 1");
    }
    return p;
  }
};

namespace detail {

// integral of exp(alpha y + shift) over [l, r]; l may be -infinity, in
// which case alpha must be positive. Callers arrange all endpoint
// exponents to be nonpositive, so nothing here overflows.
inline double integral_exp(double l, double r, double alpha, double shift) {
  if (r <= l) return 0.0;
  if (std::isinf(l)) {
    return std::exp(alpha * r + shift) / alpha;
  }
  if (alpha == 0.0) return (r - l) * std::exp(shift);
  return std::exp(alpha * l + shift) * std::expm1(alpha * (r - l)) / alpha;
}

/// CDF at t of N = Lap(s1) + min(delta, Lap(s2)) -- the monitor's total
/// noise for sign = +1 queries. Exact piecewise closed form.
inline double clipped_sum_cdf(double t, double s1, double s2, double delta) {
  const double p_atom = 0.5 * std::exp(-delta / s2);
  double cdf = p_atom * laplace_cdf(t - delta, s1);

  const double neg_inf = -std::numeric_limits<double>::infinity();
  const double lo = std::min(0.0, t);
  const double hi = std::max(0.0, t);
  const double bounds[4] = {neg_inf, std::min(lo, delta), std::min(hi, delta),
                            delta};
  const double kb = 0.5 / s2;
  for (int seg = 0; seg < 3; ++seg) {
    const double l = bounds[seg];
    const double r = bounds[seg + 1];
    if (!(r > l)) continue;
    const double probe = std::isinf(l) ? r - 1.0 : 0.5 * (l + r);
    const double beta_b = probe <= 0.0 ? 1.0 / s2 : -1.0 / s2;
    if (probe <= t) {
      // F_a(t - y) = 1 - exp((y - t)/s1) / 2
      cdf += kb * integral_exp(l, r, beta_b, 0.0);
      cdf -= 0.5 * kb * integral_exp(l, r, beta_b + 1.0 / s1, -t / s1);
    } else {
      // F_a(t - y) = exp((t - y)/s1) / 2
      cdf += 0.5 * kb * integral_exp(l, r, beta_b - 1.0 / s1, t / s1);
    }
  }
  return cdf;
}

}  // namespace detail

struct TmQueryRecord {
  std::uint64_t id = 0;
  int sign = 0;
  double tau = 0.0;
  double true_count = 0.0;
  double noisy_count = 0.0;
  bool top = false;
  std::uint32_t deactivated = 0;
};

/// The fine-grained sparse-vector mechanism over an indexed dataset (here:
/// bucket indices). Counters charge only on top answers and only for
/// elements the predicate counted; an element that reaches the access limit
/// is deactivated and never contributes again. Single owner; queries are
/// serialized.
class ThresholdMonitor {
 public:
  ThresholdMonitor(std::uint32_t num_elements, const PrivacyParams& params,
                   NoiseSource noise)
      : params_(params),
        noise_(noise),
        counters_(num_elements, 0),
        active_(num_elements, 1),
        num_active_(num_elements) {}

  /// Query with an explicit list of elements satisfying the predicate
  /// (inactive ones are ignored). Returns true for top.
  bool query_sparse(std::span<const std::uint32_t> satisfying, int sign,
                    double tau) {
    scratch_.clear();
    for (const auto x : satisfying) {
      if (active_[x]) scratch_.push_back(x);
    }
    return decide_and_charge(sign, tau);
  }

  /// Query with a predicate evaluated over every active element.
  template <typename Pred>
  bool query(Pred&& f, int sign, double tau) {
    scratch_.clear();
    for (std::uint32_t x = 0; x < counters_.size(); ++x) {
      if (active_[x] && f(x)) scratch_.push_back(x);
    }
    return decide_and_charge(sign, tau);
  }

  /// Exact probability that a query with the given active true count
  /// returns top, under this monitor's noise distribution. Matches
  /// query()'s sampling semantics bit-for-bit in the zero-noise case and in
  /// distribution otherwise.
  double top_probability(double true_count, double tau, int sign) const {
    if (noise_.is_zero()) {
      return (sign > 0 ? true_count >= tau : true_count <= tau) ? 1.0 : 0.0;
    }
    const double s1 = 10.0 * params_.Delta;
    const double s2 = params_.small_scale;
    if (sign > 0) {
      // top iff true_count + N >= tau
      return 1.0 - detail::clipped_sum_cdf(tau - true_count, s1, s2,
                                           params_.Delta);
    }
    // sign = -1 mirrors: noise is -(Lap + min(Delta, Lap)) in distribution.
    return 1.0 - detail::clipped_sum_cdf(true_count - tau, s1, s2,
                                         params_.Delta);
  }

  /// Commits a top answer on behalf of a sampling shortcut that already
  /// decided the outcome with top_probability(): charges the satisfying
  /// active elements and logs the query exactly as a regular top.
  void commit_top(std::span<const std::uint32_t> satisfying, int sign,
                  double tau) {
    scratch_.clear();
    for (const auto x : satisfying) {
      if (active_[x]) scratch_.push_back(x);
    }
    const double f = static_cast<double>(scratch_.size());
    const std::uint32_t deactivated = charge(scratch_);
    log(sign, tau, f, f, true, deactivated);
  }

  bool is_active(std::uint32_t x) const { return active_[x] != 0; }
  std::int64_t counter(std::uint32_t x) const { return counters_[x]; }
  std::uint32_t num_active() const { return num_active_; }
  std::uint32_t size() const {
    return static_cast<std::uint32_t>(counters_.size());
  }
  const PrivacyParams& privacy() const { return params_; }
  std::uint64_t queries_issued() const { return next_id_; }
  std::uint64_t tops_answered() const { return tops_; }

  void enable_transcript(bool on = true) { record_ = on; }
  const std::vector<TmQueryRecord>& transcript() const { return records_; }

 private:
  bool decide_and_charge(int sign, double tau) {
    if (sign != 1 && sign != -1) {
      throw std::invalid_argument("tm query: sign must be +1 or -1");
    }
    const double f = static_cast<double>(scratch_.size());
    const double a = noise_.laplace(10.0 * params_.Delta);
    const double b = noise_.laplace(params_.small_scale);
    const double clipped =
        sign > 0 ? std::min(params_.Delta, b) : std::max(-params_.Delta, b);
    const double noisy = f + a + clipped;
    const bool top = !(noisy * sign < tau * sign);
    std::uint32_t deactivated = 0;
    if (top) {
      deactivated = charge(scratch_);
    }
    log(sign, tau, f, noisy, top, deactivated);
    return top;
  }

  std::uint32_t charge(const std::vector<std::uint32_t>& sat_active) {
    std::uint32_t deactivated = 0;
    for (const auto x : sat_active) {
      if (++counters_[x] >= params_.access_limit) {
        active_[x] = 0;
        --num_active_;
        ++deactivated;
      }
    }
    ++tops_;
    return deactivated;
  }

  void log(int sign, double tau, double f, double noisy, bool top,
           std::uint32_t deactivated) {
    if (record_) {
      records_.push_back({next_id_, sign, tau, f, noisy, top, deactivated});
    }
    ++next_id_;
  }

  PrivacyParams params_;
  NoiseSource noise_;
  std::vector<std::int64_t> counters_;
  std::vector<std::uint8_t> active_;
  std::uint32_t num_active_ = 0;
  std::uint64_t next_id_ = 0;
  std::uint64_t tops_ = 0;
  bool record_ = false;
  std::vector<TmQueryRecord> records_;
  std::vector<std::uint32_t> scratch_;
};

}  // namespace adasketch::dp

#endif  // ADASKETCH_DP_HPP_
