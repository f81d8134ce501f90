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

#ifndef ADASKETCH_ROBUST_HPP_
#define ADASKETCH_ROBUST_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <vector>

#include "adasketch/dp.hpp"
#include "adasketch/estimators.hpp"
#include "adasketch/sketch.hpp"

namespace adasketch {

/// Knobs for the DP-backed estimators. epsilon = c1/sqrt(L) and
/// delta = c2/(n m b L); the defaults keep the paper's parameter shapes but
/// both constants are configurable since the proven values assume sketch
/// sizes far beyond desk scale.
struct RobustParams {
  std::int64_t access_limit = 100;  // L
  std::uint64_t query_bound = 1000;  // m, upper bound on queries
  double c1 = 1.0;
  double c2 = 1.0;
  bool weights = false;  // doubles the monitor's access limit

  dp::PrivacyParams privacy(const SketchParams& sketch) const {
    if (access_limit < 1) {
      throw std::invalid_argument("RobustParams: access limit >= 1");
    }
    const double eps = c1 / std::sqrt(static_cast<double>(access_limit));
    const double denom = static_cast<double>(sketch.n) *
                         static_cast<double>(query_bound) *
                         static_cast<double>(sketch.b) *
                         static_cast<double>(access_limit);
    const double delta = c2 / denom;
    return dp::PrivacyParams::make(eps, delta,
                                   weights ? 2 * access_limit : access_limit);
  }
};

/// Integer-valued weight estimation domain: entries of the sketched vector
/// must be integers in [-W, W]. tau_tr = (tau_down + tau_up)/2 = 1/2.
struct WeightEstimatorParams {
  std::int64_t value_bound = 1 << 20;  // W
  double tau_down = 0.1;
  double tau_up = 0.9;

  double tau_tr() const { return (tau_down + tau_up) / 2.0; }
};

namespace detail {

/// Buckets of T_i holding a strictly positive / negative product
/// mu_t[i] * c_t under the given state.
struct SignedBuckets {
  std::vector<std::uint32_t> plus;
  std::vector<std::uint32_t> minus;
};

template <typename CounterT>
SignedBuckets signed_buckets(const Participation& part,
                             const SketchState<CounterT>& state) {
  SignedBuckets out;
  for (std::size_t j = 0; j < part.size(); ++j) {
    const double prod = static_cast<double>(part.signs[j]) *
                        static_cast<double>(state.counters[part.buckets[j]]);
    if (prod > 0.0) {
      out.plus.push_back(part.buckets[j]);
    } else if (prod < 0.0) {
      out.minus.push_back(part.buckets[j]);
    }
  }
  return out;
}

/// (value, bucket) pairs of T_i sorted by value; values are the integer
/// bucket estimates mu_t[i] * c_t.
template <typename CounterT>
std::vector<std::pair<double, std::uint32_t>> sorted_estimates(
    const Participation& part, const SketchState<CounterT>& state) {
  std::vector<std::pair<double, std::uint32_t>> vals;
  vals.reserve(part.size());
  for (std::size_t j = 0; j < part.size(); ++j) {
    vals.emplace_back(static_cast<double>(part.signs[j]) *
                          static_cast<double>(state.counters[part.buckets[j]]),
                      part.buckets[j]);
  }
  std::sort(vals.begin(), vals.end());
  return vals;
}

}  // namespace detail

/// The robust threshold estimator: every reporting decision goes through a
/// ThresholdMonitor over the d buckets, so the privacy budget is charged
/// only on reported keys and exhausted buckets drop out. Owns the monitor;
/// the same monitor also serves weight estimation. Single owner, queries
/// serialized.
class RobustThresholdEstimator {
 public:
  RobustThresholdEstimator(const SketchRandomness& rand,
                           const EstimatorConstants& constants,
                           const RobustParams& params, dp::NoiseSource noise)
      : rand_(rand),
        constants_(constants),
        params_(params),
        tm_(rand.params().d, params.privacy(rand.params()), noise),
        sampler_(noise) {
    if (rand.variant() != SketchVariant::kBCountSketch) {
      throw std::invalid_argument(
          "robust estimators require BCountSketch (i.i.d. buckets)");
    }
  }

  /// Algorithm-2 style query: report i iff the monitor answers top for
  /// f^+ or (short-circuited) f^- at threshold (d/b) tau_m.
  template <typename CounterT>
  std::vector<Key> query(const SketchState<CounterT>& state,
                         std::span<const Key> candidates) {
    check_state(rand_, state);
    const double tau = threshold();
    std::vector<Key> reported;
    for (const Key i : candidates) {
      const Participation part = rand_.participating_buckets(i);
      const auto sides = detail::signed_buckets(part, state);
      if (tm_.query_sparse(sides.plus, +1, tau) ||
          tm_.query_sparse(sides.minus, +1, tau)) {
        reported.push_back(i);
      }
    }
    return reported;
  }

  template <typename CounterT>
  std::vector<Key> query(const SketchState<CounterT>& state) {
    std::vector<Key> all(rand_.params().n);
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<Key>(i);
    return query(state, std::span<const Key>(all));
  }

  /// Weight estimation by linear scan over w = -W..W, one monitor query per
  /// step, first top wins (the reference implementation).
  template <typename CounterT>
  std::int64_t estimate_weight_naive(const SketchState<CounterT>& state,
                                     Key i, const WeightEstimatorParams& wp) {
    check_state(rand_, state);
    const auto vals =
        detail::sorted_estimates(rand_.participating_buckets(i), state);
    const double tau =
        ell() * wp.tau_tr();
    std::vector<std::uint32_t> satisfying;
    satisfying.reserve(vals.size());
    for (std::int64_t w = -wp.value_bound; w <= wp.value_bound; ++w) {
      satisfying.clear();
      for (const auto& [value, bucket] : vals) {
        if (value <= static_cast<double>(w)) satisfying.push_back(bucket);
      }
      if (tm_.query_sparse(satisfying, +1, tau)) return w;
    }
    return wp.value_bound;
  }

  /// Interval implementation with the same output distribution: the bucket
  /// estimates split [-W, W] into runs of constant predicate; each run is
  /// skipped with probability (1-p)^len, else the return point follows the
  /// truncated geometric law. Cost O(|T_i| log |T_i|) independent of W.
  template <typename CounterT>
  std::int64_t estimate_weight_fast(const SketchState<CounterT>& state, Key i,
                                    const WeightEstimatorParams& wp) {
    check_state(rand_, state);
    const auto vals =
        detail::sorted_estimates(rand_.participating_buckets(i), state);
    const double tau = ell() * wp.tau_tr();
    const std::int64_t W = wp.value_bound;

    // Active values only drive the counts; charging still goes through the
    // monitor which ignores inactive buckets anyway.
    std::vector<std::pair<double, std::uint32_t>> active_vals;
    active_vals.reserve(vals.size());
    for (const auto& v : vals) {
      if (tm_.is_active(v.second)) active_vals.push_back(v);
    }

    std::int64_t w = -W;
    std::size_t idx = 0;  // first active value > w
    while (w <= W) {
      while (idx < active_vals.size() &&
             active_vals[idx].first <= static_cast<double>(w)) {
        ++idx;
      }
      // Run of constant predicate: [w, hi].
      std::int64_t hi = W;
      if (idx < active_vals.size()) {
        const double next = std::ceil(active_vals[idx].first);
        hi = std::min<std::int64_t>(W, static_cast<std::int64_t>(next) - 1);
        if (hi < w) hi = w;
      }
      const double count = static_cast<double>(idx);
      const double p = tm_.top_probability(count, tau, +1);
      const auto len = static_cast<double>(hi - w + 1);
      bool returned = false;
      std::int64_t chosen = 0;
      if (p >= 1.0) {
        returned = true;
        chosen = w;
      } else if (p > 0.0) {
        const double log_q = std::log1p(-p);
        const double p_return = -std::expm1(len * log_q);
        const double u = sampler_.uniform();
        if (u < p_return) {
          const double j = std::floor(std::log1p(-u) / log_q);
          returned = true;
          chosen = w + std::min<std::int64_t>(static_cast<std::int64_t>(j),
                                              hi - w);
        }
      }
      if (returned) {
        std::vector<std::uint32_t> satisfying;
        for (const auto& [value, bucket] : vals) {
          if (value <= static_cast<double>(chosen)) {
            satisfying.push_back(bucket);
          }
        }
        tm_.commit_top(satisfying, +1, tau);
        return chosen;
      }
      w = hi + 1;
    }
    return W;
  }

  /// Fraction of T_i that has gone inactive; callers watch this to detect
  /// budget exhaustion.
  double inactive_fraction(Key i) const {
    const Participation part = rand_.participating_buckets(i);
    if (part.size() == 0) return 0.0;
    std::size_t inactive = 0;
    for (const auto bucket : part.buckets) {
      inactive += tm_.is_active(bucket) ? 0 : 1;
    }
    return static_cast<double>(inactive) / static_cast<double>(part.size());
  }

  double threshold() const { return ell() * constants_.tau_m(); }
  double ell() const {
    return static_cast<double>(rand_.params().d) /
           static_cast<double>(rand_.params().b);
  }
  const SketchRandomness& randomness() const { return rand_; }
  const EstimatorConstants& constants() const { return constants_; }
  dp::ThresholdMonitor& monitor() { return tm_; }
  const dp::ThresholdMonitor& monitor() const { return tm_; }

 private:
  const SketchRandomness& rand_;
  EstimatorConstants constants_;
  RobustParams params_;
  dp::ThresholdMonitor tm_;
  dp::NoiseSource sampler_;
};

/// Streaming robust estimator (stable thresholds): processes updates,
/// maintains the continuously reported set K^+ u K^-, and charges the
/// monitor only when membership changes. Optionally maintains weight
/// estimates: fresh private estimate on entry, exact increments while
/// reported, revalidation against noisy quantiles before reporting.
class RobustStableEstimator {
 public:
  RobustStableEstimator(const SketchRandomness& rand,
                        const EstimatorConstants& constants,
                        const RobustParams& params, dp::NoiseSource noise,
                        bool report_weights = false,
                        WeightEstimatorParams wp = {})
      : rand_(rand),
        constants_(constants),
        weights_on_(report_weights),
        wp_(wp),
        inner_(rand, constants,
               with_weights(params, report_weights), noise),
        state_(make_state<double>(rand)) {}

  void update(Key key, std::int64_t value) {
    if (weights_on_ && reported_.reported(key)) {
      weights_[key] += value;  // exact bookkeeping while reported
    }
    apply_update(state_, rand_, key, static_cast<double>(value));
    auto it = values_.find(key);
    const std::int64_t next = (it == values_.end() ? 0 : it->second) + value;
    if (next == 0) {
      if (it != values_.end()) values_.erase(it);
    } else {
      values_[key] = next;
    }

    const double enter_tau = inner_.ell() * constants_.tau_m2();
    const double exit_tau = inner_.ell() * constants_.tau_m1();

    // Keys not currently reported: entry tests at tau_m2.
    for (const auto& [i, v] : values_) {
      if (reported_.reported(i)) continue;
      const Participation part = rand_.participating_buckets(i);
      const auto sides = detail::signed_buckets(part, state_);
      if (inner_.monitor().query_sparse(sides.plus, +1, enter_tau)) {
        reported_.k_plus.insert(i);
        on_entry(i);
      } else if (inner_.monitor().query_sparse(sides.minus, +1, enter_tau)) {
        reported_.k_minus.insert(i);
        on_entry(i);
      }
    }

    // Reported keys: exit tests at tau_m1 with sign -1.
    for (const int sigma : {+1, -1}) {
      auto& side = sigma > 0 ? reported_.k_plus : reported_.k_minus;
      for (auto it2 = side.begin(); it2 != side.end();) {
        const Key i = *it2;
        const Participation part = rand_.participating_buckets(i);
        const auto sides = detail::signed_buckets(part, state_);
        const auto& sat = sigma > 0 ? sides.plus : sides.minus;
        if (inner_.monitor().query_sparse(sat, -1, exit_tau)) {
          it2 = side.erase(it2);
          ++membership_changes_[i];
          weights_.erase(i);
        } else {
          ++it2;
        }
      }
    }

    if (weights_on_) revalidate_weights();
  }

  const StableReportState& reported() const { return reported_; }

  std::optional<std::int64_t> maintained_weight(Key i) const {
    const auto it = weights_.find(i);
    if (it == weights_.end()) return std::nullopt;
    return it->second;
  }

  std::uint64_t membership_changes(Key i) const {
    const auto it = membership_changes_.find(i);
    return it == membership_changes_.end() ? 0 : it->second;
  }

  const SketchState<double>& state() const { return state_; }
  RobustThresholdEstimator& inner() { return inner_; }

 private:
  static RobustParams with_weights(RobustParams p, bool weights) {
    p.weights = weights;
    return p;
  }

  void on_entry(Key i) {
    ++membership_changes_[i];
    if (weights_on_) {
      weights_[i] = inner_.estimate_weight_fast(state_, i, wp_);
    }
  }

  /// Maintained estimates must stay within the noisy (tau_down, tau_up)
  /// quantile band of the bucket estimates; a healthy estimate answers
  /// bottom on both probes (no budget spent), a stale one triggers a fresh
  /// private estimate.
  void revalidate_weights() {
    const double lo_tau = inner_.ell() * wp_.tau_down;
    const double hi_tau = inner_.ell() * wp_.tau_up;
    for (const int sigma : {+1, -1}) {
      const auto& side = sigma > 0 ? reported_.k_plus : reported_.k_minus;
      for (const Key i : side) {
        const auto it = weights_.find(i);
        if (it == weights_.end()) continue;
        const auto vals = detail::sorted_estimates(
            rand_.participating_buckets(i), state_);
        std::vector<std::uint32_t> at_most;
        for (const auto& [value, bucket] : vals) {
          if (value <= static_cast<double>(it->second)) {
            at_most.push_back(bucket);
          }
        }
        const bool high = inner_.monitor().query_sparse(at_most, +1, hi_tau);
        const bool low = inner_.monitor().query_sparse(at_most, -1, lo_tau);
        if (high || low) {
          weights_[i] = inner_.estimate_weight_fast(state_, i, wp_);
        }
      }
    }
  }

  const SketchRandomness& rand_;
  EstimatorConstants constants_;
  bool weights_on_;
  WeightEstimatorParams wp_;
  RobustThresholdEstimator inner_;
  SketchState<double> state_;
  std::map<Key, std::int64_t> values_;
  StableReportState reported_;
  std::map<Key, std::int64_t> weights_;
  std::map<Key, std::uint64_t> membership_changes_;
};

/// Composition with a non-robust candidate filter: a small side CountSketch
/// proposes O(filter_k) keys, then only those go through the monitored
/// test. The side sketch is a basic sign-alignment filter standing in for a
/// fast oblivious heavy-hitter structure.
class FastQueryVariant {
 public:
  FastQueryVariant(RobustThresholdEstimator& robust, std::uint64_t side_seed,
                   std::uint32_t side_rows, std::uint32_t filter_k)
      : robust_(robust), filter_k_(filter_k) {
    const auto& mp = robust.randomness().params();
    SketchParams side;
    side.n = mp.n;
    side.b = static_cast<std::uint32_t>(
        (robust.constants().c_a + 1.0) * static_cast<double>(mp.b));
    side.d = side.b * side_rows;
    side_rand_ = SketchRandomness::init(SketchVariant::kCountSketch, side,
                                        side_seed);
  }

  /// Candidate keys by the side filter: count-threshold on sign alignment,
  /// capped to filter_k by alignment count (ties toward smaller keys).
  std::vector<Key> candidates(const SketchState<double>& side_state) const {
    const auto& sp = side_rand_.params();
    const double ell = static_cast<double>(sp.rows());
    std::vector<std::pair<std::int64_t, Key>> scored;
    for (std::uint64_t i = 0; i < sp.n; ++i) {
      const Participation part = side_rand_.participating_buckets(i);
      std::int64_t plus = 0;
      std::int64_t minus = 0;
      for (std::size_t j = 0; j < part.size(); ++j) {
        const double prod =
            static_cast<double>(part.signs[j]) *
            side_state.counters[part.buckets[j]];
        plus += prod > 0.0 ? 1 : 0;
        minus += prod < 0.0 ? 1 : 0;
      }
      const std::int64_t score = std::max(plus, minus);
      if (static_cast<double>(score) >=
          robust_.constants().tau_m() * ell) {
        scored.emplace_back(-score, static_cast<Key>(i));
      }
    }
    std::sort(scored.begin(), scored.end());
    if (scored.size() > filter_k_) scored.resize(filter_k_);
    std::vector<Key> keys;
    keys.reserve(scored.size());
    for (const auto& [neg_score, key] : scored) keys.push_back(key);
    std::sort(keys.begin(), keys.end());
    return keys;
  }

  /// Sketch v into both structures and answer robustly on the candidates.
  std::vector<Key> query(const SparseVector& v) {
    const auto main_state = sketch_vector(robust_.randomness(), v);
    const auto side_state = sketch_vector(side_rand_, v);
    const auto cand = candidates(side_state);
    return robust_.query(main_state, std::span<const Key>(cand));
  }

  const SketchRandomness& side_randomness() const { return side_rand_; }

 private:
  RobustThresholdEstimator& robust_;
  std::uint32_t filter_k_;
  SketchRandomness side_rand_;
};

// ---------------------------------------------------------------------------
// Sequence adaptivity accounting
// ---------------------------------------------------------------------------

/// Per-key adaptivity counts: suspect-membership counts for the threshold
/// estimator, flip numbers for the stable one.
struct SequenceAccounting {
  std::map<Key, std::uint64_t> counts;

  void record(Key i, std::uint64_t by = 1) { counts[i] += by; }
};

/// lambda_Q = min { max_i lambda_i, (1/(C_a b)) sum_i lambda_i }.
inline double lambda_number(const SequenceAccounting& acct,
                            const EstimatorConstants& constants,
                            std::uint32_t b) {
  if (acct.counts.empty()) return 0.0;
  std::uint64_t max_count = 0;
  std::uint64_t sum = 0;
  for (const auto& [key, count] : acct.counts) {
    max_count = std::max(max_count, count);
    sum += count;
  }
  const double normalized = static_cast<double>(sum) /
                            (constants.c_a * static_cast<double>(b));
  return std::min(static_cast<double>(max_count), normalized);
}

/// Number of low<->high transitions of a p(v_q, i) trace, where
/// high means p >= tau_b - (2/5)(tau_b - tau_a) and low means
/// p <= tau_a + (2/5)(tau_b - tau_a); steps in between are skipped.
inline int flip_number(std::span<const double> p_trace,
                       const EstimatorConstants& constants) {
  const double lo = constants.flip_low();
  const double hi = constants.flip_high();
  int flips = 0;
  int last = 0;  // 0 unknown, -1 low, +1 high
  for (const double p : p_trace) {
    int cur = 0;
    if (p >= hi) {
      cur = 1;
    } else if (p <= lo) {
      cur = -1;
    }
    if (cur == 0) continue;
    if (last != 0 && cur != last) ++flips;
    last = cur;
  }
  return flips;
}

/// Total suspect-load per bucket: sum over keys of lambda_{Q,i} for keys
/// participating in the bucket. A bucket is useful when its load is at most
/// L; useful buckets can never be deactivated during a correct execution.
inline std::vector<double> bucket_suspect_loads(
    const SketchRandomness& rand, const SequenceAccounting& acct) {
  std::vector<double> load(rand.params().d, 0.0);
  for (const auto& [key, count] : acct.counts) {
    const Participation part = rand.participating_buckets(key);
    for (const auto bucket : part.buckets) {
      load[bucket] += static_cast<double>(count);
    }
  }
  return load;
}

/// Fraction of T_i landing on buckets with load above L.
inline double useless_fraction(const SketchRandomness& rand,
                               const std::vector<double>& loads, Key i,
                               double access_limit) {
  const Participation part = rand.participating_buckets(i);
  if (part.size() == 0) return 0.0;
  std::size_t useless = 0;
  for (const auto bucket : part.buckets) {
    useless += loads[bucket] > access_limit ? 1 : 0;
  }
  return static_cast<double>(useless) / static_cast<double>(part.size());
}

}  // namespace adasketch

#endif  // ADASKETCH_ROBUST_HPP_
