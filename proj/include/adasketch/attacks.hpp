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

#ifndef ADASKETCH_ATTACKS_HPP_
#define ADASKETCH_ATTACKS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "adasketch/estimators.hpp"
#include "adasketch/prng.hpp"
#include "adasketch/robust.hpp"
#include "adasketch/sketch.hpp"
#include "adasketch/sparse_vector.hpp"

namespace adasketch {

/// The black-box boundary between the analyst and the sketch: the attacker
/// sees nothing but the reported key set. Estimates are computed over the
/// query's support, which is what a production top-k reporter can see.
class HeavyHitterOracle {
 public:
  virtual ~HeavyHitterOracle() = default;
  virtual std::vector<Key> query(const SparseVector& v) = 0;
};

class MedianTopkOracle : public HeavyHitterOracle {
 public:
  MedianTopkOracle(const SketchRandomness& rand, std::size_t k_prime)
      : rand_(rand), k_prime_(k_prime) {}

  std::vector<Key> query(const SparseVector& v) override {
    const auto state = sketch_vector(rand_, v);
    const auto keys = v.support();
    const auto top =
        median_topk(rand_, state, k_prime_, std::span<const Key>(keys));
    std::vector<Key> out;
    out.reserve(top.size());
    for (const auto& [key, est] : top) out.push_back(key);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  const SketchRandomness& rand_;
  std::size_t k_prime_;
};

class BasicThresholdOracle : public HeavyHitterOracle {
 public:
  BasicThresholdOracle(const SketchRandomness& rand,
                       const EstimatorConstants& constants)
      : rand_(rand), constants_(constants) {}

  std::vector<Key> query(const SparseVector& v) override {
    const auto state = sketch_vector(rand_, v);
    const auto keys = v.support();
    return threshold_report(rand_, state, constants_,
                            std::span<const Key>(keys));
  }

 private:
  const SketchRandomness& rand_;
  EstimatorConstants constants_;
};

class RobustThresholdOracle : public HeavyHitterOracle {
 public:
  explicit RobustThresholdOracle(RobustThresholdEstimator& estimator)
      : estimator_(estimator) {}

  std::vector<Key> query(const SparseVector& v) override {
    const auto state = sketch_vector(estimator_.randomness(), v);
    const auto keys = v.support();
    return estimator_.query(state, std::span<const Key>(keys));
  }

 private:
  RobustThresholdEstimator& estimator_;
};

struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CalibrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Attack parameters and the fixed key layout: target h = 0, borderline
/// partner = 1 (median attack only), super-heavy keys 2..k', control key
/// k'+1, and disjoint tail supports allocated from `arena_base()` upward.
struct AttackConfig {
  double bnr_target = 1.0;
  std::uint32_t collections = 0;   // r; 0 means "until stopped"
  std::uint32_t tail_support = 3000;  // m, keys per round tail
  std::uint32_t k_prime = 10;
  std::uint32_t max_rounds = 100000;
  double borderline_weight = 0.0;  // 0: default / calibrate
  double superheavy_weight = 1e6;
  bool gaussian_tails = false;
  bool stop_at_bnr_target = false;  // needs an evaluator attached
  std::uint32_t probe_repeats = 0;  // robust attack arm repeats; 0: use ell
  std::uint64_t attacker_seed = 1;

  Key target_key() const { return 0; }
  Key partner_key() const { return 1; }
  Key control_key() const { return k_prime + 1; }
  std::vector<Key> superheavy_keys() const {
    std::vector<Key> keys;
    for (Key j = 2; j <= k_prime; ++j) keys.push_back(j);
    return keys;
  }
  std::uint64_t arena_base() const { return k_prime + 2; }
  std::uint64_t required_n(std::uint64_t tails) const {
    return arena_base() + tails * static_cast<std::uint64_t>(tail_support);
  }
};

struct RoundRecord {
  std::uint32_t round = 0;
  int collected = 0;  // +1, -1, 0 = skip
  double cum_norm2 = 0.0;
  double bnr_target_key = 0.0;   // only when an evaluator is attached
  double bnr_control_key = 0.0;
  std::uint64_t queries_used = 0;
};

struct AttackResult {
  SparseVector tail;  // a
  std::vector<RoundRecord> rounds;
  std::uint32_t collections = 0;
  std::uint64_t queries_used = 0;
  double final_bnr = 0.0;  // evaluator-only
};

/// Ground-truth probe: accumulates the attack tail's projections on the
/// tracked keys' buckets. Evaluation-only; attacks may use it to stop at a
/// target bias-to-noise ratio, never to choose what to collect.
class BnrEvaluator {
 public:
  BnrEvaluator(const SketchRandomness& rand, std::vector<Key> tracked)
      : rand_(rand) {
    for (const Key k : tracked) {
      tracked_.push_back({k, rand.participating_buckets(k),
                          std::vector<double>()});
      tracked_.back().dots.assign(tracked_.back().part.size(), 0.0);
    }
  }

  void on_collect(const SparseVector& z, int sign) {
    const auto z_state = sketch_vector(rand_, z);
    for (auto& t : tracked_) {
      for (std::size_t j = 0; j < t.part.size(); ++j) {
        t.dots[j] += sign * z_state.counters[t.part.buckets[j]];
      }
    }
    cum_norm2_ += z.norm2_squared();
  }

  /// median over T_key of <mu_t, a> mu_t[key], scaled by sqrt(||a||^2 / b).
  double bnr(Key key) const {
    const auto* t = find(key);
    if (t == nullptr || t->part.size() == 0 || cum_norm2_ <= 0.0) return 0.0;
    std::vector<double> contributions(t->part.size());
    for (std::size_t j = 0; j < t->part.size(); ++j) {
      contributions[j] = t->dots[j] * static_cast<double>(t->part.signs[j]);
    }
    const double noise = std::sqrt(
        cum_norm2_ / static_cast<double>(rand_.params().b));
    return median_of(std::move(contributions)) / noise;
  }

  double cum_norm2() const { return cum_norm2_; }

 private:
  struct Tracked {
    Key key;
    Participation part;
    std::vector<double> dots;
  };

  const Tracked* find(Key key) const {
    for (const auto& t : tracked_) {
      if (t.key == key) return &t;
    }
    return nullptr;
  }

  const SketchRandomness& rand_;
  std::vector<Tracked> tracked_;
  double cum_norm2_ = 0.0;
};

/// Offline variant of the evaluator, for a finished tail.
inline std::optional<double> measure_bnr(const SketchRandomness& rand, Key h,
                                         const SparseVector& a) {
  const Participation part = rand.participating_buckets(h);
  if (part.size() == 0) return std::nullopt;
  if (a.empty()) return 0.0;
  const auto state = sketch_vector(rand, a);
  std::vector<double> contributions(part.size());
  for (std::size_t j = 0; j < part.size(); ++j) {
    contributions[j] = state.counters[part.buckets[j]] *
                       static_cast<double>(part.signs[j]);
  }
  const double noise =
      std::sqrt(a.norm2_squared() / static_cast<double>(rand.params().b));
  return median_of(std::move(contributions)) / noise;
}

namespace detail {

class TailArena {
 public:
  TailArena(const AttackConfig& cfg, std::uint64_t seed)
      : cfg_(cfg), rng_(seed) {}

  /// Fresh random tail on the next disjoint support block.
  SparseVector next() {
    const std::uint64_t base =
        cfg_.arena_base() +
        next_block_++ * static_cast<std::uint64_t>(cfg_.tail_support);
    std::vector<SparseVector::Entry> entries;
    entries.reserve(cfg_.tail_support);
    for (std::uint32_t j = 0; j < cfg_.tail_support; ++j) {
      const double value =
          cfg_.gaussian_tails ? rng_.normal() : static_cast<double>(rng_.sign());
      entries.emplace_back(static_cast<Key>(base + j), value);
    }
    return SparseVector::from_entries(std::move(entries));
  }

  std::uint64_t blocks_used() const { return next_block_; }

 private:
  const AttackConfig& cfg_;
  Rng rng_;
  std::uint64_t next_block_ = 0;
};

inline bool reported(const std::vector<Key>& keys, Key h, std::uint64_t n) {
  bool found = false;
  for (const Key k : keys) {
    if (k >= n) throw ProtocolError("oracle reported a key outside [n]");
    found |= k == h;
  }
  return found;
}

inline void record_round(AttackResult& result, const BnrEvaluator* eval,
                         const AttackConfig& cfg, int collected,
                         std::uint32_t round) {
  RoundRecord rec;
  rec.round = round;
  rec.collected = collected;
  rec.queries_used = result.queries_used;
  rec.cum_norm2 = eval != nullptr ? eval->cum_norm2()
                                  : result.tail.norm2_squared();
  if (eval != nullptr) {
    rec.bnr_target_key = eval->bnr(cfg.target_key());
    rec.bnr_control_key = eval->bnr(cfg.control_key());
  }
  result.rounds.push_back(rec);
}

inline bool done(const AttackResult& result, const AttackConfig& cfg,
                 const BnrEvaluator* eval) {
  if (cfg.collections > 0 && result.collections >= cfg.collections) {
    return true;
  }
  if (cfg.stop_at_bnr_target && eval != nullptr &&
      eval->bnr(cfg.target_key()) >= cfg.bnr_target) {
    return true;
  }
  return cfg.collections == 0 && !cfg.stop_at_bnr_target;
}

}  // namespace detail

/// Attack on the median top-k' estimator. Every round queries the fixed
/// super-heavy set, the two equal borderline keys, and a fresh random tail;
/// the tail (or its negation, when h goes unreported) is collected, so the
/// accumulated tail aligns positively with h's buckets.
inline AttackResult attack_median(HeavyHitterOracle& oracle,
                                  const AttackConfig& cfg,
                                  BnrEvaluator* eval = nullptr,
                                  std::uint64_t n_bound = ~std::uint64_t{0}) {
  AttackResult result;
  const double w_border =
      cfg.borderline_weight > 0.0
          ? cfg.borderline_weight
          : 5.0 * std::sqrt(static_cast<double>(cfg.tail_support));
  SparseVector base;
  base.set(cfg.target_key(), w_border);
  base.set(cfg.partner_key(), w_border);
  for (const Key j : cfg.superheavy_keys()) base.set(j, cfg.superheavy_weight);

  detail::TailArena arena(cfg, cfg.attacker_seed);
  for (std::uint32_t round = 0; round < cfg.max_rounds; ++round) {
    if (detail::done(result, cfg, eval)) break;
    const SparseVector z = arena.next();
    const auto answer = oracle.query(base.plus(z));
    ++result.queries_used;
    const int sign =
        detail::reported(answer, cfg.target_key(), n_bound) ? +1 : -1;
    result.tail = result.tail.plus(z, sign);
    ++result.collections;
    if (eval != nullptr) eval->on_collect(z, sign);
    detail::record_round(result, eval, cfg, sign, round);
  }
  if (eval != nullptr) result.final_bnr = eval->bnr(cfg.target_key());
  return result;
}

/// Attack on the basic threshold sign-alignment estimator: H = {h}; each
/// round queries w e_h + z and w e_h - z and collects the variant under
/// which h was reported, when it was reported exactly once.
inline AttackResult attack_basic_sign(HeavyHitterOracle& oracle,
                                      const AttackConfig& cfg,
                                      double borderline_weight,
                                      BnrEvaluator* eval = nullptr,
                                      std::uint64_t n_bound = ~std::uint64_t{0}) {
  AttackResult result;
  SparseVector base;
  base.set(cfg.target_key(), borderline_weight);

  detail::TailArena arena(cfg, cfg.attacker_seed);
  for (std::uint32_t round = 0; round < cfg.max_rounds; ++round) {
    if (detail::done(result, cfg, eval)) break;
    const SparseVector z = arena.next();
    const bool plus =
        detail::reported(oracle.query(base.plus(z)), cfg.target_key(),
                         n_bound);
    const bool minus =
        detail::reported(oracle.query(base.plus(z, -1.0)), cfg.target_key(),
                         n_bound);
    result.queries_used += 2;
    int collected = 0;
    if (plus != minus) {
      collected = plus ? +1 : -1;
      result.tail = result.tail.plus(z, collected);
      ++result.collections;
      if (eval != nullptr) eval->on_collect(z, collected);
    }
    detail::record_round(result, eval, cfg, collected, round);
  }
  if (eval != nullptr) result.final_bnr = eval->bnr(cfg.target_key());
  return result;
}

/// Attack on the robust (noisy) estimator: reporting is probabilistic, so
/// each arm is probed repeatedly and the one with the higher empirical
/// reporting rate is collected. O(ell) queries per collection event.
inline AttackResult attack_robust(HeavyHitterOracle& oracle,
                                  const AttackConfig& cfg,
                                  double borderline_weight,
                                  std::uint32_t ell,
                                  BnrEvaluator* eval = nullptr,
                                  std::uint64_t n_bound = ~std::uint64_t{0}) {
  AttackResult result;
  SparseVector base;
  base.set(cfg.target_key(), borderline_weight);
  const std::uint32_t repeats =
      cfg.probe_repeats > 0 ? cfg.probe_repeats : ell;

  detail::TailArena arena(cfg, cfg.attacker_seed);
  for (std::uint32_t round = 0; round < cfg.max_rounds; ++round) {
    if (detail::done(result, cfg, eval)) break;
    const SparseVector z = arena.next();
    const SparseVector vp = base.plus(z);
    const SparseVector vm = base.plus(z, -1.0);
    std::uint32_t hits_plus = 0;
    std::uint32_t hits_minus = 0;
    for (std::uint32_t rep = 0; rep < repeats; ++rep) {
      hits_plus += detail::reported(oracle.query(vp), cfg.target_key(),
                                    n_bound)
                       ? 1
                       : 0;
      hits_minus += detail::reported(oracle.query(vm), cfg.target_key(),
                                     n_bound)
                        ? 1
                        : 0;
    }
    result.queries_used += 2 * repeats;
    int collected = 0;
    if (hits_plus != hits_minus) {
      collected = hits_plus > hits_minus ? +1 : -1;
      result.tail = result.tail.plus(z, collected);
      ++result.collections;
      if (eval != nullptr) eval->on_collect(z, collected);
    }
    detail::record_round(result, eval, cfg, collected, round);
  }
  if (eval != nullptr) result.final_bnr = eval->bnr(cfg.target_key());
  return result;
}

/// Finds a weight for h at which the oracle reports it with borderline
/// frequency (50-probe estimate inside [0.25, 0.75]). Doubles up from a
/// noise-scale initial guess, then bisects; at most 30 probe batches.
inline double calibrate_borderline(HeavyHitterOracle& oracle,
                                   const AttackConfig& cfg,
                                   std::uint64_t n_bound = ~std::uint64_t{0}) {
  detail::TailArena arena(cfg, derive_seed(cfg.attacker_seed, 0xca11));
  const int kProbes = 50;
  auto frequency = [&](double w) {
    SparseVector base;
    base.set(cfg.target_key(), w);
    int hits = 0;
    for (int p = 0; p < kProbes; ++p) {
      const auto answer = oracle.query(base.plus(arena.next()));
      hits += detail::reported(answer, cfg.target_key(), n_bound) ? 1 : 0;
    }
    return static_cast<double>(hits) / kProbes;
  };

  double lo = 0.0;
  double hi = std::sqrt(static_cast<double>(cfg.tail_support));
  int iterations = 0;
  double f = frequency(hi);
  ++iterations;
  if (f >= 0.25 && f <= 0.75) return hi;
  while (f < 0.75) {
    lo = hi;
    hi *= 2.0;
    if (++iterations > 30) {
      throw CalibrationError("borderline weight search failed (growth)");
    }
    f = frequency(hi);
    if (f >= 0.25 && f <= 0.75) return hi;
  }
  for (;;) {
    const double mid = 0.5 * (lo + hi);
    if (++iterations > 30) {
      throw CalibrationError("borderline weight search failed (bisection)");
    }
    f = frequency(mid);
    if (f >= 0.25 && f <= 0.75) return mid;
    (f < 0.25 ? lo : hi) = mid;
  }
}

enum class FinalVectorMode { kMaskHeavy, kFakeHeavy };

/// Super-heavy set re-added with swapped roles in the median attack's
/// final query: h becomes the lone super-heavy key and these keys turn
/// "largish".
struct MedianFinalRoles {
  std::vector<Key> largish_keys;
  double largish_weight = 0.0;
};

/// The vector the game ends on. The collected tail aligns positively with
/// h's buckets, so masking h subtracts the tail (the accumulated bias
/// cancels w) while faking h presents the tail alone.
inline SparseVector build_final_vector(const SparseVector& a, Key h, double w,
                                       FinalVectorMode mode,
                                       const MedianFinalRoles* roles = nullptr) {
  SparseVector v;
  if (mode == FinalVectorMode::kMaskHeavy) {
    v = SparseVector::unit(h, w).plus(a, -1.0);
  } else {
    v = a;
  }
  if (roles != nullptr) {
    for (const Key k : roles->largish_keys) {
      v.set(k, roles->largish_weight);
    }
  }
  return v;
}

}  // namespace adasketch

#endif  // ADASKETCH_ATTACKS_HPP_
