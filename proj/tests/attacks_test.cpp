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

#include "adasketch/attacks.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <deque>
#include <vector>

#include "adasketch/prng.hpp"

namespace adasketch {
namespace {

SketchParams params(std::uint64_t n, std::uint32_t d, std::uint32_t b) {
  SketchParams p;
  p.n = n;
  p.d = d;
  p.b = b;
  return p;
}

TEST(OracleInterface, FreshMedianReportsPureKey) {
  int reported = 0;
  for (int seed = 0; seed < 100; ++seed) {
    const auto rand = SketchRandomness::init(SketchVariant::kCountSketch,
                                             params(1000, 750, 30), seed);
    MedianTopkOracle oracle(rand, 10);
    SparseVector v = SparseVector::unit(17, 9.0);
    for (Key k = 100; k < 140; ++k) v.set(k, 1.0);
    const auto out = oracle.query(v);
    for (const Key k : out) reported += k == 17 ? 1 : 0;
  }
  EXPECT_GE(reported, 99);
}

TEST(OracleInterface, NonRobustOraclesAreDeterministic) {
  const auto rand = SketchRandomness::init(SketchVariant::kCountSketch,
                                           params(1000, 750, 30), 5);
  MedianTopkOracle oracle(rand, 5);
  SparseVector v;
  Rng rng(3);
  for (int j = 0; j < 50; ++j) {
    v.set(static_cast<Key>(rng.below(1000)), rng.uniform() * 10);
  }
  EXPECT_EQ(oracle.query(v), oracle.query(v));
}

TEST(AttackMedian, ZeroCollectionsGiveEmptyTail) {
  const auto rand = SketchRandomness::init(SketchVariant::kCountSketch,
                                           params(100000, 480, 30), 1);
  MedianTopkOracle oracle(rand, 10);
  AttackConfig cfg;
  cfg.collections = 0;
  cfg.tail_support = 300;
  const auto result = attack_median(oracle, cfg);
  EXPECT_TRUE(result.tail.empty());
  EXPECT_EQ(result.collections, 0u);
  EXPECT_EQ(result.queries_used, 0u);
}

TEST(AttackMedian, TailNormAndQueriesExact) {
  const auto rand = SketchRandomness::init(SketchVariant::kCountSketch,
                                           params(100000, 480, 30), 2);
  MedianTopkOracle oracle(rand, 10);
  AttackConfig cfg;
  cfg.collections = 40;
  cfg.tail_support = 300;
  cfg.attacker_seed = 9;
  const auto result = attack_median(oracle, cfg);
  EXPECT_EQ(result.collections, 40u);
  EXPECT_EQ(result.queries_used, 40u);  // one query per collection
  // ||a||_2^2 = r * m exactly
  EXPECT_DOUBLE_EQ(result.tail.norm2_squared(), 40.0 * 300.0);
  EXPECT_EQ(result.tail.support_size(), 40u * 300u);
  EXPECT_EQ(result.tail.value(cfg.target_key()), 0.0);
}

TEST(AttackMedian, BiasGrowsAndControlStaysFlat) {
  // Small instance of the bias accumulation law: the attack reaches
  // bias-to-noise ratio 1 within a small multiple of ell rounds while the
  // control key hovers near zero. b stays well above k' so the super-heavy
  // keys rarely collide (the regime the attack needs).
  const std::uint32_t ell = 25;
  const auto rand = SketchRandomness::init(SketchVariant::kCountSketch,
                                           params(800000, ell * 30, 30), 3);
  MedianTopkOracle oracle(rand, 10);
  AttackConfig cfg;
  cfg.collections = 0;
  cfg.stop_at_bnr_target = true;
  cfg.bnr_target = 1.0;
  cfg.max_rounds = 30 * ell;
  cfg.tail_support = 900;
  cfg.attacker_seed = 4;
  BnrEvaluator eval(rand, {cfg.target_key(), cfg.control_key()});
  const auto result = attack_median(oracle, cfg, &eval);
  EXPECT_GE(result.final_bnr, 1.0);
  EXPECT_LT(result.rounds.size(), cfg.max_rounds);
  EXPECT_LE(std::fabs(eval.bnr(cfg.control_key())), 0.6);
  // growth: the final BNR clearly above the early-round level
  const double early = result.rounds[ell].bnr_target_key;
  EXPECT_GT(result.final_bnr, early + 0.2);
}

TEST(AttackMedian, TranscriptIsPureFunctionOfOracleAnswers) {
  // Record answers from a live oracle, then replay them through a canned
  // oracle: the attacker must produce the identical transcript.
  class RecordingOracle : public HeavyHitterOracle {
   public:
    RecordingOracle(HeavyHitterOracle& inner) : inner_(inner) {}
    std::vector<Key> query(const SparseVector& v) override {
      auto out = inner_.query(v);
      answers.push_back(out);
      return out;
    }
    HeavyHitterOracle& inner_;
    std::vector<std::vector<Key>> answers;
  };
  class ReplayOracle : public HeavyHitterOracle {
   public:
    explicit ReplayOracle(std::deque<std::vector<Key>> answers)
        : answers_(std::move(answers)) {}
    std::vector<Key> query(const SparseVector&) override {
      auto out = answers_.front();
      answers_.pop_front();
      return out;
    }
    std::deque<std::vector<Key>> answers_;
  };

  const auto rand = SketchRandomness::init(SketchVariant::kCountSketch,
                                           params(100000, 320, 10), 6);
  MedianTopkOracle median(rand, 10);
  RecordingOracle recorder(median);
  AttackConfig cfg;
  cfg.collections = 30;
  cfg.tail_support = 300;
  cfg.attacker_seed = 11;
  const auto live = attack_median(recorder, cfg);

  ReplayOracle replay(
      std::deque<std::vector<Key>>(recorder.answers.begin(),
                                   recorder.answers.end()));
  const auto replayed = attack_median(replay, cfg);
  ASSERT_EQ(live.rounds.size(), replayed.rounds.size());
  for (std::size_t q = 0; q < live.rounds.size(); ++q) {
    EXPECT_EQ(live.rounds[q].collected, replayed.rounds[q].collected);
  }
  EXPECT_TRUE(live.tail == replayed.tail);
}

TEST(AttackMedian, MalformedOracleAnswerIsProtocolError) {
  class BadOracle : public HeavyHitterOracle {
   public:
    std::vector<Key> query(const SparseVector&) override {
      return {4294967295u};
    }
  };
  BadOracle oracle;
  AttackConfig cfg;
  cfg.collections = 1;
  cfg.tail_support = 10;
  EXPECT_THROW(attack_median(oracle, cfg, nullptr, /*n_bound=*/100000),
               ProtocolError);
}

TEST(AttackBasicSign, SymmetricRoundsSkipAndBudgetIsTwoPerRound) {
  const auto constants = EstimatorConstants::relaxed();
  const auto sp = params(100000, 640, 10);
  const auto rand =
      SketchRandomness::init(SketchVariant::kBCountSketch, sp, 8);
  BasicThresholdOracle oracle(rand, constants);
  AttackConfig cfg;
  cfg.collections = 25;
  cfg.tail_support = 300;
  cfg.max_rounds = 4000;
  cfg.attacker_seed = 13;
  const double w = calibrate_borderline(oracle, cfg);
  const auto result = attack_basic_sign(oracle, cfg, w);
  EXPECT_EQ(result.collections, 25u);
  EXPECT_EQ(result.queries_used, 2 * result.rounds.size());
  // Collected tails carry +-1 decisions; skipped rounds carry 0.
  std::uint32_t collected = 0;
  for (const auto& rec : result.rounds) {
    collected += rec.collected != 0 ? 1 : 0;
  }
  EXPECT_EQ(collected, 25u);
  EXPECT_DOUBLE_EQ(result.tail.norm2_squared(), 25.0 * 300.0);
}

TEST(CalibrateBorderline, FindsBorderlineWeight) {
  const auto constants = EstimatorConstants::relaxed();
  const auto sp = params(100000, 640, 10);
  const auto rand =
      SketchRandomness::init(SketchVariant::kBCountSketch, sp, 9);
  BasicThresholdOracle oracle(rand, constants);
  AttackConfig cfg;
  cfg.tail_support = 300;
  cfg.attacker_seed = 21;
  const double w = calibrate_borderline(oracle, cfg);

  // Validation on fresh probes: the returned weight reproduces a
  // borderline frequency.
  detail::TailArena arena(cfg, 777);
  SparseVector base = SparseVector::unit(cfg.target_key(), w);
  int hits = 0;
  for (int probe = 0; probe < 100; ++probe) {
    const auto out = oracle.query(base.plus(arena.next()));
    for (const Key k : out) hits += k == cfg.target_key() ? 1 : 0;
  }
  EXPECT_GE(hits, 15);
  EXPECT_LE(hits, 85);

  // Zero weight is never reported.
  SparseVector zero_base;
  int zero_hits = 0;
  for (int probe = 0; probe < 50; ++probe) {
    const auto out = oracle.query(zero_base.plus(arena.next()));
    for (const Key k : out) zero_hits += k == cfg.target_key() ? 1 : 0;
  }
  EXPECT_EQ(zero_hits, 0);
}

TEST(AttackRobust, ArmChoiceMatchesBinomialOracle) {
  // Exact arithmetic oracle: X ~ Bin(n, 1/2 + g/2), Y ~ Bin(n, 1/2 - g/2)
  // with g = 2/sqrt(n); P(X > Y) must be >= 0.6, and the subroutine's
  // empirical pick rate must match it.
  const std::uint32_t n = 64;
  const double gap = 2.0 / std::sqrt(static_cast<double>(n));
  const double p1 = 0.5 + gap / 2.0;
  const double p2 = 0.5 - gap / 2.0;

  auto binom_pmf = [](std::uint32_t n_, double p) {
    std::vector<double> pmf(n_ + 1, 0.0);
    pmf[0] = 1.0;
    for (std::uint32_t trial = 0; trial < n_; ++trial) {
      for (std::uint32_t k = trial + 1; k-- > 0;) {
        pmf[k + 1] += pmf[k] * p;
        pmf[k] *= 1.0 - p;
      }
    }
    return pmf;
  };
  const auto pmf1 = binom_pmf(n, p1);
  const auto pmf2 = binom_pmf(n, p2);
  double p_correct = 0.0;
  for (std::uint32_t x = 0; x <= n; ++x) {
    double below = 0.0;
    for (std::uint32_t y = 0; y < x; ++y) below += pmf2[y];
    p_correct += pmf1[x] * below;
  }
  EXPECT_GE(p_correct, 0.6);

  // Simulate the subroutine against synthetic Bernoulli arms.
  Rng rng(31);
  int correct = 0;
  const int kRounds = 4000;
  for (int round = 0; round < kRounds; ++round) {
    std::uint32_t hits_plus = 0;
    std::uint32_t hits_minus = 0;
    for (std::uint32_t rep = 0; rep < n; ++rep) {
      hits_plus += rng.uniform() < p1 ? 1 : 0;
      hits_minus += rng.uniform() < p2 ? 1 : 0;
    }
    correct += hits_plus > hits_minus ? 1 : 0;
  }
  const double freq = static_cast<double>(correct) / kRounds;
  const double se = std::sqrt(p_correct * (1 - p_correct) / kRounds);
  EXPECT_NEAR(freq, p_correct, 5 * se);
}

TEST(AttackRobust, QueryBudgetPerCollectionBounded) {
  const auto constants = EstimatorConstants::relaxed();
  const std::uint32_t ell = 32;
  const auto sp = params(100000, ell * 10, 10);
  const auto rand =
      SketchRandomness::init(SketchVariant::kBCountSketch, sp, 10);
  RobustParams rp;
  rp.access_limit = 50000;
  rp.query_bound = 100000;
  rp.c1 = 300.0;  // noise comparable to the count gap
  RobustThresholdEstimator est(rand, constants, rp,
                               dp::NoiseSource::seeded(55));
  RobustThresholdOracle oracle(est);
  AttackConfig cfg;
  cfg.collections = 10;
  cfg.tail_support = 300;
  cfg.max_rounds = 200;
  cfg.attacker_seed = 17;
  const double w = calibrate_borderline(oracle, cfg);
  const auto result = attack_robust(oracle, cfg, w, ell);
  ASSERT_GE(result.collections, 1u);
  // Transcript audit: total budget stays within c * ell per collection,
  // c <= 20 (excluding the calibration probes).
  EXPECT_LE(result.queries_used,
            20ull * ell * std::max<std::uint64_t>(result.collections, 1));
}

TEST(FinalVector, EmptyTailIsPlainHeavyKeyAndGetsReported) {
  const auto rand = SketchRandomness::init(SketchVariant::kCountSketch,
                                           params(100000, 480, 30), 12);
  const auto v =
      build_final_vector(SparseVector{}, 0, 50.0, FinalVectorMode::kMaskHeavy);
  EXPECT_EQ(v.support_size(), 1u);
  EXPECT_EQ(v.value(0), 50.0);
  MedianTopkOracle oracle(rand, 10);
  const auto out = oracle.query(v);
  EXPECT_TRUE(std::find(out.begin(), out.end(), 0u) != out.end());
}

TEST(FinalVector, TailStatisticsOnFreshRandomness) {
  // On fresh randomness the attack tail is just noise: per-bucket mean 0
  // and variance r m / b.
  const std::uint32_t b = 10;
  const std::uint32_t d = 3000;
  AttackConfig cfg;
  cfg.tail_support = 300;
  Rng values(3);
  SparseVector a;
  const std::uint32_t r = 24;
  for (std::uint32_t block = 0; block < r; ++block) {
    for (std::uint32_t j = 0; j < cfg.tail_support; ++j) {
      a.set(static_cast<Key>(cfg.arena_base() + block * cfg.tail_support + j),
            values.sign());
    }
  }
  const double rm = static_cast<double>(r) * cfg.tail_support;
  ASSERT_DOUBLE_EQ(a.norm2_squared(), rm);

  const auto fresh = SketchRandomness::init(SketchVariant::kBCountSketch,
                                            params(100000, d, b), 99);
  const auto state = sketch_vector(fresh, a);
  double sum = 0.0;
  double sumsq = 0.0;
  for (const double c : state.counters) {
    sum += c;
    sumsq += c * c;
  }
  const double mean = sum / d;
  const double var = sumsq / d - mean * mean;
  const double expected_var = rm / b;
  // mean: se = sqrt(var/d)
  EXPECT_NEAR(mean, 0.0, 5.0 * std::sqrt(expected_var / d));
  EXPECT_NEAR(var, expected_var, 0.1 * expected_var);
}

TEST(MeasureBnr, ZeroAndIndependentTails) {
  const auto rand = SketchRandomness::init(SketchVariant::kCountSketch,
                                           params(100000, 1000, 10), 14);
  EXPECT_EQ(measure_bnr(rand, 0, SparseVector{}).value(), 0.0);

  // Independent random tail: BNR concentrates near 0 at scale 1/sqrt(ell).
  Rng values(8);
  SparseVector a;
  for (Key k = 100; k < 6100; ++k) a.set(k, values.sign());
  const double ell = 100.0;
  const auto bnr = measure_bnr(rand, 0, a);
  ASSERT_TRUE(bnr.has_value());
  EXPECT_LE(std::fabs(*bnr), 5.0 * 1.3 / std::sqrt(ell));
}

TEST(MeasureBnr, AttackedTailSatisfiesAlignmentInequality) {
  // Run a short median attack, then check most of T_h satisfies
  // <mu_t, a> mu_t[h] >= BNR_measured * sqrt(rm/b).
  const std::uint32_t ell = 16;
  const std::uint32_t b = 30;
  const auto rand = SketchRandomness::init(SketchVariant::kCountSketch,
                                           params(400000, ell * b, b), 15);
  MedianTopkOracle oracle(rand, 10);
  AttackConfig cfg;
  cfg.collections = 12 * ell;
  cfg.tail_support = 900;
  cfg.attacker_seed = 5;
  const auto result = attack_median(oracle, cfg);
  const auto bnr = measure_bnr(rand, cfg.target_key(), result.tail);
  ASSERT_TRUE(bnr.has_value());
  ASSERT_GT(*bnr, 0.0);

  const auto part = rand.participating_buckets(cfg.target_key());
  const auto state = sketch_vector(rand, result.tail);
  const double threshold =
      *bnr * std::sqrt(result.tail.norm2_squared() / b);
  std::size_t above = 0;
  for (std::size_t j = 0; j < part.size(); ++j) {
    const double contribution = state.counters[part.buckets[j]] *
                                static_cast<double>(part.signs[j]);
    above += contribution >= threshold ? 1 : 0;
  }
  EXPECT_GE(above, part.size() / 2);  // median definition
}

}  // namespace
}  // namespace adasketch
