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

#include "adasketch/hashing.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <vector>

#include "adasketch/prng.hpp"
#include "support/stats.hpp"

namespace adasketch {
namespace {

TEST(Hashing, DeterministicUnderSeed) {
  HashFamilySpec spec;
  spec.independence = 3;
  const HashFunction h1 = make_hash(spec, 42);
  const HashFunction h2 = make_hash(spec, 42);
  EXPECT_EQ(h1.raw(7), h1.raw(7));
  EXPECT_EQ(h1.raw(7), h2.raw(7));
  EXPECT_EQ(h1.eval_sign(7), h2.eval_sign(7));
  EXPECT_EQ(h1.eval_selector(7, 16), h2.eval_selector(7, 16));

  spec.mode = HashMode::kFullyRandom;
  const HashFunction f1 = make_hash(spec, 42);
  const HashFunction f2 = make_hash(spec, 42);
  EXPECT_EQ(f1.raw(123456), f2.raw(123456));
}

TEST(Hashing, PairwiseCollisionRate) {
  // Empirical collision probability of a pairwise family on a range of b
  // should be 1/b within Monte Carlo error.
  HashFamilySpec spec;
  spec.independence = 2;
  const std::uint64_t b = 64;
  const int kPairs = 1000000;
  Rng rng(7);
  std::uint64_t collisions = 0;
  const HashFunction h = make_hash(spec, 99);
  for (int i = 0; i < kPairs; ++i) {
    const std::uint64_t x = rng.below(std::uint64_t{1} << 32);
    std::uint64_t y = rng.below(std::uint64_t{1} << 32);
    while (y == x) y = rng.below(std::uint64_t{1} << 32);
    collisions += h.eval_range(x, b) == h.eval_range(y, b) ? 1 : 0;
  }
  const double p = 1.0 / static_cast<double>(b);
  const double rate = static_cast<double>(collisions) / kPairs;
  const double se = std::sqrt(p * (1 - p) / kPairs);
  EXPECT_NEAR(rate, p, 5 * se);
}

TEST(Hashing, FullyRandomUniformChiSquare) {
  HashFamilySpec spec;
  spec.mode = HashMode::kFullyRandom;
  const HashFunction h = make_hash(spec, 1);
  const std::uint64_t kRange = 100;
  const int kSamples = 100000;
  std::vector<std::uint64_t> counts(kRange, 0);
  for (int key = 1; key <= kSamples; ++key) {
    ++counts[h.eval_range(static_cast<std::uint64_t>(key), kRange)];
  }
  EXPECT_GT(teststats::chi_square_uniform_pvalue(counts, kSamples), 0.001);
}

TEST(Hashing, SelectorMarginal) {
  HashFamilySpec spec;
  spec.independence = 3;
  const HashFunction h = make_hash(spec, 5);
  // b = 1: always on.
  for (std::uint64_t key = 0; key < 100; ++key) {
    EXPECT_EQ(h.eval_selector(key, 1), 1);
  }
  EXPECT_THROW(h.eval_selector(3, 0), std::invalid_argument);

  const std::uint64_t b = 16;
  const int kKeys = 1000000;
  std::uint64_t ones = 0;
  for (int key = 0; key < kKeys; ++key) {
    ones += h.eval_selector(static_cast<std::uint64_t>(key), b);
  }
  const double p = 1.0 / static_cast<double>(b);
  const double se = std::sqrt(p * (1 - p) / kKeys);
  EXPECT_NEAR(static_cast<double>(ones) / kKeys, p, 5 * se);
}

TEST(Hashing, SignBalance) {
  HashFamilySpec spec;
  spec.independence = 5;
  const HashFunction s = make_hash(spec, 11);
  const int kKeys = 1000000;
  std::int64_t sum = 0;
  for (int key = 0; key < kKeys; ++key) {
    sum += s.eval_sign(static_cast<std::uint64_t>(key));
  }
  const double se = 1.0 / std::sqrt(static_cast<double>(kKeys));
  EXPECT_NEAR(static_cast<double>(sum) / kKeys, 0.0, 5 * se);
}

TEST(Hashing, FourWiseProductUnbiasedOverSeeds) {
  // For a 5-wise family the product of four distinct signs has expectation 0
  // over the seed draw.
  HashFamilySpec spec;
  spec.independence = 5;
  const int kSeeds = 100000;
  std::int64_t sum = 0;
  for (int seed = 0; seed < kSeeds; ++seed) {
    const HashFunction s = make_hash(spec, derive_seed(123, seed));
    sum += s.eval_sign(2) * s.eval_sign(3) * s.eval_sign(5) * s.eval_sign(9);
  }
  const double se = 1.0 / std::sqrt(static_cast<double>(kSeeds));
  EXPECT_NEAR(static_cast<double>(sum) / kSeeds, 0.0, 5 * se);
}

TEST(Hashing, ExhaustivePairwiseUniformitySmallPrime) {
  // With P = 17 and k = 2, enumerating all coefficient pairs must hit every
  // output pair for two fixed distinct keys exactly once.
  HashFamilySpec spec;
  spec.independence = 2;
  spec.prime = 17;
  spec.domain_bits = 4;
  std::map<std::pair<std::uint64_t, std::uint64_t>, int> joint;
  for (std::uint64_t a0 = 0; a0 < 17; ++a0) {
    for (std::uint64_t a1 = 0; a1 < 17; ++a1) {
      const HashFunction h(spec, {a0, a1});
      ++joint[{h.raw(3), h.raw(12)}];
    }
  }
  ASSERT_EQ(joint.size(), 17u * 17u);
  for (const auto& [pair, count] : joint) EXPECT_EQ(count, 1);
}

TEST(Hashing, ModesShareInterface) {
  // Fully-random and polynomial functions answer the same calls with the
  // same output ranges.
  for (const auto mode : {HashMode::kPolynomial, HashMode::kFullyRandom}) {
    HashFamilySpec spec;
    spec.independence = 3;
    spec.mode = mode;
    const HashFunction h = make_hash(spec, 77);
    for (std::uint64_t key = 0; key < 1000; ++key) {
      EXPECT_LT(h.raw(key), spec.prime);
      const int sel = h.eval_selector(key, 8);
      EXPECT_TRUE(sel == 0 || sel == 1);
      const int sg = h.eval_sign(key);
      EXPECT_TRUE(sg == -1 || sg == 1);
    }
  }
}

TEST(Hashing, RejectsBadSpecs) {
  HashFamilySpec spec;
  spec.independence = 1;
  EXPECT_THROW(make_hash(spec, 1), std::invalid_argument);
}

TEST(Prng, LaplaceInverseCdf) {
  EXPECT_DOUBLE_EQ(Rng::laplace_icdf(0.5, 3.0), 0.0);
  // Quartiles of Laplace(0, s) sit at -/+ s ln 2.
  EXPECT_NEAR(Rng::laplace_icdf(0.25, 1.0), -std::log(2.0), 1e-12);
  EXPECT_NEAR(Rng::laplace_icdf(0.75, 1.0), std::log(2.0), 1e-12);
}

TEST(Prng, BelowIsUniformish) {
  Rng rng(3);
  std::vector<std::uint64_t> counts(7, 0);
  const int kDraws = 700000;
  for (int i = 0; i < kDraws; ++i) ++counts[rng.below(7)];
  EXPECT_GT(teststats::chi_square_uniform_pvalue(counts, kDraws), 0.001);
}

}  // namespace
}  // namespace adasketch
