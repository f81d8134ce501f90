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

#ifndef ADASKETCH_SKETCH_HPP_
#define ADASKETCH_SKETCH_HPP_

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "adasketch/hashing.hpp"
#include "adasketch/prng.hpp"
#include "adasketch/sparse_vector.hpp"

namespace adasketch {

enum class SketchVariant : std::uint32_t {
  kCountSketch = 0,
  kBCountSketch = 1,
};

/// (n, d, b): input dimension, number of bucket counters, width. For
/// CountSketch the d counters form d/b rows of b buckets each, so b must
/// divide d.
struct SketchParams {
  std::uint64_t n = 0;
  std::uint32_t d = 0;
  std::uint32_t b = 0;

  std::uint32_t rows() const { return d / b; }  // ell = d/b

  void validate(SketchVariant variant) const {
    if (n < 1) throw std::invalid_argument("SketchParams: n must be >= 1");
    if (b < 1 || d < b) {
      throw std::invalid_argument("SketchParams: need 1 <= b <= d");
    }
    if (variant == SketchVariant::kCountSketch && d % b != 0) {
      throw std::invalid_argument(
          "SketchParams: b must divide d for CountSketch");
    }
  }
};

/// T_i: the buckets a key participates in, with the key's sign in each.
/// Buckets are listed in increasing order.
struct Participation {
  std::vector<std::uint32_t> buckets;
  std::vector<std::int8_t> signs;

  std::size_t size() const { return buckets.size(); }
};

/// The measurement-vector ensemble (mu_t) for one sketch instance. The
/// per-row (CountSketch) or per-bucket (BCountSketch) hash pairs are stored
/// as flat coefficient arrays; one init allocates everything. Immutable
/// after init and safe to share across threads.
class SketchRandomness {
 public:
  /// CountSketch: d/b (h_r, s_r) pairs; BCountSketch: d (h_t, s_t) pairs.
  /// Hash degrees default to pairwise/pairwise for CountSketch and
  /// 3-wise/5-wise for BCountSketch; pass nonzero values to override.
  static SketchRandomness init(SketchVariant variant, SketchParams params,
                               std::uint64_t seed, int selector_degree = 0,
                               int sign_degree = 0,
                               HashMode mode = HashMode::kPolynomial) {
    params.validate(variant);
    SketchRandomness r;
    r.variant_ = variant;
    r.params_ = params;
    r.master_seed_ = seed;
    r.mode_ = mode;
    const bool bcs = variant == SketchVariant::kBCountSketch;
    if (selector_degree == 0) selector_degree = bcs ? 3 : 2;
    if (sign_degree == 0) sign_degree = bcs ? 5 : 2;
    if (selector_degree < 2 || sign_degree < 2) {
      throw std::invalid_argument("init_sketch: hash degrees must be >= 2");
    }
    r.h_degree_ = selector_degree;
    r.s_degree_ = sign_degree;
    const std::uint32_t count = bcs ? params.d : params.rows();
    if (mode == HashMode::kPolynomial) {
      r.h_coeffs_.resize(static_cast<std::size_t>(count) * r.h_degree_);
      r.s_coeffs_.resize(static_cast<std::size_t>(count) * r.s_degree_);
      for (std::uint32_t t = 0; t < count; ++t) {
        std::uint64_t hs = splitmix64(derive_seed(seed, 2 * t));
        for (int j = 0; j < r.h_degree_; ++j) {
          r.h_coeffs_[static_cast<std::size_t>(t) * r.h_degree_ + j] =
              detail::bounded_from_stream(hs, kMersenne61);
        }
        std::uint64_t ss = splitmix64(derive_seed(seed, 2 * t + 1));
        for (int j = 0; j < r.s_degree_; ++j) {
          r.s_coeffs_[static_cast<std::size_t>(t) * r.s_degree_ + j] =
              detail::bounded_from_stream(ss, kMersenne61);
        }
      }
    }
    r.id_ = splitmix64(seed ^ splitmix64(params.n) ^
                       splitmix64((std::uint64_t{params.d} << 32) | params.b) ^
                       static_cast<std::uint64_t>(variant));
    return r;
  }

  /// mu_t[i] in {-1, 0, +1}.
  int measurement_entry(std::uint32_t t, std::uint64_t i) const {
    check_key(i);
    if (t >= params_.d) {
      throw std::invalid_argument("measurement_entry: bucket out of range");
    }
    if (variant_ == SketchVariant::kCountSketch) {
      const std::uint32_t row = t / params_.b;
      const std::uint32_t slot = t % params_.b;
      if (selector_raw(row, i) % params_.b != slot) return 0;
      return sign_at(row, i);
    }
    if (selector_raw(t, i) % params_.b != 0) return 0;
    return sign_at(t, i);
  }

  /// T_i in increasing bucket order. |T_i| = d/b exactly for CountSketch.
  Participation participating_buckets(std::uint64_t i) const {
    check_key(i);
    Participation p;
    if (variant_ == SketchVariant::kCountSketch) {
      const std::uint32_t ell = params_.rows();
      p.buckets.reserve(ell);
      p.signs.reserve(ell);
      for (std::uint32_t r = 0; r < ell; ++r) {
        p.buckets.push_back(r * params_.b + static_cast<std::uint32_t>(
                                                selector_raw(r, i) % params_.b));
        p.signs.push_back(static_cast<std::int8_t>(sign_at(r, i)));
      }
    } else {
      for (std::uint32_t t = 0; t < params_.d; ++t) {
        if (selector_raw(t, i) % params_.b == 0) {
          p.buckets.push_back(t);
          p.signs.push_back(static_cast<std::int8_t>(sign_at(t, i)));
        }
      }
    }
    return p;
  }

  SketchVariant variant() const { return variant_; }
  const SketchParams& params() const { return params_; }
  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t id() const { return id_; }

 private:
  std::uint64_t selector_raw(std::uint32_t t, std::uint64_t i) const {
    if (mode_ == HashMode::kFullyRandom) {
      return detail::keyed_mix(derive_seed(master_seed_, 2 * t), i) %
             kMersenne61;
    }
    return detail::poly_eval(&h_coeffs_[static_cast<std::size_t>(t) * h_degree_],
                             h_degree_, i, kMersenne61);
  }

  int sign_at(std::uint32_t t, std::uint64_t i) const {
    std::uint64_t raw;
    if (mode_ == HashMode::kFullyRandom) {
      raw = detail::keyed_mix(derive_seed(master_seed_, 2 * t + 1), i) %
            kMersenne61;
    } else {
      raw = detail::poly_eval(
          &s_coeffs_[static_cast<std::size_t>(t) * s_degree_], s_degree_, i,
          kMersenne61);
    }
    return (raw & 1u) ? 1 : -1;
  }

  void check_key(std::uint64_t i) const {
    if (i >= params_.n) {
      throw std::invalid_argument("key out of range [n]");
    }
  }

  SketchVariant variant_ = SketchVariant::kCountSketch;
  SketchParams params_;
  std::uint64_t master_seed_ = 0;
  std::uint64_t id_ = 0;
  HashMode mode_ = HashMode::kPolynomial;
  int h_degree_ = 2;
  int s_degree_ = 2;
  std::vector<std::uint64_t> h_coeffs_;
  std::vector<std::uint64_t> s_coeffs_;
};

/// The d bucket counters c_t = <mu_t, v>. Doubles by default; instantiate
/// with std::int64_t for the bit-exact integer mode the weight estimator
/// relies on. Single writer, external synchronization.
template <typename CounterT = double>
struct SketchState {
  std::vector<CounterT> counters;
  std::uint64_t randomness_id = 0;
};

template <typename CounterT = double>
SketchState<CounterT> make_state(const SketchRandomness& rand) {
  SketchState<CounterT> s;
  s.counters.assign(rand.params().d, CounterT{0});
  s.randomness_id = rand.id();
  return s;
}

template <typename CounterT>
void check_state(const SketchRandomness& rand,
                 const SketchState<CounterT>& state) {
  if (state.randomness_id != rand.id()) {
    throw std::invalid_argument("sketch state was built under a different "
                                "randomness instance");
  }
}

/// state <- state + delta * sketch(e_key).
template <typename CounterT, typename ValueT>
void apply_update(SketchState<CounterT>& state, const SketchRandomness& rand,
                  std::uint64_t key, ValueT delta) {
  check_state(rand, state);
  const Participation p = rand.participating_buckets(key);
  for (std::size_t j = 0; j < p.size(); ++j) {
    state.counters[p.buckets[j]] +=
        static_cast<CounterT>(p.signs[j]) * static_cast<CounterT>(delta);
  }
}

template <typename CounterT = double>
SketchState<CounterT> sketch_vector(const SketchRandomness& rand,
                                    const SparseVector& v) {
  SketchState<CounterT> state = make_state<CounterT>(rand);
  for (const auto& [key, value] : v.entries()) {
    apply_update(state, rand, key, value);
  }
  return state;
}

/// V(i) = { mu_t[i] * c_t : t in T_i }, one unbiased weak estimate of v[i]
/// per participating bucket. Empty when T_i is empty (possible under
/// BCountSketch).
template <typename CounterT>
std::vector<double> bucket_estimates(const SketchRandomness& rand,
                                     const SketchState<CounterT>& state,
                                     std::uint64_t i) {
  check_state(rand, state);
  const Participation p = rand.participating_buckets(i);
  std::vector<double> out;
  out.reserve(p.size());
  for (std::size_t j = 0; j < p.size(); ++j) {
    out.push_back(static_cast<double>(p.signs[j]) *
                  static_cast<double>(state.counters[p.buckets[j]]));
  }
  return out;
}

inline std::vector<double> bucket_estimates(
    const Participation& p, const SketchState<double>& state) {
  std::vector<double> out;
  out.reserve(p.size());
  for (std::size_t j = 0; j < p.size(); ++j) {
    out.push_back(static_cast<double>(p.signs[j]) * state.counters[p.buckets[j]]);
  }
  return out;
}

/// One hash pass for query-style workloads: the sketch of v plus the
/// participation lists of its support keys (aligned with `keys`), so
/// estimators don't re-derive T_i per key.
struct SketchedQuery {
  SketchState<double> state;
  std::vector<Key> keys;
  std::vector<Participation> parts;
};

inline SketchedQuery sketch_with_participations(const SketchRandomness& rand,
                                                const SparseVector& v) {
  SketchedQuery q;
  q.state = make_state<double>(rand);
  q.keys.reserve(v.support_size());
  q.parts.reserve(v.support_size());
  for (const auto& [key, value] : v.entries()) {
    q.keys.push_back(key);
    q.parts.push_back(rand.participating_buckets(key));
    const Participation& p = q.parts.back();
    for (std::size_t j = 0; j < p.size(); ++j) {
      q.state.counters[p.buckets[j]] +=
          static_cast<double>(p.signs[j]) * value;
    }
  }
  return q;
}

// ---------------------------------------------------------------------------
// Snapshot serialization: flat little-endian binary layout
//   magic(8) version(u32) variant(u32) n(u64) d(u32) b(u32) master_seed(u64)
//   counters(d x u64 bit patterns)
// Round-trips bit-exactly.
// ---------------------------------------------------------------------------

struct SketchSnapshot {
  SketchVariant variant = SketchVariant::kCountSketch;
  SketchParams params;
  std::uint64_t master_seed = 0;
  std::vector<double> counters;
};

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t x) {
  unsigned char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<unsigned char>(x >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), 4);
}

inline void put_u64(std::ostream& os, std::uint64_t x) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(x >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), 8);
}

inline std::uint32_t get_u32(std::istream& is) {
  unsigned char buf[4];
  is.read(reinterpret_cast<char*>(buf), 4);
  std::uint32_t x = 0;
  for (int i = 0; i < 4; ++i) x |= std::uint32_t{buf[i]} << (8 * i);
  return x;
}

inline std::uint64_t get_u64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t x = 0;
  for (int i = 0; i < 8; ++i) x |= std::uint64_t{buf[i]} << (8 * i);
  return x;
}

inline constexpr char kSnapshotMagic[8] = {'A', 'D', 'S', 'K',
                                           'S', 'N', 'P', '1'};

}  // namespace detail

inline void write_snapshot(std::ostream& os, const SketchRandomness& rand,
                           const SketchState<double>& state) {
  check_state(rand, state);
  os.write(detail::kSnapshotMagic, 8);
  detail::put_u32(os, 1);  // version
  detail::put_u32(os, static_cast<std::uint32_t>(rand.variant()));
  detail::put_u64(os, rand.params().n);
  detail::put_u32(os, rand.params().d);
  detail::put_u32(os, rand.params().b);
  detail::put_u64(os, rand.master_seed());
  for (const double c : state.counters) {
    detail::put_u64(os, std::bit_cast<std::uint64_t>(c));
  }
}

inline SketchSnapshot read_snapshot(std::istream& is) {
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, detail::kSnapshotMagic, 8) != 0) {
    throw std::runtime_error("snapshot: bad magic");
  }
  const std::uint32_t version = detail::get_u32(is);
  if (version != 1) throw std::runtime_error("snapshot: unsupported version");
  SketchSnapshot snap;
  snap.variant = static_cast<SketchVariant>(detail::get_u32(is));
  snap.params.n = detail::get_u64(is);
  snap.params.d = detail::get_u32(is);
  snap.params.b = detail::get_u32(is);
  snap.master_seed = detail::get_u64(is);
  snap.counters.resize(snap.params.d);
  for (auto& c : snap.counters) {
    c = std::bit_cast<double>(detail::get_u64(is));
  }
  if (!is) throw std::runtime_error("snapshot: truncated");
  return snap;
}

}  // namespace adasketch

#endif  // ADASKETCH_SKETCH_HPP_
