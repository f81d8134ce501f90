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

#ifndef ADASKETCH_SPARSE_VECTOR_HPP_
#define ADASKETCH_SPARSE_VECTOR_HPP_

#include <algorithm>
#include <cstdint>
#include <utility>
#include <vector>

namespace adasketch {

using Key = std::uint32_t;

/// A vector in R^n as a key -> value map, zeros implicit. Entries are kept
/// sorted by key and explicit zeros are dropped, so iteration order (and
/// floating-point accumulation order) is deterministic.
class SparseVector {
 public:
  using Entry = std::pair<Key, double>;

  SparseVector() = default;

  static SparseVector from_entries(std::vector<Entry> entries) {
    SparseVector v;
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.first < b.first; });
    for (const auto& [key, value] : entries) {
      if (!v.entries_.empty() && v.entries_.back().first == key) {
        v.entries_.back().second += value;
      } else {
        v.entries_.emplace_back(key, value);
      }
    }
    v.drop_zeros();
    return v;
  }

  static SparseVector unit(Key key, double weight) {
    SparseVector v;
    if (weight != 0.0) v.entries_.emplace_back(key, weight);
    return v;
  }

  void add(Key key, double delta) {
    if (delta == 0.0) return;
    auto it = lower_bound(key);
    if (it != entries_.end() && it->first == key) {
      it->second += delta;
      if (it->second == 0.0) entries_.erase(it);
    } else {
      entries_.insert(it, {key, delta});
    }
  }

  void set(Key key, double value) {
    auto it = lower_bound(key);
    if (it != entries_.end() && it->first == key) {
      if (value == 0.0) {
        entries_.erase(it);
      } else {
        it->second = value;
      }
    } else if (value != 0.0) {
      entries_.insert(it, {key, value});
    }
  }

  double value(Key key) const {
    auto it = std::lower_bound(
        entries_.begin(), entries_.end(), key,
        [](const Entry& e, Key k) { return e.first < k; });
    return it != entries_.end() && it->first == key ? it->second : 0.0;
  }

  /// this + scale * other, supports need not be disjoint.
  SparseVector plus(const SparseVector& other, double scale = 1.0) const {
    SparseVector out;
    out.entries_.reserve(entries_.size() + other.entries_.size());
    auto a = entries_.begin();
    auto b = other.entries_.begin();
    while (a != entries_.end() || b != other.entries_.end()) {
      if (b == other.entries_.end() ||
          (a != entries_.end() && a->first < b->first)) {
        out.entries_.push_back(*a++);
      } else if (a == entries_.end() || b->first < a->first) {
        out.entries_.emplace_back(b->first, scale * b->second);
        ++b;
      } else {
        out.entries_.emplace_back(a->first, a->second + scale * b->second);
        ++a;
        ++b;
      }
    }
    out.drop_zeros();
    return out;
  }

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t support_size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  Key max_key() const { return entries_.empty() ? 0 : entries_.back().first; }

  double norm2_squared() const {
    double s = 0.0;
    for (const auto& [key, value] : entries_) s += value * value;
    return s;
  }

  /// Squared l2 norm after zeroing the k largest-magnitude entries.
  double tail_norm2_squared(std::size_t k) const {
    if (k == 0) return norm2_squared();
    if (k >= entries_.size()) return 0.0;
    std::vector<double> sq;
    sq.reserve(entries_.size());
    for (const auto& [key, value] : entries_) sq.push_back(value * value);
    std::nth_element(sq.begin(), sq.begin() + static_cast<std::ptrdiff_t>(k),
                     sq.end(), std::greater<>());
    double s = 0.0;
    for (std::size_t i = k; i < sq.size(); ++i) s += sq[i];
    return s;
  }

  std::vector<Key> support() const {
    std::vector<Key> keys;
    keys.reserve(entries_.size());
    for (const auto& [key, value] : entries_) keys.push_back(key);
    return keys;
  }

  bool operator==(const SparseVector& other) const {
    return entries_ == other.entries_;
  }

 private:
  std::vector<Entry>::iterator lower_bound(Key key) {
    return std::lower_bound(
        entries_.begin(), entries_.end(), key,
        [](const Entry& e, Key k) { return e.first < k; });
  }

  void drop_zeros() {
    entries_.erase(std::remove_if(entries_.begin(), entries_.end(),
                                  [](const Entry& e) {
                                    return e.second == 0.0;
                                  }),
                   entries_.end());
  }

  std::vector<Entry> entries_;
};

}  // namespace adasketch

#endif  // ADASKETCH_SPARSE_VECTOR_HPP_
