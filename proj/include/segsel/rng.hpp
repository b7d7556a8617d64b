/*
 * Copyright 2026 The segsel Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace segsel {

// FNV-1a, used both for RNG stream derivation and for content digests.
std::uint64_t fnv1a64(const void* data, std::size_t len);
std::uint64_t fnv1a64(std::string_view s);

// Named deterministic RNG stream. A master seed plus a stream name yields an
// independent mt19937_64 (output sequence pinned by the standard, so results
// are reproducible across platforms). All distribution transforms are done
// here by hand; the std::*_distribution adapters are implementation-defined
// and must not touch anything that ends up in published numbers.
class Rng {
 public:
  Rng(std::uint64_t seed, std::string_view stream);

  std::uint64_t next_u64();
  double uniform01();                        // [0, 1), 53-bit resolution
  double uniform(double lo, double hi);      // [lo, hi)
  double normal();                           // standard normal, Box-Muller
  double normal(double mean, double stddev);
  int uniform_int(int n);                    // [0, n)

  // First k entries of a Fisher-Yates pass over 0..n-1, unsorted.
  std::vector<int> sample_without_replacement(int n, int k);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(static_cast<int>(i)));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace segsel
