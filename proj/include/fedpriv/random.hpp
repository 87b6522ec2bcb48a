// Copyright 2026 The fedpriv Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FEDPRIV_RANDOM_HPP_
#define FEDPRIV_RANDOM_HPP_

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace fedpriv {

// FNV-1a over the bytes of `text`, with `seed` folded into the offset basis.
// Stable across runs, platforms and process restarts.
std::uint64_t StableHash(std::string_view text, std::uint64_t seed = 0);

// SplitMix64 finalizer.
std::uint64_t Mix64(std::uint64_t x);

// Derives an independent stream seed from a master seed and a path of keys,
// e.g. DeriveSeed(master, {round, StableHash(client_id)}).
std::uint64_t DeriveSeed(std::uint64_t master,
                         std::initializer_list<std::uint64_t> keys);

// Seeded random source. The engine (mt19937_64) is fully specified by the
// standard; the distributions below are implemented here rather than taken
// from <random>, whose distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t NextU64() { return engine_(); }

  // Uniform on [0, 1) with 53 bits of precision.
  double Uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform integer on [0, n). Unbiased (rejection sampling).
  std::size_t UniformIndex(std::size_t n);

  // Standard normal via the Box-Muller transform.
  double Normal();

  template <typename T>
  void Shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[UniformIndex(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace fedpriv

#endif  // FEDPRIV_RANDOM_HPP_
