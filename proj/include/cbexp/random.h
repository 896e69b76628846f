// Copyright 2026 The cbexp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CBEXP_RANDOM_H_
#define CBEXP_RANDOM_H_

#include <cstdint>
#include <random>

namespace cbexp {

using Rng = std::mt19937_64;

// splitmix64 finalizer.
constexpr std::uint64_t MixSeed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Child stream `stream` of `master`. Distinct (master, stream) pairs give
// independent-looking seeds; the mapping is fixed across platforms.
constexpr std::uint64_t DeriveSeed(std::uint64_t master, std::uint64_t stream) {
  return MixSeed(MixSeed(master) ^ MixSeed(stream + 0x632be59bd9b4e019ULL));
}

inline Rng MakeRng(std::uint64_t seed) { return Rng(MixSeed(seed)); }

// Named stages of the two-stage design; each draws from its own child stream.
enum class Stream : std::uint64_t {
  kArmSplit = 1,
  kArm1Clusters = 2,
  kArm2Clusters = 3,
  kNoise = 4,
};

inline std::uint64_t DeriveSeed(std::uint64_t master, Stream stream) {
  return DeriveSeed(master, static_cast<std::uint64_t>(stream));
}

}  // namespace cbexp

#endif  // CBEXP_RANDOM_H_
