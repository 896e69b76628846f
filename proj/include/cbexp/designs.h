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

// Randomization procedures: completely randomized, cluster-based, and the
// two-arm experiment-of-experiments design that runs one cluster-based design
// per candidate clustering on a random half of the population.

#ifndef CBEXP_DESIGNS_H_
#define CBEXP_DESIGNS_H_

#include <array>
#include <cstdint>
#include <vector>

#include "cbexp/core.h"
#include "cbexp/random.h"
#include "json.hpp"

namespace cbexp {

Assignment CompleteRandomization(std::size_t n_units, std::size_t n_treated,
                                 Rng& rng);

struct ClusterAssignment {
  Assignment units;     // Z_i = z_{C(i)}
  Assignment clusters;  // z_j
  std::size_t m_treated = 0;
  std::size_t m_control = 0;
};

ClusterAssignment ClusterBasedAssignment(const Clustering& clustering,
                                         std::size_t m_treated, Rng& rng);

// Treated-cluster count used by every cluster-based design in this library:
// floor(M / 2), ties toward control.
inline std::size_t DefaultTreatedClusters(std::size_t m) { return m / 2; }

// Design-arm labels W_i in {1, 2}.
struct ArmSplit {
  std::vector<std::uint8_t> arm;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
};

// Exactly floor(N/2) units in arm 1, uniformly over such splits.
ArmSplit BalancedArmSplit(std::size_t n_units, Rng& rng);

// A clustering restricted to the units of one design arm. `clustering` is
// indexed by position in `units`.
struct InducedClustering {
  std::vector<int> units;
  Clustering clustering;
};

InducedClustering Induce(const Clustering& base, const ArmSplit& split,
                         int arm);

struct ArmDesign {
  InducedClustering induced;
  Assignment z_clusters;
  std::size_t m_treated = 0;
  std::size_t m_control = 0;
};

struct EoEDesign {
  ArmSplit split;
  std::array<ArmDesign, 2> arms;
  Assignment z;  // over all N units
};

// Balanced split, induced clusterings, then a cluster-based design in each
// arm with floor(M_k/2) treated clusters. Stages draw from child streams of
// `seed` (see Stream). Throws kDegenerateDesign when an arm has < 2 clusters.
EoEDesign EoEAssign(const Clustering& c1, const Clustering& c2,
                    std::uint64_t seed);

nlohmann::json ToJson(const EoEDesign& design);

}  // namespace cbexp

#endif  // CBEXP_DESIGNS_H_
