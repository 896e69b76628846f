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

// Linear interference model
//
//   Y_i(Z) = alpha_i + beta_i Z_i + gamma_i rho_i + eps_i,
//   rho_i  = fraction of i's neighbors that are treated,
//
// with its closed-form expectation under cluster-based designs, a
// monotonicity classifier, and a model-agnostic self-excitation checker.

#ifndef CBEXP_INTERFERENCE_H_
#define CBEXP_INTERFERENCE_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <variant>
#include <vector>

#include "cbexp/core.h"

namespace cbexp {

struct LinearParams {
  std::vector<double> alpha;
  std::vector<double> beta;
  std::vector<double> gamma;
};

// CSV with header "unit,alpha,beta,gamma"; rows may come in any order but
// must cover units 0..N-1 exactly once.
LinearParams ReadLinearParamsCsv(std::istream& in);
void WriteLinearParamsCsv(std::ostream& out, const LinearParams& params);

class LinearInterferenceModel final : public PotentialOutcomeModel {
 public:
  // eps_i ~ N(0, noise_sd^2), drawn from the noise seed on each evaluation.
  LinearInterferenceModel(LinearParams params, double noise_sd,
                          NeighborhoodGraph graph);

  std::size_t num_units() const override { return params_.alpha.size(); }
  // Isolated units take rho_i = Z_i.
  void Evaluate(const Assignment& z, std::optional<std::uint64_t> noise_seed,
                std::span<double> out) const override;

  const LinearParams& params() const { return params_; }
  const NeighborhoodGraph& graph() const { return graph_; }
  double noise_sd() const { return noise_sd_; }

 private:
  LinearParams params_;
  double noise_sd_;
  NeighborhoodGraph graph_;
};

// tau - E_{Z~C}[tau_hat] = M / (N (M-1)) * sum_i gamma_i (1 - theta_i).
double LinearClosedFormBias(const LinearInterferenceModel& model,
                            const Clustering& clustering);

// E_{Z~C}[tau_hat] = mean(beta) + (1/N) sum_i gamma_i (theta_i - (1-theta_i)/(M-1)).
// Exact for any treated-cluster count.
double LinearClosedFormExpectation(const LinearInterferenceModel& model,
                                   const Clustering& clustering);

enum class MonotonicityKind { kIncreasing, kDecreasing, kIndeterminate };

const char* ToString(MonotonicityKind kind);

struct MonotonicityVerdict {
  MonotonicityKind kind = MonotonicityKind::kIncreasing;
  double evidence = 0.0;  // sum_i gamma_i (1 - theta_i)
};

MonotonicityVerdict ClassifyMonotonicity(const LinearInterferenceModel& model,
                                         const Clustering& clustering);

struct Exhaustive {};
struct SampledAssignments {
  std::size_t replications = 1000;
  std::uint64_t seed = 0;
};
using ExpectationMode = std::variant<Exhaustive, SampledAssignments>;

struct SelfExcitationReport {
  bool holds = true;
  // Witness for the first violated inequality, when !holds.
  int unit = -1;
  int treated_status = -1;      // the conditioning value Z_i
  double conditional_mean = 0.0;
  double extreme_outcome = 0.0;  // Y_i(0) or Y_i(1)
  std::size_t assignments = 0;
};

// Checks E[Y_i | Z_i = 0] >= Y_i(0) and E[Y_i | Z_i = 1] <= Y_i(1) for every
// unit under the cluster-based design with floor(M/2) treated clusters, using
// noise-free outcomes. Exhaustive mode needs M <= 20.
SelfExcitationReport SelfExcitationCheck(const PotentialOutcomeModel& model,
                                         const Clustering& clustering,
                                         const ExpectationMode& mode,
                                         double tolerance = 1e-9);

}  // namespace cbexp

#endif  // CBEXP_INTERFERENCE_H_
