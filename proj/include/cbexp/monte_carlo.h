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

// Expectation machinery over randomized designs.
//
// Two kernels compute E[tau_hat] for a design: Monte-Carlo sampling over
// replicate seeds, and exhaustive enumeration of every cluster assignment.
// Each kernel has an OpenMP version and a serial reference version. Per-draw
// results are written to preallocated slots and reduced serially in index
// order, so both versions return bit-identical results for any thread count.

#ifndef CBEXP_MONTE_CARLO_H_
#define CBEXP_MONTE_CARLO_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cbexp/core.h"

namespace cbexp {

struct ArmEstimate {
  double tau_hat = 0.0;
  double sigma_hat = 0.0;  // NaN when a bucket has fewer than two clusters
};

// A randomized design paired with its estimator. One draw yields one
// estimate per arm.
class Design {
 public:
  virtual ~Design() = default;

  virtual std::size_t num_arms() const = 0;
  virtual std::string arm_name(std::size_t arm) const = 0;
  // Throws kDegenerateDesign for draws the estimator cannot handle.
  virtual void Draw(std::uint64_t seed, const PotentialOutcomeModel& model,
                    std::optional<std::uint64_t> noise_seed,
                    std::span<ArmEstimate> out) const = 0;
};

// Cluster-based randomized design with a fixed treated-cluster count.
class ClusterDesign final : public Design {
 public:
  explicit ClusterDesign(Clustering clustering, std::string name = "direct");
  ClusterDesign(Clustering clustering, std::size_t m_treated,
                std::string name);

  std::size_t num_arms() const override { return 1; }
  std::string arm_name(std::size_t) const override { return name_; }
  void Draw(std::uint64_t seed, const PotentialOutcomeModel& model,
            std::optional<std::uint64_t> noise_seed,
            std::span<ArmEstimate> out) const override;

  const Clustering& clustering() const { return clustering_; }
  std::size_t m_treated() const { return m_treated_; }

 private:
  Clustering clustering_;
  std::size_t m_treated_;
  std::string name_;
};

// Experiment-of-experiments: arm k runs a cluster-based design induced by
// clustering k on a random half of the units.
class ExperimentOfExperiments final : public Design {
 public:
  ExperimentOfExperiments(Clustering c1, Clustering c2);

  std::size_t num_arms() const override { return 2; }
  std::string arm_name(std::size_t arm) const override;
  void Draw(std::uint64_t seed, const PotentialOutcomeModel& model,
            std::optional<std::uint64_t> noise_seed,
            std::span<ArmEstimate> out) const override;

 private:
  Clustering c1_;
  Clustering c2_;
};

struct ArmSummary {
  std::string name;
  double mean = 0.0;
  double stderr_mean = 0.0;
  std::vector<double> tau_hat;    // one per kept replicate
  std::vector<double> sigma_hat;  // aligned with tau_hat
};

struct MonteCarloResult {
  std::size_t replications = 0;
  std::vector<std::size_t> kept;      // replicate indices, ascending
  std::vector<std::size_t> excluded;  // degenerate draws
  std::vector<ArmSummary> arms;
};

// R draws with replicate seeds DeriveSeed(master_seed, r). Degenerate draws
// are excluded; more than 10% exclusions throws kUnreliableEstimate.
MonteCarloResult MonteCarloExpectation(const Design& design,
                                       const PotentialOutcomeModel& model,
                                       std::size_t replications,
                                       std::uint64_t master_seed,
                                       std::optional<std::uint64_t> noise_seed);

MonteCarloResult MonteCarloExpectationSerial(
    const Design& design, const PotentialOutcomeModel& model,
    std::size_t replications, std::uint64_t master_seed,
    std::optional<std::uint64_t> noise_seed);

// CSV with header "replicate,arm,tau_hat,sigma_hat".
void WriteSamplesCsv(std::ostream& out, const MonteCarloResult& result);

struct ExhaustiveResult {
  std::size_t num_assignments = 0;
  double mean_tau = 0.0;
  double var_tau = 0.0;  // population variance over assignments
  // Mean Neymann variance; NaN when some assignment leaves < 2 clusters in
  // a bucket.
  double mean_sigma = 0.0;
};

// Every cluster assignment with exactly `m_treated` treated clusters, each
// weighted equally. Requires M <= 30.
ExhaustiveResult ExhaustiveClusterDesign(const Clustering& clustering,
                                         const PotentialOutcomeModel& model,
                                         std::size_t m_treated,
                                         std::optional<std::uint64_t> noise_seed);

ExhaustiveResult ExhaustiveClusterDesignSerial(
    const Clustering& clustering, const PotentialOutcomeModel& model,
    std::size_t m_treated, std::optional<std::uint64_t> noise_seed);

// All M-bit masks with `popcount` bits set, ascending.
std::vector<std::uint32_t> MasksWithPopcount(std::size_t bits,
                                             std::size_t popcount);

}  // namespace cbexp

#endif  // CBEXP_MONTE_CARLO_H_
