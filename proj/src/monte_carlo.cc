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

#include "cbexp/monte_carlo.h"

#include <cmath>
#include <exception>
#include <limits>
#include <ostream>

#include "cbexp/designs.h"
#include "cbexp/estimators.h"
#include "cbexp/random.h"

namespace cbexp {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

ArmEstimate EstimateArm(std::span<const double> y, const Assignment& z_clusters,
                        const Clustering& clustering) {
  ArmEstimate est;
  est.tau_hat = HtEstimate(y, z_clusters, clustering).tau_hat;
  const std::size_t m_t = z_clusters.NumTreated();
  if (m_t >= 2 && z_clusters.size() - m_t >= 2) {
    est.sigma_hat = NeymannVariance(y, z_clusters, clustering).sigma_hat;
  } else {
    est.sigma_hat = kNaN;
  }
  return est;
}

enum class DrawStatus : std::uint8_t { kOk, kExcluded, kFailed };

// Shared body of both Monte-Carlo kernels: fills slot r of the buffers.
void RunReplicate(const Design& design, const PotentialOutcomeModel& model,
                  std::uint64_t master_seed,
                  std::optional<std::uint64_t> noise_seed, std::size_t r,
                  std::span<ArmEstimate> slot, DrawStatus& status,
                  std::exception_ptr& failure) {
  try {
    design.Draw(DeriveSeed(master_seed, r), model, noise_seed, slot);
    status = DrawStatus::kOk;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kDegenerateDesign ||
        e.code() == ErrorCode::kUndefinedEstimator) {
      status = DrawStatus::kExcluded;
    } else {
      status = DrawStatus::kFailed;
      failure = std::current_exception();
    }
  } catch (...) {
    status = DrawStatus::kFailed;
    failure = std::current_exception();
  }
}

MonteCarloResult Reduce(const Design& design, std::size_t replications,
                        const std::vector<ArmEstimate>& buffer,
                        const std::vector<DrawStatus>& status,
                        const std::vector<std::exception_ptr>& failures) {
  const std::size_t arms = design.num_arms();
  MonteCarloResult result;
  result.replications = replications;
  result.arms.resize(arms);
  for (std::size_t a = 0; a < arms; ++a) result.arms[a].name = design.arm_name(a);

  for (std::size_t r = 0; r < replications; ++r) {
    if (status[r] == DrawStatus::kFailed) std::rethrow_exception(failures[r]);
    if (status[r] == DrawStatus::kExcluded) {
      result.excluded.push_back(r);
      continue;
    }
    result.kept.push_back(r);
    for (std::size_t a = 0; a < arms; ++a) {
      result.arms[a].tau_hat.push_back(buffer[r * arms + a].tau_hat);
      result.arms[a].sigma_hat.push_back(buffer[r * arms + a].sigma_hat);
    }
  }
  if (10 * result.excluded.size() > replications) {
    throw Error(ErrorCode::kUnreliableEstimate,
                std::to_string(result.excluded.size()) + " of " +
                    std::to_string(replications) + " draws were degenerate");
  }
  const double n = static_cast<double>(result.kept.size());
  for (auto& arm : result.arms) {
    double sum = 0.0;
    for (double x : arm.tau_hat) sum += x;
    arm.mean = sum / n;
    double ss = 0.0;
    for (double x : arm.tau_hat) ss += (x - arm.mean) * (x - arm.mean);
    arm.stderr_mean = n > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  }
  return result;
}

void CheckReplications(std::size_t replications) {
  if (replications < 2) {
    throw Error(ErrorCode::kInvalidParameter, "need at least 2 replications");
  }
}

struct ExhaustiveSlot {
  double tau = 0.0;
  double sigma = 0.0;
};

ExhaustiveSlot EvaluateMask(const Clustering& clustering,
                            const PotentialOutcomeModel& model,
                            std::uint32_t mask,
                            std::optional<std::uint64_t> noise_seed) {
  const std::size_t m = clustering.num_clusters();
  std::vector<std::uint8_t> zc(m);
  for (std::size_t j = 0; j < m; ++j) zc[j] = (mask >> j) & 1u;
  std::vector<std::uint8_t> zu(clustering.num_units());
  for (std::size_t i = 0; i < zu.size(); ++i) zu[i] = zc[clustering.cluster_of(i)];
  const Assignment z_clusters(std::move(zc));
  const auto y = model.Outcomes(Assignment(std::move(zu)), noise_seed);
  const ArmEstimate est = EstimateArm(y, z_clusters, clustering);
  return {est.tau_hat, est.sigma_hat};
}

ExhaustiveResult ReduceExhaustive(const std::vector<ExhaustiveSlot>& slots) {
  ExhaustiveResult result;
  result.num_assignments = slots.size();
  const double n = static_cast<double>(slots.size());
  double sum = 0.0;
  double sigma_sum = 0.0;
  for (const auto& s : slots) {
    sum += s.tau;
    sigma_sum += s.sigma;
  }
  result.mean_tau = sum / n;
  result.mean_sigma = sigma_sum / n;
  double ss = 0.0;
  for (const auto& s : slots) ss += (s.tau - result.mean_tau) * (s.tau - result.mean_tau);
  result.var_tau = ss / n;
  return result;
}

void CheckExhaustive(const Clustering& clustering, std::size_t m_treated) {
  const std::size_t m = clustering.num_clusters();
  if (m > 30) {
    throw Error(ErrorCode::kInvalidParameter,
                "exhaustive enumeration needs M <= 30, got " + std::to_string(m));
  }
  if (m_treated == 0 || m_treated >= m) {
    throw Error(ErrorCode::kUndefinedEstimator,
                "need 0 < m_treated < M for the HT estimator");
  }
}

}  // namespace

ClusterDesign::ClusterDesign(Clustering clustering, std::string name)
    : ClusterDesign(clustering, DefaultTreatedClusters(clustering.num_clusters()),
                    std::move(name)) {}

ClusterDesign::ClusterDesign(Clustering clustering, std::size_t m_treated,
                             std::string name)
    : clustering_(std::move(clustering)),
      m_treated_(m_treated),
      name_(std::move(name)) {
  if (clustering_.num_clusters() < 2) {
    throw Error(ErrorCode::kDegenerateDesign,
                "cluster-based design needs at least 2 clusters");
  }
  if (m_treated_ == 0 || m_treated_ >= clustering_.num_clusters()) {
    throw Error(ErrorCode::kInvalidParameter,
                "m_treated must lie strictly between 0 and M");
  }
}

void ClusterDesign::Draw(std::uint64_t seed, const PotentialOutcomeModel& model,
                         std::optional<std::uint64_t> noise_seed,
                         std::span<ArmEstimate> out) const {
  Rng rng = MakeRng(seed);
  const auto ca = ClusterBasedAssignment(clustering_, m_treated_, rng);
  const auto y = model.Outcomes(ca.units, noise_seed);
  out[0] = EstimateArm(y, ca.clusters, clustering_);
}

ExperimentOfExperiments::ExperimentOfExperiments(Clustering c1, Clustering c2)
    : c1_(std::move(c1)), c2_(std::move(c2)) {
  if (c1_.num_units() != c2_.num_units()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "clusterings cover different numbers of units");
  }
}

std::string ExperimentOfExperiments::arm_name(std::size_t arm) const {
  return arm == 0 ? "eoe-1" : "eoe-2";
}

void ExperimentOfExperiments::Draw(std::uint64_t seed,
                                   const PotentialOutcomeModel& model,
                                   std::optional<std::uint64_t> noise_seed,
                                   std::span<ArmEstimate> out) const {
  const EoEDesign design = EoEAssign(c1_, c2_, seed);
  const auto y = model.Outcomes(design.z, noise_seed);
  for (std::size_t k = 0; k < 2; ++k) {
    const auto& arm = design.arms[k];
    std::vector<double> arm_y(arm.induced.units.size());
    for (std::size_t pos = 0; pos < arm_y.size(); ++pos) {
      arm_y[pos] = y[arm.induced.units[pos]];
    }
    out[k] = EstimateArm(arm_y, arm.z_clusters, arm.induced.clustering);
  }
}

MonteCarloResult MonteCarloExpectation(const Design& design,
                                       const PotentialOutcomeModel& model,
                                       std::size_t replications,
                                       std::uint64_t master_seed,
                                       std::optional<std::uint64_t> noise_seed) {
  CheckReplications(replications);
  const std::size_t arms = design.num_arms();
  std::vector<ArmEstimate> buffer(replications * arms);
  std::vector<DrawStatus> status(replications, DrawStatus::kOk);
  std::vector<std::exception_ptr> failures(replications);
  const auto n = static_cast<std::int64_t>(replications);
#pragma omp parallel for schedule(dynamic, 8)
  for (std::int64_t r = 0; r < n; ++r) {
    const auto idx = static_cast<std::size_t>(r);
    RunReplicate(design, model, master_seed, noise_seed, idx,
                 std::span<ArmEstimate>(buffer).subspan(idx * arms, arms),
                 status[idx], failures[idx]);
  }
  return Reduce(design, replications, buffer, status, failures);
}

MonteCarloResult MonteCarloExpectationSerial(
    const Design& design, const PotentialOutcomeModel& model,
    std::size_t replications, std::uint64_t master_seed,
    std::optional<std::uint64_t> noise_seed) {
  CheckReplications(replications);
  const std::size_t arms = design.num_arms();
  std::vector<ArmEstimate> buffer(replications * arms);
  std::vector<DrawStatus> status(replications, DrawStatus::kOk);
  std::vector<std::exception_ptr> failures(replications);
  for (std::size_t r = 0; r < replications; ++r) {
    RunReplicate(design, model, master_seed, noise_seed, r,
                 std::span<ArmEstimate>(buffer).subspan(r * arms, arms),
                 status[r], failures[r]);
  }
  return Reduce(design, replications, buffer, status, failures);
}

void WriteSamplesCsv(std::ostream& out, const MonteCarloResult& result) {
  out << "replicate,arm,tau_hat,sigma_hat\n";
  const auto old_precision = out.precision(17);
  for (std::size_t k = 0; k < result.kept.size(); ++k) {
    for (const auto& arm : result.arms) {
      out << result.kept[k] << ',' << arm.name << ',' << arm.tau_hat[k] << ',';
      if (std::isnan(arm.sigma_hat[k])) {
        out << "NA";
      } else {
        out << arm.sigma_hat[k];
      }
      out << '\n';
    }
  }
  out.precision(old_precision);
}

std::vector<std::uint32_t> MasksWithPopcount(std::size_t bits,
                                             std::size_t popcount) {
  std::vector<std::uint32_t> masks;
  if (popcount > bits || bits > 31) return masks;
  if (popcount == 0) return {0u};
  std::uint32_t mask = (1u << popcount) - 1u;
  const std::uint32_t limit = 1u << bits;
  while (mask < limit) {
    masks.push_back(mask);
    // Gosper's hack: next larger integer with the same popcount.
    const std::uint32_t c = mask & (~mask + 1u);
    const std::uint32_t r = mask + c;
    mask = (((r ^ mask) >> 2) / c) | r;
  }
  return masks;
}

ExhaustiveResult ExhaustiveClusterDesign(const Clustering& clustering,
                                         const PotentialOutcomeModel& model,
                                         std::size_t m_treated,
                                         std::optional<std::uint64_t> noise_seed) {
  CheckExhaustive(clustering, m_treated);
  const auto masks = MasksWithPopcount(clustering.num_clusters(), m_treated);
  std::vector<ExhaustiveSlot> slots(masks.size());
  const auto n = static_cast<std::int64_t>(masks.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t k = 0; k < n; ++k) {
    slots[k] = EvaluateMask(clustering, model, masks[k], noise_seed);
  }
  return ReduceExhaustive(slots);
}

ExhaustiveResult ExhaustiveClusterDesignSerial(
    const Clustering& clustering, const PotentialOutcomeModel& model,
    std::size_t m_treated, std::optional<std::uint64_t> noise_seed) {
  CheckExhaustive(clustering, m_treated);
  const auto masks = MasksWithPopcount(clustering.num_clusters(), m_treated);
  std::vector<ExhaustiveSlot> slots(masks.size());
  for (std::size_t k = 0; k < masks.size(); ++k) {
    slots[k] = EvaluateMask(clustering, model, masks[k], noise_seed);
  }
  return ReduceExhaustive(slots);
}

}  // namespace cbexp
