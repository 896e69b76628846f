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

#include "cbexp/interference.h"

#include <array>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "cbexp/designs.h"
#include "cbexp/monte_carlo.h"
#include "cbexp/random.h"

namespace cbexp {
namespace {

void RequireClusters(const Clustering& clustering, std::size_t n) {
  if (clustering.num_units() != n) {
    throw Error(ErrorCode::kDimensionMismatch,
                "clustering size differs from model size");
  }
  if (clustering.num_clusters() < 2) {
    throw Error(ErrorCode::kUndefinedEstimator,
                "closed form needs M >= 2 (division by M-1)");
  }
}

double GammaCutMass(const LinearInterferenceModel& model,
                    const ExposureProfile& exposure) {
  double sum = 0.0;
  for (std::size_t i = 0; i < exposure.theta.size(); ++i) {
    sum += model.params().gamma[i] * (1.0 - exposure.theta[i]);
  }
  return sum;
}

}  // namespace

LinearParams ReadLinearParamsCsv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::kParse, "empty parameter file");
  }
  if (line.rfind("unit,alpha,beta,gamma", 0) != 0) {
    throw Error(ErrorCode::kParse,
                "expected header 'unit,alpha,beta,gamma', got '" + line + "'");
  }
  std::vector<std::pair<int, std::array<double, 3>>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(fields, cell, ',')) cells.push_back(cell);
    if (cells.size() != 4) {
      throw Error(ErrorCode::kParse, "line " + std::to_string(line_no) +
                                         ": expected 4 columns");
    }
    try {
      rows.push_back({std::stoi(cells[0]),
                      {std::stod(cells[1]), std::stod(cells[2]),
                       std::stod(cells[3])}});
    } catch (const std::exception&) {
      throw Error(ErrorCode::kParse, "line " + std::to_string(line_no) +
                                         ": non-numeric field");
    }
  }
  const std::size_t n = rows.size();
  LinearParams params{std::vector<double>(n), std::vector<double>(n),
                      std::vector<double>(n)};
  std::vector<bool> seen(n, false);
  for (const auto& [unit, values] : rows) {
    if (unit < 0 || static_cast<std::size_t>(unit) >= n || seen[unit]) {
      throw Error(ErrorCode::kData,
                  "units must be 0..N-1 exactly once; bad unit " +
                      std::to_string(unit));
    }
    seen[unit] = true;
    params.alpha[unit] = values[0];
    params.beta[unit] = values[1];
    params.gamma[unit] = values[2];
  }
  return params;
}

void WriteLinearParamsCsv(std::ostream& out, const LinearParams& params) {
  const auto old_precision = out.precision(17);
  out << "unit,alpha,beta,gamma\n";
  for (std::size_t i = 0; i < params.alpha.size(); ++i) {
    out << i << ',' << params.alpha[i] << ',' << params.beta[i] << ','
        << params.gamma[i] << '\n';
  }
  out.precision(old_precision);
}

LinearInterferenceModel::LinearInterferenceModel(LinearParams params,
                                                 double noise_sd,
                                                 NeighborhoodGraph graph)
    : params_(std::move(params)), noise_sd_(noise_sd), graph_(std::move(graph)) {
  const std::size_t n = params_.alpha.size();
  if (params_.beta.size() != n || params_.gamma.size() != n ||
      graph_.num_units() != n) {
    throw Error(ErrorCode::kDimensionMismatch,
                "alpha, beta, gamma and graph must all cover N units");
  }
  if (!(noise_sd_ >= 0.0)) {
    throw Error(ErrorCode::kInvalidParameter, "noise_sd must be >= 0");
  }
}

void LinearInterferenceModel::Evaluate(const Assignment& z,
                                       std::optional<std::uint64_t> noise_seed,
                                       std::span<double> out) const {
  const std::size_t n = num_units();
  if (z.size() != n || out.size() != n) {
    throw Error(ErrorCode::kDimensionMismatch,
                "assignment length " + std::to_string(z.size()) + " != N " +
                    std::to_string(n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto nbrs = graph_.neighbors(i);
    double rho = z[i];
    if (!nbrs.empty()) {
      int treated = 0;
      for (int j : nbrs) treated += z[j];
      rho = static_cast<double>(treated) / static_cast<double>(nbrs.size());
    }
    out[i] = params_.alpha[i] + params_.beta[i] * z[i] + params_.gamma[i] * rho;
  }
  if (noise_seed && noise_sd_ > 0.0) {
    Rng rng = MakeRng(DeriveSeed(*noise_seed, Stream::kNoise));
    std::normal_distribution<double> eps(0.0, noise_sd_);
    for (std::size_t i = 0; i < n; ++i) out[i] += eps(rng);
  }
}

double LinearClosedFormBias(const LinearInterferenceModel& model,
                            const Clustering& clustering) {
  const std::size_t n = model.num_units();
  RequireClusters(clustering, n);
  const auto exposure = ClusterExposure(clustering, model.graph());
  const double m = static_cast<double>(clustering.num_clusters());
  return m / (static_cast<double>(n) * (m - 1.0)) *
         GammaCutMass(model, exposure);
}

double LinearClosedFormExpectation(const LinearInterferenceModel& model,
                                   const Clustering& clustering) {
  const std::size_t n = model.num_units();
  RequireClusters(clustering, n);
  const auto exposure = ClusterExposure(clustering, model.graph());
  const double inv_m1 = 1.0 / (static_cast<double>(clustering.num_clusters()) - 1.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double theta = exposure.theta[i];
    sum += model.params().beta[i] +
           model.params().gamma[i] * (theta - inv_m1 * (1.0 - theta));
  }
  return sum / static_cast<double>(n);
}

const char* ToString(MonotonicityKind kind) {
  switch (kind) {
    case MonotonicityKind::kIncreasing: return "increasing";
    case MonotonicityKind::kDecreasing: return "decreasing";
    case MonotonicityKind::kIndeterminate: return "indeterminate";
  }
  return "indeterminate";
}

MonotonicityVerdict ClassifyMonotonicity(const LinearInterferenceModel& model,
                                         const Clustering& clustering) {
  const auto exposure = ClusterExposure(clustering, model.graph());
  MonotonicityVerdict verdict;
  verdict.evidence = GammaCutMass(model, exposure);
  verdict.kind = verdict.evidence >= 0.0 ? MonotonicityKind::kIncreasing
                                         : MonotonicityKind::kDecreasing;
  return verdict;
}

SelfExcitationReport SelfExcitationCheck(const PotentialOutcomeModel& model,
                                         const Clustering& clustering,
                                         const ExpectationMode& mode,
                                         double tolerance) {
  const std::size_t n = model.num_units();
  const std::size_t m = clustering.num_clusters();
  if (clustering.num_units() != n) {
    throw Error(ErrorCode::kDimensionMismatch,
                "clustering size differs from model size");
  }
  if (m < 2) {
    throw Error(ErrorCode::kDegenerateDesign, "need at least 2 clusters");
  }
  const std::size_t m_treated = DefaultTreatedClusters(m);

  std::vector<double> sum[2] = {std::vector<double>(n, 0.0),
                                std::vector<double>(n, 0.0)};
  std::vector<std::size_t> count[2] = {std::vector<std::size_t>(n, 0),
                                       std::vector<std::size_t>(n, 0)};
  std::vector<double> y(n);
  SelfExcitationReport report;

  auto accumulate = [&](const Assignment& z) {
    model.Evaluate(z, std::nullopt, y);
    for (std::size_t i = 0; i < n; ++i) {
      sum[z[i]][i] += y[i];
      ++count[z[i]][i];
    }
    ++report.assignments;
  };

  if (std::holds_alternative<Exhaustive>(mode)) {
    if (m > 20) {
      throw Error(ErrorCode::kInvalidParameter,
                  "exhaustive self-excitation check needs M <= 20");
    }
    std::vector<std::uint8_t> zu(n);
    for (std::uint32_t mask : MasksWithPopcount(m, m_treated)) {
      for (std::size_t i = 0; i < n; ++i) {
        zu[i] = (mask >> clustering.cluster_of(i)) & 1u;
      }
      accumulate(Assignment(zu));
    }
  } else {
    const auto& sampled = std::get<SampledAssignments>(mode);
    for (std::size_t r = 0; r < sampled.replications; ++r) {
      Rng rng = MakeRng(DeriveSeed(sampled.seed, r));
      accumulate(ClusterBasedAssignment(clustering, m_treated, rng).units);
    }
  }

  const auto all_control = model.Outcomes(Assignment::Zeros(n), std::nullopt);
  const auto all_treated = model.Outcomes(Assignment::Ones(n), std::nullopt);
  for (std::size_t i = 0; i < n && report.holds; ++i) {
    for (int status = 0; status < 2; ++status) {
      if (count[status][i] == 0) continue;
      const double mean = sum[status][i] / static_cast<double>(count[status][i]);
      const double extreme = status == 0 ? all_control[i] : all_treated[i];
      const double scale = std::max(1.0, std::abs(extreme));
      const bool ok = status == 0 ? mean >= extreme - tolerance * scale
                                  : mean <= extreme + tolerance * scale;
      if (!ok) {
        report.holds = false;
        report.unit = static_cast<int>(i);
        report.treated_status = status;
        report.conditional_mean = mean;
        report.extreme_outcome = extreme;
        break;
      }
    }
  }
  return report;
}

}  // namespace cbexp
