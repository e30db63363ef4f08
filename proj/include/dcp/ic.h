// Copyright 2026 The DCP Toolkit Authors
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

// Inverse composition: choose an added mechanism α(y_α | s) so that the
// posterior of the full composition lies in the ratio-constraint set
// Π[τ_g, δ_g], which certifies the composition at (ε(τ_g), δ_g). Task 1 fixes
// τ_g and designs α; Task 2 adds nothing and finds the smallest τ_g.

#ifndef DCP_IC_H_
#define DCP_IC_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "dcp/common.h"
#include "dcp/model.h"

namespace dcp {

// ε(τ) = log(1 + (τ − 1)/P*).
absl::StatusOr<double> EpsilonOfTau(double tau, double p_star);
absl::StatusOr<double> EpsilonOfTau(double tau, const World& world);

// Which inequalities define Π.
//   kPure:        τ⁻¹P(s) ≤ π(s|y) ≤ τ P(s).
//   kExpectation: π(s|y) ≥ τ⁻¹P(s) and Σ_s π(s|y)²/P(s) ≤ δ τ.
//   kAuto:        kExpectation when δτ ≥ 1 and τ·P_min < 1, kPure otherwise.
//                 Below δτ = 1 the expectation form is empty (Σ π²/P ≥ 1
//                 always); once τ·P_min ≥ 1 the pure upper bound is vacuous
//                 and the pure set contains the expectation set.
// P_min is the smallest positive prior mass.
enum class ConstraintVariant { kAuto, kPure, kExpectation };

ConstraintVariant ResolveVariant(ConstraintVariant variant, double tau,
                                 double delta, double p_min);
const char* VariantName(ConstraintVariant variant);

// μ(s | ŷ, y_α) for the existing composition followed by α. Outcome index is
// ŷ · m + y_α with ŷ enumerated as in ComposeJoint.
struct PosteriorTable {
  // Rows are joint outcomes, columns are secrets. Absent rows are zero.
  Matrix mu;
  // Marginal probability of each joint outcome.
  std::vector<double> outcome_mass;
  std::vector<bool> present;
};

absl::StatusOr<PosteriorTable> Posterior(
    const World& world, const std::vector<MechanismKernel>& mechs,
    const std::vector<DependenceGroup>& dependence, const Matrix& alpha,
    std::size_t cap = kDefaultOutcomeCap);

// Secret-to-output channel of the existing composition followed by α, with
// outcomes indexed as in Posterior.
absl::StatusOr<Matrix> CompositionWithAlpha(
    const World& world, const std::vector<MechanismKernel>& mechs,
    const std::vector<DependenceGroup>& dependence, const Matrix& alpha,
    std::size_t cap = kDefaultOutcomeCap);

struct FeasibilityReport {
  ConstraintVariant variant = ConstraintVariant::kPure;
  // Signed maxima; each is ≤ 0 when its family of inequalities holds.
  double lower = -kInfinity;
  double upper = -kInfinity;
  double expectation = -kInfinity;

  double max_residual() const;
  bool feasible(double tolerance = kProbabilityTolerance) const {
    return max_residual() <= tolerance;
  }
};

// Rows of `pi` flagged absent in `present` are skipped; an empty `present`
// means every row counts.
FeasibilityReport PiFeasible(const Matrix& pi, const std::vector<bool>& present,
                             const World& world, double tau, double delta,
                             ConstraintVariant variant = ConstraintVariant::kAuto);

enum class LossKind { kLog, kBrier };

// Expected scoring-rule loss of `pi` under the joint weight
// P(s) b(ŷ|s) α(y_α|s). The log loss returns +∞ when π vanishes on a cell of
// positive weight.
absl::StatusOr<double> SpsrLoss(const Matrix& pi, const World& world,
                                const std::vector<MechanismKernel>& mechs,
                                const std::vector<DependenceGroup>& dependence,
                                const Matrix& alpha, LossKind loss,
                                std::size_t cap = kDefaultOutcomeCap);

struct PenaltySchedule {
  double initial_weight = 10.0;
  double growth = 10.0;
  int rounds = 8;
  double inner_tolerance = 1e-8;
  int max_inner_iterations = 400;
};

struct IcProblem {
  World world;
  std::vector<MechanismKernel> mechs;
  std::vector<DependenceGroup> dependence;
  double delta_g = 0.0;
  // Fixed for Task 1, ignored by Task 2.
  double tau_g = 1.0;
  int alphabet_size = 2;
  LossKind loss = LossKind::kLog;
  PenaltySchedule schedule;
  ConstraintVariant variant = ConstraintVariant::kAuto;
  // When false the penalty is dropped and only the scoring rule is minimized.
  bool constrained = true;
  std::uint64_t seed = 0;
  std::size_t cap = kDefaultOutcomeCap;
};

struct CertReport {
  FeasibilityReport feasibility;
  bool stage1 = false;
  // Joint probability that π(S|y)/P(S) leaves [1/τ, τ].
  double tail_mass = 0.0;
  bool stage2 = false;
  // Largest hockey-stick of the full composition over adjacent pairs.
  double direct_check_delta = 0.0;
  bool stage3 = false;
  bool certified = false;
  // Stage 1 passed while a later stage failed.
  bool internal_error = false;
  std::string note;
};

// `alpha` of std::nullopt certifies the existing composition alone.
absl::StatusOr<CertReport> Certify(
    const World& world, const std::vector<MechanismKernel>& mechs,
    const std::vector<DependenceGroup>& dependence,
    const std::optional<Matrix>& alpha, double tau, double delta,
    ConstraintVariant variant = ConstraintVariant::kAuto,
    std::size_t cap = kDefaultOutcomeCap);

struct IcSolution {
  // α(y_α | s); rows are secrets.
  Matrix alpha;
  // Exact posterior under `alpha`.
  Matrix pi;
  // Last iterate of the optimizer before it was replaced by the posterior.
  Matrix solver_pi;
  std::vector<bool> present;
  double tau_g = 1.0;
  double eps_g = 0.0;
  ConstraintVariant variant = ConstraintVariant::kPure;
  double feasibility = 0.0;
  bool certified = false;
  double direct_check_delta = 0.0;
  CertReport cert;
  double loss = 0.0;
  std::vector<std::string> diagnostics;
};

absl::StatusOr<IcSolution> SolveTask1(const IcProblem& problem);

// Smallest τ_g certified by the existing composition; kAuto takes the better
// of the two constraint variants.
absl::StatusOr<IcSolution> SolveTask2(const IcProblem& problem);

}  // namespace dcp

#endif  // DCP_IC_H_
