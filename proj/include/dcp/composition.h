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

// Composition of mechanisms that read the same dataset, the three
// composition accounts (dependence-blind, exact, copula-charged), DP
// composition baselines and informativeness comparisons.

#ifndef DCP_COMPOSITION_H_
#define DCP_COMPOSITION_H_

#include <optional>
#include <utility>
#include <vector>

#include "absl/status/statusor.h"
#include "dcp/divergence.h"
#include "dcp/model.h"
#include "dcp/pld.h"

namespace dcp {

// Output distribution of the composed mechanism per secret. Outcomes are
// enumerated in mixed radix over the mechanisms, mechanism 0 most
// significant.
struct ComposedJoint {
  Matrix rows;
  std::vector<int> radices;

  std::size_t num_outcomes() const { return rows.cols(); }
  std::vector<int> Decode(std::size_t outcome) const;
};

// A dependence group or a lone mechanism, with its kernel over the block's
// own product alphabet.
struct CompositionBlock {
  std::vector<int> members;
  Matrix kernel;
};

std::vector<CompositionBlock> CompositionBlocks(
    const std::vector<MechanismKernel>& mechs,
    const std::vector<DependenceGroup>& dependence);

// Index of the block-local outcome for a full outcome vector.
std::size_t BlockOutcome(const CompositionBlock& block,
                         const std::vector<MechanismKernel>& mechs,
                         const std::vector<int>& outputs);

absl::StatusOr<ComposedJoint> ComposeJoint(
    const World& world, const std::vector<MechanismKernel>& mechs,
    const std::vector<DependenceGroup>& dependence,
    std::size_t cap = kDefaultOutcomeCap);

// Π_i ψ_i(y_i | s): the composition as if the effective mechanisms were
// independent given the secret.
absl::StatusOr<Matrix> ProductOfEffectiveKernels(
    const World& world, const std::vector<MechanismKernel>& mechs,
    std::size_t cap = kDefaultOutcomeCap);

struct PairValue {
  SecretPair pair;
  double value = 0.0;
};

struct PairwiseBound {
  std::vector<PairValue> per_pair;
  double max = 0.0;
};

absl::StatusOr<PairwiseBound> TrueOpt(
    const World& world, const std::vector<MechanismKernel>& mechs,
    const std::vector<DependenceGroup>& dependence, double delta_g,
    std::size_t cap = kDefaultOutcomeCap);

absl::StatusOr<PairwiseBound> UnderlineOpt(
    const World& world, const std::vector<MechanismKernel>& mechs,
    double delta_g, std::size_t cap = kDefaultOutcomeCap);

// Same quantity through convolution of the marginal PLDs.
absl::StatusOr<PairwiseBound> UnderlineOptByConvolution(
    const World& world, const std::vector<MechanismKernel>& mechs,
    double delta_g);

absl::StatusOr<PairwiseBound> OverlineOpt(
    const World& world, const std::vector<MechanismKernel>& mechs,
    const std::vector<DependenceGroup>& dependence, double delta_g,
    std::size_t cap = kDefaultOutcomeCap);

absl::StatusOr<PairwiseBound> TrueDt(
    const World& world, const std::vector<MechanismKernel>& mechs,
    const std::vector<DependenceGroup>& dependence, double eps_g,
    std::size_t cap = kDefaultOutcomeCap);

absl::StatusOr<PairwiseBound> UnderlineDt(
    const World& world, const std::vector<MechanismKernel>& mechs,
    double eps_g, std::size_t cap = kDefaultOutcomeCap);

absl::StatusOr<PairwiseBound> OverlineDt(
    const World& world, const std::vector<MechanismKernel>& mechs,
    const std::vector<DependenceGroup>& dependence, double eps_g,
    std::size_t cap = kDefaultOutcomeCap);

// Copula-charged PLD for one ordered pair: the law of L^G + L^C under s0
// convolved with every marginal PLD.
absl::StatusOr<Pld> OverlinePld(const World& world,
                                const std::vector<MechanismKernel>& mechs,
                                const std::vector<DependenceGroup>& dependence,
                                SecretPair pair,
                                std::size_t cap = kDefaultOutcomeCap);

struct BasicCompositionOptions {
  // Per-mechanism δ_i. When absent, every mechanism gets ε_i =
  // epsilon_budget / k and its tight δ_i at that ε_i.
  std::optional<std::vector<double>> deltas;
  double epsilon_budget = 1.0;
};

struct BasicCompositionVerdict {
  bool holds = true;
  std::vector<double> epsilons;
  std::vector<double> deltas;
  double epsilon_sum = 0.0;
  double delta_sum = 0.0;
  // Pair with the largest composed hockey-stick at epsilon_sum.
  SecretPair worst_pair;
  double composed_delta = 0.0;
};

absl::StatusOr<BasicCompositionVerdict> BasicCompositionCheck(
    const World& world, const std::vector<MechanismKernel>& mechs,
    const std::vector<DependenceGroup>& dependence,
    const BasicCompositionOptions& options = {},
    std::size_t cap = kDefaultOutcomeCap);

struct CompositionRow {
  SecretPair pair;
  double delta_g = 0.0;
  double underline_opt = 0.0;
  double true_opt = 0.0;
  double overline_opt = 0.0;
};

struct ProfileRow {
  SecretPair pair;
  double eps_g = 0.0;
  double underline_dt = 0.0;
  double true_dt = 0.0;
  double overline_dt = 0.0;
};

struct CompositionReport {
  std::vector<CompositionRow> opt_rows;
  std::vector<ProfileRow> profile_rows;
  BasicCompositionVerdict basic;

  // underline ≤ true ≤ overline + tolerance on every row.
  bool OrderingHolds(double tolerance = 1e-9) const;
};

absl::StatusOr<CompositionReport> ComputeCompositionReport(
    const World& world, const std::vector<MechanismKernel>& mechs,
    const std::vector<DependenceGroup>& dependence,
    const std::vector<double>& delta_grid,
    const std::vector<double>& eps_grid,
    std::size_t cap = kDefaultOutcomeCap);

// Four-outcome pair whose hockey-stick curve is the worst case of an
// (eps, delta) guarantee.
absl::StatusOr<DistPair> DominatingPair(double eps, double delta);

// Optimal DP composition of (ε_i, δ_i) guarantees at delta_g.
absl::StatusOr<double> DpOptComp(
    const std::vector<std::pair<double, double>>& params, double delta_g);

struct TradeoffDominanceReport {
  // max over pairs and α of β_joint(α) − β_product(α); positive values mean
  // the joint curve lies above the product curve.
  double max_violation = 0.0;
  // max over pairs and α of β_product(α) − β_joint(α).
  double max_gap = 0.0;
  SecretPair worst_pair;
};

absl::StatusOr<TradeoffDominanceReport> TradeoffDominance(
    const World& world, const std::vector<MechanismKernel>& mechs,
    std::size_t cap = kDefaultOutcomeCap);

struct CelReport {
  double cel_joint = 0.0;
  double cel_product = 0.0;
};

// Expected cross-entropy of the posterior computed from the true composed
// joint and of the posterior computed from the product of marginals, both
// under the true data law.
absl::StatusOr<CelReport> CelCompare(const World& world,
                                     const std::vector<MechanismKernel>& mechs,
                                     std::size_t cap = kDefaultOutcomeCap);

}  // namespace dcp

#endif  // DCP_COMPOSITION_H_
