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

// Finite worlds {θ, G}: secrets, datasets, their joint distribution, the
// adjacency relation over secrets, mechanism kernels and the effective
// secret-to-output channels they induce.

#ifndef DCP_MODEL_H_
#define DCP_MODEL_H_

#include <compare>
#include <optional>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "dcp/common.h"
#include "json.hpp"

namespace dcp {

struct SecretPair {
  int first = 0;
  int second = 0;
  auto operator<=>(const SecretPair&) const = default;
};

struct World {
  std::vector<std::string> secrets;
  std::vector<std::string> datasets;
  // P(s, x); rows are secrets, columns are datasets.
  Matrix joint;
  // Ordered pairs, sorted and closed under reversal.
  std::vector<SecretPair> adjacency;
  // P(s), derived from `joint`.
  std::vector<double> secret_marginals;

  int num_secrets() const { return static_cast<int>(secrets.size()); }
  int num_datasets() const { return static_cast<int>(datasets.size()); }

  // Smallest prior mass among secrets that appear in the adjacency relation.
  // Falls back to all positive-mass secrets when the relation is empty.
  double PStar() const;
};

// Adjacency through a secret metric: Q = {(s, s') : D(s, s') <= d}.
struct MetricTable {
  Matrix distances;
  double threshold = 0.0;
};

// Builds and validates a world. Exactly one of `pairs` and `metric` may be
// given; with neither, every ordered pair of distinct positive-mass secrets
// is adjacent.
absl::StatusOr<World> MakeWorld(
    std::vector<std::string> secrets, std::vector<std::string> datasets,
    Matrix joint, std::optional<std::vector<SecretPair>> pairs = std::nullopt,
    std::optional<MetricTable> metric = std::nullopt);

absl::Status ValidateWorld(const World& world);

absl::StatusOr<std::vector<SecretPair>> BuildAdjacency(
    const Matrix& metric, double threshold, const World& world);

// P(x | s).
absl::StatusOr<std::vector<double>> ConditionalDataset(const World& world,
                                                       int secret);

struct InvertibilityReport {
  bool invertible = false;
  // Witness dataset per secret; -1 for secrets without one or with zero mass.
  std::vector<int> witness;
};

InvertibilityReport IsInvertible(const World& world);

struct MechanismKernel {
  std::string name;
  std::vector<std::string> outputs;
  // γ(y | x); rows are datasets, columns are outputs.
  Matrix kernel;

  int num_outputs() const { return static_cast<int>(kernel.cols()); }
};

absl::Status ValidateMechanism(const MechanismKernel& mech, int num_datasets);

// Mechanisms whose outputs are jointly distributed given the dataset. The
// joint alphabet enumerates member outputs with the last member varying
// fastest.
struct DependenceGroup {
  std::vector<int> members;
  Matrix joint_kernel;
  std::vector<std::string> joint_outputs;
};

absl::Status ValidateDependenceGroups(
    const std::vector<DependenceGroup>& groups,
    const std::vector<MechanismKernel>& mechs, int num_datasets);

// Marginal of a group's joint kernel onto its `position`-th member.
Matrix GroupMarginal(const DependenceGroup& group,
                     const std::vector<MechanismKernel>& mechs, int position);

struct EffectiveKernel {
  // ψ(y | s); rows are secrets. Rows of zero-mass secrets are all zero.
  Matrix psi;

  // Ψ(y | s): running sums of the row of `secret` in output order.
  std::vector<double> Cumulative(int secret) const;
};

absl::StatusOr<EffectiveKernel> ComputeEffectiveKernel(
    const World& world, const MechanismKernel& mech);

struct Model {
  World world;
  std::vector<MechanismKernel> mechanisms;
  std::vector<DependenceGroup> dependence;
};

absl::StatusOr<Model> ParseModel(const nlohmann::json& doc);
absl::StatusOr<nlohmann::json> ReadJsonFile(const std::string& path);
absl::StatusOr<Model> LoadModel(const std::string& path);
absl::StatusOr<World> LoadWorld(const std::string& path);

nlohmann::json ModelToJson(const Model& model);

}  // namespace dcp

#endif  // DCP_MODEL_H_
