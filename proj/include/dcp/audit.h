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

// Exact membership-inference audits: ROC of the likelihood-ratio attacker
// that tells two adjacent secrets apart, and checks of that ROC against an
// (ε, δ) certificate.

#ifndef DCP_AUDIT_H_
#define DCP_AUDIT_H_

#include <optional>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "dcp/common.h"
#include "dcp/divergence.h"
#include "dcp/model.h"

namespace dcp {

struct RocVertex {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  // From (0, 0) to (1, 1).
  std::vector<RocVertex> vertices;
  double auc = 0.5;
  // The attacker's decision was inverted to bring auc to at least 1/2.
  bool flipped = false;
};

// Attacker guessing "p" on the outputs with the largest p/q first. Ties in
// the ratio are merged into one vertex.
RocCurve LrAttackRoc(const DistPair& pair);

// Largest excess of tpr over e^eps·fpr + delta, and of 1 − fpr over
// e^eps(1 − tpr) + delta, over the vertices.
double RocBoundCheck(const RocCurve& roc, double eps, double delta);

struct PairAuc {
  SecretPair pair;
  RocCurve roc;
};

// ROC of the adjacent pair with the largest AUC, or of `pair` when given.
absl::StatusOr<PairAuc> WorstPairAuc(
    const World& world, const Matrix& channel,
    std::optional<SecretPair> pair = std::nullopt);

// A secret-to-output channel together with the certificate it carries.
struct AuditSetup {
  std::string name;
  Matrix channel;
  double eps = 0.0;
  double delta = 0.0;
  bool certified = false;
};

struct AuditCase {
  double eps_g = 0.0;
  double delta_g = 0.0;
  AuditSetup composed;
  AuditSetup single;
};

struct AuditRow {
  double eps_g = 0.0;
  double delta_g = 0.0;
  double auc_composed = 0.5;
  double auc_single = 0.5;
  double gap = 0.0;
  double violation_composed = 0.0;
  double violation_single = 0.0;
};

absl::StatusOr<AuditRow> AuditOne(const World& world, const AuditCase& c,
                                  std::optional<SecretPair> pair = std::nullopt);

// Fails when either setup of any case lacks a certificate.
absl::StatusOr<std::vector<AuditRow>> CompareProtocol(
    const World& world, const std::vector<AuditCase>& cases,
    std::optional<SecretPair> pair = std::nullopt);

}  // namespace dcp

#endif  // DCP_AUDIT_H_
