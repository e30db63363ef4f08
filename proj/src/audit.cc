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

#include "dcp/audit.h"

#include <algorithm>
#include <cmath>

#include "absl/strings/str_format.h"

namespace dcp {
namespace {

double TrapezoidArea(const std::vector<RocVertex>& v) {
  double area = 0.0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    area += 0.5 * (v[i].fpr - v[i - 1].fpr) * (v[i].tpr + v[i - 1].tpr);
  }
  return area;
}

}  // namespace

RocCurve LrAttackRoc(const DistPair& pair) {
  RocCurve roc;
  roc.vertices.push_back({0.0, 0.0});
  double fpr = 0.0;
  double tpr = 0.0;
  for (const RatioBlock& b : SortedRatioBlocks(pair)) {
    fpr += b.q;
    tpr += b.p;
    roc.vertices.push_back({std::min(fpr, 1.0), std::min(tpr, 1.0)});
  }
  // Rounding may leave the last vertex a hair short of the corner.
  RocVertex& last = roc.vertices.back();
  if (std::abs(last.fpr - 1.0) <= kMarginalTolerance &&
      std::abs(last.tpr - 1.0) <= kMarginalTolerance) {
    last = {1.0, 1.0};
  } else {
    roc.vertices.push_back({1.0, 1.0});
  }
  roc.auc = TrapezoidArea(roc.vertices);
  if (roc.auc < 0.5) {
    for (RocVertex& v : roc.vertices) v = {1.0 - v.fpr, 1.0 - v.tpr};
    std::reverse(roc.vertices.begin(), roc.vertices.end());
    roc.auc = TrapezoidArea(roc.vertices);
    roc.flipped = true;
  }
  return roc;
}

double RocBoundCheck(const RocCurve& roc, double eps, double delta) {
  const double scale = std::exp(eps);
  double worst = -kInfinity;
  for (const RocVertex& v : roc.vertices) {
    worst = std::max(worst, v.tpr - scale * v.fpr - delta);
    worst = std::max(worst, (1.0 - v.fpr) - scale * (1.0 - v.tpr) - delta);
  }
  return worst;
}

absl::StatusOr<PairAuc> WorstPairAuc(const World& world, const Matrix& channel,
                                     std::optional<SecretPair> pair) {
  if (static_cast<int>(channel.rows()) != world.num_secrets()) {
    return absl::InvalidArgumentError("channel needs one row per secret");
  }
  if (pair.has_value()) {
    if (pair->first < 0 || pair->second < 0 ||
        pair->first >= world.num_secrets() ||
        pair->second >= world.num_secrets()) {
      return absl::OutOfRangeError("audited pair names an unknown secret");
    }
    return PairAuc{*pair, LrAttackRoc(ChannelPair(channel, *pair))};
  }
  if (world.adjacency.empty()) {
    return absl::FailedPreconditionError("nothing to audit: no adjacent pairs");
  }
  PairAuc best{world.adjacency.front(), {}};
  best.roc.auc = -1.0;
  for (const SecretPair& p : world.adjacency) {
    RocCurve roc = LrAttackRoc(ChannelPair(channel, p));
    if (roc.auc > best.roc.auc) best = {p, std::move(roc)};
  }
  return best;
}

absl::StatusOr<AuditRow> AuditOne(const World& world, const AuditCase& c,
                                  std::optional<SecretPair> pair) {
  for (const AuditSetup* s : {&c.composed, &c.single}) {
    if (!s->certified) {
      return absl::FailedPreconditionError(absl::StrFormat(
          "setup '%s' has no certificate at eps_g = %g", s->name, c.eps_g));
    }
  }
  absl::StatusOr<PairAuc> a = WorstPairAuc(world, c.composed.channel, pair);
  if (!a.ok()) return a.status();
  absl::StatusOr<PairAuc> b = WorstPairAuc(world, c.single.channel, pair);
  if (!b.ok()) return b.status();
  AuditRow row;
  row.eps_g = c.eps_g;
  row.delta_g = c.delta_g;
  row.auc_composed = a->roc.auc;
  row.auc_single = b->roc.auc;
  row.gap = row.auc_composed - row.auc_single;
  // Every adjacent pair is held to the certificate, not only the worst one.
  for (const SecretPair& p : world.adjacency) {
    row.violation_composed = std::max(
        row.violation_composed,
        RocBoundCheck(LrAttackRoc(ChannelPair(c.composed.channel, p)),
                      c.composed.eps, c.composed.delta));
    row.violation_single = std::max(
        row.violation_single,
        RocBoundCheck(LrAttackRoc(ChannelPair(c.single.channel, p)),
                      c.single.eps, c.single.delta));
  }
  return row;
}

absl::StatusOr<std::vector<AuditRow>> CompareProtocol(
    const World& world, const std::vector<AuditCase>& cases,
    std::optional<SecretPair> pair) {
  std::vector<AuditRow> rows;
  for (const AuditCase& c : cases) {
    absl::StatusOr<AuditRow> row = AuditOne(world, c, pair);
    if (!row.ok()) return row.status();
    rows.push_back(*row);
  }
  return rows;
}

}  // namespace dcp
