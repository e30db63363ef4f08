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
#include <numeric>
#include <random>

#include "dcp/composition.h"
#include "dcp/divergence.h"
#include "gtest/gtest.h"
#include "testing/random_instances.h"

namespace dcp {
namespace {

using testing::BinaryRr;

World IdentityWorld() {
  return *MakeWorld({"s0", "s1"}, {"x0", "x1"},
                    Matrix::FromRows({{0.5, 0.0}, {0.0, 0.5}}));
}

double Trapezoid(const RocCurve& roc) {
  double area = 0.0;
  for (std::size_t i = 1; i < roc.vertices.size(); ++i) {
    const RocVertex& a = roc.vertices[i - 1];
    const RocVertex& b = roc.vertices[i];
    area += 0.5 * (b.fpr - a.fpr) * (a.tpr + b.tpr);
  }
  return area;
}

// Interpolated tpr of the curve at `fpr`.
double CurveAt(const RocCurve& roc, double fpr) {
  for (std::size_t i = 1; i < roc.vertices.size(); ++i) {
    const RocVertex& a = roc.vertices[i - 1];
    const RocVertex& b = roc.vertices[i];
    if (fpr <= b.fpr) {
      if (b.fpr == a.fpr) return b.tpr;
      return a.tpr + (b.tpr - a.tpr) * (fpr - a.fpr) / (b.fpr - a.fpr);
    }
  }
  return 1.0;
}

TEST(LrAttackRocTest, IdenticalDistributionsGiveDiagonal) {
  const RocCurve roc = LrAttackRoc({{0.2, 0.3, 0.5}, {0.2, 0.3, 0.5}});
  EXPECT_DOUBLE_EQ(roc.auc, 0.5);
  ASSERT_EQ(roc.vertices.size(), 2u);
  EXPECT_EQ(RocBoundCheck(roc, 0.0, 0.0), 0.0);
}

TEST(LrAttackRocTest, DisjointSupportsGivePerfectAttack) {
  const RocCurve roc = LrAttackRoc({{0.4, 0.6, 0.0}, {0.0, 0.0, 1.0}});
  EXPECT_DOUBLE_EQ(roc.auc, 1.0);
}

TEST(LrAttackRocTest, RandomizedResponseVertices) {
  const RocCurve roc = LrAttackRoc({{0.75, 0.25}, {0.25, 0.75}});
  ASSERT_EQ(roc.vertices.size(), 3u);
  EXPECT_DOUBLE_EQ(roc.vertices[0].fpr, 0.0);
  EXPECT_DOUBLE_EQ(roc.vertices[0].tpr, 0.0);
  EXPECT_DOUBLE_EQ(roc.vertices[1].fpr, 0.25);
  EXPECT_DOUBLE_EQ(roc.vertices[1].tpr, 0.75);
  EXPECT_DOUBLE_EQ(roc.vertices[2].fpr, 1.0);
  EXPECT_DOUBLE_EQ(roc.vertices[2].tpr, 1.0);
  EXPECT_NEAR(roc.auc, 0.75, 1e-15);
  EXPECT_FALSE(roc.flipped);
}

TEST(LrAttackRocTest, SwappedRolesAreFlipped) {
  const RocCurve roc = LrAttackRoc({{0.25, 0.75}, {0.75, 0.25}});
  EXPECT_NEAR(roc.auc, 0.75, 1e-15);
}

TEST(LrAttackRocTest, TiedRatiosMerge) {
  const RocCurve roc =
      LrAttackRoc({{0.3, 0.3, 0.4}, {0.1, 0.1, 0.8}});
  EXPECT_EQ(roc.vertices.size(), 3u);
}

TEST(LrAttackRocTest, RandomPairsInvariants) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const DistPair pair = testing::RandomDistPair(2 + i % 10, rng);
    const RocCurve roc = LrAttackRoc(pair);
    ASSERT_GE(roc.vertices.size(), 2u);
    EXPECT_EQ(roc.vertices.front().fpr, 0.0);
    EXPECT_EQ(roc.vertices.front().tpr, 0.0);
    EXPECT_NEAR(roc.vertices.back().fpr, 1.0, 1e-12);
    EXPECT_NEAR(roc.vertices.back().tpr, 1.0, 1e-12);
    EXPECT_GE(roc.auc, 0.5 - 1e-15);
    EXPECT_LE(roc.auc, 1.0 + 1e-15);
    EXPECT_NEAR(roc.auc, Trapezoid(roc), 1e-12);
    // Concave: slopes do not increase.
    double prev_slope = kInfinity;
    for (std::size_t v = 1; v < roc.vertices.size(); ++v) {
      const double dx = roc.vertices[v].fpr - roc.vertices[v - 1].fpr;
      const double dy = roc.vertices[v].tpr - roc.vertices[v - 1].tpr;
      const double slope = dx > 0.0 ? dy / dx : kInfinity;
      EXPECT_LE(slope, prev_slope * (1.0 + 1e-9) + 1e-12);
      prev_slope = slope;
    }
  }
}

TEST(LrAttackRocTest, RandomDecisionRulesLieBelowCurve) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    const DistPair pair = testing::RandomDistPair(6, rng);
    RocCurve roc = LrAttackRoc(pair);
    for (int r = 0; r < 100; ++r) {
      // Randomized rule: guess "p" on output y with probability φ(y).
      double fpr = 0.0;
      double tpr = 0.0;
      for (std::size_t y = 0; y < pair.p.size(); ++y) {
        const double phi = unit(rng);
        tpr += phi * pair.p[y];
        fpr += phi * pair.q[y];
      }
      if (roc.flipped) {
        EXPECT_LE(fpr, CurveAt(roc, tpr) + 1e-12);
      } else {
        EXPECT_LE(tpr, CurveAt(roc, fpr) + 1e-12);
      }
    }
  }
}

TEST(LrAttackRocTest, AucInvariantUnderRelabeling) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 50; ++i) {
    DistPair pair = testing::RandomDistPair(7, rng);
    const double auc = LrAttackRoc(pair).auc;
    std::vector<int> perm(7);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    DistPair shuffled;
    for (int j : perm) {
      shuffled.p.push_back(pair.p[j]);
      shuffled.q.push_back(pair.q[j]);
    }
    EXPECT_NEAR(LrAttackRoc(shuffled).auc, auc, 1e-12);
  }
}

TEST(RocBoundCheckTest, RandomizedResponseExamples) {
  const RocCurve roc = LrAttackRoc({{0.75, 0.25}, {0.25, 0.75}});
  EXPECT_NEAR(RocBoundCheck(roc, std::log(3.0), 0.0), 0.0, 1e-15);
  EXPECT_NEAR(RocBoundCheck(roc, 0.5, 0.0), 0.75 - std::exp(0.5) * 0.25,
              1e-15);
}

TEST(RocBoundCheckTest, TightCertificatesNeverViolated) {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 100; ++i) {
    const DistPair pair = testing::RandomDistPair(5, rng, false);
    for (double delta : {0.0, 0.02, 0.1}) {
      const double eps = *OptimalEpsilon(pair, delta);
      const DistPair reverse{pair.q, pair.p};
      const double eps2 = std::max(eps, *OptimalEpsilon(reverse, delta));
      EXPECT_LE(RocBoundCheck(LrAttackRoc(pair), eps2, delta), 1e-9);
    }
  }
}

TEST(RocBoundCheckTest, TrueOptCertificateOnWorld) {
  std::mt19937_64 rng(23);
  for (int i = 0; i < 20; ++i) {
    World w = testing::RandomWorld(2, 3, rng);
    std::vector<MechanismKernel> mechs = {
        testing::RandomRrMechanism(3, 2, rng, "a"),
        testing::RandomRrMechanism(3, 2, rng, "b")};
    const double eps = TrueOpt(w, mechs, {}, 0.02)->max;
    const Matrix channel = ComposeJoint(w, mechs, {})->rows;
    for (const SecretPair& p : w.adjacency) {
      EXPECT_LE(RocBoundCheck(LrAttackRoc(ChannelPair(channel, p)), eps, 0.02),
                1e-9);
    }
  }
}

TEST(WorstPairAucTest, PicksLargestAndHonoursPair) {
  World w = *MakeWorld({"a", "b", "c"}, {"x0", "x1", "x2"},
                       Matrix::FromRows({{0.3, 0.0, 0.0},
                                         {0.0, 0.3, 0.0},
                                         {0.0, 0.0, 0.4}}));
  Matrix channel = Matrix::FromRows({{0.9, 0.1}, {0.6, 0.4}, {0.1, 0.9}});
  const PairAuc worst = *WorstPairAuc(w, channel);
  EXPECT_NEAR(worst.roc.auc, 0.9, 1e-12);
  EXPECT_TRUE((worst.pair == SecretPair{0, 2}) ||
              (worst.pair == SecretPair{2, 0}));
  const PairAuc chosen = *WorstPairAuc(w, channel, SecretPair{0, 1});
  EXPECT_NEAR(chosen.roc.auc, 0.5 + 0.5 * (0.9 - 0.6), 1e-12);
  EXPECT_EQ(WorstPairAuc(w, channel, SecretPair{0, 5}).status().code(),
            absl::StatusCode::kOutOfRange);
}

AuditSetup MakeSetup(const std::string& name, Matrix channel, double eps,
                 bool certified) {
  return AuditSetup{name, std::move(channel), eps, 0.0, certified};
}

TEST(AuditOneTest, UninformativeSetupsGiveHalf) {
  Matrix flat = Matrix::FromRows({{0.5, 0.5}, {0.5, 0.5}});
  AuditCase c{1.0, 0.0, MakeSetup("a", flat, 1.0, true), MakeSetup("b", flat, 1.0, true)};
  const AuditRow row = *AuditOne(IdentityWorld(), c);
  EXPECT_DOUBLE_EQ(row.auc_composed, 0.5);
  EXPECT_DOUBLE_EQ(row.auc_single, 0.5);
  EXPECT_DOUBLE_EQ(row.gap, 0.0);
}

TEST(AuditOneTest, GapAndViolations) {
  Matrix rr75 = Matrix::FromRows({{0.75, 0.25}, {0.25, 0.75}});
  Matrix rr60 = Matrix::FromRows({{0.6, 0.4}, {0.4, 0.6}});
  AuditCase c{std::log(3.0), 0.0, MakeSetup("a", rr75, std::log(3.0), true),
              MakeSetup("b", rr60, 0.1, true)};
  const AuditRow row = *AuditOne(IdentityWorld(), c);
  EXPECT_NEAR(row.auc_composed, 0.75, 1e-12);
  EXPECT_NEAR(row.auc_single, 0.6, 1e-12);
  EXPECT_NEAR(row.gap, 0.15, 1e-12);
  EXPECT_NEAR(row.violation_composed, 0.0, 1e-15);
  EXPECT_NEAR(row.violation_single, 0.6 - std::exp(0.1) * 0.4, 1e-12);
}

TEST(AuditOneTest, MissingCertificateFails) {
  Matrix flat = Matrix::FromRows({{0.5, 0.5}, {0.5, 0.5}});
  AuditCase c{1.0, 0.0, MakeSetup("a", flat, 1.0, true),
              MakeSetup("b", flat, 1.0, false)};
  EXPECT_EQ(AuditOne(IdentityWorld(), c).status().code(),
            absl::StatusCode::kFailedPrecondition);
  EXPECT_FALSE(CompareProtocol(IdentityWorld(), {c}).ok());
}

TEST(CompareProtocolTest, OneRowPerCase) {
  Matrix rr75 = Matrix::FromRows({{0.75, 0.25}, {0.25, 0.75}});
  Matrix flat = Matrix::FromRows({{0.5, 0.5}, {0.5, 0.5}});
  std::vector<AuditCase> cases = {
      {0.5, 0.0, MakeSetup("a", flat, 0.5, true), MakeSetup("b", flat, 0.5, true)},
      {1.5, 0.0, MakeSetup("a", rr75, 1.5, true), MakeSetup("b", rr75, 1.5, true)}};
  const std::vector<AuditRow> rows = *CompareProtocol(IdentityWorld(), cases);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_DOUBLE_EQ(rows[0].eps_g, 0.5);
  EXPECT_NEAR(rows[1].auc_composed, 0.75, 1e-12);
  EXPECT_NEAR(rows[1].gap, 0.0, 1e-15);
}

}  // namespace
}  // namespace dcp
