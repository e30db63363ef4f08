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


#include "dcp/pld.h"

#include <cmath>
#include <random>
#include <sstream>

#include "dcp/composition.h"
#include "dcp/divergence.h"
#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "testing/random_instances.h"

namespace dcp {
namespace {

const double kLn3 = std::log(3.0);

void ExpectPldNear(const Pld& a, const Pld& b, double tol) {
  ASSERT_EQ(a.atoms().size(), b.atoms().size());
  for (std::size_t i = 0; i < a.atoms().size(); ++i) {
    const Pld::Atom& x = a.atoms()[i];
    const Pld::Atom& y = b.atoms()[i];
    if (std::isinf(x.loss) || std::isinf(y.loss)) {
      EXPECT_EQ(x.loss, y.loss);
    } else {
      EXPECT_NEAR(x.loss, y.loss, tol);
    }
    EXPECT_NEAR(x.mass, y.mass, tol);
  }
  EXPECT_NEAR(a.inf_mass(), b.inf_mass(), tol);
}

Pld Rr75() { return PldFromPair({{0.75, 0.25}, {0.25, 0.75}}); }

TEST(PldFromPairTest, IdenticalPairIsPointMassAtZero) {
  Pld pld = PldFromPair({{0.3, 0.7}, {0.3, 0.7}});
  ASSERT_EQ(pld.atoms().size(), 1u);
  EXPECT_EQ(pld.atoms()[0].loss, 0.0);
  EXPECT_NEAR(pld.atoms()[0].mass, 1.0, 1e-15);
}

TEST(PldFromPairTest, RandomizedResponse) {
  Pld pld = Rr75();
  ASSERT_EQ(pld.atoms().size(), 2u);
  EXPECT_NEAR(pld.atoms()[0].loss, -kLn3, 1e-15);
  EXPECT_NEAR(pld.atoms()[0].mass, 0.25, 1e-15);
  EXPECT_NEAR(pld.atoms()[1].loss, kLn3, 1e-15);
  EXPECT_NEAR(pld.atoms()[1].mass, 0.75, 1e-15);
  EXPECT_EQ(pld.inf_mass(), 0.0);
}

TEST(PldFromPairTest, MassWithoutSupportGoesToInfinity) {
  Pld pld = PldFromPair({{0.5, 0.5}, {1.0, 0.0}});
  ASSERT_EQ(pld.atoms().size(), 1u);
  EXPECT_NEAR(pld.atoms()[0].loss, -std::log(2.0), 1e-15);
  EXPECT_NEAR(pld.atoms()[0].mass, 0.5, 1e-15);
  EXPECT_NEAR(pld.inf_mass(), 0.5, 1e-15);
}

TEST(ConvolveTest, PointMassesAdd) {
  Pld c = Convolve(Pld::PointMass(0.5), Pld::PointMass(-1.25));
  ASSERT_EQ(c.atoms().size(), 1u);
  EXPECT_NEAR(c.atoms()[0].loss, -0.75, 1e-15);
}

TEST(ConvolveTest, ZeroPointMassIsIdentity) {
  ExpectPldNear(Convolve(Rr75(), Pld::PointMass(0.0)), Rr75(), 1e-15);
}

TEST(ConvolveTest, RandomizedResponseSquared) {
  Pld c = Convolve(Rr75(), Rr75());
  ASSERT_EQ(c.atoms().size(), 3u);
  EXPECT_NEAR(c.atoms()[0].loss, -2 * kLn3, 1e-12);
  EXPECT_NEAR(c.atoms()[0].mass, 0.0625, 1e-15);
  EXPECT_NEAR(c.atoms()[1].loss, 0.0, 1e-12);
  EXPECT_NEAR(c.atoms()[1].mass, 0.375, 1e-15);
  EXPECT_NEAR(c.atoms()[2].loss, 2 * kLn3, 1e-12);
  EXPECT_NEAR(c.atoms()[2].mass, 0.5625, 1e-15);
}

TEST(ConvolveTest, InfinityMassCombines) {
  Pld a = PldFromPair({{0.5, 0.5}, {1.0, 0.0}});
  Pld b = PldFromPair({{0.8, 0.2}, {1.0, 0.0}});
  EXPECT_NEAR(Convolve(a, b).inf_mass(), 0.5 + 0.2 - 0.1, 1e-15);
}

TEST(PrivacyProfileTest, Examples) {
  EXPECT_EQ(PrivacyProfile(Pld::PointMass(0.0), 0.0), 0.0);
  EXPECT_NEAR(PrivacyProfile(Rr75(), 0.0), 0.5, 1e-15);
  Pld tail({{-1.0, 0.4}, {0.2, 0.3}}, 0.3);
  EXPECT_NEAR(PrivacyProfile(tail, 0.5), 0.3, 1e-15);
}

TEST(PldCsvTest, RoundTrip) {
  Pld pld = Convolve(Rr75(), PldFromPair({{0.5, 0.5, 0.0}, {0.7, 0.0, 0.3}}));
  std::stringstream csv;
  WritePldCsv(pld, csv);
  EXPECT_THAT(csv.str(), ::testing::StartsWith("loss,mass\n"));
  absl::StatusOr<Pld> back = ReadPldCsv(csv);
  ASSERT_TRUE(back.ok()) << back.status();
  ExpectPldNear(*back, pld, 0.0);
}

World TwoSecretWorld(const Matrix& joint) {
  return *MakeWorld({"s0", "s1"}, {"x0", "x1"}, joint);
}

TEST(DecomposePlrvTest, InvertibleIndependentHasNoCopulaTerms) {
  World w = TwoSecretWorld(Matrix::FromRows({{0.4, 0.0}, {0.0, 0.6}}));
  std::vector<MechanismKernel> mechs = {testing::BinaryRr(0.8, "a"),
                                        testing::BinaryRr(0.65, "b")};
  PlrvDecomposition d = *DecomposePlrv(w, mechs, {}, {0, 1});
  for (std::size_t o = 0; o < d.total.size(); ++o) {
    EXPECT_NEAR(d.copula_of_g[o], 0.0, 1e-12);
    EXPECT_NEAR(d.dependence[o], 0.0, 1e-12);
  }
}

TEST(DecomposePlrvTest, SingleMechanismIsAllIndependent) {
  World w = TwoSecretWorld(Matrix::FromRows({{0.3, 0.2}, {0.1, 0.4}}));
  PlrvDecomposition d =
      *DecomposePlrv(w, {testing::BinaryRr(0.8, "a")}, {}, {0, 1});
  for (std::size_t o = 0; o < d.total.size(); ++o) {
    EXPECT_EQ(d.total[o], d.independent[o]);
  }
}

TEST(DecomposePlrvTest, MixingWorldHasCopulaOfG) {
  World w = TwoSecretWorld(Matrix::FromRows({{0.25, 0.25}, {0.5, 0.0}}));
  std::vector<MechanismKernel> mechs = {testing::BinaryRr(0.9, "a"),
                                        testing::BinaryRr(0.9, "b")};
  PlrvDecomposition d = *DecomposePlrv(w, mechs, {}, {0, 1});
  // By hand: b_{s0} = (0.41, 0.09, 0.09, 0.41) against product marginals
  // 0.25 each, while s1 sees a single dataset so c_{s1} ≡ 1. The largest
  // |L^G| sits on the discordant outcomes: |log(0.09 / 0.25)|.
  EXPECT_NEAR(d.MaxAbsCopulaOfG(), -std::log(0.09 / 0.25), 1e-12);
  EXPECT_NEAR(d.copula_of_g[0], std::log(0.41 / 0.25), 1e-12);
}

// Properties.

TEST(PldPropertyTest, ProfileMatchesHockeyStick) {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> size(1, 16);
  for (int trial = 0; trial < 200; ++trial) {
    DistPair pair = testing::RandomDistPair(size(rng), rng);
    Pld pld = PldFromPair(pair);
    EXPECT_NEAR(pld.TotalMass(), 1.0, 1e-12);
    for (double eps : {0.0, 0.5, 1.0, 2.0}) {
      EXPECT_NEAR(PrivacyProfile(pld, eps), HockeyStick(pair, eps), 1e-12);
    }
  }
}

TEST(PldPropertyTest, ConvolutionCommutesAndAssociates) {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 50; ++trial) {
    Pld a = PldFromPair(testing::RandomDistPair(4, rng));
    Pld b = PldFromPair(testing::RandomDistPair(5, rng));
    Pld c = PldFromPair(testing::RandomDistPair(3, rng));
    for (double eps : {0.0, 0.7, 1.5}) {
      EXPECT_NEAR(PrivacyProfile(Convolve(a, b), eps),
                  PrivacyProfile(Convolve(b, a), eps), 1e-12);
      EXPECT_NEAR(PrivacyProfile(Convolve(Convolve(a, b), c), eps),
                  PrivacyProfile(Convolve(a, Convolve(b, c)), eps), 1e-12);
    }
  }
}

TEST(PldPropertyTest, InvertibleConvolutionMatchesComposedJoint) {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 30; ++trial) {
    World w = testing::RandomInvertibleWorld(2, 3, rng);
    std::vector<MechanismKernel> mechs = {
        testing::RandomMechanism(3, 2, rng, "a"),
        testing::RandomMechanism(3, 3, rng, "b")};
    ComposedJoint joint = *ComposeJoint(w, mechs, {});
    Pld conv = Pld::PointMass(0.0);
    for (const MechanismKernel& m : mechs) {
      conv = Convolve(conv, PldFromPair(ChannelPair(
                                ComputeEffectiveKernel(w, m)->psi, {0, 1})));
    }
    for (double eps : {0.0, 0.5, 1.0, 2.0}) {
      EXPECT_NEAR(PrivacyProfile(conv, eps),
                  HockeyStick(ChannelPair(joint.rows, {0, 1}), eps), 1e-12);
    }
  }
}

TEST(PldPropertyTest, DecompositionIsAdditive) {
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 50; ++trial) {
    World w = testing::RandomWorld(3, 3, rng);
    std::vector<MechanismKernel> mechs = {
        testing::RandomMechanism(3, 2, rng, "a"),
        testing::RandomMechanism(3, 2, rng, "b"),
        testing::RandomMechanism(3, 3, rng, "c")};
    PlrvDecomposition d = *DecomposePlrv(w, mechs, {}, {0, 2});
    for (std::size_t o = 0; o < d.total.size(); ++o) {
      if (!d.finite[o]) continue;
      EXPECT_NEAR(d.total[o],
                  d.copula_of_g[o] + d.dependence[o] + d.independent[o], 1e-9);
    }
  }
}

}  // namespace
}  // namespace dcp
