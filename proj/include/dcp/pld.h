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

// Discrete privacy loss distributions and the decomposition of a composed
// privacy loss into copula, dependence and independent parts.

#ifndef DCP_PLD_H_
#define DCP_PLD_H_

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "absl/status/statusor.h"
#include "dcp/divergence.h"
#include "dcp/model.h"

namespace dcp {

class Pld {
 public:
  struct Atom {
    double loss;
    double mass;
  };

  Pld() = default;

  // Sorts and merges atoms. Atoms with zero mass are dropped and atoms at
  // −∞ collapse into a single leading atom.
  Pld(std::vector<Atom> atoms, double inf_mass);

  static Pld PointMass(double loss) { return Pld({{loss, 1.0}}, 0.0); }

  const std::vector<Atom>& atoms() const { return atoms_; }
  double inf_mass() const { return inf_mass_; }
  double TotalMass() const;

 private:
  std::vector<Atom> atoms_;
  double inf_mass_ = 0.0;
};

Pld PldFromPair(const DistPair& pair);

Pld Convolve(const Pld& a, const Pld& b);

// δ(ε) = E[(1 − e^{ε − L})⁺] + inf_mass.
double PrivacyProfile(const Pld& pld, double eps);

// Smallest ε ≥ 0 with PrivacyProfile(pld, ε) ≤ delta; +∞ when the mass at
// +∞ exceeds delta.
absl::StatusOr<double> OptimalEpsilon(const Pld& pld, double delta);

// CSV with a `loss,mass` header, one row per atom and a final `inf,<mass>`.
void WritePldCsv(const Pld& pld, std::ostream& out);
absl::StatusOr<Pld> ReadPldCsv(std::istream& in);

struct PlrvDecomposition {
  // Per joint outcome, in the order of the composed joint.
  std::vector<double> total;
  std::vector<double> copula_of_g;  // L^G
  std::vector<double> dependence;   // L^C
  std::vector<double> independent;  // L^id
  // b_{s0} and b_{s1}.
  std::vector<double> reference;
  std::vector<double> alternative;
  // c_s(ŷ) = b_s(ŷ) / Π_blocks block marginal, for s0 and s1.
  std::vector<double> copula_mass_s0;
  std::vector<double> copula_mass_s1;
  // True where every term is finite.
  std::vector<bool> finite;

  // Largest |L^G| over finite outcomes.
  double MaxAbsCopulaOfG() const;
};

absl::StatusOr<PlrvDecomposition> DecomposePlrv(
    const World& world, const std::vector<MechanismKernel>& mechs,
    const std::vector<DependenceGroup>& dependence, SecretPair pair,
    std::size_t cap = kDefaultOutcomeCap);

// Law of L^G + L^C under b_{s0}. Outcomes where L^id is +∞ are charged to
// the marginal PLDs and contribute a zero copula loss here.
Pld CopulaTermPld(const PlrvDecomposition& decomposition);

}  // namespace dcp

#endif  // DCP_PLD_H_
