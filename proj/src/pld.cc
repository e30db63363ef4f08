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

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "dcp/composition.h"

namespace dcp {

Pld::Pld(std::vector<Atom> atoms, double inf_mass) : inf_mass_(inf_mass) {
  std::sort(atoms.begin(), atoms.end(),
            [](const Atom& a, const Atom& b) { return a.loss < b.loss; });
  // Groups are anchored at their first atom so that merging never chains.
  double anchor = 0.0;
  double weighted = 0.0;
  for (const Atom& a : atoms) {
    if (a.mass <= 0.0) continue;
    if (a.loss == kInfinity) {
      inf_mass_ += a.mass;
      continue;
    }
    const bool same =
        !atoms_.empty() &&
        (a.loss == anchor || (std::isfinite(a.loss) && std::isfinite(anchor) &&
                              a.loss - anchor <= kLossMergeTolerance));
    if (same) {
      Atom& back = atoms_.back();
      back.mass += a.mass;
      if (std::isfinite(a.loss)) {
        weighted += a.mass * a.loss;
        back.loss = weighted / back.mass;
      }
    } else {
      atoms_.push_back(a);
      anchor = a.loss;
      weighted = std::isfinite(a.loss) ? a.mass * a.loss : 0.0;
    }
  }
}

double Pld::TotalMass() const {
  double total = inf_mass_;
  for (const Atom& a : atoms_) total += a.mass;
  return total;
}

Pld PldFromPair(const DistPair& pair) {
  std::vector<Pld::Atom> atoms;
  double inf_mass = 0.0;
  for (std::size_t i = 0; i < pair.p.size(); ++i) {
    const double p = pair.p[i];
    const double q = pair.q[i];
    if (p <= 0.0) continue;
    if (q <= 0.0) {
      inf_mass += p;
    } else {
      atoms.push_back({std::log(p / q), p});
    }
  }
  return Pld(std::move(atoms), inf_mass);
}

Pld Convolve(const Pld& a, const Pld& b) {
  std::vector<Pld::Atom> atoms;
  atoms.reserve(a.atoms().size() * b.atoms().size());
  for (const Pld::Atom& x : a.atoms()) {
    for (const Pld::Atom& y : b.atoms()) {
      atoms.push_back({x.loss + y.loss, x.mass * y.mass});
    }
  }
  const double inf_mass =
      a.inf_mass() + b.inf_mass() - a.inf_mass() * b.inf_mass();
  return Pld(std::move(atoms), inf_mass);
}

double PrivacyProfile(const Pld& pld, double eps) {
  double delta = 0.0;
  for (const Pld::Atom& a : pld.atoms()) {
    if (a.loss > eps) delta += a.mass * (-std::expm1(eps - a.loss));
  }
  return delta + pld.inf_mass();
}

absl::StatusOr<double> OptimalEpsilon(const Pld& pld, double delta) {
  if (!(delta >= 0.0) || delta > 1.0) {
    return absl::InvalidArgumentError(
        absl::StrFormat("delta must lie in [0, 1], got %g", delta));
  }
  if (pld.inf_mass() > delta) return kInfinity;
  if (PrivacyProfile(pld, 0.0) <= delta) return 0.0;
  // Above atom j (descending), δ(ε) = a − e^ε b with a the atom mass and b
  // the mass scaled by e^{−loss}, both summed over atoms with larger loss.
  const std::vector<Pld::Atom>& atoms = pld.atoms();
  double a = pld.inf_mass();
  double b = 0.0;
  for (std::size_t k = atoms.size(); k-- > 0;) {
    const double upper = atoms[k].loss;
    if (upper <= 0.0) break;
    a += atoms[k].mass;
    b += atoms[k].mass * std::exp(-upper);
    const double lower = k > 0 ? std::max(atoms[k - 1].loss, 0.0) : 0.0;
    if (a - std::exp(lower) * b > delta) {
      return std::clamp(std::log((a - delta) / b), lower, upper);
    }
  }
  return 0.0;
}

void WritePldCsv(const Pld& pld, std::ostream& out) {
  out << "loss,mass\n";
  for (const Pld::Atom& a : pld.atoms()) {
    out << absl::StrFormat("%.17g,%.17g\n", a.loss, a.mass);
  }
  out << absl::StrFormat("inf,%.17g\n", pld.inf_mass());
}

absl::StatusOr<Pld> ReadPldCsv(std::istream& in) {
  std::string line;
  std::vector<Pld::Atom> atoms;
  double inf_mass = 0.0;
  bool header = false;
  bool saw_inf = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "loss,mass") {
        return absl::InvalidArgumentError("expected header 'loss,mass'");
      }
      header = true;
      continue;
    }
    const std::size_t comma = line.find(',');
    if (comma == std::string::npos) {
      return absl::InvalidArgumentError(absl::StrCat("bad row: ", line));
    }
    const std::string loss = line.substr(0, comma);
    double mass = 0.0;
    try {
      mass = std::stod(line.substr(comma + 1));
      if (loss == "inf") {
        inf_mass = mass;
        saw_inf = true;
      } else {
        atoms.push_back({std::stod(loss), mass});
      }
    } catch (const std::exception&) {
      return absl::InvalidArgumentError(absl::StrCat("bad row: ", line));
    }
  }
  if (!saw_inf) return absl::InvalidArgumentError("missing 'inf' row");
  return Pld(std::move(atoms), inf_mass);
}

double PlrvDecomposition::MaxAbsCopulaOfG() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < copula_of_g.size(); ++i) {
    if (finite[i]) worst = std::max(worst, std::abs(copula_of_g[i]));
  }
  return worst;
}

absl::StatusOr<PlrvDecomposition> DecomposePlrv(
    const World& world, const std::vector<MechanismKernel>& mechs,
    const std::vector<DependenceGroup>& dependence, SecretPair pair,
    std::size_t cap) {
  const auto [s0, s1] = std::pair{pair.first, pair.second};
  if (s0 < 0 || s1 < 0 || s0 >= world.num_secrets() ||
      s1 >= world.num_secrets() || !(world.secret_marginals[s0] > 0.0) ||
      !(world.secret_marginals[s1] > 0.0)) {
    return absl::InvalidArgumentError(
        "decomposition needs two secrets with positive mass");
  }
  absl::StatusOr<ComposedJoint> joint =
      ComposeJoint(world, mechs, dependence, cap);
  if (!joint.ok()) return joint.status();

  std::vector<EffectiveKernel> psi;
  for (const MechanismKernel& m : mechs) {
    absl::StatusOr<EffectiveKernel> k = ComputeEffectiveKernel(world, m);
    if (!k.ok()) return k.status();
    psi.push_back(*std::move(k));
  }
  // Block laws given the secret: g_j(ỹ | s) = Σ_x P(x|s) K_j(ỹ | x).
  const std::vector<CompositionBlock> blocks =
      CompositionBlocks(mechs, dependence);
  std::vector<std::vector<std::vector<double>>> block_law(blocks.size());
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    for (int s : {s0, s1}) {
      std::vector<double> law(blocks[j].kernel.cols(), 0.0);
      for (int x = 0; x < world.num_datasets(); ++x) {
        const double w = world.joint(s, x) / world.secret_marginals[s];
        if (w == 0.0) continue;
        for (std::size_t y = 0; y < law.size(); ++y) {
          law[y] += w * blocks[j].kernel(x, y);
        }
      }
      block_law[j].push_back(std::move(law));
    }
  }

  const std::size_t n = joint->num_outcomes();
  PlrvDecomposition d;
  d.total.resize(n);
  d.copula_of_g.resize(n);
  d.dependence.resize(n);
  d.independent.resize(n);
  d.reference = joint->rows.RowVector(s0);
  d.alternative = joint->rows.RowVector(s1);
  d.copula_mass_s0.resize(n);
  d.copula_mass_s1.resize(n);
  d.finite.resize(n);
  const auto log_ratio = [](double a, double b) {
    if (a == 0.0 && b == 0.0) return std::nan("");
    if (b == 0.0) return kInfinity;
    if (a == 0.0) return -kInfinity;
    return std::log(a / b);
  };
  for (std::size_t o = 0; o < n; ++o) {
    const std::vector<int> y = joint->Decode(o);
    double l_id = 0.0;
    for (std::size_t i = 0; i < mechs.size(); ++i) {
      l_id += log_ratio(psi[i].psi(s0, y[i]), psi[i].psi(s1, y[i]));
    }
    double l_c = 0.0;
    double block_product0 = 1.0;
    double block_product1 = 1.0;
    for (std::size_t j = 0; j < blocks.size(); ++j) {
      const std::size_t local = BlockOutcome(blocks[j], mechs, y);
      const double g0 = block_law[j][0][local];
      const double g1 = block_law[j][1][local];
      block_product0 *= g0;
      block_product1 *= g1;
      if (blocks[j].members.size() < 2) continue;
      double m0 = 1.0;
      double m1 = 1.0;
      for (int member : blocks[j].members) {
        m0 *= psi[member].psi(s0, y[member]);
        m1 *= psi[member].psi(s1, y[member]);
      }
      l_c += log_ratio(g0, m0) - log_ratio(g1, m1);
    }
    const double b0 = d.reference[o];
    const double b1 = d.alternative[o];
    const double l_total = log_ratio(b0, b1);
    d.total[o] = l_total;
    d.independent[o] = l_id;
    d.dependence[o] = l_c;
    d.copula_of_g[o] = l_total - l_c - l_id;
    d.copula_mass_s0[o] = block_product0 > 0.0 ? b0 / block_product0 : 0.0;
    d.copula_mass_s1[o] = block_product1 > 0.0 ? b1 / block_product1 : 0.0;
    d.finite[o] = std::isfinite(l_total) && std::isfinite(l_id) &&
                  std::isfinite(l_c) && std::isfinite(d.copula_of_g[o]);
  }
  return d;
}

Pld CopulaTermPld(const PlrvDecomposition& d) {
  std::vector<Pld::Atom> atoms;
  double inf_mass = 0.0;
  for (std::size_t o = 0; o < d.reference.size(); ++o) {
    const double mass = d.reference[o];
    if (mass <= 0.0) continue;
    if (d.finite[o]) {
      atoms.push_back({d.copula_of_g[o] + d.dependence[o], mass});
    } else if (std::isfinite(d.independent[o])) {
      // b_{s1} vanishes while every marginal is positive under s1.
      inf_mass += mass;
    } else {
      atoms.push_back({0.0, mass});
    }
  }
  return Pld(std::move(atoms), inf_mass);
}

}  // namespace dcp
