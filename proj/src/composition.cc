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

#include "dcp/composition.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include "absl/strings/str_format.h"

namespace dcp {
namespace {

absl::StatusOr<std::size_t> OutcomeCount(const std::vector<int>& radices,
                                         std::size_t cap) {
  std::size_t n = 1;
  for (int r : radices) {
    if (r <= 0) return absl::InvalidArgumentError("mechanism without outputs");
    if (n > cap / static_cast<std::size_t>(r)) {
      return absl::ResourceExhaustedError(absl::StrFormat(
          "product output space exceeds the cap of %d outcomes", cap));
    }
    n *= r;
  }
  return n;
}

std::vector<int> Radices(const std::vector<MechanismKernel>& mechs) {
  std::vector<int> radices;
  for (const MechanismKernel& m : mechs) radices.push_back(m.num_outputs());
  return radices;
}

absl::Status CheckMechanisms(const World& world,
                             const std::vector<MechanismKernel>& mechs) {
  if (mechs.empty()) return absl::InvalidArgumentError("no mechanisms");
  for (const MechanismKernel& m : mechs) {
    if (absl::Status s = ValidateMechanism(m, world.num_datasets()); !s.ok()) {
      return s;
    }
  }
  return absl::OkStatus();
}

// Applies `fn` to every adjacent pair and collects the values.
absl::StatusOr<PairwiseBound> ForEachPair(
    const World& world,
    const std::function<absl::StatusOr<double>(SecretPair)>& fn) {
  if (world.adjacency.empty()) {
    return absl::FailedPreconditionError(
        "nothing to certify: the adjacency relation is empty");
  }
  PairwiseBound bound;
  bound.max = -kInfinity;
  for (const SecretPair& p : world.adjacency) {
    absl::StatusOr<double> v = fn(p);
    if (!v.ok()) return v.status();
    bound.per_pair.push_back({p, *v});
    bound.max = std::max(bound.max, *v);
  }
  return bound;
}

absl::StatusOr<std::vector<Matrix>> EffectiveKernels(
    const World& world, const std::vector<MechanismKernel>& mechs) {
  std::vector<Matrix> out;
  for (const MechanismKernel& m : mechs) {
    absl::StatusOr<EffectiveKernel> k = ComputeEffectiveKernel(world, m);
    if (!k.ok()) return k.status();
    out.push_back(std::move(k->psi));
  }
  return out;
}

}  // namespace

std::vector<int> ComposedJoint::Decode(std::size_t outcome) const {
  std::vector<int> y(radices.size());
  for (std::size_t i = radices.size(); i-- > 0;) {
    y[i] = static_cast<int>(outcome % radices[i]);
    outcome /= radices[i];
  }
  return y;
}

std::vector<CompositionBlock> CompositionBlocks(
    const std::vector<MechanismKernel>& mechs,
    const std::vector<DependenceGroup>& dependence) {
  std::vector<CompositionBlock> blocks;
  std::set<int> grouped;
  for (const DependenceGroup& g : dependence) {
    blocks.push_back({g.members, g.joint_kernel});
    grouped.insert(g.members.begin(), g.members.end());
  }
  for (int i = 0; i < static_cast<int>(mechs.size()); ++i) {
    if (!grouped.contains(i)) blocks.push_back({{i}, mechs[i].kernel});
  }
  return blocks;
}

std::size_t BlockOutcome(const CompositionBlock& block,
                         const std::vector<MechanismKernel>& mechs,
                         const std::vector<int>& outputs) {
  std::size_t index = 0;
  for (int m : block.members) {
    index = index * mechs[m].num_outputs() + outputs[m];
  }
  return index;
}

absl::StatusOr<ComposedJoint> ComposeJoint(
    const World& world, const std::vector<MechanismKernel>& mechs,
    const std::vector<DependenceGroup>& dependence, std::size_t cap) {
  if (absl::Status s = CheckMechanisms(world, mechs); !s.ok()) return s;
  if (absl::Status s =
          ValidateDependenceGroups(dependence, mechs, world.num_datasets());
      !s.ok()) {
    return s;
  }
  ComposedJoint joint;
  joint.radices = Radices(mechs);
  absl::StatusOr<std::size_t> n = OutcomeCount(joint.radices, cap);
  if (!n.ok()) return n.status();
  joint.rows = Matrix(world.num_secrets(), *n);

  const std::vector<CompositionBlock> blocks =
      CompositionBlocks(mechs, dependence);
  // Block-local index of every outcome, computed once.
  std::vector<std::vector<std::size_t>> local(blocks.size(),
                                              std::vector<std::size_t>(*n));
  for (std::size_t o = 0; o < *n; ++o) {
    const std::vector<int> y = joint.Decode(o);
    for (std::size_t j = 0; j < blocks.size(); ++j) {
      local[j][o] = BlockOutcome(blocks[j], mechs, y);
    }
  }
  // With no dependence the factors are multiplied in mechanism order.
  std::vector<std::size_t> order(blocks.size());
  for (std::size_t j = 0; j < blocks.size(); ++j) order[j] = j;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return blocks[a].members.front() < blocks[b].members.front();
  });

  std::vector<double> row(*n);
  for (int x = 0; x < world.num_datasets(); ++x) {
    bool used = false;
    for (int s = 0; s < world.num_secrets(); ++s) {
      used = used || world.joint(s, x) > 0.0;
    }
    if (!used) continue;
    for (std::size_t o = 0; o < *n; ++o) {
      double v = 1.0;
      for (std::size_t j : order) v *= blocks[j].kernel(x, local[j][o]);
      row[o] = v;
    }
    for (int s = 0; s < world.num_secrets(); ++s) {
      if (!(world.secret_marginals[s] > 0.0)) continue;
      const double w = world.joint(s, x) / world.secret_marginals[s];
      if (w == 0.0) continue;
      for (std::size_t o = 0; o < *n; ++o) joint.rows(s, o) += w * row[o];
    }
  }
  return joint;
}

absl::StatusOr<Matrix> ProductOfEffectiveKernels(
    const World& world, const std::vector<MechanismKernel>& mechs,
    std::size_t cap) {
  if (absl::Status s = CheckMechanisms(world, mechs); !s.ok()) return s;
  absl::StatusOr<std::vector<Matrix>> psi = EffectiveKernels(world, mechs);
  if (!psi.ok()) return psi.status();
  const std::vector<int> radices = Radices(mechs);
  absl::StatusOr<std::size_t> n = OutcomeCount(radices, cap);
  if (!n.ok()) return n.status();
  ComposedJoint decoder{Matrix(), radices};
  Matrix out(world.num_secrets(), *n);
  for (std::size_t o = 0; o < *n; ++o) {
    const std::vector<int> y = decoder.Decode(o);
    for (int s = 0; s < world.num_secrets(); ++s) {
      double v = 1.0;
      for (std::size_t i = 0; i < mechs.size(); ++i) v *= (*psi)[i](s, y[i]);
      out(s, o) = v;
    }
  }
  return out;
}

absl::StatusOr<PairwiseBound> TrueOpt(
    const World& world, const std::vector<MechanismKernel>& mechs,
    const std::vector<DependenceGroup>& dependence, double delta_g,
    std::size_t cap) {
  absl::StatusOr<ComposedJoint> joint =
      ComposeJoint(world, mechs, dependence, cap);
  if (!joint.ok()) return joint.status();
  return ForEachPair(world, [&](SecretPair p) {
    return OptimalEpsilon(ChannelPair(joint->rows, p), delta_g);
  });
}

absl::StatusOr<PairwiseBound> UnderlineOpt(
    const World& world, const std::vector<MechanismKernel>& mechs,
    double delta_g, std::size_t cap) {
  absl::StatusOr<Matrix> product =
      ProductOfEffectiveKernels(world, mechs, cap);
  if (!product.ok()) return product.status();
  return ForEachPair(world, [&](SecretPair p) {
    return OptimalEpsilon(ChannelPair(*product, p), delta_g);
  });
}

absl::StatusOr<PairwiseBound> UnderlineOptByConvolution(
    const World& world, const std::vector<MechanismKernel>& mechs,
    double delta_g) {
  if (absl::Status s = CheckMechanisms(world, mechs); !s.ok()) return s;
  absl::StatusOr<std::vector<Matrix>> psi = EffectiveKernels(world, mechs);
  if (!psi.ok()) return psi.status();
  return ForEachPair(world, [&](SecretPair p) -> absl::StatusOr<double> {
    Pld pld = Pld::PointMass(0.0);
    for (const Matrix& k : *psi) pld = Convolve(pld, PldFromPair(ChannelPair(k, p)));
    return OptimalEpsilon(pld, delta_g);
  });
}

absl::StatusOr<Pld> OverlinePld(const World& world,
                                const std::vector<MechanismKernel>& mechs,
                                const std::vector<DependenceGroup>& dependence,
                                SecretPair pair, std::size_t cap) {
  absl::StatusOr<PlrvDecomposition> d =
      DecomposePlrv(world, mechs, dependence, pair, cap);
  if (!d.ok()) return d.status();
  absl::StatusOr<std::vector<Matrix>> psi = EffectiveKernels(world, mechs);
  if (!psi.ok()) return psi.status();
  Pld pld = CopulaTermPld(*d);
  for (const Matrix& k : *psi) {
    pld = Convolve(pld, PldFromPair(ChannelPair(k, pair)));
  }
  return pld;
}

absl::StatusOr<PairwiseBound> OverlineOpt(
    const World& world, const std::vector<MechanismKernel>& mechs,
    const std::vector<DependenceGroup>& dependence, double delta_g,
    std::size_t cap) {
  return ForEachPair(world, [&](SecretPair p) -> absl::StatusOr<double> {
    absl::StatusOr<Pld> pld = OverlinePld(world, mechs, dependence, p, cap);
    if (!pld.ok()) return pld.status();
    return OptimalEpsilon(*pld, delta_g);
  });
}

absl::StatusOr<PairwiseBound> TrueDt(
    const World& world, const std::vector<MechanismKernel>& mechs,
    const std::vector<DependenceGroup>& dependence, double eps_g,
    std::size_t cap) {
  absl::StatusOr<ComposedJoint> joint =
      ComposeJoint(world, mechs, dependence, cap);
  if (!joint.ok()) return joint.status();
  return ForEachPair(world, [&](SecretPair p) -> absl::StatusOr<double> {
    return HockeyStick(ChannelPair(joint->rows, p), eps_g);
  });
}

absl::StatusOr<PairwiseBound> UnderlineDt(
    const World& world, const std::vector<MechanismKernel>& mechs,
    double eps_g, std::size_t cap) {
  absl::StatusOr<Matrix> product =
      ProductOfEffectiveKernels(world, mechs, cap);
  if (!product.ok()) return product.status();
  return ForEachPair(world, [&](SecretPair p) -> absl::StatusOr<double> {
    return HockeyStick(ChannelPair(*product, p), eps_g);
  });
}

absl::StatusOr<PairwiseBound> OverlineDt(
    const World& world, const std::vector<MechanismKernel>& mechs,
    const std::vector<DependenceGroup>& dependence, double eps_g,
    std::size_t cap) {
  return ForEachPair(world, [&](SecretPair p) -> absl::StatusOr<double> {
    absl::StatusOr<Pld> pld = OverlinePld(world, mechs, dependence, p, cap);
    if (!pld.ok()) return pld.status();
    return PrivacyProfile(*pld, eps_g);
  });
}

absl::StatusOr<BasicCompositionVerdict> BasicCompositionCheck(
    const World& world, const std::vector<MechanismKernel>& mechs,
    const std::vector<DependenceGroup>& dependence,
    const BasicCompositionOptions& options, std::size_t cap) {
  if (absl::Status s = CheckMechanisms(world, mechs); !s.ok()) return s;
  if (world.adjacency.empty()) {
    return absl::FailedPreconditionError(
        "nothing to certify: the adjacency relation is empty");
  }
  if (options.deltas.has_value() && options.deltas->size() != mechs.size()) {
    return absl::InvalidArgumentError("need one delta per mechanism");
  }
  absl::StatusOr<std::vector<Matrix>> psi = EffectiveKernels(world, mechs);
  if (!psi.ok()) return psi.status();
  BasicCompositionVerdict verdict;
  const double share = options.epsilon_budget / mechs.size();
  for (std::size_t i = 0; i < mechs.size(); ++i) {
    double eps = 0.0;
    double delta = 0.0;
    for (const SecretPair& p : world.adjacency) {
      const DistPair pair = ChannelPair((*psi)[i], p);
      if (options.deltas.has_value()) {
        absl::StatusOr<double> e = OptimalEpsilon(pair, (*options.deltas)[i]);
        if (!e.ok()) return e.status();
        eps = std::max(eps, *e);
      } else {
        delta = std::max(delta, HockeyStick(pair, share));
      }
    }
    if (options.deltas.has_value()) {
      delta = (*options.deltas)[i];
    } else {
      eps = share;
    }
    verdict.epsilons.push_back(eps);
    verdict.deltas.push_back(delta);
    verdict.epsilon_sum += eps;
    verdict.delta_sum += delta;
  }
  absl::StatusOr<ComposedJoint> joint =
      ComposeJoint(world, mechs, dependence, cap);
  if (!joint.ok()) return joint.status();
  verdict.composed_delta = -1.0;
  for (const SecretPair& p : world.adjacency) {
    const double d = HockeyStick(ChannelPair(joint->rows, p),
                                 verdict.epsilon_sum);
    if (d > verdict.composed_delta) {
      verdict.composed_delta = d;
      verdict.worst_pair = p;
    }
  }
  verdict.holds = verdict.composed_delta <= verdict.delta_sum;
  return verdict;
}

bool CompositionReport::OrderingHolds(double tolerance) const {
  for (const CompositionRow& r : opt_rows) {
    if (r.underline_opt > r.true_opt + tolerance) return false;
    if (r.true_opt > r.overline_opt + tolerance) return false;
  }
  for (const ProfileRow& r : profile_rows) {
    if (r.underline_dt > r.true_dt + tolerance) return false;
    if (r.true_dt > r.overline_dt + tolerance) return false;
  }
  return true;
}

absl::StatusOr<CompositionReport> ComputeCompositionReport(
    const World& world, const std::vector<MechanismKernel>& mechs,
    const std::vector<DependenceGroup>& dependence,
    const std::vector<double>& delta_grid, const std::vector<double>& eps_grid,
    std::size_t cap) {
  if (world.adjacency.empty()) {
    return absl::FailedPreconditionError(
        "nothing to certify: the adjacency relation is empty");
  }
  absl::StatusOr<ComposedJoint> joint =
      ComposeJoint(world, mechs, dependence, cap);
  if (!joint.ok()) return joint.status();
  absl::StatusOr<Matrix> product =
      ProductOfEffectiveKernels(world, mechs, cap);
  if (!product.ok()) return product.status();

  CompositionReport report;
  for (const SecretPair& p : world.adjacency) {
    absl::StatusOr<Pld> over = OverlinePld(world, mechs, dependence, p, cap);
    if (!over.ok()) return over.status();
    const DistPair truth = ChannelPair(joint->rows, p);
    const DistPair under = ChannelPair(*product, p);
    for (double delta : delta_grid) {
      CompositionRow row{p, delta};
      absl::StatusOr<double> u = OptimalEpsilon(under, delta);
      absl::StatusOr<double> t = OptimalEpsilon(truth, delta);
      absl::StatusOr<double> o = OptimalEpsilon(*over, delta);
      if (!u.ok()) return u.status();
      if (!t.ok()) return t.status();
      if (!o.ok()) return o.status();
      row.underline_opt = *u;
      row.true_opt = *t;
      row.overline_opt = *o;
      report.opt_rows.push_back(row);
    }
    for (double eps : eps_grid) {
      report.profile_rows.push_back({p, eps, HockeyStick(under, eps),
                                     HockeyStick(truth, eps),
                                     PrivacyProfile(*over, eps)});
    }
  }
  absl::StatusOr<BasicCompositionVerdict> basic =
      BasicCompositionCheck(world, mechs, dependence, {}, cap);
  if (!basic.ok()) return basic.status();
  report.basic = *std::move(basic);
  return report;
}

absl::StatusOr<DistPair> DominatingPair(double eps, double delta) {
  if (!(eps >= 0.0) || !std::isfinite(eps)) {
    return absl::InvalidArgumentError("eps must be finite and non-negative");
  }
  if (!(delta >= 0.0) || delta > 1.0) {
    return absl::InvalidArgumentError("delta must lie in [0, 1]");
  }
  // e^ε/(1+e^ε) and 1/(1+e^ε) written to stay finite for large ε.
  const double hi = 1.0 / (1.0 + std::exp(-eps));
  const double lo = 1.0 / (1.0 + std::exp(eps));
  DistPair pair;
  pair.p = {delta, (1.0 - delta) * hi, (1.0 - delta) * lo, 0.0};
  pair.q = {0.0, (1.0 - delta) * lo, (1.0 - delta) * hi, delta};
  return pair;
}

absl::StatusOr<double> DpOptComp(
    const std::vector<std::pair<double, double>>& params, double delta_g) {
  if (params.empty()) return absl::InvalidArgumentError("no parameters");
  Pld pld = Pld::PointMass(0.0);
  for (const auto& [eps, delta] : params) {
    absl::StatusOr<DistPair> pair = DominatingPair(eps, delta);
    if (!pair.ok()) return pair.status();
    pld = Convolve(pld, PldFromPair(*pair));
  }
  return OptimalEpsilon(pld, delta_g);
}

absl::StatusOr<TradeoffDominanceReport> TradeoffDominance(
    const World& world, const std::vector<MechanismKernel>& mechs,
    std::size_t cap) {
  absl::StatusOr<ComposedJoint> joint = ComposeJoint(world, mechs, {}, cap);
  if (!joint.ok()) return joint.status();
  absl::StatusOr<Matrix> product =
      ProductOfEffectiveKernels(world, mechs, cap);
  if (!product.ok()) return product.status();
  if (world.adjacency.empty()) {
    return absl::FailedPreconditionError(
        "nothing to compare: the adjacency relation is empty");
  }
  TradeoffDominanceReport report;
  report.max_violation = -kInfinity;
  for (const SecretPair& p : world.adjacency) {
    const TradeoffCurve joint_curve =
        ComputeTradeoffCurve(ChannelPair(joint->rows, p));
    const TradeoffCurve product_curve =
        ComputeTradeoffCurve(ChannelPair(*product, p));
    std::vector<double> grid;
    for (const auto& v : joint_curve.vertices()) grid.push_back(v.alpha);
    for (const auto& v : product_curve.vertices()) grid.push_back(v.alpha);
    for (double alpha : grid) {
      const double diff =
          joint_curve.Evaluate(alpha) - product_curve.Evaluate(alpha);
      if (diff > report.max_violation) {
        report.max_violation = diff;
        report.worst_pair = p;
      }
      report.max_gap = std::max(report.max_gap, -diff);
    }
  }
  return report;
}

absl::StatusOr<CelReport> CelCompare(const World& world,
                                     const std::vector<MechanismKernel>& mechs,
                                     std::size_t cap) {
  absl::StatusOr<ComposedJoint> joint = ComposeJoint(world, mechs, {}, cap);
  if (!joint.ok()) return joint.status();
  absl::StatusOr<Matrix> product =
      ProductOfEffectiveKernels(world, mechs, cap);
  if (!product.ok()) return product.status();
  const std::vector<double>& prior = world.secret_marginals;
  CelReport report;
  for (std::size_t o = 0; o < joint->num_outcomes(); ++o) {
    double z_joint = 0.0;
    double z_product = 0.0;
    for (int s = 0; s < world.num_secrets(); ++s) {
      z_joint += prior[s] * joint->rows(s, o);
      z_product += prior[s] * (*product)(s, o);
    }
    for (int s = 0; s < world.num_secrets(); ++s) {
      const double weight = prior[s] * joint->rows(s, o);
      if (weight <= 0.0) continue;
      report.cel_joint -= weight * std::log(weight / z_joint);
      report.cel_product -=
          weight * std::log(prior[s] * (*product)(s, o) / z_product);
    }
  }
  return report;
}

}  // namespace dcp
