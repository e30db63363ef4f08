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


// Acceptance checks. Each criterion prints one PASS or FAIL line with the
// measured quantities and its wall time; the exit code is non-zero on FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "absl/strings/str_format.h"
#include "dcp/audit.h"
#include "dcp/composition.h"
#include "dcp/copula.h"
#include "dcp/divergence.h"
#include "dcp/experiment.h"
#include "dcp/ic.h"
#include "dcp/model.h"
#include "dcp/pld.h"
#include "testing/random_instances.h"

namespace dcp {
namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Σ_y (p − e^ε q)⁺ with no library code involved.
double DirectHockeyStick(const std::vector<double>& p,
                         const std::vector<double>& q, double eps) {
  double d = 0.0;
  for (std::size_t y = 0; y < p.size(); ++y) {
    d += std::max(p[y] - std::exp(eps) * q[y], 0.0);
  }
  return d;
}

// Largest hockey-stick over adjacent pairs of b(ŷ|s) α(y_α|s).
double DirectDeltaWithAlpha(const World& world, const Matrix& composed,
                            const Matrix& alpha, double eps) {
  double worst = 0.0;
  for (const SecretPair& pr : world.adjacency) {
    std::vector<double> p;
    std::vector<double> q;
    for (std::size_t o = 0; o < composed.cols(); ++o) {
      for (std::size_t a = 0; a < alpha.cols(); ++a) {
        p.push_back(composed(pr.first, o) * alpha(pr.first, a));
        q.push_back(composed(pr.second, o) * alpha(pr.second, a));
      }
    }
    worst = std::max(worst, DirectHockeyStick(p, q, eps));
  }
  return worst;
}

std::vector<MechanismKernel> RandomMechs(int k, int datasets,
                                         std::mt19937_64& rng) {
  std::uniform_int_distribution<int> outputs(2, 3);
  std::vector<MechanismKernel> mechs;
  for (int i = 0; i < k; ++i) {
    mechs.push_back(testing::RandomMechanism(datasets, outputs(rng), rng,
                                             "m" + std::to_string(i)));
  }
  return mechs;
}

Outcome Criterion1() {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> size(1, 16);
  double worst = 0.0;
  double worst_oracle = 0.0;
  for (int i = 0; i < 200; ++i) {
    const DistPair pair = testing::RandomDistPair(size(rng), rng);
    const Pld pld = PldFromPair(pair);
    for (double eps : {0.0, 0.5, 1.0, 2.0}) {
      const double hs = HockeyStick(pair, eps);
      worst = std::max(worst, std::abs(PrivacyProfile(pld, eps) - hs));
      worst_oracle = std::max(
          worst_oracle, std::abs(hs - DirectHockeyStick(pair.p, pair.q, eps)));
    }
  }
  return {worst <= 1e-12 && worst_oracle <= 1e-12,
          absl::StrFormat("max |profile - hockey_stick| = %.3g, "
                          "max |hockey_stick - direct sum| = %.3g",
                          worst, worst_oracle)};
}

Outcome Criterion2() {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> secrets(2, 3);
  double max_lg = 0.0;
  double max_gap = 0.0;
  for (int i = 0; i < 20; ++i) {
    const int ns = secrets(rng);
    const World w = testing::RandomInvertibleWorld(ns, ns + 1, rng);
    const std::vector<MechanismKernel> mechs = RandomMechs(2, ns + 1, rng);
    for (const SecretPair& p : w.adjacency) {
      max_lg = std::max(max_lg, DecomposePlrv(w, mechs, {}, p)->MaxAbsCopulaOfG());
    }
    for (double delta : {0.0, 0.02}) {
      const PairwiseBound t = *TrueOpt(w, mechs, {}, delta);
      const PairwiseBound u = *UnderlineOpt(w, mechs, delta);
      for (std::size_t j = 0; j < t.per_pair.size(); ++j) {
        const double a = t.per_pair[j].value;
        const double b = u.per_pair[j].value;
        if (std::isinf(a) && std::isinf(b)) continue;
        max_gap = std::max(max_gap, std::abs(a - b));
      }
    }
  }
  return {max_lg <= 1e-12 && max_gap <= 1e-9,
          absl::StrFormat("max |L^G| = %.3g, max |true - underline| = %.3g",
                          max_lg, max_gap)};
}

Outcome Criterion3() {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> secrets(2, 3);
  std::uniform_int_distribution<int> datasets(2, 4);
  std::uniform_int_distribution<int> ks(2, 3);
  int rows = 0;
  int lower_violations = 0;
  int upper_violations = 0;
  double worst_lower = 0.0;
  double worst_upper = 0.0;
  for (int i = 0; i < 50; ++i) {
    const World w =
        testing::RandomMixingWorld(secrets(rng), datasets(rng), rng);
    const std::vector<MechanismKernel> mechs =
        RandomMechs(ks(rng), w.num_datasets(), rng);
    const PairwiseBound u = *UnderlineOpt(w, mechs, 0.02);
    const PairwiseBound t = *TrueOpt(w, mechs, {}, 0.02);
    const PairwiseBound o = *OverlineOpt(w, mechs, {}, 0.02);
    for (std::size_t j = 0; j < t.per_pair.size(); ++j) {
      ++rows;
      const double uv = u.per_pair[j].value;
      const double tv = t.per_pair[j].value;
      const double ov = o.per_pair[j].value;
      if (uv > tv + 1e-9) {
        ++lower_violations;
        worst_lower = std::max(worst_lower, uv - tv);
      }
      if (tv > ov + 1e-9) {
        ++upper_violations;
        worst_upper = std::max(worst_upper, tv - ov);
      }
    }
  }
  // Constructed instance: s1 pins x0 while s0 mixes both datasets.
  const World mixing = *MakeWorld({"s0", "s1"}, {"x0", "x1"},
                                  Matrix::FromRows({{0.25, 0.25}, {0.5, 0.0}}));
  const std::vector<MechanismKernel> rr = {testing::BinaryRr(0.9, "a"),
                                           testing::BinaryRr(0.8, "b")};
  const double gap = TrueOpt(mixing, rr, {}, 0.02)->max -
                     UnderlineOpt(mixing, rr, 0.02)->max;
  const bool pass =
      lower_violations == 0 && upper_violations == 0 && gap >= 1e-3;
  return {pass,
          absl::StrFormat(
              "%d pair rows; underline > true on %d (worst %.4g); "
              "true > overline on %d (worst %.4g); constructed gap %.4g",
              rows, lower_violations, worst_lower, upper_violations,
              worst_upper, gap)};
}

Outcome Criterion4() {
  absl::StatusOr<Model> model =
      LoadModel(std::string(DCP_DATA_DIR) + "/basic_composition_failure.json");
  if (!model.ok()) return {false, std::string(model.status().message())};
  const World& w = model->world;
  double eps_sum = 0.0;
  for (const MechanismKernel& m : model->mechanisms) {
    const Matrix psi = ComputeEffectiveKernel(w, m)->psi;
    double eps = 0.0;
    for (const SecretPair& p : w.adjacency) {
      eps = std::max(eps, *OptimalEpsilon(ChannelPair(psi, p), 0.0));
    }
    eps_sum += eps;
  }
  const Matrix b = ComposeJoint(w, model->mechanisms, {})->rows;
  double composed = 0.0;
  for (const SecretPair& p : w.adjacency) {
    composed = std::max(composed, DirectHockeyStick(b.RowVector(p.first),
                                                    b.RowVector(p.second),
                                                    eps_sum));
  }
  BasicCompositionOptions options;
  options.deltas = std::vector<double>(model->mechanisms.size(), 0.0);
  const BasicCompositionVerdict verdict =
      *BasicCompositionCheck(w, model->mechanisms, {}, options);
  const bool pass = composed >= 1e-3 && !verdict.holds &&
                    std::abs(verdict.composed_delta - composed) <= 1e-12;
  return {pass, absl::StrFormat("sum eps_i = %.6g, sum delta_i = 0, composed "
                                "hockey-stick = %.6g (library %.6g)",
                                eps_sum, composed, verdict.composed_delta)};
}

double KsDistance(std::vector<double> samples,
                  const std::function<double(double)>& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = samples.size();
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, std::abs(f - i / n), std::abs((i + 1) / n - f)});
  }
  return d;
}

GaussianCopulaSpec StandardSpec(double rho, NoiseDistribution xi1,
                                NoiseDistribution xi2) {
  GaussianCopulaSpec spec;
  spec.rho = rho;
  spec.eta = {0.0, 1.0};
  spec.c_sen = 1.0;
  spec.eps_c = 1.0;
  spec.delta_c = 0.02;
  spec.w = 2.0 * std::log(2.0 / spec.delta_c);
  spec.xi1 = std::move(xi1);
  spec.xi2 = std::move(xi2);
  return spec;
}

Outcome Criterion5() {
  const int n = 100000;
  const double critical = 1.628 / std::sqrt(static_cast<double>(n));
  const auto laplace = [](double v) {
    return v < 0.0 ? 0.5 * std::exp(v) : 1.0 - 0.5 * std::exp(-v);
  };
  const auto gaussian = [](double v) {
    return 0.5 * std::erfc(-v / std::sqrt(2.0));
  };
  bool pass = true;
  std::string detail = absl::StrFormat("critical %.5f;", critical);
  for (double rho : {0.2, 0.5, 0.8}) {
    const auto start = std::chrono::steady_clock::now();
    const GaussianCopulaSpec spec =
        StandardSpec(rho, *NoiseDistribution::Laplace(1.0),
                     *NoiseDistribution::Gaussian(1.0));
    std::mt19937_64 rng(5);
    double worst = 0.0;
    for (int secret : {0, 1}) {
      std::vector<double> v1;
      std::vector<double> v2;
      v1.reserve(n);
      v2.reserve(n);
      for (int i = 0; i < n; ++i) {
        const NoiseSamplePair s = *PsedrSample(spec, secret, rng);
        v1.push_back(s.v1);
        v2.push_back(s.v2);
      }
      worst = std::max({worst, KsDistance(std::move(v1), laplace),
                        KsDistance(std::move(v2), gaussian)});
    }
    const double seconds = std::chrono::duration<double>(
                               std::chrono::steady_clock::now() - start)
                               .count();
    pass = pass && worst < critical && seconds < 10.0;
    absl::StrAppendFormat(&detail, " rho %.1f: KS %.5f in %.2fs;", rho, worst,
                          seconds);
  }
  return {pass, detail};
}

Outcome Criterion6() {
  const World w = *MakeWorld({"s0", "s1"}, {"x0", "x1"},
                             Matrix::FromRows({{0.5, 0.0}, {0.0, 0.5}}));
  const GaussianCopulaSpec spec = StandardSpec(
      0.5, *NoiseDistribution::Laplace(1.0), *NoiseDistribution::Laplace(1.0));
  AdditiveDiscretization grid;
  grid.query1 = {0.0, 1.0};
  grid.query2 = {0.0, 1.0};
  grid.bins = 512;
  double residual = 0.0;
  std::size_t cells = 0;
  for (const SecretPair& p : w.adjacency) {
    const AdditivityReport r = *CheckCopulaAdditivity(spec, w, grid, p);
    residual = std::max(residual, r.max_residual);
    cells += r.cells_checked;
  }
  const PerturbedPair pair = *ComputePerturbedPair(spec, w, grid);
  double truth = 0.0;
  double eps1 = 0.0;
  double eps2 = 0.0;
  for (const SecretPair& p : w.adjacency) {
    truth = std::max(truth, *OptimalEpsilon(ChannelPair(pair.joint, p), 0.02));
    eps1 = std::max(eps1, *OptimalEpsilon(ChannelPair(pair.marginal1, p), 0.0));
    eps2 = std::max(eps2, *OptimalEpsilon(ChannelPair(pair.marginal2, p), 0.0));
  }
  const double bound = *ConservativeBound(spec, eps1, 0.0, eps2, 0.0, 0.02);
  return {residual <= 1e-6 && cells > 0 && truth <= bound,
          absl::StrFormat("additivity residual %.3g over %d cells; true_opt "
                          "%.6g <= conservative bound %.6g (eps1 %.6g, eps2 "
                          "%.6g)",
                          residual, cells, truth, bound, eps1, eps2)};
}

Outcome Criterion7() {
  struct Instance {
    IcProblem problem;
    std::string name;
  };
  std::vector<Instance> instances;
  {
    IcProblem p;
    p.world = *MakeWorld({"s0", "s1"}, {"x0", "x1"},
                         Matrix::FromRows({{0.5, 0.0}, {0.0, 0.5}}));
    p.mechs = {MechanismKernel{"u", {"a", "b"},
                               Matrix::FromRows({{0.5, 0.5}, {0.5, 0.5}})}};
    p.tau_g = 2.0;
    p.delta_g = 0.0;
    instances.push_back({p, "hand"});
  }
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> secrets(2, 3);
  std::uniform_int_distribution<int> datasets(2, 4);
  std::uniform_real_distribution<double> tau(1.5, 6.0);
  for (int i = 0; i < 10; ++i) {
    IcProblem p;
    p.world = testing::RandomWorld(secrets(rng), datasets(rng), rng);
    p.mechs = {testing::RandomRrMechanism(p.world.num_datasets(), 2, rng, "a")};
    p.tau_g = tau(rng);
    p.delta_g = i % 2 == 0 ? 0.0 : 0.02;
    p.seed = i;
    instances.push_back({p, "random" + std::to_string(i)});
  }
  bool pass = true;
  int certified = 0;
  double worst_residual = 0.0;
  double worst_excess = -kInfinity;
  double worst_tv = 0.0;
  bool hand_certified = false;
  for (const Instance& inst : instances) {
    const IcSolution sol = *SolveTask1(inst.problem);
    if (sol.certified) {
      ++certified;
      if (inst.name == "hand") hand_certified = true;
      const Matrix b = ComposeJoint(inst.problem.world, inst.problem.mechs,
                                    {})->rows;
      const double direct =
          DirectDeltaWithAlpha(inst.problem.world, b, sol.alpha, sol.eps_g);
      worst_residual = std::max(worst_residual, sol.feasibility);
      worst_excess = std::max(worst_excess, direct - inst.problem.delta_g);
    }
    IcProblem free = inst.problem;
    free.constrained = false;
    const IcSolution unconstrained = *SolveTask1(free);
    for (std::size_t o = 0; o < unconstrained.pi.rows(); ++o) {
      if (!unconstrained.present[o]) continue;
      double tv = 0.0;
      for (std::size_t s = 0; s < unconstrained.pi.cols(); ++s) {
        tv += 0.5 * std::abs(unconstrained.pi(o, s) -
                             unconstrained.solver_pi(o, s));
      }
      worst_tv = std::max(worst_tv, tv);
    }
  }
  pass = hand_certified && worst_residual <= 1e-6 && worst_excess <= 1e-6 &&
         worst_tv <= 1e-6;
  return {pass, absl::StrFormat(
                    "%d of %d certified (hand instance %s); worst residual "
                    "%.3g; worst direct delta - delta_g %.3g; unconstrained "
                    "TV %.3g",
                    certified, instances.size(),
                    hand_certified ? "certified" : "NOT certified",
                    worst_residual, worst_excess, worst_tv)};
}

Outcome Criterion8() {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> secrets(2, 3);
  std::uniform_int_distribution<int> datasets(2, 4);
  std::uniform_int_distribution<int> ks(1, 2);
  double worst = -kInfinity;
  int solved = 0;
  for (int i = 0; i < 20; ++i) {
    IcProblem p;
    p.world = testing::RandomWorld(secrets(rng), datasets(rng), rng);
    p.mechs = RandomMechs(ks(rng), p.world.num_datasets(), rng);
    for (double delta : {0.0, 0.02}) {
      p.delta_g = delta;
      absl::StatusOr<IcSolution> sol = SolveTask2(p);
      const double truth = TrueOpt(p.world, p.mechs, {}, delta)->max;
      if (!sol.ok()) {
        // Only an unbounded true ε excuses a missing certificate.
        if (!std::isinf(truth)) worst = kInfinity;
        continue;
      }
      ++solved;
      worst = std::max(worst, truth - sol->eps_g);
    }
  }
  return {worst <= 1e-9,
          absl::StrFormat("%d solves; max true_opt - eps(tau*) = %.3g", solved,
                          worst)};
}

Outcome Criterion9() {
  bool pass = true;
  std::string detail;
  double worst_gap = 0.0;
  double worst_violation = 0.0;
  int uncertified = 0;
  for (ExperimentKind kind :
       {ExperimentKind::kIndependent, ExperimentKind::kCopula}) {
    absl::StatusOr<std::vector<ExperimentRow>> rows =
        RunExperiment(DefaultExperiment(kind));
    if (!rows.ok()) return {false, std::string(rows.status().message())};
    absl::StrAppend(&detail, kind == ExperimentKind::kIndependent
                                 ? "independent gaps:"
                                 : " copula gaps:");
    for (const ExperimentRow& r : *rows) {
      absl::StrAppendFormat(&detail, " %.4f", r.gap);
      worst_gap = std::max(worst_gap, std::abs(r.gap));
      worst_violation = std::max(
          {worst_violation, r.violation_composed, r.violation_single});
      if (!r.certified_composed || !r.certified_single) ++uncertified;
    }
    absl::StrAppend(&detail, ";");
  }
  pass = worst_gap <= 0.05 && worst_violation <= 1e-9 && uncertified == 0;
  absl::StrAppendFormat(&detail,
                        " max |gap| %.4f; max ROC violation %.3g; "
                        "uncertified rows %d",
                        worst_gap, worst_violation, uncertified);
  return {pass, detail};
}

Outcome Criterion10() {
  std::mt19937_64 rng(10);
  std::uniform_int_distribution<int> secrets(2, 3);
  std::uniform_int_distribution<int> datasets(2, 4);
  std::uniform_int_distribution<int> ks(2, 3);
  int tradeoff_failures = 0;
  int cel_failures = 0;
  double worst_tradeoff = 0.0;
  double worst_reverse = 0.0;
  double worst_cel = -kInfinity;
  for (int i = 0; i < 30; ++i) {
    const World w = testing::RandomWorld(secrets(rng), datasets(rng), rng);
    const std::vector<MechanismKernel> mechs =
        RandomMechs(ks(rng), w.num_datasets(), rng);
    const TradeoffDominanceReport t = *TradeoffDominance(w, mechs);
    const CelReport c = *CelCompare(w, mechs);
    worst_tradeoff = std::max(worst_tradeoff, t.max_violation);
    worst_reverse = std::max(worst_reverse, t.max_gap);
    worst_cel = std::max(worst_cel, c.cel_joint - c.cel_product);
    if (t.max_violation > 1e-9) ++tradeoff_failures;
    if (c.cel_joint > c.cel_product + 1e-12) ++cel_failures;
  }
  return {tradeoff_failures == 0 && cel_failures == 0,
          absl::StrFormat("trade-off: joint above product on %d/30 (worst "
                          "%.4g, product above joint by up to %.4g); CEL: "
                          "joint above product on %d/30 (max joint - product "
                          "%.3g)",
                          tradeoff_failures, worst_tradeoff, worst_reverse,
                          cel_failures,
                          worst_cel)};
}

struct Criterion {
  int number;
  const char* name;
  Outcome (*run)();
  // Wall-time limit in seconds; zero means none.
  double limit;
};

const Criterion kCriteria[] = {
    {1, "PLD profile equals hockey-stick", Criterion1, 2.0},
    {2, "invertible worlds have no dependence loss", Criterion2, 0.0},
    {3, "composition bound ordering", Criterion3, 30.0},
    {4, "basic composition failure instance", Criterion4, 0.0},
    {5, "copula marginal preservation", Criterion5, 0.0},
    {6, "copula loss additivity and conservative bound", Criterion6, 0.0},
    {7, "IC task 1 certification", Criterion7, 0.0},
    {8, "IC task 2 upper bound", Criterion8, 0.0},
    {9, "audit gap at matched budgets", Criterion9, 60.0},
    {10, "Blackwell order and cross-entropy", Criterion10, 0.0},
};

bool Run(const Criterion& c) {
  const auto start = std::chrono::steady_clock::now();
  Outcome out = c.run();
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  if (c.limit > 0.0 && seconds >= c.limit) {
    out.pass = false;
    absl::StrAppendFormat(&out.detail, "; exceeded %.0fs limit", c.limit);
  }
  std::printf("criterion %d (%s): %s [%.2fs] %s\n", c.number, c.name,
              out.pass ? "PASS" : "FAIL", seconds, out.detail.c_str());
  std::fflush(stdout);
  return out.pass;
}

}  // namespace
}  // namespace dcp

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  int criterion = 0;
  app.add_option("--criterion", criterion, "Criterion to run; 0 runs all")
      ->check(CLI::Range(0, 10));
  CLI11_PARSE(app, argc, argv);
  bool ok = true;
  for (const dcp::Criterion& c : dcp::kCriteria) {
    if (criterion == 0 || criterion == c.number) ok = dcp::Run(c) && ok;
  }
  return ok ? 0 : 1;
}
