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

#include "dcp/experiment.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"
#include "dcp/audit.h"
#include "dcp/copula.h"

namespace dcp {
namespace {

// Pure DCP level of a channel: max log-ratio over adjacent pairs and outputs.
double PureEpsilon(const World& world, const Matrix& psi) {
  double worst = 0.0;
  for (const SecretPair& p : world.adjacency) {
    for (std::size_t y = 0; y < psi.cols(); ++y) {
      const double a = psi(p.first, y);
      const double b = psi(p.second, y);
      if (a == 0.0) continue;
      worst = std::max(worst, b == 0.0 ? kInfinity : std::log(a / b));
    }
  }
  return worst;
}

MechanismKernel ThresholdRr(const World& world, double keep,
                            const std::string& name) {
  MechanismKernel m;
  m.name = name;
  m.outputs = {"0", "1"};
  m.kernel = Matrix(world.num_datasets(), 2);
  for (int x = 0; x < world.num_datasets(); ++x) {
    const int bit = 2 * x >= world.num_datasets() ? 1 : 0;
    m.kernel(x, bit) = keep;
    m.kernel(x, 1 - bit) = 1.0 - keep;
  }
  return m;
}

absl::StatusOr<double> RrEpsilon(const World& world, double keep) {
  absl::StatusOr<EffectiveKernel> psi =
      ComputeEffectiveKernel(world, ThresholdRr(world, keep, "probe"));
  if (!psi.ok()) return psi.status();
  return PureEpsilon(world, psi->psi);
}

absl::StatusOr<double> CouplingCorrelation(const ExperimentConfig& config,
                                           const World& world) {
  GaussianCopulaSpec spec;
  spec.rho = config.rho;
  spec.eps_c = config.eps_c;
  spec.delta_c = config.delta_c;
  spec.w = 2.0 * std::log(2.0 / config.delta_c);
  spec.eta.resize(world.num_secrets());
  for (int s = 0; s < world.num_secrets(); ++s) spec.eta[s] = s;
  spec.c_sen = EtaSensitivity(spec.eta, world);
  return spec.EffectiveCorrelation();
}

std::string Csv(double v) { return absl::StrFormat("%.12g", v); }

}  // namespace

absl::StatusOr<World> SyntheticWorld(double lambda) {
  if (!(lambda >= 0.0) || lambda > 1.0) {
    return absl::InvalidArgumentError("lambda must lie in [0, 1]");
  }
  Matrix joint(2, 4);
  for (int s = 0; s < 2; ++s) {
    const int home = s == 0 ? 0 : 3;
    for (int x = 0; x < 4; ++x) {
      joint(s, x) = 0.5 * ((x == home ? 1.0 - lambda : 0.0) + lambda / 4.0);
    }
  }
  return MakeWorld({"s0", "s1"}, {"x0", "x1", "x2", "x3"}, std::move(joint));
}

absl::StatusOr<MechanismKernel> CalibratedThresholdRr(const World& world,
                                                      double eps,
                                                      const std::string& name) {
  if (!(eps >= 0.0)) return absl::InvalidArgumentError("eps must be >= 0");
  absl::StatusOr<double> full = RrEpsilon(world, 1.0);
  if (!full.ok()) return full.status();
  if (*full <= eps) return ThresholdRr(world, 1.0, name);
  // The leak grows monotonically with the keep probability on [1/2, 1].
  double lo = 0.5;
  double hi = 1.0;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    absl::StatusOr<double> e = RrEpsilon(world, mid);
    if (!e.ok()) return e.status();
    if (*e <= eps) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return ThresholdRr(world, lo, name);
}

ExperimentConfig DefaultExperiment(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  if (kind == ExperimentKind::kIndependent) {
    c.eps_g = {0.25, 0.5, 1.5, 3.0, 5.0};
    c.eps_i = {0.05, 0.1, 0.3, 0.6, 1.0};
    c.num_existing = 4;
  } else {
    c.eps_g = {0.4, 0.6, 1.0, 2.0, 4.0, 6.0};
    c.eps_i = {0.05, 0.1, 0.18, 0.3, 0.6, 1.0};
    c.num_existing = 5;
  }
  return c;
}

absl::StatusOr<ExperimentRow> CompareAtBudget(
    const World& world, const std::vector<MechanismKernel>& mechs,
    const std::vector<DependenceGroup>& dependence, double eps_g,
    double delta_g, int alphabet_size, std::uint64_t seed, std::size_t cap,
    std::optional<SecretPair> pair) {
  ExperimentRow row;
  row.eps_g = eps_g;
  row.delta_g = delta_g;
  IcProblem problem;
  problem.world = world;
  problem.delta_g = delta_g;
  problem.tau_g = 1.0 + world.PStar() * std::expm1(eps_g);
  problem.alphabet_size = alphabet_size;
  problem.seed = seed;
  problem.cap = cap;

  IcProblem composed_problem = problem;
  composed_problem.mechs = mechs;
  composed_problem.dependence = dependence;
  absl::StatusOr<IcSolution> composed = SolveTask1(composed_problem);
  if (!composed.ok()) return composed.status();
  absl::StatusOr<IcSolution> single = SolveTask1(problem);
  if (!single.ok()) return single.status();

  absl::StatusOr<Matrix> channel_a = CompositionWithAlpha(
      world, mechs, dependence, composed->alpha, cap);
  if (!channel_a.ok()) return channel_a.status();
  absl::StatusOr<Matrix> channel_b =
      CompositionWithAlpha(world, {}, {}, single->alpha, cap);
  if (!channel_b.ok()) return channel_b.status();

  row.certified_composed = composed->certified;
  row.certified_single = single->certified;
  AuditCase c;
  c.eps_g = row.eps_g;
  c.delta_g = row.delta_g;
  c.composed = {"composed", *channel_a, composed->eps_g, delta_g,
                composed->certified};
  c.single = {"single", *channel_b, single->eps_g, delta_g,
              single->certified};
  absl::StatusOr<AuditRow> audit = AuditOne(world, c, pair);
  if (audit.ok()) {
    row.auc_composed = audit->auc_composed;
    row.auc_single = audit->auc_single;
    row.gap = audit->gap;
    row.violation_composed = audit->violation_composed;
    row.violation_single = audit->violation_single;
  } else {
    // Report the attack anyway; the missing certificate goes in the flag.
    absl::StatusOr<PairAuc> a = WorstPairAuc(world, *channel_a, pair);
    absl::StatusOr<PairAuc> b = WorstPairAuc(world, *channel_b, pair);
    if (!a.ok()) return a.status();
    if (!b.ok()) return b.status();
    row.auc_composed = a->roc.auc;
    row.auc_single = b->roc.auc;
    row.gap = row.auc_composed - row.auc_single;
    std::vector<std::string> notes;
    if (!composed->certified) {
      notes.push_back("composed uncertified");
      for (const std::string& d : composed->diagnostics) notes.push_back(d);
    }
    if (!single->certified) notes.push_back("single uncertified");
    row.flag = absl::StrJoin(notes, "; ");
  }
  return row;
}

absl::StatusOr<std::vector<ExperimentRow>> RunExperiment(
    const ExperimentConfig& config) {
  if (config.eps_g.size() != config.eps_i.size()) {
    return absl::InvalidArgumentError("eps_g and eps_i grids differ in length");
  }
  if (config.num_existing < 1) {
    return absl::InvalidArgumentError("need at least one existing mechanism");
  }
  absl::StatusOr<World> world = SyntheticWorld(config.lambda);
  if (!world.ok()) return world.status();
  std::optional<double> rho_eff;
  if (config.kind == ExperimentKind::kCopula) {
    if (config.num_existing < 2) {
      return absl::InvalidArgumentError("copula coupling needs two mechanisms");
    }
    absl::StatusOr<double> r = CouplingCorrelation(config, *world);
    if (!r.ok()) return r.status();
    rho_eff = *r;
  }

  auto grid_point = [&](std::size_t k) -> absl::StatusOr<ExperimentRow> {
    std::vector<MechanismKernel> existing;
    for (int i = 0; i < config.num_existing; ++i) {
      absl::StatusOr<MechanismKernel> m = CalibratedThresholdRr(
          *world, config.eps_i[k], absl::StrCat("m", i + 1));
      if (!m.ok()) return m.status();
      existing.push_back(*std::move(m));
    }
    std::vector<DependenceGroup> dependence;
    if (rho_eff.has_value()) {
      absl::StatusOr<DependenceGroup> g =
          GaussianCopulaCoupling(existing, 0, 1, *rho_eff);
      if (!g.ok()) return g.status();
      dependence.push_back(*std::move(g));
    }
    absl::StatusOr<ExperimentRow> row =
        CompareAtBudget(*world, existing, dependence, config.eps_g[k],
                        config.delta_g, config.alphabet_size, config.seed + k,
                        config.cap);
    if (row.ok()) row->eps_i = config.eps_i[k];
    return row;
  };

  // Grid points are independent and seeded by index, so the pool size does
  // not affect the output.
  const std::size_t n = config.eps_g.size();
  std::vector<absl::StatusOr<ExperimentRow>> results(
      n, absl::UnknownError("not run"));
  std::atomic<std::size_t> next{0};
  const std::size_t workers = std::clamp<std::size_t>(
      std::thread::hardware_concurrency(), 1, std::max<std::size_t>(n, 1));
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < n; k = next++) {
        results[k] = grid_point(k);
      }
    });
  }
  for (std::thread& t : pool) t.join();

  std::vector<ExperimentRow> rows;
  for (absl::StatusOr<ExperimentRow>& r : results) {
    if (!r.ok()) return r.status();
    rows.push_back(*std::move(r));
  }
  return rows;
}

void WriteExperimentCsv(const std::vector<ExperimentRow>& rows,
                        std::ostream& out) {
  out << "eps_g,auc_composed,auc_single,eps_i,delta_g,gap,certified_composed,"
         "certified_single,violation_composed,violation_single,flag\n";
  for (const ExperimentRow& r : rows) {
    std::string flag = r.flag;
    std::replace(flag.begin(), flag.end(), ',', ' ');
    out << absl::StrJoin(
               {Csv(r.eps_g), Csv(r.auc_composed), Csv(r.auc_single),
                Csv(r.eps_i), Csv(r.delta_g), Csv(r.gap),
                std::string(r.certified_composed ? "1" : "0"),
                std::string(r.certified_single ? "1" : "0"),
                Csv(r.violation_composed), Csv(r.violation_single), flag},
               ",")
        << "\n";
  }
}

void WriteExperimentSvg(const std::vector<ExperimentRow>& rows,
                        std::ostream& out) {
  constexpr double kWidth = 480.0;
  constexpr double kHeight = 320.0;
  constexpr double kMargin = 40.0;
  double max_eps = 1.0;
  for (const ExperimentRow& r : rows) max_eps = std::max(max_eps, r.eps_g);
  const auto px = [&](double eps) {
    return kMargin + eps / max_eps * (kWidth - 2.0 * kMargin);
  };
  // AUC lives in [0.5, 1].
  const auto py = [&](double auc) {
    return kHeight - kMargin - (auc - 0.5) / 0.5 * (kHeight - 2.0 * kMargin);
  };
  const auto polyline = [&](bool composed, const char* color) {
    std::vector<std::string> pts;
    for (const ExperimentRow& r : rows) {
      pts.push_back(absl::StrFormat(
          "%.2f,%.2f", px(r.eps_g),
          py(composed ? r.auc_composed : r.auc_single)));
    }
    out << absl::StrFormat(
        "  <polyline fill=\"none\" stroke=\"%s\" points=\"%s\"/>\n", color,
        absl::StrJoin(pts, " "));
  };
  out << absl::StrFormat(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%g\" height=\"%g\">\n",
      kWidth, kHeight);
  out << absl::StrFormat(
      "  <line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n",
      kMargin, kHeight - kMargin, kWidth - kMargin, kHeight - kMargin);
  out << absl::StrFormat(
      "  <line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"black\"/>\n",
      kMargin, kMargin, kMargin, kHeight - kMargin);
  polyline(true, "blue");
  polyline(false, "red");
  out << absl::StrFormat(
      "  <text x=\"%g\" y=\"%g\">eps_g</text>\n"
      "  <text x=\"4\" y=\"%g\">AUC</text>\n"
      "  <text x=\"%g\" y=\"%g\" fill=\"blue\">composed</text>\n"
      "  <text x=\"%g\" y=\"%g\" fill=\"red\">single</text>\n",
      kWidth / 2.0, kHeight - 8.0, kMargin - 8.0, kWidth - 120.0, kMargin,
      kWidth - 120.0, kMargin + 16.0);
  out << "</svg>\n";
}

}  // namespace dcp
