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

#include "dcp/ic.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "absl/strings/str_format.h"
#include "dcp/composition.h"
#include "dcp/divergence.h"

namespace dcp {
namespace {

constexpr double kPiFloor = 1e-12;
constexpr double kArmijo = 1e-4;
constexpr double kTauCap = 1e6;
constexpr double kDirectCheckSlack = 1e-6;
constexpr int kMaxRowIterations = 500;

// u(ŷ, s) = P(s) b(ŷ | s) for the existing composition.
struct Context {
  Matrix u;
  std::vector<double> prior;
  int num_secrets = 0;
  std::size_t num_base = 0;
};

absl::StatusOr<Context> BuildContext(
    const World& world, const std::vector<MechanismKernel>& mechs,
    const std::vector<DependenceGroup>& dependence, std::size_t cap) {
  if (mechs.empty()) {
    // Nothing released yet: a single outcome that every secret produces.
    Context ctx;
    ctx.num_secrets = world.num_secrets();
    ctx.num_base = 1;
    ctx.prior = world.secret_marginals;
    ctx.u = Matrix(1, ctx.num_secrets);
    for (int s = 0; s < ctx.num_secrets; ++s) ctx.u(0, s) = ctx.prior[s];
    return ctx;
  }
  absl::StatusOr<ComposedJoint> joint =
      ComposeJoint(world, mechs, dependence, cap);
  if (!joint.ok()) return joint.status();
  Context ctx;
  ctx.num_secrets = world.num_secrets();
  ctx.num_base = joint->num_outcomes();
  ctx.prior = world.secret_marginals;
  ctx.u = Matrix(ctx.num_base, ctx.num_secrets);
  for (int s = 0; s < ctx.num_secrets; ++s) {
    for (std::size_t y = 0; y < ctx.num_base; ++y) {
      ctx.u(y, s) = ctx.prior[s] * joint->rows(s, y);
    }
  }
  return ctx;
}

absl::Status CheckAlpha(const Matrix& alpha, int num_secrets) {
  if (static_cast<int>(alpha.rows()) != num_secrets || alpha.cols() == 0) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "alpha must have %d rows and at least one column", num_secrets));
  }
  for (std::size_t s = 0; s < alpha.rows(); ++s) {
    double total = 0.0;
    for (double v : alpha.row(s)) {
      if (!(v >= 0.0)) {
        return absl::InvalidArgumentError("alpha has a negative entry");
      }
      total += v;
    }
    if (std::abs(total - 1.0) > kMarginalTolerance) {
      return absl::InvalidArgumentError(
          absl::StrFormat("alpha row %d sums to %.17g", s, total));
    }
  }
  return absl::OkStatus();
}

// Joint weight W(o, s) over outcomes o = ŷ·m + a.
Matrix JointWeight(const Context& ctx, const Matrix& alpha) {
  const std::size_t m = alpha.cols();
  Matrix w(ctx.num_base * m, ctx.num_secrets);
  for (std::size_t y = 0; y < ctx.num_base; ++y) {
    for (std::size_t a = 0; a < m; ++a) {
      for (int s = 0; s < ctx.num_secrets; ++s) {
        w(y * m + a, s) = ctx.u(y, s) * alpha(s, a);
      }
    }
  }
  return w;
}

PosteriorTable PosteriorFromWeight(const Matrix& weight) {
  PosteriorTable table;
  table.mu = Matrix(weight.rows(), weight.cols());
  table.outcome_mass.assign(weight.rows(), 0.0);
  table.present.assign(weight.rows(), false);
  for (std::size_t o = 0; o < weight.rows(); ++o) {
    double z = 0.0;
    for (double v : weight.row(o)) z += v;
    table.outcome_mass[o] = z;
    if (!(z > 0.0)) continue;
    table.present[o] = true;
    for (std::size_t s = 0; s < weight.cols(); ++s) {
      table.mu(o, s) = weight(o, s) / z;
    }
  }
  return table;
}

// Constraint residuals of one posterior row.
struct RowResiduals {
  double lower = -kInfinity;
  double upper = -kInfinity;
  double expectation = -kInfinity;
};

RowResiduals Residuals(std::span<const double> p,
                       const std::vector<double>& prior, double tau,
                       double delta, ConstraintVariant variant) {
  RowResiduals r;
  double moment = 0.0;
  for (std::size_t s = 0; s < p.size(); ++s) {
    if (!(prior[s] > 0.0)) continue;
    r.lower = std::max(r.lower, prior[s] / tau - p[s]);
    if (variant == ConstraintVariant::kPure) {
      r.upper = std::max(r.upper, p[s] - tau * prior[s]);
    }
    moment += p[s] * p[s] / prior[s];
  }
  if (variant == ConstraintVariant::kExpectation) {
    r.expectation = moment - delta * tau;
  }
  return r;
}

// Quadratic penalty of one row and its gradient.
double RowPenalty(std::span<const double> p, const std::vector<double>& prior,
                  double tau, double delta, ConstraintVariant variant,
                  std::vector<double>* grad) {
  double pen = 0.0;
  double moment = 0.0;
  if (grad != nullptr) grad->assign(p.size(), 0.0);
  for (std::size_t s = 0; s < p.size(); ++s) {
    if (!(prior[s] > 0.0)) continue;
    const double lo = std::max(0.0, prior[s] / tau - p[s]);
    pen += lo * lo;
    if (grad != nullptr) (*grad)[s] -= 2.0 * lo;
    if (variant == ConstraintVariant::kPure) {
      const double hi = std::max(0.0, p[s] - tau * prior[s]);
      pen += hi * hi;
      if (grad != nullptr) (*grad)[s] += 2.0 * hi;
    }
    moment += p[s] * p[s] / prior[s];
  }
  if (variant == ConstraintVariant::kExpectation) {
    const double e = std::max(0.0, moment - delta * tau);
    pen += e * e;
    if (grad != nullptr && e > 0.0) {
      for (std::size_t s = 0; s < p.size(); ++s) {
        if (prior[s] > 0.0) (*grad)[s] += 4.0 * e * p[s] / prior[s];
      }
    }
  }
  return pen;
}

// Euclidean projection onto {x : x ≥ floor, Σ x = 1}.
void ProjectSimplex(std::vector<double>& v, double floor) {
  const std::size_t n = v.size();
  const double budget = 1.0 - floor * n;
  std::vector<double> sorted(n);
  for (std::size_t i = 0; i < n; ++i) sorted[i] = v[i] - floor;
  std::vector<double> work = sorted;
  std::sort(work.begin(), work.end(), std::greater<>());
  double run = 0.0;
  double theta = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    run += work[k];
    const double t = (run - budget) / static_cast<double>(k + 1);
    if (work[k] - t > 0.0) theta = t;
  }
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = std::max(sorted[i] - theta, 0.0) + floor;
  }
}

// Per-cell loss ℓ(s, π) of the scoring rule.
double CellLoss(LossKind kind, std::span<const double> p, std::size_t s) {
  if (kind == LossKind::kLog) return -std::log(std::max(p[s], kPiFloor));
  double sq = 0.0;
  for (double v : p) sq += v * v;
  return sq - 2.0 * p[s] + 1.0;
}

// Row objective of the π-step: loss against μ plus weighted penalty.
double RowObjective(LossKind kind, std::span<const double> mu,
                    std::span<const double> p, const std::vector<double>& prior,
                    double tau, double delta, ConstraintVariant variant,
                    double weight, std::vector<double>* grad) {
  double f = 0.0;
  std::vector<double> pen_grad;
  if (grad != nullptr) grad->assign(p.size(), 0.0);
  if (kind == LossKind::kLog) {
    for (std::size_t s = 0; s < p.size(); ++s) {
      if (mu[s] == 0.0) continue;
      f -= mu[s] * std::log(p[s]);
      if (grad != nullptr) (*grad)[s] -= mu[s] / p[s];
    }
  } else {
    for (std::size_t s = 0; s < p.size(); ++s) {
      f += p[s] * p[s] - 2.0 * mu[s] * p[s];
      if (grad != nullptr) (*grad)[s] += 2.0 * p[s] - 2.0 * mu[s];
    }
    f += 1.0;
  }
  if (weight > 0.0) {
    f += weight * RowPenalty(p, prior, tau, delta, variant,
                             grad != nullptr ? &pen_grad : nullptr);
    if (grad != nullptr) {
      for (std::size_t s = 0; s < p.size(); ++s) (*grad)[s] += weight * pen_grad[s];
    }
  }
  return f;
}

// Projected gradient with Armijo backtracking on one π row, started at the
// posterior row.
std::vector<double> SolvePiRow(LossKind kind, std::span<const double> mu,
                               const std::vector<double>& prior, double tau,
                               double delta, ConstraintVariant variant,
                               double weight, double tolerance) {
  const std::size_t n = mu.size();
  std::vector<double> p(mu.begin(), mu.end());
  ProjectSimplex(p, kPiFloor);
  std::vector<double> grad, next(n);
  double step = 1.0;
  double f = RowObjective(kind, mu, p, prior, tau, delta, variant, weight, &grad);
  for (int it = 0; it < kMaxRowIterations; ++it) {
    bool accepted = false;
    double moved = 0.0;
    for (int back = 0; back < 60; ++back) {
      for (std::size_t s = 0; s < n; ++s) next[s] = p[s] - step * grad[s];
      ProjectSimplex(next, kPiFloor);
      double decrease = 0.0;
      moved = 0.0;
      for (std::size_t s = 0; s < n; ++s) {
        decrease += grad[s] * (next[s] - p[s]);
        moved = std::max(moved, std::abs(next[s] - p[s]));
      }
      if (moved == 0.0) break;
      const double fn = RowObjective(kind, mu, next, prior, tau, delta, variant,
                                     weight, nullptr);
      if (fn <= f + kArmijo * decrease) {
        accepted = true;
        f = fn;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    p = next;
    RowObjective(kind, mu, p, prior, tau, delta, variant, weight, &grad);
    step = std::min(1.0, step * 2.0);
    if (moved < tolerance) break;
  }
  return p;
}

struct AlphaObjective {
  double value = 0.0;
  Matrix grad;
};

// Loss(α, π) + w Σ_o Pen(μ_o(α)) and its gradient in α.
AlphaObjective EvaluateAlpha(const Context& ctx, const Matrix& alpha,
                             const Matrix& pi, LossKind kind, double tau,
                             double delta, ConstraintVariant variant,
                             double weight, bool with_grad) {
  const std::size_t m = alpha.cols();
  const int ns = ctx.num_secrets;
  AlphaObjective out;
  if (with_grad) out.grad = Matrix(ns, m);
  std::vector<double> mu(ns), g;
  for (std::size_t y = 0; y < ctx.num_base; ++y) {
    for (std::size_t a = 0; a < m; ++a) {
      const std::size_t o = y * m + a;
      const std::span<const double> p = pi.row(o);
      double z = 0.0;
      for (int s = 0; s < ns; ++s) {
        const double cell = CellLoss(kind, p, s);
        out.value += ctx.u(y, s) * alpha(s, a) * cell;
        if (with_grad) out.grad(s, a) += ctx.u(y, s) * cell;
        z += ctx.u(y, s) * alpha(s, a);
      }
      if (weight == 0.0 || !(z > 0.0)) continue;
      for (int s = 0; s < ns; ++s) mu[s] = ctx.u(y, s) * alpha(s, a) / z;
      out.value += weight * RowPenalty(mu, ctx.prior, tau, delta, variant,
                                       with_grad ? &g : nullptr);
      if (!with_grad) continue;
      double mean = 0.0;
      for (int s = 0; s < ns; ++s) mean += g[s] * mu[s];
      for (int t = 0; t < ns; ++t) {
        out.grad(t, a) += weight * ctx.u(y, t) / z * (g[t] - mean);
      }
    }
  }
  return out;
}

// One projected-gradient step on all α rows with Armijo backtracking.
// Returns the largest coordinate change.
double AlphaStep(const Context& ctx, Matrix& alpha, const Matrix& pi,
                 LossKind kind, double tau, double delta,
                 ConstraintVariant variant, double weight, double& step) {
  const AlphaObjective cur = EvaluateAlpha(ctx, alpha, pi, kind, tau, delta,
                                           variant, weight, /*with_grad=*/true);
  const std::size_t m = alpha.cols();
  Matrix next(alpha.rows(), m);
  std::vector<double> row(m);
  for (int back = 0; back < 60; ++back) {
    double decrease = 0.0;
    double moved = 0.0;
    for (std::size_t s = 0; s < alpha.rows(); ++s) {
      for (std::size_t a = 0; a < m; ++a) {
        row[a] = alpha(s, a) - step * cur.grad(s, a);
      }
      ProjectSimplex(row, 0.0);
      for (std::size_t a = 0; a < m; ++a) {
        next(s, a) = row[a];
        decrease += cur.grad(s, a) * (row[a] - alpha(s, a));
        moved = std::max(moved, std::abs(row[a] - alpha(s, a)));
      }
    }
    if (moved == 0.0) return 0.0;
    const double fn = EvaluateAlpha(ctx, next, pi, kind, tau, delta, variant,
                                    weight, /*with_grad=*/false)
                          .value;
    if (fn <= cur.value + kArmijo * decrease) {
      alpha = next;
      step = std::min(step * 2.0, 1e6);
      return moved;
    }
    step *= 0.5;
  }
  return 0.0;
}

Matrix SolvePi(const Context& ctx, const Matrix& alpha, LossKind kind,
               double tau, double delta, ConstraintVariant variant,
               double weight, double tolerance) {
  const PosteriorTable post = PosteriorFromWeight(JointWeight(ctx, alpha));
  Matrix pi(post.mu.rows(), ctx.num_secrets);
  for (std::size_t o = 0; o < post.mu.rows(); ++o) {
    std::vector<double> row;
    if (post.present[o]) {
      row = SolvePiRow(kind, post.mu.row(o), ctx.prior, tau, delta, variant,
                       weight, tolerance);
    } else {
      row = ctx.prior;
    }
    for (int s = 0; s < ctx.num_secrets; ++s) pi(o, s) = row[s];
  }
  return pi;
}

double MaxAbsDiff(const Matrix& a, const Matrix& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    d = std::max(d, std::abs(a.data()[i] - b.data()[i]));
  }
  return d;
}

Matrix Blend(const Matrix& alpha, double t) {
  Matrix out(alpha.rows(), alpha.cols());
  const double uniform = 1.0 / static_cast<double>(alpha.cols());
  for (std::size_t s = 0; s < alpha.rows(); ++s) {
    for (std::size_t a = 0; a < alpha.cols(); ++a) {
      out(s, a) = (1.0 - t) * alpha(s, a) + t * uniform;
    }
  }
  return out;
}

Matrix ChannelFromWeight(const Matrix& weight, const World& world) {
  Matrix channel(world.num_secrets(), weight.rows());
  for (int s = 0; s < world.num_secrets(); ++s) {
    const double prior = world.secret_marginals[s];
    if (!(prior > 0.0)) continue;
    for (std::size_t o = 0; o < weight.rows(); ++o) {
      channel(s, o) = weight(o, s) / prior;
    }
  }
  return channel;
}

FeasibilityReport Feasibility(const PosteriorTable& post, const World& world,
                              double tau, double delta,
                              ConstraintVariant variant) {
  return PiFeasible(post.mu, post.present, world, tau, delta, variant);
}

double MinPositive(const World& world) {
  double p_min = 1.0;
  for (double p : world.secret_marginals) {
    if (p > 0.0) p_min = std::min(p_min, p);
  }
  return p_min;
}

absl::Status CheckProblem(const IcProblem& problem) {
  if (!(problem.delta_g >= 0.0) || problem.delta_g > 1.0) {
    return absl::InvalidArgumentError("delta_g must lie in [0, 1]");
  }
  if (problem.alphabet_size < 1) {
    return absl::InvalidArgumentError("alphabet size must be at least 1");
  }
  if (!(problem.world.PStar() > 0.0)) {
    return absl::InvalidArgumentError("P* must be positive");
  }
  return absl::OkStatus();
}

}  // namespace

absl::StatusOr<double> EpsilonOfTau(double tau, double p_star) {
  if (!(tau >= 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrFormat("tau_g must be >= 1, got %g", tau));
  }
  if (!(p_star > 0.0) || p_star > 1.0) {
    return absl::InvalidArgumentError("P* must lie in (0, 1]");
  }
  return std::log1p((tau - 1.0) / p_star);
}

absl::StatusOr<double> EpsilonOfTau(double tau, const World& world) {
  return EpsilonOfTau(tau, world.PStar());
}

ConstraintVariant ResolveVariant(ConstraintVariant variant, double tau,
                                 double delta, double p_min) {
  if (variant != ConstraintVariant::kAuto) return variant;
  return delta > 0.0 && delta * tau >= 1.0 && tau * p_min < 1.0
             ? ConstraintVariant::kExpectation
             : ConstraintVariant::kPure;
}

const char* VariantName(ConstraintVariant variant) {
  switch (variant) {
    case ConstraintVariant::kAuto:
      return "auto";
    case ConstraintVariant::kPure:
      return "pure";
    case ConstraintVariant::kExpectation:
      return "expectation";
  }
  return "unknown";
}

double FeasibilityReport::max_residual() const {
  return std::max({lower, upper, expectation});
}

FeasibilityReport PiFeasible(const Matrix& pi, const std::vector<bool>& present,
                             const World& world, double tau, double delta,
                             ConstraintVariant variant) {
  FeasibilityReport report;
  report.variant = ResolveVariant(variant, tau, delta, MinPositive(world));
  for (std::size_t o = 0; o < pi.rows(); ++o) {
    if (!present.empty() && !present[o]) continue;
    const RowResiduals r = Residuals(pi.row(o), world.secret_marginals, tau,
                                     delta, report.variant);
    report.lower = std::max(report.lower, r.lower);
    report.upper = std::max(report.upper, r.upper);
    report.expectation = std::max(report.expectation, r.expectation);
  }
  return report;
}

absl::StatusOr<PosteriorTable> Posterior(
    const World& world, const std::vector<MechanismKernel>& mechs,
    const std::vector<DependenceGroup>& dependence, const Matrix& alpha,
    std::size_t cap) {
  if (absl::Status s = CheckAlpha(alpha, world.num_secrets()); !s.ok()) return s;
  absl::StatusOr<Context> ctx = BuildContext(world, mechs, dependence, cap);
  if (!ctx.ok()) return ctx.status();
  return PosteriorFromWeight(JointWeight(*ctx, alpha));
}

absl::StatusOr<Matrix> CompositionWithAlpha(
    const World& world, const std::vector<MechanismKernel>& mechs,
    const std::vector<DependenceGroup>& dependence, const Matrix& alpha,
    std::size_t cap) {
  if (absl::Status s = CheckAlpha(alpha, world.num_secrets()); !s.ok()) return s;
  absl::StatusOr<Context> ctx = BuildContext(world, mechs, dependence, cap);
  if (!ctx.ok()) return ctx.status();
  return ChannelFromWeight(JointWeight(*ctx, alpha), world);
}

absl::StatusOr<double> SpsrLoss(const Matrix& pi, const World& world,
                                const std::vector<MechanismKernel>& mechs,
                                const std::vector<DependenceGroup>& dependence,
                                const Matrix& alpha, LossKind loss,
                                std::size_t cap) {
  if (absl::Status s = CheckAlpha(alpha, world.num_secrets()); !s.ok()) return s;
  absl::StatusOr<Context> ctx = BuildContext(world, mechs, dependence, cap);
  if (!ctx.ok()) return ctx.status();
  const Matrix weight = JointWeight(*ctx, alpha);
  if (pi.rows() != weight.rows() || pi.cols() != weight.cols()) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "pi must be %d x %d", weight.rows(), weight.cols()));
  }
  double total = 0.0;
  for (std::size_t o = 0; o < weight.rows(); ++o) {
    for (std::size_t s = 0; s < weight.cols(); ++s) {
      const double w = weight(o, s);
      if (w == 0.0) continue;
      if (loss == LossKind::kLog) {
        if (!(pi(o, s) > 0.0)) return kInfinity;
        total -= w * std::log(pi(o, s));
      } else {
        total += w * CellLoss(loss, pi.row(o), s);
      }
    }
  }
  return total;
}

absl::StatusOr<CertReport> Certify(
    const World& world, const std::vector<MechanismKernel>& mechs,
    const std::vector<DependenceGroup>& dependence,
    const std::optional<Matrix>& alpha, double tau, double delta,
    ConstraintVariant variant, std::size_t cap) {
  if (!(delta >= 0.0) || delta > 1.0) {
    return absl::InvalidArgumentError("delta_g must lie in [0, 1]");
  }
  absl::StatusOr<double> eps = EpsilonOfTau(tau, world);
  if (!eps.ok()) return eps.status();
  const Matrix a = alpha.has_value() ? *alpha : Matrix(world.num_secrets(), 1, 1.0);
  if (absl::Status s = CheckAlpha(a, world.num_secrets()); !s.ok()) return s;
  absl::StatusOr<Context> ctx = BuildContext(world, mechs, dependence, cap);
  if (!ctx.ok()) return ctx.status();
  const Matrix weight = JointWeight(*ctx, a);
  const PosteriorTable post = PosteriorFromWeight(weight);

  CertReport report;
  report.feasibility = Feasibility(post, world, tau, delta, variant);
  report.stage1 = report.feasibility.feasible();

  // Probability, over (S, Y) drawn jointly, of a ratio outside [1/τ, τ].
  for (std::size_t o = 0; o < post.mu.rows(); ++o) {
    if (!post.present[o]) continue;
    for (int s = 0; s < world.num_secrets(); ++s) {
      const double prior = world.secret_marginals[s];
      if (!(prior > 0.0) || post.mu(o, s) == 0.0) continue;
      // Same absolute slack as the Π residuals.
      const double pi = post.mu(o, s);
      if (pi > tau * prior + kProbabilityTolerance ||
          pi < prior / tau - kProbabilityTolerance) {
        report.tail_mass += weight(o, s);
      }
    }
  }
  report.stage2 = report.tail_mass <= delta + kProbabilityTolerance;

  // Direct check on the full composition b(ŷ|s) α(y_α|s).
  const Matrix channel = ChannelFromWeight(weight, world);
  for (const SecretPair& p : world.adjacency) {
    report.direct_check_delta = std::max(
        report.direct_check_delta, HockeyStick(ChannelPair(channel, p), *eps));
  }
  report.stage3 = report.direct_check_delta <= delta + kDirectCheckSlack;
  report.certified = report.stage1;
  report.internal_error = report.stage1 && !(report.stage2 && report.stage3);
  if (report.internal_error) {
    report.note = "internal error: posterior constraints hold but a "
                  "corroborating stage failed";
  } else if (!report.stage1 && report.stage3) {
    report.note = "sufficient-condition gap";
  } else if (!report.stage1) {
    report.note = "posterior constraints violated";
  }
  return report;
}

absl::StatusOr<IcSolution> SolveTask1(const IcProblem& problem) {
  if (absl::Status s = CheckProblem(problem); !s.ok()) return s;
  const World& world = problem.world;
  absl::StatusOr<double> eps = EpsilonOfTau(problem.tau_g, world);
  if (!eps.ok()) return eps.status();
  absl::StatusOr<Context> ctx =
      BuildContext(world, problem.mechs, problem.dependence, problem.cap);
  if (!ctx.ok()) return ctx.status();
  const double tau = problem.tau_g;
  const double delta = problem.delta_g;
  const ConstraintVariant variant =
      ResolveVariant(problem.variant, tau, delta, MinPositive(world));
  const int ns = world.num_secrets();
  const std::size_t m = problem.alphabet_size;

  // Seeded start away from the constant α, where the loss gradient is flat
  // across outputs.
  std::mt19937_64 rng(problem.seed);
  std::uniform_real_distribution<double> jitter(0.0, 1.0);
  Matrix alpha(ns, m);
  for (int s = 0; s < ns; ++s) {
    double total = 0.0;
    for (std::size_t a = 0; a < m; ++a) {
      alpha(s, a) = 1.0 + jitter(rng);
      total += alpha(s, a);
    }
    for (std::size_t a = 0; a < m; ++a) alpha(s, a) /= total;
  }

  const PenaltySchedule& sched = problem.schedule;
  const int rounds = problem.constrained ? sched.rounds : 1;
  double weight = problem.constrained ? sched.initial_weight : 0.0;
  Matrix pi = SolvePi(*ctx, alpha, problem.loss, tau, delta, variant, weight,
                      sched.inner_tolerance);
  double step = 1.0;
  for (int round = 0; round < rounds; ++round) {
    for (int it = 0; it < sched.max_inner_iterations; ++it) {
      const double moved = AlphaStep(*ctx, alpha, pi, problem.loss, tau, delta,
                                     variant, weight, step);
      Matrix next = SolvePi(*ctx, alpha, problem.loss, tau, delta, variant,
                            weight, sched.inner_tolerance);
      const double change = std::max(moved, MaxAbsDiff(next, pi));
      pi = std::move(next);
      if (change < sched.inner_tolerance) break;
    }
    weight *= sched.growth;
  }

  IcSolution sol;
  sol.variant = variant;
  sol.tau_g = tau;
  sol.eps_g = *eps;
  sol.solver_pi = pi;
  PosteriorTable post = PosteriorFromWeight(JointWeight(*ctx, alpha));
  FeasibilityReport feas = Feasibility(post, world, tau, delta, variant);
  if (problem.constrained && !feas.feasible()) {
    // Each posterior of the existing composition is a mixture of the
    // posteriors after α, and Π is convex, so infeasibility at the constant α
    // rules out every α.
    const Matrix constant = Blend(alpha, 1.0);
    const PosteriorTable base = PosteriorFromWeight(JointWeight(*ctx, constant));
    if (!Feasibility(base, world, tau, delta, variant).feasible()) {
      sol.diagnostics.push_back(absl::StrFormat(
          "infeasible: the existing composition already violates the %s "
          "constraints at tau_g = %g for every alpha",
          VariantName(variant), tau));
    } else {
      double lo = 0.0;
      double hi = 1.0;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        const PosteriorTable trial =
            PosteriorFromWeight(JointWeight(*ctx, Blend(alpha, mid)));
        if (Feasibility(trial, world, tau, delta, variant).feasible()) {
          hi = mid;
        } else {
          lo = mid;
        }
      }
      sol.diagnostics.push_back(absl::StrFormat(
          "penalty iterate infeasible (residual %.3g); blended toward the "
          "constant alpha with weight %.6g",
          feas.max_residual(), hi));
      alpha = Blend(alpha, hi);
      post = PosteriorFromWeight(JointWeight(*ctx, alpha));
      feas = Feasibility(post, world, tau, delta, variant);
    }
  }
  sol.alpha = alpha;
  sol.pi = post.mu;
  sol.present = post.present;
  sol.feasibility = feas.max_residual();
  absl::StatusOr<CertReport> cert =
      Certify(world, problem.mechs, problem.dependence, alpha, tau, delta,
              variant, problem.cap);
  if (!cert.ok()) return cert.status();
  sol.cert = *cert;
  sol.certified = problem.constrained && cert->certified;
  sol.direct_check_delta = cert->direct_check_delta;
  if (!cert->note.empty()) sol.diagnostics.push_back(cert->note);
  absl::StatusOr<double> loss =
      SpsrLoss(post.mu, world, problem.mechs, problem.dependence, alpha,
               problem.loss, problem.cap);
  if (!loss.ok()) return loss.status();
  sol.loss = *loss;
  return sol;
}

absl::StatusOr<IcSolution> SolveTask2(const IcProblem& problem) {
  if (absl::Status s = CheckProblem(problem); !s.ok()) return s;
  const World& world = problem.world;
  const double delta = problem.delta_g;
  const Matrix alpha(world.num_secrets(), 1, 1.0);
  absl::StatusOr<PosteriorTable> post = Posterior(
      world, problem.mechs, problem.dependence, alpha, problem.cap);
  if (!post.ok()) return post.status();

  // Feasibility is monotone in τ for a fixed variant, so bisection finds the
  // smallest feasible τ.
  const auto smallest_tau = [&](ConstraintVariant v,
                                double lo) -> std::optional<double> {
    const auto ok = [&](double tau) {
      return Feasibility(*post, world, tau, delta, v).feasible();
    };
    if (ok(lo)) return lo;
    if (!ok(kTauCap)) return std::nullopt;
    double hi = kTauCap;
    for (int it = 0; it < 200 && hi - lo > 1e-13 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (ok(mid)) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    return hi;
  };
  std::optional<double> best;
  ConstraintVariant chosen = ConstraintVariant::kPure;
  const auto consider = [&](ConstraintVariant v) {
    double lo = 1.0;
    if (v == ConstraintVariant::kExpectation) {
      if (!(delta > 0.0)) return;
      lo = std::max(1.0, 1.0 / delta);
      if (lo > kTauCap) return;
    }
    std::optional<double> tau = smallest_tau(v, lo);
    if (tau.has_value() && (!best.has_value() || *tau < *best)) {
      best = tau;
      chosen = v;
    }
  };
  if (problem.variant == ConstraintVariant::kAuto) {
    consider(ConstraintVariant::kPure);
    consider(ConstraintVariant::kExpectation);
  } else {
    consider(problem.variant);
  }
  if (!best.has_value()) {
    return absl::FailedPreconditionError(absl::StrFormat(
        "no feasible tau_g below %g", kTauCap));
  }
  IcSolution sol;
  sol.alpha = alpha;
  sol.pi = post->mu;
  sol.solver_pi = post->mu;
  sol.present = post->present;
  sol.tau_g = *best;
  sol.variant = chosen;
  absl::StatusOr<double> eps = EpsilonOfTau(sol.tau_g, world);
  if (!eps.ok()) return eps.status();
  sol.eps_g = *eps;
  sol.feasibility =
      Feasibility(*post, world, sol.tau_g, delta, chosen).max_residual();
  absl::StatusOr<CertReport> cert =
      Certify(world, problem.mechs, problem.dependence, std::nullopt,
              sol.tau_g, delta, chosen, problem.cap);
  if (!cert.ok()) return cert.status();
  sol.cert = *cert;
  sol.certified = cert->certified;
  sol.direct_check_delta = cert->direct_check_delta;
  if (!cert->note.empty()) sol.diagnostics.push_back(cert->note);
  absl::StatusOr<double> loss =
      SpsrLoss(post->mu, world, problem.mechs, problem.dependence, alpha,
               problem.loss, problem.cap);
  if (!loss.ok()) return loss.status();
  sol.loss = *loss;
  return sol;
}

}  // namespace dcp
