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

// Gaussian copula perturbation of a pair of additive-noise mechanisms:
// sampling (the PsedR pipeline), the copula CDF, the discretized perturbed
// joint and the copula part of its privacy loss.

#ifndef DCP_COPULA_H_
#define DCP_COPULA_H_

#include <cstdint>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "dcp/common.h"
#include "dcp/model.h"
#include "dcp/pld.h"
#include "json.hpp"

namespace dcp {

double NormalCdf(double x);
double NormalSf(double x);
// Returns ∓∞ at 0 and 1.
double NormalQuantile(double u);

// P[Z_a ≤ a, Z_b ≤ b] for a standard bivariate normal with correlation rho.
absl::StatusOr<double> BivariateNormalCdf(double a, double b, double rho);

// P[a1 < Z_a ≤ b1, a2 < Z_b ≤ b2]; bounds may be infinite. Requires
// |rho| < 1.
double BivariateNormalRectangle(double a1, double b1, double a2, double b2,
                                double rho);

// Marginal noise law Ξ: Laplace, Gaussian or a piecewise-linear empirical
// CDF.
class NoiseDistribution {
 public:
  enum class Kind { kLaplace, kGaussian, kEmpirical };

  static absl::StatusOr<NoiseDistribution> Laplace(double scale,
                                                   double location = 0.0);
  static absl::StatusOr<NoiseDistribution> Gaussian(double sigma,
                                                    double mean = 0.0);
  // `cdf` must rise strictly from 0 at the first knot to 1 at the last.
  static absl::StatusOr<NoiseDistribution> Empirical(std::vector<double> knots,
                                                     std::vector<double> cdf);

  Kind kind() const { return kind_; }
  double Cdf(double v) const;
  double Sf(double v) const;
  double Quantile(double u) const;
  // Characteristic width used to lay out discretization grids.
  double Scale() const;
  double Location() const;

  nlohmann::json ToJson() const;

 private:
  NoiseDistribution() = default;

  Kind kind_ = Kind::kGaussian;
  double location_ = 0.0;
  double scale_ = 1.0;
  std::vector<double> knots_;
  std::vector<double> cdf_;
};

absl::StatusOr<NoiseDistribution> ParseNoise(const nlohmann::json& doc);

struct GaussianCopulaSpec {
  double rho = 0.5;
  // Correlation used on the analysis side; defaults to rho.
  std::optional<double> rho_prime;
  // η̃(s) per secret index.
  std::vector<double> eta;
  double c_sen = 1.0;
  double eps_c = 1.0;
  double delta_c = 0.02;
  double w = 0.0;
  std::optional<NoiseDistribution> xi1;
  std::optional<NoiseDistribution> xi2;
  // Replaces var₁ when c_sen is zero.
  std::optional<double> variance_floor;

  // var₁ = w²(c_sen/ε_c)².
  absl::StatusOr<double> LatentVariance() const;
  // Correlation of the standardized latent pair drawn by the sampler.
  absl::StatusOr<double> EffectiveCorrelation() const;
  // Same with rho_prime in place of rho.
  absl::StatusOr<double> AnalysisCorrelation() const;
};

// sup over adjacent pairs of |η̃(s) − η̃(s')|.
double EtaSensitivity(const std::vector<double>& eta, const World& world);

absl::Status ValidateCopulaSpec(const GaussianCopulaSpec& spec,
                                const World& world);

// Reads `{rho, eta: {secret: value}, eps_c, delta_c, w, xi1, xi2}` with
// optional `rho_prime`, `c_sen` and `variance_floor`. Missing `w` defaults to
// 2 log(2/δ_c); missing `c_sen` is computed from η̃ over the adjacency.
absl::StatusOr<GaussianCopulaSpec> ParseCopulaSpec(const nlohmann::json& doc,
                                                   const World& world);

struct NoiseSamplePair {
  double z1 = 0.0;
  double z2 = 0.0;
  double u1 = 0.0;
  double u2 = 0.0;
  double v1 = 0.0;
  double v2 = 0.0;
};

// Deterministic part of the pipeline: latents (z1, z2) to noises.
absl::StatusOr<NoiseSamplePair> PsedrMap(const GaussianCopulaSpec& spec,
                                         int secret, double z1, double z2);

absl::StatusOr<NoiseSamplePair> PsedrSample(const GaussianCopulaSpec& spec,
                                            int secret, std::mt19937_64& rng);

absl::StatusOr<double> CopulaCdf(const GaussianCopulaSpec& spec, double v1,
                                 double v2);

// Samples (f1(x) + v1, f2(x) + v2) for every dataset x with positive mass;
// the secret driving η̃ is drawn from P(s | x).
absl::StatusOr<std::vector<std::vector<std::pair<double, double>>>>
PerturbPair(const World& world, const std::vector<double>& query1,
            const std::vector<double>& query2, const GaussianCopulaSpec& spec,
            std::mt19937_64& rng, int n);

// Two additive mechanisms y_i = f_i(x) + v_i binned on a shared layout: each
// axis spans [min f_i − span·scale, max f_i + span·scale] in `bins` bins,
// the outermost bins open to ±∞.
struct AdditiveDiscretization {
  std::vector<double> query1;
  std::vector<double> query2;
  int bins = 512;
  double span = 8.0;
};

struct PerturbedPair {
  int bins = 0;
  // Interior bin edges per axis (bins − 1 of them).
  std::vector<double> edges1;
  std::vector<double> edges2;
  // Rows are secrets, columns are cells i1 * bins + i2.
  Matrix joint;
  // Rows are secrets, columns are bins.
  Matrix marginal1;
  Matrix marginal2;
};

// Binned law of the copula-perturbed pair given each secret.
absl::StatusOr<PerturbedPair> ComputePerturbedPair(
    const GaussianCopulaSpec& spec, const World& world,
    const AdditiveDiscretization& grid);

// Binned mechanism i ∈ {1, 2} alone, as a kernel over datasets.
absl::StatusOr<MechanismKernel> BinnedMarginalMechanism(
    const GaussianCopulaSpec& spec, const World& world,
    const AdditiveDiscretization& grid, int axis);

struct CopulaLoss {
  // log κ_{s0}(cell) − log κ_{s1}(cell), NaN where undefined.
  std::vector<double> cell_loss;
  // Perturbed joint under s0 and s1.
  std::vector<double> reference;
  std::vector<double> alternative;
};

absl::StatusOr<CopulaLoss> CopulaLossGrid(const GaussianCopulaSpec& spec,
                                          const World& world,
                                          const AdditiveDiscretization& grid,
                                          SecretPair pair);

// Law of the copula loss under s0. A point mass at 0 when c_sen is zero.
absl::StatusOr<Pld> CopulaPlrv(const GaussianCopulaSpec& spec,
                               const World& world,
                               const AdditiveDiscretization& grid,
                               SecretPair pair);

struct AdditivityReport {
  // max |L_perturbed − L_unperturbed − L_copula| over cells with finite terms.
  double max_residual = 0.0;
  std::size_t cells_checked = 0;
};

absl::StatusOr<AdditivityReport> CheckCopulaAdditivity(
    const GaussianCopulaSpec& spec, const World& world,
    const AdditiveDiscretization& grid, SecretPair pair);

absl::StatusOr<double> ConservativeBound(const GaussianCopulaSpec& spec,
                                         double eps1, double delta1,
                                         double eps2, double delta2,
                                         double delta_g);

// Couples two kernels on ordered alphabets through a Gaussian copula on their
// per-dataset CDFs. Both marginals are preserved.
absl::StatusOr<DependenceGroup> GaussianCopulaCoupling(
    const std::vector<MechanismKernel>& mechs, int first, int second,
    double rho);

}  // namespace dcp

#endif  // DCP_COPULA_H_
