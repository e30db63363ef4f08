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

#include "dcp/copula.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "boost/math/quadrature/gauss_kronrod.hpp"
#include "boost/math/special_functions/erf.hpp"
#include "dcp/composition.h"

namespace dcp {
namespace {

constexpr double kQuantileTolerance = 1e-12;
// |t| beyond this carries less than 1e-18 of standard normal mass.
constexpr double kLatentClip = 9.0;
// Standard deviations kept around the conditional mean of the second latent.
constexpr double kConditionalClip = 12.0;
constexpr double kGridDensityTolerance = 1e-3;

double NormalPdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

// Φ(hi) − Φ(lo) without cancellation in the upper tail.
double NormalInterval(double lo, double hi) {
  if (!(hi > lo)) return 0.0;
  if (lo > 0.0) return NormalSf(lo) - NormalSf(hi);
  return NormalCdf(hi) - NormalCdf(lo);
}

// Standard normal quantile of a probability given as (lower, upper) tails,
// using whichever is more precise.
double LatentFromTails(double lower, double upper) {
  if (lower <= 0.0) return -kInfinity;
  if (upper <= 0.0) return kInfinity;
  return lower < 0.5 ? NormalQuantile(lower) : -NormalQuantile(upper);
}

double Latent(const NoiseDistribution& xi, double v) {
  return LatentFromTails(xi.Cdf(v), xi.Sf(v));
}

// Ξ(hi) − Ξ(lo) without cancellation in the upper tail.
double NoiseInterval(const NoiseDistribution& xi, double lo, double hi) {
  if (!(hi > lo)) return 0.0;
  if (lo >= xi.Location()) return xi.Sf(lo) - xi.Sf(hi);
  return xi.Cdf(hi) - xi.Cdf(lo);
}

absl::Status CheckCorrelation(double rho, const char* name) {
  if (!(std::abs(rho) < 1.0) || rho == 0.0) {
    return absl::InvalidArgumentError(
        absl::StrFormat("%s must lie in (-1, 1) and be non-zero", name));
  }
  return absl::OkStatus();
}

absl::StatusOr<double> LatentCorrelation(const GaussianCopulaSpec& spec,
                                         double rho) {
  absl::StatusOr<double> var = spec.LatentVariance();
  if (!var.ok()) return var.status();
  const double r2 = rho * rho;
  const double r = rho * std::sqrt(*var) / std::sqrt(r2 * *var + 1.0 - r2);
  if (!(std::abs(r) < 1.0)) {
    return absl::FailedPreconditionError(
        "degenerate variance: effective correlation reaches 1");
  }
  return r;
}

absl::Status CheckGrid(const GaussianCopulaSpec& spec, const World& world,
                       const AdditiveDiscretization& grid) {
  if (!spec.xi1.has_value() || !spec.xi2.has_value()) {
    return absl::InvalidArgumentError("copula spec needs both marginals");
  }
  if (static_cast<int>(grid.query1.size()) != world.num_datasets() ||
      static_cast<int>(grid.query2.size()) != world.num_datasets()) {
    return absl::InvalidArgumentError("queries need one value per dataset");
  }
  if (grid.bins < 2) return absl::InvalidArgumentError("need at least 2 bins");
  if (!(grid.span > 0.0)) return absl::InvalidArgumentError("span must be > 0");
  return absl::OkStatus();
}

std::vector<double> InteriorEdges(const std::vector<double>& query,
                                  const NoiseDistribution& xi, int bins,
                                  double span) {
  const auto [lo_it, hi_it] = std::minmax_element(query.begin(), query.end());
  const double lo = *lo_it - span * xi.Scale();
  const double hi = *hi_it + span * xi.Scale();
  const double width = (hi - lo) / bins;
  std::vector<double> edges(bins - 1);
  for (int k = 1; k < bins; ++k) edges[k - 1] = lo + k * width;
  return edges;
}

// Cell k covers (edge(k − 1), edge(k)] with edge(−1) = −∞, edge(bins−1) = +∞.
double Edge(const std::vector<double>& interior, int k) {
  if (k < 0) return -kInfinity;
  if (k >= static_cast<int>(interior.size())) return kInfinity;
  return interior[k];
}

double MixtureCdf(const NoiseDistribution& xi, const std::vector<double>& f,
                  const std::vector<double>& weights, double edge) {
  double total = 0.0;
  for (std::size_t x = 0; x < f.size(); ++x) {
    if (weights[x] != 0.0) total += weights[x] * xi.Cdf(edge - f[x]);
  }
  return total;
}

double MixtureSf(const NoiseDistribution& xi, const std::vector<double>& f,
                 const std::vector<double>& weights, double edge) {
  double total = 0.0;
  for (std::size_t x = 0; x < f.size(); ++x) {
    if (weights[x] != 0.0) total += weights[x] * xi.Sf(edge - f[x]);
  }
  return total;
}

double MixtureInterval(const NoiseDistribution& xi,
                       const std::vector<double>& f,
                       const std::vector<double>& weights, double lo,
                       double hi) {
  double total = 0.0;
  for (std::size_t x = 0; x < f.size(); ++x) {
    if (weights[x] != 0.0) {
      total += weights[x] * NoiseInterval(xi, lo - f[x], hi - f[x]);
    }
  }
  return total;
}

std::vector<double> ConditionalWeights(const World& world, int s) {
  std::vector<double> w(world.num_datasets(), 0.0);
  const double mass = world.secret_marginals[s];
  if (!(mass > 0.0)) return w;
  for (int x = 0; x < world.num_datasets(); ++x) w[x] = world.joint(s, x) / mass;
  return w;
}

// Latent bounds of every cell on one axis for the noise shifted by `shift`.
std::vector<double> ShiftedLatentEdges(const NoiseDistribution& xi,
                                       const std::vector<double>& interior,
                                       double shift) {
  std::vector<double> out(interior.size() + 2);
  out.front() = -kInfinity;
  out.back() = kInfinity;
  for (std::size_t k = 0; k < interior.size(); ++k) {
    out[k + 1] = Latent(xi, interior[k] - shift);
  }
  return out;
}

double CopulaDensity(double z1, double z2, double r) {
  const double s2 = 1.0 - r * r;
  const double q = (r * r * (z1 * z1 + z2 * z2) - 2.0 * r * z1 * z2) / s2;
  return std::exp(-0.5 * q) / std::sqrt(s2);
}

}  // namespace

double NormalCdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double NormalSf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

double NormalQuantile(double u) {
  if (!(u > 0.0)) return -kInfinity;
  if (!(u < 1.0)) return kInfinity;
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * u);
}

double BivariateNormalRectangle(double a1, double b1, double a2, double b2,
                                double rho) {
  if (!(b1 > a1) || !(b2 > a2)) return 0.0;
  if (rho == 0.0) return NormalInterval(a1, b1) * NormalInterval(a2, b2);
  const double s = std::sqrt(1.0 - rho * rho);
  // Integrate over the first latent; the second given t is N(ρt, 1 − ρ²).
  double lo = std::max(a1, -kLatentClip);
  double hi = std::min(b1, kLatentClip);
  const double t_a = (a2 - kConditionalClip * s) / rho;
  const double t_b = (b2 + kConditionalClip * s) / rho;
  lo = std::max(lo, std::min(t_a, t_b));
  hi = std::min(hi, std::max(t_a, t_b));
  if (!(hi > lo)) return 0.0;
  const auto integrand = [&](double t) {
    return NormalPdf(t) *
           NormalInterval((a2 - rho * t) / s, (b2 - rho * t) / s);
  };
  double error = 0.0;
  const double value =
      boost::math::quadrature::gauss_kronrod<double, 21>::integrate(
          integrand, lo, hi, /*max_depth=*/10, /*tolerance=*/1e-10, &error);
  return std::max(value, 0.0);
}

absl::StatusOr<double> BivariateNormalCdf(double a, double b, double rho) {
  if (!(std::abs(rho) < 1.0)) {
    return absl::InvalidArgumentError("|rho| must be below 1");
  }
  if (a == -kInfinity || b == -kInfinity) return 0.0;
  if (a == kInfinity) return NormalCdf(b);
  if (b == kInfinity) return NormalCdf(a);
  return BivariateNormalRectangle(-kInfinity, a, -kInfinity, b, rho);
}

absl::StatusOr<NoiseDistribution> NoiseDistribution::Laplace(double scale,
                                                             double location) {
  if (!(scale > 0.0) || !std::isfinite(scale) || !std::isfinite(location)) {
    return absl::InvalidArgumentError("Laplace scale must be positive");
  }
  NoiseDistribution d;
  d.kind_ = Kind::kLaplace;
  d.scale_ = scale;
  d.location_ = location;
  return d;
}

absl::StatusOr<NoiseDistribution> NoiseDistribution::Gaussian(double sigma,
                                                              double mean) {
  if (!(sigma > 0.0) || !std::isfinite(sigma) || !std::isfinite(mean)) {
    return absl::InvalidArgumentError("Gaussian sigma must be positive");
  }
  NoiseDistribution d;
  d.kind_ = Kind::kGaussian;
  d.scale_ = sigma;
  d.location_ = mean;
  return d;
}

absl::StatusOr<NoiseDistribution> NoiseDistribution::Empirical(
    std::vector<double> knots, std::vector<double> cdf) {
  if (knots.size() < 2 || knots.size() != cdf.size()) {
    return absl::InvalidArgumentError(
        "empirical CDF needs matching knots and values, at least two");
  }
  if (cdf.front() != 0.0 || cdf.back() != 1.0) {
    return absl::InvalidArgumentError(
        "empirical CDF must start at 0 and end at 1");
  }
  for (std::size_t k = 1; k < knots.size(); ++k) {
    if (!(knots[k] > knots[k - 1]) || !(cdf[k] > cdf[k - 1])) {
      return absl::InvalidArgumentError(
          "non-invertible marginal descriptor: knots and CDF values must "
          "increase strictly");
    }
  }
  NoiseDistribution d;
  d.kind_ = Kind::kEmpirical;
  d.knots_ = std::move(knots);
  d.cdf_ = std::move(cdf);
  d.scale_ = (d.knots_.back() - d.knots_.front()) / 8.0;
  d.location_ = d.Quantile(0.5);
  return d;
}

double NoiseDistribution::Cdf(double v) const {
  switch (kind_) {
    case Kind::kLaplace: {
      const double z = (v - location_) / scale_;
      return z < 0.0 ? 0.5 * std::exp(z) : 1.0 - 0.5 * std::exp(-z);
    }
    case Kind::kGaussian:
      return NormalCdf((v - location_) / scale_);
    case Kind::kEmpirical: {
      if (v <= knots_.front()) return 0.0;
      if (v >= knots_.back()) return 1.0;
      const auto it = std::upper_bound(knots_.begin(), knots_.end(), v);
      const std::size_t k = it - knots_.begin();
      const double t = (v - knots_[k - 1]) / (knots_[k] - knots_[k - 1]);
      return cdf_[k - 1] + t * (cdf_[k] - cdf_[k - 1]);
    }
  }
  return 0.0;
}

double NoiseDistribution::Sf(double v) const {
  switch (kind_) {
    case Kind::kLaplace: {
      const double z = (v - location_) / scale_;
      return z > 0.0 ? 0.5 * std::exp(-z) : 1.0 - 0.5 * std::exp(z);
    }
    case Kind::kGaussian:
      return NormalSf((v - location_) / scale_);
    case Kind::kEmpirical:
      return 1.0 - Cdf(v);
  }
  return 0.0;
}

double NoiseDistribution::Quantile(double u) const {
  if (!(u > 0.0)) return kind_ == Kind::kEmpirical ? knots_.front() : -kInfinity;
  if (!(u < 1.0)) return kind_ == Kind::kEmpirical ? knots_.back() : kInfinity;
  if (kind_ == Kind::kEmpirical) {
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    const std::size_t k = it - cdf_.begin();
    const double t = (u - cdf_[k - 1]) / (cdf_[k] - cdf_[k - 1]);
    return knots_[k - 1] + t * (knots_[k] - knots_[k - 1]);
  }
  // Bisection; the upper half compares survival values to keep precision.
  const bool upper = u > 0.5;
  const double target = upper ? 1.0 - u : u;
  const auto below = [&](double v) {
    return upper ? Sf(v) > target : Cdf(v) < target;
  };
  double lo = location_ - scale_;
  double hi = location_ + scale_;
  while (!below(lo)) lo = location_ - 2.0 * (location_ - lo);
  while (below(hi)) hi = location_ + 2.0 * (hi - location_);
  while (hi - lo > kQuantileTolerance * std::max({1.0, std::abs(lo),
                                                  std::abs(hi)})) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (below(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double NoiseDistribution::Scale() const { return scale_; }

double NoiseDistribution::Location() const { return location_; }

nlohmann::json NoiseDistribution::ToJson() const {
  switch (kind_) {
    case Kind::kLaplace:
      return {{"family", "laplace"}, {"scale", scale_}, {"location", location_}};
    case Kind::kGaussian:
      return {{"family", "gaussian"}, {"sigma", scale_}, {"mean", location_}};
    case Kind::kEmpirical:
      return {{"family", "empirical"}, {"knots", knots_}, {"cdf", cdf_}};
  }
  return {};
}

absl::StatusOr<NoiseDistribution> ParseNoise(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("family")) {
    return absl::InvalidArgumentError("marginal descriptor needs 'family'");
  }
  const std::string family = doc["family"].get<std::string>();
  if (family == "laplace") {
    return NoiseDistribution::Laplace(doc.value("scale", 1.0),
                                      doc.value("location", 0.0));
  }
  if (family == "gaussian") {
    return NoiseDistribution::Gaussian(doc.value("sigma", 1.0),
                                       doc.value("mean", 0.0));
  }
  if (family == "empirical") {
    if (!doc.contains("knots") || !doc.contains("cdf")) {
      return absl::InvalidArgumentError("empirical needs 'knots' and 'cdf'");
    }
    return NoiseDistribution::Empirical(doc["knots"].get<std::vector<double>>(),
                                        doc["cdf"].get<std::vector<double>>());
  }
  return absl::InvalidArgumentError(
      absl::StrCat("unknown marginal family '", family, "'"));
}

absl::StatusOr<double> GaussianCopulaSpec::LatentVariance() const {
  if (c_sen == 0.0) {
    if (variance_floor.has_value() && *variance_floor > 0.0) {
      return *variance_floor;
    }
    return absl::FailedPreconditionError(
        "degenerate variance: c_sen is zero and no variance floor was given");
  }
  if (!(eps_c > 0.0)) {
    return absl::FailedPreconditionError(
        "degenerate variance: eps_c must be positive");
  }
  const double ratio = c_sen / eps_c;
  const double var = w * w * ratio * ratio;
  if (!std::isfinite(var) || var < 1e-12) {
    return absl::FailedPreconditionError(absl::StrFormat(
        "degenerate variance: var1 = %g", var));
  }
  return var;
}

absl::StatusOr<double> GaussianCopulaSpec::EffectiveCorrelation() const {
  return LatentCorrelation(*this, rho);
}

absl::StatusOr<double> GaussianCopulaSpec::AnalysisCorrelation() const {
  return LatentCorrelation(*this, rho_prime.value_or(rho));
}

double EtaSensitivity(const std::vector<double>& eta, const World& world) {
  double sup = 0.0;
  for (const SecretPair& p : world.adjacency) {
    sup = std::max(sup, std::abs(eta[p.first] - eta[p.second]));
  }
  return sup;
}

absl::Status ValidateCopulaSpec(const GaussianCopulaSpec& spec,
                                const World& world) {
  if (absl::Status s = CheckCorrelation(spec.rho, "rho"); !s.ok()) return s;
  if (spec.rho_prime.has_value()) {
    if (absl::Status s = CheckCorrelation(*spec.rho_prime, "rho_prime");
        !s.ok()) {
      return s;
    }
  }
  if (static_cast<int>(spec.eta.size()) != world.num_secrets()) {
    return absl::InvalidArgumentError("eta needs one value per secret");
  }
  if (!(spec.c_sen >= 0.0) || !(spec.eps_c >= 0.0)) {
    return absl::InvalidArgumentError("c_sen and eps_c must be non-negative");
  }
  if (!(spec.delta_c > 0.0) || !(spec.delta_c < 1.0)) {
    return absl::InvalidArgumentError("delta_c must lie in (0, 1)");
  }
  const double w_min = 2.0 * std::log(2.0 / spec.delta_c);
  if (spec.w < w_min * (1.0 - kProbabilityTolerance)) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "w = %g is below 2 log(2/delta_c) = %g", spec.w, w_min));
  }
  const double sup = EtaSensitivity(spec.eta, world);
  if (std::abs(sup - spec.c_sen) > kProbabilityTolerance) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "c_sen = %.17g but eta varies by %.17g over adjacent secrets",
        spec.c_sen, sup));
  }
  if (!spec.xi1.has_value() || !spec.xi2.has_value()) {
    return absl::InvalidArgumentError("copula spec needs xi1 and xi2");
  }
  return absl::OkStatus();
}

absl::StatusOr<GaussianCopulaSpec> ParseCopulaSpec(const nlohmann::json& doc,
                                                   const World& world) {
  if (!doc.is_object()) {
    return absl::InvalidArgumentError("copula spec must be an object");
  }
  GaussianCopulaSpec spec;
  spec.rho = doc.value("rho", 0.0);
  if (doc.contains("rho_prime")) spec.rho_prime = doc["rho_prime"].get<double>();
  spec.eps_c = doc.value("eps_c", 1.0);
  spec.delta_c = doc.value("delta_c", 0.02);
  spec.w = doc.value("w", 2.0 * std::log(2.0 / spec.delta_c));
  spec.eta.assign(world.num_secrets(), 0.0);
  if (doc.contains("eta")) {
    for (const auto& [label, value] : doc["eta"].items()) {
      auto it = std::find(world.secrets.begin(), world.secrets.end(), label);
      if (it == world.secrets.end()) {
        return absl::InvalidArgumentError(
            absl::StrCat("eta names unknown secret '", label, "'"));
      }
      spec.eta[it - world.secrets.begin()] = value.get<double>();
    }
  }
  spec.c_sen = doc.contains("c_sen") ? doc["c_sen"].get<double>()
                                     : EtaSensitivity(spec.eta, world);
  if (doc.contains("variance_floor")) {
    spec.variance_floor = doc["variance_floor"].get<double>();
  }
  for (const char* key : {"xi1", "xi2"}) {
    if (!doc.contains(key)) {
      return absl::InvalidArgumentError(absl::StrCat("copula spec needs ", key));
    }
    absl::StatusOr<NoiseDistribution> xi = ParseNoise(doc[key]);
    if (!xi.ok()) return xi.status();
    (std::string(key) == "xi1" ? spec.xi1 : spec.xi2) = *std::move(xi);
  }
  if (absl::Status s = ValidateCopulaSpec(spec, world); !s.ok()) return s;
  return spec;
}

absl::StatusOr<NoiseSamplePair> PsedrMap(const GaussianCopulaSpec& spec,
                                         int secret, double z1, double z2) {
  if (!spec.xi1.has_value() || !spec.xi2.has_value()) {
    return absl::InvalidArgumentError("copula spec needs xi1 and xi2");
  }
  if (secret < 0 || secret >= static_cast<int>(spec.eta.size())) {
    return absl::OutOfRangeError("secret has no eta value");
  }
  absl::StatusOr<double> var = spec.LatentVariance();
  if (!var.ok()) return var.status();
  const double eta = spec.eta[secret];
  const double rho = spec.rho;
  const double sigma1 = std::sqrt(*var);
  const double sigma_rho = std::sqrt(rho * rho * *var + 1.0 - rho * rho);
  NoiseSamplePair out;
  out.z1 = z1;
  out.z2 = z2;
  const double a = (z1 - eta) / sigma1;
  const double b =
      (rho * z1 + std::sqrt(1.0 - rho * rho) * z2 - rho * eta) / sigma_rho;
  out.u1 = NormalCdf(a);
  out.u2 = NormalCdf(b);
  // Invert through the more precise tail.
  out.v1 = a > 0.0 ? spec.xi1->Quantile(1.0 - NormalSf(a))
                   : spec.xi1->Quantile(out.u1);
  out.v2 = b > 0.0 ? spec.xi2->Quantile(1.0 - NormalSf(b))
                   : spec.xi2->Quantile(out.u2);
  return out;
}

absl::StatusOr<NoiseSamplePair> PsedrSample(const GaussianCopulaSpec& spec,
                                            int secret, std::mt19937_64& rng) {
  absl::StatusOr<double> var = spec.LatentVariance();
  if (!var.ok()) return var.status();
  if (secret < 0 || secret >= static_cast<int>(spec.eta.size())) {
    return absl::OutOfRangeError("secret has no eta value");
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  const double z1 = spec.eta[secret] + std::sqrt(*var) * normal(rng);
  const double z2 = normal(rng);
  return PsedrMap(spec, secret, z1, z2);
}

absl::StatusOr<double> CopulaCdf(const GaussianCopulaSpec& spec, double v1,
                                 double v2) {
  if (!spec.xi1.has_value() || !spec.xi2.has_value()) {
    return absl::InvalidArgumentError("copula spec needs xi1 and xi2");
  }
  absl::StatusOr<double> r = spec.AnalysisCorrelation();
  if (!r.ok()) return r.status();
  return BivariateNormalCdf(Latent(*spec.xi1, v1), Latent(*spec.xi2, v2), *r);
}

absl::StatusOr<std::vector<std::vector<std::pair<double, double>>>>
PerturbPair(const World& world, const std::vector<double>& query1,
            const std::vector<double>& query2, const GaussianCopulaSpec& spec,
            std::mt19937_64& rng, int n) {
  if (n <= 0) return absl::InvalidArgumentError("sample count must be > 0");
  if (static_cast<int>(query1.size()) != world.num_datasets() ||
      static_cast<int>(query2.size()) != world.num_datasets()) {
    return absl::InvalidArgumentError("queries need one value per dataset");
  }
  std::vector<std::vector<std::pair<double, double>>> clouds(
      world.num_datasets());
  for (int x = 0; x < world.num_datasets(); ++x) {
    std::vector<double> secret_weights(world.num_secrets());
    double total = 0.0;
    for (int s = 0; s < world.num_secrets(); ++s) {
      secret_weights[s] = world.joint(s, x);
      total += secret_weights[s];
    }
    if (!(total > 0.0)) continue;
    std::discrete_distribution<int> secret(secret_weights.begin(),
                                           secret_weights.end());
    clouds[x].reserve(n);
    for (int i = 0; i < n; ++i) {
      absl::StatusOr<NoiseSamplePair> v = PsedrSample(spec, secret(rng), rng);
      if (!v.ok()) return v.status();
      clouds[x].push_back({query1[x] + v->v1, query2[x] + v->v2});
    }
  }
  return clouds;
}

absl::StatusOr<PerturbedPair> ComputePerturbedPair(
    const GaussianCopulaSpec& spec, const World& world,
    const AdditiveDiscretization& grid) {
  if (absl::Status s = CheckGrid(spec, world, grid); !s.ok()) return s;
  absl::StatusOr<double> r = spec.EffectiveCorrelation();
  if (!r.ok()) return r.status();
  const NoiseDistribution& xi1 = *spec.xi1;
  const NoiseDistribution& xi2 = *spec.xi2;
  const int bins = grid.bins;
  PerturbedPair out;
  out.bins = bins;
  out.edges1 = InteriorEdges(grid.query1, xi1, bins, grid.span);
  out.edges2 = InteriorEdges(grid.query2, xi2, bins, grid.span);
  out.joint = Matrix(world.num_secrets(), static_cast<std::size_t>(bins) * bins);
  out.marginal1 = Matrix(world.num_secrets(), bins);
  out.marginal2 = Matrix(world.num_secrets(), bins);

  std::vector<std::vector<double>> weights;
  for (int s = 0; s < world.num_secrets(); ++s) {
    weights.push_back(ConditionalWeights(world, s));
  }
  for (int s = 0; s < world.num_secrets(); ++s) {
    for (int k = 0; k < bins; ++k) {
      out.marginal1(s, k) =
          MixtureInterval(xi1, grid.query1, weights[s], Edge(out.edges1, k - 1),
                          Edge(out.edges1, k));
      out.marginal2(s, k) =
          MixtureInterval(xi2, grid.query2, weights[s], Edge(out.edges2, k - 1),
                          Edge(out.edges2, k));
    }
  }
  std::vector<double> cell(static_cast<std::size_t>(bins) * bins);
  for (int x = 0; x < world.num_datasets(); ++x) {
    bool used = false;
    for (int s = 0; s < world.num_secrets(); ++s) used |= weights[s][x] > 0.0;
    if (!used) continue;
    const std::vector<double> l1 =
        ShiftedLatentEdges(xi1, out.edges1, grid.query1[x]);
    const std::vector<double> l2 =
        ShiftedLatentEdges(xi2, out.edges2, grid.query2[x]);
    for (int i = 0; i < bins; ++i) {
      for (int j = 0; j < bins; ++j) {
        cell[static_cast<std::size_t>(i) * bins + j] =
            BivariateNormalRectangle(l1[i], l1[i + 1], l2[j], l2[j + 1], *r);
      }
    }
    for (int s = 0; s < world.num_secrets(); ++s) {
      const double w = weights[s][x];
      if (w == 0.0) continue;
      for (std::size_t c = 0; c < cell.size(); ++c) out.joint(s, c) += w * cell[c];
    }
  }
  return out;
}

absl::StatusOr<MechanismKernel> BinnedMarginalMechanism(
    const GaussianCopulaSpec& spec, const World& world,
    const AdditiveDiscretization& grid, int axis) {
  if (absl::Status s = CheckGrid(spec, world, grid); !s.ok()) return s;
  if (axis != 1 && axis != 2) return absl::InvalidArgumentError("axis is 1 or 2");
  const NoiseDistribution& xi = axis == 1 ? *spec.xi1 : *spec.xi2;
  const std::vector<double>& f = axis == 1 ? grid.query1 : grid.query2;
  const std::vector<double> edges = InteriorEdges(f, xi, grid.bins, grid.span);
  MechanismKernel mech;
  mech.name = absl::StrCat("additive_", axis);
  mech.kernel = Matrix(world.num_datasets(), grid.bins);
  for (int x = 0; x < world.num_datasets(); ++x) {
    for (int k = 0; k < grid.bins; ++k) {
      mech.kernel(x, k) =
          NoiseInterval(xi, Edge(edges, k - 1) - f[x], Edge(edges, k) - f[x]);
    }
  }
  return mech;
}

absl::StatusOr<CopulaLoss> CopulaLossGrid(const GaussianCopulaSpec& spec,
                                          const World& world,
                                          const AdditiveDiscretization& grid,
                                          SecretPair pair) {
  if (absl::Status s = CheckGrid(spec, world, grid); !s.ok()) return s;
  absl::StatusOr<double> r = spec.AnalysisCorrelation();
  if (!r.ok()) return r.status();
  absl::StatusOr<PerturbedPair> perturbed =
      ComputePerturbedPair(spec, world, grid);
  if (!perturbed.ok()) return perturbed.status();
  const int bins = grid.bins;
  const NoiseDistribution& xi1 = *spec.xi1;
  const NoiseDistribution& xi2 = *spec.xi2;

  CopulaLoss out;
  out.reference = perturbed->joint.RowVector(pair.first);
  out.alternative = perturbed->joint.RowVector(pair.second);
  out.cell_loss.assign(out.reference.size(), std::nan(""));

  // κ_s(cell) = C(cell of Ψ_1(·|s) × Ψ_2(·|s)) / (ΔΨ_1 ΔΨ_2).
  std::vector<std::vector<double>> log_kappa;
  for (int s : {pair.first, pair.second}) {
    const std::vector<double> weights = ConditionalWeights(world, s);
    std::vector<double> l1(bins + 1), l2(bins + 1);
    for (int k = 0; k <= bins; ++k) {
      const double e1 = Edge(perturbed->edges1, k - 1);
      const double e2 = Edge(perturbed->edges2, k - 1);
      l1[k] = LatentFromTails(MixtureCdf(xi1, grid.query1, weights, e1),
                              MixtureSf(xi1, grid.query1, weights, e1));
      l2[k] = LatentFromTails(MixtureCdf(xi2, grid.query2, weights, e2),
                              MixtureSf(xi2, grid.query2, weights, e2));
    }
    double rect_mass = 0.0;
    double density_mass = 0.0;
    std::vector<double> lk(static_cast<std::size_t>(bins) * bins, std::nan(""));
    for (int i = 0; i < bins; ++i) {
      const double m1 = perturbed->marginal1(s, i);
      for (int j = 0; j < bins; ++j) {
        const double m2 = perturbed->marginal2(s, j);
        const double rect =
            BivariateNormalRectangle(l1[i], l1[i + 1], l2[j], l2[j + 1], *r);
        if (rect > 0.0 && m1 > 0.0 && m2 > 0.0) {
          lk[static_cast<std::size_t>(i) * bins + j] = std::log(rect / (m1 * m2));
        }
        const bool interior = i > 0 && j > 0 && i < bins - 1 && j < bins - 1;
        if (interior && s == pair.first) {
          const double mid1 = NormalQuantile(
              MixtureCdf(xi1, grid.query1, weights,
                         0.5 * (perturbed->edges1[i - 1] + perturbed->edges1[i])));
          const double mid2 = NormalQuantile(
              MixtureCdf(xi2, grid.query2, weights,
                         0.5 * (perturbed->edges2[j - 1] + perturbed->edges2[j])));
          rect_mass += rect;
          density_mass += CopulaDensity(mid1, mid2, *r) * m1 * m2;
        }
      }
    }
    if (s == pair.first &&
        std::abs(rect_mass - density_mass) > kGridDensityTolerance) {
      return absl::FailedPreconditionError(absl::StrFormat(
          "grid too coarse: interior copula mass %.6g vs density estimate "
          "%.6g",
          rect_mass, density_mass));
    }
    log_kappa.push_back(std::move(lk));
  }
  for (std::size_t c = 0; c < out.cell_loss.size(); ++c) {
    out.cell_loss[c] = log_kappa[0][c] - log_kappa[1][c];
  }
  return out;
}

absl::StatusOr<Pld> CopulaPlrv(const GaussianCopulaSpec& spec,
                               const World& world,
                               const AdditiveDiscretization& grid,
                               SecretPair pair) {
  if (spec.c_sen == 0.0) return Pld::PointMass(0.0);
  absl::StatusOr<CopulaLoss> loss = CopulaLossGrid(spec, world, grid, pair);
  if (!loss.ok()) return loss.status();
  std::vector<Pld::Atom> atoms;
  double inf_mass = 0.0;
  for (std::size_t c = 0; c < loss->cell_loss.size(); ++c) {
    const double mass = loss->reference[c];
    if (mass <= 0.0) continue;
    if (std::isfinite(loss->cell_loss[c])) {
      atoms.push_back({loss->cell_loss[c], mass});
    } else if (loss->alternative[c] == 0.0) {
      inf_mass += mass;
    }
  }
  return Pld(std::move(atoms), inf_mass);
}

absl::StatusOr<AdditivityReport> CheckCopulaAdditivity(
    const GaussianCopulaSpec& spec, const World& world,
    const AdditiveDiscretization& grid, SecretPair pair) {
  absl::StatusOr<CopulaLoss> loss = CopulaLossGrid(spec, world, grid, pair);
  if (!loss.ok()) return loss.status();
  absl::StatusOr<PerturbedPair> perturbed =
      ComputePerturbedPair(spec, world, grid);
  if (!perturbed.ok()) return perturbed.status();
  const int bins = grid.bins;
  AdditivityReport report;
  for (int i = 0; i < bins; ++i) {
    const double l1 = std::log(perturbed->marginal1(pair.first, i) /
                               perturbed->marginal1(pair.second, i));
    for (int j = 0; j < bins; ++j) {
      const std::size_t c = static_cast<std::size_t>(i) * bins + j;
      const double l2 = std::log(perturbed->marginal2(pair.first, j) /
                                 perturbed->marginal2(pair.second, j));
      const double total = std::log(loss->reference[c] / loss->alternative[c]);
      const double residual = total - (l1 + l2) - loss->cell_loss[c];
      if (!std::isfinite(total) || !std::isfinite(l1) || !std::isfinite(l2) ||
          !std::isfinite(loss->cell_loss[c])) {
        continue;
      }
      report.max_residual = std::max(report.max_residual, std::abs(residual));
      ++report.cells_checked;
    }
  }
  return report;
}

absl::StatusOr<double> ConservativeBound(const GaussianCopulaSpec& spec,
                                         double eps1, double delta1,
                                         double eps2, double delta2,
                                         double delta_g) {
  return DpOptComp({{spec.eps_c, spec.delta_c}, {eps1, delta1}, {eps2, delta2}},
                   delta_g);
}

absl::StatusOr<DependenceGroup> GaussianCopulaCoupling(
    const std::vector<MechanismKernel>& mechs, int first, int second,
    double rho) {
  const int k = static_cast<int>(mechs.size());
  if (first < 0 || second < 0 || first >= k || second >= k || first == second) {
    return absl::InvalidArgumentError("coupling needs two distinct mechanisms");
  }
  if (!(std::abs(rho) < 1.0)) {
    return absl::InvalidArgumentError("|rho| must be below 1");
  }
  const Matrix& g1 = mechs[first].kernel;
  const Matrix& g2 = mechs[second].kernel;
  if (g1.rows() != g2.rows()) {
    return absl::InvalidArgumentError("kernels disagree on the datasets");
  }
  const std::size_t n1 = g1.cols();
  const std::size_t n2 = g2.cols();
  DependenceGroup group;
  group.members = {first, second};
  group.joint_kernel = Matrix(g1.rows(), n1 * n2);
  for (std::size_t x = 0; x < g1.rows(); ++x) {
    // C(i, j) = P(Y1 ≤ i, Y2 ≤ j); the last row and column are the marginal
    // CDFs themselves so that differencing returns the marginals exactly.
    std::vector<double> c1(n1), c2(n2);
    double run = 0.0;
    for (std::size_t i = 0; i < n1; ++i) c1[i] = run += g1(x, i);
    run = 0.0;
    for (std::size_t j = 0; j < n2; ++j) c2[j] = run += g2(x, j);
    Matrix cdf(n1, n2);
    for (std::size_t i = 0; i < n1; ++i) {
      for (std::size_t j = 0; j < n2; ++j) {
        if (i + 1 == n1) {
          cdf(i, j) = c2[j];
        } else if (j + 1 == n2) {
          cdf(i, j) = c1[i];
        } else {
          absl::StatusOr<double> v = BivariateNormalCdf(
              NormalQuantile(c1[i]), NormalQuantile(c2[j]), rho);
          if (!v.ok()) return v.status();
          cdf(i, j) = std::clamp(*v, 0.0, std::min(c1[i], c2[j]));
        }
      }
    }
    if (n1 > 0 && n2 > 0) cdf(n1 - 1, n2 - 1) = 1.0;
    for (std::size_t i = 0; i < n1; ++i) {
      for (std::size_t j = 0; j < n2; ++j) {
        double p = cdf(i, j);
        if (i > 0) p -= cdf(i - 1, j);
        if (j > 0) p -= cdf(i, j - 1);
        if (i > 0 && j > 0) p += cdf(i - 1, j - 1);
        group.joint_kernel(x, i * n2 + j) = std::max(p, 0.0);
      }
    }
  }
  for (std::size_t i = 0; i < n1; ++i) {
    for (std::size_t j = 0; j < n2; ++j) {
      const std::string a = i < mechs[first].outputs.size()
                                ? mechs[first].outputs[i]
                                : std::to_string(i);
      const std::string b = j < mechs[second].outputs.size()
                                ? mechs[second].outputs[j]
                                : std::to_string(j);
      group.joint_outputs.push_back(absl::StrCat(a, "|", b));
    }
  }
  return group;
}

}  // namespace dcp
