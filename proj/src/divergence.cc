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

#include "dcp/divergence.h"

#include <algorithm>
#include <cmath>

#include "absl/strings/str_format.h"

namespace dcp {
namespace {

absl::Status CheckDistribution(const std::vector<double>& v, const char* name) {
  double total = 0.0;
  for (double x : v) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      return absl::InvalidArgumentError(
          absl::StrFormat("%s has a negative or non-finite entry", name));
    }
    total += x;
  }
  if (std::abs(total - 1.0) > kProbabilityTolerance) {
    return absl::InvalidArgumentError(
        absl::StrFormat("%s sums to %.17g, expected 1", name, total));
  }
  return absl::OkStatus();
}

}  // namespace

absl::Status ValidateDistPair(const DistPair& pair) {
  if (pair.p.size() != pair.q.size()) {
    return absl::InvalidArgumentError("p and q have different lengths");
  }
  if (absl::Status s = CheckDistribution(pair.p, "p"); !s.ok()) return s;
  return CheckDistribution(pair.q, "q");
}

absl::StatusOr<DistPair> MakeDistPair(std::vector<double> p,
                                      std::vector<double> q) {
  DistPair pair{std::move(p), std::move(q)};
  if (absl::Status s = ValidateDistPair(pair); !s.ok()) return s;
  return pair;
}

double HockeyStick(const DistPair& pair, double eps) {
  double delta = 0.0;
  if (eps == kInfinity) {
    for (std::size_t i = 0; i < pair.p.size(); ++i) {
      if (pair.q[i] == 0.0) delta += pair.p[i];
    }
    return delta;
  }
  const double scale = std::exp(eps);
  for (std::size_t i = 0; i < pair.p.size(); ++i) {
    delta += std::max(pair.p[i] - scale * pair.q[i], 0.0);
  }
  return delta;
}

double TotalVariation(const DistPair& pair) {
  double tv = 0.0;
  for (std::size_t i = 0; i < pair.p.size(); ++i) {
    tv += std::max(pair.p[i] - pair.q[i], 0.0);
  }
  return tv;
}

std::vector<RatioBlock> SortedRatioBlocks(const DistPair& pair) {
  std::vector<RatioBlock> raw;
  for (std::size_t i = 0; i < pair.p.size(); ++i) {
    const double p = pair.p[i];
    const double q = pair.q[i];
    if (p == 0.0 && q == 0.0) continue;
    double ratio;
    if (q == 0.0) {
      ratio = kInfinity;
    } else if (p == 0.0) {
      ratio = -kInfinity;
    } else {
      ratio = std::log(p / q);
    }
    raw.push_back({ratio, p, q});
  }
  std::sort(raw.begin(), raw.end(),
            [](const RatioBlock& a, const RatioBlock& b) {
              return a.log_ratio > b.log_ratio;
            });
  std::vector<RatioBlock> merged;
  double anchor = 0.0;
  for (const RatioBlock& b : raw) {
    const bool same =
        !merged.empty() &&
        (b.log_ratio == anchor ||
         (std::isfinite(anchor) && std::isfinite(b.log_ratio) &&
          anchor - b.log_ratio <= kLossMergeTolerance));
    if (same) {
      merged.back().p += b.p;
      merged.back().q += b.q;
    } else {
      merged.push_back(b);
      anchor = b.log_ratio;
    }
  }
  // A merged finite block takes the ratio of its pooled masses.
  for (RatioBlock& b : merged) {
    if (std::isfinite(b.log_ratio)) b.log_ratio = std::log(b.p / b.q);
  }
  return merged;
}

absl::StatusOr<double> OptimalEpsilon(const DistPair& pair, double delta) {
  if (!(delta >= 0.0) || delta > 1.0) {
    return absl::InvalidArgumentError(
        absl::StrFormat("delta must lie in [0, 1], got %g", delta));
  }
  const std::vector<RatioBlock> blocks = SortedRatioBlocks(pair);
  double a = 0.0;  // p-mass of blocks above the current segment
  double b = 0.0;  // q-mass of the same blocks
  std::size_t i = 0;
  if (i < blocks.size() && blocks[i].log_ratio == kInfinity) {
    a = blocks[i].p;
    ++i;
  }
  if (a > delta) return kInfinity;
  if (TotalVariation(pair) <= delta) return 0.0;
  // Walk the finite breakpoints downward. On the segment just below block
  // i, δ(ε) = a − e^ε b with a and b including block i.
  for (; i < blocks.size() && std::isfinite(blocks[i].log_ratio); ++i) {
    const double upper = blocks[i].log_ratio;
    a += blocks[i].p;
    b += blocks[i].q;
    if (upper <= 0.0) break;
    double lower = 0.0;
    if (i + 1 < blocks.size() && std::isfinite(blocks[i + 1].log_ratio)) {
      lower = std::max(blocks[i + 1].log_ratio, 0.0);
    }
    if (a - std::exp(lower) * b > delta) {
      const double eps = std::log((a - delta) / b);
      return std::clamp(eps, lower, upper);
    }
  }
  return 0.0;
}

DistPair ChannelPair(const Matrix& channel, SecretPair pair) {
  return {channel.RowVector(pair.first), channel.RowVector(pair.second)};
}

absl::StatusOr<DcpCheck> CheckDcpChannel(const World& world,
                                         const Matrix& channel, double eps,
                                         double delta) {
  if (world.adjacency.empty()) {
    return absl::FailedPreconditionError(
        "nothing to certify: the adjacency relation is empty");
  }
  if (static_cast<int>(channel.rows()) != world.num_secrets()) {
    return absl::InvalidArgumentError("channel needs one row per secret");
  }
  DcpCheck report;
  report.worst_delta = -1.0;
  for (const SecretPair& p : world.adjacency) {
    const double d = HockeyStick(ChannelPair(channel, p), eps);
    if (d > report.worst_delta) {
      report.worst_delta = d;
      report.worst_pair = p;
    }
  }
  report.holds = report.worst_delta <= delta;
  return report;
}

absl::StatusOr<DcpCheck> CheckDcp(const World& world,
                                  const MechanismKernel& mech, double eps,
                                  double delta) {
  absl::StatusOr<EffectiveKernel> psi = ComputeEffectiveKernel(world, mech);
  if (!psi.ok()) return psi.status();
  return CheckDcpChannel(world, psi->psi, eps, delta);
}

double TradeoffCurve::Evaluate(double alpha) const {
  alpha = std::clamp(alpha, 0.0, 1.0);
  if (alpha <= vertices_.front().alpha) return vertices_.front().beta;
  for (std::size_t i = 1; i < vertices_.size(); ++i) {
    const Vertex& lo = vertices_[i - 1];
    const Vertex& hi = vertices_[i];
    if (alpha <= hi.alpha) {
      const double t = (alpha - lo.alpha) / (hi.alpha - lo.alpha);
      return lo.beta + t * (hi.beta - lo.beta);
    }
  }
  return vertices_.back().beta;
}

TradeoffCurve ComputeTradeoffCurve(const DistPair& pair) {
  // Reject p in favour of q where q/p is largest, i.e. walk the ratio blocks
  // from the bottom (small p/q) up.
  std::vector<RatioBlock> blocks = SortedRatioBlocks(pair);
  std::reverse(blocks.begin(), blocks.end());
  std::vector<TradeoffCurve::Vertex> vertices;
  double alpha = 0.0;
  double beta = 1.0;
  vertices.push_back({alpha, beta});
  for (const RatioBlock& b : blocks) {
    alpha += b.p;
    beta -= b.q;
    alpha = std::min(alpha, 1.0);
    beta = std::max(beta, 0.0);
    if (vertices.back().alpha == alpha) {
      vertices.back().beta = beta;
    } else {
      vertices.push_back({alpha, beta});
    }
  }
  vertices.back().alpha = 1.0;
  vertices.back().beta = 0.0;
  return TradeoffCurve(std::move(vertices));
}

}  // namespace dcp
