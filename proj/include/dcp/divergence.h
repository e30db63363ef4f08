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

// Exact (ε, δ)-indistinguishability between finite distributions.

#ifndef DCP_DIVERGENCE_H_
#define DCP_DIVERGENCE_H_

#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "dcp/common.h"
#include "dcp/model.h"

namespace dcp {

struct DistPair {
  std::vector<double> p;
  std::vector<double> q;
};

absl::Status ValidateDistPair(const DistPair& pair);
absl::StatusOr<DistPair> MakeDistPair(std::vector<double> p,
                                      std::vector<double> q);

// Σ_y max(p(y) − e^eps q(y), 0). `eps` may be +∞, in which case only the
// mass of p where q vanishes remains.
double HockeyStick(const DistPair& pair, double eps);

double TotalVariation(const DistPair& pair);

// Smallest ε ≥ 0 with HockeyStick(pair, ε) ≤ delta. Returns +∞ when no finite
// ε suffices, which happens exactly when the mass of p on {q = 0} exceeds
// delta.
absl::StatusOr<double> OptimalEpsilon(const DistPair& pair, double delta);

struct DcpCheck {
  bool holds = false;
  SecretPair worst_pair;
  double worst_delta = 0.0;
};

// Checks the rows of `channel` (one distribution per secret) against every
// adjacent pair.
absl::StatusOr<DcpCheck> CheckDcpChannel(const World& world,
                                         const Matrix& channel, double eps,
                                         double delta);

absl::StatusOr<DcpCheck> CheckDcp(const World& world,
                                  const MechanismKernel& mech, double eps,
                                  double delta);

DistPair ChannelPair(const Matrix& channel, SecretPair pair);

// Neyman–Pearson trade-off curve: vertices (α, β) of the smallest type-II
// error β achievable at type-I error α when testing p against q.
class TradeoffCurve {
 public:
  struct Vertex {
    double alpha;
    double beta;
  };

  explicit TradeoffCurve(std::vector<Vertex> vertices)
      : vertices_(std::move(vertices)) {}

  const std::vector<Vertex>& vertices() const { return vertices_; }

  // Piecewise-linear interpolation; alpha is clamped to [0, 1].
  double Evaluate(double alpha) const;

 private:
  std::vector<Vertex> vertices_;
};

TradeoffCurve ComputeTradeoffCurve(const DistPair& pair);

// Outcome with its masses under p and q and log(p/q), ordered by decreasing
// log-ratio. Outcomes with q = 0 come first with ratio +∞; those with p = 0
// come last with ratio −∞. Ties within kLossMergeTolerance are merged.
struct RatioBlock {
  double log_ratio;
  double p;
  double q;
};

std::vector<RatioBlock> SortedRatioBlocks(const DistPair& pair);

}  // namespace dcp

#endif  // DCP_DIVERGENCE_H_
