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


#include "testing/random_instances.h"

#include <algorithm>
#include <numeric>
#include <optional>

namespace dcp::testing {

std::vector<double> RandomSimplex(int n, std::mt19937_64& rng) {
  std::exponential_distribution<double> exp(1.0);
  std::vector<double> v(n);
  for (double& x : v) x = exp(rng);
  const double sum = std::accumulate(v.begin(), v.end(), 0.0);
  for (double& x : v) x /= sum;
  return v;
}

namespace {

std::vector<double> SparseSimplex(int n, std::mt19937_64& rng) {
  std::bernoulli_distribution drop(0.25);
  std::uniform_int_distribution<int> keep(0, n - 1);
  std::vector<double> v = RandomSimplex(n, rng);
  const int kept = keep(rng);
  for (int i = 0; i < n; ++i) {
    if (i != kept && drop(rng)) v[i] = 0.0;
  }
  const double sum = std::accumulate(v.begin(), v.end(), 0.0);
  for (double& x : v) x /= sum;
  return v;
}

World Build(const Matrix& joint) {
  std::vector<std::string> secrets;
  std::vector<std::string> datasets;
  for (std::size_t s = 0; s < joint.rows(); ++s) {
    secrets.push_back("s" + std::to_string(s));
  }
  for (std::size_t x = 0; x < joint.cols(); ++x) {
    datasets.push_back("x" + std::to_string(x));
  }
  return *MakeWorld(secrets, datasets, joint);
}

}  // namespace

DistPair RandomDistPair(int n, std::mt19937_64& rng, bool allow_zeros) {
  DistPair pair;
  pair.p = allow_zeros ? SparseSimplex(n, rng) : RandomSimplex(n, rng);
  pair.q = allow_zeros ? SparseSimplex(n, rng) : RandomSimplex(n, rng);
  return pair;
}

World RandomWorld(int num_secrets, int num_datasets, std::mt19937_64& rng) {
  const std::vector<double> flat =
      RandomSimplex(num_secrets * num_datasets, rng);
  Matrix joint(num_secrets, num_datasets);
  for (int s = 0; s < num_secrets; ++s) {
    for (int x = 0; x < num_datasets; ++x) {
      joint(s, x) = flat[s * num_datasets + x];
    }
  }
  return Build(joint);
}

World RandomMixingWorld(int num_secrets, int num_datasets,
                        std::mt19937_64& rng) {
  while (true) {
    World w = RandomWorld(num_secrets, num_datasets, rng);
    if (!IsInvertible(w).invertible) return w;
  }
}

World RandomInvertibleWorld(int num_secrets, int num_datasets,
                            std::mt19937_64& rng) {
  std::vector<int> order(num_datasets);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const std::vector<double> prior = RandomSimplex(num_secrets, rng);
  Matrix joint(num_secrets, num_datasets);
  for (int s = 0; s < num_secrets; ++s) joint(s, order[s]) = prior[s];
  return Build(joint);
}

MechanismKernel RandomRrMechanism(int num_datasets, int num_outputs,
                                  std::mt19937_64& rng,
                                  const std::string& name) {
  std::uniform_real_distribution<double> keep_dist(0.55, 0.95);
  const double keep = keep_dist(rng);
  MechanismKernel m;
  m.name = name;
  m.kernel = Matrix(num_datasets, num_outputs);
  const double other = num_outputs > 1 ? (1.0 - keep) / (num_outputs - 1) : 0;
  for (int x = 0; x < num_datasets; ++x) {
    for (int y = 0; y < num_outputs; ++y) {
      m.kernel(x, y) =
          num_outputs == 1 ? 1.0 : (y == x % num_outputs ? keep : other);
    }
  }
  for (int y = 0; y < num_outputs; ++y) m.outputs.push_back(std::to_string(y));
  return m;
}

MechanismKernel RandomMechanism(int num_datasets, int num_outputs,
                                std::mt19937_64& rng,
                                const std::string& name) {
  MechanismKernel m;
  m.name = name;
  m.kernel = Matrix(num_datasets, num_outputs);
  for (int x = 0; x < num_datasets; ++x) {
    const std::vector<double> row = RandomSimplex(num_outputs, rng);
    for (int y = 0; y < num_outputs; ++y) m.kernel(x, y) = row[y];
  }
  for (int y = 0; y < num_outputs; ++y) m.outputs.push_back(std::to_string(y));
  return m;
}

MechanismKernel BinaryRr(double keep, const std::string& name) {
  MechanismKernel m;
  m.name = name;
  m.outputs = {"0", "1"};
  m.kernel = Matrix::FromRows({{keep, 1.0 - keep}, {1.0 - keep, keep}});
  return m;
}

}  // namespace dcp::testing
