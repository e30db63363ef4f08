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

#ifndef DCP_COMMON_H_
#define DCP_COMMON_H_

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace dcp {

// Tolerance used for every "sums to one" and "equals one" test.
inline constexpr double kProbabilityTolerance = 1e-12;

// Tolerance for dependence-group marginals.
inline constexpr double kMarginalTolerance = 1e-9;

// Log-ratio breakpoints and loss atoms closer than this are merged.
inline constexpr double kLossMergeTolerance = 1e-12;

// Largest product output space that is enumerated.
inline constexpr std::size_t kDefaultOutcomeCap = 10'000'000;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix FromRows(const std::vector<std::vector<double>>& rows) {
    Matrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (std::size_t c = 0; c < rows[r].size() && c < m.cols_; ++c) {
        m(r, c) = rows[r][c];
      }
    }
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::vector<double> RowVector(std::size_t r) const {
    auto s = row(r);
    return {s.begin(), s.end()};
  }

  const std::vector<double>& data() const { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

}  // namespace dcp

#endif  // DCP_COMMON_H_
