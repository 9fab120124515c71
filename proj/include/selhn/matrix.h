// Copyright 2026 The SelHN Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Dense row-major matrix of doubles plus the handful of operations every
// other module builds on: products, row normalization with its exact
// vector-Jacobian product, and seeded Gaussian sampling.

#ifndef SELHN_MATRIX_H_
#define SELHN_MATRIX_H_

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace selhn {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  // Builds a matrix from nested row literals; all rows must be equally long.
  static Matrix FromRows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix Identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  bool SameShape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Product a * b. Every output entry accumulates over the inner index in
// ascending order, so results do not depend on the thread count.
Matrix matmul(const Matrix& a, const Matrix& b);

// a * b^T and a^T * b without materializing the transpose.
Matrix matmul_abt(const Matrix& a, const Matrix& b);
Matrix matmul_atb(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

// Rows with a norm below this are rejected by l2_normalize_rows.
inline constexpr double kMinRowNorm = 1e-12;

struct NormalizeTape {
  std::vector<double> input_norms;
  Matrix normalized;
};

// y_i = x_i / |x_i|. Throws DegenerateRowError instead of producing NaN.
std::pair<Matrix, NormalizeTape> l2_normalize_rows(const Matrix& x);

// Backward of l2_normalize_rows:
//   d_in_i = (d_out_i - y_i (y_i . d_out_i)) / |x_i|
Matrix l2_normalize_vjp(const Matrix& d_out, const NormalizeTape& tape);

// Frobenius norm.
double frobenius_norm(const Matrix& m);

// True when every entry is finite.
bool all_finite(const Matrix& m);

// Deterministic random source: std::mt19937_64 (whose output sequence is
// fixed by the standard) feeding hand-written transforms, so identical seeds
// give identical values across standard library implementations.
//   uniform()   53-bit mantissa in [0, 1)
//   normal()    Box-Muller on two uniforms, second value cached
//   below(n)    rejection sampling, unbiased in [0, n)
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  std::uint64_t below(std::uint64_t n);

  // In-place Fisher-Yates shuffle driven by below().
  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Mixes several integers into one well-distributed seed (splitmix64 chain).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0);

// rows x cols matrix of i.i.d. standard normals from Rng(seed).
Matrix gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed);

}  // namespace selhn

#endif  // SELHN_MATRIX_H_
