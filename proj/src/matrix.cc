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

#include "selhn/matrix.h"

#include <cmath>
#include <numbers>
#include <string>

#include "selhn/error.h"
#include "selhn/kernels.h"

namespace selhn {
namespace {

std::string Shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void RequireInner(const char* op, std::size_t lhs, std::size_t rhs,
                  const Matrix& a, const Matrix& b) {
  if (lhs != rhs) {
    throw InputError(std::string(op) + ": dimension mismatch " + Shape(a) +
                     " vs " + Shape(b));
  }
}

}  // namespace

Matrix Matrix::FromRows(
    std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Matrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw InputError("FromRows: ragged rows");
    std::size_t j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

Matrix Matrix::Identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  RequireInner("matmul", a.cols(), b.rows(), a, b);
  Matrix out;
  kernels::gemm_nn(a, b, out);
  return out;
}

Matrix matmul_abt(const Matrix& a, const Matrix& b) {
  RequireInner("matmul_abt", a.cols(), b.cols(), a, b);
  Matrix out;
  kernels::gemm_nt(a, b, out);
  return out;
}

Matrix matmul_atb(const Matrix& a, const Matrix& b) {
  RequireInner("matmul_atb", a.rows(), b.rows(), a, b);
  Matrix out;
  kernels::gemm_tn(a, b, out);
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

std::pair<Matrix, NormalizeTape> l2_normalize_rows(const Matrix& x) {
  NormalizeTape tape;
  tape.input_norms.resize(x.rows());
  Matrix y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double sq = 0.0;
    for (double v : x.row(i)) sq += v * v;
    const double norm = std::sqrt(sq);
    if (!(norm >= kMinRowNorm)) throw DegenerateRowError(i, norm);
    tape.input_norms[i] = norm;
    auto src = x.row(i);
    auto dst = y.row(i);
    for (std::size_t j = 0; j < x.cols(); ++j) dst[j] = src[j] / norm;
  }
  tape.normalized = y;
  return {std::move(y), std::move(tape)};
}

Matrix l2_normalize_vjp(const Matrix& d_out, const NormalizeTape& tape) {
  const Matrix& y = tape.normalized;
  if (!d_out.SameShape(y) || tape.input_norms.size() != y.rows()) {
    throw InputError("l2_normalize_vjp: shape mismatch " + Shape(d_out) +
                     " vs tape " + Shape(y));
  }
  Matrix d_in(y.rows(), y.cols());
  for (std::size_t i = 0; i < y.rows(); ++i) {
    auto yi = y.row(i);
    auto gi = d_out.row(i);
    double radial = 0.0;
    for (std::size_t j = 0; j < y.cols(); ++j) radial += yi[j] * gi[j];
    const double inv = 1.0 / tape.input_norms[i];
    auto dst = d_in.row(i);
    for (std::size_t j = 0; j < y.cols(); ++j)
      dst[j] = (gi[j] - yi[j] * radial) * inv;
  }
  return d_in;
}

double frobenius_norm(const Matrix& m) {
  double sq = 0.0;
  for (double v : m.values()) sq += v * v;
  return std::sqrt(sq);
}

bool all_finite(const Matrix& m) {
  for (double v : m.values())
    if (!std::isfinite(v)) return false;
  return true;
}

Rng::Rng(std::uint64_t seed) : engine_(seed) {}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // 1 - uniform() lies in (0, 1], keeping the log finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n <= 1) return 0;
  // Reject the top partial block so every residue is equally likely.
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  auto splitmix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return splitmix(splitmix(splitmix(a) ^ b) ^ c);
}

Matrix gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  if (rows == 0 || cols == 0) throw InputError("gaussian: empty shape");
  Rng rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

}  // namespace selhn
