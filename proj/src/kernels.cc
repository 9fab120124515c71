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

#include "selhn/kernels.h"

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace selhn::kernels {

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void gemm_nn(const Matrix& a, const Matrix& b, Matrix& out) {
  const std::int64_t m = static_cast<std::int64_t>(a.rows());
  const std::size_t inner = a.cols();
  const std::size_t n = b.cols();
  out = Matrix(a.rows(), n);
#pragma omp parallel for schedule(static) if (a.rows() * inner * n > kParallelWork)
  for (std::int64_t i = 0; i < m; ++i) {
    auto dst = out.row(static_cast<std::size_t>(i));
    auto lhs = a.row(static_cast<std::size_t>(i));
    for (std::size_t k = 0; k < inner; ++k) {
      const double aik = lhs[k];
      auto rhs = b.row(k);
      for (std::size_t j = 0; j < n; ++j) dst[j] += aik * rhs[j];
    }
  }
}

void gemm_nt(const Matrix& a, const Matrix& b, Matrix& out) {
  const std::int64_t m = static_cast<std::int64_t>(a.rows());
  const std::size_t inner = a.cols();
  const std::size_t n = b.rows();
  out = Matrix(a.rows(), n);
#pragma omp parallel for schedule(static) if (a.rows() * inner * n > kParallelWork)
  for (std::int64_t i = 0; i < m; ++i) {
    auto lhs = a.row(static_cast<std::size_t>(i));
    auto dst = out.row(static_cast<std::size_t>(i));
    for (std::size_t j = 0; j < n; ++j) {
      auto rhs = b.row(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < inner; ++k) acc += lhs[k] * rhs[k];
      dst[j] = acc;
    }
  }
}

void gemm_tn(const Matrix& a, const Matrix& b, Matrix& out) {
  const std::int64_t m = static_cast<std::int64_t>(a.cols());
  const std::size_t inner = a.rows();
  const std::size_t n = b.cols();
  out = Matrix(a.cols(), n);
#pragma omp parallel for schedule(static) if (a.cols() * inner * n > kParallelWork)
  for (std::int64_t i = 0; i < m; ++i) {
    const auto col = static_cast<std::size_t>(i);
    auto dst = out.row(col);
    for (std::size_t r = 0; r < inner; ++r) {
      const double ari = a(r, col);
      auto rhs = b.row(r);
      for (std::size_t j = 0; j < n; ++j) dst[j] += ari * rhs[j];
    }
  }
}

void column_sums(const Matrix& a, Matrix& out) {
  const std::int64_t n = static_cast<std::int64_t>(a.cols());
  out = Matrix(1, a.cols());
#pragma omp parallel for schedule(static) if (a.rows() * a.cols() > kParallelWork)
  for (std::int64_t j = 0; j < n; ++j) {
    const auto col = static_cast<std::size_t>(j);
    double acc = 0.0;
    for (std::size_t r = 0; r < a.rows(); ++r) acc += a(r, col);
    out(0, col) = acc;
  }
}

namespace serial {

void gemm_nn(const Matrix& a, const Matrix& b, Matrix& out) {
  out = Matrix(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
      out(i, j) = acc;
    }
  }
}

void gemm_nt(const Matrix& a, const Matrix& b, Matrix& out) {
  out = Matrix(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(j, k);
      out(i, j) = acc;
    }
  }
}

void gemm_tn(const Matrix& a, const Matrix& b, Matrix& out) {
  out = Matrix(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.cols(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t r = 0; r < a.rows(); ++r) acc += a(r, i) * b(r, j);
      out(i, j) = acc;
    }
  }
}

void column_sums(const Matrix& a, Matrix& out) {
  out = Matrix(1, a.cols());
  for (std::size_t j = 0; j < a.cols(); ++j) {
    double acc = 0.0;
    for (std::size_t r = 0; r < a.rows(); ++r) acc += a(r, j);
    out(0, j) = acc;
  }
}

}  // namespace serial
}  // namespace selhn::kernels
