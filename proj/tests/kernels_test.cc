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

// The parallel kernels must reproduce the serial reference bit for bit,
// both below and above the size at which they fork.

#include "selhn/kernels.h"

#include <tuple>

#include <gtest/gtest.h>

namespace selhn {
namespace {

class KernelParity : public ::testing::TestWithParam<std::tuple<int, int, int>> {};

TEST_P(KernelParity, GemmNn) {
  const auto [m, k, n] = GetParam();
  const Matrix a = gaussian(m, k, 1), b = gaussian(k, n, 2);
  Matrix par, ser;
  kernels::gemm_nn(a, b, par);
  kernels::serial::gemm_nn(a, b, ser);
  EXPECT_EQ(par, ser);
}

TEST_P(KernelParity, GemmNt) {
  const auto [m, k, n] = GetParam();
  const Matrix a = gaussian(m, k, 3), b = gaussian(n, k, 4);
  Matrix par, ser;
  kernels::gemm_nt(a, b, par);
  kernels::serial::gemm_nt(a, b, ser);
  EXPECT_EQ(par, ser);
}

TEST_P(KernelParity, GemmTn) {
  const auto [m, k, n] = GetParam();
  const Matrix a = gaussian(k, m, 5), b = gaussian(k, n, 6);
  Matrix par, ser;
  kernels::gemm_tn(a, b, par);
  kernels::serial::gemm_tn(a, b, ser);
  EXPECT_EQ(par, ser);
}

TEST_P(KernelParity, ColumnSums) {
  const auto [m, k, n] = GetParam();
  const Matrix a = gaussian(m * k, n, 7);
  Matrix par, ser;
  kernels::column_sums(a, par);
  kernels::serial::column_sums(a, ser);
  EXPECT_EQ(par, ser);
}

INSTANTIATE_TEST_SUITE_P(Sizes, KernelParity,
                         ::testing::Values(std::make_tuple(1, 1, 1), std::make_tuple(3, 5, 2),
                                           std::make_tuple(64, 64, 64),
                                           std::make_tuple(200, 96, 130)));

TEST(KernelsTest, SerialGemmMatchesHandProduct) {
  const Matrix a = Matrix::FromRows({{1, 2}, {3, 4}});
  const Matrix b = Matrix::FromRows({{5, 6}, {7, 8}});
  Matrix out;
  kernels::serial::gemm_nn(a, b, out);
  EXPECT_EQ(out, Matrix::FromRows({{19, 22}, {43, 50}}));
  kernels::serial::gemm_nt(a, b, out);
  EXPECT_EQ(out, Matrix::FromRows({{17, 23}, {39, 53}}));
  kernels::serial::gemm_tn(a, b, out);
  EXPECT_EQ(out, Matrix::FromRows({{26, 30}, {38, 44}}));
  kernels::serial::column_sums(a, out);
  EXPECT_EQ(out, Matrix::FromRows({{4, 6}}));
}

TEST(KernelsTest, ReportsAtLeastOneThread) { EXPECT_GE(kernels::max_threads(), 1); }

}  // namespace
}  // namespace selhn
