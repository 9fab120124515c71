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

// Dense kernels. The default namespace holds OpenMP-parallel versions that
// split work over output rows; kernels::serial holds the plain loops they
// are tested and benchmarked against. Both accumulate every output entry in
// the same order, so their results are bit-identical.
//
// No shape checking happens here; callers in matrix.cc validate.

#ifndef SELHN_KERNELS_H_
#define SELHN_KERNELS_H_

#include <cstddef>

#include "selhn/matrix.h"

namespace selhn::kernels {

// Work (multiply-adds) below which loops stay single-threaded.
inline constexpr std::size_t kParallelWork = 1 << 15;

int max_threads();

void gemm_nn(const Matrix& a, const Matrix& b, Matrix& out);  // a * b
void gemm_nt(const Matrix& a, const Matrix& b, Matrix& out);  // a * b^T
void gemm_tn(const Matrix& a, const Matrix& b, Matrix& out);  // a^T * b
void column_sums(const Matrix& a, Matrix& out);               // 1 x cols

namespace serial {

void gemm_nn(const Matrix& a, const Matrix& b, Matrix& out);
void gemm_nt(const Matrix& a, const Matrix& b, Matrix& out);
void gemm_tn(const Matrix& a, const Matrix& b, Matrix& out);
void column_sums(const Matrix& a, Matrix& out);

}  // namespace serial
}  // namespace selhn::kernels

#endif  // SELHN_KERNELS_H_
