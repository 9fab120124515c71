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

#ifndef SELHN_OPTIM_H_
#define SELHN_OPTIM_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "selhn/matrix.h"

namespace selhn {

struct AdamWHyper {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;

  void Validate() const;  // throws ConfigError
};

// AdamW with decoupled weight decay:
//   m <- b1 m + (1 - b1) g
//   v <- b2 v + (1 - b2) g^2
//   p <- p - lr (m_hat / (sqrt(v_hat) + eps) + wd p)
// Moments are allocated lazily on the first step and bound to the tensor
// list order used then.
class AdamW {
 public:
  explicit AdamW(AdamWHyper hyper);

  void Step(std::span<Matrix* const> params, std::span<const Matrix> grads);

  void set_lr(double lr) { hyper_.lr = lr; }
  const AdamWHyper& hyper() const { return hyper_; }
  std::uint64_t steps() const { return t_; }
  const std::vector<Matrix>& first_moments() const { return m_; }
  const std::vector<Matrix>& second_moments() const { return v_; }

 private:
  AdamWHyper hyper_;
  std::uint64_t t_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

// p <- p - lr g
void sgd_step(std::span<Matrix* const> params, std::span<const Matrix> grads,
              double lr);

struct LrSchedule {
  double base_lr = 5e-4;
  std::size_t total_epochs = 30;
  std::size_t decay_epoch = 15;  // == total_epochs means no decay
  double decay_factor = 10.0;

  void Validate() const;  // throws ConfigError
};

// base_lr before decay_epoch, base_lr / decay_factor from it on.
double lr_at(const LrSchedule& schedule, std::size_t epoch);

}  // namespace selhn

#endif  // SELHN_OPTIM_H_
