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

#include "selhn/optim.h"

#include <cmath>
#include <string>

#include "selhn/error.h"

namespace selhn {
namespace {

void CheckShapes(std::span<Matrix* const> params, std::span<const Matrix> grads,
                 const char* op) {
  if (params.size() != grads.size())
    throw InputError(std::string(op) + ": parameter/gradient count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->SameShape(grads[i]))
      throw InputError(std::string(op) + ": shape mismatch at tensor " + std::to_string(i));
  }
}

}  // namespace

void AdamWHyper::Validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("lr", "must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1", "must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2", "must lie in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("adam_eps", "must be > 0");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay))
    throw ConfigError("weight_decay", "must be >= 0");
}

AdamW::AdamW(AdamWHyper hyper) : hyper_(hyper) { hyper_.Validate(); }

void AdamW::Step(std::span<Matrix* const> params, std::span<const Matrix> grads) {
  CheckShapes(params, grads, "AdamW::Step");
  if (m_.empty()) {
    for (const Matrix* p : params) {
      m_.emplace_back(p->rows(), p->cols());
      v_.emplace_back(p->rows(), p->cols());
    }
  } else if (m_.size() != params.size()) {
    throw InputError("AdamW::Step: tensor list changed between steps");
  }
  ++t_;
  const double b1 = hyper_.beta1;
  const double b2 = hyper_.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->values();
    auto g = grads[i].values();
    auto m = m_[i].values();
    auto v = v_[i].values();
    if (!m_[i].SameShape(*params[i]))
      throw InputError("AdamW::Step: tensor " + std::to_string(i) + " changed shape");
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = b1 * m[k] + (1.0 - b1) * g[k];
      v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
      const double m_hat = m[k] / bc1;
      const double v_hat = v[k] / bc2;
      p[k] -= hyper_.lr * (m_hat / (std::sqrt(v_hat) + hyper_.eps) +
                           hyper_.weight_decay * p[k]);
    }
  }
}

void sgd_step(std::span<Matrix* const> params, std::span<const Matrix> grads,
              double lr) {
  CheckShapes(params, grads, "sgd_step");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->values();
    auto g = grads[i].values();
    for (std::size_t k = 0; k < p.size(); ++k) p[k] -= lr * g[k];
  }
}

void LrSchedule::Validate() const {
  if (!(base_lr >= 0.0) || !std::isfinite(base_lr)) throw ConfigError("lr", "must be >= 0");
  if (total_epochs == 0) throw ConfigError("epochs", "must be >= 1");
  if (decay_epoch > total_epochs)
    throw ConfigError("decay_epoch", "must not exceed epochs");
  if (!(decay_factor > 0.0) || !std::isfinite(decay_factor))
    throw ConfigError("decay_factor", "must be > 0");
}

double lr_at(const LrSchedule& schedule, std::size_t epoch) {
  schedule.Validate();
  if (epoch >= schedule.total_epochs) {
    throw ConfigError("epoch", "epoch " + std::to_string(epoch) +
                                   " outside schedule of " +
                                   std::to_string(schedule.total_epochs));
  }
  return epoch < schedule.decay_epoch ? schedule.base_lr
                                      : schedule.base_lr / schedule.decay_factor;
}

}  // namespace selhn
