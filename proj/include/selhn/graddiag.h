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

// Gradient-vanishing diagnostics for hard-negative training.
//
// For an image anchor v with positive t and hard negative t_hat, the hinge
// gradient with respect to v is g = t_hat - t. Only its component tangent
// to the unit sphere at v survives normalization. The "stated" moduli are
// the closed forms
//
//   |g(v)|     = |t_hat - t| * (v.t_hat - v.t)
//   |g(t_hat)| = v.t_hat
//   |g(t)|     = v.t
//
// which vanish with delta_s = |v.t_hat - v.t|. The exact tangent norm is
// |g - (v.g) v|; both are reported because they differ in general.

#ifndef SELHN_GRADDIAG_H_
#define SELHN_GRADDIAG_H_

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "selhn/encoder.h"
#include "selhn/losses.h"
#include "selhn/matrix.h"

namespace selhn {

struct DeltaSPerAnchor {
  std::vector<double> image_to_text;
  std::vector<double> text_to_image;

  const std::vector<double>& operator[](Direction dir) const {
    return dir == Direction::kImageToText ? image_to_text : text_to_image;
  }
};

// |s_hn - s_p| per anchor and direction, hard negatives from arg-max mining.
DeltaSPerAnchor delta_s_per_anchor(const SimMatrix& s);

struct TangentReport {
  double g_v_stated = 0.0;      // signed: |t_hat - t| (v.t_hat - v.t)
  double g_v_stated_abs = 0.0;
  double g_that_stated = 0.0;   // v.t_hat
  double g_t_stated = 0.0;      // v.t
  double g_v_exact = 0.0;       // |g - (v.g) v|, g = t_hat - t
  double g_that_exact = 0.0;    // tangent part of v at t_hat: |v - (t_hat.v) t_hat|
  double g_t_exact = 0.0;       // tangent part of -v at t:    |v - (t.v) t|
  double g_radial = 0.0;        // v.g
  double g_norm = 0.0;          // |g|
  double delta_s = 0.0;         // |v.t_hat - v.t|
};

// Inputs must be unit vectors (within 1e-9) of equal length; throws
// InputError otherwise.
TangentReport tangent_report(std::span<const double> v, std::span<const double> t,
                             std::span<const double> t_hat);

// True when delta_s <= epsilon, i.e. the anchor is prone to vanishing and a
// selective loss should not mine its hard negative.
bool vanishing_predicate(double delta_s, double epsilon);

struct VanishingReport {
  DeltaSPerAnchor delta_s;
  double mean_delta_s = 0.0;
  double first_layer_grad_norm_image = 0.0;
  double first_layer_grad_norm_text = 0.0;

  // Share of anchor/direction entries with delta_s <= epsilon.
  double fraction_below(double epsilon) const;
};

VanishingReport vanishing_report(const SimMatrix& s, const EncoderGrads& image,
                                 const EncoderGrads& text);

// Frobenius norm of the first linear layer's weight gradient.
double first_layer_grad_norm(const EncoderGrads& grads);

// Smallest distance of any decision quantity `kind` depends on from its
// switching point: hinge arguments, arg-max ties, s_n vs s_p, and delta_s
// vs epsilon.
double kink_margin(LossKind kind, const SimMatrix& s, const LossHyper& h);

// Discrete outcome of every loss decision (branch, chosen negative, hinge
// activity, s_n < s_p). Equal signatures mean no kink lies in between.
std::vector<int> decision_signature(LossKind kind, const SimMatrix& s,
                                    const LossHyper& h);

// |analytic - numeric| / max(|analytic|, |numeric|, kGradCheckFloor).
inline constexpr double kGradCheckFloor = 1e-3;
double relative_error(double analytic, double numeric);

struct FdReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  bool skipped = false;  // a kink was too close to evaluate reliably
  std::string skip_reason;
};

// Central-difference check of a scalar objective against an analytic
// gradient. `objective` evaluates the loss at the current contents of
// `params` and fills `signature`; a coordinate whose +/- step changes the
// signature is a kink crossing and marks the report skipped.
FdReport check_gradient(
    const std::function<double(std::vector<int>& signature)>& objective,
    std::span<double* const> params, std::span<const double> analytic,
    double step);

// End-to-end check of one loss through normalization: gradient of the loss
// with respect to every raw (pre-normalization) coordinate of v and t.
// step must lie in [1e-8, 1e-4].
FdReport finite_diff_check(LossKind kind, const Matrix& v, const Matrix& t,
                           const LossHyper& h, double step);

}  // namespace selhn

#endif  // SELHN_GRADDIAG_H_
