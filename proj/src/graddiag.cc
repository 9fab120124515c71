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

#include "selhn/graddiag.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "selhn/error.h"

namespace selhn {
namespace {

double Dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

// |a - (a.u) u| for a unit vector u.
double TangentNorm(std::span<const double> a, std::span<const double> u) {
  const double r = Dot(a, u);
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = a[i] - r * u[i];
    sq += x * x;
  }
  return std::sqrt(sq);
}

void RequireUnit(std::span<const double> x, const char* name) {
  const double n = std::sqrt(Dot(x, x));
  if (std::fabs(n - 1.0) > 1e-9)
    throw InputError(std::string("tangent_report: ") + name + " is not a unit vector");
}

// Gap between the best and second-best scores among candidates passing
// `keep`; infinity with fewer than two.
template <typename Keep>
double TopGap(const SimMatrix& s, Direction dir, std::size_t a, Keep keep) {
  double first = -std::numeric_limits<double>::infinity();
  double second = first;
  for (std::size_t c = 0; c < s.batch(); ++c) {
    if (c == a) continue;
    const double sc = s.score(dir, a, c);
    if (!keep(sc)) continue;
    if (sc > first) {
      second = first;
      first = sc;
    } else if (sc > second) {
      second = sc;
    }
  }
  if (!std::isfinite(second)) return std::numeric_limits<double>::infinity();
  return first - second;
}

}  // namespace

DeltaSPerAnchor delta_s_per_anchor(const SimMatrix& s) {
  if (s.batch() < 2) throw NoNegativesError(s.batch());
  DeltaSPerAnchor out;
  for (std::size_t a = 0; a < s.batch(); ++a) {
    out.image_to_text.push_back(std::fabs(
        mine_hard_negative(s, Direction::kImageToText, a).score - s.positive(a)));
    out.text_to_image.push_back(std::fabs(
        mine_hard_negative(s, Direction::kTextToImage, a).score - s.positive(a)));
  }
  return out;
}

TangentReport tangent_report(std::span<const double> v, std::span<const double> t,
                             std::span<const double> t_hat) {
  if (v.size() != t.size() || v.size() != t_hat.size() || v.empty())
    throw InputError("tangent_report: vectors differ in length");
  RequireUnit(v, "v");
  RequireUnit(t, "t");
  RequireUnit(t_hat, "t_hat");

  std::vector<double> g(v.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = t_hat[i] - t[i];

  TangentReport rep;
  const double s_neg = Dot(v, t_hat);
  const double s_pos = Dot(v, t);
  rep.g_norm = std::sqrt(Dot(g, g));
  rep.g_v_stated = rep.g_norm * (s_neg - s_pos);
  rep.g_v_stated_abs = std::fabs(rep.g_v_stated);
  rep.g_that_stated = s_neg;
  rep.g_t_stated = s_pos;
  rep.g_radial = Dot(v, g);
  rep.g_v_exact = TangentNorm(g, v);
  rep.g_that_exact = TangentNorm(v, t_hat);
  rep.g_t_exact = TangentNorm(v, t);
  rep.delta_s = std::fabs(s_neg - s_pos);
  return rep;
}

bool vanishing_predicate(double delta_s, double epsilon) {
  if (!(epsilon >= 0.0)) throw InputError("vanishing_predicate: epsilon must be >= 0");
  return delta_s <= epsilon;
}

double VanishingReport::fraction_below(double epsilon) const {
  const std::size_t n = delta_s.image_to_text.size() + delta_s.text_to_image.size();
  if (n == 0) return 0.0;
  std::size_t below = 0;
  for (Direction dir : kBothDirections)
    for (double d : delta_s[dir])
      if (vanishing_predicate(d, epsilon)) ++below;
  return static_cast<double>(below) / static_cast<double>(n);
}

VanishingReport vanishing_report(const SimMatrix& s, const EncoderGrads& image,
                                 const EncoderGrads& text) {
  VanishingReport rep;
  rep.delta_s = delta_s_per_anchor(s);
  double sum = 0.0;
  for (Direction dir : kBothDirections)
    for (double d : rep.delta_s[dir]) sum += d;
  rep.mean_delta_s = sum / static_cast<double>(2 * s.batch());
  rep.first_layer_grad_norm_image = first_layer_grad_norm(image);
  rep.first_layer_grad_norm_text = first_layer_grad_norm(text);
  return rep;
}

double first_layer_grad_norm(const EncoderGrads& grads) {
  if (grads.tensors.empty()) throw InputError("first_layer_grad_norm: no gradients");
  return frobenius_norm(grads.first_layer_weight());
}

double kink_margin(LossKind kind, const SimMatrix& s, const LossHyper& h) {
  double margin = std::numeric_limits<double>::infinity();
  auto consider = [&margin](double x) { margin = std::min(margin, std::fabs(x)); };
  auto all_hinges = [&](Direction dir, std::size_t a) {
    for (std::size_t c = 0; c < s.batch(); ++c)
      if (c != a) consider(s.score(dir, a, c) - s.positive(a) + h.margin);
  };
  auto any = [](double) { return true; };

  for (Direction dir : kBothDirections) {
    for (std::size_t a = 0; a < s.batch(); ++a) {
      const double sp = s.positive(a);
      const HardNegative hn = mine_hard_negative(s, dir, a);
      switch (kind) {
        case LossKind::kTriplet:
          all_hinges(dir, a);
          break;
        case LossKind::kHn:
          consider(TopGap(s, dir, a, any));
          consider(hn.score - sp + h.margin);
          break;
        case LossKind::kShn: {
          for (std::size_t c = 0; c < s.batch(); ++c)
            if (c != a) consider(s.score(dir, a, c) - sp);
          consider(TopGap(s, dir, a, [sp](double x) { return x < sp; }));
          all_hinges(dir, a);
          break;
        }
        case LossKind::kSct:
          consider(TopGap(s, dir, a, any));
          consider(hn.score - sp);
          if (hn.score < sp) consider(hn.score - sp + h.margin);
          break;
        case LossKind::kSelHn: {
          consider(TopGap(s, dir, a, any));
          const double ds = std::fabs(hn.score - sp);
          consider(ds - h.epsilon);
          if (ds > h.epsilon) {
            consider(hn.score - sp + h.margin);
          } else {
            all_hinges(dir, a);
          }
          break;
        }
      }
    }
  }
  return margin;
}

std::vector<int> decision_signature(LossKind kind, const SimMatrix& s,
                                    const LossHyper& h) {
  const LossResult res = compute_loss(kind, s, h);
  std::vector<int> sig;
  for (Direction dir : kBothDirections) {
    for (std::size_t a = 0; a < s.batch(); ++a) {
      const AnchorRecord& rec = res.mining[dir][a];
      sig.push_back(static_cast<int>(rec.branch));
      sig.push_back(rec.negative ? static_cast<int>(*rec.negative) : -1);
      const double sp = s.positive(a);
      for (std::size_t c = 0; c < s.batch(); ++c) {
        if (c == a) continue;
        const double sc = s.score(dir, a, c);
        sig.push_back((sc - sp + h.margin > 0.0 ? 1 : 0) | (sc < sp ? 2 : 0));
      }
    }
  }
  return sig;
}

double relative_error(double analytic, double numeric) {
  const double denom =
      std::max({std::fabs(analytic), std::fabs(numeric), kGradCheckFloor});
  return std::fabs(analytic - numeric) / denom;
}

FdReport check_gradient(
    const std::function<double(std::vector<int>& signature)>& objective,
    std::span<double* const> params, std::span<const double> analytic,
    double step) {
  if (params.size() != analytic.size())
    throw InputError("check_gradient: parameter/gradient count mismatch");
  FdReport rep;
  std::vector<int> base;
  objective(base);
  std::vector<int> sig_plus, sig_minus;
  for (std::size_t i = 0; i < params.size(); ++i) {
    double& x = *params[i];
    const double saved = x;
    x = saved + step;
    const double f_plus = objective(sig_plus);
    x = saved - step;
    const double f_minus = objective(sig_minus);
    x = saved;
    if (sig_plus != base || sig_minus != base) {
      rep.skipped = true;
      rep.skip_reason = "coordinate " + std::to_string(i) + " crosses a kink";
      continue;
    }
    const double numeric = (f_plus - f_minus) / (2.0 * step);
    rep.max_rel_error = std::max(rep.max_rel_error, relative_error(analytic[i], numeric));
    ++rep.checked;
  }
  return rep;
}

FdReport finite_diff_check(LossKind kind, const Matrix& v, const Matrix& t,
                           const LossHyper& h, double step) {
  if (!(step >= 1e-8 && step <= 1e-4))
    throw InputError("finite_diff_check: step must lie in [1e-8, 1e-4]");
  if (!v.SameShape(t)) throw InputError("finite_diff_check: batches differ in shape");

  auto [vn, v_tape] = l2_normalize_rows(v);
  auto [tn, t_tape] = l2_normalize_rows(t);
  const SimMatrix s = cosine_sim_matrix(vn, tn);

  double min_norm = std::numeric_limits<double>::infinity();
  for (double n : v_tape.input_norms) min_norm = std::min(min_norm, n);
  for (double n : t_tape.input_norms) min_norm = std::min(min_norm, n);
  // One raw coordinate moved by `step` shifts any score by at most
  // step / min_norm.
  if (kink_margin(kind, s, h) < 10.0 * step / min_norm) {
    FdReport rep;
    rep.skipped = true;
    rep.skip_reason = "a loss decision lies within 10 steps of its kink";
    return rep;
  }

  const LossResult res = compute_loss(kind, s, h);
  auto [d_vn, d_tn] = chain_to_embeddings(res.d_s, vn, tn);
  const Matrix d_v = l2_normalize_vjp(d_vn, v_tape);
  const Matrix d_t = l2_normalize_vjp(d_tn, t_tape);

  Matrix vp = v;
  Matrix tp = t;
  std::vector<double*> params;
  std::vector<double> analytic;
  for (std::size_t i = 0; i < vp.size(); ++i) {
    params.push_back(&vp.values()[i]);
    analytic.push_back(d_v.values()[i]);
  }
  for (std::size_t i = 0; i < tp.size(); ++i) {
    params.push_back(&tp.values()[i]);
    analytic.push_back(d_t.values()[i]);
  }
  auto objective = [&](std::vector<int>& sig) {
    const SimMatrix sp = cosine_sim_matrix(l2_normalize_rows(vp).first,
                                           l2_normalize_rows(tp).first);
    sig = decision_signature(kind, sp, h);
    return compute_loss(kind, sp, h).value;
  };
  return check_gradient(objective, params, analytic, step);
}

}  // namespace selhn
