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

#include "selhn/losses.h"

#include <cmath>
#include <cstdint>
#include <span>

#include "selhn/kernels.h"

namespace selhn {
namespace {

double Hinge(double x) { return x > 0.0 ? x : 0.0; }

// Per-anchor term evaluator. Writes d(term)/d(score(dir, anchor, c)) into
// grad (length B, zero on entry) and returns the anchor's record.
using AnchorFn = AnchorRecord (*)(const SimMatrix&, const LossHyper&,
                                  Direction, std::size_t, std::span<double>);

double DeltaS(const SimMatrix& s, std::size_t a,
              const HardNegative& hn) {
  return std::fabs(hn.score - s.positive(a));
}

// Sum over all negatives of [s_n - s_p + margin]_+, each active term adding
// `weight` to the negative and subtracting it from the positive.
double AllNegatives(const SimMatrix& s, const LossHyper& h, Direction dir,
                    std::size_t a, double weight, std::span<double> grad) {
  const double sp = s.positive(a);
  double sum = 0.0;
  for (std::size_t c = 0; c < s.batch(); ++c) {
    if (c == a) continue;
    const double x = s.score(dir, a, c) - sp + h.margin;
    if (x > 0.0) {
      sum += x;
      grad[c] += weight;
      grad[a] -= weight;
    }
  }
  return sum;
}

double SingleHinge(const SimMatrix& s, const LossHyper& h, std::size_t a,
                   std::size_t neg, double neg_score, std::span<double> grad) {
  const double x = neg_score - s.positive(a) + h.margin;
  if (x > 0.0) {
    grad[neg] += 1.0;
    grad[a] -= 1.0;
  }
  return Hinge(x);
}

AnchorRecord TripletAnchor(const SimMatrix& s, const LossHyper& h,
                           Direction dir, std::size_t a,
                           std::span<double> grad) {
  AnchorRecord rec;
  rec.delta_s = DeltaS(s, a, mine_hard_negative(s, dir, a));
  rec.value = AllNegatives(s, h, dir, a, 1.0, grad);
  return rec;
}

AnchorRecord HnAnchor(const SimMatrix& s, const LossHyper& h, Direction dir,
                      std::size_t a, std::span<double> grad) {
  const HardNegative hn = mine_hard_negative(s, dir, a);
  AnchorRecord rec;
  rec.negative = hn.index;
  rec.branch = Branch::kHn;
  rec.delta_s = DeltaS(s, a, hn);
  rec.value = SingleHinge(s, h, a, hn.index, hn.score, grad);
  return rec;
}

AnchorRecord ShnAnchor(const SimMatrix& s, const LossHyper& h, Direction dir,
                       std::size_t a, std::span<double> grad) {
  AnchorRecord rec;
  rec.delta_s = DeltaS(s, a, mine_hard_negative(s, dir, a));
  const double sp = s.positive(a);
  std::optional<std::size_t> best;
  double best_score = 0.0;
  for (std::size_t c = 0; c < s.batch(); ++c) {
    if (c == a) continue;
    const double sc = s.score(dir, a, c);
    if (sc < sp && (!best || sc > best_score)) {
      best = c;
      best_score = sc;
    }
  }
  if (!best) return rec;  // no semi-hard negative: inactive, contributes 0
  rec.negative = best;
  rec.branch = Branch::kSemiHard;
  rec.value = SingleHinge(s, h, a, *best, best_score, grad);
  return rec;
}

AnchorRecord SctAnchor(const SimMatrix& s, const LossHyper& h, Direction dir,
                       std::size_t a, std::span<double> grad) {
  const HardNegative hn = mine_hard_negative(s, dir, a);
  AnchorRecord rec;
  rec.negative = hn.index;
  rec.delta_s = DeltaS(s, a, hn);
  if (hn.score < s.positive(a)) {
    rec.branch = Branch::kHn;
    rec.value = SingleHinge(s, h, a, hn.index, hn.score, grad);
  } else {
    rec.branch = Branch::kContrastive;
    rec.value = hn.score;
    grad[hn.index] += 1.0;
  }
  return rec;
}

AnchorRecord SelHnAnchor(const SimMatrix& s, const LossHyper& h, Direction dir,
                         std::size_t a, std::span<double> grad) {
  const HardNegative hn = mine_hard_negative(s, dir, a);
  AnchorRecord rec;
  rec.delta_s = DeltaS(s, a, hn);
  if (rec.delta_s > h.epsilon) {
    rec.negative = hn.index;
    rec.branch = Branch::kHn;
    rec.value = SingleHinge(s, h, a, hn.index, hn.score, grad);
  } else {
    const double inv_b = 1.0 / static_cast<double>(s.batch());
    rec.branch = Branch::kTriplet;
    rec.value = AllNegatives(s, h, dir, a, inv_b, grad) / static_cast<double>(s.batch());
  }
  return rec;
}

LossResult Evaluate(const SimMatrix& s, const LossHyper& h, AnchorFn fn) {
  const std::size_t b = s.batch();
  if (b < 2) throw NoNegativesError(b);
  h.Validate();

  // Row a of each buffer holds the gradient of anchor a's term with respect
  // to its candidates; the two are folded into dL/dS afterwards.
  Matrix g_i2t(b, b);
  Matrix g_t2i(b, b);
  LossResult out;
  out.mining.image_to_text.resize(b);
  out.mining.text_to_image.resize(b);

  const auto n = static_cast<std::int64_t>(b);
#pragma omp parallel for schedule(static) if (b * b > kernels::kParallelWork)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto a = static_cast<std::size_t>(i);
    out.mining.image_to_text[a] =
        fn(s, h, Direction::kImageToText, a, g_i2t.row(a));
    out.mining.text_to_image[a] =
        fn(s, h, Direction::kTextToImage, a, g_t2i.row(a));
  }

  out.d_s = Matrix(b, b);
  for (std::size_t r = 0; r < b; ++r)
    for (std::size_t c = 0; c < b; ++c) out.d_s(r, c) = g_i2t(r, c) + g_t2i(c, r);

  double value = 0.0;
  for (const auto& rec : out.mining.image_to_text) value += rec.value;
  for (const auto& rec : out.mining.text_to_image) value += rec.value;
  out.value = value;
  return out;
}

}  // namespace

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::kTriplet: return "triplet";
    case LossKind::kHn: return "hn";
    case LossKind::kShn: return "shn";
    case LossKind::kSct: return "sct";
    case LossKind::kSelHn: return "selhn";
  }
  return "?";
}

LossKind parse_loss_kind(std::string_view name) {
  for (LossKind k : kAllLosses)
    if (to_string(k) == name) return k;
  throw ConfigError("loss", "unknown loss '" + std::string(name) +
                                "' (expected triplet|hn|shn|sct|selhn)");
}

std::string_view to_string(Branch branch) {
  switch (branch) {
    case Branch::kInactive: return "inactive";
    case Branch::kHn: return "hn";
    case Branch::kTriplet: return "triplet";
    case Branch::kSemiHard: return "semi_hard";
    case Branch::kContrastive: return "contrastive";
  }
  return "?";
}

SimMatrix::SimMatrix(Matrix scores) : scores_(std::move(scores)) {
  if (scores_.rows() != scores_.cols()) {
    throw InputError("SimMatrix: expected a square matrix, got " +
                     std::to_string(scores_.rows()) + "x" +
                     std::to_string(scores_.cols()));
  }
}

void LossHyper::Validate() const {
  if (!(margin > 0.0) || !std::isfinite(margin))
    throw ConfigError("margin", "must be a finite value > 0");
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
    throw ConfigError("epsilon", "must be a finite value >= 0");
}

SimMatrix cosine_sim_matrix(const Matrix& v, const Matrix& t) {
  if (!v.SameShape(t)) {
    throw InputError("cosine_sim_matrix: batches differ in shape (" +
                     std::to_string(v.rows()) + "x" + std::to_string(v.cols()) +
                     " vs " + std::to_string(t.rows()) + "x" +
                     std::to_string(t.cols()) + ")");
  }
  return SimMatrix(matmul_abt(v, t));
}

HardNegative mine_hard_negative(const SimMatrix& s, Direction dir,
                                std::size_t anchor) {
  if (s.batch() < 2) throw NoNegativesError(s.batch());
  HardNegative best{anchor == 0 ? 1u : 0u, 0.0};
  best.score = s.score(dir, anchor, best.index);
  for (std::size_t c = best.index + 1; c < s.batch(); ++c) {
    if (c == anchor) continue;
    const double sc = s.score(dir, anchor, c);
    if (sc > best.score) best = {c, sc};
  }
  return best;
}

LossResult triplet_loss(const SimMatrix& s, const LossHyper& h) {
  return Evaluate(s, h, &TripletAnchor);
}
LossResult hn_loss(const SimMatrix& s, const LossHyper& h) {
  return Evaluate(s, h, &HnAnchor);
}
LossResult shn_loss(const SimMatrix& s, const LossHyper& h) {
  return Evaluate(s, h, &ShnAnchor);
}
LossResult sct_loss(const SimMatrix& s, const LossHyper& h) {
  return Evaluate(s, h, &SctAnchor);
}
LossResult selhn_loss(const SimMatrix& s, const LossHyper& h) {
  return Evaluate(s, h, &SelHnAnchor);
}

LossResult compute_loss(LossKind kind, const SimMatrix& s, const LossHyper& h) {
  switch (kind) {
    case LossKind::kTriplet: return triplet_loss(s, h);
    case LossKind::kHn: return hn_loss(s, h);
    case LossKind::kShn: return shn_loss(s, h);
    case LossKind::kSct: return sct_loss(s, h);
    case LossKind::kSelHn: return selhn_loss(s, h);
  }
  throw InputError("compute_loss: unknown loss kind");
}

std::pair<Matrix, Matrix> chain_to_embeddings(const Matrix& d_s,
                                              const Matrix& v,
                                              const Matrix& t) {
  if (d_s.rows() != d_s.cols() || d_s.rows() != v.rows() || !v.SameShape(t)) {
    throw InputError("chain_to_embeddings: shape mismatch");
  }
  return {matmul(d_s, t), matmul_atb(d_s, v)};
}

}  // namespace selhn
