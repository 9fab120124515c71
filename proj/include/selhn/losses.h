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

// Bidirectional triplet-loss family over a batch similarity matrix.
//
// Positives are index-aligned: S(i, i) scores image i against its own
// caption. Every loss is evaluated per anchor and per direction:
//
//   image-to-text  anchor V_i, candidates S(i, c)   (row i)
//   text-to-image  anchor T_i, candidates S(c, i)   (column i)
//
// The "hard negative" of an anchor is the highest-scoring non-matching
// candidate, ties broken toward the lower index. Hinges use [x]_+ with a
// zero subgradient at x == 0.
//
//   triplet  sum over all negatives of [s_n - s_p + margin]_+
//   hn       [s_hn - s_p + margin]_+
//   shn      like hn, but the negative is the best one with s_n < s_p; no
//            such negative means the anchor contributes nothing
//   sct      hn hinge when s_hn < s_p, otherwise s_hn itself
//   selhn    hn hinge when |s_hn - s_p| > epsilon, otherwise the
//            all-negatives triplet term scaled by 1/B
//
// The triplet loss carries no 1/B factor; the selhn fallback does.

#ifndef SELHN_LOSSES_H_
#define SELHN_LOSSES_H_

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "selhn/error.h"
#include "selhn/matrix.h"

namespace selhn {

enum class LossKind { kTriplet, kHn, kShn, kSct, kSelHn };

inline constexpr std::array<LossKind, 5> kAllLosses = {
    LossKind::kTriplet, LossKind::kHn, LossKind::kShn, LossKind::kSct,
    LossKind::kSelHn};

std::string_view to_string(LossKind kind);
// Accepts triplet, hn, shn, sct, selhn. Throws ConfigError("loss", ...).
LossKind parse_loss_kind(std::string_view name);

enum class Direction { kImageToText, kTextToImage };

inline constexpr std::array<Direction, 2> kBothDirections = {
    Direction::kImageToText, Direction::kTextToImage};

enum class Branch { kInactive, kHn, kTriplet, kSemiHard, kContrastive };

std::string_view to_string(Branch branch);

// Raised when a batch has fewer than two items.
class NoNegativesError : public InputError {
 public:
  explicit NoNegativesError(std::size_t batch)
      : InputError("batch of " + std::to_string(batch) +
                   " has no negatives (need at least 2 items)") {}
};

class SimMatrix {
 public:
  explicit SimMatrix(Matrix scores);

  std::size_t batch() const { return scores_.rows(); }
  const Matrix& scores() const { return scores_; }
  double operator()(std::size_t i, std::size_t j) const { return scores_(i, j); }

  double positive(std::size_t anchor) const { return scores_(anchor, anchor); }
  double score(Direction dir, std::size_t anchor, std::size_t candidate) const {
    return dir == Direction::kImageToText ? scores_(anchor, candidate)
                                          : scores_(candidate, anchor);
  }

 private:
  Matrix scores_;
};

struct LossHyper {
  double margin = 0.2;
  double epsilon = 0.01;

  // Throws ConfigError naming "margin" or "epsilon".
  void Validate() const;
};

struct AnchorRecord {
  // Negative the term was built on; empty for the plain triplet loss and for
  // shn anchors without a semi-hard candidate.
  std::optional<std::size_t> negative;
  Branch branch = Branch::kInactive;
  // |s_hn - s_p| with s_hn from plain arg-max mining, whatever the loss.
  double delta_s = 0.0;
  // This anchor's contribution to the loss value.
  double value = 0.0;
};

struct MiningRecord {
  std::vector<AnchorRecord> image_to_text;
  std::vector<AnchorRecord> text_to_image;

  const std::vector<AnchorRecord>& operator[](Direction dir) const {
    return dir == Direction::kImageToText ? image_to_text : text_to_image;
  }
};

struct LossResult {
  double value = 0.0;
  Matrix d_s;  // dL/dS, B x B
  MiningRecord mining;
};

// S = V T^T for two batches of unit rows.
SimMatrix cosine_sim_matrix(const Matrix& v, const Matrix& t);

struct HardNegative {
  std::size_t index = 0;
  double score = 0.0;
};

// Arg-max negative of one anchor. Requires batch() >= 2.
HardNegative mine_hard_negative(const SimMatrix& s, Direction dir,
                                std::size_t anchor);

LossResult triplet_loss(const SimMatrix& s, const LossHyper& h);
LossResult hn_loss(const SimMatrix& s, const LossHyper& h);
LossResult shn_loss(const SimMatrix& s, const LossHyper& h);
LossResult sct_loss(const SimMatrix& s, const LossHyper& h);
LossResult selhn_loss(const SimMatrix& s, const LossHyper& h);

LossResult compute_loss(LossKind kind, const SimMatrix& s, const LossHyper& h);

// Pulls dL/dS back through S = V T^T: returns (dL/dV, dL/dT).
std::pair<Matrix, Matrix> chain_to_embeddings(const Matrix& d_s,
                                              const Matrix& v,
                                              const Matrix& t);

}  // namespace selhn

#endif  // SELHN_LOSSES_H_
