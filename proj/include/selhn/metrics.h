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

// Cross-modal retrieval metrics over a full image x text score table.

#ifndef SELHN_METRICS_H_
#define SELHN_METRICS_H_

#include <array>
#include <cstddef>
#include <vector>

#include "selhn/losses.h"
#include "selhn/matrix.h"

namespace selhn {

// Ground truth in both directions. Every image and every text must have at
// least one match.
class PairingMap {
 public:
  // Image i matches text i.
  static PairingMap Diagonal(std::size_t n);
  // image_to_texts[i] lists the texts matching image i.
  static PairingMap FromImageToTexts(std::vector<std::vector<std::size_t>> image_to_texts,
                                     std::size_t n_texts);

  std::size_t n_images() const { return image_to_texts_.size(); }
  std::size_t n_texts() const { return text_to_images_.size(); }

  // Matches of `query` in the other modality.
  const std::vector<std::size_t>& matches(Direction dir, std::size_t query) const {
    return dir == Direction::kImageToText ? image_to_texts_[query]
                                          : text_to_images_[query];
  }

 private:
  std::vector<std::vector<std::size_t>> image_to_texts_;
  std::vector<std::vector<std::size_t>> text_to_images_;
};

inline constexpr std::array<std::size_t, 3> kRecallKs = {1, 5, 10};

struct RecallReport {
  // r_at[direction][j] is R@kRecallKs[j] in percent.
  std::array<std::array<double, 3>, 2> r_at{};
  double rsum = 0.0;

  double at(Direction dir, std::size_t k_index) const {
    return r_at[dir == Direction::kImageToText ? 0 : 1][k_index];
  }
};

// Percentage of queries whose top-k candidates (descending score, ties to
// the lower index) contain a ground-truth match. scores(i, j) scores image i
// against text j. Throws ConfigError if k is 0 or exceeds the candidates.
double recall_at_k(const Matrix& scores, const PairingMap& pairing,
                   std::size_t k, Direction dir);

// All six recalls at K = 1, 5, 10 and their sum. Needs >= 10 candidates
// in each direction.
RecallReport rsum(const Matrix& scores, const PairingMap& pairing);

}  // namespace selhn

#endif  // SELHN_METRICS_H_
