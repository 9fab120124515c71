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

#include "selhn/metrics.h"

#include <cmath>
#include <cstdint>
#include <string>

#include "selhn/error.h"
#include "selhn/kernels.h"

namespace selhn {
namespace {

double Score(const Matrix& scores, Direction dir, std::size_t query,
             std::size_t cand) {
  return dir == Direction::kImageToText ? scores(query, cand) : scores(cand, query);
}

// 0-based position of `target` in the query's ranking.
std::size_t RankOf(const Matrix& scores, Direction dir, std::size_t query,
                   std::size_t target, std::size_t n_cand) {
  const double t = Score(scores, dir, query, target);
  std::size_t ahead = 0;
  for (std::size_t c = 0; c < n_cand; ++c) {
    const double s = Score(scores, dir, query, c);
    if (s > t || (s == t && c < target)) ++ahead;
  }
  return ahead;
}

// Best (smallest) rank among each query's matches.
std::vector<std::size_t> BestRanks(const Matrix& scores, const PairingMap& pairing,
                                   Direction dir) {
  const bool i2t = dir == Direction::kImageToText;
  const std::size_t n_query = i2t ? scores.rows() : scores.cols();
  const std::size_t n_cand = i2t ? scores.cols() : scores.rows();
  if (pairing.n_images() != scores.rows() || pairing.n_texts() != scores.cols())
    throw InputError("recall: pairing does not match score table shape");
  for (double v : scores.values())
    if (!std::isfinite(v)) throw InputError("recall: non-finite score");

  std::vector<std::size_t> best(n_query);
  const auto nq = static_cast<std::int64_t>(n_query);
#pragma omp parallel for schedule(static) if (n_query * n_cand > kernels::kParallelWork)
  for (std::int64_t i = 0; i < nq; ++i) {
    const auto q = static_cast<std::size_t>(i);
    std::size_t r = n_cand;
    for (std::size_t m : pairing.matches(dir, q)) {
      const std::size_t rm = RankOf(scores, dir, q, m, n_cand);
      if (rm < r) r = rm;
    }
    best[q] = r;
  }
  return best;
}

double Percent(const std::vector<std::size_t>& best, std::size_t k) {
  std::size_t hits = 0;
  for (std::size_t r : best)
    if (r < k) ++hits;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(best.size());
}

std::size_t Candidates(const Matrix& scores, Direction dir) {
  return dir == Direction::kImageToText ? scores.cols() : scores.rows();
}

}  // namespace

PairingMap PairingMap::Diagonal(std::size_t n) {
  std::vector<std::vector<std::size_t>> m(n);
  for (std::size_t i = 0; i < n; ++i) m[i] = {i};
  return FromImageToTexts(std::move(m), n);
}

PairingMap PairingMap::FromImageToTexts(
    std::vector<std::vector<std::size_t>> image_to_texts, std::size_t n_texts) {
  PairingMap p;
  p.text_to_images_.resize(n_texts);
  for (std::size_t i = 0; i < image_to_texts.size(); ++i) {
    if (image_to_texts[i].empty())
      throw InputError("PairingMap: image " + std::to_string(i) + " has no match");
    for (std::size_t t : image_to_texts[i]) {
      if (t >= n_texts) throw InputError("PairingMap: text index out of range");
      p.text_to_images_[t].push_back(i);
    }
  }
  for (std::size_t t = 0; t < n_texts; ++t) {
    if (p.text_to_images_[t].empty())
      throw InputError("PairingMap: text " + std::to_string(t) + " has no match");
  }
  p.image_to_texts_ = std::move(image_to_texts);
  return p;
}

double recall_at_k(const Matrix& scores, const PairingMap& pairing,
                   std::size_t k, Direction dir) {
  const std::size_t n_cand = Candidates(scores, dir);
  if (k == 0) throw ConfigError("k", "must be >= 1");
  if (k > n_cand) {
    throw ConfigError("k", "K=" + std::to_string(k) + " exceeds the " +
                               std::to_string(n_cand) + " available candidates");
  }
  return Percent(BestRanks(scores, pairing, dir), k);
}

RecallReport rsum(const Matrix& scores, const PairingMap& pairing) {
  RecallReport rep;
  for (std::size_t d = 0; d < 2; ++d) {
    const Direction dir = kBothDirections[d];
    const std::size_t n_cand = Candidates(scores, dir);
    if (n_cand < kRecallKs.back()) {
      throw ConfigError("split", "R@10 needs at least 10 candidates, got " +
                                     std::to_string(n_cand));
    }
    const auto best = BestRanks(scores, pairing, dir);
    for (std::size_t j = 0; j < kRecallKs.size(); ++j) {
      rep.r_at[d][j] = Percent(best, kRecallKs[j]);
      rep.rsum += rep.r_at[d][j];
    }
  }
  return rep;
}

}  // namespace selhn
