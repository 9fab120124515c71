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

#include <gtest/gtest.h>

#include "oracles.h"
#include "selhn/error.h"

namespace selhn {
namespace {

constexpr Direction kI2t = Direction::kImageToText;
constexpr Direction kT2i = Direction::kTextToImage;

Matrix RandomScores(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  return gaussian(rows, cols, seed);
}

TEST(RecallTest, HandRanking) {
  const Matrix s = Matrix::FromRows({{0.9, 0.1, 0.2}, {0.3, 0.2, 0.8}, {0.1, 0.5, 0.4}});
  const PairingMap p = PairingMap::Diagonal(3);
  EXPECT_NEAR(recall_at_k(s, p, 1, kI2t), 100.0 / 3.0, 1e-12);
  EXPECT_NEAR(recall_at_k(s, p, 2, kI2t), 200.0 / 3.0, 1e-12);
  EXPECT_EQ(recall_at_k(s, p, 3, kI2t), 100.0);
}

TEST(RecallTest, TiesRankTheLowerIndexFirst) {
  const Matrix s = Matrix::FromRows({{0.5, 0.5}, {0.5, 0.5}});
  const PairingMap p = PairingMap::Diagonal(2);
  EXPECT_EQ(recall_at_k(s, p, 1, kI2t), 50.0);
  EXPECT_EQ(recall_at_k(s, p, 1, kT2i), 50.0);
}

TEST(RecallTest, KOutOfRange) {
  const PairingMap p = PairingMap::Diagonal(3);
  EXPECT_THROW(recall_at_k(Matrix(3, 3), p, 4, kI2t), ConfigError);
  EXPECT_THROW(recall_at_k(Matrix(3, 3), p, 0, kI2t), ConfigError);
}

TEST(RsumTest, PerfectAndInverted) {
  const std::size_t n = 12;
  Matrix good(n, n), bad(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    good(i, i) = 1.0;
    bad(i, i) = -1.0;
  }
  const PairingMap p = PairingMap::Diagonal(n);
  EXPECT_EQ(rsum(good, p).rsum, 600.0);
  const RecallReport r = rsum(bad, p);
  EXPECT_EQ(r.rsum, 0.0);
  for (const auto& dir : r.r_at)
    for (double v : dir) EXPECT_EQ(v, 0.0);
}

TEST(RsumTest, FewerThanTenCandidates) {
  EXPECT_THROW(rsum(Matrix(9, 9), PairingMap::Diagonal(9)), ConfigError);
}

TEST(RsumTest, EqualsSixRecallCalls) {
  const Matrix s = RandomScores(20, 20, 3);
  const PairingMap p = PairingMap::Diagonal(20);
  const RecallReport r = rsum(s, p);
  double sum = 0.0;
  for (Direction dir : kBothDirections)
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_EQ(r.at(dir, j), recall_at_k(s, p, kRecallKs[j], dir));
      sum += r.at(dir, j);
    }
  EXPECT_EQ(r.rsum, sum);
}

TEST(RecallTest, MatchesSortOracleWithMultiplePositives) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    // 5 texts per image, as in caption datasets.
    const std::size_t images = 4 + seed % 5;
    const std::size_t texts = 5 * images;
    const Matrix s = RandomScores(images, texts, seed);
    std::vector<std::vector<std::size_t>> i2t(images);
    std::vector<std::vector<std::size_t>> t2i(texts);
    for (std::size_t t = 0; t < texts; ++t) {
      i2t[t / 5].push_back(t);
      t2i[t].push_back(t / 5);
    }
    const PairingMap p = PairingMap::FromImageToTexts(i2t, texts);
    const oracle::Grid g = oracle::ToGrid(s);
    for (std::size_t k : {1u, 2u, 4u}) {
      EXPECT_EQ(recall_at_k(s, p, k, kI2t), oracle::Recall(g, i2t, k));
      EXPECT_EQ(recall_at_k(s, p, k, kT2i), oracle::Recall(oracle::Transposed(g), t2i, k));
    }
  }
}

TEST(RecallTest, InvariantUnderIncreasingTransform) {
  const Matrix s = RandomScores(15, 15, 9);
  Matrix t = s;
  for (double& x : t.values()) x = std::exp(3.0 * x) + 1.0;
  const PairingMap p = PairingMap::Diagonal(15);
  EXPECT_EQ(rsum(s, p).r_at, rsum(t, p).r_at);
}

TEST(RecallTest, MonotoneInK) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const RecallReport r = rsum(RandomScores(25, 25, seed), PairingMap::Diagonal(25));
    for (const auto& dir : r.r_at) {
      EXPECT_LE(dir[0], dir[1]);
      EXPECT_LE(dir[1], dir[2]);
    }
    EXPECT_GE(r.rsum, 0.0);
    EXPECT_LE(r.rsum, 600.0);
  }
}

TEST(PairingTest, RejectsUnmatchedItems) {
  EXPECT_THROW(PairingMap::FromImageToTexts({{0}, {}}, 2), InputError);
  EXPECT_THROW(PairingMap::FromImageToTexts({{0}, {0}}, 2), InputError);
  EXPECT_THROW(PairingMap::FromImageToTexts({{0}, {2}}, 2), InputError);
}

}  // namespace
}  // namespace selhn
