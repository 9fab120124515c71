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

#include "selhn/data.h"

#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "selhn/error.h"

namespace selhn {
namespace {

namespace fs = std::filesystem;

std::string TempPath(const std::string& name) {
  return (fs::temp_directory_path() / ("selhn_data_test_" + name)).string();
}

SynthConfig Small() {
  SynthConfig c;
  c.n_items = 40;
  c.dim_v = 10;
  c.dim_t = 8;
  c.latent_dim = 5;
  c.regions = 3;
  c.words = 2;
  return c;
}

void ExpectSameData(const PairedDataset& a, const PairedDataset& b) {
  ASSERT_EQ(a.size(), b.size());
  EXPECT_EQ(a.dim_v, b.dim_v);
  EXPECT_EQ(a.dim_t, b.dim_t);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.images[i], b.images[i]) << "image " << i;
    EXPECT_EQ(a.texts[i], b.texts[i]) << "text " << i;
  }
}

TEST(SynthTest, SameConfigSameData) {
  ExpectSameData(gen_synthetic(Small()), gen_synthetic(Small()));
  SynthConfig other = Small();
  other.seed = 8;
  EXPECT_FALSE(gen_synthetic(Small()).images[0] == gen_synthetic(other).images[0]);
}

TEST(SynthTest, ShapesFollowTheConfig) {
  const PairedDataset ds = gen_synthetic(Small());
  ASSERT_EQ(ds.size(), 40u);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(ds.images[i].rows(), 3u);
    EXPECT_EQ(ds.images[i].cols(), 10u);
    EXPECT_EQ(ds.texts[i].rows(), 2u);
    EXPECT_EQ(ds.texts[i].cols(), 8u);
  }
}

TEST(SynthTest, NoiselessIdentityPairsAreIdentical) {
  SynthConfig c;
  c.n_items = 20;
  c.latent_dim = c.dim_v = c.dim_t = 6;
  c.regions = c.words = 1;
  c.noise_sigma = 0.0;
  c.confuser_fraction = 0.0;
  c.identity_maps = true;
  const PairedDataset ds = gen_synthetic(c);
  for (std::size_t i = 0; i < ds.size(); ++i) EXPECT_EQ(ds.images[i], ds.texts[i]);
}

TEST(SynthTest, InvalidConfigsAreRejected) {
  SynthConfig c = Small();
  c.confuser_fraction = 1.0;
  EXPECT_THROW(gen_synthetic(c), ConfigError);
  c = Small();
  c.identity_maps = true;
  EXPECT_THROW(gen_synthetic(c), ConfigError);
  c = Small();
  c.noise_sigma = -0.1;
  EXPECT_THROW(gen_synthetic(c), ConfigError);
}

TEST(HnsfTest, RoundTripAtSinglePrecision) {
  const PairedDataset ds = gen_synthetic(Small());
  const std::string path = TempPath("rt.hnsf");
  write_features(path, ds);
  const PairedDataset back = read_features(path);
  ASSERT_EQ(back.size(), ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t k = 0; k < ds.images[i].size(); ++k)
      EXPECT_EQ(back.images[i].values()[k],
                static_cast<double>(static_cast<float>(ds.images[i].values()[k])));
  }
  // A second trip is exact.
  write_features(path, back);
  ExpectSameData(read_features(path), back);
  fs::remove(path);
}

TEST(HnsfTest, EmptyDatasetIsAHeaderOnly) {
  PairedDataset empty;
  empty.dim_v = 4;
  empty.dim_t = 3;
  const std::string path = TempPath("empty.hnsf");
  write_features(path, empty);
  EXPECT_EQ(fs::file_size(path), 20u);
  EXPECT_EQ(read_features(path).size(), 0u);
  fs::remove(path);
}

TEST(HnsfTest, TruncationNamesTheItem) {
  const PairedDataset ds = gen_synthetic(Small());
  const std::string path = TempPath("trunc.hnsf");
  write_features(path, ds);
  // Header 20 bytes; each item is 2 + 3*10*4 + 2 + 2*8*4 = 188 bytes.
  fs::resize_file(path, 20 + 188 + 100);
  try {
    read_features(path);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("item 1"), std::string::npos) << e.what();
    EXPECT_GT(e.offset(), 20u + 188u);
  }
  fs::remove(path);
}

TEST(HnsfTest, BadMagicAndVersion) {
  const std::string path = TempPath("magic.hnsf");
  {
    std::ofstream out(path, std::ios::binary);
    out << "XXXX0000000000000000";
  }
  EXPECT_THROW(read_features(path), FormatError);
  {
    std::ofstream out(path, std::ios::binary);
    const char header[20] = {'H', 'N', 'S', 'F', 9, 0, 0, 0};
    out.write(header, sizeof(header));
  }
  EXPECT_THROW(read_features(path), FormatError);
  fs::remove(path);
}

TEST(TextFeaturesTest, ParsesAndRejects) {
  const std::string path = TempPath("feat.txt");
  {
    std::ofstream out(path);
    out << "# m;image values;n;text values\n"
        << "2;1,2,3,4;1;5,6\n"
        << "1;7,8;2;1,2,3,4\n";
  }
  const PairedDataset ds = read_text_features(path);
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.dim_v, 2u);
  EXPECT_EQ(ds.dim_t, 2u);
  EXPECT_EQ(ds.images[0], Matrix::FromRows({{1, 2}, {3, 4}}));
  EXPECT_EQ(ds.texts[1], Matrix::FromRows({{1, 2}, {3, 4}}));
  {
    std::ofstream out(path);
    out << "2;1,2,x;1;5\n";
  }
  EXPECT_THROW(read_text_features(path), FormatError);
  fs::remove(path);
}

TEST(SplitTest, TailAssignment) {
  PairedDataset ds = gen_synthetic(Small());
  assign_tail_splits(ds, 10, 5);
  EXPECT_EQ(ds.indices(Split::kTrain).size(), 25u);
  EXPECT_EQ(ds.indices(Split::kVal).front(), 25u);
  EXPECT_EQ(ds.indices(Split::kTest).front(), 35u);
  EXPECT_THROW(assign_tail_splits(ds, 30, 20), ConfigError);
  EXPECT_EQ(parse_split("val"), Split::kVal);
  EXPECT_THROW(parse_split("dev"), ConfigError);
}

std::vector<std::size_t> Iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

TEST(BatchIterTest, KeepsPairsDropsSingletons) {
  const auto ten = batch_iter(Iota(10), 4, 1, 0);
  ASSERT_EQ(ten.size(), 3u);
  EXPECT_EQ(ten[0].size(), 4u);
  EXPECT_EQ(ten[1].size(), 4u);
  EXPECT_EQ(ten[2].size(), 2u);
  const auto nine = batch_iter(Iota(9), 4, 1, 0);
  ASSERT_EQ(nine.size(), 2u);
}

TEST(BatchIterTest, DeterministicPerEpochAndAPermutation) {
  EXPECT_EQ(batch_iter(Iota(50), 8, 3, 2), batch_iter(Iota(50), 8, 3, 2));
  EXPECT_NE(batch_iter(Iota(50), 8, 3, 2), batch_iter(Iota(50), 8, 3, 3));
  std::set<std::size_t> seen;
  for (const auto& b : batch_iter(Iota(48), 8, 3, 0)) seen.insert(b.begin(), b.end());
  EXPECT_EQ(seen.size(), 48u);
  EXPECT_THROW(batch_iter(Iota(10), 1, 0, 0), ConfigError);
}

}  // namespace
}  // namespace selhn
