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

#ifndef SELHN_DATA_H_
#define SELHN_DATA_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "selhn/encoder.h"
#include "selhn/matrix.h"

namespace selhn {

enum class Split { kTrain, kVal, kTest };

std::string_view to_string(Split split);
Split parse_split(std::string_view name);

// Index-aligned image/text pairs: images[i] matches texts[i].
struct PairedDataset {
  std::size_t dim_v = 0;
  std::size_t dim_t = 0;
  std::vector<FeatureSet> images;
  std::vector<FeatureSet> texts;
  std::vector<Split> splits;
  // Generating latents (synthetic data only; empty when loaded from disk).
  Matrix latents;

  std::size_t size() const { return images.size(); }
  std::vector<std::size_t> indices(Split split) const;
};

// Tags the last n_test items as test, the n_val before them as val and the
// rest as train. Throws ConfigError if the counts exceed the dataset.
void assign_tail_splits(PairedDataset& dataset, std::size_t n_val,
                        std::size_t n_test);

struct SynthConfig {
  std::size_t n_items = 1000;
  std::size_t latent_dim = 16;
  std::size_t dim_v = 64;
  std::size_t dim_t = 64;
  std::size_t regions = 4;
  std::size_t words = 4;
  double noise_sigma = 0.1;
  // Fraction of items that belong to a planted near-duplicate pair.
  double confuser_fraction = 0.3;
  // Scale of the latent perturbation separating the two members of a pair.
  double confuser_perturb = 0.1;
  // Shared offset added to every feature coordinate.
  double feature_offset = 0.0;
  // Use identity mixing maps (requires dim_v == dim_t == latent_dim).
  bool identity_maps = false;
  std::uint64_t seed = 7;

  void Validate() const;  // throws ConfigError
};

// Item i draws z_i ~ N(0, I_k). Region m of its image is
// A_v^m z_i + offset + sigma * noise, word n of its caption A_t^n z_i +
// offset + sigma * noise, with fixed per-position maps A ~ N(0, 1/k).
// round(confuser_fraction * n / 2) disjoint pairs (a, b) are planted with
// z_b = z_a + confuser_perturb * noise, so about confuser_fraction of all
// items have a semantically close non-matching partner. Feature values are
// rounded to single precision so they survive a file round trip exactly.
PairedDataset gen_synthetic(const SynthConfig& cfg);

// "HNSF" feature file, little-endian:
//   char[4] "HNSF", u32 version = 1, u32 n_items, u32 D_v, u32 D_t, then per
//   item u16 M, M*D_v f32 values, u16 N, N*D_t f32 values.
// Split tags are not stored; every loaded item is tagged train.
void write_features(const std::string& path, const PairedDataset& dataset);
PairedDataset read_features(const std::string& path);

// Plain-text features, one item per line:
//   M;v_1,...,v_{M*D_v};N;w_1,...,w_{N*D_t}
// Blank lines and lines starting with '#' are skipped.
PairedDataset read_text_features(const std::string& path);

// Shuffles `indices` with a generator keyed by (seed, epoch) and cuts it
// into batches of batch_size. A final batch with fewer than two items is
// dropped. Throws ConfigError if batch_size < 2.
std::vector<std::vector<std::size_t>> batch_iter(
    std::span<const std::size_t> indices, std::size_t batch_size,
    std::uint64_t seed, std::uint64_t epoch);

}  // namespace selhn

#endif  // SELHN_DATA_H_
