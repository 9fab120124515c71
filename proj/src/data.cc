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

#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

#include "binary_io.h"
#include "selhn/error.h"

namespace selhn {
namespace {

constexpr char kFeatureMagic[] = "HNSF";
constexpr std::uint32_t kFeatureVersion = 1;

// Stream ids for the independent random draws of gen_synthetic.
enum Stream : std::uint64_t { kMaps = 1, kLatents, kPairs, kNoise };

std::vector<Matrix> MixingMaps(std::size_t count, std::size_t dim,
                               const SynthConfig& cfg, std::uint64_t salt) {
  std::vector<Matrix> maps;
  Rng rng(mix_seed(cfg.seed, kMaps, salt));
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.latent_dim));
  for (std::size_t m = 0; m < count; ++m) {
    if (cfg.identity_maps) {
      maps.push_back(Matrix::Identity(dim));
      continue;
    }
    Matrix a(dim, cfg.latent_dim);
    for (double& v : a.values()) v = scale * rng.normal();
    maps.push_back(std::move(a));
  }
  return maps;
}

FeatureSet Render(const std::vector<Matrix>& maps, std::span<const double> z,
                  const SynthConfig& cfg, Rng& noise) {
  const std::size_t dim = maps.front().rows();
  FeatureSet f(maps.size(), dim);
  for (std::size_t m = 0; m < maps.size(); ++m) {
    for (std::size_t r = 0; r < dim; ++r) {
      double acc = 0.0;
      for (std::size_t k = 0; k < z.size(); ++k) acc += maps[m](r, k) * z[k];
      const double v = acc + cfg.feature_offset + cfg.noise_sigma * noise.normal();
      f(m, r) = static_cast<double>(static_cast<float>(v));
    }
  }
  return f;
}

void WriteSet(internal::ByteWriter& w, const FeatureSet& f) {
  if (f.rows() > UINT16_MAX) throw InputError("write_features: more than 65535 vectors in an item");
  w.u16(static_cast<std::uint16_t>(f.rows()));
  for (double v : f.values()) w.f32(static_cast<float>(v));
}

FeatureSet ReadSet(internal::ByteReader& r, std::size_t dim, std::size_t item) {
  const std::uint64_t at = r.offset();
  const std::uint16_t count = r.u16();
  if (count == 0)
    throw FormatError("item " + std::to_string(item) + " has an empty feature set", at);
  FeatureSet f(count, dim);
  for (double& v : f.values()) v = static_cast<double>(r.f32());
  return f;
}

std::vector<double> ParseFloats(std::string_view text, std::size_t line) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find(',', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view tok = text.substr(pos, end - pos);
    while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
    while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\r')) tok.remove_suffix(1);
    double v = 0.0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size() || !std::isfinite(v))
      throw FormatError("line " + std::to_string(line) + ": bad number '" + std::string(tok) + "'");
    out.push_back(v);
    pos = end + 1;
  }
  return out;
}

std::size_t ParseCount(std::string_view text, std::size_t line) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size() || v == 0)
    throw FormatError("line " + std::to_string(line) + ": bad vector count '" + std::string(text) + "'");
  return v;
}

}  // namespace

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

Split parse_split(std::string_view name) {
  for (Split s : {Split::kTrain, Split::kVal, Split::kTest})
    if (to_string(s) == name) return s;
  throw ConfigError("split", "unknown split '" + std::string(name) + "' (expected train|val|test)");
}

std::vector<std::size_t> PairedDataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < splits.size(); ++i)
    if (splits[i] == split) out.push_back(i);
  return out;
}

void assign_tail_splits(PairedDataset& dataset, std::size_t n_val,
                        std::size_t n_test) {
  const std::size_t n = dataset.size();
  if (n_val + n_test > n) {
    throw ConfigError("val_items", "val_items + test_items (" +
                                       std::to_string(n_val + n_test) +
                                       ") exceeds dataset size " + std::to_string(n));
  }
  dataset.splits.assign(n, Split::kTrain);
  for (std::size_t i = n - n_test - n_val; i < n - n_test; ++i) dataset.splits[i] = Split::kVal;
  for (std::size_t i = n - n_test; i < n; ++i) dataset.splits[i] = Split::kTest;
}

void SynthConfig::Validate() const {
  if (n_items == 0) throw ConfigError("synth_items", "must be >= 1");
  if (latent_dim == 0) throw ConfigError("synth_latent_dim", "must be >= 1");
  if (dim_v == 0) throw ConfigError("synth_dim_v", "must be >= 1");
  if (dim_t == 0) throw ConfigError("synth_dim_t", "must be >= 1");
  if (regions == 0 || regions > UINT16_MAX) throw ConfigError("synth_regions", "must be in [1, 65535]");
  if (words == 0 || words > UINT16_MAX) throw ConfigError("synth_words", "must be in [1, 65535]");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
    throw ConfigError("synth_noise", "must be >= 0");
  if (!(confuser_fraction >= 0.0 && confuser_fraction < 1.0))
    throw ConfigError("synth_confuser_fraction", "must lie in [0, 1)");
  if (!(confuser_perturb >= 0.0) || !std::isfinite(confuser_perturb))
    throw ConfigError("synth_confuser_perturb", "must be >= 0");
  if (!std::isfinite(feature_offset)) throw ConfigError("synth_offset", "must be finite");
  if (identity_maps && (dim_v != latent_dim || dim_t != latent_dim))
    throw ConfigError("synth_identity_maps", "requires dim_v == dim_t == latent_dim");
}

PairedDataset gen_synthetic(const SynthConfig& cfg) {
  cfg.Validate();
  const std::size_t n = cfg.n_items;
  const std::size_t k = cfg.latent_dim;

  PairedDataset ds;
  ds.dim_v = cfg.dim_v;
  ds.dim_t = cfg.dim_t;
  ds.latents = Matrix(n, k);
  Rng latent_rng(mix_seed(cfg.seed, kLatents));
  for (double& v : ds.latents.values()) v = latent_rng.normal();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng pair_rng(mix_seed(cfg.seed, kPairs));
  pair_rng.shuffle(std::span<std::size_t>(order));
  const auto pairs = static_cast<std::size_t>(
      std::llround(cfg.confuser_fraction * static_cast<double>(n) / 2.0));
  for (std::size_t p = 0; p < pairs && 2 * p + 1 < n; ++p) {
    auto src = ds.latents.row(order[2 * p]);
    auto dst = ds.latents.row(order[2 * p + 1]);
    for (std::size_t j = 0; j < k; ++j)
      dst[j] = src[j] + cfg.confuser_perturb * pair_rng.normal();
  }

  const auto image_maps = MixingMaps(cfg.regions, cfg.dim_v, cfg, 0);
  const auto text_maps = MixingMaps(cfg.words, cfg.dim_t, cfg, 1);
  Rng noise(mix_seed(cfg.seed, kNoise));
  for (std::size_t i = 0; i < n; ++i) {
    ds.images.push_back(Render(image_maps, ds.latents.row(i), cfg, noise));
    ds.texts.push_back(Render(text_maps, ds.latents.row(i), cfg, noise));
  }
  ds.splits.assign(n, Split::kTrain);
  return ds;
}

void write_features(const std::string& path, const PairedDataset& dataset) {
  internal::ByteWriter w;
  w.bytes({kFeatureMagic, 4});
  w.u32(kFeatureVersion);
  w.u32(static_cast<std::uint32_t>(dataset.size()));
  w.u32(static_cast<std::uint32_t>(dataset.dim_v));
  w.u32(static_cast<std::uint32_t>(dataset.dim_t));
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset.images[i].cols() != dataset.dim_v || dataset.texts[i].cols() != dataset.dim_t)
      throw InputError("write_features: item " + std::to_string(i) + " has inconsistent dims");
    WriteSet(w, dataset.images[i]);
    WriteSet(w, dataset.texts[i]);
  }
  w.WriteFile(path);
}

PairedDataset read_features(const std::string& path) {
  auto r = internal::ByteReader::FromFile(path);
  r.set_context("header");
  if (r.bytes(4) != std::string_view(kFeatureMagic, 4))
    throw FormatError("'" + path + "' is not an HNSF feature file (bad magic)", 0);
  const std::uint32_t version = r.u32();
  if (version != kFeatureVersion)
    throw FormatError("unsupported HNSF version " + std::to_string(version), 4);
  const std::uint32_t n = r.u32();
  PairedDataset ds;
  ds.dim_v = r.u32();
  ds.dim_t = r.u32();
  if (n > 0 && (ds.dim_v == 0 || ds.dim_t == 0))
    throw FormatError("zero feature dimension", 12);
  for (std::uint32_t i = 0; i < n; ++i) {
    r.set_context("item " + std::to_string(i));
    ds.images.push_back(ReadSet(r, ds.dim_v, i));
    ds.texts.push_back(ReadSet(r, ds.dim_t, i));
  }
  if (!r.at_end()) throw FormatError("trailing bytes after last item", r.offset());
  ds.splits.assign(n, Split::kTrain);
  return ds;
}

PairedDataset read_text_features(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  PairedDataset ds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#' || line == "\r") continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (std::size_t pos; (pos = rest.find(';')) != std::string_view::npos;) {
      fields.push_back(rest.substr(0, pos));
      rest.remove_prefix(pos + 1);
    }
    fields.push_back(rest);
    if (fields.size() != 4)
      throw FormatError("line " + std::to_string(line_no) + ": expected 4 ';'-separated fields");
    const std::size_t m = ParseCount(fields[0], line_no);
    const auto img = ParseFloats(fields[1], line_no);
    const std::size_t nw = ParseCount(fields[2], line_no);
    const auto txt = ParseFloats(fields[3], line_no);
    if (img.size() % m != 0 || txt.size() % nw != 0)
      throw FormatError("line " + std::to_string(line_no) + ": value count not divisible by vector count");
    const std::size_t dv = img.size() / m;
    const std::size_t dt = txt.size() / nw;
    if (ds.size() == 0) {
      ds.dim_v = dv;
      ds.dim_t = dt;
    } else if (dv != ds.dim_v || dt != ds.dim_t) {
      throw FormatError("line " + std::to_string(line_no) + ": feature dimension differs from earlier items");
    }
    FeatureSet fi(m, dv), ft(nw, dt);
    std::copy(img.begin(), img.end(), fi.values().begin());
    std::copy(txt.begin(), txt.end(), ft.values().begin());
    ds.images.push_back(std::move(fi));
    ds.texts.push_back(std::move(ft));
  }
  ds.splits.assign(ds.size(), Split::kTrain);
  return ds;
}

std::vector<std::vector<std::size_t>> batch_iter(
    std::span<const std::size_t> indices, std::size_t batch_size,
    std::uint64_t seed, std::uint64_t epoch) {
  if (batch_size < 2) throw ConfigError("batch", "must be >= 2");
  std::vector<std::size_t> order(indices.begin(), indices.end());
  Rng rng(mix_seed(seed, epoch, 0x5eed));
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t lo = 0; lo < order.size(); lo += batch_size) {
    const std::size_t hi = std::min(order.size(), lo + batch_size);
    if (hi - lo < 2) break;
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(lo),
                         order.begin() + static_cast<std::ptrdiff_t>(hi));
  }
  return batches;
}

}  // namespace selhn
