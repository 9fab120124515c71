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

// Experiment driver: configuration, the training loop, evaluation and the
// gradient-check sweep.

#ifndef SELHN_HARNESS_H_
#define SELHN_HARNESS_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "selhn/data.h"
#include "selhn/encoder.h"
#include "selhn/losses.h"
#include "selhn/metrics.h"
#include "selhn/optim.h"

namespace selhn {

enum class OptimizerKind { kAdamW, kSgd };

struct RunConfig {
  LossKind loss = LossKind::kSelHn;
  LossHyper hyper;  // margin 0.2, epsilon 0.01

  EncoderKind image_arch = EncoderKind::kRmlp;
  EncoderKind text_arch = EncoderKind::kFc;
  Pooling pooling = Pooling::kMean;
  std::size_t embed_dim = 32;
  bool mlp_activation = false;

  OptimizerKind optimizer = OptimizerKind::kAdamW;
  AdamWHyper adam;  // lr 5e-4, betas (0.9, 0.999), eps 1e-8, wd 1e-4
  // Epoch at which the learning rate drops by decay_factor; unset means
  // half of `epochs`, equal to `epochs` means never.
  std::optional<std::size_t> decay_epoch;
  double decay_factor = 10.0;

  std::size_t batch = 128;
  std::size_t epochs = 30;
  std::uint64_t seed = 1;

  // Feature file (HNSF, or the text format when it ends in ".txt"); empty
  // means generate `synth`.
  std::string data;
  SynthConfig synth = DefaultSynth();
  std::size_t val_items = 500;
  std::size_t test_items = 500;

  std::size_t eval_every = 1;  // 0 disables evaluation
  std::string out = "run";
  bool verbose = false;  // also log every step to metrics_steps.csv

  static SynthConfig DefaultSynth();

  std::size_t resolved_decay_epoch() const {
    return decay_epoch ? *decay_epoch : epochs / 2;
  }
  LrSchedule schedule() const;
  EncoderArch image_encoder(std::size_t input_dim) const;
  EncoderArch text_encoder(std::size_t input_dim) const;

  // Throws ConfigError naming the offending key.
  void Validate() const;
};

// Applies "key = value" lines from `file_text` and then `overrides` (later
// wins) on top of the defaults, and validates. '#' starts a comment.
// Unknown keys and unparsable values throw ConfigError naming the key.
RunConfig parse_config(const std::string& file_text,
                       const std::vector<std::pair<std::string, std::string>>& overrides);

// Same, reading the file from disk when `path` is non-empty.
RunConfig load_config(const std::string& path,
                      const std::vector<std::pair<std::string, std::string>>& overrides);

// Every key with its resolved value, one "key = value" line each; feeding
// the text back to parse_config reproduces the config.
std::string resolved_config_text(const RunConfig& cfg);

// All accepted configuration keys, in echo order.
std::vector<std::string> config_keys();

struct MetricsRow {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double loss_value = 0.0;
  double branch_fraction_triplet = 0.0;
  double branch_fraction_hn = 0.0;
  double mean_delta_s_i2t = 0.0;
  double mean_delta_s_t2i = 0.0;
  double fraction_delta_s_below_eps = 0.0;
  double grad_norm_first_layer_img = 0.0;
  double grad_norm_first_layer_txt = 0.0;
  std::optional<RecallReport> recall;
  double lr = 0.0;
};

// Column names of metrics.csv, in order.
const std::vector<std::string>& metrics_columns();
std::string metrics_csv_line(const MetricsRow& row);

// Per-batch record passed to TrainObserver.
struct StepRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;
  const std::vector<std::size_t>* indices = nullptr;
  const SimMatrix* sims = nullptr;
  const LossResult* loss = nullptr;
};

struct TrainObserver {
  virtual ~TrainObserver() = default;
  virtual void OnStep(const StepRecord&) {}
};

struct TrainResult {
  std::vector<MetricsRow> rows;
  std::optional<RecallReport> best;
  std::size_t best_epoch = 0;
  std::optional<RecallReport> final_eval;
};

// Loads or generates the dataset named by cfg and tags its splits.
PairedDataset load_dataset(const RunConfig& cfg);

// Trains both encoders and writes, under cfg.out: config.resolved,
// metrics.csv, ckpt_final, ckpt_best (when evaluation ran) and, with
// verbose, metrics_steps.csv. Throws NumericalError after writing
// nan_dump.txt if a loss or gradient turns non-finite.
TrainResult run_training(const RunConfig& cfg, TrainObserver* observer = nullptr);

// Same loop on an already-loaded dataset.
TrainResult run_training(const RunConfig& cfg, const PairedDataset& dataset,
                         TrainObserver* observer = nullptr);

// Eval-mode embeddings of the given items.
Matrix embed_items(const EncoderState& encoder, const std::vector<FeatureSet>& sets,
                   const std::vector<std::size_t>& items);

// Recall report of a split with diagonal pairing.
RecallReport evaluate_split(const EncoderState& image, const EncoderState& text,
                            const PairedDataset& dataset, Split split);

// Loads a two-encoder checkpoint and evaluates `split`. Dimension
// mismatches throw ConfigError naming both shapes.
RecallReport run_eval(const std::string& checkpoint, const PairedDataset& dataset,
                      Split split);

void write_recall_csv(const std::string& path, const RecallReport& report);

struct GradcheckOptions {
  std::size_t seeds = 20;       // non-skipped instances required per row
  std::size_t max_attempts = 200;
  double step = 1e-6;
  double tolerance = 1e-4;
  std::size_t batch = 4;
  std::size_t input_dim = 6;
  std::size_t embed_dim = 4;
  std::size_t vectors = 3;      // M = N
  // Large enough that random instances exercise both selhn branches.
  LossHyper hyper{0.2, 0.1};
  std::uint64_t seed = 2024;
  // Test hook: scales the analytic gradient of this (loss, arch) row.
  std::optional<std::pair<LossKind, EncoderKind>> corrupt;
};

struct GradcheckRow {
  LossKind loss = LossKind::kTriplet;
  EncoderKind arch = EncoderKind::kFc;
  std::size_t seeds_checked = 0;
  std::size_t seeds_skipped = 0;
  double max_rel_error = 0.0;
  bool pass = false;
};

// Parameter-level central-difference check of the whole pipeline (both
// encoders in train mode, similarity, loss) for every loss x architecture.
std::vector<GradcheckRow> run_gradcheck(const GradcheckOptions& options);

void print_gradcheck(std::ostream& os, const std::vector<GradcheckRow>& rows);

}  // namespace selhn

#endif  // SELHN_HARNESS_H_
