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

// Set encoders with hand-written backward passes.
//
// Each item is a set of D-dimensional feature vectors (image regions or
// words). Every vector goes through the same stack:
//
//   fc    x = W r + b
//   mlp   y = MLP(x)
//   rmlp  y = x + MLP(x)
//
// where MLP is the bottleneck BN(d) -> Linear(d, d/2) -> BN(d/2) ->
// [ReLU] -> Linear(d/2, d). The ReLU is off unless mlp_activation is set.
// The per-vector outputs are pooled (mean or max) into one row per item and
// L2-normalized.
//
// Batch-norm statistics are taken over all feature vectors in the batch.
// Forward never mutates the state; call apply_running_stats with the tape
// to advance the running estimates after a training-mode forward.

#ifndef SELHN_ENCODER_H_
#define SELHN_ENCODER_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "selhn/matrix.h"

namespace selhn {

enum class EncoderKind { kFc, kMlp, kRmlp };
enum class Pooling { kMean, kMax };
enum class Mode { kTrain, kEval };

std::string_view to_string(EncoderKind kind);
std::string_view to_string(Pooling pooling);
EncoderKind parse_encoder_kind(std::string_view name, const std::string& key);
Pooling parse_pooling(std::string_view name, const std::string& key);

struct EncoderArch {
  EncoderKind kind = EncoderKind::kFc;
  std::size_t input_dim = 0;
  std::size_t embed_dim = 0;
  Pooling pooling = Pooling::kMean;
  bool mlp_activation = false;

  bool has_mlp() const { return kind != EncoderKind::kFc; }
  std::size_t hidden_dim() const { return embed_dim / 2; }

  // Throws ConfigError (zero dims, odd embed_dim with an MLP).
  void Validate() const;

  bool operator==(const EncoderArch&) const = default;
};

// One item's input vectors, one per row.
using FeatureSet = Matrix;

struct LinearLayer {
  Matrix weight;  // in x out
  Matrix bias;    // 1 x out
};

struct BatchNormLayer {
  Matrix gamma;         // 1 x n
  Matrix beta;          // 1 x n
  Matrix running_mean;  // 1 x n
  Matrix running_var;   // 1 x n, unbiased estimate
  double eps = 1e-5;
  double momentum = 0.1;
};

struct MlpBlock {
  BatchNormLayer bn1;
  LinearLayer fc1;
  BatchNormLayer bn2;
  LinearLayer fc2;
};

class EncoderState {
 public:
  EncoderArch arch;
  LinearLayer fc;
  std::optional<MlpBlock> mlp;
  Mode mode = Mode::kTrain;

  // Trainable tensors in declaration order:
  //   fc.weight fc.bias [bn1.gamma bn1.beta fc1.weight fc1.bias
  //                      bn2.gamma bn2.beta fc2.weight fc2.bias]
  // Mutable access invalidates outstanding forward tapes.
  std::vector<Matrix*> trainable();
  std::vector<const Matrix*> trainable() const;
  std::vector<std::string> trainable_names() const;

  // Every stored tensor, including batch-norm running statistics, in
  // checkpoint order.
  std::vector<Matrix*> all_tensors();
  std::vector<const Matrix*> all_tensors() const;

  std::uint64_t version() const { return version_; }

 private:
  std::uint64_t version_ = 0;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases, gamma = 1,
// beta = 0, running statistics (0, 1).
EncoderState init_params(const EncoderArch& arch, std::uint64_t seed);

// Gradients aligned with EncoderState::trainable().
struct EncoderGrads {
  std::vector<Matrix> tensors;

  const Matrix& first_layer_weight() const { return tensors.at(0); }
};

struct BatchNormCache {
  Mode mode = Mode::kTrain;
  Matrix x_hat;
  std::vector<double> mean;
  std::vector<double> var;      // biased batch variance (train mode)
  std::vector<double> inv_std;
};

// y = gamma * (x - mu) / sqrt(var + eps) + beta with batch statistics in
// train mode and running statistics in eval mode. Train mode needs >= 2 rows.
Matrix batchnorm_forward(const Matrix& x, const BatchNormLayer& bn, Mode mode,
                         BatchNormCache* cache);

struct BatchNormGrads {
  Matrix d_x;
  Matrix d_gamma;
  Matrix d_beta;
};

BatchNormGrads batchnorm_backward(const Matrix& d_y, const BatchNormLayer& bn,
                                  const BatchNormCache& cache);

// running <- (1 - momentum) running + momentum batch (unbiased variance).
void update_running_stats(BatchNormLayer& bn, const BatchNormCache& cache);

struct ForwardTape {
  Mode mode = Mode::kTrain;
  std::uint64_t state_version = 0;
  bool consumed = false;

  Matrix input;                      // all feature vectors, R x D
  std::vector<std::size_t> offsets;  // item b owns rows [offsets[b], offsets[b+1])
  Matrix fc_out;                     // R x d
  BatchNormCache bn1;
  Matrix bn1_out;                    // R x d
  BatchNormCache bn2;
  Matrix hidden;                     // R x d/2, input of fc2 (after activation)
  Matrix hidden_pre;                 // R x d/2, bn2 output before activation
  std::vector<std::size_t> max_rows; // B x d winning row per column (max pooling)
  NormalizeTape norm;
};

// Returns one unit row per item. Throws InputError on a feature dimension
// mismatch or a train-mode batch with fewer than two items.
std::pair<Matrix, ForwardTape> encoder_forward(
    const EncoderState& state, const std::vector<const FeatureSet*>& batch);

// Advances batch-norm running statistics from a train-mode tape.
void apply_running_stats(EncoderState& state, const ForwardTape& tape);

// Exact parameter gradients for d_embeddings = dL/d(output rows). Each tape
// may be used once and only with the state version it was recorded against.
EncoderGrads encoder_backward(const EncoderState& state, ForwardTape& tape,
                              const Matrix& d_embeddings);

// Binary checkpoint ("HNSC"):
//   char[4] "HNSC", u32 version (1), u32 encoder count, then per encoder
//   u32 kind (0 fc, 1 mlp, 2 rmlp), u32 pooling (0 mean, 1 max),
//   u32 mlp_activation, u32 input_dim, u32 embed_dim, u32 tensor count,
//   and per tensor u32 rows, u32 cols, rows*cols f64 values, in
//   all_tensors() order. Integers and floats are little-endian.
void save_checkpoint(const std::string& path,
                     const std::vector<const EncoderState*>& encoders);
std::vector<EncoderState> load_checkpoint(const std::string& path);

}  // namespace selhn

#endif  // SELHN_ENCODER_H_
