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

#include "selhn/encoder.h"

#include <cmath>

#include "binary_io.h"
#include "selhn/error.h"
#include "selhn/kernels.h"

namespace selhn {
namespace {

constexpr char kCheckpointMagic[] = "HNSC";
constexpr std::uint32_t kCheckpointVersion = 1;

void AddRow(Matrix& m, const Matrix& bias) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) row[c] += bias(0, c);
  }
}

Matrix LinearForward(const Matrix& x, const LinearLayer& layer) {
  Matrix out = matmul(x, layer.weight);
  AddRow(out, layer.bias);
  return out;
}

// Returns dL/dx and appends (dW, db) to grads.
Matrix LinearBackward(const Matrix& x, const LinearLayer& layer,
                      const Matrix& d_out, Matrix& d_weight, Matrix& d_bias) {
  d_weight = matmul_atb(x, d_out);
  kernels::column_sums(d_out, d_bias);
  return matmul_abt(d_out, layer.weight);
}

Matrix Relu(const Matrix& x) {
  Matrix y = x;
  for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
  return y;
}

Matrix Uniform(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(-bound, bound);
  return m;
}

BatchNormLayer FreshBatchNorm(std::size_t n) {
  BatchNormLayer bn;
  bn.gamma = Matrix(1, n, 1.0);
  bn.beta = Matrix(1, n, 0.0);
  bn.running_mean = Matrix(1, n, 0.0);
  bn.running_var = Matrix(1, n, 1.0);
  return bn;
}

LinearLayer FreshLinear(std::size_t in, std::size_t out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  return {Uniform(in, out, bound, rng), Matrix(1, out, 0.0)};
}

// Gradient of the MLP branch output with respect to its input; fills the
// eight MLP slots of grads starting at index 2.
Matrix MlpBackward(const MlpBlock& mlp, const EncoderArch& arch,
                   const ForwardTape& tape, const Matrix& d_out,
                   std::vector<Matrix>& grads) {
  Matrix d_hidden = LinearBackward(tape.hidden, mlp.fc2, d_out, grads[8], grads[9]);
  if (arch.mlp_activation) {
    for (std::size_t i = 0; i < d_hidden.size(); ++i)
      if (!(tape.hidden_pre.values()[i] > 0.0)) d_hidden.values()[i] = 0.0;
  }
  BatchNormGrads bn2 = batchnorm_backward(d_hidden, mlp.bn2, tape.bn2);
  grads[6] = std::move(bn2.d_gamma);
  grads[7] = std::move(bn2.d_beta);
  Matrix d_bn1_out =
      LinearBackward(tape.bn1_out, mlp.fc1, bn2.d_x, grads[4], grads[5]);
  BatchNormGrads bn1 = batchnorm_backward(d_bn1_out, mlp.bn1, tape.bn1);
  grads[2] = std::move(bn1.d_gamma);
  grads[3] = std::move(bn1.d_beta);
  return std::move(bn1.d_x);
}

std::uint32_t ToU32(std::size_t v, const char* what) {
  if (v > UINT32_MAX) throw InputError(std::string(what) + " exceeds 32 bits");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

std::string_view to_string(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::kFc: return "fc";
    case EncoderKind::kMlp: return "mlp";
    case EncoderKind::kRmlp: return "rmlp";
  }
  return "?";
}

std::string_view to_string(Pooling pooling) {
  return pooling == Pooling::kMean ? "mean" : "max";
}

EncoderKind parse_encoder_kind(std::string_view name, const std::string& key) {
  for (EncoderKind k : {EncoderKind::kFc, EncoderKind::kMlp, EncoderKind::kRmlp})
    if (to_string(k) == name) return k;
  throw ConfigError(key, "unknown architecture '" + std::string(name) +
                             "' (expected fc|mlp|rmlp)");
}

Pooling parse_pooling(std::string_view name, const std::string& key) {
  if (name == "mean") return Pooling::kMean;
  if (name == "max") return Pooling::kMax;
  throw ConfigError(key, "unknown pooling '" + std::string(name) +
                             "' (expected mean|max)");
}

void EncoderArch::Validate() const {
  if (input_dim == 0) throw ConfigError("input_dim", "must be >= 1");
  if (embed_dim == 0) throw ConfigError("embed_dim", "must be >= 1");
  if (has_mlp() && embed_dim % 2 != 0)
    throw ConfigError("embed_dim", "must be even for mlp/rmlp encoders");
}

std::vector<Matrix*> EncoderState::trainable() {
  ++version_;
  std::vector<Matrix*> out = {&fc.weight, &fc.bias};
  if (mlp) {
    out.insert(out.end(), {&mlp->bn1.gamma, &mlp->bn1.beta, &mlp->fc1.weight,
                           &mlp->fc1.bias, &mlp->bn2.gamma, &mlp->bn2.beta,
                           &mlp->fc2.weight, &mlp->fc2.bias});
  }
  return out;
}

std::vector<const Matrix*> EncoderState::trainable() const {
  std::vector<const Matrix*> out = {&fc.weight, &fc.bias};
  if (mlp) {
    out.insert(out.end(), {&mlp->bn1.gamma, &mlp->bn1.beta, &mlp->fc1.weight,
                           &mlp->fc1.bias, &mlp->bn2.gamma, &mlp->bn2.beta,
                           &mlp->fc2.weight, &mlp->fc2.bias});
  }
  return out;
}

std::vector<std::string> EncoderState::trainable_names() const {
  std::vector<std::string> out = {"fc.weight", "fc.bias"};
  if (mlp) {
    out.insert(out.end(), {"bn1.gamma", "bn1.beta", "fc1.weight", "fc1.bias",
                           "bn2.gamma", "bn2.beta", "fc2.weight", "fc2.bias"});
  }
  return out;
}

std::vector<Matrix*> EncoderState::all_tensors() {
  ++version_;
  std::vector<Matrix*> out = {&fc.weight, &fc.bias};
  if (mlp) {
    out.insert(out.end(),
               {&mlp->bn1.gamma, &mlp->bn1.beta, &mlp->bn1.running_mean,
                &mlp->bn1.running_var, &mlp->fc1.weight, &mlp->fc1.bias,
                &mlp->bn2.gamma, &mlp->bn2.beta, &mlp->bn2.running_mean,
                &mlp->bn2.running_var, &mlp->fc2.weight, &mlp->fc2.bias});
  }
  return out;
}

std::vector<const Matrix*> EncoderState::all_tensors() const {
  std::vector<const Matrix*> out = {&fc.weight, &fc.bias};
  if (mlp) {
    out.insert(out.end(),
               {&mlp->bn1.gamma, &mlp->bn1.beta, &mlp->bn1.running_mean,
                &mlp->bn1.running_var, &mlp->fc1.weight, &mlp->fc1.bias,
                &mlp->bn2.gamma, &mlp->bn2.beta, &mlp->bn2.running_mean,
                &mlp->bn2.running_var, &mlp->fc2.weight, &mlp->fc2.bias});
  }
  return out;
}

EncoderState init_params(const EncoderArch& arch, std::uint64_t seed) {
  arch.Validate();
  Rng rng(seed);
  EncoderState state;
  state.arch = arch;
  state.fc = FreshLinear(arch.input_dim, arch.embed_dim, rng);
  if (arch.has_mlp()) {
    MlpBlock mlp;
    mlp.bn1 = FreshBatchNorm(arch.embed_dim);
    mlp.fc1 = FreshLinear(arch.embed_dim, arch.hidden_dim(), rng);
    mlp.bn2 = FreshBatchNorm(arch.hidden_dim());
    mlp.fc2 = FreshLinear(arch.hidden_dim(), arch.embed_dim, rng);
    state.mlp = std::move(mlp);
  }
  return state;
}

Matrix batchnorm_forward(const Matrix& x, const BatchNormLayer& bn, Mode mode,
                         BatchNormCache* cache) {
  const std::size_t n = x.rows();
  const std::size_t cols = x.cols();
  if (bn.gamma.cols() != cols)
    throw InputError("batchnorm_forward: feature width mismatch");
  if (mode == Mode::kTrain && n < 2)
    throw InputError("batchnorm_forward: degenerate batch (train mode needs >= 2 rows)");

  std::vector<double> mean(cols), var(cols), inv_std(cols);
  if (mode == Mode::kTrain) {
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < cols; ++c) mean[c] += x(r, c);
    for (double& m : mean) m /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        const double d = x(r, c) - mean[c];
        var[c] += d * d;
      }
    }
    for (double& v : var) v /= static_cast<double>(n);
  } else {
    for (std::size_t c = 0; c < cols; ++c) {
      mean[c] = bn.running_mean(0, c);
      var[c] = bn.running_var(0, c);
    }
  }
  for (std::size_t c = 0; c < cols; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + bn.eps);

  Matrix x_hat(n, cols);
  Matrix y(n, cols);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double h = (x(r, c) - mean[c]) * inv_std[c];
      x_hat(r, c) = h;
      y(r, c) = bn.gamma(0, c) * h + bn.beta(0, c);
    }
  }
  if (cache) {
    cache->mode = mode;
    cache->x_hat = std::move(x_hat);
    cache->mean = std::move(mean);
    cache->var = std::move(var);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

BatchNormGrads batchnorm_backward(const Matrix& d_y, const BatchNormLayer& bn,
                                  const BatchNormCache& cache) {
  const Matrix& x_hat = cache.x_hat;
  if (!d_y.SameShape(x_hat))
    throw InputError("batchnorm_backward: gradient shape does not match cache");
  const std::size_t n = d_y.rows();
  const std::size_t cols = d_y.cols();

  BatchNormGrads g{Matrix(n, cols), Matrix(1, cols), Matrix(1, cols)};
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      g.d_beta(0, c) += d_y(r, c);
      g.d_gamma(0, c) += d_y(r, c) * x_hat(r, c);
    }
  }
  if (cache.mode == Mode::kEval) {
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < cols; ++c)
        g.d_x(r, c) = d_y(r, c) * bn.gamma(0, c) * cache.inv_std[c];
    return g;
  }

  // dx = inv_std / N * (N dxh - sum(dxh) - x_hat * sum(dxh * x_hat)),
  // with dxh = gamma * dy.
  const double nn = static_cast<double>(n);
  for (std::size_t c = 0; c < cols; ++c) {
    const double gamma = bn.gamma(0, c);
    const double sum_dxh = gamma * g.d_beta(0, c);
    const double sum_dxh_xh = gamma * g.d_gamma(0, c);
    const double scale = cache.inv_std[c] / nn;
    for (std::size_t r = 0; r < n; ++r) {
      const double dxh = gamma * d_y(r, c);
      g.d_x(r, c) = scale * (nn * dxh - sum_dxh - x_hat(r, c) * sum_dxh_xh);
    }
  }
  return g;
}

void update_running_stats(BatchNormLayer& bn, const BatchNormCache& cache) {
  if (cache.mode != Mode::kTrain) return;
  const double n = static_cast<double>(cache.x_hat.rows());
  const double m = bn.momentum;
  for (std::size_t c = 0; c < cache.mean.size(); ++c) {
    bn.running_mean(0, c) = (1.0 - m) * bn.running_mean(0, c) + m * cache.mean[c];
    const double unbiased = cache.var[c] * n / (n - 1.0);
    bn.running_var(0, c) = (1.0 - m) * bn.running_var(0, c) + m * unbiased;
  }
}

std::pair<Matrix, ForwardTape> encoder_forward(
    const EncoderState& state, const std::vector<const FeatureSet*>& batch) {
  const EncoderArch& arch = state.arch;
  if (batch.empty()) throw InputError("encoder_forward: empty batch");
  if (state.mode == Mode::kTrain && arch.has_mlp() && batch.size() < 2) {
    throw InputError("encoder_forward: degenerate batch of " +
                     std::to_string(batch.size()) +
                     " item(s) in train mode with batch-norm");
  }

  ForwardTape tape;
  tape.mode = state.mode;
  tape.state_version = state.version();
  tape.offsets.assign(1, 0);
  std::size_t total = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const FeatureSet& f = *batch[b];
    if (f.cols() != arch.input_dim) {
      throw InputError("encoder_forward: item " + std::to_string(b) + " has " +
                       std::to_string(f.cols()) + "-dim features, encoder expects " +
                       std::to_string(arch.input_dim));
    }
    if (f.rows() == 0)
      throw InputError("encoder_forward: item " + std::to_string(b) + " has no vectors");
    total += f.rows();
    tape.offsets.push_back(total);
  }
  tape.input = Matrix(total, arch.input_dim);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const FeatureSet& f = *batch[b];
    for (std::size_t r = 0; r < f.rows(); ++r) {
      auto dst = tape.input.row(tape.offsets[b] + r);
      auto src = f.row(r);
      std::copy(src.begin(), src.end(), dst.begin());
    }
  }

  tape.fc_out = LinearForward(tape.input, state.fc);
  Matrix per_vector;
  if (arch.has_mlp()) {
    const MlpBlock& mlp = *state.mlp;
    tape.bn1_out = batchnorm_forward(tape.fc_out, mlp.bn1, state.mode, &tape.bn1);
    Matrix h1 = LinearForward(tape.bn1_out, mlp.fc1);
    tape.hidden_pre = batchnorm_forward(h1, mlp.bn2, state.mode, &tape.bn2);
    tape.hidden = arch.mlp_activation ? Relu(tape.hidden_pre) : tape.hidden_pre;
    per_vector = LinearForward(tape.hidden, mlp.fc2);
    if (arch.kind == EncoderKind::kRmlp) {
      for (std::size_t i = 0; i < per_vector.size(); ++i)
        per_vector.values()[i] += tape.fc_out.values()[i];
    }
  } else {
    per_vector = tape.fc_out;
  }

  const std::size_t d = arch.embed_dim;
  Matrix pooled(batch.size(), d);
  if (arch.pooling == Pooling::kMax) tape.max_rows.assign(batch.size() * d, 0);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const std::size_t lo = tape.offsets[b];
    const std::size_t hi = tape.offsets[b + 1];
    auto out = pooled.row(b);
    if (arch.pooling == Pooling::kMean) {
      for (std::size_t r = lo; r < hi; ++r) {
        auto src = per_vector.row(r);
        for (std::size_t c = 0; c < d; ++c) out[c] += src[c];
      }
      const double inv = 1.0 / static_cast<double>(hi - lo);
      for (double& v : out) v *= inv;
    } else {
      for (std::size_t c = 0; c < d; ++c) {
        std::size_t best = lo;
        for (std::size_t r = lo + 1; r < hi; ++r)
          if (per_vector(r, c) > per_vector(best, c)) best = r;
        out[c] = per_vector(best, c);
        tape.max_rows[b * d + c] = best;
      }
    }
  }

  auto [embeddings, norm] = l2_normalize_rows(pooled);
  tape.norm = std::move(norm);
  return {std::move(embeddings), std::move(tape)};
}

void apply_running_stats(EncoderState& state, const ForwardTape& tape) {
  if (tape.mode != Mode::kTrain || !state.mlp) return;
  update_running_stats(state.mlp->bn1, tape.bn1);
  update_running_stats(state.mlp->bn2, tape.bn2);
}

EncoderGrads encoder_backward(const EncoderState& state, ForwardTape& tape,
                              const Matrix& d_embeddings) {
  if (tape.consumed) throw InputError("encoder_backward: tape already used");
  if (tape.state_version != state.version())
    throw InputError("encoder_backward: stale tape (parameters changed since forward)");
  const EncoderArch& arch = state.arch;
  const std::size_t items = tape.offsets.size() - 1;
  if (d_embeddings.rows() != items || d_embeddings.cols() != arch.embed_dim)
    throw InputError("encoder_backward: gradient shape does not match batch");
  tape.consumed = true;

  const Matrix d_pooled = l2_normalize_vjp(d_embeddings, tape.norm);
  const std::size_t d = arch.embed_dim;
  Matrix d_vec(tape.input.rows(), d);
  for (std::size_t b = 0; b < items; ++b) {
    const std::size_t lo = tape.offsets[b];
    const std::size_t hi = tape.offsets[b + 1];
    auto g = d_pooled.row(b);
    if (arch.pooling == Pooling::kMean) {
      const double inv = 1.0 / static_cast<double>(hi - lo);
      for (std::size_t r = lo; r < hi; ++r) {
        auto dst = d_vec.row(r);
        for (std::size_t c = 0; c < d; ++c) dst[c] = g[c] * inv;
      }
    } else {
      for (std::size_t c = 0; c < d; ++c) d_vec(tape.max_rows[b * d + c], c) = g[c];
    }
  }

  EncoderGrads grads;
  grads.tensors.resize(arch.has_mlp() ? 10 : 2);
  Matrix d_fc_out;
  if (arch.has_mlp()) {
    d_fc_out = MlpBackward(*state.mlp, arch, tape, d_vec, grads.tensors);
    if (arch.kind == EncoderKind::kRmlp) {
      for (std::size_t i = 0; i < d_fc_out.size(); ++i)
        d_fc_out.values()[i] += d_vec.values()[i];
    }
  } else {
    d_fc_out = std::move(d_vec);
  }
  grads.tensors[0] = matmul_atb(tape.input, d_fc_out);
  kernels::column_sums(d_fc_out, grads.tensors[1]);
  return grads;
}

void save_checkpoint(const std::string& path,
                     const std::vector<const EncoderState*>& encoders) {
  internal::ByteWriter w;
  w.bytes({kCheckpointMagic, 4});
  w.u32(kCheckpointVersion);
  w.u32(ToU32(encoders.size(), "encoder count"));
  for (const EncoderState* e : encoders) {
    w.u32(static_cast<std::uint32_t>(e->arch.kind));
    w.u32(static_cast<std::uint32_t>(e->arch.pooling));
    w.u32(e->arch.mlp_activation ? 1 : 0);
    w.u32(ToU32(e->arch.input_dim, "input_dim"));
    w.u32(ToU32(e->arch.embed_dim, "embed_dim"));
    const auto tensors = e->all_tensors();
    w.u32(ToU32(tensors.size(), "tensor count"));
    for (const Matrix* t : tensors) {
      w.u32(ToU32(t->rows(), "rows"));
      w.u32(ToU32(t->cols(), "cols"));
      for (double v : t->values()) w.f64(v);
    }
  }
  w.WriteFile(path);
}

std::vector<EncoderState> load_checkpoint(const std::string& path) {
  auto r = internal::ByteReader::FromFile(path);
  r.set_context("checkpoint header");
  if (r.bytes(4) != std::string_view(kCheckpointMagic, 4))
    throw FormatError("'" + path + "' is not a checkpoint (bad magic)", 0);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version), 4);
  const std::uint32_t count = r.u32();
  std::vector<EncoderState> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    r.set_context("encoder " + std::to_string(i));
    const std::uint64_t at = r.offset();
    EncoderArch arch;
    const std::uint32_t kind = r.u32();
    const std::uint32_t pooling = r.u32();
    const std::uint32_t act = r.u32();
    if (kind > 2 || pooling > 1 || act > 1)
      throw FormatError("invalid architecture descriptor for encoder " + std::to_string(i), at);
    arch.kind = static_cast<EncoderKind>(kind);
    arch.pooling = static_cast<Pooling>(pooling);
    arch.mlp_activation = act == 1;
    arch.input_dim = r.u32();
    arch.embed_dim = r.u32();
    try {
      arch.Validate();
    } catch (const ConfigError& e) {
      throw FormatError(std::string("invalid architecture: ") + e.what(), at);
    }
    EncoderState state = init_params(arch, 0);
    auto tensors = state.all_tensors();
    const std::uint64_t count_at = r.offset();
    if (r.u32() != tensors.size())
      throw FormatError("tensor count does not match architecture", count_at);
    for (Matrix* t : tensors) {
      const std::uint64_t shape_at = r.offset();
      const std::uint32_t rows = r.u32();
      const std::uint32_t cols = r.u32();
      if (rows != t->rows() || cols != t->cols())
        throw FormatError("tensor shape does not match architecture", shape_at);
      for (double& v : t->values()) v = r.f64();
    }
    out.push_back(std::move(state));
  }
  if (!r.at_end()) throw FormatError("trailing bytes after checkpoint", r.offset());
  return out;
}

}  // namespace selhn
