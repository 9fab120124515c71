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

#include "selhn/harness.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>
#include <system_error>

#include "selhn/error.h"
#include "selhn/graddiag.h"

namespace selhn {
namespace {

std::string Trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::string Fmt(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

template <typename T>
T ParseInt(const std::string& key, std::string_view v) {
  T out{};
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ConfigError(key, "expected a non-negative integer, got '" + std::string(v) + "'");
  return out;
}

double ParseDouble(const std::string& key, std::string_view v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ConfigError(key, "expected a number, got '" + std::string(v) + "'");
  return out;
}

bool ParseBool(const std::string& key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key, "expected true or false, got '" + std::string(v) + "'");
}

OptimizerKind ParseOptimizer(std::string_view v) {
  if (v == "adamw") return OptimizerKind::kAdamW;
  if (v == "sgd") return OptimizerKind::kSgd;
  throw ConfigError("optimizer", "unknown optimizer '" + std::string(v) + "' (adamw, sgd)");
}

struct Field {
  const char* key;
  std::function<void(RunConfig&, const std::string& key, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define SELHN_SIZE_FIELD(name, member)                                          \
  Field {                                                                       \
    name,                                                                       \
        [](RunConfig& c, const std::string& k, std::string_view v) {            \
          c.member = ParseInt<std::size_t>(k, v);                               \
        },                                                                      \
        [](const RunConfig& c) { return std::to_string(c.member); }             \
  }
#define SELHN_DOUBLE_FIELD(name, member)                                        \
  Field {                                                                       \
    name,                                                                       \
        [](RunConfig& c, const std::string& k, std::string_view v) {            \
          c.member = ParseDouble(k, v);                                         \
        },                                                                      \
        [](const RunConfig& c) { return Fmt(c.member); }                        \
  }
#define SELHN_BOOL_FIELD(name, member)                                          \
  Field {                                                                       \
    name,                                                                       \
        [](RunConfig& c, const std::string& k, std::string_view v) {            \
          c.member = ParseBool(k, v);                                           \
        },                                                                      \
        [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); } \
  }

const std::vector<Field>& Fields() {
  static const std::vector<Field> fields = {
      {"loss",
       [](RunConfig& c, const std::string&, std::string_view v) { c.loss = parse_loss_kind(v); },
       [](const RunConfig& c) { return std::string(to_string(c.loss)); }},
      SELHN_DOUBLE_FIELD("margin", hyper.margin),
      SELHN_DOUBLE_FIELD("epsilon", hyper.epsilon),
      {"arch",
       [](RunConfig& c, const std::string& k, std::string_view v) {
         c.image_arch = parse_encoder_kind(v, k);
       },
       [](const RunConfig& c) { return std::string(to_string(c.image_arch)); }},
      {"text_arch",
       [](RunConfig& c, const std::string& k, std::string_view v) {
         c.text_arch = parse_encoder_kind(v, k);
       },
       [](const RunConfig& c) { return std::string(to_string(c.text_arch)); }},
      {"pooling",
       [](RunConfig& c, const std::string& k, std::string_view v) {
         c.pooling = parse_pooling(v, k);
       },
       [](const RunConfig& c) { return std::string(to_string(c.pooling)); }},
      SELHN_SIZE_FIELD("embed_dim", embed_dim),
      SELHN_BOOL_FIELD("mlp_activation", mlp_activation),
      {"optimizer",
       [](RunConfig& c, const std::string&, std::string_view v) {
         c.optimizer = ParseOptimizer(v);
       },
       [](const RunConfig& c) {
         return std::string(c.optimizer == OptimizerKind::kAdamW ? "adamw" : "sgd");
       }},
      SELHN_DOUBLE_FIELD("lr", adam.lr),
      SELHN_DOUBLE_FIELD("beta1", adam.beta1),
      SELHN_DOUBLE_FIELD("beta2", adam.beta2),
      SELHN_DOUBLE_FIELD("adam_eps", adam.eps),
      SELHN_DOUBLE_FIELD("weight_decay", adam.weight_decay),
      {"decay_epoch",
       [](RunConfig& c, const std::string& k, std::string_view v) {
         if (v == "half") {
           c.decay_epoch.reset();
         } else {
           c.decay_epoch = ParseInt<std::size_t>(k, v);
         }
       },
       [](const RunConfig& c) { return std::to_string(c.resolved_decay_epoch()); }},
      SELHN_DOUBLE_FIELD("decay_factor", decay_factor),
      SELHN_SIZE_FIELD("batch", batch),
      SELHN_SIZE_FIELD("epochs", epochs),
      {"seed",
       [](RunConfig& c, const std::string& k, std::string_view v) {
         c.seed = ParseInt<std::uint64_t>(k, v);
       },
       [](const RunConfig& c) { return std::to_string(c.seed); }},
      {"data", [](RunConfig& c, const std::string&, std::string_view v) { c.data = v; },
       [](const RunConfig& c) { return c.data; }},
      SELHN_SIZE_FIELD("val_items", val_items),
      SELHN_SIZE_FIELD("test_items", test_items),
      SELHN_SIZE_FIELD("eval_every", eval_every),
      {"out", [](RunConfig& c, const std::string&, std::string_view v) { c.out = v; },
       [](const RunConfig& c) { return c.out; }},
      SELHN_BOOL_FIELD("verbose", verbose),
      SELHN_SIZE_FIELD("synth_items", synth.n_items),
      SELHN_SIZE_FIELD("synth_latent_dim", synth.latent_dim),
      SELHN_SIZE_FIELD("synth_dim_v", synth.dim_v),
      SELHN_SIZE_FIELD("synth_dim_t", synth.dim_t),
      SELHN_SIZE_FIELD("synth_regions", synth.regions),
      SELHN_SIZE_FIELD("synth_words", synth.words),
      SELHN_DOUBLE_FIELD("synth_noise", synth.noise_sigma),
      SELHN_DOUBLE_FIELD("synth_confuser_fraction", synth.confuser_fraction),
      SELHN_DOUBLE_FIELD("synth_confuser_perturb", synth.confuser_perturb),
      SELHN_DOUBLE_FIELD("synth_offset", synth.feature_offset),
      SELHN_BOOL_FIELD("synth_identity_maps", synth.identity_maps),
      {"synth_seed",
       [](RunConfig& c, const std::string& k, std::string_view v) {
         c.synth.seed = ParseInt<std::uint64_t>(k, v);
       },
       [](const RunConfig& c) { return std::to_string(c.synth.seed); }},
  };
  return fields;
}

#undef SELHN_SIZE_FIELD
#undef SELHN_DOUBLE_FIELD
#undef SELHN_BOOL_FIELD

void Apply(RunConfig& cfg, const std::string& key, std::string_view value) {
  for (const Field& f : Fields()) {
    if (key == f.key) {
      f.set(cfg, key, value);
      return;
    }
  }
  throw ConfigError(key, "unknown configuration key");
}

bool EndsWith(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void WriteText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw ConfigError("out", "cannot write " + path.string());
}

std::vector<const FeatureSet*> Gather(const std::vector<FeatureSet>& sets,
                                      const std::vector<std::size_t>& items) {
  std::vector<const FeatureSet*> out;
  out.reserve(items.size());
  for (std::size_t i : items) out.push_back(&sets.at(i));
  return out;
}

bool AllFinite(const EncoderGrads& g) {
  for (const Matrix& m : g.tensors)
    if (!all_finite(m)) return false;
  return true;
}

// Running sums of the per-step diagnostics over one epoch.
struct Accumulator {
  std::size_t steps = 0;
  double loss = 0.0;
  std::size_t anchors = 0;  // anchor/direction entries
  std::size_t triplet = 0;
  std::size_t hn = 0;
  std::size_t below = 0;
  double delta[2] = {0.0, 0.0};
  std::size_t per_dir = 0;
  double grad_img = 0.0;
  double grad_txt = 0.0;

  // The standalone triplet loss mines nothing; every term counts as the
  // triplet branch.
  void Add(LossKind kind, const LossResult& res, double epsilon, double g_img,
           double g_txt) {
    ++steps;
    loss += res.value;
    for (std::size_t d = 0; d < 2; ++d) {
      for (const AnchorRecord& rec : res.mining[kBothDirections[d]]) {
        ++anchors;
        if (rec.branch == Branch::kTriplet || kind == LossKind::kTriplet) ++triplet;
        if (rec.branch == Branch::kHn) ++hn;
        if (vanishing_predicate(rec.delta_s, epsilon)) ++below;
        delta[d] += rec.delta_s;
      }
    }
    per_dir += res.mining.image_to_text.size();
    grad_img += g_img;
    grad_txt += g_txt;
  }

  MetricsRow Row(std::size_t epoch, std::size_t step, double lr) const {
    MetricsRow r;
    r.epoch = epoch;
    r.step = step;
    r.lr = lr;
    if (steps == 0) return r;
    const double n = static_cast<double>(steps);
    r.loss_value = loss / n;
    r.branch_fraction_triplet = static_cast<double>(triplet) / static_cast<double>(anchors);
    r.branch_fraction_hn = static_cast<double>(hn) / static_cast<double>(anchors);
    r.mean_delta_s_i2t = delta[0] / static_cast<double>(per_dir);
    r.mean_delta_s_t2i = delta[1] / static_cast<double>(per_dir);
    r.fraction_delta_s_below_eps = static_cast<double>(below) / static_cast<double>(anchors);
    r.grad_norm_first_layer_img = grad_img / n;
    r.grad_norm_first_layer_txt = grad_txt / n;
    return r;
  }
};

void WriteNanDump(const std::filesystem::path& dir, std::size_t epoch, std::size_t step,
                  const std::vector<std::size_t>& items, const std::string& reason,
                  const LossResult* res) {
  std::ostringstream os;
  os << "reason = " << reason << "\n";
  os << "epoch = " << epoch << "\nstep = " << step << "\nitems =";
  for (std::size_t i : items) os << ' ' << i;
  os << "\n";
  if (res != nullptr) {
    os << "loss_value = " << Fmt(res->value) << "\n";
    for (Direction dir : kBothDirections) {
      os << "delta_s_" << (dir == Direction::kImageToText ? "i2t" : "t2i") << " =";
      for (const AnchorRecord& rec : res->mining[dir]) os << ' ' << Fmt(rec.delta_s);
      os << "\n";
    }
  }
  std::ofstream f(dir / "nan_dump.txt", std::ios::binary);
  f << os.str();
}

}  // namespace

SynthConfig RunConfig::DefaultSynth() {
  SynthConfig s;
  s.n_items = 3000;
  return s;
}

LrSchedule RunConfig::schedule() const {
  LrSchedule s;
  s.base_lr = adam.lr;
  s.total_epochs = epochs;
  s.decay_epoch = resolved_decay_epoch();
  s.decay_factor = decay_factor;
  return s;
}

EncoderArch RunConfig::image_encoder(std::size_t input_dim) const {
  return EncoderArch{image_arch, input_dim, embed_dim, pooling, mlp_activation};
}

EncoderArch RunConfig::text_encoder(std::size_t input_dim) const {
  return EncoderArch{text_arch, input_dim, embed_dim, pooling, mlp_activation};
}

void RunConfig::Validate() const {
  hyper.Validate();
  adam.Validate();
  schedule().Validate();
  if (batch < 2) throw ConfigError("batch", "must be >= 2 (every anchor needs a negative)");
  if (embed_dim == 0) throw ConfigError("embed_dim", "must be >= 1");
  const bool any_mlp = image_arch != EncoderKind::kFc || text_arch != EncoderKind::kFc;
  if (any_mlp && embed_dim % 2 != 0)
    throw ConfigError("embed_dim", "must be even for an mlp or rmlp encoder");
  if (eval_every > 0 && val_items < kRecallKs.back())
    throw ConfigError("val_items", "R@10 needs at least 10 validation items");
  if (out.empty()) throw ConfigError("out", "must name a directory");
  if (data.empty()) synth.Validate();
}

RunConfig parse_config(const std::string& file_text,
                       const std::vector<std::pair<std::string, std::string>>& overrides) {
  RunConfig cfg;
  std::map<std::string, std::size_t> seen;
  std::istringstream in(file_text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string body = Trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError("", "line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = Trim(std::string_view(body).substr(0, eq));
    const std::string value = Trim(std::string_view(body).substr(eq + 1));
    if (auto [it, fresh] = seen.emplace(key, line_no); !fresh) {
      throw ConfigError(key, "set twice (lines " + std::to_string(it->second) + " and " +
                                 std::to_string(line_no) + ")");
    }
    Apply(cfg, key, value);
  }
  for (const auto& [key, value] : overrides) Apply(cfg, key, value);
  cfg.Validate();
  return cfg;
}

RunConfig load_config(const std::string& path,
                      const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::string text;
  if (!path.empty()) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("config", "cannot read " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    text = ss.str();
  }
  return parse_config(text, overrides);
}

std::string resolved_config_text(const RunConfig& cfg) {
  std::string out;
  for (const Field& f : Fields()) out += std::string(f.key) + " = " + f.get(cfg) + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const Field& f : Fields()) keys.emplace_back(f.key);
  return keys;
}

const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> cols = {
      "epoch",
      "step",
      "loss_value",
      "branch_fraction_triplet",
      "branch_fraction_hn",
      "mean_delta_s_i2t",
      "mean_delta_s_t2i",
      "fraction_delta_s_below_eps",
      "grad_norm_first_layer_img",
      "grad_norm_first_layer_txt",
      "r1_i2t",
      "r5_i2t",
      "r10_i2t",
      "r1_t2i",
      "r5_t2i",
      "r10_t2i",
      "rsum",
      "lr",
  };
  return cols;
}

std::string metrics_csv_line(const MetricsRow& r) {
  std::string s = std::to_string(r.epoch) + "," + std::to_string(r.step);
  for (double x : {r.loss_value, r.branch_fraction_triplet, r.branch_fraction_hn,
                   r.mean_delta_s_i2t, r.mean_delta_s_t2i, r.fraction_delta_s_below_eps,
                   r.grad_norm_first_layer_img, r.grad_norm_first_layer_txt}) {
    s += "," + Fmt(x);
  }
  for (std::size_t d = 0; d < 2; ++d)
    for (std::size_t j = 0; j < kRecallKs.size(); ++j)
      s += "," + (r.recall ? Fmt(r.recall->r_at[d][j]) : std::string());
  s += "," + (r.recall ? Fmt(r.recall->rsum) : std::string());
  s += "," + Fmt(r.lr);
  return s;
}

PairedDataset load_dataset(const RunConfig& cfg) {
  PairedDataset ds;
  if (cfg.data.empty()) {
    ds = gen_synthetic(cfg.synth);
  } else if (EndsWith(cfg.data, ".txt")) {
    ds = read_text_features(cfg.data);
  } else {
    ds = read_features(cfg.data);
  }
  if (cfg.val_items + cfg.test_items + 2 > ds.size()) {
    throw ConfigError("val_items", "val_items + test_items leaves fewer than 2 of " +
                                       std::to_string(ds.size()) + " items for training");
  }
  assign_tail_splits(ds, cfg.val_items, cfg.test_items);
  return ds;
}

Matrix embed_items(const EncoderState& encoder, const std::vector<FeatureSet>& sets,
                   const std::vector<std::size_t>& items) {
  EncoderState eval = encoder;
  eval.mode = Mode::kEval;
  constexpr std::size_t kChunk = 1024;
  Matrix out(items.size(), encoder.arch.embed_dim);
  for (std::size_t start = 0; start < items.size(); start += kChunk) {
    const std::size_t end = std::min(items.size(), start + kChunk);
    const std::vector<std::size_t> chunk(items.begin() + static_cast<std::ptrdiff_t>(start),
                                         items.begin() + static_cast<std::ptrdiff_t>(end));
    const Matrix emb = encoder_forward(eval, Gather(sets, chunk)).first;
    for (std::size_t r = 0; r < emb.rows(); ++r)
      for (std::size_t c = 0; c < emb.cols(); ++c) out(start + r, c) = emb(r, c);
  }
  return out;
}

RecallReport evaluate_split(const EncoderState& image, const EncoderState& text,
                            const PairedDataset& dataset, Split split) {
  const std::vector<std::size_t> items = dataset.indices(split);
  if (items.size() < kRecallKs.back()) {
    throw ConfigError("split", std::string(to_string(split)) + " split has " +
                                   std::to_string(items.size()) +
                                   " items; R@10 needs at least 10");
  }
  const Matrix v = embed_items(image, dataset.images, items);
  const Matrix t = embed_items(text, dataset.texts, items);
  return rsum(matmul_abt(v, t), PairingMap::Diagonal(items.size()));
}

TrainResult run_training(const RunConfig& cfg, TrainObserver* observer) {
  cfg.Validate();
  return run_training(cfg, load_dataset(cfg), observer);
}

TrainResult run_training(const RunConfig& cfg, const PairedDataset& dataset,
                         TrainObserver* observer) {
  cfg.Validate();
  const std::filesystem::path dir(cfg.out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("out", "cannot create " + dir.string() + ": " + ec.message());
  WriteText(dir / "config.resolved", resolved_config_text(cfg));

  const std::vector<std::size_t> train = dataset.indices(Split::kTrain);
  if (train.size() < 2) throw ConfigError("val_items", "fewer than 2 training items");

  EncoderState image = init_params(cfg.image_encoder(dataset.dim_v), mix_seed(cfg.seed, 1));
  EncoderState text = init_params(cfg.text_encoder(dataset.dim_t), mix_seed(cfg.seed, 2));
  AdamW opt_image(cfg.adam);
  AdamW opt_text(cfg.adam);
  const LrSchedule schedule = cfg.schedule();

  std::ofstream metrics(dir / "metrics.csv", std::ios::binary);
  std::ofstream steps_csv;
  std::string header;
  for (const std::string& c : metrics_columns()) header += (header.empty() ? "" : ",") + c;
  metrics << header << "\n";
  if (cfg.verbose) {
    steps_csv.open(dir / "metrics_steps.csv", std::ios::binary);
    steps_csv << header << "\n";
  }

  TrainResult result;
  std::size_t global_step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_at(schedule, epoch);
    opt_image.set_lr(lr);
    opt_text.set_lr(lr);
    Accumulator acc;
    for (const std::vector<std::size_t>& items :
         batch_iter(train, cfg.batch, cfg.seed, epoch)) {
      const LossResult* seen = nullptr;
      try {
        auto [v, tape_v] = encoder_forward(image, Gather(dataset.images, items));
        auto [t, tape_t] = encoder_forward(text, Gather(dataset.texts, items));
        const SimMatrix sims = cosine_sim_matrix(v, t);
        const LossResult res = compute_loss(cfg.loss, sims, cfg.hyper);
        seen = &res;
        if (!std::isfinite(res.value)) throw NumericalError("non-finite loss value");
        const auto [d_v, d_t] = chain_to_embeddings(res.d_s, v, t);
        const EncoderGrads g_image = encoder_backward(image, tape_v, d_v);
        const EncoderGrads g_text = encoder_backward(text, tape_t, d_t);
        if (!AllFinite(g_image) || !AllFinite(g_text))
          throw NumericalError("non-finite gradient");

        const double n_img = first_layer_grad_norm(g_image);
        const double n_txt = first_layer_grad_norm(g_text);
        acc.Add(cfg.loss, res, cfg.hyper.epsilon, n_img, n_txt);
        if (observer != nullptr) observer->OnStep({epoch, global_step, &items, &sims, &res});
        if (cfg.verbose) {
          Accumulator one;
          one.Add(cfg.loss, res, cfg.hyper.epsilon, n_img, n_txt);
          steps_csv << metrics_csv_line(one.Row(epoch, global_step, lr)) << "\n";
        }

        apply_running_stats(image, tape_v);
        apply_running_stats(text, tape_t);
        const auto p_image = image.trainable();
        const auto p_text = text.trainable();
        if (cfg.optimizer == OptimizerKind::kAdamW) {
          opt_image.Step(p_image, g_image.tensors);
          opt_text.Step(p_text, g_text.tensors);
        } else {
          sgd_step(p_image, g_image.tensors, lr);
          sgd_step(p_text, g_text.tensors, lr);
        }
        seen = nullptr;
      } catch (const NumericalError& e) {
        WriteNanDump(dir, epoch, global_step, items, e.what(), seen);
        throw NumericalError(std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                             ", step " + std::to_string(global_step) + "; see " +
                             (dir / "nan_dump.txt").string());
      }
      ++global_step;
    }

    MetricsRow row = acc.Row(epoch, global_step, lr);
    const bool last = epoch + 1 == cfg.epochs;
    if (cfg.eval_every > 0 && ((epoch + 1) % cfg.eval_every == 0 || last)) {
      row.recall = evaluate_split(image, text, dataset, Split::kVal);
      if (!result.best || row.recall->rsum > result.best->rsum) {
        result.best = row.recall;
        result.best_epoch = epoch;
        save_checkpoint((dir / "ckpt_best").string(), {&image, &text});
      }
      if (last) result.final_eval = row.recall;
    }
    metrics << metrics_csv_line(row) << "\n" << std::flush;
    result.rows.push_back(row);
  }
  save_checkpoint((dir / "ckpt_final").string(), {&image, &text});
  return result;
}

RecallReport run_eval(const std::string& checkpoint, const PairedDataset& dataset,
                      Split split) {
  const std::vector<EncoderState> enc = load_checkpoint(checkpoint);
  if (enc.size() != 2) {
    throw ConfigError("ckpt", "expected an image and a text encoder, found " +
                                  std::to_string(enc.size()));
  }
  if (enc[0].arch.input_dim != dataset.dim_v) {
    throw ConfigError("ckpt", "image encoder expects D=" + std::to_string(enc[0].arch.input_dim) +
                                  " but the data has D_v=" + std::to_string(dataset.dim_v));
  }
  if (enc[1].arch.input_dim != dataset.dim_t) {
    throw ConfigError("ckpt", "text encoder expects D=" + std::to_string(enc[1].arch.input_dim) +
                                  " but the data has D_t=" + std::to_string(dataset.dim_t));
  }
  return evaluate_split(enc[0], enc[1], dataset, split);
}

void write_recall_csv(const std::string& path, const RecallReport& report) {
  std::string text = "r1_i2t,r5_i2t,r10_i2t,r1_t2i,r5_t2i,r10_t2i,rsum\n";
  for (std::size_t d = 0; d < 2; ++d)
    for (double x : report.r_at[d]) text += Fmt(x) + ",";
  text += Fmt(report.rsum) + "\n";
  WriteText(path, text);
}

std::vector<GradcheckRow> run_gradcheck(const GradcheckOptions& o) {
  if (o.batch < 2) throw ConfigError("batch", "must be >= 2");
  if (o.seeds == 0) throw ConfigError("seeds", "must be >= 1");
  o.hyper.Validate();
  constexpr EncoderKind kArchs[] = {EncoderKind::kFc, EncoderKind::kMlp, EncoderKind::kRmlp};

  std::vector<GradcheckRow> rows;
  std::uint64_t row_id = 0;
  for (LossKind loss : kAllLosses) {
    for (EncoderKind kind : kArchs) {
      ++row_id;
      GradcheckRow row;
      row.loss = loss;
      row.arch = kind;
      const bool corrupt = o.corrupt && o.corrupt->first == loss && o.corrupt->second == kind;
      const EncoderArch arch{kind, o.input_dim, o.embed_dim, Pooling::kMean, false};
      for (std::uint64_t attempt = 0;
           row.seeds_checked < o.seeds && attempt < o.max_attempts; ++attempt) {
        const std::uint64_t seed = mix_seed(o.seed, row_id, attempt);
        EncoderState image = init_params(arch, mix_seed(seed, 1));
        EncoderState text = init_params(arch, mix_seed(seed, 2));
        std::vector<FeatureSet> vis, txt;
        for (std::size_t b = 0; b < o.batch; ++b) {
          vis.push_back(gaussian(o.vectors, o.input_dim, mix_seed(seed, 3, b)));
          txt.push_back(gaussian(o.vectors, o.input_dim, mix_seed(seed, 4, b)));
        }
        std::vector<const FeatureSet*> pv, pt;
        for (std::size_t b = 0; b < o.batch; ++b) {
          pv.push_back(&vis[b]);
          pt.push_back(&txt[b]);
        }

        auto [v, tape_v] = encoder_forward(image, pv);
        auto [t, tape_t] = encoder_forward(text, pt);
        const SimMatrix sims = cosine_sim_matrix(v, t);
        if (kink_margin(loss, sims, o.hyper) < 1e-4) {
          ++row.seeds_skipped;
          continue;
        }
        const LossResult res = compute_loss(loss, sims, o.hyper);
        const auto [d_v, d_t] = chain_to_embeddings(res.d_s, v, t);
        const EncoderGrads g_image = encoder_backward(image, tape_v, d_v);
        const EncoderGrads g_text = encoder_backward(text, tape_t, d_t);

        std::vector<double*> params;
        std::vector<double> analytic;
        auto collect = [&](EncoderState& enc, const EncoderGrads& g) {
          const std::vector<Matrix*> ps = enc.trainable();
          for (std::size_t i = 0; i < ps.size(); ++i) {
            for (std::size_t j = 0; j < ps[i]->size(); ++j) {
              params.push_back(&ps[i]->values()[j]);
              analytic.push_back(g.tensors[i].values()[j]);
            }
          }
        };
        collect(image, g_image);
        collect(text, g_text);
        if (corrupt)
          for (double& a : analytic) a = a * 1.01 + 1e-3;

        auto objective = [&](std::vector<int>& sig) {
          const Matrix ve = encoder_forward(image, pv).first;
          const Matrix te = encoder_forward(text, pt).first;
          const SimMatrix s = cosine_sim_matrix(ve, te);
          sig = decision_signature(loss, s, o.hyper);
          return compute_loss(loss, s, o.hyper).value;
        };
        const FdReport rep = check_gradient(objective, params, analytic, o.step);
        if (rep.skipped) {
          ++row.seeds_skipped;
          continue;
        }
        ++row.seeds_checked;
        row.max_rel_error = std::max(row.max_rel_error, rep.max_rel_error);
      }
      row.pass = row.seeds_checked >= o.seeds && row.max_rel_error < o.tolerance;
      rows.push_back(row);
    }
  }
  return rows;
}

void print_gradcheck(std::ostream& os, const std::vector<GradcheckRow>& rows) {
  os << std::left << std::setw(9) << "loss" << std::setw(7) << "arch" << std::setw(9)
     << "checked" << std::setw(9) << "skipped" << std::setw(24) << "max_rel_error"
     << "result\n";
  for (const GradcheckRow& r : rows) {
    os << std::left << std::setw(9) << to_string(r.loss) << std::setw(7) << to_string(r.arch)
       << std::setw(9) << r.seeds_checked << std::setw(9) << r.seeds_skipped << std::setw(24)
       << Fmt(r.max_rel_error) << (r.pass ? "PASS" : "FAIL") << "\n";
  }
}

}  // namespace selhn
