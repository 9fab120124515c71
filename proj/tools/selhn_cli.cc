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

// selhn: generate data, train, evaluate and grad-check.
//
// Exit codes: 0 success, 2 configuration error, 3 data/format error,
// 4 numerical failure, 1 anything else.

#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "selhn/error.h"
#include "selhn/harness.h"

namespace {

constexpr const char* kVersion = "selhn 0.1.0";

using Overrides = std::vector<std::pair<std::string, std::string>>;

// "--set key=value" entries.
void AddSets(Overrides& out, const std::vector<std::string>& sets) {
  for (const std::string& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw selhn::ConfigError("set", "expected key=value, got '" + s + "'");
    out.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
}

// Records a typed flag as a config override when it was given.
void Forward(Overrides& out, const CLI::App& app, const char* flag, const char* key,
             const std::string& value) {
  if (app.count(flag) > 0) out.emplace_back(key, value);
}

void PrintRecall(const selhn::RecallReport& r) {
  std::cout << "R@1/5/10 i2t: " << r.r_at[0][0] << " " << r.r_at[0][1] << " " << r.r_at[0][2]
            << "\nR@1/5/10 t2i: " << r.r_at[1][0] << " " << r.r_at[1][1] << " "
            << r.r_at[1][2] << "\nrsum: " << r.rsum << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Selective hard-negative training for image-text retrieval"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Write a synthetic paired feature file");
  std::string gen_config, gen_out = "features.hnsf";
  std::vector<std::string> gen_sets;
  gen->add_option("--config", gen_config, "key = value config file (synth_* keys)");
  gen->add_option("--out", gen_out, "output feature file");
  gen->add_option("--set", gen_sets, "extra key=value overrides");

  // train
  auto* train = app.add_subcommand("train", "Train the image and text encoders");
  // Flags are kept as text and validated by the config parser.
  std::string t_config, t_loss, t_arch, t_eps, t_margin, t_epochs, t_batch, t_seed,
      t_data, t_out;
  bool t_verbose = false;
  std::vector<std::string> t_sets;
  train->add_option("--config", t_config, "key = value config file");
  train->add_option("--loss", t_loss, "triplet | hn | shn | sct | selhn");
  train->add_option("--arch", t_arch, "image encoder: fc | mlp | rmlp");
  train->add_option("--epsilon", t_eps, "selection threshold");
  train->add_option("--margin", t_margin, "hinge margin");
  train->add_option("--epochs", t_epochs);
  train->add_option("--batch", t_batch);
  train->add_option("--seed", t_seed);
  train->add_option("--data", t_data, "feature file; omit to generate synthetic data");
  train->add_option("--out", t_out, "output directory");
  train->add_flag("--verbose", t_verbose, "also log every step");
  train->add_option("--set", t_sets, "extra key=value overrides");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on one split");
  std::string e_ckpt, e_config, e_data, e_split = "test", e_out;
  std::vector<std::string> e_sets;
  eval->add_option("--ckpt", e_ckpt, "checkpoint file")->required();
  eval->add_option("--config", e_config, "config naming the data and split sizes");
  eval->add_option("--data", e_data, "feature file");
  eval->add_option("--split", e_split, "train | val | test");
  eval->add_option("--out", e_out, "write the recalls as CSV");
  eval->add_option("--set", e_sets, "extra key=value overrides");

  // grad-check
  auto* gc = app.add_subcommand("grad-check", "Finite-difference check of every loss and encoder");
  selhn::GradcheckOptions gc_opts;
  std::string gc_corrupt;
  gc->add_option("--seeds", gc_opts.seeds, "checked instances per row");
  gc->add_option("--epsilon", gc_opts.hyper.epsilon, "selection threshold");
  gc->add_option("--margin", gc_opts.hyper.margin, "hinge margin");
  gc->add_option("--step", gc_opts.step, "central-difference step");
  gc->add_option("--seed", gc_opts.seed);
  gc->add_option("--corrupt", gc_corrupt, "loss:arch row whose analytic gradient is perturbed")
      ->group("");

  auto* ver = app.add_subcommand("version", "Print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*ver) {
      std::cout << kVersion << "\n";
    } else if (*gen) {
      Overrides ov;
      AddSets(ov, gen_sets);
      const selhn::RunConfig cfg = selhn::load_config(gen_config, ov);
      const selhn::PairedDataset ds = selhn::gen_synthetic(cfg.synth);
      selhn::write_features(gen_out, ds);
      std::cout << "wrote " << ds.size() << " items to " << gen_out << "\n";
    } else if (*train) {
      Overrides ov;
      Forward(ov, *train, "--loss", "loss", t_loss);
      Forward(ov, *train, "--arch", "arch", t_arch);
      Forward(ov, *train, "--epsilon", "epsilon", t_eps);
      Forward(ov, *train, "--margin", "margin", t_margin);
      Forward(ov, *train, "--epochs", "epochs", t_epochs);
      Forward(ov, *train, "--batch", "batch", t_batch);
      Forward(ov, *train, "--seed", "seed", t_seed);
      Forward(ov, *train, "--data", "data", t_data);
      Forward(ov, *train, "--out", "out", t_out);
      if (t_verbose) ov.emplace_back("verbose", "true");
      AddSets(ov, t_sets);
      const selhn::RunConfig cfg = selhn::load_config(t_config, ov);
      const selhn::TrainResult res = selhn::run_training(cfg);
      for (const selhn::MetricsRow& r : res.rows) {
        std::cout << "epoch " << r.epoch << " loss " << r.loss_value << " triplet_frac "
                  << r.branch_fraction_triplet << " below_eps " << r.fraction_delta_s_below_eps;
        if (r.recall) std::cout << " rsum " << r.recall->rsum;
        std::cout << "\n";
      }
      if (res.best)
        std::cout << "best rsum " << res.best->rsum << " at epoch " << res.best_epoch << "\n";
      std::cout << "outputs in " << cfg.out << "\n";
    } else if (*eval) {
      Overrides ov;
      Forward(ov, *eval, "--data", "data", e_data);
      AddSets(ov, e_sets);
      const selhn::RunConfig cfg = selhn::load_config(e_config, ov);
      const selhn::PairedDataset ds = selhn::load_dataset(cfg);
      const selhn::RecallReport rep =
          selhn::run_eval(e_ckpt, ds, selhn::parse_split(e_split));
      PrintRecall(rep);
      if (!e_out.empty()) selhn::write_recall_csv(e_out, rep);
    } else if (*gc) {
      if (!gc_corrupt.empty()) {
        const auto colon = gc_corrupt.find(':');
        if (colon == std::string::npos)
          throw selhn::ConfigError("corrupt", "expected loss:arch");
        gc_opts.corrupt = std::make_pair(
            selhn::parse_loss_kind(gc_corrupt.substr(0, colon)),
            selhn::parse_encoder_kind(gc_corrupt.substr(colon + 1), "corrupt"));
      }
      const auto rows = selhn::run_gradcheck(gc_opts);
      selhn::print_gradcheck(std::cout, rows);
      for (const auto& r : rows)
        if (!r.pass) return 4;
    }
  } catch (const selhn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const selhn::FormatError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const selhn::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
