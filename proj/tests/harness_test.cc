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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "selhn/error.h"
#include "selhn/graddiag.h"

namespace selhn {
namespace {

namespace fs = std::filesystem;

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<std::string> Lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::size_t Count(const std::string& s, char c) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), c));
}

class HarnessTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("selhn_harness_" + std::string(
                                    ::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  // 64 training items in batches of 16, 10 validation and 10 test items.
  RunConfig Smoke(const std::string& name) const {
    RunConfig c = parse_config("", {});
    c.synth.n_items = 84;
    c.synth.dim_v = 12;
    c.synth.dim_t = 10;
    c.synth.latent_dim = 6;
    c.val_items = 10;
    c.test_items = 10;
    c.embed_dim = 8;
    c.batch = 16;
    c.epochs = 2;
    c.out = (root_ / name).string();
    return c;
  }

  fs::path root_;
};

TEST_F(HarnessTest, SmokeRunWritesEveryOutput) {
  const RunConfig cfg = Smoke("smoke");
  const TrainResult res = run_training(cfg);
  ASSERT_EQ(res.rows.size(), 2u);
  const auto lines = Lines(Slurp(fs::path(cfg.out) / "metrics.csv"));
  ASSERT_EQ(lines.size(), 3u);
  std::string header;
  for (const auto& c : metrics_columns()) header += (header.empty() ? "" : ",") + c;
  EXPECT_EQ(lines[0], header);
  for (std::size_t i = 1; i < 3; ++i)
    EXPECT_EQ(Count(lines[i], ','), metrics_columns().size() - 1) << lines[i];
  for (const char* f : {"config.resolved", "ckpt_final", "ckpt_best"})
    EXPECT_TRUE(fs::exists(fs::path(cfg.out) / f)) << f;
  for (const MetricsRow& r : res.rows) {
    EXPECT_NEAR(r.branch_fraction_triplet + r.branch_fraction_hn, 1.0, 1e-12);
    ASSERT_TRUE(r.recall.has_value());
    EXPECT_GE(r.recall->rsum, 0.0);
    EXPECT_GT(r.grad_norm_first_layer_img, 0.0);
  }
  EXPECT_EQ(res.rows[0].lr, 5e-4);
  EXPECT_EQ(res.rows[1].lr, 5e-5);  // decay at half of 2 epochs
}

TEST_F(HarnessTest, PureLossesHaveFixedBranchFractions) {
  for (LossKind k : {LossKind::kTriplet, LossKind::kHn}) {
    RunConfig cfg = Smoke(std::string(to_string(k)));
    cfg.loss = k;
    cfg.epochs = 1;
    const TrainResult res = run_training(cfg);
    const double want_triplet = k == LossKind::kTriplet ? 1.0 : 0.0;
    EXPECT_EQ(res.rows[0].branch_fraction_triplet, want_triplet);
    EXPECT_EQ(res.rows[0].branch_fraction_hn, 1.0 - want_triplet);
  }
}

TEST_F(HarnessTest, IdenticalRunsGiveIdenticalCsv) {
  const RunConfig a = Smoke("a");
  RunConfig b = a;
  b.out = (root_ / "b").string();
  run_training(a);
  run_training(b);
  EXPECT_EQ(Slurp(fs::path(a.out) / "metrics.csv"), Slurp(fs::path(b.out) / "metrics.csv"));
  RunConfig c = a;
  c.out = (root_ / "c").string();
  c.seed = 2;
  run_training(c);
  EXPECT_NE(Slurp(fs::path(a.out) / "metrics.csv"), Slurp(fs::path(c.out) / "metrics.csv"));
}

TEST_F(HarnessTest, BestCheckpointReproducesLoggedRsum) {
  RunConfig cfg = Smoke("best");
  cfg.epochs = 3;
  const TrainResult res = run_training(cfg);
  ASSERT_TRUE(res.best.has_value());
  const PairedDataset ds = load_dataset(cfg);
  const RecallReport again = run_eval((fs::path(cfg.out) / "ckpt_best").string(), ds, Split::kVal);
  EXPECT_EQ(again.rsum, res.best->rsum);
  EXPECT_EQ(res.rows[res.best_epoch].recall->rsum, res.best->rsum);
}

TEST_F(HarnessTest, NineItemSplitIsAConfigError) {
  RunConfig cfg = Smoke("nine");
  cfg.test_items = 9;
  const PairedDataset ds = load_dataset(cfg);
  const EncoderState img = init_params(cfg.image_encoder(ds.dim_v), 1);
  const EncoderState txt = init_params(cfg.text_encoder(ds.dim_t), 2);
  EXPECT_THROW(evaluate_split(img, txt, ds, Split::kTest), ConfigError);
  cfg.val_items = 9;
  EXPECT_THROW(cfg.Validate(), ConfigError);
}

TEST_F(HarnessTest, FreshEncodersRankAtChance) {
  // Random ranking: E[R@K] = 100 K / n per direction. The bound adds the
  // six binomial standard deviations (perfect correlation, the widest case).
  RunConfig cfg = Smoke("fresh");
  cfg.synth.n_items = 120;
  cfg.val_items = 100;
  const PairedDataset ds = load_dataset(cfg);
  const double n = 100.0;
  double expect = 0.0, sigma = 0.0;
  for (std::size_t k : kRecallKs) {
    const double p = static_cast<double>(k) / n;
    expect += 2.0 * 100.0 * p;
    sigma += 2.0 * 100.0 * std::sqrt(p * (1.0 - p) / n);
  }
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    EncoderState img = init_params(cfg.image_encoder(ds.dim_v), mix_seed(seed, 1));
    EncoderState txt = init_params(cfg.text_encoder(ds.dim_t), mix_seed(seed, 2));
    img.mode = txt.mode = Mode::kEval;
    const RecallReport r = evaluate_split(img, txt, ds, Split::kVal);
    EXPECT_LE(std::fabs(r.rsum - expect), 3.0 * sigma) << "seed " << seed;
  }
}

TEST_F(HarnessTest, EvalRejectsMismatchedData) {
  const RunConfig cfg = Smoke("mismatch");
  run_training(cfg);
  RunConfig other = cfg;
  other.synth.dim_v = 7;
  const PairedDataset ds = load_dataset(other);
  try {
    run_eval((fs::path(cfg.out) / "ckpt_final").string(), ds, Split::kVal);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("12"), std::string::npos) << what;
    EXPECT_NE(what.find("7"), std::string::npos) << what;
  }
}

// Recomputes mean delta_s from every batch's similarity matrix.
struct DeltaSRecorder : TrainObserver {
  std::vector<double> sum_i2t, sum_t2i;
  std::vector<std::size_t> count;
  void OnStep(const StepRecord& r) override {
    if (sum_i2t.size() <= r.epoch) {
      sum_i2t.resize(r.epoch + 1);
      sum_t2i.resize(r.epoch + 1);
      count.resize(r.epoch + 1);
    }
    const DeltaSPerAnchor ds = delta_s_per_anchor(*r.sims);
    for (double d : ds.image_to_text) sum_i2t[r.epoch] += d;
    for (double d : ds.text_to_image) sum_t2i[r.epoch] += d;
    count[r.epoch] += ds.image_to_text.size();
  }
};

TEST_F(HarnessTest, LoggedDeltaSMatchesDiagnostics) {
  DeltaSRecorder rec;
  const TrainResult res = run_training(Smoke("ds"), &rec);
  ASSERT_EQ(rec.count.size(), 2u);
  for (std::size_t e = 0; e < 2; ++e) {
    const double n = static_cast<double>(rec.count[e]);
    EXPECT_NEAR(res.rows[e].mean_delta_s_i2t, rec.sum_i2t[e] / n, 1e-12);
    EXPECT_NEAR(res.rows[e].mean_delta_s_t2i, rec.sum_t2i[e] / n, 1e-12);
  }
}

TEST_F(HarnessTest, NonFiniteTrainingAbortsWithADump) {
  RunConfig cfg = Smoke("nan");
  cfg.image_arch = cfg.text_arch = EncoderKind::kFc;
  // Beyond single precision: the stored features become infinite.
  cfg.synth.feature_offset = 1e39;
  cfg.loss = LossKind::kTriplet;
  EXPECT_THROW(run_training(cfg), NumericalError);
  EXPECT_TRUE(fs::exists(fs::path(cfg.out) / "nan_dump.txt"));
}

TEST(ConfigTest, EmptyInputGivesDefaults) {
  const RunConfig c = parse_config("", {});
  EXPECT_EQ(c.hyper.margin, 0.2);
  EXPECT_EQ(c.hyper.epsilon, 0.01);
  EXPECT_EQ(c.adam.lr, 5e-4);
  EXPECT_EQ(c.batch, 128u);
  EXPECT_EQ(c.epochs, 30u);
  EXPECT_EQ(c.resolved_decay_epoch(), 15u);
  EXPECT_EQ(c.loss, LossKind::kSelHn);
}

TEST(ConfigTest, NegativeMarginNamesTheKey) {
  try {
    parse_config("margin = -1\n", {});
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "margin");
  }
}

TEST(ConfigTest, UnknownAndMalformedKeys) {
  auto key_of = [](const std::string& text) {
    try {
      parse_config(text, {});
    } catch (const ConfigError& e) {
      return e.key();
    }
    return std::string("<none>");
  };
  EXPECT_EQ(key_of("lrate = 1\n"), "lrate");
  EXPECT_EQ(key_of("batch = twelve\n"), "batch");
  EXPECT_EQ(key_of("loss = vse\n"), "loss");
  EXPECT_EQ(key_of("epochs = 4\nepochs = 5\n"), "epochs");
}

TEST(ConfigTest, OverridesWinOverTheFile) {
  const RunConfig c =
      parse_config("lr = 0.01  # comment\nloss = hn\n", {{"lr", "0.02"}, {"epsilon", "0.05"}});
  EXPECT_EQ(c.adam.lr, 0.02);
  EXPECT_EQ(c.hyper.epsilon, 0.05);
  EXPECT_EQ(c.loss, LossKind::kHn);
}

TEST(ConfigTest, ResolvedTextRoundTrips) {
  const RunConfig c = parse_config(
      "loss = sct\narch = mlp\nepsilon = 0.125\ndecay_epoch = 3\nsynth_offset = 2.5\n", {});
  const std::string text = resolved_config_text(c);
  EXPECT_EQ(resolved_config_text(parse_config(text, {})), text);
  EXPECT_EQ(Lines(text).size(), config_keys().size());
}

TEST(GradcheckTest, DefaultSweepPassesAndCorruptionFails) {
  const auto rows = run_gradcheck(GradcheckOptions{});
  ASSERT_EQ(rows.size(), 15u);
  for (const auto& r : rows) {
    EXPECT_TRUE(r.pass) << to_string(r.loss) << "/" << to_string(r.arch);
    EXPECT_EQ(r.seeds_checked, 20u);
  }
  GradcheckOptions bad;
  bad.corrupt = std::make_pair(LossKind::kHn, EncoderKind::kMlp);
  for (const auto& r : run_gradcheck(bad))
    EXPECT_EQ(r.pass, !(r.loss == LossKind::kHn && r.arch == EncoderKind::kMlp));
}

}  // namespace
}  // namespace selhn
