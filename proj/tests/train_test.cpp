#include "mhnn/train.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <gtest/gtest.h>
#include <sstream>

#include "mhnn/checkpoint.hpp"
#include "mhnn/sweep.hpp"

using mhnn::MHNNConfig;
using mhnn::Model;
using mhnn::PerturbationSpec;
using mhnn::TrainConfig;
namespace data = mhnn::data;
namespace metrics = mhnn::metrics;

namespace {

MHNNConfig small_model_config() {
  MHNNConfig cfg;
  cfg.channels = 4;
  cfg.window = 32;
  cfg.classes = 3;
  cfg.levels = 2;
  cfg.filters = 8;
  return cfg;
}

TrainConfig quick_train_config(std::size_t max_epochs = 5,
                               std::size_t patience = 2) {
  TrainConfig tc;
  tc.batch_size = 32;
  tc.max_epochs = max_epochs;
  tc.patience = patience;
  tc.seed = 42;
  return tc;
}

data::LabeledWindowSet small_raw() {
  return data::synth_generate(16, 4, 32, 3, 11);
}

template <typename T>
std::vector<float> snapshot_params(Model<T>& model) {
  std::vector<float> out;
  for (auto& e : model.registry())
    for (auto v : e.tensor->data) out.push_back(static_cast<float>(v));
  return out;
}

}  // namespace

TEST(Train, SameSeedReproducesHistoryAndWeights) {
  const auto raw = small_raw();
  auto run = [&]() {
    return mhnn::train_pipeline<float>(raw, small_model_config(),
                                       quick_train_config());
  };
  auto a = run();
  auto b = run();
  ASSERT_EQ(a.result.history.size(), b.result.history.size());
  for (std::size_t i = 0; i < a.result.history.size(); ++i) {
    EXPECT_EQ(a.result.history[i].train_loss, b.result.history[i].train_loss);
    EXPECT_EQ(a.result.history[i].val_accuracy,
              b.result.history[i].val_accuracy);
  }
  EXPECT_EQ(snapshot_params(a.result.model), snapshot_params(b.result.model));
}

TEST(Train, ZeroPatienceRunsExactlyOneEpoch) {
  const auto raw = small_raw();
  auto pipeline = mhnn::train_pipeline<float>(raw, small_model_config(),
                                              quick_train_config(10, 0));
  EXPECT_EQ(pipeline.result.history.size(), 1u);
}

TEST(Train, EarlyStoppingKeepsBestEpochWeights) {
  const auto raw = small_raw();
  auto pipeline = mhnn::train_pipeline<float>(raw, small_model_config(),
                                              quick_train_config(12, 3));
  const auto& history = pipeline.result.history;
  ASSERT_FALSE(history.empty());
  double best = 0;
  for (const auto& e : history) best = std::max(best, e.val_accuracy);
  EXPECT_EQ(pipeline.result.best_val_accuracy, best);
  EXPECT_GE(pipeline.result.best_val_accuracy, history.back().val_accuracy);

  // restored weights reproduce the best-epoch validation accuracy
  data::LabeledWindowSet val = pipeline.val_raw;
  data::apply_standardization(val, pipeline.stats);
  const auto preds =
      pipeline.result.model.predict_labels(val.to_tensor<float>());
  const auto cm = metrics::confusion(preds, val.labels, 3);
  EXPECT_DOUBLE_EQ(metrics::accuracy(cm), pipeline.result.best_val_accuracy);
}

TEST(Train, DivergenceAbortsWithDiagnostic) {
  const auto raw = small_raw();
  TrainConfig tc = quick_train_config(8, 8);
  tc.lr = 1e30;  // guaranteed float overflow
  try {
    mhnn::train_pipeline<float>(raw, small_model_config(), tc);
    SUCCEED() << "training survived an absurd learning rate";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("non-finite loss"),
              std::string::npos);
  }
}

TEST(Evaluate, NoneAndZeroMaskAreBitIdentical) {
  const auto raw = small_raw();
  auto pipeline = mhnn::train_pipeline<float>(raw, small_model_config(),
                                              quick_train_config());
  PerturbationSpec none;
  PerturbationSpec zero_mask;
  zero_mask.kind = PerturbationSpec::Kind::MaskFixed;
  zero_mask.ratio = 0.0;
  zero_mask.seed = 9;
  const auto a = mhnn::evaluate(pipeline.result.model, pipeline.stats,
                                pipeline.test_raw, none);
  const auto b = mhnn::evaluate(pipeline.result.model, pipeline.stats,
                                pipeline.test_raw, zero_mask);
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
}

TEST(Evaluate, FullMaskGivesConstantPredictions) {
  const auto raw = small_raw();
  auto pipeline = mhnn::train_pipeline<float>(raw, small_model_config(),
                                              quick_train_config());
  PerturbationSpec full_mask;
  full_mask.kind = PerturbationSpec::Kind::MaskFixed;
  full_mask.ratio = 1.0;
  full_mask.seed = 9;

  data::LabeledWindowSet masked =
      data::mask_sensors_fixed(pipeline.test_raw, 1.0, 9);
  data::apply_standardization(masked, pipeline.stats);
  const auto preds =
      pipeline.result.model.predict_labels(masked.to_tensor<float>());
  for (std::size_t i = 1; i < preds.size(); ++i) EXPECT_EQ(preds[i], preds[0]);

  // accuracy equals the label frequency of the single predicted class
  std::size_t hits = 0;
  for (auto l : pipeline.test_raw.labels)
    if (l == preds[0]) ++hits;
  const auto report = mhnn::evaluate(pipeline.result.model, pipeline.stats,
                                     pipeline.test_raw, full_mask);
  EXPECT_DOUBLE_EQ(report.metrics.accuracy,
                   static_cast<double>(hits) /
                       static_cast<double>(pipeline.test_raw.size()));
}

TEST(Evaluate, DoesNotMutateTheInputSet) {
  const auto raw = small_raw();
  auto pipeline = mhnn::train_pipeline<float>(raw, small_model_config(),
                                              quick_train_config());
  const auto before = pipeline.test_raw.windows;
  PerturbationSpec noise;
  noise.kind = PerturbationSpec::Kind::Noise;
  noise.snr_db = -10.0;
  noise.seed = 3;
  mhnn::evaluate(pipeline.result.model, pipeline.stats, pipeline.test_raw,
                 noise);
  EXPECT_EQ(pipeline.test_raw.windows, before);
}

TEST(Evaluate, HighSnrBarelyMovesAccuracy) {
  const auto raw = data::synth_generate(32, 4, 32, 3, 13);
  auto pipeline = mhnn::train_pipeline<float>(raw, small_model_config(),
                                              quick_train_config(30, 8));
  PerturbationSpec clean;
  PerturbationSpec gentle;
  gentle.kind = PerturbationSpec::Kind::Noise;
  gentle.snr_db = 60.0;
  gentle.seed = 5;
  const auto a = mhnn::evaluate(pipeline.result.model, pipeline.stats,
                                pipeline.test_raw, clean);
  const auto b = mhnn::evaluate(pipeline.result.model, pipeline.stats,
                                pipeline.test_raw, gentle);
  const double one_sample =
      1.0 / static_cast<double>(pipeline.test_raw.size());
  EXPECT_LE(std::abs(a.metrics.accuracy - b.metrics.accuracy),
            one_sample + 1e-12);
}

TEST(Checkpoint, RoundTripsBitExactly) {
  const auto raw = small_raw();
  auto pipeline = mhnn::train_pipeline<float>(raw, small_model_config(),
                                              quick_train_config());
  const std::string path =
      (std::filesystem::temp_directory_path() / "mhnn_test.ckpt").string();
  mhnn::save_checkpoint(pipeline.result.model, pipeline.stats,
                        raw.channel_names, raw.class_names, path);
  auto loaded = mhnn::load_checkpoint<float>(path);
  EXPECT_EQ(snapshot_params(loaded.model),
            snapshot_params(pipeline.result.model));
  EXPECT_EQ(loaded.stats.mean, pipeline.stats.mean);
  EXPECT_EQ(loaded.class_names, raw.class_names);

  // saving the loaded model reproduces the file byte for byte
  const std::string path2 =
      (std::filesystem::temp_directory_path() / "mhnn_test2.ckpt").string();
  mhnn::save_checkpoint(loaded.model, loaded.stats, loaded.channel_names,
                        loaded.class_names, path2);
  std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  EXPECT_EQ(sa.str(), sb.str());
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}

TEST(Checkpoint, LoadedModelPredictsIdentically) {
  const auto raw = small_raw();
  auto pipeline = mhnn::train_pipeline<float>(raw, small_model_config(),
                                              quick_train_config());
  const std::string path =
      (std::filesystem::temp_directory_path() / "mhnn_test3.ckpt").string();
  mhnn::save_checkpoint(pipeline.result.model, pipeline.stats,
                        raw.channel_names, raw.class_names, path);
  auto loaded = mhnn::load_checkpoint<float>(path);
  data::LabeledWindowSet test = pipeline.test_raw;
  data::apply_standardization(test, pipeline.stats);
  const auto t = test.to_tensor<float>();
  EXPECT_EQ(pipeline.result.model.predict(t).data,
            loaded.model.predict(t).data);
  std::filesystem::remove(path);
}

TEST(Pipeline, PaperProtocolMonitorsTheTestSet) {
  const auto raw = small_raw();
  TrainConfig tc = quick_train_config();
  tc.paper_protocol = true;
  auto pipeline = mhnn::train_pipeline<float>(raw, small_model_config(), tc);
  EXPECT_EQ(pipeline.val_raw.windows, pipeline.test_raw.windows);
  EXPECT_EQ(pipeline.val_raw.labels, pipeline.test_raw.labels);
}

TEST(Sweep, MissingGridShape) {
  const auto raw = small_raw();
  auto pipeline = mhnn::train_pipeline<float>(raw, small_model_config(),
                                              quick_train_config());
  mhnn::SweepSpec spec;
  spec.mask_ratios = {0.1, 0.5};
  const auto rows = mhnn::sweep_missing(pipeline.result.model, pipeline.stats,
                                        pipeline.test_raw, spec, 42);
  ASSERT_EQ(rows.size(), 4u);  // 2 ratios x {fixed, random}
  EXPECT_EQ(rows[0].cell, "missing:fixed:0.1");
  EXPECT_EQ(rows[1].cell, "missing:random:0.1");
  EXPECT_EQ(rows[2].cell, "missing:fixed:0.5");
  EXPECT_EQ(rows[3].cell, "missing:random:0.5");
  for (const auto& r : rows) EXPECT_EQ(r.seed, 42u);
}

TEST(Sweep, NoiseRowPerLevel) {
  const auto raw = small_raw();
  auto pipeline = mhnn::train_pipeline<float>(raw, small_model_config(),
                                              quick_train_config());
  mhnn::SweepSpec spec;
  const auto rows = mhnn::sweep_noise(pipeline.result.model, pipeline.stats,
                                      pipeline.test_raw, spec, 42);
  ASSERT_EQ(rows.size(), 7u);
  EXPECT_EQ(rows[0].cell, "noise:-20");
  EXPECT_EQ(rows[6].cell, "noise:20");
  EXPECT_EQ(rows[0].perturb_kind, "noise");
}

TEST(Sweep, CsvHeaderIsPinned) {
  const auto csv = mhnn::sweep_csv({});
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "cell,variant,levels,last_level_mode,perturb_kind,param,accuracy,"
            "precision,recall,f1,seed,accuracy_pct,precision_pct,recall_pct,"
            "f1_pct");
}

TEST(Sweep, AblationTrainsEveryVariant) {
  const auto raw = small_raw();
  mhnn::SweepSpec spec;
  const auto rows = mhnn::sweep_ablation<float>(raw, small_model_config(),
                                                quick_train_config(3, 1), spec);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].variant, "Full");
  EXPECT_EQ(rows[1].variant, "NoMSE");
  EXPECT_EQ(rows[2].variant, "NoHFL");
  EXPECT_EQ(rows[3].variant, "NoCA");
  for (const auto& r : rows) {
    EXPECT_GE(r.metrics.accuracy, 0.0);
    EXPECT_LE(r.metrics.accuracy, 1.0);
  }
}

TEST(Sweep, SensitivityCoversTheGrid) {
  const auto raw = small_raw();
  mhnn::SweepSpec spec;
  const auto rows = mhnn::sweep_sensitivity<float>(
      raw, small_model_config(), quick_train_config(2, 1), spec);
  ASSERT_EQ(rows.size(), 9u);
  EXPECT_EQ(rows[0].cell, "sensitivity:L2_NoAC");
  EXPECT_EQ(rows[4].cell, "sensitivity:L3_ConAC");
  EXPECT_EQ(rows[8].cell, "sensitivity:L4_SepAC");
  EXPECT_EQ(rows[8].levels, 4u);
  EXPECT_EQ(rows[8].last_level_mode, "SepAC");
}
