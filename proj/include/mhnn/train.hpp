#pragma once

// Training loop (seeded shuffling, minibatch Adam, per-epoch validation,
// early stopping that restores the best-validation weights) and perturbed
// evaluation. evaluate() applies the perturbation to a copy of the raw
// window set, then standardizes with the training statistics, so zeros and
// noise land in raw signal space.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "mhnn/datasets.hpp"
#include "mhnn/metrics.hpp"
#include "mhnn/model.hpp"
#include "mhnn/optimizer.hpp"

namespace mhnn {

struct TrainConfig {
  std::size_t batch_size = 128;
  double lr = 5e-4;
  std::size_t max_epochs = 300;
  std::size_t patience = 20;
  std::uint64_t seed = 42;
  double eval_split = 0.15;   // validation fraction
  double test_split = 0.15;   // final-report fraction
  int precision = 32;
  bool paper_protocol = false;  // monitor the test set directly

  void validate() const {
    require(batch_size >= 1, "batch_size must be >= 1");
    require(lr > 0.0, "lr must be positive");
    require(max_epochs >= 1, "max_epochs must be >= 1");
    require(eval_split > 0.0 && eval_split < 1.0,
            "eval_split must be in (0, 1)");
    require(test_split >= 0.0 && eval_split + test_split < 1.0,
            "splits must leave a training remainder");
    require(precision == 32 || precision == 64, "precision must be 32 or 64");
  }
};

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double val_macro_f1 = 0.0;
};

inline nlohmann::json history_json(const std::vector<EpochStats>& history) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : history)
    out.push_back({{"epoch", e.epoch},
                   {"train_loss", e.train_loss},
                   {"val_accuracy", e.val_accuracy},
                   {"val_macro_f1", e.val_macro_f1}});
  return out;
}

template <typename T>
struct TrainResult {
  Model<T> model;  // best-validation weights
  std::vector<EpochStats> history;
  std::size_t best_epoch = 0;
  double best_val_accuracy = 0.0;
};

// Both sets must already be standardized with the training statistics.
template <typename T>
TrainResult<T> train(const MHNNConfig& model_config,
                     const data::LabeledWindowSet& train_set,
                     const data::LabeledWindowSet& val_set,
                     const TrainConfig& tc) {
  tc.validate();
  require(train_set.size() >= 1 && val_set.size() >= 1,
          "train/val sets must be nonempty");

  Model<T> model(model_config, tc.seed);
  nn::AdamState<T> adam;
  adam.lr = tc.lr;
  auto params = model.trainable_params();
  for (Tensor<T>* p : params) p->ensure_grad();
  adam.init(params);

  const Tensor<T> train_windows = train_set.template to_tensor<T>();
  const Tensor<T> one_hot =
      make_one_hot<T>(train_set.labels, model_config.classes);
  const Tensor<T> val_windows = val_set.template to_tensor<T>();

  RngStream shuffle_rng(derive_seed(tc.seed, 0x73687566));
  RngStream dropout_rng(derive_seed(tc.seed, 0x64726f70));

  const std::size_t n = train_set.size();
  const std::size_t span = model_config.channels * model_config.window;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  TrainResult<T> result{Model<T>(model_config, tc.seed), {}, 0, -1.0};
  std::size_t epochs_since_best = 0;

  for (std::size_t epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = shuffle_rng.below(i);
      std::swap(order[i - 1], order[j]);
    }
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += tc.batch_size) {
      const std::size_t count = std::min(tc.batch_size, n - start);
      Tensor<T> bw({count, model_config.channels, model_config.window});
      Tensor<T> bl({count, model_config.classes});
      for (std::size_t i = 0; i < count; ++i) {
        const std::size_t src = order[start + i];
        std::copy(train_windows.data.begin() + src * span,
                  train_windows.data.begin() + (src + 1) * span,
                  bw.data.begin() + i * span);
        std::copy(one_hot.data.begin() + src * model_config.classes,
                  one_hot.data.begin() + (src + 1) * model_config.classes,
                  bl.data.begin() + i * model_config.classes);
      }
      model.zero_grads();
      Tape<T> tape;
      Var loss = model.loss(tape, bw, bl, Mode::Train, &dropout_rng);
      const double loss_value = static_cast<double>(tape.val(loss).data[0]);
      if (!std::isfinite(loss_value)) {
        // locate the first branch whose activations went non-finite
        ForwardProbe<T> probe;
        Tape<T> probe_tape;
        model.forward(probe_tape, bw, Mode::Eval, nullptr, &probe);
        std::string branch = "classifier/loss";
        for (std::size_t bi = 0; bi < probe.outputs.size(); ++bi) {
          bool bad = false;
          for (T v : probe.outputs[bi].data)
            if (!std::isfinite(static_cast<double>(v))) bad = true;
          if (bad) {
            branch = probe.names[bi];
            break;
          }
        }
        throw std::runtime_error(
            "non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
            std::to_string(batches) + " (branch '" + branch + "')");
      }
      tape.backward(loss);
      nn::adam_step(params, adam);
      loss_sum += loss_value;
      ++batches;
    }

    const auto preds = model.predict_labels(val_windows);
    const auto cm =
        metrics::confusion(preds, val_set.labels, model_config.classes);
    const auto summary = metrics::summarize(cm);

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(batches);
    stats.val_accuracy = summary.accuracy;
    stats.val_macro_f1 = summary.macro_f1;
    result.history.push_back(stats);

    if (summary.accuracy > result.best_val_accuracy) {
      result.best_val_accuracy = summary.accuracy;
      result.best_epoch = epoch;
      result.model = model;
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
    }
    if (epochs_since_best >= tc.patience) break;
  }
  return result;
}

struct PerturbationSpec {
  enum class Kind { None, Noise, MaskFixed, MaskRandom };
  Kind kind = Kind::None;
  double snr_db = 0.0;  // Noise only
  double ratio = 0.0;   // Mask* only
  std::uint64_t seed = 0;

  static const char* kind_name(Kind k) {
    switch (k) {
      case Kind::None: return "none";
      case Kind::Noise: return "noise";
      case Kind::MaskFixed: return "mask_fixed";
      case Kind::MaskRandom: return "mask_random";
    }
    return "none";
  }
};

inline data::LabeledWindowSet apply_perturbation(
    const data::LabeledWindowSet& set, const PerturbationSpec& p) {
  switch (p.kind) {
    case PerturbationSpec::Kind::None: return set;
    case PerturbationSpec::Kind::Noise:
      return data::add_noise(set, p.snr_db, p.seed);
    case PerturbationSpec::Kind::MaskFixed:
      return data::mask_sensors_fixed(set, p.ratio, p.seed);
    case PerturbationSpec::Kind::MaskRandom:
      return data::mask_sensors_random(set, p.ratio, p.seed);
  }
  return set;
}

struct EvaluationReport {
  metrics::MetricsSummary metrics;
  PerturbationSpec perturbation;
  std::string variant;
  std::size_t levels = 0;
  std::string last_level_mode;
  std::uint64_t seed = 0;

  // The serialized report carries exactly the metrics shape; sweep metadata
  // lives in sweep CSV rows.
  nlohmann::json to_json() const { return metrics::metrics_json(metrics); }
};

// raw_set holds unstandardized windows; perturbation (if any) is applied to
// a copy, which is then standardized with the checkpoint statistics.
template <typename T>
EvaluationReport evaluate(Model<T>& model, const data::ChannelStats& stats,
                          const data::LabeledWindowSet& raw_set,
                          const PerturbationSpec& perturbation = {}) {
  require(raw_set.channels == model.config.channels &&
              raw_set.steps == model.config.window,
          "shape mismatch: dataset does not match model config");
  data::LabeledWindowSet working = apply_perturbation(raw_set, perturbation);
  data::apply_standardization(working, stats);
  const Tensor<T> windows = working.template to_tensor<T>();
  const auto preds = model.predict_labels(windows);
  const auto cm =
      metrics::confusion(preds, working.labels, model.config.classes);

  EvaluationReport report;
  report.metrics = metrics::summarize(cm);
  report.perturbation = perturbation;
  report.variant = to_string(model.config.variant);
  report.levels = model.config.levels;
  report.last_level_mode = to_string(model.config.last_level_mode);
  report.seed = perturbation.seed;
  return report;
}

// Split + standardize + train; keeps the raw splits for perturbed evaluation.
template <typename T>
struct PipelineResult {
  TrainResult<T> result;
  data::ChannelStats stats;
  data::LabeledWindowSet train_raw, val_raw, test_raw;
};

template <typename T>
PipelineResult<T> train_pipeline(const data::LabeledWindowSet& raw,
                                 MHNNConfig model_config,
                                 const TrainConfig& tc) {
  tc.validate();
  data::SplitSets splits;
  if (tc.paper_protocol) {
    // two-way split; the held-out set is both the monitor and the report set
    splits = data::split_three(raw, 0.0, tc.eval_split + tc.test_split, tc.seed);
    splits.val = splits.test;
  } else {
    splits = data::split_three(raw, tc.eval_split, tc.test_split, tc.seed);
  }
  PipelineResult<T> out{
      TrainResult<T>{Model<T>(model_config, tc.seed), {}, 0, 0.0},
      {},
      splits.train,
      splits.val,
      splits.test};
  data::LabeledWindowSet train_std = splits.train;
  data::LabeledWindowSet val_std = splits.val;
  out.stats = data::standardize(train_std, {&val_std});
  out.result = train<T>(model_config, train_std, val_std, tc);
  return out;
}

}  // namespace mhnn
