#pragma once

// Experiment sweeps. Noise and missing-value sweeps reuse one trained model
// and vary only the evaluation perturbation; ablation and sensitivity sweeps
// train one model per cell with the shared seed. Each perturbation cell
// derives its rng stream from (seed, cell index) so execution order never
// changes results. Rows serialize to CSV with the metric fractions plus
// percentage columns.

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "mhnn/datasets.hpp"
#include "mhnn/metrics.hpp"
#include "mhnn/model.hpp"
#include "mhnn/train.hpp"

namespace mhnn {

struct SweepSpec {
  std::vector<double> snr_levels{-20, -10, -5, 0, 5, 10, 20};
  std::vector<double> mask_ratios{0.1, 0.2, 0.3, 0.4, 0.5};
  std::vector<PerturbationSpec::Kind> mask_kinds{
      PerturbationSpec::Kind::MaskFixed, PerturbationSpec::Kind::MaskRandom};
  std::vector<Variant> variants{Variant::Full, Variant::NoMSE, Variant::NoHFL,
                                Variant::NoCA};
  std::vector<std::size_t> sensitivity_levels{2, 3, 4};
  std::vector<LastLevelMode> sensitivity_modes{
      LastLevelMode::NoAC, LastLevelMode::ConAC, LastLevelMode::SepAC};

  void validate() const {
    require(!snr_levels.empty() && !mask_ratios.empty() &&
                !mask_kinds.empty() && !variants.empty() &&
                !sensitivity_levels.empty() && !sensitivity_modes.empty(),
            "sweep spec lists must be nonempty");
  }
};

struct SweepRow {
  std::string cell;
  std::string variant;
  std::size_t levels = 0;
  std::string last_level_mode;
  std::string perturb_kind = "none";
  double param = 0.0;
  metrics::MetricsSummary metrics;
  std::uint64_t seed = 0;
};

inline std::string format_param(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out =
      "cell,variant,levels,last_level_mode,perturb_kind,param,accuracy,"
      "precision,recall,f1,seed,accuracy_pct,precision_pct,recall_pct,f1_pct\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf),
                  ",%.6f,%.6f,%.6f,%.6f,%llu,%.2f,%.2f,%.2f,%.2f\n",
                  r.metrics.accuracy, r.metrics.macro_precision,
                  r.metrics.macro_recall, r.metrics.macro_f1,
                  static_cast<unsigned long long>(r.seed),
                  100.0 * r.metrics.accuracy, 100.0 * r.metrics.macro_precision,
                  100.0 * r.metrics.macro_recall, 100.0 * r.metrics.macro_f1);
    out += r.cell + "," + r.variant + "," + std::to_string(r.levels) + "," +
           r.last_level_mode + "," + r.perturb_kind + "," +
           format_param(r.param) + buf;
  }
  return out;
}

template <typename T>
SweepRow make_row(const std::string& cell, const EvaluationReport& report,
                  const Model<T>& model, double param,
                  std::uint64_t seed) {
  SweepRow row;
  row.cell = cell;
  row.variant = to_string(model.config.variant);
  row.levels = model.config.levels;
  row.last_level_mode = to_string(model.config.last_level_mode);
  row.perturb_kind = PerturbationSpec::kind_name(report.perturbation.kind);
  row.param = param;
  row.metrics = report.metrics;
  row.seed = seed;
  return row;
}

// One row per SNR level; the trained model is fixed.
template <typename T>
std::vector<SweepRow> sweep_noise(Model<T>& model,
                                  const data::ChannelStats& stats,
                                  const data::LabeledWindowSet& raw_set,
                                  const SweepSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < spec.snr_levels.size(); ++i) {
    PerturbationSpec p;
    p.kind = PerturbationSpec::Kind::Noise;
    p.snr_db = spec.snr_levels[i];
    p.seed = derive_seed(seed, i);
    const auto report = evaluate(model, stats, raw_set, p);
    rows.push_back(make_row("noise:" + format_param(p.snr_db), report, model,
                            p.snr_db, seed));
  }
  return rows;
}

// ratio x kind grid; one row per cell.
template <typename T>
std::vector<SweepRow> sweep_missing(Model<T>& model,
                                    const data::ChannelStats& stats,
                                    const data::LabeledWindowSet& raw_set,
                                    const SweepSpec& spec,
                                    std::uint64_t seed) {
  spec.validate();
  std::vector<SweepRow> rows;
  std::size_t cell = 0;
  for (double ratio : spec.mask_ratios) {
    for (auto kind : spec.mask_kinds) {
      PerturbationSpec p;
      p.kind = kind;
      p.ratio = ratio;
      p.seed = derive_seed(seed, cell);
      const auto report = evaluate(model, stats, raw_set, p);
      const std::string name =
          std::string(kind == PerturbationSpec::Kind::MaskFixed ? "fixed"
                                                                : "random");
      rows.push_back(make_row("missing:" + name + ":" + format_param(ratio),
                              report, model, ratio, seed));
      ++cell;
    }
  }
  return rows;
}

// Trains one model per variant with the shared seed; evaluates clean on the
// held-out split.
template <typename T>
std::vector<SweepRow> sweep_ablation(const data::LabeledWindowSet& raw,
                                     MHNNConfig base_config,
                                     const TrainConfig& tc,
                                     const SweepSpec& spec) {
  spec.validate();
  std::vector<SweepRow> rows;
  for (Variant v : spec.variants) {
    MHNNConfig config = base_config;
    config.variant = v;
    auto pipeline = train_pipeline<T>(raw, config, tc);
    const auto report = evaluate(pipeline.result.model, pipeline.stats,
                                 pipeline.test_raw);
    rows.push_back(make_row(std::string("ablation:") + to_string(v), report,
                            pipeline.result.model, 0.0, tc.seed));
  }
  return rows;
}

// levels x last-level-mode grid, one trained model per cell, shared seed.
template <typename T>
std::vector<SweepRow> sweep_sensitivity(const data::LabeledWindowSet& raw,
                                        MHNNConfig base_config,
                                        const TrainConfig& tc,
                                        const SweepSpec& spec) {
  spec.validate();
  std::vector<SweepRow> rows;
  for (std::size_t levels : spec.sensitivity_levels) {
    for (LastLevelMode mode : spec.sensitivity_modes) {
      MHNNConfig config = base_config;
      config.levels = levels;
      config.last_level_mode = mode;
      config.common_length = 0;  // follow the level count
      auto pipeline = train_pipeline<T>(raw, config, tc);
      const auto report = evaluate(pipeline.result.model, pipeline.stats,
                                   pipeline.test_raw);
      const std::string cell =
          "sensitivity:L" + std::to_string(levels) + "_" + to_string(mode);
      rows.push_back(make_row(cell, report, pipeline.result.model,
                              static_cast<double>(levels), tc.seed));
    }
  }
  return rows;
}

}  // namespace mhnn
