#pragma once

// Command-line harness. Subcommands: synth, import, decompose, train, eval,
// sweep, report. Global flags: --seed, --config <json>, --precision {32,64}.
// Exit codes: 0 success, 2 usage/config error, 1 runtime error. All
// randomness flows from the single seed.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mhnn/blas.hpp"
#include "mhnn/checkpoint.hpp"
#include "mhnn/datasets.hpp"
#include "mhnn/model.hpp"
#include "mhnn/sweep.hpp"
#include "mhnn/train.hpp"
#include "mhnn/wavelet.hpp"

namespace mhnn::cli {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct HarnessConfig {
  MHNNConfig model;
  TrainConfig train;
  SweepSpec sweep;
};

inline PerturbationSpec::Kind mask_kind_from_string(const std::string& s) {
  if (s == "fixed") return PerturbationSpec::Kind::MaskFixed;
  if (s == "random") return PerturbationSpec::Kind::MaskRandom;
  throw UsageError("unknown mask kind '" + s + "' (expected fixed|random)");
}

inline HarnessConfig parse_config_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {
      // MHNNConfig
      "channels", "window", "classes", "levels", "variant", "last_level_mode",
      "filters", "agg_kernels", "dropout", "leaky_slope", "common_length",
      // TrainConfig
      "batch_size", "lr", "max_epochs", "patience", "seed", "eval_split",
      "test_split", "precision", "paper_protocol",
      // SweepSpec
      "snr_levels", "mask_ratios", "mask_kinds", "variants",
      "sensitivity_levels", "sensitivity_modes"};
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw UsageError("unknown config key '" + key + "'");

  HarnessConfig hc;
  try {
    hc.model = config_from_json(j);
    auto& t = hc.train;
    if (j.contains("batch_size")) t.batch_size = j.at("batch_size").get<std::size_t>();
    if (j.contains("lr")) t.lr = j.at("lr").get<double>();
    if (j.contains("max_epochs")) t.max_epochs = j.at("max_epochs").get<std::size_t>();
    if (j.contains("patience")) t.patience = j.at("patience").get<std::size_t>();
    if (j.contains("seed")) t.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("eval_split")) t.eval_split = j.at("eval_split").get<double>();
    if (j.contains("test_split")) t.test_split = j.at("test_split").get<double>();
    if (j.contains("precision")) t.precision = j.at("precision").get<int>();
    if (j.contains("paper_protocol"))
      t.paper_protocol = j.at("paper_protocol").get<bool>();
    auto& s = hc.sweep;
    if (j.contains("snr_levels"))
      s.snr_levels = j.at("snr_levels").get<std::vector<double>>();
    if (j.contains("mask_ratios"))
      s.mask_ratios = j.at("mask_ratios").get<std::vector<double>>();
    if (j.contains("mask_kinds")) {
      s.mask_kinds.clear();
      for (const auto& k : j.at("mask_kinds"))
        s.mask_kinds.push_back(mask_kind_from_string(k.get<std::string>()));
    }
    if (j.contains("variants")) {
      s.variants.clear();
      for (const auto& v : j.at("variants"))
        s.variants.push_back(variant_from_string(v.get<std::string>()));
    }
    if (j.contains("sensitivity_levels"))
      s.sensitivity_levels =
          j.at("sensitivity_levels").get<std::vector<std::size_t>>();
    if (j.contains("sensitivity_modes")) {
      s.sensitivity_modes.clear();
      for (const auto& m : j.at("sensitivity_modes"))
        s.sensitivity_modes.push_back(
            last_level_mode_from_string(m.get<std::string>()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("bad config value: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("bad config value: ") + e.what());
  }
  return hc;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot open '" + path + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  require(out.good(), "write failed for '" + path + "'");
}

struct CliContext {
  std::string command;
  std::uint64_t seed = 42;
  HarnessConfig cfg;

  // synth
  std::string out_path;
  std::size_t n_per_class = 64, channels = 6, steps = 64, classes = 4;
  // import
  std::string in_path, format = "wide";
  std::size_t width = 0;
  double overlap = 0.5, sample_rate = 0.0;
  // decompose
  std::string data_path, out_dir;
  std::size_t levels = 3, window_index = 0;
  // train
  std::string history_path;
  // eval / sweep
  std::string model_path, sweep_kind;
  std::optional<double> noise_snr, mask_fixed, mask_random;
  std::vector<double> snrs_override, ratios_override;
  // report
  std::string report_path;
};

template <typename T>
std::string format_component_csv(const Tensor<T>& mat) {
  const int digits = std::is_same_v<T, float> ? 9 : 17;
  std::string out;
  char buf[64];
  for (std::size_t c = 0; c < mat.dim(0); ++c) {
    for (std::size_t t = 0; t < mat.dim(1); ++t) {
      std::snprintf(buf, sizeof(buf), "%.*g", digits,
                    static_cast<double>(mat.at(c, t)));
      if (t) out += ',';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

template <typename T>
int cmd_synth(const CliContext& ctx) {
  const auto set = data::synth_generate(ctx.n_per_class, ctx.channels,
                                        ctx.steps, ctx.classes, ctx.seed);
  data::save_binary(set, ctx.out_path);
  std::printf("wrote %zu windows (%zu x %zu x %zu, %zu classes) to %s\n",
              set.size(), set.size(), set.channels, set.steps,
              set.num_classes(), ctx.out_path.c_str());
  return 0;
}

template <typename T>
int cmd_import(const CliContext& ctx) {
  data::LabeledWindowSet set;
  if (ctx.format == "wide") {
    set = data::load_csv_wide(ctx.in_path);
  } else if (ctx.format == "long") {
    if (ctx.width == 0)
      throw UsageError("--width is required for --format long");
    auto [series, step_labels] = data::load_csv_long(ctx.in_path);
    set = data::sliding_window(series, step_labels, ctx.width, ctx.overlap);
  } else {
    throw UsageError("--format must be wide or long");
  }
  if (ctx.sample_rate > 0) set.sample_rate_hz = ctx.sample_rate;
  data::save_binary(set, ctx.out_path);
  std::printf("imported %zu windows (%zu channels x %zu steps) to %s\n",
              set.size(), set.channels, set.steps, ctx.out_path.c_str());
  return 0;
}

template <typename T>
int cmd_decompose(const CliContext& ctx) {
  const auto set = data::load_binary(ctx.data_path);
  require(ctx.window_index < set.size(), "window index out of range");
  Tensor<T> window({set.channels, set.steps});
  const float* src = set.window_ptr(ctx.window_index);
  for (std::size_t i = 0; i < window.numel(); ++i)
    window.data[i] = static_cast<T>(src[i]);

  const auto filters = wavelet::haar_filters<T>();
  const auto pyramid = wavelet::mdwd(window, filters, ctx.levels);

  std::filesystem::create_directories(ctx.out_dir);
  const std::filesystem::path dir(ctx.out_dir);
  write_text((dir / "x.csv").string(), format_component_csv(pyramid.x));
  for (std::size_t i = 0; i < pyramid.levels; ++i)
    write_text((dir / ("h" + std::to_string(i + 1) + ".csv")).string(),
               format_component_csv(pyramid.details[i]));
  write_text((dir / ("l" + std::to_string(pyramid.levels) + ".csv")).string(),
             format_component_csv(pyramid.approx));
  std::printf("wrote %zu component files to %s\n", pyramid.levels + 2,
              ctx.out_dir.c_str());
  return 0;
}

inline MHNNConfig resolve_model_config(const CliContext& ctx,
                                       const data::LabeledWindowSet& set) {
  MHNNConfig mc = ctx.cfg.model;
  if (mc.channels == 0) mc.channels = set.channels;
  if (mc.window == 0) mc.window = set.steps;
  if (mc.classes == 0) mc.classes = set.num_classes();
  if (mc.channels != set.channels || mc.window != set.steps ||
      mc.classes != set.num_classes())
    throw UsageError("config dims do not match the dataset");
  return mc;
}

template <typename T>
int cmd_train(const CliContext& ctx) {
  const auto raw = data::load_binary(ctx.data_path);
  const MHNNConfig mc = resolve_model_config(ctx, raw);
  TrainConfig tc = ctx.cfg.train;
  tc.seed = ctx.seed;

  auto pipeline = train_pipeline<T>(raw, mc, tc);
  auto& model = pipeline.result.model;
  std::printf("model %s L%zu_%s, %zu parameters\n", to_string(mc.variant),
              mc.levels, to_string(mc.last_level_mode),
              model.parameter_count());

  save_checkpoint(model, pipeline.stats, raw.channel_names, raw.class_names,
                  ctx.out_path);
  const std::string history_path =
      ctx.history_path.empty() ? ctx.out_path + ".history.json"
                               : ctx.history_path;
  write_text(history_path, history_json(pipeline.result.history).dump(2) + "\n");

  const auto test_report = evaluate(model, pipeline.stats, pipeline.test_raw);
  std::printf(
      "best epoch %zu/%zu, val accuracy %.4f, held-out accuracy %.4f\n",
      pipeline.result.best_epoch, pipeline.result.history.size(),
      pipeline.result.best_val_accuracy, test_report.metrics.accuracy);
  return 0;
}

template <typename T>
int cmd_eval(const CliContext& ctx) {
  auto loaded = load_checkpoint<T>(ctx.model_path);
  const auto raw = data::load_binary(ctx.data_path);

  PerturbationSpec p;
  p.seed = ctx.seed;
  if (ctx.noise_snr) {
    p.kind = PerturbationSpec::Kind::Noise;
    p.snr_db = *ctx.noise_snr;
  } else if (ctx.mask_fixed) {
    p.kind = PerturbationSpec::Kind::MaskFixed;
    p.ratio = *ctx.mask_fixed;
  } else if (ctx.mask_random) {
    p.kind = PerturbationSpec::Kind::MaskRandom;
    p.ratio = *ctx.mask_random;
  }

  const auto report = evaluate(loaded.model, loaded.stats, raw, p);
  const std::string text = report.to_json().dump(2) + "\n";
  if (ctx.out_path.empty())
    std::fputs(text.c_str(), stdout);
  else
    write_text(ctx.out_path, text);
  return 0;
}

template <typename T>
int cmd_sweep(const CliContext& ctx) {
  SweepSpec spec = ctx.cfg.sweep;
  if (!ctx.snrs_override.empty()) spec.snr_levels = ctx.snrs_override;
  if (!ctx.ratios_override.empty()) spec.mask_ratios = ctx.ratios_override;

  std::vector<SweepRow> rows;
  if (ctx.sweep_kind == "noise" || ctx.sweep_kind == "missing") {
    if (ctx.model_path.empty())
      throw UsageError("--model is required for noise/missing sweeps");
    auto loaded = load_checkpoint<T>(ctx.model_path);
    const auto raw = data::load_binary(ctx.data_path);
    rows = ctx.sweep_kind == "noise"
               ? sweep_noise(loaded.model, loaded.stats, raw, spec, ctx.seed)
               : sweep_missing(loaded.model, loaded.stats, raw, spec, ctx.seed);
  } else if (ctx.sweep_kind == "ablation" || ctx.sweep_kind == "sensitivity") {
    const auto raw = data::load_binary(ctx.data_path);
    const MHNNConfig mc = resolve_model_config(ctx, raw);
    TrainConfig tc = ctx.cfg.train;
    tc.seed = ctx.seed;
    rows = ctx.sweep_kind == "ablation"
               ? sweep_ablation<T>(raw, mc, tc, spec)
               : sweep_sensitivity<T>(raw, mc, tc, spec);
  } else {
    throw UsageError("unknown sweep kind '" + ctx.sweep_kind +
                     "' (expected noise|missing|ablation|sensitivity)");
  }
  write_text(ctx.out_path, sweep_csv(rows));
  std::printf("wrote %zu sweep rows to %s\n", rows.size(),
              ctx.out_path.c_str());
  return 0;
}

inline int cmd_report(const CliContext& ctx) {
  std::ifstream in(ctx.report_path);
  require(in.good(), "cannot open '" + ctx.report_path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  if (ctx.report_path.size() >= 4 &&
      ctx.report_path.substr(ctx.report_path.size() - 4) == ".csv") {
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
      std::istringstream fields(line);
      std::string field;
      while (std::getline(fields, field, ','))
        std::printf("%-22s", field.c_str());
      std::printf("\n");
    }
    return 0;
  }

  const auto j = nlohmann::json::parse(text);
  std::printf("accuracy        %.4f\n", j.at("accuracy").get<double>());
  std::printf("macro precision %.4f\n", j.at("macro_precision").get<double>());
  std::printf("macro recall    %.4f\n", j.at("macro_recall").get<double>());
  std::printf("macro f1        %.4f\n", j.at("macro_f1").get<double>());
  for (const auto& c : j.at("per_class"))
    std::printf("  class %zu: precision %.4f recall %.4f f1 %.4f%s\n",
                c.at("class").get<std::size_t>(),
                c.at("precision").get<double>(), c.at("recall").get<double>(),
                c.at("f1").get<double>(),
                c.at("flagged").get<bool>() ? " (zero denominator)" : "");
  return 0;
}

template <typename T>
int dispatch(const CliContext& ctx) {
  if (ctx.command == "synth") return cmd_synth<T>(ctx);
  if (ctx.command == "import") return cmd_import<T>(ctx);
  if (ctx.command == "decompose") return cmd_decompose<T>(ctx);
  if (ctx.command == "train") return cmd_train<T>(ctx);
  if (ctx.command == "eval") return cmd_eval<T>(ctx);
  if (ctx.command == "sweep") return cmd_sweep<T>(ctx);
  if (ctx.command == "report") return cmd_report(ctx);
  throw UsageError("no subcommand given");
}

inline int run_cli(int argc, const char* const* argv) {
  blas::pin_single_thread();

  CLI::App app{"MHNN sensor-window classification harness"};
  app.fallthrough();
  app.require_subcommand(0, 1);

  std::string config_path;
  std::uint64_t seed = 42;
  int precision = 0;
  app.add_option("--seed", seed, "global random seed (default 42)");
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--precision", precision, "numeric precision: 32 or 64")
      ->check(CLI::IsMember({0, 32, 64}));

  CliContext ctx;

  auto* synth = app.add_subcommand("synth", "generate a synthetic window set");
  synth->add_option("--out", ctx.out_path, "output .mhws path")->required();
  synth->add_option("--n-per-class", ctx.n_per_class, "windows per class");
  synth->add_option("--channels", ctx.channels, "channel count");
  synth->add_option("--steps", ctx.steps, "window length");
  synth->add_option("--classes", ctx.classes, "class count");

  auto* import_cmd = app.add_subcommand("import", "import a CSV dataset");
  import_cmd->add_option("--in", ctx.in_path, "input csv")->required();
  import_cmd->add_option("--out", ctx.out_path, "output .mhws path")->required();
  import_cmd->add_option("--format", ctx.format, "wide|long")->required();
  import_cmd->add_option("--width", ctx.width, "window width (long format)");
  import_cmd->add_option("--overlap", ctx.overlap,
                         "window overlap fraction (long format)");
  import_cmd->add_option("--sample-rate", ctx.sample_rate, "sample rate in Hz");

  auto* decompose =
      app.add_subcommand("decompose", "write wavelet components as CSV");
  decompose->add_option("--data", ctx.data_path, "input .mhws")->required();
  decompose->add_option("--out-dir", ctx.out_dir, "output directory")
      ->required();
  decompose->add_option("--levels", ctx.levels, "decomposition depth");
  decompose->add_option("--window", ctx.window_index, "window index");

  auto* train_cmd = app.add_subcommand("train", "train a model");
  train_cmd->add_option("--data", ctx.data_path, "input .mhws")->required();
  train_cmd->add_option("--out", ctx.out_path, "output checkpoint")->required();
  train_cmd->add_option("--history", ctx.history_path,
                        "history JSON path (default <out>.history.json)");
  bool paper_protocol = false;
  train_cmd->add_flag("--paper-protocol", paper_protocol,
                      "monitor the held-out test set for early stopping");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--model", ctx.model_path, "checkpoint path")->required();
  eval_cmd->add_option("--data", ctx.data_path, "input .mhws")->required();
  eval_cmd->add_option("--out", ctx.out_path, "report JSON path (default stdout)");
  auto* opt_noise =
      eval_cmd->add_option("--noise-snr", ctx.noise_snr, "add noise at this SNR (dB)");
  auto* opt_fixed = eval_cmd->add_option("--mask-fixed", ctx.mask_fixed,
                                         "leave-fixed-sensors-out ratio");
  auto* opt_random = eval_cmd->add_option("--mask-random", ctx.mask_random,
                                          "leave-random-sensors-out ratio");
  opt_noise->excludes(opt_fixed)->excludes(opt_random);
  opt_fixed->excludes(opt_random);

  auto* sweep_cmd = app.add_subcommand("sweep", "run an experiment sweep");
  sweep_cmd
      ->add_option("kind", ctx.sweep_kind,
                   "noise|missing|ablation|sensitivity")
      ->required();
  sweep_cmd->add_option("--data", ctx.data_path, "input .mhws")->required();
  sweep_cmd->add_option("--model", ctx.model_path,
                        "checkpoint (noise/missing sweeps)");
  sweep_cmd->add_option("--out", ctx.out_path, "output CSV path")->required();
  sweep_cmd->add_option("--snrs", ctx.snrs_override, "SNR levels override")
      ->delimiter(',');
  sweep_cmd->add_option("--ratios", ctx.ratios_override, "mask ratios override")
      ->delimiter(',');

  auto* report_cmd =
      app.add_subcommand("report", "pretty-print a report JSON or sweep CSV");
  report_cmd->add_option("--in", ctx.report_path, "report file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in.good()) throw UsageError("cannot open config '" + config_path + "'");
      nlohmann::json j;
      try {
        in >> j;
      } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("bad config JSON: ") + e.what());
      }
      ctx.cfg = parse_config_json(j);
    }
    // CLI flags override config values
    if (app.count("--seed"))
      ctx.seed = seed;
    else
      ctx.seed = ctx.cfg.train.seed;
    if (precision != 0) ctx.cfg.train.precision = precision;
    if (paper_protocol) ctx.cfg.train.paper_protocol = true;

    for (auto* sub : {synth, import_cmd, decompose, train_cmd, eval_cmd,
                      sweep_cmd, report_cmd})
      if (sub->parsed()) ctx.command = sub->get_name();
    if (ctx.command.empty()) throw UsageError("no subcommand given (see --help)");

    if (ctx.cfg.train.precision == 64) return dispatch<double>(ctx);
    return dispatch<float>(ctx);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace mhnn::cli
