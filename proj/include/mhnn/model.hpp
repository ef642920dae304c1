#pragma once

// The four-part network: multilevel signals extractor (wavelet pyramid),
// heterogeneous feature learner (one subnet per component, complexity
// inversely proportional to decomposition depth), cross aggregation, and a
// softmax classifier. Ablation variants (NoMSE / NoHFL / NoCA) and the
// last-level modes (NoAC / ConAC / SepAC) reshape the branch roster and the
// fusion stage.
//
// Branch outputs are aligned to a common temporal length L_c =
// ceil(T / 2^levels): conv branches by adaptive average pooling, the MLP
// branch by tiling its feature vector along time.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mhnn/autograd.hpp"
#include "mhnn/gradcheck.hpp"
#include "mhnn/layers.hpp"
#include "mhnn/rng.hpp"
#include "mhnn/tensor.hpp"
#include "mhnn/wavelet.hpp"

namespace mhnn {

enum class Variant { Full, NoMSE, NoHFL, NoCA };
enum class LastLevelMode { NoAC, ConAC, SepAC };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::Full: return "Full";
    case Variant::NoMSE: return "NoMSE";
    case Variant::NoHFL: return "NoHFL";
    case Variant::NoCA: return "NoCA";
  }
  return "Full";
}

inline const char* to_string(LastLevelMode m) {
  switch (m) {
    case LastLevelMode::NoAC: return "NoAC";
    case LastLevelMode::ConAC: return "ConAC";
    case LastLevelMode::SepAC: return "SepAC";
  }
  return "NoAC";
}

inline Variant variant_from_string(const std::string& s) {
  if (s == "Full") return Variant::Full;
  if (s == "NoMSE") return Variant::NoMSE;
  if (s == "NoHFL") return Variant::NoHFL;
  if (s == "NoCA") return Variant::NoCA;
  fail("unknown variant '" + s + "'");
}

inline LastLevelMode last_level_mode_from_string(const std::string& s) {
  if (s == "NoAC") return LastLevelMode::NoAC;
  if (s == "ConAC") return LastLevelMode::ConAC;
  if (s == "SepAC") return LastLevelMode::SepAC;
  fail("unknown last_level_mode '" + s + "'");
}

struct MHNNConfig {
  std::size_t channels = 0;
  std::size_t window = 0;
  std::size_t classes = 0;
  std::size_t levels = 3;
  Variant variant = Variant::Full;
  LastLevelMode last_level_mode = LastLevelMode::NoAC;
  std::size_t filters = 128;
  std::vector<int> agg_kernels{7, 5, 3};
  double dropout = 0.2;
  double leaky_slope = 0.01;
  std::size_t common_length = 0;  // 0 -> ceil(window / 2^levels)

  std::size_t effective_common_length() const {
    if (common_length > 0) return common_length;
    std::size_t len = window;
    for (std::size_t i = 0; i < levels; ++i) len = (len + 1) / 2;
    return len;
  }

  void validate() const {
    require(channels >= 1, "config invariant violated: channels >= 1");
    require(classes >= 2, "config invariant violated: classes >= 2");
    require(levels >= 1, "config invariant violated: levels >= 1");
    require(window >= (std::size_t{1} << levels),
            "config invariant violated: window >= 2^levels");
    require(filters >= 1, "config invariant violated: filters >= 1");
    require(!agg_kernels.empty(),
            "config invariant violated: agg_kernels nonempty");
    for (int k : agg_kernels)
      require(k > 0 && k % 2 == 1,
              "config invariant violated: agg_kernels all odd");
    require(dropout >= 0.0 && dropout < 1.0,
            "config invariant violated: dropout in [0, 1)");
    require(leaky_slope >= 0.0 && leaky_slope < 1.0,
            "config invariant violated: leaky_slope in [0, 1)");
  }
};

inline nlohmann::json config_to_json(const MHNNConfig& c) {
  return nlohmann::json{{"channels", c.channels},
                        {"window", c.window},
                        {"classes", c.classes},
                        {"levels", c.levels},
                        {"variant", to_string(c.variant)},
                        {"last_level_mode", to_string(c.last_level_mode)},
                        {"filters", c.filters},
                        {"agg_kernels", c.agg_kernels},
                        {"dropout", c.dropout},
                        {"leaky_slope", c.leaky_slope},
                        {"common_length", c.common_length}};
}

inline MHNNConfig config_from_json(const nlohmann::json& j) {
  MHNNConfig c;
  if (j.contains("channels")) c.channels = j.at("channels").get<std::size_t>();
  if (j.contains("window")) c.window = j.at("window").get<std::size_t>();
  if (j.contains("classes")) c.classes = j.at("classes").get<std::size_t>();
  if (j.contains("levels")) c.levels = j.at("levels").get<std::size_t>();
  if (j.contains("variant"))
    c.variant = variant_from_string(j.at("variant").get<std::string>());
  if (j.contains("last_level_mode"))
    c.last_level_mode =
        last_level_mode_from_string(j.at("last_level_mode").get<std::string>());
  if (j.contains("filters")) c.filters = j.at("filters").get<std::size_t>();
  if (j.contains("agg_kernels"))
    c.agg_kernels = j.at("agg_kernels").get<std::vector<int>>();
  if (j.contains("dropout")) c.dropout = j.at("dropout").get<double>();
  if (j.contains("leaky_slope"))
    c.leaky_slope = j.at("leaky_slope").get<double>();
  if (j.contains("common_length"))
    c.common_length = j.at("common_length").get<std::size_t>();
  return c;
}

enum class BranchInput { Raw, Detail, Approx, DetailPlusApprox };
enum class ExtractorKind { ResidualConvStack, ConvStack3, ConvStack1, Mlp };

struct BranchSpec {
  std::string name;
  BranchInput input = BranchInput::Raw;
  std::size_t level = 0;  // decomposition level for Detail/Approx inputs
  ExtractorKind kind = ExtractorKind::ResidualConvStack;
};

// Deepest detail gets the MLP, next a single conv block, shallower details
// three conv blocks; the raw signal keeps the seven-block residual stack.
// NoHFL homogenizes every extractor to the three-block stack; NoMSE feeds
// the raw window to every branch.
inline std::vector<BranchSpec> branch_roster(const MHNNConfig& cfg) {
  std::vector<BranchSpec> roster;
  const bool no_hfl = cfg.variant == Variant::NoHFL;
  roster.push_back({"x", BranchInput::Raw, 0,
                    no_hfl ? ExtractorKind::ConvStack3
                           : ExtractorKind::ResidualConvStack});
  for (std::size_t i = 1; i <= cfg.levels; ++i) {
    const std::size_t depth_from_deepest = cfg.levels - i;
    ExtractorKind kind = ExtractorKind::ConvStack3;
    if (depth_from_deepest == 0)
      kind = ExtractorKind::Mlp;
    else if (depth_from_deepest == 1)
      kind = ExtractorKind::ConvStack1;
    if (no_hfl) kind = ExtractorKind::ConvStack3;
    BranchInput input = BranchInput::Detail;
    if (i == cfg.levels && cfg.last_level_mode == LastLevelMode::ConAC)
      input = BranchInput::DetailPlusApprox;
    roster.push_back({"h" + std::to_string(i), input, i, kind});
  }
  if (cfg.last_level_mode == LastLevelMode::SepAC)
    roster.push_back({"l" + std::to_string(cfg.levels), BranchInput::Approx,
                      cfg.levels,
                      no_hfl ? ExtractorKind::ConvStack3 : ExtractorKind::Mlp});
  if (cfg.variant == Variant::NoMSE)
    for (auto& spec : roster) spec.input = BranchInput::Raw;
  return roster;
}

template <typename T>
struct ForwardProbe {
  std::vector<std::string> names;
  std::vector<Tensor<T>> inputs;   // branch inputs, pre-extractor
  std::vector<Tensor<T>> outputs;  // aligned branch outputs, B x F x L_c
};

template <typename T>
Tensor<T> make_one_hot(const std::vector<std::uint32_t>& labels,
                       std::size_t classes) {
  Tensor<T> out({labels.size(), classes});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] < classes, "label out of range");
    out.data[i * classes + labels[i]] = T(1);
  }
  return out;
}

inline std::vector<std::size_t> level_lengths(std::size_t t,
                                              std::size_t levels) {
  std::vector<std::size_t> out(levels + 1);
  out[0] = t;
  for (std::size_t i = 1; i <= levels; ++i) out[i] = (out[i - 1] + 1) / 2;
  return out;
}

template <typename T>
class Model {
 public:
  MHNNConfig config;
  std::vector<BranchSpec> roster;

  Model(const MHNNConfig& cfg, std::uint64_t seed)
      : config(cfg), filters_(wavelet::haar_filters<T>()) {
    config.validate();
    roster = branch_roster(config);
    build_parameters();
    RngStream rng(derive_seed(seed, 0x696e6974));  // "init" stream
    initialize(rng);
  }

  // Probability forward pass: B x C x T -> B x K, rows summing to 1.
  Var forward(Tape<T>& tape, const Tensor<T>& windows, Mode mode,
              RngStream* rng = nullptr, ForwardProbe<T>* probe = nullptr) {
    require(windows.rank() == 3, "shape mismatch: expected B x C x T windows");
    require(windows.dim(1) == config.channels &&
                windows.dim(2) == config.window,
            "shape mismatch: window dims do not match model config");
    const std::size_t batch = windows.dim(0);
    require(batch >= 1, "shape mismatch: empty batch");

    const auto lens = level_lengths(config.window, config.levels);
    const std::size_t common = config.effective_common_length();

    bool needs_components = false;
    for (const auto& spec : roster)
      if (spec.input != BranchInput::Raw) needs_components = true;

    std::vector<Tensor<T>> details;
    Tensor<T> approx;
    if (needs_components) {
      // Channels are independent, so one decomposition of the flattened
      // (B*C) x T matrix covers the whole batch.
      Tensor<T> flat({batch * config.channels, config.window}, windows.data);
      auto pyr = wavelet::mdwd(flat, filters_, config.levels);
      details.reserve(config.levels);
      for (std::size_t i = 0; i < config.levels; ++i) {
        pyr.details[i].shape = {batch, config.channels, lens[i + 1]};
        details.push_back(std::move(pyr.details[i]));
      }
      pyr.approx.shape = {batch, config.channels, lens[config.levels]};
      approx = std::move(pyr.approx);
    }

    Var raw_var;
    std::vector<Var> branch_outs;
    for (std::size_t bi = 0; bi < roster.size(); ++bi) {
      const BranchSpec& spec = roster[bi];
      Var in;
      switch (spec.input) {
        case BranchInput::Raw:
          if (!raw_var.ok()) raw_var = tape.input(windows);
          in = raw_var;
          break;
        case BranchInput::Detail:
          in = tape.input(details[spec.level - 1]);
          break;
        case BranchInput::Approx:
          in = tape.input(approx);
          break;
        case BranchInput::DetailPlusApprox: {
          Var d = tape.input(details[spec.level - 1]);
          Var a = tape.input(approx);
          in = nn::concat_channels(tape, {d, a});
          break;
        }
      }
      if (probe) {
        probe->names.push_back(spec.name);
        probe->inputs.push_back(tape.val(in));
      }
      Var out = run_branch(tape, in, bi, mode, rng);
      Var aligned = spec.kind == ExtractorKind::Mlp
                        ? nn::tile_time(tape, out, common)
                        : nn::adaptive_avg_pool1d(tape, out, common);
      if (probe) probe->outputs.push_back(tape.val(aligned));
      branch_outs.push_back(aligned);
    }

    Var features = config.variant == Variant::NoCA
                       ? nn::concat_channels(tape, branch_outs)
                       : cross_aggregate(tape, branch_outs, mode);
    Var pooled = nn::global_avg_pool(tape, features);
    Var logits = nn::linear(tape, pooled, classifier_);
    return nn::softmax(tape, logits);
  }

  Var loss(Tape<T>& tape, const Tensor<T>& windows, const Tensor<T>& one_hot,
           Mode mode, RngStream* rng = nullptr,
           ForwardProbe<T>* probe = nullptr) {
    Var probs = forward(tape, windows, mode, rng, probe);
    return nn::cross_entropy(tape, probs, one_hot);
  }

  // Eval-mode batched inference; returns N x K probabilities.
  Tensor<T> predict(const Tensor<T>& windows, std::size_t batch_size = 256) {
    require(windows.rank() == 3, "shape mismatch: expected N x C x T windows");
    const std::size_t n = windows.dim(0);
    const std::size_t span = config.channels * config.window;
    Tensor<T> probs({n, config.classes});
    for (std::size_t start = 0; start < n; start += batch_size) {
      const std::size_t count = std::min(batch_size, n - start);
      Tensor<T> chunk({count, config.channels, config.window});
      std::copy(windows.data.begin() + start * span,
                windows.data.begin() + (start + count) * span,
                chunk.data.begin());
      Tape<T> tape;
      Var out = forward(tape, chunk, Mode::Eval);
      const Tensor<T>& ov = tape.val(out);
      std::copy(ov.data.begin(), ov.data.end(),
                probs.data.begin() + start * config.classes);
    }
    return probs;
  }

  std::vector<std::uint32_t> predict_labels(const Tensor<T>& windows) {
    Tensor<T> probs = predict(windows);
    std::vector<std::uint32_t> out(probs.dim(0));
    for (std::size_t i = 0; i < probs.dim(0); ++i) {
      const T* row = probs.data.data() + i * config.classes;
      std::size_t best = 0;
      for (std::size_t k = 1; k < config.classes; ++k)
        if (row[k] > row[best]) best = k;
      out[i] = static_cast<std::uint32_t>(best);
    }
    return out;
  }

  struct RegistryEntry {
    std::string name;
    Tensor<T>* tensor;
    bool trainable;
  };

  std::vector<RegistryEntry> registry() {
    std::vector<RegistryEntry> reg;
    auto add_block = [&reg](const std::string& prefix,
                            nn::Conv1dBlockParams<T>& b) {
      reg.push_back({prefix + ".kernel", &b.kernel, true});
      reg.push_back({prefix + ".bias", &b.bias, true});
      reg.push_back({prefix + ".bn_gamma", &b.bn_gamma, true});
      reg.push_back({prefix + ".bn_beta", &b.bn_beta, true});
      reg.push_back({prefix + ".bn_running_mean", &b.bn_running_mean, false});
      reg.push_back({prefix + ".bn_running_var", &b.bn_running_var, false});
    };
    for (std::size_t bi = 0; bi < branches_.size(); ++bi) {
      const std::string base = "branch." + roster[bi].name;
      auto& bp = branches_[bi];
      for (std::size_t j = 0; j < bp.conv.size(); ++j)
        add_block(base + ".conv" + std::to_string(j), bp.conv[j]);
      for (std::size_t j = 0; j < bp.mlp.size(); ++j) {
        reg.push_back({base + ".fc" + std::to_string(j) + ".weight",
                       &bp.mlp[j].weight, true});
        reg.push_back(
            {base + ".fc" + std::to_string(j) + ".bias", &bp.mlp[j].bias, true});
      }
    }
    for (std::size_t bi = 0; bi < agg_.size(); ++bi) {
      const std::string base = "agg." + roster[bi].name;
      for (std::size_t j = 0; j < agg_[bi].aux.size(); ++j)
        add_block(base + ".aux" + std::to_string(j), agg_[bi].aux[j]);
      for (std::size_t j = 0; j < agg_[bi].cross.size(); ++j)
        add_block(base + ".cross" + std::to_string(j), agg_[bi].cross[j]);
    }
    reg.push_back({"classifier.weight", &classifier_.weight, true});
    reg.push_back({"classifier.bias", &classifier_.bias, true});
    return reg;
  }

  std::vector<Tensor<T>*> trainable_params() {
    std::vector<Tensor<T>*> out;
    for (auto& e : registry())
      if (e.trainable) out.push_back(e.tensor);
    return out;
  }

  std::size_t parameter_count() {
    std::size_t total = 0;
    for (auto& e : registry())
      if (e.trainable) total += e.tensor->numel();
    return total;
  }

  void zero_grads() {
    for (Tensor<T>* p : trainable_params()) {
      p->ensure_grad();
      p->zero_grad();
    }
  }

 private:
  struct BranchParams {
    std::vector<nn::Conv1dBlockParams<T>> conv;
    std::vector<nn::LinearParams<T>> mlp;
  };
  struct AggBranchParams {
    std::vector<nn::Conv1dBlockParams<T>> aux, cross;
  };

  wavelet::FilterPair<T> filters_;
  std::vector<BranchParams> branches_;
  std::vector<AggBranchParams> agg_;
  nn::LinearParams<T> classifier_;

  std::size_t branch_in_channels(const BranchSpec& spec) const {
    return spec.input == BranchInput::DetailPlusApprox ? 2 * config.channels
                                                       : config.channels;
  }

  std::size_t branch_in_length(const BranchSpec& spec) const {
    const auto lens = level_lengths(config.window, config.levels);
    switch (spec.input) {
      case BranchInput::Raw: return config.window;
      case BranchInput::Detail: return lens[spec.level];
      case BranchInput::Approx:
      case BranchInput::DetailPlusApprox: return lens[config.levels];
    }
    return config.window;
  }

  void build_parameters() {
    const std::size_t f = config.filters;
    for (const auto& spec : roster) {
      BranchParams bp;
      const std::size_t in_ch = branch_in_channels(spec);
      switch (spec.kind) {
        case ExtractorKind::ResidualConvStack: {
          const int kernels[7] = {7, 7, 5, 5, 3, 3, 3};
          for (int j = 0; j < 7; ++j)
            bp.conv.push_back(nn::Conv1dBlockParams<T>::create(
                j == 0 ? in_ch : f, f, kernels[j]));
          break;
        }
        case ExtractorKind::ConvStack3: {
          const int kernels[3] = {7, 5, 3};
          for (int j = 0; j < 3; ++j)
            bp.conv.push_back(nn::Conv1dBlockParams<T>::create(
                j == 0 ? in_ch : f, f, kernels[j]));
          break;
        }
        case ExtractorKind::ConvStack1:
          bp.conv.push_back(nn::Conv1dBlockParams<T>::create(in_ch, f, 7));
          break;
        case ExtractorKind::Mlp: {
          const std::size_t flat = in_ch * branch_in_length(spec);
          for (int j = 0; j < 3; ++j)
            bp.mlp.push_back(
                nn::LinearParams<T>::create(j == 0 ? flat : f, f));
          break;
        }
      }
      branches_.push_back(std::move(bp));
    }

    if (config.variant != Variant::NoCA) {
      const std::size_t n = roster.size();
      for (std::size_t bi = 0; bi < n; ++bi) {
        AggBranchParams ap;
        for (std::size_t j = 0; j < config.agg_kernels.size(); ++j)
          ap.aux.push_back(
              nn::Conv1dBlockParams<T>::create(f, f, config.agg_kernels[j]));
        for (std::size_t j = 0; j < config.agg_kernels.size(); ++j)
          ap.cross.push_back(nn::Conv1dBlockParams<T>::create(
              j == 0 ? n * f : f, f, config.agg_kernels[j]));
        agg_.push_back(std::move(ap));
      }
      classifier_ = nn::LinearParams<T>::create(f, config.classes);
    } else {
      classifier_ =
          nn::LinearParams<T>::create(roster.size() * f, config.classes);
    }
  }

  void initialize(RngStream& rng) {
    for (auto& bp : branches_) {
      for (auto& block : bp.conv) nn::init_conv_block(block, rng);
      for (auto& layer : bp.mlp) nn::init_linear(layer, rng);
    }
    for (auto& ap : agg_) {
      for (auto& block : ap.aux) nn::init_conv_block(block, rng);
      for (auto& block : ap.cross) nn::init_conv_block(block, rng);
    }
    nn::init_linear(classifier_, rng);
  }

  Var conv_block(Tape<T>& tape, Var x, nn::Conv1dBlockParams<T>& block,
                 Mode mode) {
    Var h = nn::conv1d(tape, x, block);
    h = nn::batchnorm1d(tape, h, block, mode);
    return nn::relu(tape, h);
  }

  Var run_branch(Tape<T>& tape, Var in, std::size_t branch_idx, Mode mode,
                 RngStream* rng) {
    BranchParams& bp = branches_[branch_idx];
    const BranchSpec& spec = roster[branch_idx];
    if (spec.kind == ExtractorKind::Mlp) {
      Var h = nn::flatten(tape, in);
      for (auto& layer : bp.mlp) {
        h = nn::linear(tape, h, layer);
        h = nn::leaky_relu(tape, h, config.leaky_slope);
        h = nn::dropout(tape, h, config.dropout, mode, rng);
      }
      return h;
    }
    if (spec.kind == ExtractorKind::ResidualConvStack) {
      // Identity skips around block pairs (1-2), (3-4), (5-6); a skip is
      // included only when its endpoints have matching channel counts.
      Var h = in;
      Var pair_in;
      for (std::size_t j = 0; j < bp.conv.size(); ++j) {
        if (j % 2 == 0 && j + 1 < bp.conv.size()) pair_in = h;
        h = conv_block(tape, h, bp.conv[j], mode);
        if (j % 2 == 1 && pair_in.ok() &&
            tape.val(pair_in).dim(1) == tape.val(h).dim(1))
          h = nn::add(tape, h, pair_in);
      }
      return h;
    }
    Var h = in;
    for (auto& block : bp.conv) h = conv_block(tape, h, block, mode);
    return h;
  }

  // A_i from each branch, H_i from the concat of the other branches'
  // auxiliaries with F_i, output the elementwise sum of the H_i.
  Var cross_aggregate(Tape<T>& tape, const std::vector<Var>& feats,
                      Mode mode) {
    require(feats.size() >= 2, "cross aggregation needs at least 2 branches");
    const Tensor<T>& first = tape.val(feats[0]);
    for (const Var& v : feats)
      require(tape.val(v).shape == first.shape, "mismatched branch shapes");

    std::vector<Var> aux;
    aux.reserve(feats.size());
    for (std::size_t i = 0; i < feats.size(); ++i) {
      Var h = feats[i];
      for (auto& block : agg_[i].aux) h = conv_block(tape, h, block, mode);
      aux.push_back(h);
    }
    Var total;
    for (std::size_t i = 0; i < feats.size(); ++i) {
      std::vector<Var> parts;
      for (std::size_t j = 0; j < feats.size(); ++j)
        if (j != i) parts.push_back(aux[j]);
      parts.push_back(feats[i]);
      Var h = nn::concat_channels(tape, parts);
      for (auto& block : agg_[i].cross) h = conv_block(tape, h, block, mode);
      total = total.ok() ? nn::add(tape, total, h) : h;
    }
    return total;
  }
};

// Max relative error between analytic and central finite-difference
// gradients over the trainable parameters, evaluated with dropout off and
// batch norm on its running stats.
template <typename T>
nn::GradCheckReport gradient_check(Model<T>& model, const Tensor<T>& windows,
                                   const Tensor<T>& one_hot, double h = 1e-5,
                                   std::size_t max_per_tensor = 0) {
  model.zero_grads();
  {
    Tape<T> tape;
    Var l = model.loss(tape, windows, one_hot, Mode::Eval);
    tape.backward(l);
  }
  std::vector<std::pair<std::string, Tensor<T>*>> named;
  for (auto& e : model.registry())
    if (e.trainable) named.emplace_back(e.name, e.tensor);
  auto loss_fn = [&]() {
    Tape<T> tape;
    Var l = model.loss(tape, windows, one_hot, Mode::Eval);
    return tape.val(l).data[0];
  };
  return nn::finite_difference_check(named, loss_fn, h, max_per_tensor);
}

}  // namespace mhnn
