#pragma once

// Window-set container, sliding-window segmentation, train-stat
// standardization, a class-separable synthetic generator, the two
// perturbation protocols (SNR-scaled gaussian noise, fixed/random sensor
// masking with zero fill), and file I/O (MHWS binary, wide/long CSV).
//
// Perturbations derive a per-window seed as a hash of (seed, window index),
// so results are independent of processing order. Noise is normalized so the
// realized per-window SNR matches the request exactly.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mhnn/common.hpp"
#include "mhnn/rng.hpp"
#include "mhnn/tensor.hpp"

namespace mhnn::data {

struct LabeledWindowSet {
  std::size_t channels = 0;
  std::size_t steps = 0;
  std::vector<float> windows;  // N * C * T, row-major
  std::vector<std::uint32_t> labels;
  std::vector<std::string> channel_names;
  std::vector<std::string> class_names;
  double sample_rate_hz = 0.0;

  std::size_t size() const { return labels.size(); }
  std::size_t num_classes() const { return class_names.size(); }

  float* window_ptr(std::size_t i) {
    return windows.data() + i * channels * steps;
  }
  const float* window_ptr(std::size_t i) const {
    return windows.data() + i * channels * steps;
  }

  void validate() const {
    require(size() >= 1, "window set is empty");
    require(windows.size() == size() * channels * steps,
            "window buffer size mismatch");
    const std::size_t k = num_classes();
    for (std::uint32_t l : labels)
      require(l < k, "label out of range");
    for (float v : windows)
      require(std::isfinite(v), "window set contains NaN/Inf");
  }

  template <typename T>
  Tensor<T> to_tensor() const {
    Tensor<T> out({size(), channels, steps});
    for (std::size_t i = 0; i < windows.size(); ++i)
      out.data[i] = static_cast<T>(windows[i]);
    return out;
  }
};

inline std::vector<std::string> default_names(const std::string& prefix,
                                              std::size_t n) {
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

// Segment a C x L series into width-W windows with the given overlap
// fraction; window label is the majority step label (ties -> smallest
// class index).
inline LabeledWindowSet sliding_window(const Tensor<float>& series,
                                       const std::vector<std::uint32_t>& step_labels,
                                       std::size_t width, double overlap) {
  require(series.rank() == 2, "sliding_window expects a C x L series");
  const std::size_t c = series.dim(0);
  const std::size_t len = series.dim(1);
  require(step_labels.size() == len, "step label length mismatch");
  require(width <= len, "window width exceeds series length");
  require(overlap >= 0.0 && overlap < 1.0, "overlap must be in [0, 1)");
  const std::size_t stride = static_cast<std::size_t>(
      std::llround(static_cast<double>(width) * (1.0 - overlap)));
  require(stride >= 1, "window stride must be >= 1");

  std::uint32_t max_label = 0;
  for (std::uint32_t l : step_labels) max_label = std::max(max_label, l);
  const std::size_t k = static_cast<std::size_t>(max_label) + 1;

  LabeledWindowSet set;
  set.channels = c;
  set.steps = width;
  set.channel_names = default_names("ch", c);
  set.class_names = default_names("class", k);

  std::vector<std::size_t> counts(k);
  for (std::size_t start = 0; start + width <= len; start += stride) {
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t t = 0; t < width; ++t) ++counts[step_labels[start + t]];
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j)
      if (counts[j] > counts[best]) best = j;
    set.labels.push_back(static_cast<std::uint32_t>(best));
    for (std::size_t ch = 0; ch < c; ++ch)
      set.windows.insert(set.windows.end(),
                         series.data.begin() + ch * len + start,
                         series.data.begin() + ch * len + start + width);
  }
  require(!set.labels.empty(), "sliding_window produced no windows");
  return set;
}

struct ChannelStats {
  std::vector<double> mean, stdev;
};

inline ChannelStats compute_channel_stats(const LabeledWindowSet& set) {
  require(set.size() >= 1, "window set is empty");
  ChannelStats stats;
  stats.mean.assign(set.channels, 0.0);
  stats.stdev.assign(set.channels, 0.0);
  const std::size_t per_channel = set.size() * set.steps;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const float* w = set.window_ptr(i);
    for (std::size_t c = 0; c < set.channels; ++c) {
      const float* row = w + c * set.steps;
      for (std::size_t t = 0; t < set.steps; ++t) stats.mean[c] += row[t];
    }
  }
  for (std::size_t c = 0; c < set.channels; ++c)
    stats.mean[c] /= static_cast<double>(per_channel);
  for (std::size_t i = 0; i < set.size(); ++i) {
    const float* w = set.window_ptr(i);
    for (std::size_t c = 0; c < set.channels; ++c) {
      const float* row = w + c * set.steps;
      for (std::size_t t = 0; t < set.steps; ++t) {
        const double d = row[t] - stats.mean[c];
        stats.stdev[c] += d * d;
      }
    }
  }
  for (std::size_t c = 0; c < set.channels; ++c)
    stats.stdev[c] =
        std::max(std::sqrt(stats.stdev[c] / static_cast<double>(per_channel)),
                 1e-8);
  return stats;
}

inline void apply_standardization(LabeledWindowSet& set,
                                  const ChannelStats& stats) {
  require(stats.mean.size() == set.channels, "channel stats size mismatch");
  for (std::size_t i = 0; i < set.size(); ++i) {
    float* w = set.window_ptr(i);
    for (std::size_t c = 0; c < set.channels; ++c) {
      float* row = w + c * set.steps;
      const double mu = stats.mean[c];
      const double inv = 1.0 / stats.stdev[c];
      for (std::size_t t = 0; t < set.steps; ++t)
        row[t] = static_cast<float>((row[t] - mu) * inv);
    }
  }
}

// z-score every set with the training set's per-channel statistics.
inline ChannelStats standardize(LabeledWindowSet& train,
                                std::vector<LabeledWindowSet*> others = {}) {
  ChannelStats stats = compute_channel_stats(train);
  apply_standardization(train, stats);
  for (LabeledWindowSet* s : others) apply_standardization(*s, stats);
  return stats;
}

// Class-separable synthetic set: class k is a sinusoid at 8*(k+1) cycles per
// window with amplitude 1 + 0.5k, one fixed random phase per (class,
// channel), plus gaussian noise at 0.1. Deterministic given the seed.
inline LabeledWindowSet synth_generate(std::size_t n_per_class,
                                       std::size_t channels, std::size_t steps,
                                       std::size_t classes,
                                       std::uint64_t seed) {
  require(classes >= 2 && classes <= 8, "synth classes must be in [2, 8]");
  require(channels >= 1 && steps >= 2, "synth needs channels >= 1, steps >= 2");
  require(n_per_class >= 1, "synth needs n_per_class >= 1");

  RngStream phase_rng(derive_seed(seed, 0x70686173));
  std::vector<double> phase(classes * channels);
  for (auto& p : phase) p = phase_rng.uniform(0.0, 2.0 * M_PI);

  LabeledWindowSet set;
  set.channels = channels;
  set.steps = steps;
  set.sample_rate_hz = 50.0;
  set.channel_names = default_names("ch", channels);
  set.class_names = default_names("class", classes);
  set.windows.resize(n_per_class * classes * channels * steps);
  set.labels.resize(n_per_class * classes);

  std::size_t w = 0;
  for (std::size_t k = 0; k < classes; ++k) {
    const double cycles = 8.0 * static_cast<double>(k + 1);
    const double amp = 1.0 + 0.5 * static_cast<double>(k);
    for (std::size_t rep = 0; rep < n_per_class; ++rep, ++w) {
      RngStream noise_rng(derive_seed(seed, 0x6e6f6973 + w));
      set.labels[w] = static_cast<std::uint32_t>(k);
      float* dst = set.window_ptr(w);
      for (std::size_t c = 0; c < channels; ++c) {
        const double ph = phase[k * channels + c];
        for (std::size_t t = 0; t < steps; ++t) {
          const double arg =
              2.0 * M_PI * cycles * static_cast<double>(t) /
                  static_cast<double>(steps) +
              ph;
          dst[c * steps + t] = static_cast<float>(
              amp * std::sin(arg) + 0.1 * noise_rng.gaussian());
        }
      }
    }
  }
  return set;
}

// Per-window gaussian noise scaled so 10*log10(P_signal / P_noise) equals
// snr_db exactly, with P the mean squared value over the window.
inline LabeledWindowSet add_noise(const LabeledWindowSet& set, double snr_db,
                                  std::uint64_t seed) {
  require(std::isfinite(snr_db), "snr_db must be finite");
  LabeledWindowSet out = set;
  const std::size_t span = set.channels * set.steps;
  std::vector<double> noise(span);
  for (std::size_t w = 0; w < set.size(); ++w) {
    const float* src = set.window_ptr(w);
    double p_signal = 0.0;
    for (std::size_t i = 0; i < span; ++i)
      p_signal += static_cast<double>(src[i]) * src[i];
    p_signal /= static_cast<double>(span);
    require(p_signal > 0.0, "silent window");

    RngStream rng(derive_seed(seed, w));
    double p_noise = 0.0;
    for (std::size_t i = 0; i < span; ++i) {
      noise[i] = rng.gaussian();
      p_noise += noise[i] * noise[i];
    }
    p_noise /= static_cast<double>(span);
    const double target = p_signal * std::pow(10.0, -snr_db / 10.0);
    const double scale = std::sqrt(target / p_noise);
    float* dst = out.window_ptr(w);
    for (std::size_t i = 0; i < span; ++i)
      dst[i] = static_cast<float>(src[i] + scale * noise[i]);
  }
  return out;
}

inline std::size_t mask_count(double ratio, std::size_t channels) {
  require(ratio >= 0.0 && ratio <= 1.0, "mask ratio must be in [0, 1]");
  std::size_t m = static_cast<std::size_t>(
      std::llround(ratio * static_cast<double>(channels)));
  if (ratio > 0.0 && m == 0) m = 1;
  return std::min(m, channels);
}

namespace detail {

inline std::vector<std::size_t> sample_channels(std::size_t channels,
                                                std::size_t m,
                                                RngStream& rng) {
  std::vector<std::size_t> idx(channels);
  for (std::size_t i = 0; i < channels; ++i) idx[i] = i;
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + rng.below(channels - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(m);
  return idx;
}

}  // namespace detail

// Leave-fixed-sensors-out: one seeded channel subset zeroed in every window.
inline LabeledWindowSet mask_sensors_fixed(
    const LabeledWindowSet& set, double ratio, std::uint64_t seed,
    std::vector<std::size_t>* masked_channels = nullptr) {
  const std::size_t m = mask_count(ratio, set.channels);
  LabeledWindowSet out = set;
  RngStream rng(derive_seed(seed, 0x66697865));
  const auto chosen = detail::sample_channels(set.channels, m, rng);
  if (masked_channels) *masked_channels = chosen;
  for (std::size_t w = 0; w < out.size(); ++w) {
    float* dst = out.window_ptr(w);
    for (std::size_t c : chosen)
      std::fill(dst + c * out.steps, dst + (c + 1) * out.steps, 0.0f);
  }
  return out;
}

// Leave-random-sensors-out: an independent seeded channel subset per window.
inline LabeledWindowSet mask_sensors_random(const LabeledWindowSet& set,
                                            double ratio, std::uint64_t seed) {
  const std::size_t m = mask_count(ratio, set.channels);
  LabeledWindowSet out = set;
  for (std::size_t w = 0; w < out.size(); ++w) {
    RngStream rng(derive_seed(seed, w));
    const auto chosen = detail::sample_channels(set.channels, m, rng);
    float* dst = out.window_ptr(w);
    for (std::size_t c : chosen)
      std::fill(dst + c * out.steps, dst + (c + 1) * out.steps, 0.0f);
  }
  return out;
}

// ---- MHWS binary format ----
// magic 'MHWS', u32 version=1, u32 N, u32 C, u32 T, u32 K, N*C*T f32 LE,
// N u32 labels LE, JSON trailer (channel names, class names, sample rate).

inline void save_binary(const LabeledWindowSet& set, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot open '" + path + "' for writing");
  const char magic[4] = {'M', 'H', 'W', 'S'};
  out.write(magic, 4);
  auto put_u32 = [&out](std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
  };
  put_u32(1);
  put_u32(static_cast<std::uint32_t>(set.size()));
  put_u32(static_cast<std::uint32_t>(set.channels));
  put_u32(static_cast<std::uint32_t>(set.steps));
  put_u32(static_cast<std::uint32_t>(set.num_classes()));
  out.write(reinterpret_cast<const char*>(set.windows.data()),
            static_cast<std::streamsize>(set.windows.size() * sizeof(float)));
  out.write(reinterpret_cast<const char*>(set.labels.data()),
            static_cast<std::streamsize>(set.labels.size() * sizeof(std::uint32_t)));
  const nlohmann::json trailer = {{"channel_names", set.channel_names},
                                  {"class_names", set.class_names},
                                  {"sample_rate_hz", set.sample_rate_hz}};
  const std::string text = trailer.dump();
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  require(out.good(), "write failed for '" + path + "'");
}

inline LabeledWindowSet load_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open '" + path + "'");
  char magic[4];
  in.read(magic, 4);
  require(in.good() && std::memcmp(magic, "MHWS", 4) == 0,
          "'" + path + "' is not an MHWS file");
  auto get_u32 = [&in]() {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
  };
  const std::uint32_t version = get_u32();
  require(version == 1, "unsupported MHWS version");
  const std::uint32_t n = get_u32(), c = get_u32(), t = get_u32(),
                      k = get_u32();
  LabeledWindowSet set;
  set.channels = c;
  set.steps = t;
  set.windows.resize(static_cast<std::size_t>(n) * c * t);
  set.labels.resize(n);
  in.read(reinterpret_cast<char*>(set.windows.data()),
          static_cast<std::streamsize>(set.windows.size() * sizeof(float)));
  in.read(reinterpret_cast<char*>(set.labels.data()),
          static_cast<std::streamsize>(set.labels.size() * sizeof(std::uint32_t)));
  require(in.good(), "'" + path + "' is truncated");
  std::stringstream rest;
  rest << in.rdbuf();
  const nlohmann::json trailer = nlohmann::json::parse(rest.str());
  set.channel_names = trailer.at("channel_names").get<std::vector<std::string>>();
  set.class_names = trailer.at("class_names").get<std::vector<std::string>>();
  set.sample_rate_hz = trailer.at("sample_rate_hz").get<double>();
  require(set.channel_names.size() == c, "channel name count mismatch");
  require(set.class_names.size() == k, "class name count mismatch");
  set.validate();
  return set;
}

// ---- CSV import ----

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_value(const std::string& tok, std::size_t line_no) {
  const char* begin = tok.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  require(!tok.empty() && end == begin + tok.size(),
          "bad numeric value at row " + std::to_string(line_no));
  require(std::isfinite(v), "NaN at row " + std::to_string(line_no));
  return v;
}

inline std::uint32_t parse_label(const std::string& tok, std::size_t line_no) {
  const char* begin = tok.c_str();
  char* end = nullptr;
  const long long v = std::strtoll(begin, &end, 10);
  require(!tok.empty() && end == begin + tok.size() && v >= 0,
          "label out of range at row " + std::to_string(line_no));
  return static_cast<std::uint32_t>(v);
}

}  // namespace detail

// Wide format: header `label,ch0_t0,ch0_t1,...`, one window per row.
// Values are parsed as 64-bit reals and stored as 32-bit floats.
inline LabeledWindowSet load_csv_wide(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open '" + path + "'");
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "empty csv");
  auto header = detail::split_csv_line(line);
  require(header.size() >= 2 && header[0] == "label",
          "csv header must start with 'label'");

  std::size_t channels = 0, steps = 0;
  std::vector<std::pair<std::size_t, std::size_t>> cols;  // (channel, step)
  for (std::size_t i = 1; i < header.size(); ++i) {
    const std::string& name = header[i];
    std::size_t c = 0, t = 0;
    if (std::sscanf(name.c_str(), "ch%zu_t%zu", &c, &t) != 2)
      fail("bad csv column name '" + name + "'");
    cols.emplace_back(c, t);
    channels = std::max(channels, c + 1);
    steps = std::max(steps, t + 1);
  }
  require(cols.size() == channels * steps,
          "csv header must cover a full channel/time grid");

  LabeledWindowSet set;
  set.channels = channels;
  set.steps = steps;
  set.channel_names = default_names("ch", channels);

  std::uint32_t max_label = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto toks = detail::split_csv_line(line);
    require(toks.size() == header.size(),
            "ragged row at row " + std::to_string(line_no));
    const std::uint32_t label = detail::parse_label(toks[0], line_no);
    max_label = std::max(max_label, label);
    set.labels.push_back(label);
    const std::size_t base = set.windows.size();
    set.windows.resize(base + channels * steps);
    for (std::size_t i = 0; i < cols.size(); ++i) {
      const double v = detail::parse_value(toks[i + 1], line_no);
      set.windows[base + cols[i].first * steps + cols[i].second] =
          static_cast<float>(v);
    }
  }
  require(!set.labels.empty(), "csv has no data rows");
  set.class_names = default_names("class", static_cast<std::size_t>(max_label) + 1);
  set.validate();
  return set;
}

// Long format: header `label,ch0,ch1,...`, one timestep per row. Returns the
// continuous series plus per-step labels for sliding_window.
inline std::pair<Tensor<float>, std::vector<std::uint32_t>> load_csv_long(
    const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open '" + path + "'");
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "empty csv");
  auto header = detail::split_csv_line(line);
  require(header.size() >= 2 && header[0] == "label",
          "csv header must start with 'label'");
  const std::size_t channels = header.size() - 1;

  std::vector<std::vector<float>> rows;
  std::vector<std::uint32_t> step_labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto toks = detail::split_csv_line(line);
    require(toks.size() == header.size(),
            "ragged row at row " + std::to_string(line_no));
    step_labels.push_back(detail::parse_label(toks[0], line_no));
    std::vector<float> row(channels);
    for (std::size_t c = 0; c < channels; ++c)
      row[c] = static_cast<float>(detail::parse_value(toks[c + 1], line_no));
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), "csv has no data rows");
  Tensor<float> series({channels, rows.size()});
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (std::size_t c = 0; c < channels; ++c)
      series.at(c, t) = rows[t][c];
  return {std::move(series), std::move(step_labels)};
}

// Seeded shuffle + three-way partition. Fractions are of the full set;
// the training split takes the remainder.
struct SplitSets {
  LabeledWindowSet train, val, test;
};

inline LabeledWindowSet subset(const LabeledWindowSet& set,
                               const std::vector<std::size_t>& indices) {
  LabeledWindowSet out;
  out.channels = set.channels;
  out.steps = set.steps;
  out.channel_names = set.channel_names;
  out.class_names = set.class_names;
  out.sample_rate_hz = set.sample_rate_hz;
  const std::size_t span = set.channels * set.steps;
  out.windows.reserve(indices.size() * span);
  for (std::size_t i : indices) {
    out.labels.push_back(set.labels[i]);
    const float* src = set.window_ptr(i);
    out.windows.insert(out.windows.end(), src, src + span);
  }
  return out;
}

inline SplitSets split_three(const LabeledWindowSet& set, double val_frac,
                             double test_frac, std::uint64_t seed) {
  require(val_frac >= 0.0 && test_frac >= 0.0 &&
              val_frac + test_frac < 1.0,
          "split fractions must leave a training remainder");
  const std::size_t n = set.size();
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  RngStream rng(derive_seed(seed, 0x73706c69));
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.below(i);
    std::swap(idx[i - 1], idx[j]);
  }
  const std::size_t n_val = static_cast<std::size_t>(
      std::llround(val_frac * static_cast<double>(n)));
  const std::size_t n_test = static_cast<std::size_t>(
      std::llround(test_frac * static_cast<double>(n)));
  require(n_val + n_test < n, "split leaves no training samples");
  SplitSets out;
  out.train = subset(set, {idx.begin(), idx.end() - n_val - n_test});
  out.val = subset(set, {idx.end() - n_val - n_test, idx.end() - n_test});
  out.test = subset(set, {idx.end() - n_test, idx.end()});
  return out;
}

}  // namespace mhnn::data
