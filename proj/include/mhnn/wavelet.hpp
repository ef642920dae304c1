#pragma once

// Multilevel discrete wavelet decomposition of multichannel windows.
//
// A decomposition step is the stride-2 correlation
//   approx[m] = sum_k signal[2m+k] * lowpass[k]
//   detail[m] = sum_k signal[2m+k] * highpass[k]
// so each level halves the temporal resolution. Odd-length inputs are
// extended by repeating the last sample before the step; reconstruction
// truncates back. With the orthonormal Haar pair the transform is exactly
// invertible (perfect reconstruction), which reconstruct() exposes so the
// losslessness of the pyramid can be verified.

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "mhnn/common.hpp"
#include "mhnn/tensor.hpp"

namespace mhnn::wavelet {

template <typename T>
struct FilterPair {
  std::vector<T> lowpass;
  std::vector<T> highpass;

  std::size_t taps() const { return lowpass.size(); }

  void validate() const {
    require(lowpass.size() == highpass.size(), "filter length mismatch");
    require(lowpass.size() >= 2, "filters need at least 2 taps");
  }
};

// Orthonormal Haar pair: lowpass (1/sqrt2, 1/sqrt2), highpass (1/sqrt2, -1/sqrt2).
template <typename T = double>
FilterPair<T> haar_filters() {
  const T s = T(1) / std::sqrt(T(2));
  return FilterPair<T>{{s, s}, {s, -s}};
}

// Per-window decomposition {X, H(1)..H(I), L(I)}. details[i-1] holds level-i
// detail coefficients with temporal length ceil(T/2^i); approx is the final
// level's low-frequency component with the same length as details.back().
template <typename T>
struct WaveletPyramid {
  Tensor<T> x;                      // C x T original window
  std::vector<Tensor<T>> details;   // details[i-1] = H(i), C x ceil(T/2^i)
  Tensor<T> approx;                 // L(I), C x ceil(T/2^I)
  std::size_t levels = 0;

  std::size_t channels() const { return x.rank() == 2 ? x.dim(0) : 0; }

  void validate() const {
    require(x.rank() == 2, "inconsistent pyramid");
    require(levels >= 1 && details.size() == levels, "inconsistent pyramid");
    const std::size_t c = x.dim(0);
    std::size_t len = x.dim(1);
    for (const auto& h : details) {
      require(h.rank() == 2 && h.dim(0) == c, "inconsistent pyramid");
      len = (len + 1) / 2;
      require(h.dim(1) == len, "inconsistent pyramid");
    }
    require(approx.rank() == 2 && approx.dim(0) == c && approx.dim(1) == len,
            "inconsistent pyramid");
  }
};

namespace detail {

// Signal value with zero-order-hold extension past the end.
template <typename T>
inline T extended(const T* s, std::size_t n, std::size_t j) {
  return j < n ? s[j] : s[n - 1];
}

}  // namespace detail

// One analysis step on a single channel. Outputs have length ceil(n/2).
template <typename T>
void dwt_step(const T* signal, std::size_t n, const FilterPair<T>& filters,
              std::vector<T>& approx, std::vector<T>& detail_out) {
  require(n >= 1, "empty input");
  filters.validate();
  const std::size_t out_len = (n + 1) / 2;
  const std::size_t k = filters.taps();
  approx.assign(out_len, T(0));
  detail_out.assign(out_len, T(0));
  for (std::size_t m = 0; m < out_len; ++m) {
    T lo = 0, hi = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const T v = detail::extended(signal, n, 2 * m + j);
      lo += v * filters.lowpass[j];
      hi += v * filters.highpass[j];
    }
    approx[m] = lo;
    detail_out[m] = hi;
  }
}

template <typename T>
std::pair<std::vector<T>, std::vector<T>> dwt_step(
    const std::vector<T>& signal, const FilterPair<T>& filters) {
  std::vector<T> approx, detail_out;
  dwt_step(signal.data(), signal.size(), filters, approx, detail_out);
  return {std::move(approx), std::move(detail_out)};
}

// Inverse of one step: transpose of the stride-2 analysis, truncated to the
// parent length. Exact for the orthonormal Haar pair.
template <typename T>
std::vector<T> idwt_step(const std::vector<T>& approx,
                         const std::vector<T>& detail_in,
                         const FilterPair<T>& filters,
                         std::size_t parent_len) {
  filters.validate();
  require(approx.size() == detail_in.size(), "inconsistent pyramid");
  require((parent_len + 1) / 2 == approx.size(), "inconsistent pyramid");
  const std::size_t k = filters.taps();
  const std::size_t ext_len = approx.empty() ? 0 : 2 * (approx.size() - 1) + k;
  std::vector<T> acc(ext_len, T(0));
  for (std::size_t m = 0; m < approx.size(); ++m) {
    for (std::size_t j = 0; j < k; ++j) {
      acc[2 * m + j] +=
          approx[m] * filters.lowpass[j] + detail_in[m] * filters.highpass[j];
    }
  }
  acc.resize(parent_len);
  return acc;
}

// Multilevel decomposition of a C x T window; channels are processed
// independently. Requires T >= 2^levels so the deepest component still
// holds at least one coefficient per original dyadic span.
template <typename T>
WaveletPyramid<T> mdwd(const Tensor<T>& window, const FilterPair<T>& filters,
                       std::size_t levels) {
  require(window.rank() == 2, "mdwd expects a C x T window");
  require(levels >= 1, "levels must be >= 1");
  const std::size_t c = window.dim(0);
  const std::size_t t = window.dim(1);
  require(c >= 1 && t >= 1, "empty input");
  require(t >= (std::size_t{1} << levels),
          "window too short for decomposition depth");

  WaveletPyramid<T> pyr;
  pyr.x = window;
  pyr.levels = levels;

  std::size_t len = t;
  std::vector<std::size_t> level_len(levels);
  for (std::size_t i = 0; i < levels; ++i) {
    len = (len + 1) / 2;
    level_len[i] = len;
    pyr.details.emplace_back(std::vector<std::size_t>{c, len});
  }
  pyr.approx = Tensor<T>({c, level_len.back()});

  std::vector<T> cur, approx, det;
  for (std::size_t ch = 0; ch < c; ++ch) {
    cur.assign(window.data.begin() + ch * t, window.data.begin() + (ch + 1) * t);
    for (std::size_t i = 0; i < levels; ++i) {
      dwt_step(cur.data(), cur.size(), filters, approx, det);
      std::copy(det.begin(), det.end(),
                pyr.details[i].data.begin() + ch * level_len[i]);
      cur.swap(approx);
    }
    std::copy(cur.begin(), cur.end(),
              pyr.approx.data.begin() + ch * level_len.back());
  }
  return pyr;
}

// Inverse transform back to a C x T matrix. Max reconstruction error is
// ~1e-12 in 64-bit (1e-6 in 32-bit) whenever T is divisible by 2^levels.
template <typename T>
Tensor<T> reconstruct(const WaveletPyramid<T>& pyramid,
                      const FilterPair<T>& filters) {
  pyramid.validate();
  const std::size_t c = pyramid.x.dim(0);
  const std::size_t t = pyramid.x.dim(1);

  std::vector<std::size_t> parent_len(pyramid.levels);
  parent_len[0] = t;
  for (std::size_t i = 1; i < pyramid.levels; ++i)
    parent_len[i] = pyramid.details[i - 1].dim(1);

  Tensor<T> out({c, t});
  std::vector<T> cur, det;
  for (std::size_t ch = 0; ch < c; ++ch) {
    const std::size_t alen = pyramid.approx.dim(1);
    cur.assign(pyramid.approx.data.begin() + ch * alen,
               pyramid.approx.data.begin() + (ch + 1) * alen);
    for (std::size_t i = pyramid.levels; i-- > 0;) {
      const std::size_t dlen = pyramid.details[i].dim(1);
      det.assign(pyramid.details[i].data.begin() + ch * dlen,
                 pyramid.details[i].data.begin() + (ch + 1) * dlen);
      cur = idwt_step(cur, det, filters, parent_len[i]);
    }
    std::copy(cur.begin(), cur.end(), out.data.begin() + ch * t);
  }
  return out;
}

}  // namespace mhnn::wavelet
