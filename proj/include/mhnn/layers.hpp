#pragma once

// Layer kernels used by the network: same-length 1D convolution, batch
// normalization, activations, inverted dropout, linear, softmax and the
// cross-entropy loss, each as a tape op with its backward closure.
//
// Conventions fixed here and matched by the test oracles: "same" zero
// padding of (k-1)/2 per side, biased in-batch variance with momentum-0.1
// running stats, probability clamp 1e-7 before logs, numerically stable
// softmax via max subtraction.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "mhnn/autograd.hpp"
#include "mhnn/blas.hpp"
#include "mhnn/common.hpp"
#include "mhnn/rng.hpp"
#include "mhnn/tensor.hpp"

namespace mhnn::nn {

inline constexpr double kBnEps = 1e-5;
inline constexpr double kProbClamp = 1e-7;

// Parameters of one Conv1D block: convolution followed by batch norm.
template <typename T>
struct Conv1dBlockParams {
  Tensor<T> kernel;  // out_ch x in_ch x k
  Tensor<T> bias;    // out_ch
  Tensor<T> bn_gamma, bn_beta;
  Tensor<T> bn_running_mean, bn_running_var;
  int kernel_size = 0;

  std::size_t out_channels() const { return kernel.dim(0); }
  std::size_t in_channels() const { return kernel.dim(1); }

  static Conv1dBlockParams create(std::size_t in_ch, std::size_t out_ch,
                                  int k) {
    require(k == 3 || k == 5 || k == 7, "kernel_size must be one of 3, 5, 7");
    Conv1dBlockParams p;
    p.kernel = Tensor<T>({out_ch, in_ch, static_cast<std::size_t>(k)});
    p.bias = Tensor<T>({out_ch});
    p.bn_gamma = Tensor<T>({out_ch}, T(1));
    p.bn_beta = Tensor<T>({out_ch});
    p.bn_running_mean = Tensor<T>({out_ch});
    p.bn_running_var = Tensor<T>({out_ch}, T(1));
    p.kernel_size = k;
    return p;
  }
};

template <typename T>
struct LinearParams {
  Tensor<T> weight;  // out x in
  Tensor<T> bias;    // out

  std::size_t out_features() const { return weight.dim(0); }
  std::size_t in_features() const { return weight.dim(1); }

  static LinearParams create(std::size_t in, std::size_t out) {
    LinearParams p;
    p.weight = Tensor<T>({out, in});
    p.bias = Tensor<T>({out});
    return p;
  }
};

// Fan-in scaled uniform init, biases zero.
template <typename T>
void init_uniform(Tensor<T>& w, std::size_t fan_in, RngStream& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : w.data) v = static_cast<T>(rng.uniform(-bound, bound));
}

template <typename T>
void init_conv_block(Conv1dBlockParams<T>& p, RngStream& rng) {
  init_uniform(p.kernel, p.in_channels() * static_cast<std::size_t>(p.kernel_size), rng);
}

template <typename T>
void init_linear(LinearParams<T>& p, RngStream& rng) {
  init_uniform(p.weight, p.in_features(), rng);
}

namespace detail {

// cols is (C*k) x (B*T); out-of-range taps are zero.
template <typename T>
void im2col(const Tensor<T>& x, std::size_t k, std::vector<T>& cols) {
  const std::size_t batch = x.dim(0), ch = x.dim(1), tlen = x.dim(2);
  const std::size_t bt = batch * tlen;
  const long pad = static_cast<long>((k - 1) / 2);
  cols.assign(ch * k * bt, T(0));
  for (std::size_t c = 0; c < ch; ++c) {
    for (std::size_t kk = 0; kk < k; ++kk) {
      const long off = static_cast<long>(kk) - pad;
      T* row = cols.data() + (c * k + kk) * bt;
      const long t0 = std::max(0L, -off);
      const long t1 = std::min(static_cast<long>(tlen),
                               static_cast<long>(tlen) - off);
      for (std::size_t b = 0; b < batch; ++b) {
        const T* src = x.data.data() + (b * ch + c) * tlen;
        T* dst = row + b * tlen;
        for (long t = t0; t < t1; ++t) dst[t] = src[t + off];
      }
    }
  }
}

template <typename T>
void col2im_accumulate(const std::vector<T>& dcols, std::size_t k,
                       std::size_t batch, std::size_t ch, std::size_t tlen,
                       std::vector<T>& gx) {
  const std::size_t bt = batch * tlen;
  const long pad = static_cast<long>((k - 1) / 2);
  for (std::size_t c = 0; c < ch; ++c) {
    for (std::size_t kk = 0; kk < k; ++kk) {
      const long off = static_cast<long>(kk) - pad;
      const T* row = dcols.data() + (c * k + kk) * bt;
      const long t0 = std::max(0L, -off);
      const long t1 = std::min(static_cast<long>(tlen),
                               static_cast<long>(tlen) - off);
      for (std::size_t b = 0; b < batch; ++b) {
        const T* src = row + b * tlen;
        T* dst = gx.data() + (b * ch + c) * tlen;
        for (long t = t0; t < t1; ++t) dst[t + off] += src[t];
      }
    }
  }
}

}  // namespace detail

// Same-length cross-correlation plus bias; zero padding of (k-1)/2 per side.
template <typename T>
Var conv1d(Tape<T>& tape, Var x, Conv1dBlockParams<T>& p) {
  const Tensor<T>& xv = tape.val(x);
  require(xv.rank() == 3, "conv1d expects a B x C x T input");
  const std::size_t batch = xv.dim(0), in_ch = xv.dim(1), tlen = xv.dim(2);
  const std::size_t out_ch = p.kernel.dim(0);
  const std::size_t k = p.kernel.dim(2);
  require(p.kernel.dim(1) == in_ch, "conv1d channel mismatch");
  require(k % 2 == 1, "conv1d kernel length must be odd");

  Var w = tape.bind(p.kernel);
  Var b = tape.bind(p.bias);

  const std::size_t bt = batch * tlen;
  const std::size_t kc = in_ch * k;
  std::vector<T> cols;
  detail::im2col(xv, k, cols);
  std::vector<T> y(out_ch * bt);
  blas::gemm(false, false, static_cast<int>(out_ch), static_cast<int>(bt),
             static_cast<int>(kc), T(1), tape.val(w).data.data(),
             static_cast<int>(kc), cols.data(), static_cast<int>(bt), T(0),
             y.data(), static_cast<int>(bt));

  Tensor<T> out({batch, out_ch, tlen});
  const T* bias = tape.val(b).data.data();
  for (std::size_t bi = 0; bi < batch; ++bi)
    for (std::size_t co = 0; co < out_ch; ++co) {
      const T* src = y.data() + co * bt + bi * tlen;
      T* dst = out.data.data() + (bi * out_ch + co) * tlen;
      for (std::size_t t = 0; t < tlen; ++t) dst[t] = src[t] + bias[co];
    }

  Var o = tape.make(std::move(out));
  tape.set_back(o, [x, w, b, o, batch, in_ch, out_ch, tlen, k](Tape<T>& tp) {
    const std::size_t bt2 = batch * tlen;
    const std::size_t kc2 = in_ch * k;
    const auto& go = tp.grad(o);
    std::vector<T> dy(out_ch * bt2);
    for (std::size_t bi = 0; bi < batch; ++bi)
      for (std::size_t co = 0; co < out_ch; ++co) {
        const T* src = go.data() + (bi * out_ch + co) * tlen;
        T* dst = dy.data() + co * bt2 + bi * tlen;
        for (std::size_t t = 0; t < tlen; ++t) dst[t] = src[t];
      }
    auto& gb = tp.grad(b);
    for (std::size_t co = 0; co < out_ch; ++co) {
      T acc = 0;
      const T* row = dy.data() + co * bt2;
      for (std::size_t i = 0; i < bt2; ++i) acc += row[i];
      gb[co] += acc;
    }
    std::vector<T> cols2;
    detail::im2col(tp.val(x), k, cols2);
    blas::gemm(false, true, static_cast<int>(out_ch), static_cast<int>(kc2),
               static_cast<int>(bt2), T(1), dy.data(), static_cast<int>(bt2),
               cols2.data(), static_cast<int>(bt2), T(1),
               tp.grad(w).data(), static_cast<int>(kc2));
    std::vector<T> dcols(kc2 * bt2);
    blas::gemm(true, false, static_cast<int>(kc2), static_cast<int>(bt2),
               static_cast<int>(out_ch), T(1), tp.val(w).data.data(),
               static_cast<int>(kc2), dy.data(), static_cast<int>(bt2), T(0),
               dcols.data(), static_cast<int>(bt2));
    detail::col2im_accumulate(dcols, k, batch, in_ch, tlen, tp.grad(x));
  });
  return o;
}

// Per-channel normalization over batch x time. Train mode uses biased batch
// statistics and updates running stats in place; eval mode uses running
// stats only.
template <typename T>
Var batchnorm1d(Tape<T>& tape, Var x, Conv1dBlockParams<T>& p, Mode mode,
                double momentum = 0.1) {
  const Tensor<T>& xv = tape.val(x);
  require(xv.rank() == 3, "batchnorm1d expects a B x C x T input");
  const std::size_t batch = xv.dim(0), ch = xv.dim(1), tlen = xv.dim(2);
  require(p.bn_gamma.numel() == ch, "batchnorm1d channel mismatch");
  const std::size_t n = batch * tlen;

  Var g = tape.bind(p.bn_gamma);
  Var be = tape.bind(p.bn_beta);

  std::vector<T> mean(ch), istd(ch);
  if (mode == Mode::Train) {
    require(n >= 2, "degenerate batch");
    std::vector<T> variance(ch);
    for (std::size_t c = 0; c < ch; ++c) {
      T mu = 0;
      for (std::size_t bi = 0; bi < batch; ++bi) {
        const T* src = xv.data.data() + (bi * ch + c) * tlen;
        for (std::size_t t = 0; t < tlen; ++t) mu += src[t];
      }
      mu /= static_cast<T>(n);
      T var = 0;
      for (std::size_t bi = 0; bi < batch; ++bi) {
        const T* src = xv.data.data() + (bi * ch + c) * tlen;
        for (std::size_t t = 0; t < tlen; ++t) {
          const T d = src[t] - mu;
          var += d * d;
        }
      }
      var /= static_cast<T>(n);
      mean[c] = mu;
      variance[c] = var;
      istd[c] = T(1) / std::sqrt(var + static_cast<T>(kBnEps));
    }
    const T mom = static_cast<T>(momentum);
    for (std::size_t c = 0; c < ch; ++c) {
      p.bn_running_mean[c] = (T(1) - mom) * p.bn_running_mean[c] + mom * mean[c];
      p.bn_running_var[c] = (T(1) - mom) * p.bn_running_var[c] + mom * variance[c];
    }
  } else {
    for (std::size_t c = 0; c < ch; ++c) {
      mean[c] = p.bn_running_mean[c];
      istd[c] = T(1) / std::sqrt(p.bn_running_var[c] + static_cast<T>(kBnEps));
    }
  }

  Tensor<T> out({batch, ch, tlen});
  const T* gamma = tape.val(g).data.data();
  const T* beta = tape.val(be).data.data();
  for (std::size_t bi = 0; bi < batch; ++bi)
    for (std::size_t c = 0; c < ch; ++c) {
      const T* src = xv.data.data() + (bi * ch + c) * tlen;
      T* dst = out.data.data() + (bi * ch + c) * tlen;
      const T a = gamma[c] * istd[c];
      const T shift = beta[c] - a * mean[c];
      for (std::size_t t = 0; t < tlen; ++t) dst[t] = a * src[t] + shift;
    }

  Var o = tape.make(std::move(out));
  const bool train = mode == Mode::Train;
  tape.set_back(o, [x, g, be, o, batch, ch, tlen, mean, istd,
                    train](Tape<T>& tp) {
    const auto& go = tp.grad(o);
    const Tensor<T>& xv2 = tp.val(x);
    const T* gamma = tp.val(g).data.data();
    auto& gx = tp.grad(x);
    auto& gg = tp.grad(g);
    auto& gb = tp.grad(be);
    const std::size_t n = batch * tlen;
    for (std::size_t c = 0; c < ch; ++c) {
      T sum_dy = 0, sum_dy_xhat = 0;
      for (std::size_t bi = 0; bi < batch; ++bi) {
        const std::size_t base = (bi * ch + c) * tlen;
        for (std::size_t t = 0; t < tlen; ++t) {
          const T dy = go[base + t];
          const T xhat = (xv2.data[base + t] - mean[c]) * istd[c];
          sum_dy += dy;
          sum_dy_xhat += dy * xhat;
        }
      }
      gg[c] += sum_dy_xhat;
      gb[c] += sum_dy;
      if (train) {
        const T scale = gamma[c] * istd[c] / static_cast<T>(n);
        for (std::size_t bi = 0; bi < batch; ++bi) {
          const std::size_t base = (bi * ch + c) * tlen;
          for (std::size_t t = 0; t < tlen; ++t) {
            const T dy = go[base + t];
            const T xhat = (xv2.data[base + t] - mean[c]) * istd[c];
            gx[base + t] +=
                scale * (static_cast<T>(n) * dy - sum_dy - xhat * sum_dy_xhat);
          }
        }
      } else {
        const T a = gamma[c] * istd[c];
        for (std::size_t bi = 0; bi < batch; ++bi) {
          const std::size_t base = (bi * ch + c) * tlen;
          for (std::size_t t = 0; t < tlen; ++t) gx[base + t] += a * go[base + t];
        }
      }
    }
  });
  return o;
}

// y = max(0, x) + slope * min(0, x)
template <typename T>
Var leaky_relu(Tape<T>& tape, Var x, double slope) {
  require(slope >= 0.0 && slope < 1.0, "leaky_relu slope must be in [0, 1)");
  const Tensor<T>& xv = tape.val(x);
  Tensor<T> out = xv;
  const T l = static_cast<T>(slope);
  for (auto& v : out.data) v = std::max(T(0), v) + l * std::min(T(0), v);
  Var o = tape.make(std::move(out));
  tape.set_back(o, [x, o, l](Tape<T>& tp) {
    const auto& go = tp.grad(o);
    const auto& xv2 = tp.val(x).data;
    auto& gx = tp.grad(x);
    for (std::size_t i = 0; i < go.size(); ++i)
      gx[i] += go[i] * (xv2[i] > T(0) ? T(1) : l);
  });
  return o;
}

template <typename T>
Var relu(Tape<T>& tape, Var x) {
  return leaky_relu(tape, x, 0.0);
}

// Inverted dropout: survivors scaled by 1/(1-p) in train mode, identity in
// eval mode.
template <typename T>
Var dropout(Tape<T>& tape, Var x, double p, Mode mode, RngStream* rng) {
  require(p >= 0.0 && p < 1.0, "dropout probability must be in [0, 1)");
  const Tensor<T>& xv = tape.val(x);
  if (mode == Mode::Eval || p == 0.0) {
    Var o = tape.make(xv);
    tape.set_back(o, [x, o](Tape<T>& tp) {
      const auto& go = tp.grad(o);
      auto& gx = tp.grad(x);
      for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
    });
    return o;
  }
  require(rng != nullptr, "dropout requires an rng in train mode");
  const T scale = static_cast<T>(1.0 / (1.0 - p));
  std::vector<T> mask(xv.numel());
  for (auto& m : mask) m = rng->uniform() < p ? T(0) : scale;
  Tensor<T> out = xv;
  for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] *= mask[i];
  Var o = tape.make(std::move(out));
  tape.set_back(o, [x, o, mask = std::move(mask)](Tape<T>& tp) {
    const auto& go = tp.grad(o);
    auto& gx = tp.grad(x);
    for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i] * mask[i];
  });
  return o;
}

// y = x W^T + b per sample
template <typename T>
Var linear(Tape<T>& tape, Var x, LinearParams<T>& p) {
  const Tensor<T>& xv = tape.val(x);
  require(xv.rank() == 2, "linear expects a B x in input");
  const std::size_t batch = xv.dim(0), in = xv.dim(1);
  require(p.weight.dim(1) == in, "linear width mismatch");
  const std::size_t out_f = p.weight.dim(0);

  Var w = tape.bind(p.weight);
  Var b = tape.bind(p.bias);

  Tensor<T> out({batch, out_f});
  blas::gemm(false, true, static_cast<int>(batch), static_cast<int>(out_f),
             static_cast<int>(in), T(1), xv.data.data(), static_cast<int>(in),
             tape.val(w).data.data(), static_cast<int>(in), T(0),
             out.data.data(), static_cast<int>(out_f));
  const T* bias = tape.val(b).data.data();
  for (std::size_t bi = 0; bi < batch; ++bi)
    for (std::size_t j = 0; j < out_f; ++j) out.data[bi * out_f + j] += bias[j];

  Var o = tape.make(std::move(out));
  tape.set_back(o, [x, w, b, o, batch, in, out_f](Tape<T>& tp) {
    const auto& go = tp.grad(o);
    blas::gemm(true, false, static_cast<int>(out_f), static_cast<int>(in),
               static_cast<int>(batch), T(1), go.data(),
               static_cast<int>(out_f), tp.val(x).data.data(),
               static_cast<int>(in), T(1), tp.grad(w).data(),
               static_cast<int>(in));
    blas::gemm(false, false, static_cast<int>(batch), static_cast<int>(in),
               static_cast<int>(out_f), T(1), go.data(),
               static_cast<int>(out_f), tp.val(w).data.data(),
               static_cast<int>(in), T(1), tp.grad(x).data(),
               static_cast<int>(in));
    auto& gb = tp.grad(b);
    for (std::size_t bi = 0; bi < batch; ++bi)
      for (std::size_t j = 0; j < out_f; ++j) gb[j] += go[bi * out_f + j];
  });
  return o;
}

// Row-wise softmax with max subtraction.
template <typename T>
Var softmax(Tape<T>& tape, Var logits) {
  const Tensor<T>& lv = tape.val(logits);
  require(lv.rank() == 2, "softmax expects a B x K input");
  const std::size_t batch = lv.dim(0), k = lv.dim(1);
  require(k >= 2, "softmax needs K >= 2");
  Tensor<T> out({batch, k});
  for (std::size_t bi = 0; bi < batch; ++bi) {
    const T* row = lv.data.data() + bi * k;
    T* dst = out.data.data() + bi * k;
    T mx = row[0];
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    T denom = 0;
    for (std::size_t j = 0; j < k; ++j) {
      dst[j] = std::exp(row[j] - mx);
      denom += dst[j];
    }
    for (std::size_t j = 0; j < k; ++j) dst[j] /= denom;
  }
  Var o = tape.make(std::move(out));
  tape.set_back(o, [logits, o, batch, k](Tape<T>& tp) {
    const auto& go = tp.grad(o);
    const auto& pv = tp.val(o).data;
    auto& gl = tp.grad(logits);
    for (std::size_t bi = 0; bi < batch; ++bi) {
      const T* p = pv.data() + bi * k;
      const T* dy = go.data() + bi * k;
      T dot = 0;
      for (std::size_t j = 0; j < k; ++j) dot += dy[j] * p[j];
      for (std::size_t j = 0; j < k; ++j)
        gl[bi * k + j] += p[j] * (dy[j] - dot);
    }
  });
  return o;
}

template <typename T>
void validate_one_hot(const Tensor<T>& labels) {
  require(labels.rank() == 2, "labels not one-hot");
  const std::size_t batch = labels.dim(0), k = labels.dim(1);
  for (std::size_t bi = 0; bi < batch; ++bi) {
    int ones = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const T v = labels.data[bi * k + j];
      if (v == T(1))
        ++ones;
      else if (v != T(0))
        fail("labels not one-hot");
    }
    if (ones != 1) fail("labels not one-hot");
  }
}

// Summed binary cross-entropy over classes, averaged over the batch:
//   L_i = -sum_k [ y log(p) + (1-y) log(1-p) ]
// with probabilities clamped to [1e-7, 1-1e-7] before the logs.
template <typename T>
Var cross_entropy(Tape<T>& tape, Var probs, const Tensor<T>& one_hot) {
  const Tensor<T>& pv = tape.val(probs);
  require(pv.rank() == 2, "cross_entropy expects B x K probabilities");
  require(pv.shape == one_hot.shape, "cross_entropy shape mismatch");
  validate_one_hot(one_hot);
  const std::size_t batch = pv.dim(0), k = pv.dim(1);
  const T lo = static_cast<T>(kProbClamp);
  const T hi = T(1) - lo;

  T total = 0;
  for (std::size_t i = 0; i < pv.numel(); ++i) {
    const T p = std::min(hi, std::max(lo, pv.data[i]));
    const T y = one_hot.data[i];
    total -= y * std::log(p) + (T(1) - y) * std::log(T(1) - p);
  }
  Tensor<T> out = Tensor<T>::scalar(total / static_cast<T>(batch));

  Var o = tape.make(std::move(out));
  tape.set_back(o, [probs, o, one_hot, batch, k, lo, hi](Tape<T>& tp) {
    const T g0 = tp.grad(o)[0];
    const auto& pv2 = tp.val(probs).data;
    auto& gp = tp.grad(probs);
    const T inv_b = T(1) / static_cast<T>(batch);
    for (std::size_t i = 0; i < batch * k; ++i) {
      const T p = pv2[i];
      if (p <= lo || p >= hi) continue;  // clamp region, zero slope
      const T y = one_hot.data[i];
      gp[i] += g0 * inv_b * (-y / p + (T(1) - y) / (T(1) - p));
    }
  });
  return o;
}

// Scalar sum of all elements.
template <typename T>
Var sum_all(Tape<T>& tape, Var x) {
  const Tensor<T>& xv = tape.val(x);
  T total = 0;
  for (const T& v : xv.data) total += v;
  Var o = tape.make(Tensor<T>::scalar(total));
  tape.set_back(o, [x, o](Tape<T>& tp) {
    const T g = tp.grad(o)[0];
    auto& gx = tp.grad(x);
    for (auto& v : gx) v += g;
  });
  return o;
}

template <typename T>
Var add(Tape<T>& tape, Var a, Var b) {
  const Tensor<T>& av = tape.val(a);
  const Tensor<T>& bv = tape.val(b);
  require(av.shape == bv.shape, "add shape mismatch");
  Tensor<T> out = av;
  for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] += bv.data[i];
  Var o = tape.make(std::move(out));
  tape.set_back(o, [a, b, o](Tape<T>& tp) {
    const auto& go = tp.grad(o);
    auto& ga = tp.grad(a);
    auto& gb = tp.grad(b);
    for (std::size_t i = 0; i < go.size(); ++i) {
      ga[i] += go[i];
      gb[i] += go[i];
    }
  });
  return o;
}

// Concatenate B x C_i x L tensors along the channel axis.
template <typename T>
Var concat_channels(Tape<T>& tape, const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_channels needs at least one input");
  const Tensor<T>& first = tape.val(parts[0]);
  require(first.rank() == 3, "concat_channels expects B x C x L inputs");
  const std::size_t batch = first.dim(0), tlen = first.dim(2);
  std::size_t total_ch = 0;
  std::vector<std::size_t> chs;
  for (const Var& v : parts) {
    const Tensor<T>& tv = tape.val(v);
    require(tv.rank() == 3 && tv.dim(0) == batch && tv.dim(2) == tlen,
            "concat_channels shape mismatch");
    chs.push_back(tv.dim(1));
    total_ch += tv.dim(1);
  }
  Tensor<T> out({batch, total_ch, tlen});
  for (std::size_t bi = 0; bi < batch; ++bi) {
    std::size_t c0 = 0;
    for (std::size_t pi = 0; pi < parts.size(); ++pi) {
      const Tensor<T>& tv = tape.val(parts[pi]);
      std::copy(tv.data.begin() + bi * chs[pi] * tlen,
                tv.data.begin() + (bi + 1) * chs[pi] * tlen,
                out.data.begin() + (bi * total_ch + c0) * tlen);
      c0 += chs[pi];
    }
  }
  Var o = tape.make(std::move(out));
  tape.set_back(o, [parts, chs, o, batch, total_ch, tlen](Tape<T>& tp) {
    const auto& go = tp.grad(o);
    for (std::size_t bi = 0; bi < batch; ++bi) {
      std::size_t c0 = 0;
      for (std::size_t pi = 0; pi < parts.size(); ++pi) {
        auto& gp = tp.grad(parts[pi]);
        const std::size_t span = chs[pi] * tlen;
        const T* src = go.data() + (bi * total_ch + c0) * tlen;
        T* dst = gp.data() + bi * span;
        for (std::size_t i = 0; i < span; ++i) dst[i] += src[i];
        c0 += chs[pi];
      }
    }
  });
  return o;
}

// B x C x L -> B x (C*L); row-major data order is already flat.
template <typename T>
Var flatten(Tape<T>& tape, Var x) {
  const Tensor<T>& xv = tape.val(x);
  require(xv.rank() == 3, "flatten expects a B x C x L input");
  Tensor<T> out({xv.dim(0), xv.dim(1) * xv.dim(2)}, xv.data);
  Var o = tape.make(std::move(out));
  tape.set_back(o, [x, o](Tape<T>& tp) {
    const auto& go = tp.grad(o);
    auto& gx = tp.grad(x);
    for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
  });
  return o;
}

// Adaptive average pooling over time: bin j averages
// x[floor(j*L/out) : ceil((j+1)*L/out)).
template <typename T>
Var adaptive_avg_pool1d(Tape<T>& tape, Var x, std::size_t out_len) {
  const Tensor<T>& xv = tape.val(x);
  require(xv.rank() == 3, "adaptive_avg_pool1d expects a B x C x L input");
  require(out_len >= 1, "adaptive_avg_pool1d needs out_len >= 1");
  const std::size_t batch = xv.dim(0), ch = xv.dim(1), tlen = xv.dim(2);
  Tensor<T> out({batch, ch, out_len});
  for (std::size_t bi = 0; bi < batch; ++bi)
    for (std::size_t c = 0; c < ch; ++c) {
      const T* src = xv.data.data() + (bi * ch + c) * tlen;
      T* dst = out.data.data() + (bi * ch + c) * out_len;
      for (std::size_t j = 0; j < out_len; ++j) {
        const std::size_t s = j * tlen / out_len;
        const std::size_t e = ((j + 1) * tlen + out_len - 1) / out_len;
        T acc = 0;
        for (std::size_t t = s; t < e; ++t) acc += src[t];
        dst[j] = acc / static_cast<T>(e - s);
      }
    }
  Var o = tape.make(std::move(out));
  tape.set_back(o, [x, o, batch, ch, tlen, out_len](Tape<T>& tp) {
    const auto& go = tp.grad(o);
    auto& gx = tp.grad(x);
    for (std::size_t bi = 0; bi < batch; ++bi)
      for (std::size_t c = 0; c < ch; ++c) {
        const T* src = go.data() + (bi * ch + c) * out_len;
        T* dst = gx.data() + (bi * ch + c) * tlen;
        for (std::size_t j = 0; j < out_len; ++j) {
          const std::size_t s = j * tlen / out_len;
          const std::size_t e = ((j + 1) * tlen + out_len - 1) / out_len;
          const T share = src[j] / static_cast<T>(e - s);
          for (std::size_t t = s; t < e; ++t) dst[t] += share;
        }
      }
  });
  return o;
}

// Mean over time: B x C x L -> B x C.
template <typename T>
Var global_avg_pool(Tape<T>& tape, Var x) {
  const Tensor<T>& xv = tape.val(x);
  require(xv.rank() == 3, "global_avg_pool expects a B x C x L input");
  const std::size_t batch = xv.dim(0), ch = xv.dim(1), tlen = xv.dim(2);
  Tensor<T> out({batch, ch});
  for (std::size_t bi = 0; bi < batch; ++bi)
    for (std::size_t c = 0; c < ch; ++c) {
      const T* src = xv.data.data() + (bi * ch + c) * tlen;
      T acc = 0;
      for (std::size_t t = 0; t < tlen; ++t) acc += src[t];
      out.data[bi * ch + c] = acc / static_cast<T>(tlen);
    }
  Var o = tape.make(std::move(out));
  tape.set_back(o, [x, o, batch, ch, tlen](Tape<T>& tp) {
    const auto& go = tp.grad(o);
    auto& gx = tp.grad(x);
    const T inv = T(1) / static_cast<T>(tlen);
    for (std::size_t bi = 0; bi < batch; ++bi)
      for (std::size_t c = 0; c < ch; ++c) {
        const T share = go[bi * ch + c] * inv;
        T* dst = gx.data() + (bi * ch + c) * tlen;
        for (std::size_t t = 0; t < tlen; ++t) dst[t] += share;
      }
  });
  return o;
}

// Repeat a B x F vector along a new time axis: B x F -> B x F x L.
template <typename T>
Var tile_time(Tape<T>& tape, Var x, std::size_t out_len) {
  const Tensor<T>& xv = tape.val(x);
  require(xv.rank() == 2, "tile_time expects a B x F input");
  const std::size_t batch = xv.dim(0), f = xv.dim(1);
  Tensor<T> out({batch, f, out_len});
  for (std::size_t bi = 0; bi < batch; ++bi)
    for (std::size_t c = 0; c < f; ++c) {
      const T v = xv.data[bi * f + c];
      T* dst = out.data.data() + (bi * f + c) * out_len;
      for (std::size_t t = 0; t < out_len; ++t) dst[t] = v;
    }
  Var o = tape.make(std::move(out));
  tape.set_back(o, [x, o, batch, f, out_len](Tape<T>& tp) {
    const auto& go = tp.grad(o);
    auto& gx = tp.grad(x);
    for (std::size_t bi = 0; bi < batch; ++bi)
      for (std::size_t c = 0; c < f; ++c) {
        const T* src = go.data() + (bi * f + c) * out_len;
        T acc = 0;
        for (std::size_t t = 0; t < out_len; ++t) acc += src[t];
        gx[bi * f + c] += acc;
      }
  });
  return o;
}

}  // namespace mhnn::nn
