#include "mhnn/wavelet.hpp"

#include <cmath>
#include <gtest/gtest.h>

#include "mhnn/rng.hpp"
#include "oracles.hpp"

using mhnn::RngStream;
using mhnn::Tensor;
namespace wl = mhnn::wavelet;

namespace {

Tensor<double> random_window(std::size_t c, std::size_t t, RngStream& rng) {
  Tensor<double> w({c, t});
  for (auto& v : w.data) v = rng.uniform(-1.0, 1.0);
  return w;
}

double max_abs_diff(const Tensor<double>& a, const Tensor<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.numel(); ++i)
    m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

}  // namespace

TEST(HaarFilters, Coefficients) {
  const auto f = wl::haar_filters<double>();
  const double s = 1.0 / std::sqrt(2.0);
  ASSERT_EQ(f.taps(), 2u);
  EXPECT_NEAR(f.lowpass[0], s, 1e-15);
  EXPECT_NEAR(f.lowpass[1], s, 1e-15);
  EXPECT_NEAR(f.highpass[0], s, 1e-15);
  EXPECT_NEAR(f.highpass[1], -s, 1e-15);
}

TEST(HaarFilters, Orthonormal) {
  const auto f = wl::haar_filters<double>();
  double lo2 = 0, hi2 = 0, dot = 0;
  for (std::size_t i = 0; i < f.taps(); ++i) {
    lo2 += f.lowpass[i] * f.lowpass[i];
    hi2 += f.highpass[i] * f.highpass[i];
    dot += f.lowpass[i] * f.highpass[i];
  }
  EXPECT_NEAR(lo2, 1.0, 1e-12);
  EXPECT_NEAR(hi2, 1.0, 1e-12);
  EXPECT_NEAR(dot, 0.0, 1e-12);
}

TEST(DwtStep, ConstantSignal) {
  const auto f = wl::haar_filters<double>();
  const auto [approx, detail] = wl::dwt_step<double>({1, 1, 1, 1}, f);
  const double r2 = std::sqrt(2.0);
  ASSERT_EQ(approx.size(), 2u);
  EXPECT_NEAR(approx[0], r2, 1e-12);
  EXPECT_NEAR(approx[1], r2, 1e-12);
  EXPECT_NEAR(detail[0], 0.0, 1e-12);
  EXPECT_NEAR(detail[1], 0.0, 1e-12);
}

TEST(DwtStep, AlternatingSignal) {
  const auto f = wl::haar_filters<double>();
  const auto [approx, detail] = wl::dwt_step<double>({1, -1, 1, -1}, f);
  const double r2 = std::sqrt(2.0);
  EXPECT_NEAR(approx[0], 0.0, 1e-12);
  EXPECT_NEAR(approx[1], 0.0, 1e-12);
  EXPECT_NEAR(detail[0], r2, 1e-12);
  EXPECT_NEAR(detail[1], r2, 1e-12);
}

TEST(DwtStep, EmptySignalFails) {
  const auto f = wl::haar_filters<double>();
  std::vector<double> approx, detail;
  EXPECT_THROW(
      { wl::dwt_step<double>(nullptr, 0, f, approx, detail); },
      std::invalid_argument);
}

TEST(DwtStep, MatchesDenseMatrixOracle) {
  const auto f = wl::haar_filters<double>();
  RngStream rng(7);
  const std::size_t n = 24;
  std::vector<double> signal(n);
  for (auto& v : signal) v = rng.uniform(-2.0, 2.0);

  const auto [approx, detail] = wl::dwt_step(signal, f);
  const auto m = oracles::haar_analysis_matrix(n);
  const auto y = oracles::matvec(m, signal);
  for (std::size_t i = 0; i < n / 2; ++i) {
    EXPECT_NEAR(approx[i], y[i], 1e-10);
    EXPECT_NEAR(detail[i], y[n / 2 + i], 1e-10);
  }
}

TEST(DwtStep, OddLengthExtendsLastSample) {
  const auto f = wl::haar_filters<double>();
  const auto [approx, detail] = wl::dwt_step<double>({1, 2, 3}, f);
  ASSERT_EQ(approx.size(), 2u);
  // last window reads (3, 3) after zero-order hold
  EXPECT_NEAR(approx[1], 3.0 * std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(detail[1], 0.0, 1e-12);
}

TEST(DwtStep, EnergyConservation) {
  const auto f = wl::haar_filters<double>();
  RngStream rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 2 * (4 + rng.below(30));
    std::vector<double> signal(n);
    for (auto& v : signal) v = rng.uniform(-3.0, 3.0);
    const auto [approx, detail] = wl::dwt_step(signal, f);
    double in = 0, out = 0;
    for (double v : signal) in += v * v;
    for (double v : approx) out += v * v;
    for (double v : detail) out += v * v;
    EXPECT_NEAR(in, out, 1e-10);
  }
}

TEST(Mdwd, PaperShapeExample) {
  // 45 channels of length 24 at depth 3 -> lengths 12, 6, 3, 3
  const auto f = wl::haar_filters<double>();
  RngStream rng(3);
  const auto window = random_window(45, 24, rng);
  const auto pyr = wl::mdwd(window, f, 3);
  ASSERT_EQ(pyr.details.size(), 3u);
  EXPECT_EQ(pyr.details[0].dim(0), 45u);
  EXPECT_EQ(pyr.details[0].dim(1), 12u);
  EXPECT_EQ(pyr.details[1].dim(1), 6u);
  EXPECT_EQ(pyr.details[2].dim(1), 3u);
  EXPECT_EQ(pyr.approx.dim(1), 3u);
}

TEST(Mdwd, ConstantWindowHasZeroDetails) {
  const auto f = wl::haar_filters<double>();
  Tensor<double> window({4, 16});
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t t = 0; t < 16; ++t) window.at(c, t) = 1.0 + c;
  const auto pyr = wl::mdwd(window, f, 3);
  for (const auto& h : pyr.details)
    for (double v : h.data) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(Mdwd, MatchesNestedDwtSteps) {
  const auto f = wl::haar_filters<double>();
  RngStream rng(5);
  const auto window = random_window(3, 16, rng);
  const auto pyr = wl::mdwd(window, f, 2);
  for (std::size_t c = 0; c < 3; ++c) {
    std::vector<double> row(window.data.begin() + c * 16,
                            window.data.begin() + (c + 1) * 16);
    const auto [a1, d1] = wl::dwt_step(row, f);
    const auto [a2, d2] = wl::dwt_step(a1, f);
    for (std::size_t i = 0; i < d1.size(); ++i)
      EXPECT_DOUBLE_EQ(pyr.details[0].at(c, i), d1[i]);
    for (std::size_t i = 0; i < d2.size(); ++i)
      EXPECT_DOUBLE_EQ(pyr.details[1].at(c, i), d2[i]);
    for (std::size_t i = 0; i < a2.size(); ++i)
      EXPECT_DOUBLE_EQ(pyr.approx.at(c, i), a2[i]);
  }
}

TEST(Mdwd, RejectsTooShortWindow) {
  const auto f = wl::haar_filters<double>();
  Tensor<double> window({2, 7});
  try {
    wl::mdwd(window, f, 3);
    FAIL() << "expected an exception";
  } catch (const std::invalid_argument& e) {
    EXPECT_STREQ(e.what(), "window too short for decomposition depth");
  }
}

TEST(Reconstruct, ConstantAndAlternating) {
  const auto f = wl::haar_filters<double>();
  for (const std::vector<double> base :
       {std::vector<double>{1, 1, 1, 1}, std::vector<double>{1, -1, 1, -1}}) {
    Tensor<double> window({1, 4}, base);
    const auto pyr = wl::mdwd(window, f, 2);
    const auto rec = wl::reconstruct(pyr, f);
    EXPECT_LT(max_abs_diff(rec, window), 1e-12);
  }
}

TEST(Reconstruct, RoundTripRandom) {
  const auto f = wl::haar_filters<double>();
  RngStream rng(17);
  const auto window = random_window(6, 64, rng);
  const auto pyr = wl::mdwd(window, f, 3);
  const auto rec = wl::reconstruct(pyr, f);
  EXPECT_LT(max_abs_diff(rec, window), 1e-12);
}

TEST(Reconstruct, RoundTripOddLengths) {
  // zero-order-hold extension reconstructs exactly with Haar
  const auto f = wl::haar_filters<double>();
  RngStream rng(19);
  const auto window = random_window(2, 25, rng);
  const auto pyr = wl::mdwd(window, f, 3);
  EXPECT_EQ(pyr.details[0].dim(1), 13u);
  EXPECT_EQ(pyr.details[1].dim(1), 7u);
  EXPECT_EQ(pyr.details[2].dim(1), 4u);
  const auto rec = wl::reconstruct(pyr, f);
  EXPECT_LT(max_abs_diff(rec, window), 1e-12);
}

TEST(Reconstruct, RejectsInconsistentPyramid) {
  const auto f = wl::haar_filters<double>();
  RngStream rng(23);
  auto pyr = wl::mdwd(random_window(2, 16, rng), f, 2);
  pyr.details[0] = Tensor<double>({2, 5});  // breaks the shape chain
  try {
    wl::reconstruct(pyr, f);
    FAIL() << "expected an exception";
  } catch (const std::invalid_argument& e) {
    EXPECT_STREQ(e.what(), "inconsistent pyramid");
  }
}

TEST(Mdwd, ChannelIndependence) {
  const auto f = wl::haar_filters<double>();
  RngStream rng(29);
  const auto window = random_window(5, 32, rng);
  auto modified = window;
  for (std::size_t t = 0; t < 32; ++t) modified.at(2, t) += 1.5;

  const auto a = wl::mdwd(window, f, 3);
  const auto b = wl::mdwd(modified, f, 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t c = 0; c < 5; ++c)
      for (std::size_t t = 0; t < a.details[i].dim(1); ++t) {
        if (c == 2) continue;
        EXPECT_DOUBLE_EQ(a.details[i].at(c, t), b.details[i].at(c, t));
      }
  for (std::size_t t = 0; t < a.approx.dim(1); ++t)
    EXPECT_NE(a.approx.at(2, t), b.approx.at(2, t));
}

TEST(Mdwd, Linearity) {
  const auto f = wl::haar_filters<double>();
  RngStream rng(31);
  const auto x = random_window(3, 32, rng);
  const auto y = random_window(3, 32, rng);
  const double a = 1.7, b = -0.4;
  Tensor<double> combo({3, 32});
  for (std::size_t i = 0; i < combo.numel(); ++i)
    combo.data[i] = a * x.data[i] + b * y.data[i];

  const auto px = wl::mdwd(x, f, 3);
  const auto py = wl::mdwd(y, f, 3);
  const auto pc = wl::mdwd(combo, f, 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < pc.details[i].numel(); ++j)
      EXPECT_NEAR(pc.details[i].data[j],
                  a * px.details[i].data[j] + b * py.details[i].data[j], 1e-10);
  for (std::size_t j = 0; j < pc.approx.numel(); ++j)
    EXPECT_NEAR(pc.approx.data[j], a * px.approx.data[j] + b * py.approx.data[j],
                1e-10);
}

TEST(Reconstruct, Float32Tolerance) {
  const auto f = wl::haar_filters<float>();
  RngStream rng(37);
  Tensor<float> window({4, 64});
  for (auto& v : window.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  const auto pyr = wl::mdwd(window, f, 3);
  const auto rec = wl::reconstruct(pyr, f);
  float m = 0;
  for (std::size_t i = 0; i < rec.numel(); ++i)
    m = std::max(m, std::abs(rec.data[i] - window.data[i]));
  EXPECT_LT(m, 1e-6f);
}
