#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "pptflow/spectral.hpp"
#include "test_support.hpp"

using namespace pptflow;

namespace {

Tensor sine_channels(std::size_t T, const std::vector<std::vector<std::pair<double, double>>>& channels) {
  Tensor x(Shape{1, T, channels.size()}, 0.0);
  for (std::size_t c = 0; c < channels.size(); ++c)
    for (std::size_t t = 0; t < T; ++t)
      for (auto [freq, amp] : channels[c])
        x[t * channels.size() + c] += amp * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(t) / static_cast<double>(T));
  return x;
}

struct SilenceWarnings {
  SilenceWarnings() : saved(warning_sink()) { warning_sink() = [this](const std::string& m) { messages.push_back(m); }; }
  ~SilenceWarnings() { warning_sink() = saved; }
  WarningSink saved;
  std::vector<std::string> messages;
};

}  // namespace

TEST(AmplitudeSpectrum, ConstantInputIsAllZero) {
  Tensor x(Shape{2, 16, 3}, 4.0);
  Tensor a = amplitude_spectrum(x);
  for (double v : a.data()) EXPECT_NEAR(v, 0.0, 1e-12);
  EXPECT_EQ(a[0], 0.0);
}

TEST(AmplitudeSpectrum, SingleSinePeaksAtItsBin) {
  Tensor a = amplitude_spectrum(sine_channels(64, {{{4.0, 1.0}}}));
  EXPECT_EQ(std::max_element(a.data().begin(), a.data().end()) - a.data().begin(), 4);
  std::vector<double> col(64);
  for (std::size_t t = 0; t < 64; ++t) col[t] = std::sin(2.0 * std::numbers::pi * 4.0 * static_cast<double>(t) / 64.0);
  EXPECT_NEAR(a[4], pptflow::testing::direct_dft_magnitudes(col)[4], 1e-9);
}

TEST(AmplitudeSpectrum, TwoChannelsAverageTheirPeaks) {
  Tensor a = amplitude_spectrum(sine_channels(64, {{{4.0, 1.0}}, {{8.0, 1.0}}}));
  EXPECT_NEAR(a[4], 16.0, 1e-9);
  EXPECT_NEAR(a[8], 16.0, 1e-9);
}

TEST(AmplitudeSpectrum, ShortInputRejected) {
  EXPECT_THROW(amplitude_spectrum(Tensor(Shape{1, 3, 1}, 1.0)), Error);
}

TEST(TopK, SingleSinePeriod) {
  PeriodSet ps = topk_periods(amplitude_spectrum(sine_channels(64, {{{4.0, 1.0}}})), 1, 64);
  ASSERT_EQ(ps.size(), 1u);
  EXPECT_EQ(ps.entries[0].frequency, 4u);
  EXPECT_EQ(ps.entries[0].period, 16u);
  EXPECT_GT(ps.entries[0].weight, 0.0);
}

TEST(TopK, RecoversThreePeriods) {
  PeriodSet ps = topk_periods(amplitude_spectrum(sine_channels(96, {{{4.0, 1.0}, {8.0, 0.8}, {12.0, 0.6}}})), 3, 96);
  std::set<std::size_t> periods;
  for (const auto& e : ps.entries) periods.insert(e.period);
  EXPECT_EQ(periods, (std::set<std::size_t>{24, 12, 8}));
  EXPECT_GE(ps.entries[0].weight, ps.entries[1].weight);
  EXPECT_GE(ps.entries[1].weight, ps.entries[2].weight);
}

TEST(TopK, TiesBreakTowardLowerFrequency) {
  Tensor flat(Shape{9}, 1.0);
  flat[0] = 0.0;
  PeriodSet ps = topk_periods(flat, 2, 16);
  ASSERT_EQ(ps.size(), 2u);
  EXPECT_EQ(ps.entries[0].frequency, 1u);
  EXPECT_EQ(ps.entries[1].frequency, 2u);
}

TEST(TopK, ReducedKWarnsAndReturnsWhatExists) {
  SilenceWarnings guard;
  Tensor a(Shape{9}, 0.0);
  a[3] = 2.0;
  PeriodSet ps = topk_periods(a, 4, 16);
  EXPECT_EQ(ps.size(), 1u);
  EXPECT_TRUE(ps.reduced());
  EXPECT_EQ(guard.messages.size(), 1u);

  PeriodSet filled = topk_periods(a, 4, 16, {.allow_zero_amplitude = true});
  ASSERT_EQ(filled.size(), 4u);
  EXPECT_EQ(filled.frequencies(), (std::vector<std::size_t>{3, 1, 2, 4}));
}

TEST(TopK, RejectsOutOfRangeK) {
  Tensor a(Shape{9}, 1.0);
  EXPECT_THROW(topk_periods(a, 0, 16), Error);
  EXPECT_THROW(topk_periods(a, 9, 16), Error);
}

TEST(TopK, PeriodsAreFloorOfLengthOverFrequency) {
  std::mt19937_64 rng(4);
  for (std::size_t T : {17u, 48u, 60u, 96u}) {
    Tensor x = pptflow::testing::random_tensor({2, T, 3}, rng);
    PeriodSet ps = topk_periods(amplitude_spectrum(x), std::min<std::size_t>(6, T / 2), T);
    std::set<std::size_t> seen;
    for (const auto& e : ps.entries) {
      EXPECT_LE(e.period * e.frequency, T);
      EXPECT_GT((e.period + 1) * e.frequency, T);
      EXPECT_GE(e.period, 2u);
      EXPECT_GE(e.frequency, 1u);
      EXPECT_LE(e.frequency, T / 2);
      EXPECT_TRUE(seen.insert(e.frequency).second);
    }
  }
}

TEST(TopK, InvariantUnderPositiveRescaling) {
  std::mt19937_64 rng(8);
  Tensor x = pptflow::testing::random_tensor({3, 48, 4}, rng);
  Tensor y = x;
  for (auto& v : y.data()) v *= 3.5;
  PeriodSet a = topk_periods(amplitude_spectrum(x), 6, 48);
  PeriodSet b = topk_periods(amplitude_spectrum(y), 6, 48);
  EXPECT_EQ(a.frequencies(), b.frequencies());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(b.entries[i].weight, 3.5 * a.entries[i].weight, 1e-9);
}

TEST(TopK, RecoversNoisySinusoidMixtures) {
  std::mt19937_64 rng(2024);
  const std::size_t T = 96;
  const double sigma = 0.05;
  std::normal_distribution<double> noise(0.0, sigma);
  std::uniform_real_distribution<double> amp(2.0 * sigma, 1.0), phase(0.0, 2.0 * std::numbers::pi);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::size_t> freqs(T / 2 - 1);
    std::iota(freqs.begin(), freqs.end(), 1);
    std::shuffle(freqs.begin(), freqs.end(), rng);
    const std::size_t m = 1 + static_cast<std::size_t>(trial % 6);
    freqs.resize(m);
    Tensor x(Shape{1, T, 1}, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
      x[t] = noise(rng);
    }
    for (std::size_t f : freqs) {
      const double a = amp(rng), ph = phase(rng);
      for (std::size_t t = 0; t < T; ++t)
        x[t] += a * std::sin(2.0 * std::numbers::pi * static_cast<double>(f * t) / static_cast<double>(T) + ph);
    }
    PeriodSet ps = topk_periods(amplitude_spectrum(x), 6, T);
    const auto got = ps.frequencies();
    for (std::size_t f : freqs) EXPECT_NE(std::find(got.begin(), got.end(), f), got.end()) << "trial " << trial << " f=" << f;
  }
}

TEST(PerSampleWeights, SingleSampleMatchesSpectrum) {
  std::mt19937_64 rng(12);
  Tensor x = pptflow::testing::random_tensor({1, 32, 5}, rng);
  Tensor a = amplitude_spectrum(x);
  PeriodSet ps = topk_periods(a, 4, 32);
  Tensor w = per_sample_weights(x, ps.frequencies());
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(w[i], a[ps.entries[i].frequency], 1e-12);
}

TEST(PerSampleWeights, ZeroSampleAndIdenticalSamples) {
  std::mt19937_64 rng(13);
  Tensor x(Shape{3, 16, 2}, 0.0);
  Tensor s = pptflow::testing::random_tensor({16, 2}, rng);
  std::copy(s.data().begin(), s.data().end(), x.data().begin() + 32);
  std::copy(s.data().begin(), s.data().end(), x.data().begin() + 64);
  Tensor w = per_sample_weights(x, {1, 3, 5});
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(w[i], 0.0);
    EXPECT_EQ(w[3 + i], w[6 + i]);
  }
}

TEST(PerSampleWeights, TapedDftAgreesWithFftRoute) {
  std::mt19937_64 rng(14);
  Tensor x = pptflow::testing::random_tensor({2, 24, 3}, rng);
  const std::vector<std::size_t> freqs{1, 5, 12};
  Tensor fft_route = per_sample_weights(x, freqs);
  Tape tape;
  Var dft_route = per_sample_weights(tape.constant(x), freqs);
  ASSERT_EQ(dft_route.shape(), fft_route.shape());
  for (std::size_t i = 0; i < fft_route.size(); ++i) EXPECT_NEAR(dft_route.value()[i], fft_route[i], 1e-10);
}

TEST(PerSampleWeights, TapedRouteGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(15);
  Param x("x", pptflow::testing::random_tensor({2, 12, 3}, rng));
  const double err = pptflow::testing::fd_max_rel_error({&x}, [&](Tape& t) {
    return sum(square(per_sample_weights(t.leaf(x), {1, 2, 5})));
  });
  EXPECT_LT(err, 1e-4);
}
