#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "pptflow/fft.hpp"
#include "pptflow/tensor.hpp"
#include "test_support.hpp"

using namespace pptflow;
using pptflow::testing::random_tensor;

TEST(Tensor, RejectsZeroExtentAndLengthMismatch) {
  EXPECT_THROW(Tensor(Shape{2, 0}), Error);
  EXPECT_THROW(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), Error);
  Tensor t(Shape{2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.dim(-1), 3u);
}

TEST(Matmul, IdentityAndUnitSelection) {
  Tensor id = Tensor::matrix({{1, 0}, {0, 1}});
  Tensor b = Tensor::matrix({{1, 2}, {3, 4}});
  EXPECT_EQ(matmul(id, b), b);

  Tensor row = Tensor::matrix({{1, 0}});
  Tensor col = Tensor::matrix({{5}, {7}});
  EXPECT_EQ(matmul(row, col), Tensor::matrix({{5}}));
}

TEST(Matmul, MatchesTripleLoop) {
  std::mt19937_64 rng(7);
  Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
  Tensor got = matmul(a, b), want = pptflow::testing::naive_matmul(a, b);
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
}

TEST(Matmul, BroadcastsLeadingAxes) {
  std::mt19937_64 rng(3);
  Tensor a = random_tensor({2, 3, 4}, rng), b = random_tensor({4, 5}, rng);
  Tensor c = matmul(a, b);
  ASSERT_EQ(c.shape(), (Shape{2, 3, 5}));
  for (std::size_t batch = 0; batch < 2; ++batch) {
    Tensor ab(Shape{3, 4});
    std::copy_n(a.data().begin() + batch * 12, 12, ab.data().begin());
    Tensor want = pptflow::testing::naive_matmul(ab, b);
    for (std::size_t i = 0; i < 15; ++i) EXPECT_NEAR(c[batch * 15 + i], want[i], 1e-12);
  }
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  Tensor a(Shape{2, 3}), b(Shape{4, 2});
  try {
    matmul(a, b);
    FAIL() << "expected dimension error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDimension);
    EXPECT_NE(std::string(e.what()).find("[2,3]"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("[4,2]"), std::string::npos);
  }
}

TEST(Matmul, AssociativeOnRandomTriples) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_int_distribution<std::size_t> ext(1, 6);
    const std::size_t m = ext(rng), k = ext(rng), l = ext(rng), n = ext(rng);
    Tensor a = random_tensor({m, k}, rng), b = random_tensor({k, l}, rng), c = random_tensor({l, n}, rng);
    Tensor left = matmul(matmul(a, b), c), right = matmul(a, matmul(b, c));
    for (std::size_t i = 0; i < left.size(); ++i) EXPECT_NEAR(left[i], right[i], 1e-9);
  }
}

TEST(Permute, RoundTripsThroughInverse) {
  std::mt19937_64 rng(5);
  Tensor x = random_tensor({2, 3, 4, 5}, rng);
  const std::vector<std::size_t> axes{0, 3, 2, 1};
  Tensor y = permute(x, axes);
  EXPECT_EQ(y.shape(), (Shape{2, 5, 4, 3}));
  EXPECT_EQ(y.at({1, 4, 2, 0}), x.at({1, 0, 2, 4}));
  EXPECT_EQ(permute(y, inverse_permutation(axes)), x);
}

TEST(Rfft, ConstantSeriesIsDcOnly) {
  Tensor x(Shape{8}, 2.5);
  Tensor m = rfft_magnitudes(x);
  ASSERT_EQ(m.size(), 5u);
  EXPECT_NEAR(m[0], 8 * 2.5, 1e-12);
  for (std::size_t f = 1; f < 5; ++f) EXPECT_NEAR(m[f], 0.0, 1e-12);
}

TEST(Rfft, UnitSineBinMagnitude) {
  Tensor x(Shape{64});
  for (std::size_t t = 0; t < 64; ++t) x[t] = std::sin(2.0 * std::numbers::pi * 4.0 * static_cast<double>(t) / 64.0);
  Tensor m = rfft_magnitudes(x);
  EXPECT_NEAR(m[4], 32.0, 1e-9);
  for (std::size_t f = 0; f < m.size(); ++f) {
    if (f != 4) EXPECT_LT(m[f], 1e-9);
  }
}

TEST(Rfft, OutputLengthAndShortInput) {
  EXPECT_EQ(rfft_magnitudes(Tensor(Shape{10}, 1.0)).size(), 6u);
  EXPECT_THROW(rfft_magnitudes(Tensor(Shape{1}, 1.0)), Error);
}

TEST(Rfft, MatchesDirectDftForArbitraryLengths) {
  std::mt19937_64 rng(17);
  for (std::size_t n : {2u, 3u, 7u, 12u, 16u, 48u, 60u, 96u, 101u, 128u}) {
    Tensor x = random_tensor({n}, rng);
    std::vector<double> xs(x.data().begin(), x.data().end());
    const auto want = pptflow::testing::direct_dft_magnitudes(xs);
    Tensor got = rfft_magnitudes(x);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t f = 0; f < want.size(); ++f) EXPECT_NEAR(got[f], want[f], 1e-9) << "n=" << n << " f=" << f;
  }
}

TEST(Rfft, ParsevalForEvenLengths) {
  std::mt19937_64 rng(23);
  for (std::size_t n : {4u, 10u, 48u, 64u, 96u}) {
    Tensor x = random_tensor({n}, rng);
    double energy = 0.0;
    for (double v : x.data()) energy += v * v;
    Tensor m = rfft_magnitudes(x);
    double spec = m[0] * m[0] + m[n / 2] * m[n / 2];
    for (std::size_t f = 1; f < n / 2; ++f) spec += 2.0 * m[f] * m[f];
    EXPECT_NEAR(energy, spec / static_cast<double>(n), 1e-9);
  }
}

TEST(Conv2d, DeltaKernelIsIdentity) {
  std::mt19937_64 rng(2);
  Tensor x = random_tensor({2, 3, 5, 4}, rng);
  Tensor k(Shape{3, 3, 3, 3}, 0.0);
  for (std::size_t c = 0; c < 3; ++c) k.at({c, c, 1, 1}) = 1.0;
  EXPECT_EQ(conv2d_same(x, k), x);
}

TEST(Conv2d, PointwiseScale) {
  Tensor x(Shape{1, 1, 3, 3}, 3.0);
  Tensor k(Shape{1, 1, 1, 1}, 2.0);
  Tensor y = conv2d_same(x, k);
  for (double v : y.data()) EXPECT_EQ(v, 6.0);
}

TEST(Conv2d, MatchesSlidingWindowOracle) {
  std::mt19937_64 rng(31);
  Tensor x = random_tensor({1, 1, 4, 4}, rng), k = random_tensor({1, 1, 3, 3}, rng);
  Tensor got = conv2d_same(x, k), want = pptflow::testing::naive_conv2d_same(x, k);
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);

  Tensor x2 = random_tensor({2, 3, 6, 5}, rng), k2 = random_tensor({4, 3, 5, 5}, rng);
  Tensor got2 = conv2d_same(x2, k2), want2 = pptflow::testing::naive_conv2d_same(x2, k2);
  for (std::size_t i = 0; i < got2.size(); ++i) EXPECT_NEAR(got2[i], want2[i], 1e-12);
}

TEST(Conv2d, EvenKernelIsConfigurationError) {
  try {
    conv2d_same(Tensor(Shape{1, 1, 4, 4}), Tensor(Shape{1, 1, 2, 2}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
}

TEST(Softmax, SymmetryMaskingAndReference) {
  const double inf = std::numeric_limits<double>::infinity();
  Tensor u = softmax_lastdim(Tensor::vector({0, 0, 0}));
  for (double v : u.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);

  Tensor masked = softmax_lastdim(Tensor::vector({0, -inf, -inf}));
  EXPECT_EQ(masked[0], 1.0);
  EXPECT_EQ(masked[1], 0.0);
  EXPECT_EQ(masked[2], 0.0);

  Tensor s = softmax_lastdim(Tensor::vector({1, 2, 3}));
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(s[static_cast<std::size_t>(i)], std::exp(i + 1.0) / z, 1e-12);

  EXPECT_THROW(softmax_lastdim(Tensor::vector({-inf, -inf})), Error);
}

TEST(Softmax, RowsSumToOneAndMaskedEntriesAreZero) {
  std::mt19937_64 rng(41);
  const double inf = std::numeric_limits<double>::infinity();
  Tensor x = random_tensor({4, 6, 6}, rng, -30.0, 30.0);
  for (std::size_t b = 0; b < 4; ++b)
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = i + 1; j < 6; ++j) x.at({b, i, j}) = -inf;
  Tensor y = softmax_lastdim(x);
  for (std::size_t r = 0; r < 24; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < 6; ++j) s += y[r * 6 + j];
    EXPECT_NEAR(s, 1.0, 1e-12);
    const std::size_t i = r % 6;
    for (std::size_t j = i + 1; j < 6; ++j) EXPECT_EQ(y[r * 6 + j], 0.0);
  }
}
