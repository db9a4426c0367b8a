#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "test_support.hpp"
#include "triq/error.hpp"
#include "triq/grad_check.hpp"
#include "triq/ops.hpp"

using namespace triq;
using triq::testing::random_tensor;
using triq::testing::weighted_sum;

namespace {

void expect_tensor_near(const Tensor& a, const Tensor& b, double tol) {
  ASSERT_EQ(a.shape(), b.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "at " << i;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Direct quadruple loop, independent of the library's conv2d.
Tensor naive_conv(const Tensor& in, const Tensor& k, std::size_t stride, std::size_t pad) {
  const std::size_t h = in.dim(0), w = in.dim(1), ci = in.dim(2), ks = k.dim(0), co = k.dim(3);
  const std::size_t oh = (h + 2 * pad - ks) / stride + 1, ow = (w + 2 * pad - ks) / stride + 1;
  Tensor out({oh, ow, co});
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x)
      for (std::size_t o = 0; o < co; ++o) {
        double acc = 0.0;
        for (std::size_t dy = 0; dy < ks; ++dy)
          for (std::size_t dx = 0; dx < ks; ++dx) {
            const long sy = static_cast<long>(y * stride + dy) - static_cast<long>(pad);
            const long sx = static_cast<long>(x * stride + dx) - static_cast<long>(pad);
            if (sy < 0 || sx < 0 || sy >= static_cast<long>(h) || sx >= static_cast<long>(w)) continue;
            for (std::size_t c = 0; c < ci; ++c) {
              acc += in[(sy * w + sx) * ci + c] * k[((dy * ks + dx) * ci + c) * co + o];
            }
          }
        out.data_mut()[(y * ow + x) * co + o] = acc;
      }
  return out;
}

}  // namespace

// --- Tensor basics ----------------------------------------------------------

TEST(Tensor, ShapeAndDataAgree) {
  Tensor t({2, 3, 4});
  EXPECT_EQ(t.numel(), 24u);
  EXPECT_EQ(t.data().size(), 24u);
  EXPECT_THROW(Tensor({2, 0}), DimensionError);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>(3)), DimensionError);
}

TEST(Tensor, GradHasDataShape) {
  Tensor t({3, 2}, true);
  EXPECT_FALSE(t.has_grad());
  EXPECT_EQ(t.grad_mut().size(), 6u);
  EXPECT_TRUE(t.has_grad());
}

TEST(Tensor, CloneIsIndependent) {
  Tensor a({2}, {1.0, 2.0});
  Tensor b = a.clone();
  b.data_mut()[0] = 9.0;
  EXPECT_EQ(a[0], 1.0);
  EXPECT_FALSE(a.same_storage(b));
}

// --- matmul -----------------------------------------------------------------

TEST(Matmul, IdentityLeavesInputUnchanged) {
  Rng rng(1);
  Tensor eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tensor x = random_tensor({3, 4}, rng, 1.0, false);
  expect_tensor_near(ops::matmul(eye, x), x, 0.0);
}

TEST(Matmul, ZerosGiveZeros) {
  Rng rng(2);
  Tensor out = ops::matmul(Tensor::zeros({2, 4}), random_tensor({4, 3}, rng, 1.0, false));
  EXPECT_EQ(out.shape(), (Shape{2, 3}));
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(Matmul, HandExpandedProduct) {
  Tensor out = ops::matmul(Tensor({2, 2}, {1, 2, 3, 4}), Tensor({2, 1}, {5, 6}));
  EXPECT_EQ(out[0], 17.0);
  EXPECT_EQ(out[1], 39.0);
}

TEST(Matmul, ShapeMismatchThrows) {
  EXPECT_THROW(ops::matmul(Tensor({2, 3}), Tensor({2, 3})), DimensionError);
}

// --- conv2d -----------------------------------------------------------------

TEST(Conv2d, OneByOneIdentityKernel) {
  Rng rng(3);
  Tensor x = random_tensor({5, 4, 3}, rng, 1.0, false);
  Tensor k = Tensor::zeros({1, 1, 3, 3});
  for (std::size_t c = 0; c < 3; ++c) k.data_mut()[c * 3 + c] = 1.0;
  expect_tensor_near(ops::conv2d(x, k, 1, 0), x, 0.0);
}

TEST(Conv2d, StrideTwoOnesKernelSumsWindows) {
  Tensor x = Tensor::full({4, 4, 1}, 0.75);
  Tensor out = ops::conv2d(x, Tensor::full({2, 2, 1, 1}, 1.0), 2, 0);
  ASSERT_EQ(out.shape(), (Shape{2, 2, 1}));
  for (double v : out.data()) EXPECT_DOUBLE_EQ(v, 4 * 0.75);
}

TEST(Conv2d, PointwiseEqualsPerPositionMatmul) {
  Rng rng(4);
  Tensor x = random_tensor({6, 5, 7}, rng, 1.0, false);
  Tensor k = random_tensor({1, 1, 7, 4}, rng, 1.0, false);
  Tensor out = ops::conv2d(x, k, 1, 0);
  ASSERT_EQ(out.shape(), (Shape{6, 5, 4}));
  Tensor flat = ops::matmul(ops::reshape(x, {30, 7}), ops::reshape(k, {7, 4}));
  for (std::size_t i = 0; i < out.numel(); ++i) EXPECT_NEAR(out[i], flat[i], 1e-10);
}

TEST(Conv2d, MatchesNaiveLoopWithPaddingAndStride) {
  Rng rng(5);
  for (std::size_t stride : {1u, 2u, 3u}) {
    for (std::size_t pad : {0u, 1u, 2u}) {
      Tensor x = random_tensor({7, 6, 2}, rng, 1.0, false);
      Tensor k = random_tensor({3, 3, 2, 3}, rng, 1.0, false);
      expect_tensor_near(ops::conv2d(x, k, stride, pad), naive_conv(x, k, stride, pad), 1e-12);
    }
  }
}

TEST(Conv2d, OutputExtentFormula) {
  Tensor out = ops::conv2d(Tensor({9, 8, 1}), Tensor({3, 3, 1, 2}), 2, 1);
  EXPECT_EQ(out.shape(), (Shape{5, 4, 2}));  // floor((9+2-3)/2)+1, floor((8+2-3)/2)+1
}

TEST(Conv2d, KernelLargerThanPaddedInputThrows) {
  EXPECT_THROW(ops::conv2d(Tensor({2, 2, 1}), Tensor({5, 5, 1, 1}), 1, 1), DimensionError);
  EXPECT_THROW(ops::conv2d(Tensor({4, 4, 2}), Tensor({3, 3, 1, 1}), 1, 0), DimensionError);
}

// --- maxpool2d --------------------------------------------------------------

TEST(Maxpool, PoolOneIsIdentity) {
  Rng rng(6);
  Tensor x = random_tensor({3, 5, 2}, rng, 1.0, false);
  expect_tensor_near(ops::maxpool2d(x, 1), x, 0.0);
}

TEST(Maxpool, ConstantStaysConstant) {
  Tensor out = ops::maxpool2d(Tensor::full({5, 7, 3}, -1.5), 3);
  EXPECT_EQ(out.shape(), (Shape{2, 3, 3}));
  for (double v : out.data()) EXPECT_EQ(v, -1.5);
}

TEST(Maxpool, CeilWindowsOnThreeByThree) {
  Tensor x({3, 3, 1}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor out = ops::maxpool2d(x, 2);
  ASSERT_EQ(out.shape(), (Shape{2, 2, 1}));
  EXPECT_EQ(std::vector<double>(out.data().begin(), out.data().end()), (std::vector<double>{5, 6, 8, 9}));
}

TEST(Maxpool, ZeroPoolThrows) { EXPECT_THROW(ops::maxpool2d(Tensor({2, 2, 1}), 0), ParameterError); }

TEST(Maxpool, TieSendsGradientToFirstIndex) {
  Tensor x = Tensor::full({2, 2, 1}, 1.0, true);
  GradTape tape;
  tape.backward(ops::sum(ops::maxpool2d(x, 2, &tape), &tape));
  EXPECT_EQ(std::vector<double>(x.grad().begin(), x.grad().end()), (std::vector<double>{1, 0, 0, 0}));
}

// --- softmax ----------------------------------------------------------------

TEST(Softmax, EqualLogitsAreUniform) {
  Tensor out = ops::softmax(Tensor::full({5}, 3.3));
  for (double v : out.data()) EXPECT_NEAR(v, 0.2, 1e-15);
}

TEST(Softmax, ClosedFormTwoLogits) {
  Tensor out = ops::softmax(Tensor({2}, {0.0, std::log(3.0)}));
  EXPECT_NEAR(out[0], 0.25, 1e-15);
  EXPECT_NEAR(out[1], 0.75, 1e-15);
}

TEST(SoftmaxProperty, RowsSumToOneAndShiftInvariant) {
  Rng rng(7);
  std::uniform_int_distribution<std::size_t> extent(1, 8);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t rows = extent(rng), n = extent(rng);
    Tensor x = random_tensor({rows, n}, rng, 5.0, false);
    Tensor shifted = x.clone();
    for (double& v : shifted.data_mut()) v += 123.4;
    Tensor a = ops::softmax(x), b = ops::softmax(shifted);
    for (std::size_t r = 0; r < rows; ++r) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        EXPECT_GE(a[r * n + j], 0.0);
        s += a[r * n + j];
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
    expect_tensor_near(a, b, 1e-12);
  }
}

TEST(Softmax, LargeLogitsStayFinite) {
  Tensor out = ops::softmax(Tensor({3}, {1000.0, 999.0, -1000.0}));
  EXPECT_NEAR(out[0] + out[1] + out[2], 1.0, 1e-12);
}

// --- layer_norm -------------------------------------------------------------

TEST(LayerNorm, RowsHaveZeroMeanUnitVariance) {
  Rng rng(8);
  Tensor x = random_tensor({4, 6}, rng, 3.0, false);
  Tensor out = ops::layer_norm(x, Tensor::full({6}, 1.0), Tensor::zeros({6}));
  for (std::size_t r = 0; r < 4; ++r) {
    double mean = 0.0, var = 0.0;
    for (std::size_t j = 0; j < 6; ++j) mean += out[r * 6 + j] / 6.0;
    for (std::size_t j = 0; j < 6; ++j) var += (out[r * 6 + j] - mean) * (out[r * 6 + j] - mean) / 6.0;
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(var, 1.0, 1e-5);
  }
}

TEST(LayerNorm, ConstantRowGivesZeros) {
  Tensor out = ops::layer_norm(Tensor::full({1, 4}, 2.5), Tensor::full({4}, 1.0), Tensor::zeros({4}));
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(LayerNorm, TwoElementRow) {
  Tensor out = ops::layer_norm(Tensor({2}, {1.0, 3.0}), Tensor::full({2}, 1.0), Tensor::zeros({2}), 1e-12);
  EXPECT_NEAR(out[0], -1.0, 1e-9);
  EXPECT_NEAR(out[1], 1.0, 1e-9);
}

// --- gelu -------------------------------------------------------------------

TEST(Gelu, ReferenceValues) {
  Tensor out = ops::gelu(Tensor({3}, {0.0, 10.0, 1.0}));
  EXPECT_EQ(out[0], 0.0);
  EXPECT_LT(std::abs(out[1] - 10.0), 1e-8);
  EXPECT_NEAR(out[2], normal_cdf(1.0), 1e-15);
  EXPECT_NEAR(out[2], 0.8413, 1e-4);
}

// --- cross entropy / dropout ------------------------------------------------

TEST(CrossEntropyOp, FloorKeepsLossFinite) {
  const std::vector<double> target{1, 0, 0, 0, 0};
  Tensor loss = ops::cross_entropy(Tensor({5}, {0.0, 0.25, 0.25, 0.25, 0.25}), target);
  EXPECT_NEAR(loss.item(), -std::log(1e-12), 1e-9);
}

TEST(Dropout, RateZeroIsIdentity) {
  Rng rng(9);
  Tensor x = random_tensor({50}, rng, 1.0, false);
  expect_tensor_near(ops::dropout(x, 0.0, rng), x, 0.0);
}

TEST(Dropout, SeededMaskRepeatsAndScalesSurvivors) {
  Rng rng(9);
  Tensor x = random_tensor({200}, rng, 1.0, false);
  Rng a(11), b(11);
  Tensor da = ops::dropout(x, 0.5, a), db = ops::dropout(x, 0.5, b);
  expect_tensor_near(da, db, 0.0);
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    if (da[i] == 0.0) {
      ++zeros;
    } else {
      EXPECT_DOUBLE_EQ(da[i], 2.0 * x[i]);
    }
  }
  EXPECT_GT(zeros, 50u);
  EXPECT_LT(zeros, 150u);
}

// --- backward ---------------------------------------------------------------

TEST(Backward, SumGivesOnes) {
  Tensor x = Tensor::full({3, 2}, 0.4, true);
  GradTape tape;
  tape.backward(ops::sum(x, &tape));
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, HalfSquaredNormGivesX) {
  Rng rng(12);
  Tensor x = random_tensor({4, 3}, rng);
  GradTape tape;
  tape.backward(ops::scale(ops::sum(ops::mul(x, x, &tape), &tape), 0.5, &tape));
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_NEAR(x.grad()[i], x[i], 1e-15);
}

TEST(Backward, NonScalarLossThrows) {
  Tensor x = Tensor::full({3}, 1.0, true);
  GradTape tape;
  Tensor y = ops::scale(x, 2.0, &tape);
  EXPECT_THROW(tape.backward(y), ContractError);
}

TEST(Backward, SecondCallAccumulates) {
  Tensor x = Tensor::full({2}, 1.0, true);
  GradTape tape;
  Tensor loss = ops::sum(ops::scale(x, 3.0, &tape), &tape);
  tape.backward(loss);
  tape.backward(loss);
  for (double g : x.grad()) EXPECT_EQ(g, 6.0);
}

TEST(Backward, ClearedTapeContributesNothing) {
  Tensor x = Tensor::full({2}, 1.0, true);
  GradTape tape;
  Tensor loss = ops::sum(x, &tape);
  EXPECT_FALSE(tape.empty());
  tape.clear();
  EXPECT_TRUE(tape.empty());
  EXPECT_THROW(tape.backward(loss), ContractError);
  for (double g : x.grad_mut()) EXPECT_EQ(g, 0.0);
}

TEST(Backward, ReplaysInReverseOrder) {
  // y = (2x + 1)^2: correct only if the square's rule runs before the affine one.
  Tensor x = Tensor::full({1}, 0.5, true);
  GradTape tape;
  Tensor a = ops::add(ops::scale(x, 2.0, &tape), Tensor::full({1}, 1.0), &tape);
  tape.backward(ops::sum(ops::mul(a, a, &tape), &tape));
  EXPECT_DOUBLE_EQ(x.grad()[0], 2.0 * 2.0 * (2.0 * 0.5 + 1.0));
}

// --- grad_check -------------------------------------------------------------

TEST(GradCheck, QuadraticIsNearlyExact) {
  Rng rng(13);
  std::vector<Tensor> params{random_tensor({5}, rng)};
  const auto report = grad_check(
      [&](GradTape* t) { return ops::sum(ops::mul(params[0], params[0], t), t); }, params);
  EXPECT_LT(report.max_rel_error, 1e-9);
  EXPECT_EQ(report.coords_checked, 5u);
}

TEST(GradCheck, UnusedParameterHasZeroGradients) {
  Rng rng(14);
  std::vector<Tensor> params{random_tensor({3}, rng), random_tensor({2}, rng)};
  const auto report = grad_check([&](GradTape* t) { return ops::sum(params[0], t); }, params);
  EXPECT_LT(report.max_rel_error, 1e-9);
  for (double g : params[1].grad_mut()) EXPECT_EQ(g, 0.0);
}

TEST(GradCheck, NonFiniteForwardThrows) {
  std::vector<Tensor> params{Tensor::full({1}, 1.0, true)};
  EXPECT_THROW(grad_check([](GradTape*) { return Tensor::scalar(std::nan("")); }, params), NumericError);
}

// Every differentiable op on random shapes up to 8 per axis.
class OpGradient : public ::testing::TestWithParam<int> {};

TEST_P(OpGradient, MatchesCentralDifferences) {
  Rng rng(100 + GetParam());
  std::uniform_int_distribution<std::size_t> ext(1, 8), small(1, 4);
  const std::size_t m = ext(rng), n = ext(rng), k = ext(rng);

  struct Case {
    const char* name;
    std::vector<Tensor> params;
    LossFn make;
  };
  std::vector<Case> cases;
  {
    Tensor a = random_tensor({m, k}, rng), b = random_tensor({k, n}, rng), w = random_tensor({m, n}, rng, 1, false);
    cases.push_back({"matmul", {a, b}, [=](GradTape* t) { return weighted_sum(ops::matmul(a, b, t), w, t); }});
  }
  {
    Tensor a = random_tensor({m, n}, rng), w = random_tensor({n, m}, rng, 1, false);
    cases.push_back({"transpose", {a}, [=](GradTape* t) { return weighted_sum(ops::transpose(a, t), w, t); }});
  }
  {
    Tensor a = random_tensor({m, n}, rng), b = random_tensor({m, n}, rng), w = random_tensor({m, n}, rng, 1, false);
    cases.push_back({"add_mul", {a, b}, [=](GradTape* t) {
                       return weighted_sum(ops::mul(ops::add(a, b, t), b, t), w, t);
                     }});
  }
  {
    Tensor a = random_tensor({m, n}, rng), bias = random_tensor({n}, rng), w = random_tensor({m, n}, rng, 1, false);
    cases.push_back({"add_bias", {a, bias}, [=](GradTape* t) { return weighted_sum(ops::add_bias(a, bias, t), w, t); }});
  }
  {
    Tensor a = random_tensor({m, n}, rng, 2.0), w = random_tensor({m, n}, rng, 1, false);
    cases.push_back({"gelu", {a}, [=](GradTape* t) { return weighted_sum(ops::gelu(a, t), w, t); }});
  }
  {
    Tensor a = random_tensor({m, n}, rng, 2.0), w = random_tensor({m, n}, rng, 1, false);
    cases.push_back({"softmax", {a}, [=](GradTape* t) { return weighted_sum(ops::softmax(a, t), w, t); }});
  }
  {
    const std::size_t d = n + 1;
    Tensor a = random_tensor({m, d}, rng), g = random_tensor({d}, rng), b = random_tensor({d}, rng),
           w = random_tensor({m, d}, rng, 1, false);
    cases.push_back({"layer_norm", {a, g, b}, [=](GradTape* t) {
                       return weighted_sum(ops::layer_norm(a, g, b, 1e-6, t), w, t);
                     }});
  }
  {
    const std::size_t ks = small(rng), stride = small(rng), pad = small(rng) - 1;
    const std::size_t h = std::max(ext(rng), ks), wd = std::max(ext(rng), ks), ci = small(rng), co = small(rng);
    Tensor x = random_tensor({h, wd, ci}, rng), kern = random_tensor({ks, ks, ci, co}, rng);
    const std::size_t oh = (h + 2 * pad - ks) / stride + 1, ow = (wd + 2 * pad - ks) / stride + 1;
    Tensor w = random_tensor({oh, ow, co}, rng, 1, false);
    cases.push_back({"conv2d", {x, kern}, [=](GradTape* t) {
                       return weighted_sum(ops::conv2d(x, kern, stride, pad, t), w, t);
                     }});
  }
  {
    const std::size_t pool = small(rng), c = small(rng);
    Tensor x = random_tensor({m, n, c}, rng);
    const std::size_t oh = (m + pool - 1) / pool, ow = (n + pool - 1) / pool;
    Tensor w = random_tensor({oh, ow, c}, rng, 1, false);
    cases.push_back({"maxpool2d", {x}, [=](GradTape* t) { return weighted_sum(ops::maxpool2d(x, pool, t), w, t); }});
  }
  {
    Tensor x = random_tensor({m, n, 2}, rng), w = random_tensor({m + 2, n + 3, 2}, rng, 1, false);
    cases.push_back({"pad", {x}, [=](GradTape* t) {
                       return weighted_sum(ops::pad_bottom_right(x, m + 2, n + 3, t), w, t);
                     }});
  }
  {
    Tensor a = random_tensor({m, n}, rng), b = random_tensor({k, n}, rng), w = random_tensor({m + k, n}, rng, 1, false);
    cases.push_back({"concat_rows", {a, b}, [=](GradTape* t) {
                       const std::vector<Tensor> parts{a, b};
                       return weighted_sum(ops::concat_rows(parts, t), w, t);
                     }});
  }
  {
    Tensor a = random_tensor({m, n}, rng), b = random_tensor({m, k}, rng), w = random_tensor({m, n + k}, rng, 1, false);
    cases.push_back({"concat_cols_slice", {a, b}, [=](GradTape* t) {
                       const std::vector<Tensor> parts{a, b};
                       Tensor cat = ops::concat_cols(parts, t);
                       Tensor rows = ops::slice_rows(cat, m / 2, m - m / 2, t);
                       Tensor ww = ops::slice_rows(w, m / 2, m - m / 2);
                       return weighted_sum(ops::reshape(ops::slice_cols(rows, 0, n + k, t), ww.shape(), t), ww, t);
                     }});
  }
  {
    Tensor logits = random_tensor({5}, rng);
    std::vector<double> target(5);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    double s = 0.0;
    for (double& v : target) s += (v = u(rng));
    for (double& v : target) v /= s;
    cases.push_back({"cross_entropy", {logits}, [=](GradTape* t) {
                       return ops::cross_entropy(ops::softmax(logits, t), target, 1e-12, t);
                     }});
  }
  {
    Tensor a = random_tensor({m, n}, rng), w = random_tensor({m, n}, rng, 1, false);
    cases.push_back({"dropout", {a}, [=](GradTape* t) {
                       Rng r(55);
                       return weighted_sum(ops::dropout(a, 0.3, r, t), w, t);
                     }});
  }

  for (auto& c : cases) {
    const auto report = grad_check(c.make, c.params);
    EXPECT_LE(report.max_rel_error, 1e-4) << c.name << " worst analytic " << report.worst_analytic << " numeric "
                                          << report.worst_numeric;
    EXPECT_GT(report.coords_checked, 0u) << c.name;
  }
}

INSTANTIATE_TEST_SUITE_P(RandomShapes, OpGradient, ::testing::Range(0, 12));

TEST(Determinism, ForwardIsBitIdentical) {
  Rng r1(77), r2(77);
  Tensor a = random_tensor({6, 6, 3}, r1), b = random_tensor({6, 6, 3}, r2);
  Tensor k1 = random_tensor({3, 3, 3, 4}, r1), k2 = random_tensor({3, 3, 3, 4}, r2);
  Tensor o1 = ops::softmax(ops::gelu(ops::conv2d(a, k1, 2, 1)));
  Tensor o2 = ops::softmax(ops::gelu(ops::conv2d(b, k2, 2, 1)));
  for (std::size_t i = 0; i < o1.numel(); ++i) EXPECT_EQ(o1[i], o2[i]);
}

TEST(NumericState, NonFiniteResultThrows) {
  Tensor big = Tensor::full({1}, 1e308);
  EXPECT_THROW(ops::scale(big, 10.0), NumericError);
}
