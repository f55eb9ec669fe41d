// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <functional>
#include <numeric>

#include <gtest/gtest.h>

#include "msgl/errors.hpp"
#include "msgl/gradcheck.hpp"
#include "msgl/ops.hpp"
#include "test_util.hpp"

using namespace msgl;
using msgl::testing::random_tensor;

namespace {

// Loss = sum(op(inputs) * R) for a fixed random R, so every output entry
// carries a distinct weight into the gradient.
GradCheckReport op_gradient_report(const std::function<Tensor(const std::vector<Tensor>&)>& op,
                                   const std::vector<Shape>& shapes, std::uint64_t seed, double input_shift = 0.0) {
  RngStream rng(seed);
  std::vector<NamedTensor> leaves;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    Tensor t = random_tensor(shapes[i], rng, true);
    for (auto& v : t.mutable_data()) v += input_shift;
    leaves.push_back({"in" + std::to_string(i), t});
  }
  auto inputs = [&] {
    std::vector<Tensor> in;
    for (auto& l : leaves) in.push_back(l.tensor);
    return in;
  };
  Tensor probe;
  {
    NoGradGuard g;
    probe = op(inputs());
  }
  Tensor r = random_tensor(probe.shape(), rng);
  auto loss = [&] { return sum(mul(op(inputs()), r)); };
  return check_gradients(loss, leaves);
}

}  // namespace

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  Tensor m = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(matmul(eye, m).to_vector(), (std::vector<double>{1, 2, 3, 4}));
}

TEST(Matmul, TimesZerosIsZeros) {
  Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  Tensor out = matmul(eye, Tensor::zeros({2, 3}));
  EXPECT_EQ(out.shape(), (Shape{2, 3}));
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(Matmul, MatchesTripleLoop) {
  RngStream rng(1);
  Tensor a = random_tensor({4, 5}, rng);
  Tensor b = random_tensor({5, 3}, rng);
  Tensor c = matmul(a, b);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 5; ++k) s += a.at(i, k) * b.at(k, j);
      EXPECT_NEAR(c.at(i, j), s, 1e-12);
    }
  }
}

TEST(Matmul, RejectsInnerMismatch) {
  EXPECT_THROW(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), DimensionError);
}

TEST(Softmax, UniformLogits) {
  Tensor p = softmax(Tensor::zeros({4}), 0);
  for (double v : p.data()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Softmax, ClosedFormTwoClasses) {
  Tensor p = softmax(Tensor::from_data({2}, {0.0, std::log(3.0)}), 0);
  EXPECT_NEAR(p.at(0), 0.25, 1e-15);
  EXPECT_NEAR(p.at(1), 0.75, 1e-15);
}

TEST(Softmax, ShiftInvariant) {
  RngStream rng(2);
  Tensor x = random_tensor({3, 7}, rng);
  std::vector<double> shifted = x.to_vector();
  for (auto& v : shifted) v += 123.456;
  Tensor a = softmax(x, 1);
  Tensor b = softmax(Tensor::from_data({3, 7}, shifted), 1);
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(a.at(i), b.at(i), 1e-12);
}

TEST(Softmax, SlicesSumToOneAlongEitherAxis) {
  RngStream rng(3);
  Tensor x = random_tensor({5, 6}, rng, false, 10.0);
  for (std::size_t axis : {0u, 1u}) {
    Tensor p = softmax(x, axis);
    const std::size_t outer = axis == 0 ? 6 : 5;
    const std::size_t extent = axis == 0 ? 5 : 6;
    for (std::size_t o = 0; o < outer; ++o) {
      double s = 0.0;
      for (std::size_t e = 0; e < extent; ++e) {
        const double v = axis == 0 ? p.at(e, o) : p.at(o, e);
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
        s += v;
      }
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
  }
}

TEST(Softmax, HugeLogitsStayFinite) {
  Tensor p = softmax(Tensor::from_data({3}, {1000.0, 999.0, -1000.0}), 0);
  EXPECT_NEAR(p.at(0) + p.at(1) + p.at(2), 1.0, 1e-12);
}

TEST(LayerNorm, ConstantSliceMapsToBeta) {
  Tensor out = layer_norm(Tensor::full({1, 4}, 5.0), Tensor::full({4}, 1.0), Tensor::zeros({4}));
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(LayerNorm, StandardizedInputUnchanged) {
  Tensor out = layer_norm(Tensor::from_data({1, 2}, {1.0, -1.0}), Tensor::full({2}, 1.0), Tensor::zeros({2}), 1e-14);
  EXPECT_NEAR(out.at(0), 1.0, 1e-12);
  EXPECT_NEAR(out.at(1), -1.0, 1e-12);
}

TEST(LayerNorm, MatchesTwoPassOracle) {
  RngStream rng(4);
  Tensor x = random_tensor({3, 8}, rng, false, 3.0);
  Tensor g = random_tensor({8}, rng);
  Tensor b = random_tensor({8}, rng);
  Tensor y = layer_norm(x, g, b);
  for (std::size_t r = 0; r < 3; ++r) {
    double mean = 0.0;
    for (std::size_t j = 0; j < 8; ++j) mean += x.at(r, j);
    mean /= 8.0;
    double var = 0.0;
    for (std::size_t j = 0; j < 8; ++j) var += (x.at(r, j) - mean) * (x.at(r, j) - mean);
    var /= 8.0;
    for (std::size_t j = 0; j < 8; ++j) {
      const double expect = (x.at(r, j) - mean) / std::sqrt(var + kLayerNormEps) * g.at(j) + b.at(j);
      EXPECT_NEAR(y.at(r, j), expect, 1e-10);
    }
  }
}

TEST(Dropout, ZeroRateIsIdentity) {
  RngStream rng(5);
  Tensor x = random_tensor({10}, rng);
  EXPECT_EQ(dropout(x, 0.0, true, rng).to_vector(), x.to_vector());
}

TEST(Dropout, EvalModeIsIdentity) {
  RngStream rng(6);
  Tensor x = random_tensor({10}, rng);
  EXPECT_EQ(dropout(x, 0.7, false, rng).to_vector(), x.to_vector());
}

TEST(Dropout, MonteCarloRateAndScale) {
  RngStream rng(7);
  const std::size_t n = 100000;
  std::vector<double> v(n);
  for (auto& e : v) e = rng.uniform(1.0, 2.0);
  Tensor x = Tensor::from_data({n}, v);
  Tensor y = dropout(x, 0.5, true, rng);
  std::size_t survivors = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (y.at(i) != 0.0) {
      ++survivors;
      EXPECT_DOUBLE_EQ(y.at(i), 2.0 * x.at(i));
    }
  }
  const double frac = static_cast<double>(survivors) / n;
  EXPECT_NEAR(frac, 0.5, 0.01);
  const double mean_in = std::accumulate(v.begin(), v.end(), 0.0) / n;
  const double mean_out = std::accumulate(y.data().begin(), y.data().end(), 0.0) / n;
  EXPECT_NEAR(mean_out / mean_in, 1.0, 0.02);
}

TEST(Dropout, RejectsRateOfOne) {
  RngStream rng(8);
  EXPECT_THROW(dropout(Tensor::zeros({3}), 1.0, true, rng), ConfigError);
  EXPECT_THROW(dropout(Tensor::zeros({3}), -0.1, true, rng), ConfigError);
}

TEST(Dropout, SameSeedSameMask) {
  Tensor x = Tensor::full({1000}, 1.0);
  RngStream a(9), b(9);
  EXPECT_EQ(dropout(x, 0.3, true, a).to_vector(), dropout(x, 0.3, true, b).to_vector());
}

TEST(Backward, SquareAtThree) {
  Tensor x = Tensor::scalar(3.0, true);
  mul(x, x).backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
}

TEST(Backward, SumOfSoftmaxHasZeroGradient) {
  RngStream rng(10);
  Tensor x = random_tensor({6}, rng, true);
  sum(softmax(x, 0)).backward();
  for (double g : x.grad()) EXPECT_NEAR(g, 0.0, 1e-15);
}

TEST(Backward, AccumulatesAcrossUses) {
  Tensor a = Tensor::from_data({3}, {1, 2, 3}, true);
  sum(add(a, a)).backward();
  for (double g : a.grad()) EXPECT_DOUBLE_EQ(g, 2.0);
}

TEST(Backward, RejectsNonScalar) {
  Tensor a = Tensor::from_data({3}, {1, 2, 3}, true);
  EXPECT_THROW(scale(a, 2.0).backward(), UsageError);
}

TEST(Backward, TapeIsReleasedAfterUse) {
  Tensor a = Tensor::from_data({3}, {1, 2, 3}, true);
  Tensor loss = sum(mul(a, a));
  loss.backward();
  EXPECT_THROW(loss.backward(), UsageError);
}

TEST(Backward, GradShapesMatchValues) {
  RngStream rng(11);
  Tensor w = random_tensor({4, 3}, rng, true);
  Tensor x = random_tensor({2, 4}, rng, true);
  sum(matmul(x, w)).backward();
  EXPECT_EQ(w.grad().size(), w.numel());
  EXPECT_EQ(x.grad().size(), x.numel());
}

TEST(NoGrad, SuppressesRecording) {
  Tensor a = Tensor::from_data({2}, {1, 2}, true);
  NoGradGuard g;
  Tensor b = mul(a, a);
  EXPECT_FALSE(b.requires_grad());
  EXPECT_TRUE(b.is_leaf());
}

TEST(Numeric, NonFiniteOutputIsAnError) {
  Tensor big = Tensor::from_data({1}, {1e300});
  EXPECT_THROW(mul(big, big), NumericError);
}

TEST(Rng, SameSeedSameStream) {
  RngStream a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  RngStream c(43);
  EXPECT_NE(RngStream(42).next_u64(), c.next_u64());
}

TEST(Rng, ForksAreIndependentOfParentDraws) {
  RngStream a(1);
  RngStream child1 = a.fork(3);
  a.next_u64();
  RngStream child2 = RngStream(1).fork(3);
  EXPECT_EQ(child1.next_u64(), child2.next_u64());
  EXPECT_NE(RngStream(1).fork(3).next_u64(), RngStream(1).fork(4).next_u64());
}

TEST(GradCheck, LinearFunctionIsExact) {
  RngStream rng(12);
  Tensor w = random_tensor({5}, rng);
  auto f = [&](const Tensor& x) { return sum(mul(x, w)); };
  EXPECT_LT(check_gradients(f, random_tensor({5}, rng)), 1e-10);
}

TEST(GradCheck, SigmoidAtZero) {
  Tensor x = Tensor::scalar(0.0, true);
  sum(sigmoid(x)).backward();
  EXPECT_DOUBLE_EQ(x.grad()[0], 0.25);
  auto f = [](const Tensor& t) { return sum(sigmoid(t)); };
  EXPECT_LT(check_gradients(f, Tensor::scalar(0.0)), 1e-8);
}

TEST(GradCheck, CatchesInjectedFault) {
  RngStream rng(13);
  Tensor w = random_tensor({3, 3}, rng);
  auto f = [&](const Tensor& x) { return sum(matmul(x, w)); };
  debug::set_backward_fault("matmul");
  const double err = check_gradients(f, random_tensor({2, 3}, rng));
  debug::clear_backward_fault();
  EXPECT_GT(err, 0.1);
}

TEST(GradCheck, RelativeErrorDefinition) {
  EXPECT_NEAR(gradient_relative_error(1.0, 1.1), 0.1 / 1.1, 1e-15);
  EXPECT_DOUBLE_EQ(gradient_relative_error(0.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(gradient_relative_error(0.0, 1e-12), 1e-12 / kRelativeErrorFloor);
}

// One gradient check per primitive.
struct OpCase {
  const char* name;
  std::function<Tensor(const std::vector<Tensor>&)> op;
  std::vector<Shape> shapes;
  double shift = 0.0;
};

class OpGradient : public ::testing::TestWithParam<OpCase> {};

TEST_P(OpGradient, MatchesFiniteDifferences) {
  const auto& c = GetParam();
  const auto report = op_gradient_report(c.op, c.shapes, 100, c.shift);
  // Zero gradients come back from finite differences as roundoff, so those
  // entries are held to an absolute bound instead.
  EXPECT_LT(report.max_rel_error_above_floor, 1e-7) << c.name;
  EXPECT_LT(report.max_abs_error_below_floor, 1e-10) << c.name;
}

INSTANTIATE_TEST_SUITE_P(
    AllOps, OpGradient,
    ::testing::Values(
        OpCase{"matmul", [](const auto& in) { return matmul(in[0], in[1]); }, {{3, 4}, {4, 2}}},
        OpCase{"transpose", [](const auto& in) { return transpose(in[0]); }, {{3, 4}}},
        OpCase{"linear", [](const auto& in) { return linear(in[0], in[1], in[2]); }, {{3, 4}, {4, 2}, {2}}},
        OpCase{"add", [](const auto& in) { return add(in[0], in[1]); }, {{2, 3}, {2, 3}}},
        OpCase{"sub", [](const auto& in) { return sub(in[0], in[1]); }, {{2, 3}, {2, 3}}},
        OpCase{"mul", [](const auto& in) { return mul(in[0], in[1]); }, {{2, 3}, {2, 3}}},
        OpCase{"scale", [](const auto& in) { return scale(in[0], -1.7); }, {{2, 3}}},
        OpCase{"add_row", [](const auto& in) { return add_row(in[0], in[1]); }, {{3, 4}, {4}}},
        OpCase{"mul_row", [](const auto& in) { return mul_row(in[0], in[1]); }, {{3, 4}, {4}}},
        OpCase{"relu", [](const auto& in) { return relu(in[0]); }, {{4, 4}}, 0.0},
        OpCase{"sigmoid", [](const auto& in) { return sigmoid(in[0]); }, {{3, 3}}},
        OpCase{"sum", [](const auto& in) { return sum(in[0]); }, {{3, 3}}},
        OpCase{"mean", [](const auto& in) { return mean(in[0]); }, {{3, 3}}},
        OpCase{"softmax_rows", [](const auto& in) { return softmax(in[0], 1); }, {{3, 5}}},
        OpCase{"softmax_cols", [](const auto& in) { return softmax(in[0], 0); }, {{3, 5}}},
        OpCase{"log_softmax", [](const auto& in) { return log_softmax(in[0], 1); }, {{3, 5}}},
        OpCase{"layer_norm", [](const auto& in) { return layer_norm(in[0], in[1], in[2]); }, {{3, 6}, {6}, {6}}},
        OpCase{"reshape", [](const auto& in) { return reshape(in[0], {1, 12}); }, {{3, 4}}},
        OpCase{"slice_rows", [](const auto& in) { return slice_rows(in[0], 1, 3); }, {{4, 3}}},
        OpCase{"slice_cols", [](const auto& in) { return slice_cols(in[0], 1, 3); }, {{3, 4}}},
        OpCase{"concat_rows",
               [](const auto& in) {
                 std::vector<Tensor> parts{in[0], in[1]};
                 return concat_rows(parts);
               },
               {{2, 3}, {1, 3}}},
        OpCase{"concat_cols",
               [](const auto& in) {
                 std::vector<Tensor> parts{in[0], in[1]};
                 return concat_cols(parts);
               },
               {{2, 3}, {2, 2}}}),
    [](const ::testing::TestParamInfo<OpCase>& info) { return std::string(info.param.name); });
