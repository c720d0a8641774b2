// Copyright 2026 The disco-asr Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "disco/ops.h"
#include "test_util.h"

namespace disco {
namespace {

using testing::Mat;
using testing::expect_gradients_match;
using testing::max_abs_diff;
using testing::random_tensor;
using V = Var<double>;

// Weighted sum with fixed random weights so every output element reaches the
// loss with a distinct coefficient.
V weighted_sum(Tape<double>& t, const V& y, std::uint64_t seed = 99) {
  Rng rng(seed);
  return sum(mul(y, t.constant(random_tensor(y.shape(), rng))));
}

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  Tape<double> t;
  const Mat eye(Shape{2, 2}, {1, 0, 0, 1});
  const Mat b(Shape{2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(matmul(t.constant(eye), t.constant(b)).value(), b);
}

TEST(Matmul, RowTimesColumnIsDotProduct) {
  Tape<double> t;
  const V y = matmul(t.constant(Mat(Shape{1, 2}, {1, 2})),
                     t.constant(Mat(Shape{2, 1}, {3, 4})));
  EXPECT_EQ(y.shape(), (Shape{1, 1}));
  EXPECT_EQ(y.value()[0], 11.0);
}

TEST(Matmul, MatchesTripleLoop) {
  Rng rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const Mat a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
    Tape<double> t;
    EXPECT_LE(max_abs_diff(matmul(t.constant(a), t.constant(b)).value(),
                           testing::ref_matmul(a, b)),
              1e-12);
  }
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  Tape<double> t;
  try {
    matmul(t.constant(Mat(Shape{2, 3})), t.constant(Mat(Shape{2, 3})));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
  }
}

TEST(LogSoftmax, UniformLogits) {
  Tape<double> t;
  const V y = log_softmax(t.constant(Mat(Shape{1, 3}, {0, 0, 0})));
  for (double v : y.value().data()) EXPECT_NEAR(v, -std::log(3.0), 1e-15);
}

TEST(LogSoftmax, LargeLogitsDoNotOverflow) {
  Tape<double> t;
  const V y = log_softmax(t.constant(Mat(Shape{1, 2}, {1000, 0})));
  EXPECT_NEAR(y.value()[0], 0.0, 1e-12);
  EXPECT_NEAR(y.value()[1], -1000.0, 1e-9);
  EXPECT_TRUE(std::isfinite(y.value()[1]));
}

TEST(LogSoftmax, ExpSumsToOne) {
  Rng rng(2);
  Tape<double> t;
  const V y = log_softmax(t.constant(random_tensor({4, 7}, rng, -5, 5)));
  for (Index r = 0; r < 4; ++r) {
    double s = 0.0;
    for (Index c = 0; c < 7; ++c) s += std::exp(y.value().at(r, c));
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(LayerNorm, TwoElementExample) {
  Tape<double> t;
  const V y = layer_norm(t.constant(Mat(Shape{1, 2}, {1, 3})),
                         t.constant(Mat(Shape{2}, 1.0)),
                         t.constant(Mat(Shape{2}, 0.0)), 1e-12);
  EXPECT_NEAR(y.value()[0], -1.0, 1e-9);
  EXPECT_NEAR(y.value()[1], 1.0, 1e-9);
}

TEST(LayerNorm, ConstantInputGivesZeros) {
  Tape<double> t;
  const V y = layer_norm(t.constant(Mat(Shape{1, 4}, 5.0)),
                         t.constant(Mat(Shape{4}, 1.0)),
                         t.constant(Mat(Shape{4}, 0.0)));
  for (double v : y.value().data()) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(LayerNorm, ZeroGainReturnsBias) {
  Rng rng(3);
  Tape<double> t;
  const Mat bias = random_tensor({5}, rng);
  const V y = layer_norm(t.constant(random_tensor({3, 5}, rng)),
                         t.constant(Mat(Shape{5}, 0.0)), t.constant(bias));
  for (Index r = 0; r < 3; ++r)
    for (Index c = 0; c < 5; ++c) EXPECT_EQ(y.value().at(r, c), bias[c]);
}

TEST(DepthwiseConv, UnitKernelIsIdentity) {
  Rng rng(4);
  Tape<double> t;
  const Mat x = random_tensor({6, 3}, rng);
  EXPECT_EQ(depthwise_conv1d(t.constant(x), t.constant(Mat(Shape{3, 1}, 1.0)))
                .value(),
            x);
}

TEST(DepthwiseConv, HandConvolutionWithZeroPadding) {
  Tape<double> t;
  const V y = depthwise_conv1d(t.constant(Mat(Shape{3, 1}, {1, 2, 3})),
                               t.constant(Mat(Shape{1, 3}, 1.0)));
  EXPECT_EQ(y.value().vec(), (std::vector<double>{3, 6, 5}));
}

TEST(DepthwiseConv, MatchesSlidingWindow) {
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const Mat x = random_tensor({9, 4}, rng), k = random_tensor({4, 5}, rng);
    Tape<double> t;
    EXPECT_LE(max_abs_diff(depthwise_conv1d(t.constant(x), t.constant(k)).value(),
                           testing::ref_depthwise(x, k)),
              1e-12);
  }
}

TEST(DepthwiseConv, EvenKernelRejected) {
  Tape<double> t;
  EXPECT_THROW(depthwise_conv1d(t.constant(Mat(Shape{4, 2})),
                                t.constant(Mat(Shape{2, 4}))),
               std::invalid_argument);
}

TEST(Backward, SumOfSquares) {
  Tape<double> t;
  const V x = t.variable(Mat(Shape{2}, {1, -2}));
  t.backward(sum(mul(x, x)));
  EXPECT_EQ(x.grad().vec(), (std::vector<double>{2, -4}));
}

TEST(Backward, ConstantBranchReceivesNoGradient) {
  Tape<double> t;
  const V x = t.variable(Mat(Shape{2}, {1, 2}));
  const V c = t.constant(Mat(Shape{2}, {3, 4}));
  t.backward(sum(mul(x, c)));
  EXPECT_FALSE(c.requires_grad());
  EXPECT_EQ(c.grad(), Mat(Shape{2}, 0.0));
  EXPECT_EQ(x.grad().vec(), (std::vector<double>{3, 4}));
}

TEST(Backward, NonScalarLossRejected) {
  Tape<double> t;
  const V x = t.variable(Mat(Shape{2}, 1.0));
  EXPECT_THROW(t.backward(x), DimensionError);
}

TEST(Backward, SecondPassRejected) {
  Tape<double> t;
  const V x = t.variable(Mat(Shape{2}, 1.0));
  const V l = sum(x);
  t.backward(l);
  EXPECT_THROW(t.backward(l), std::logic_error);
  EXPECT_THROW(sum(x), std::logic_error);
}

TEST(Tape, ValueReferencesSurviveLaterRecords) {
  Tape<double> t;
  const V x = t.constant(Mat(Shape{2}, {1.0, 2.0}));
  const Mat& held = x.value();
  const double* data = held.data().data();
  V y = x;
  for (int i = 0; i < 5000; ++i) y = add(y, x);
  EXPECT_EQ(&held, &x.value());
  EXPECT_EQ(data, x.value().data().data());
  EXPECT_EQ(held[1], 2.0);
}

TEST(Debug, NonFiniteValueSurfaced) {
  Tape<double> t;
  t.set_debug(true);
  const V x = t.constant(Mat(Shape{1}, {1000.0}));
  EXPECT_THROW(exp(x), NumericError);
  Tape<double> quiet;
  EXPECT_NO_THROW(exp(quiet.constant(Mat(Shape{1}, {1000.0}))));
}

TEST(ParameterBinding, DedupAndInstrumentation) {
  ParameterStore<double> store;
  const ParamId a = store.add("a", Mat(Shape{2}, 1.0));
  const ParamId b = store.add("b", Mat(Shape{2}, 2.0));
  Tape<double> t;
  const V pa = t.parameter(store, a);
  const V pa2 = t.parameter(store, a);
  EXPECT_EQ(pa.id(), pa2.id());
  t.backward(sum(add(pa, pa2)));
  EXPECT_EQ(t.bound_params(), std::vector<ParamId>{a});
  EXPECT_FALSE(t.is_bound(b));
  EXPECT_EQ(t.param_grad(a).vec(), (std::vector<double>{2, 2}));
}

// Finite-difference checks over the full operator set.

TEST(GradCheck, MatmulFamily) {
  Rng rng(10);
  const Mat a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng),
            c = random_tensor({5, 4}, rng);
  expect_gradients_match({a, b}, [](Tape<double>& t, const auto& v) {
    return weighted_sum(t, matmul(v[0], v[1]));
  });
  expect_gradients_match({a, c}, [](Tape<double>& t, const auto& v) {
    return weighted_sum(t, matmul_bt(v[0], v[1]));
  });
  expect_gradients_match({a}, [](Tape<double>& t, const auto& v) {
    return weighted_sum(t, transpose(v[0]));
  });
  expect_gradients_match({a}, [](Tape<double>& t, const auto& v) {
    return weighted_sum(t, reshape(v[0], Shape{6, 2}));
  });
}

TEST(GradCheck, Elementwise) {
  Rng rng(11);
  const Mat a = random_tensor({3, 4}, rng, -2, 2), b = random_tensor({3, 4}, rng),
            bias = random_tensor({4}, rng);
  expect_gradients_match({a, b}, [](Tape<double>& t, const auto& v) {
    return weighted_sum(t, add(v[0], v[1]));
  });
  expect_gradients_match({a, b}, [](Tape<double>& t, const auto& v) {
    return weighted_sum(t, sub(v[0], v[1]));
  });
  expect_gradients_match({a, b}, [](Tape<double>& t, const auto& v) {
    return weighted_sum(t, mul(v[0], v[1]));
  });
  expect_gradients_match({a}, [](Tape<double>& t, const auto& v) {
    return weighted_sum(t, scale(v[0], 0.3));
  });
  expect_gradients_match({a, bias}, [](Tape<double>& t, const auto& v) {
    return weighted_sum(t, add_bias(v[0], v[1]));
  });
  expect_gradients_match({a}, [](Tape<double>& t, const auto& v) {
    return weighted_sum(t, exp(v[0]));
  });
  expect_gradients_match({a}, [](Tape<double>& t, const auto& v) {
    return weighted_sum(t, sigmoid(v[0]));
  });
  expect_gradients_match({a}, [](Tape<double>& t, const auto& v) {
    return weighted_sum(t, swish(v[0]));
  });
  expect_gradients_match({a}, [](Tape<double>& t, const auto& v) {
    return weighted_sum(t, glu(v[0]));
  });
}

TEST(GradCheck, Normalizers) {
  Rng rng(12);
  const Mat a = random_tensor({3, 5}, rng, -3, 3), g = random_tensor({5}, rng),
            b = random_tensor({5}, rng);
  expect_gradients_match({a}, [](Tape<double>& t, const auto& v) {
    return weighted_sum(t, softmax(v[0]));
  });
  expect_gradients_match({a}, [](Tape<double>& t, const auto& v) {
    return weighted_sum(t, log_softmax(v[0]));
  });
  expect_gradients_match({a, g, b}, [](Tape<double>& t, const auto& v) {
    return weighted_sum(t, layer_norm(v[0], v[1], v[2]));
  });
}

TEST(GradCheck, ConvolutionAndPointwise) {
  Rng rng(13);
  const Mat x = random_tensor({7, 3}, rng), k = random_tensor({3, 5}, rng),
            w = random_tensor({3, 4}, rng);
  expect_gradients_match({x, k}, [](Tape<double>& t, const auto& v) {
    return weighted_sum(t, depthwise_conv1d(v[0], v[1]));
  });
  // Pointwise convolution is a matmul over channels.
  expect_gradients_match({x, w}, [](Tape<double>& t, const auto& v) {
    return weighted_sum(t, matmul(v[0], v[1]));
  });
}

TEST(GradCheck, StructuralOps) {
  Rng rng(14);
  const Mat a = random_tensor({4, 3}, rng), b = random_tensor({2, 3}, rng),
            c = random_tensor({4, 2}, rng), table = random_tensor({5}, rng);
  expect_gradients_match({a}, [](Tape<double>& t, const auto& v) {
    return weighted_sum(t, slice_rows(v[0], 1, 3));
  });
  expect_gradients_match({a}, [](Tape<double>& t, const auto& v) {
    return weighted_sum(t, slice_cols(v[0], 1, 3));
  });
  expect_gradients_match({a, b}, [](Tape<double>& t, const auto& v) {
    const std::vector<V> parts{v[0], v[1]};
    return weighted_sum(t, concat_rows<double>(parts));
  });
  expect_gradients_match({a, c}, [](Tape<double>& t, const auto& v) {
    const std::vector<V> parts{v[0], v[1]};
    return weighted_sum(t, concat_cols<double>(parts));
  });
  expect_gradients_match({a}, [](Tape<double>& t, const auto& v) {
    return weighted_sum(t, pad_rows(v[0], 6));
  });
  expect_gradients_match({a}, [](Tape<double>&, const auto& v) {
    return sum(v[0]);
  });
  expect_gradients_match({a}, [](Tape<double>&, const auto& v) {
    return mean(v[0]);
  });
  expect_gradients_match({table}, [](Tape<double>& t, const auto& v) {
    return weighted_sum(t, rel_position_bias(v[0], 6, 2));
  });
}

TEST(GradCheck, DropoutWithFixedMask) {
  Rng rng(15);
  const Mat a = random_tensor({4, 6}, rng);
  expect_gradients_match({a}, [](Tape<double>& t, const auto& v) {
    Rng mask_rng(123);
    return weighted_sum(t, dropout(v[0], 0.3, mask_rng, true));
  });
}

TEST(Dropout, EvalModeIsIdentityAndTrainingIsSeeded) {
  Rng rng(16);
  const Mat a = random_tensor({4, 6}, rng);
  Tape<double> t;
  Rng r1(5), r2(5);
  EXPECT_EQ(dropout(t.constant(a), 0.5, r1, false).value(), a);
  const Mat d1 = dropout(t.constant(a), 0.5, r1, true).value();
  Rng r3(5);
  const Mat d2 = dropout(t.constant(a), 0.5, r3, true).value();
  EXPECT_EQ(d1, d2);
  (void)r2;
}

TEST(RelPositionBias, ClipsDistance) {
  Tape<double> t;
  const V y = rel_position_bias(t.constant(Mat(Shape{5}, {10, 11, 12, 13, 14})),
                                4, 2);
  // out[i][j] = table[clamp(j - i, -2, 2) + 2]
  EXPECT_EQ(y.value().at(0, 0), 12);
  EXPECT_EQ(y.value().at(0, 1), 13);
  EXPECT_EQ(y.value().at(0, 3), 14);
  EXPECT_EQ(y.value().at(3, 0), 10);
  EXPECT_EQ(y.value().at(2, 1), 11);
}

TEST(Determinism, ForwardIsBitIdenticalAcrossRuns) {
  auto run = [] {
    Rng rng(17);
    const Mat a = random_tensor({8, 16}, rng), b = random_tensor({16, 8}, rng);
    Tape<double> t;
    const V h = layer_norm(matmul(t.constant(a), t.constant(b)),
                           t.constant(Mat(Shape{8}, 1.0)),
                           t.constant(Mat(Shape{8}, 0.0)));
    return softmax(h).value();
  };
  EXPECT_EQ(run(), run());
}

TEST(Precision, FloatTapeRuns) {
  Tape<float> t;
  const Var<float> x = t.variable(Tensor<float>(Shape{2}, {1.f, -2.f}));
  t.backward(sum(mul(x, x)));
  EXPECT_EQ(x.grad().vec(), (std::vector<float>{2.f, -4.f}));
}

}  // namespace
}  // namespace disco
