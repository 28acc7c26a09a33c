// Copyright 2026 The DnD Authors
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
#include <numbers>

#include "dnd/autodiff/grad_check.hpp"
#include "dnd/autodiff/layers.hpp"
#include "dnd/autodiff/ops.hpp"
#include "dnd/autodiff/parameter.hpp"
#include "dnd/autodiff/tape.hpp"
#include "dnd/util/error.hpp"
#include "dnd/util/rng.hpp"
#include "op_cases.hpp"
#include "oracle_values.hpp"

namespace dnd {
namespace {

using ad::Array;
using ad::Tape;
using testing::VarD;

Array<double> mat(std::size_t r, std::size_t c, std::initializer_list<double> v) {
  return Array<double>::matrix(r, c, v);
}

TEST(Matmul, IdentityAndProjector) {
  Tape<double> t;
  auto eye = t.constant(mat(2, 2, {1, 0, 0, 1}));
  auto b = t.constant(mat(2, 2, {1, 2, 3, 4}));
  EXPECT_EQ(ad::matmul(eye, b).value(), b.value());
  auto p = t.constant(mat(2, 2, {1, 0, 0, 0}));
  auto c = t.constant(mat(2, 2, {5, 6, 7, 8}));
  EXPECT_EQ(ad::matmul(p, c).value(), mat(2, 2, {5, 6, 0, 0}));
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  Tape<double> t;
  auto a = t.constant(Array<double>({2, 3}));
  auto b = t.constant(Array<double>({2, 3}));
  try {
    ad::matmul(a, b);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find(ad::shape_string({2, 3})), std::string::npos) << msg;
    EXPECT_EQ(e.kind(), ErrorKind::kDimension);
  }
}

TEST(Matmul, GradientOfSumIsTransposeBroadcast) {
  Tape<double> t;
  auto a = t.input(mat(2, 3, {1, 2, 3, 4, 5, 6}));
  auto b = t.input(mat(3, 2, {1, -1, 2, 0.5, -3, 4}));
  t.backward(ad::sum_all(ad::matmul(a, b)));
  const auto& g = t.grad(a.id);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t k = 0; k < 3; ++k) {
      EXPECT_DOUBLE_EQ(g(i, k), b.value()(k, 0) + b.value()(k, 1));
    }
  }
  auto r = ad::grad_check(
      [](Tape<double>&, std::span<const VarD> x) { return ad::sum_all(ad::matmul(x[0], x[1])); },
      {a.value(), b.value()});
  EXPECT_LT(r.max_relative_error, 1e-8);
}

TEST(Softmax, Examples) {
  Tape<double> t;
  auto half = ad::softmax_rows(t.constant(mat(1, 2, {0, 0}))).value();
  EXPECT_DOUBLE_EQ(half[0], 0.5);
  EXPECT_DOUBLE_EQ(half[1], 0.5);
  auto big = ad::softmax_rows(t.constant(mat(1, 2, {1000, 0}))).value();
  EXPECT_TRUE(big.all_finite());
  EXPECT_DOUBLE_EQ(big[0], 1.0);
  EXPECT_LT(big[1], 1e-300);
  auto q = ad::softmax_rows(t.constant(mat(1, 2, {std::log(1.0), std::log(3.0)}))).value();
  EXPECT_NEAR(q[0], testing::kSoftmaxLn1Ln3[0], 1e-15);
  EXPECT_NEAR(q[1], testing::kSoftmaxLn1Ln3[1], 1e-15);
}

TEST(Softmax, RowsSumToOneAndShiftInvariant) {
  Rng rng(4);
  Tape<double> t;
  auto x = testing::random_array({5, 7}, rng, 3.0);
  auto shifted = x;
  for (std::size_t c = 0; c < 7; ++c) shifted(2, c) += 11.0;
  auto a = ad::softmax_rows(t.constant(x)).value();
  auto b = ad::softmax_rows(t.constant(shifted)).value();
  for (std::size_t r = 0; r < 5; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < 7; ++c) s += a(r, c);
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  EXPECT_LT(ad::max_abs_diff(a, b), 1e-12);
}

TEST(Softmax, MaskedEntriesGetZeroAndAllMaskedRowThrows) {
  Tape<double> t;
  const std::vector<std::uint8_t> mask = {1, 0, 1};
  auto w = ad::softmax_rows(t.constant(mat(1, 3, {2, 9, 2})), mask).value();
  EXPECT_EQ(w[1], 0.0);
  EXPECT_DOUBLE_EQ(w[0], 0.5);
  const std::vector<std::uint8_t> none = {0, 0, 0};
  EXPECT_THROW(ad::softmax_rows(t.constant(mat(1, 3, {1, 2, 3})), none), DegenerateError);
}

TEST(LayerNorm, Examples) {
  Tape<double> t;
  auto ones = t.constant(Array<double>({3}, 1.0));
  auto zeros = t.constant(Array<double>({3}, 0.0));
  auto flat = ad::layer_norm(t.constant(mat(1, 3, {5, 5, 5})), ones, zeros).value();
  for (double v : flat.values()) EXPECT_EQ(v, 0.0);

  auto g2 = t.constant(Array<double>({2}, 1.0));
  auto b2 = t.constant(Array<double>({2}, 0.0));
  auto y = ad::layer_norm(t.constant(mat(1, 2, {1, 3})), g2, b2).value();
  EXPECT_NEAR(y[0], testing::kLayerNorm13[0], 1e-12);
  EXPECT_NEAR(y[1], testing::kLayerNorm13[1], 1e-12);

  auto bias = t.constant(Array<double>({3}, std::vector<double>{0.5, -1, 2}));
  auto z = ad::layer_norm(t.constant(mat(1, 3, {1, 7, -2})), zeros, bias).value();
  EXPECT_EQ(z[0], 0.5);
  EXPECT_EQ(z[1], -1.0);
  EXPECT_EQ(z[2], 2.0);
}

TEST(LayerNorm, EmptyLastAxisThrows) {
  Tape<double> t;
  auto x = t.constant(Array<double>({2, 0}));
  auto g = t.constant(Array<double>({0}));
  EXPECT_THROW(ad::layer_norm(x, g, g), DimensionError);
}

TEST(Elementwise, Examples) {
  Tape<double> t;
  const std::vector<std::uint32_t> idx = {0, 0, 2};
  auto s = ad::scatter_add_rows<double>(3, idx, t.constant(mat(3, 1, {1, 2, 3}))).value();
  EXPECT_EQ(s, mat(3, 1, {3, 0, 3}));
  EXPECT_EQ(ad::silu(t.constant(Array<double>::scalar(0))).value().item(), 0.0);
  auto m = ad::mean_axis(t.constant(mat(1, 2, {2, 4})), 1).value();
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m[0], 3.0);
}

TEST(Elementwise, IndexOutOfRangeThrows) {
  Tape<double> t;
  auto x = t.constant(mat(2, 1, {1, 2}));
  const std::vector<std::uint32_t> bad = {0, 2};
  EXPECT_THROW(ad::gather_rows(x, std::span<const std::uint32_t>(bad)), IndexError);
  EXPECT_THROW(ad::scatter_add_rows<double>(2, bad, x), IndexError);
}

TEST(Elementwise, ScatterThenGatherOnDistinctIndicesIsIdentity) {
  Rng rng(8);
  Tape<double> t;
  auto rows = testing::random_array({3, 4}, rng);
  const std::vector<std::uint32_t> idx = {4, 1, 2};
  auto scattered = ad::scatter_add_rows<double>(5, idx, t.constant(rows));
  auto back = ad::gather_rows(scattered, std::span<const std::uint32_t>(idx)).value();
  EXPECT_EQ(back, rows);
}

TEST(Losses, Examples) {
  Tape<double> t;
  auto x = t.constant(mat(2, 2, {1, 2, 3, 4}));
  EXPECT_EQ(ad::mse(x, x).value().item(), 0.0);
  auto z = t.constant(Array<double>({1}, 0.0));
  auto one = t.constant(Array<double>({1}, 1.0));
  EXPECT_NEAR(ad::bce_with_logits(z, one).value().item(), testing::kBceLogit0Label1, 1e-15);
  auto p = t.constant(Array<double>({2}, std::vector<double>{1, -1}));
  auto zero2 = t.constant(Array<double>({2}, 0.0));
  EXPECT_EQ(ad::l1(p, zero2).value().item(), 1.0);
}

TEST(Losses, StableForLargeLogits) {
  Tape<double> t;
  auto logits = t.constant(Array<double>({2}, std::vector<double>{800, -800}));
  auto targets = t.constant(Array<double>({2}, std::vector<double>{0, 1}));
  const double v = ad::bce_with_logits(logits, targets).value().item();
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(v, 800.0, 1e-9);
}

TEST(Losses, NoValidEntriesThrows) {
  Tape<double> t;
  auto a = t.constant(Array<double>({2}, 0.0));
  const std::vector<std::uint8_t> mask = {0, 0};
  EXPECT_THROW(ad::bce_with_logits(a, a, mask), DegenerateError);
}

TEST(GradCheck, SquareAtThree) {
  auto r = ad::grad_check(
      [](Tape<double>&, std::span<const VarD> x) { return ad::sum_all(ad::square(x[0])); },
      {Array<double>({1}, 3.0)});
  EXPECT_LT(r.max_relative_error, 1e-9);
  EXPECT_EQ(r.coordinates_checked, 1u);
}

TEST(GradCheck, NonScalarOutputIsContractError) {
  EXPECT_THROW(ad::grad_check([](Tape<double>&, std::span<const VarD> x) { return x[0]; },
                              {Array<double>({2}, 1.0)}),
               ContractError);
}

TEST(GradCheck, TwoLayerNetworkWithSoftmaxAndLayerNorm) {
  Rng rng(21);
  ad::ParameterStore<double> store("net");
  ad::Linear<double> l1(store, "l1", 4, 6, 0, rng);
  ad::LayerNormParams<double> ln(store, "ln", 6, 0);
  ad::Linear<double> l2(store, "l2", 6, 3, 1, rng);
  for (auto* p : store.all()) {
    for (auto& v : p->value.storage()) v += 0.1 * rng.normal();
  }
  auto x = testing::random_array({5, 4}, rng);
  auto f = [&](Tape<double>& t) {
    auto h = ad::silu(ln(t, l1(t, t.constant(x))));
    return testing::probe(ad::softmax_rows(l2(t, h)));
  };
  auto params = store.all();
  auto r = ad::grad_check_params(f, params);
  EXPECT_LT(r.max_relative_error, 1e-4) << r.worst_location;
  EXPECT_EQ(r.coordinates_checked, store.scalar_count());
}

// Rule that is wrong by a factor of 2; the harness must notice.
VarD corrupted_square(VarD a) {
  Array<double> out = a.value();
  for (auto& v : out.storage()) v *= v;
  const std::uint32_t ia = a.id;
  return a.tape->push(std::move(out), a.requires_grad(), [ia](Tape<double>& t, std::uint32_t self) {
    const Array<double>& g_out = t.grad(self);
    const Array<double>& x = t.value(ia);
    Array<double>& g = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += 4.0 * x[i] * g_out[i];
  });
}

TEST(GradCheck, DetectsCorruptedBackwardRule) {
  Rng rng(3);
  auto r = ad::grad_check(
      [](Tape<double>&, std::span<const VarD> x) { return testing::probe(corrupted_square(x[0])); },
      {testing::random_array({3, 3}, rng)});
  EXPECT_GT(r.max_relative_error, 1e-2);
  EXPECT_FALSE(r.worst_location.empty());
}

class OpGradient : public ::testing::TestWithParam<std::size_t> {};

TEST_P(OpGradient, MatchesCentralDifferences) {
  const auto cases = testing::op_cases();
  const auto& c = cases[GetParam()];
  Rng rng(1000 + GetParam());
  for (int trial = 0; trial < 5; ++trial) {
    auto r = ad::grad_check(c.fn, c.inputs(rng));
    EXPECT_LT(r.max_relative_error, 1e-4) << c.name << " at " << r.worst_location;
  }
}

INSTANTIATE_TEST_SUITE_P(AllOps, OpGradient,
                         ::testing::Range<std::size_t>(0, testing::op_cases().size()),
                         [](const auto& info) { return testing::op_cases()[info.param].name; });

TEST(Parameters, FrozenParametersReceiveNoGradient) {
  Rng rng(5);
  ad::ParameterStore<double> frozen("teacher");
  ad::ParameterStore<double> live("student");
  ad::Linear<double> a(frozen, "a", 3, 3, 0, rng);
  ad::Linear<double> b(live, "b", 3, 2, 0, rng);
  frozen.set_frozen(true);
  frozen.zero_grad();
  live.zero_grad();
  Tape<double> t;
  auto x = t.constant(testing::random_array({4, 3}, rng));
  t.backward(ad::sum_all(ad::square(b(t, a(t, x)))));
  t.accumulate_param_grads();
  for (const auto* p : frozen.all()) EXPECT_FALSE(p->has_nonzero_grad()) << p->name;
  bool any = false;
  for (const auto* p : live.all()) any = any || p->has_nonzero_grad();
  EXPECT_TRUE(any);
}

TEST(Parameters, NoGradTapeRecordsNothingDifferentiable) {
  Rng rng(6);
  ad::ParameterStore<double> store("m");
  ad::Linear<double> a(store, "a", 2, 2, 0, rng);
  Tape<double> t(false);
  auto y = a(t, t.constant(testing::random_array({1, 2}, rng)));
  EXPECT_FALSE(y.requires_grad());
}

TEST(Parameters, StoreNamesArePrefixed) {
  Rng rng(7);
  ad::ParameterStore<double> store("encoder2d");
  ad::Linear<double> a(store, "proj", 2, 2, 3, rng);
  ASSERT_NE(store.find("encoder2d/proj/w"), nullptr);
  EXPECT_EQ(store.find("encoder2d/proj/w")->layer_index, 3);
}

}  // namespace
}  // namespace dnd
