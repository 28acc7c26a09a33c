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
#include <numbers>

#include "dnd/autodiff/grad_check.hpp"
#include "dnd/encoder3d/encoder3d.hpp"
#include "dnd/objectives/objectives.hpp"
#include "dnd/util/error.hpp"
#include "symmetry.hpp"
#include "test_util.hpp"

namespace dnd::enc3d {
namespace {

Encoder3DConfig tiny() {
  Encoder3DConfig c;
  c.num_layers = 2;
  c.hidden_dim = 16;
  c.num_rbf = 8;
  return c;
}

TEST(PairwiseDistances, Examples) {
  auto d = pairwise_distances({{0, 0, 0}, {3, 4, 0}});
  ASSERT_EQ(d.size(), 4u);
  EXPECT_DOUBLE_EQ(d[0], 0.0);
  EXPECT_DOUBLE_EQ(d[1], 5.0);
  EXPECT_DOUBLE_EQ(d[2], 5.0);
  EXPECT_DOUBLE_EQ(d[3], 0.0);
}

TEST(PairwiseDistances, RotationInvariant) {
  Rng rng(1);
  const auto rec = testing::small_dataset(1, 3).records[0];
  const auto& x = rec.conformer->coords;
  const auto a = pairwise_distances(x);
  const auto b = pairwise_distances(testing::rigid_motion(x, testing::random_rotation(rng), {1, 2, 3}));
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(SmoothCutoff, EndpointsAndMonotone) {
  EXPECT_DOUBLE_EQ(smooth_cutoff(0.0, 6.0), 1.0);
  EXPECT_NEAR(smooth_cutoff(6.0, 6.0), 0.0, 1e-15);
  EXPECT_EQ(smooth_cutoff(7.0, 6.0), 0.0);
  double prev = 1.0;
  for (double d = 0.1; d < 6.0; d += 0.1) {
    const double v = smooth_cutoff(d, 6.0);
    EXPECT_LE(v, prev);
    prev = v;
  }
}

TEST(Encode3D, SingleAtomIgnoresPosition) {
  Encoder3D<double> enc(tiny(), 1);
  mol::MoleculeGraph g;
  g.atoms.resize(1);
  const auto a = enc.infer(g, {{0, 0, 0}});
  const auto b = enc.infer(g, {{4, -2, 9}});
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.shape(), (ad::Shape{1, 16}));
}

TEST(Encode3D, RigidMotionInvariance) {
  Encoder3D<double> enc(tiny(), 2);
  NoiseHead<double> head(tiny(), 3);
  auto [inv, eqv] = testing::rigid_motion_deviation(enc, head, testing::small_dataset(10, 4), 5, 9);
  EXPECT_LT(inv, 1e-8);
  EXPECT_LT(eqv, 1e-8);

  Encoder3D<float> encf(tiny(), 2);
  NoiseHead<float> headf(tiny(), 3);
  auto [invf, eqvf] = testing::rigid_motion_deviation(encf, headf, testing::small_dataset(10, 4), 5, 9);
  EXPECT_LT(invf, 1e-4);
  EXPECT_LT(eqvf, 1e-4);
}

TEST(Encode3D, PermutationPermutesRows) {
  Encoder3D<double> enc(tiny(), 5);
  NoiseHead<double> head(tiny(), 6);
  Rng rng(7);
  const auto data = testing::small_dataset(5, 8);
  for (const auto& rec : data.records) {
    const auto z = enc.infer(rec.graph, rec.conformer->coords);
    const auto e = testing::head_output(enc, head, rec.graph, rec.conformer->coords);
    for (int p = 0; p < 10; ++p) {
      const auto perm = testing::random_permutation(rec.graph.num_atoms(), rng);
      const auto moved = testing::permute_record(rec, perm);
      const auto zp = enc.infer(moved.graph, moved.conformer->coords);
      const auto ep = testing::head_output(enc, head, moved.graph, moved.conformer->coords);
      for (std::size_t i = 0; i < perm.size(); ++i) {
        for (std::size_t c = 0; c < z.cols(); ++c) EXPECT_NEAR(zp(i, c), z(perm[i], c), 1e-10);
        for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(ep(i, c), e(perm[i], c), 1e-10);
      }
    }
  }
}

TEST(Encode3D, UnknownElementRejected) {
  Encoder3D<double> enc(tiny(), 1);
  mol::MoleculeGraph g;
  g.atoms.resize(1);
  g.atoms[0].atomic_number = 500;
  EXPECT_THROW(enc.infer(g, {{0, 0, 0}}), IndexError);
}

TEST(Encode3D, ConfigValidation) {
  auto c = tiny();
  c.num_layers = 0;
  c.cutoff = -1;
  try {
    c.validate();
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("num_layers"), std::string::npos);
    EXPECT_NE(msg.find("cutoff"), std::string::npos);
  }
}

TEST(NoiseHead, SingleAtomPredictsZeroAndFlags) {
  Encoder3D<double> enc(tiny(), 1);
  NoiseHead<double> head(tiny(), 2);
  mol::MoleculeGraph g;
  g.atoms.resize(1);
  ad::Tape<double> tape(false);
  auto geom = enc.geometry({{1, 1, 1}});
  auto pred = head.predict(tape, enc.encode(tape, g, geom), geom);
  EXPECT_TRUE(pred.no_neighbors);
  for (double v : pred.epsilon.value().values()) EXPECT_EQ(v, 0.0);
}

TEST(NoiseHead, QuarterTurnAboutZ) {
  Encoder3D<float> enc(tiny(), 4);
  NoiseHead<float> head(tiny(), 5);
  const auto rec = testing::small_dataset(1, 6).records[0];
  const auto q = testing::rotation_z(std::numbers::pi / 2);
  const auto e = testing::head_output(enc, head, rec.graph, rec.conformer->coords);
  const auto er = testing::head_output(enc, head, rec.graph,
                                       testing::rigid_motion(rec.conformer->coords, q, {0, 0, 0}));
  EXPECT_LT(ad::max_abs_diff(testing::rotate_rows(e, q), er), 1e-4);
}

TEST(NoiseHead, DumbbellIsAntisymmetric) {
  Encoder3D<double> enc(tiny(), 8);
  NoiseHead<double> head(tiny(), 9);
  mol::MoleculeGraph g;
  g.atoms.resize(2);
  g.atoms[0].degree = g.atoms[1].degree = 1;
  g.bonds.push_back({0, 1, {}});
  const auto e = testing::head_output(enc, head, g, {{-0.75, 0.1, 0}, {0.75, -0.1, 0}});
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(e(0, c), -e(1, c), 1e-12);
  EXPECT_GT(std::abs(e(0, 0)), 0.0);
}

TEST(Encode3D, DenoiseLossGradientMatchesFiniteDifferences) {
  Encoder3D<double> enc(tiny(), 10);
  NoiseHead<double> head(tiny(), 11);
  const auto rec = testing::small_dataset(1, 12, 5, 6).records[0];
  const auto sample = obj::sample_noise(*rec.conformer, 0.1, 3);
  std::vector<ad::Parameter<double>*> params = enc.params().all();
  for (auto* p : head.params().all()) params.push_back(p);
  Rng rng(13);
  auto r = ad::grad_check_params(
      [&](ad::Tape<double>& t) { return obj::denoise_loss(t, enc, head, rec.graph, sample); }, params,
      1e-5, 200, &rng);
  EXPECT_LT(r.max_relative_error, 1e-4) << r.worst_location;
  EXPECT_EQ(r.coordinates_checked, 200u);
}

}  // namespace
}  // namespace dnd::enc3d
