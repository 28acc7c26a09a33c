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

#include "dnd/autodiff/grad_check.hpp"
#include "dnd/encoder2d/encoder2d.hpp"
#include "dnd/util/error.hpp"
#include "op_cases.hpp"
#include "symmetry.hpp"
#include "test_util.hpp"

namespace dnd::enc2d {
namespace {

Encoder2DConfig tiny(bool vn = false) {
  Encoder2DConfig c;
  c.num_layers = 2;
  c.num_heads = 2;
  c.hidden_dim = 8;
  c.identifier_dim = 12;
  c.use_virtual_node = vn;
  return c;
}

mol::MoleculeGraph dimer() {
  mol::MoleculeGraph g;
  g.atoms.resize(2);
  g.atoms[0].degree = g.atoms[1].degree = 1;
  g.bonds.push_back({0, 1, {}});
  return g;
}

TEST(Tokenize, Counts) {
  auto seq = tokenize(dimer(), 1, tiny());
  ASSERT_EQ(seq.size(), 3u);
  EXPECT_EQ(seq.kinds[0], TokenKind::kNode);
  EXPECT_EQ(seq.kinds[1], TokenKind::kNode);
  EXPECT_EQ(seq.kinds[2], TokenKind::kEdge);
  auto vn = tokenize(dimer(), 1, tiny(true));
  ASSERT_EQ(vn.size(), 4u);
  EXPECT_EQ(vn.kinds[3], TokenKind::kVirtual);
  EXPECT_EQ(vn.virtual_index(), 3u);
}

TEST(Tokenize, DeterministicGivenSeed) {
  const auto g = testing::small_dataset(1, 2).records[0].graph;
  EXPECT_EQ(tokenize(g, 5, tiny()).identifier_block, tokenize(g, 5, tiny()).identifier_block);
}

TEST(Identifiers, Orthonormal) {
  for (std::size_t n : {1, 5, 12}) {
    const auto p = make_identifiers(n, 12, n);
    double worst = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double dot = 0;
        for (std::size_t c = 0; c < 12; ++c) dot += p(i, c) * p(j, c);
        worst = std::max(worst, std::abs(dot - (i == j ? 1.0 : 0.0)));
      }
    }
    EXPECT_LT(worst, 1e-5) << n;
  }
}

TEST(Identifiers, CapacityError) {
  EXPECT_THROW(make_identifiers(13, 12, 0), DimensionError);
}

TEST(Encode2D, PermutationEquivariance) {
  Encoder2D<float> enc(tiny(), 3);
  EXPECT_LT(testing::permutation_deviation(enc, testing::small_dataset(8, 4), 5, 1), 1e-5);
  Encoder2D<float> vn(tiny(true), 3);
  EXPECT_LT(testing::permutation_deviation(vn, testing::small_dataset(8, 4), 5, 1), 1e-5);
}

TEST(Encode2D, SingleNodeShape) {
  Encoder2D<double> enc(tiny(), 4);
  mol::MoleculeGraph g;
  g.atoms.resize(1);
  ad::Tape<double> t(false);
  auto out = enc.encode(t, tokenize(g, 0, tiny()));
  EXPECT_EQ(out.nodes.shape(), (ad::Shape{1, 8}));
}

TEST(Encode2D, TraceShapeAndRows) {
  auto cfg = tiny(true);
  cfg.capture_attention = true;
  Encoder2D<double> enc(cfg, 5);
  const auto g = testing::small_dataset(1, 6).records[0].graph;
  auto seq = tokenize(g, 1, cfg);
  ad::Tape<double> t(false);
  auto out = enc.encode(t, seq);
  ASSERT_TRUE(out.trace.has_value());
  const auto& tr = *out.trace;
  EXPECT_EQ(tr.weights.size(), 4u);
  EXPECT_EQ(tr.logits.size(), 4u);
  for (const auto& w : tr.weights) {
    ASSERT_EQ(w.shape(), (ad::Shape{seq.size(), seq.size()}));
    for (std::size_t r = 0; r < seq.size(); ++r) {
      double s = 0;
      for (std::size_t c = 0; c < seq.size(); ++c) s += w(r, c);
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
  }
  for (const auto& l : tr.logits) EXPECT_TRUE(l.all_finite());
  EXPECT_EQ(AttentionTrace::node_block(tr.logit(1, 1), g.num_atoms()).shape(),
            (ad::Shape{g.num_atoms(), g.num_atoms()}));
}

TEST(Encode2D, LogitOverrideIsApplied) {
  auto cfg = tiny();
  cfg.capture_attention = true;
  Encoder2D<double> enc(cfg, 5);
  enc.set_logit_override([](int, int, ad::Array<double>& logits) { logits.fill(0.0); });
  const auto g = testing::small_dataset(1, 6).records[0].graph;
  auto seq = tokenize(g, 1, cfg);
  ad::Tape<double> t(false);
  auto out = enc.encode(t, seq);
  const double uniform = 1.0 / static_cast<double>(seq.size());
  for (const auto& w : out.trace->weights) {
    for (double v : w.values()) EXPECT_NEAR(v, uniform, 1e-12);
  }
}

TEST(Pooling, Examples) {
  ad::Tape<double> t;
  auto rows = t.constant(ad::Array<double>::matrix(2, 2, {1, 2, 3, 4}));
  auto m = pool_mean(rows).value();
  EXPECT_DOUBLE_EQ(m[0], 2.0);
  EXPECT_DOUBLE_EQ(m[1], 3.0);
  auto one = t.constant(ad::Array<double>::matrix(1, 2, {5, 6}));
  EXPECT_EQ(pool_mean(one).value().storage(), (std::vector<double>{5, 6}));
}

TEST(Pooling, MeanIsPermutationInvariantAndVirtualNeedsToken) {
  Encoder2D<double> enc(tiny(), 7);
  const auto rec = testing::small_dataset(1, 8).records[0];
  Rng rng(1);
  const auto ids = make_identifiers(rec.graph.num_atoms(), 12, 2);
  const auto perm = testing::random_permutation(rec.graph.num_atoms(), rng);
  const auto moved = testing::permute_record(rec, perm);
  ad::Tape<double> t(false);
  auto a = pool_mean(t.constant(testing::encode_nodes(enc, rec.graph, ids))).value();
  auto b = pool_mean(t.constant(
                         testing::encode_nodes(enc, moved.graph, testing::permute_identifiers(ids, perm))))
               .value();
  EXPECT_LT(ad::max_abs_diff(a, b), 1e-12);

  auto seq = tokenize(rec.graph, ids, false);
  auto enc_out = enc.encode(t, seq);
  EXPECT_THROW(pool_virtual(enc_out, seq), ContractError);
}

TEST(Encode2D, GradientMatchesFiniteDifferences) {
  Encoder2D<double> enc(tiny(true), 9);
  const auto g = testing::small_dataset(1, 10, 4, 5).records[0].graph;
  const auto seq = tokenize(g, 3, tiny(true));
  Rng rng(11);
  auto params = enc.params().all();
  auto r = ad::grad_check_params(
      [&](ad::Tape<double>& t) {
        auto out = enc.encode(t, seq);
        return ad::add(testing::probe(out.nodes), testing::probe(pool_virtual(out, seq)));
      },
      params, 1e-5, 200, &rng);
  EXPECT_LT(r.max_relative_error, 1e-4) << r.worst_location;
}

}  // namespace
}  // namespace dnd::enc2d
