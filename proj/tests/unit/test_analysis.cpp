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


#include "dnd/analysis/analysis.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "dnd/encoder3d/encoder3d.hpp"
#include "dnd/util/error.hpp"
#include "dnd/util/rng.hpp"
#include "oracle_values.hpp"
#include "test_util.hpp"

namespace dnd::analysis {
namespace {

std::vector<mol::Vec3> as_coords(std::span<const double> flat) {
  std::vector<mol::Vec3> out;
  for (std::size_t i = 0; i + 2 < flat.size(); i += 3) out.push_back({flat[i], flat[i + 1], flat[i + 2]});
  return out;
}

TEST(Pearson, Examples) {
  const std::vector<double> a = {1, 2, 3, 4}, b = {1, 3, 2, 4};
  EXPECT_NEAR(pearson(a, b), testing::kPearson1234_1324, 1e-15);
  const std::vector<double> neg = {-2, -4, -6, -8};
  EXPECT_DOUBLE_EQ(pearson(a, neg), -1.0);
  const std::vector<double> flat = {5, 5, 5, 5};
  EXPECT_THROW(pearson(a, flat), DegenerateError);
  EXPECT_THROW(pearson(std::vector<double>{1}, std::vector<double>{2}), DimensionError);
}

TEST(Pearson, AffineMapScalesBySignOfSlope) {
  Rng rng(4);
  std::vector<double> x(50), y(50);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = rng.normal();
    y[i] = x[i] + 0.5 * rng.normal();
  }
  const double r = pearson(x, y);
  for (double a : {3.0, 0.01, -2.0}) {
    std::vector<double> z(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) z[i] = a * y[i] + 7.0;
    EXPECT_NEAR(pearson(x, z), std::copysign(1.0, a) * r, 1e-12);
  }
}

enc2d::Encoder2DConfig small_student() {
  enc2d::Encoder2DConfig c;
  c.num_layers = 2;
  c.num_heads = 3;
  c.hidden_dim = 12;
  c.identifier_dim = 24;
  return c;
}

TEST(AttentionReport, InjectedDistanceLogitsCorrelatePerfectly) {
  enc2d::Encoder2D<train::Real> student(small_student(), 1);
  const auto data = testing::small_dataset(6, 3, 4, 8);
  std::vector<double> dist;
  std::size_t n = 0;
  student.set_logit_override([&](int, int, ad::Array<double>& logits) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) logits(i, j) = -dist[i * n + j];
  });
  const auto report = attention_report(student, data, [&](const mol::MoleculeRecord& rec) {
    n = rec.graph.num_atoms();
    const auto d = enc3d::pairwise_distances(rec.conformer->coords);
    dist = d;
  });
  ASSERT_EQ(report.correlations.size(), 6u);
  EXPECT_EQ(report.molecules_used, 6u);
  for (const auto& h : report.correlations) {
    EXPECT_NEAR(h.abs_pearson, 1.0, 1e-9) << h.layer << "/" << h.head;
    EXPECT_EQ(h.molecules, 6u);
  }
  EXPECT_FALSE(student.config().capture_attention);
}

TEST(AttentionReport, UniformAttentionGivesMeanDistance) {
  enc2d::Encoder2D<train::Real> student(small_student(), 2);
  student.set_logit_override([](int, int, ad::Array<double>& logits) { logits.fill(0.0); });
  const auto data = testing::small_dataset(1, 9, 5, 5);
  const auto& rec = data.records[0];
  const auto d = enc3d::pairwise_distances(rec.conformer->coords);
  const std::size_t n = rec.graph.num_atoms();
  double total = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) total += d[i * n + j];
  const double mean = total / static_cast<double>(n * (n - 1));
  const auto report = attention_report(student, data);
  ASSERT_EQ(report.distances.size(), 6u);
  for (const auto& h : report.distances) EXPECT_NEAR(h.mean_weighted_distance, mean, 1e-5);
  // Constant logits have no defined correlation.
  EXPECT_EQ(report.skipped_constant, 6u);
}

TEST(AttentionReport, WeightedDistanceWithinPairRange) {
  enc2d::Encoder2D<train::Real> student(small_student(), 3);
  const auto data = testing::small_dataset(1, 10, 6, 6);
  const auto d = enc3d::pairwise_distances(data.records[0].conformer->coords);
  double lo = 1e300, hi = 0;
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j)
      if (i != j) {
        lo = std::min(lo, d[i * 6 + j]);
        hi = std::max(hi, d[i * 6 + j]);
      }
  for (const auto& h : attention_weighted_distance(student, data)) {
    EXPECT_GE(h.mean_weighted_distance, lo - 1e-9);
    EXPECT_LE(h.mean_weighted_distance, hi + 1e-9);
  }
}

TEST(AttentionReport, SmallMoleculesSkippedAndAllSmallRejected) {
  enc2d::Encoder2D<train::Real> student(small_student(), 4);
  mol::Dataset tiny;
  mol::MoleculeRecord pair;
  pair.id = "pair";
  pair.graph.atoms.resize(2);
  pair.graph.atoms[0].degree = pair.graph.atoms[1].degree = 1;
  pair.graph.bonds.push_back({0, 1, {}});
  pair.conformer = mol::Conformer{{{0, 0, 0}, {1.5, 0, 0}}};
  tiny.records = {pair, pair};
  EXPECT_THROW(attention_report(student, tiny), DegenerateError);
  auto mixed = testing::small_dataset(2, 12, 5, 6);
  mixed.records.push_back(tiny.records[0]);
  const auto report = attention_report(student, mixed);
  EXPECT_EQ(report.skipped_small, 1u);
  EXPECT_EQ(report.molecules_used, 2u);
  // Layer-major ordering.
  EXPECT_EQ(report.correlations[4].layer, 1);
  EXPECT_EQ(report.correlations[4].head, 1);
}

TEST(Oracle, SingleComponentIsScaledResidual) {
  GaussianMixtureOracle o;
  o.components = {{{0, 0, 0}, {1, 0, 0}}};
  o.weights = {1.0};
  o.sigma = 0.2;
  const std::vector<mol::Vec3> x = {{0.1, -0.2, 0.0}, {1.0, 0.3, 0.05}};
  const auto out = oracle_denoiser(o, x);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t a = 0; a < 3; ++a)
      EXPECT_NEAR(out(i, a), (x[i][a] - o.components[0][i][a]) / 0.2, 1e-14);
}

TEST(Oracle, SymmetricPairAveragesComponents) {
  GaussianMixtureOracle o;
  o.components = {{{-1, 0, 0}}, {{1, 0, 0}}};
  o.weights = {0.5, 0.5};
  o.sigma = 0.5;
  const auto out = oracle_denoiser(o, {{0, 0.3, 0}});
  EXPECT_NEAR(out(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(out(0, 1), 0.6, 1e-15);
}

TEST(Oracle, MatchesReferenceMixture) {
  GaussianMixtureOracle o;
  o.components = {as_coords(testing::kMixtureComponentA), as_coords(testing::kMixtureComponentB)};
  o.weights = {0.3, 0.7};
  o.sigma = 0.1;
  const auto out = oracle_denoiser(o, as_coords(testing::kMixturePoint));
  for (std::size_t k = 0; k < testing::kMixtureNoise.size(); ++k) {
    EXPECT_NEAR(out[k], testing::kMixtureNoise[k], 1e-12) << k;
  }
}

TEST(Oracle, ValidatesContract) {
  GaussianMixtureOracle o;
  o.components = {{{0, 0, 0}}, {{1, 0, 0}}};
  o.weights = {0.5, 0.6};
  EXPECT_THROW(o.validate(), ContractError);
  o.weights = {1.0};
  EXPECT_THROW(o.validate(), ContractError);
  o.weights = {0.5, 0.5};
  o.components[1].push_back({0, 0, 0});
  EXPECT_THROW(o.validate(), ContractError);
}

// The posterior mean minimises expected squared error, so no single-component
// guess can beat it on samples drawn from the mixture.
TEST(Oracle, BayesOptimalOnMixtureSamples) {
  GaussianMixtureOracle o;
  o.components = {as_coords(testing::kMixtureComponentA), as_coords(testing::kMixtureComponentB)};
  o.weights = {0.3, 0.7};
  o.sigma = 0.1;
  Rng rng(17);
  double oracle_err = 0, naive_err = 0;
  const int draws = 20000;
  for (int s = 0; s < draws; ++s) {
    const std::size_t k = rng.uniform() < 0.3 ? 0 : 1;
    std::vector<mol::Vec3> x = o.components[k];
    std::vector<double> eps;
    for (auto& p : x)
      for (double& c : p) {
        eps.push_back(rng.normal());
        c += o.sigma * eps.back();
      }
    const auto pred = oracle_denoiser(o, x);
    for (std::size_t q = 0; q < eps.size(); ++q) {
      const double naive = (x[q / 3][q % 3] - o.components[1][q / 3][q % 3]) / o.sigma;
      oracle_err += (pred[q] - eps[q]) * (pred[q] - eps[q]);
      naive_err += (naive - eps[q]) * (naive - eps[q]);
    }
  }
  oracle_err /= draws * 6.0;
  naive_err /= draws * 6.0;
  EXPECT_LT(oracle_err, naive_err);
  EXPECT_LT(oracle_err, 1.0);
}

TEST(Oracle, AlignedOracleIgnoresRigidMotion) {
  const auto rec = testing::small_dataset(1, 13, 6, 6).records[0];
  const auto& ref = rec.conformer->coords;
  Rng rng(5);
  const auto moved = testing::rigid_motion(ref, testing::random_rotation(rng), {1.0, -2.0, 0.5});
  const auto out = aligned_oracle_denoiser(ref, moved, 0.1);
  for (double v : out.values()) EXPECT_NEAR(v, 0.0, 1e-9);
  std::vector<mol::Vec3> noisy = moved;
  for (auto& p : noisy)
    for (double& c : p) c += 0.1 * rng.normal();
  const auto a = aligned_oracle_denoiser(ref, noisy, 0.1);
  const auto b = aligned_oracle_denoiser(
      ref, testing::rigid_motion(noisy, testing::rotation_z(0.7), {0, 0, 3}), 0.1);
  const auto rotated = testing::rotate_rows(a, testing::rotation_z(0.7));
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(b[k], rotated[k], 1e-9);
}

TEST(Kabsch, RecoversRotationAndRejectsMismatch) {
  const auto ref = testing::small_dataset(1, 14, 5, 5).records[0].conformer->coords;
  Rng rng(6);
  const auto moved = testing::rigid_motion(ref, testing::random_rotation(rng), {3, 1, -1});
  const auto aligned = kabsch_align(ref, moved);
  for (std::size_t i = 0; i < ref.size(); ++i)
    for (int a = 0; a < 3; ++a) EXPECT_NEAR(aligned[i][a], moved[i][a], 1e-9);
  EXPECT_THROW(kabsch_align(ref, {ref[0]}), DimensionError);
}

TEST(ExportCurves, LongFormatWithLogAndGap) {
  std::vector<std::pair<std::string, train::MetricsLog>> logs;
  for (const char* v : {"graph", "node"}) {
    train::MetricsLog log;
    for (int e = 1; e <= 3; ++e) log.append({"distill", e, 1.0 / e, 2.0 / e, 1e-3, 0});
    logs.emplace_back(v, log);
  }
  std::stringstream out;
  export_curves(logs, out);
  std::string line;
  std::getline(out, line);
  EXPECT_EQ(line, "variant,epoch,split,loss,log10_loss,gap");
  int rows = 0;
  while (std::getline(out, line)) {
    ++rows;
    if (rows == 3) EXPECT_EQ(line.substr(0, 14), "graph,2,train,");
  }
  EXPECT_EQ(rows, 12);
  std::stringstream again;
  export_curves({{"x", logs[0].second}}, again);
  std::getline(again, line);
  std::getline(again, line);
  EXPECT_EQ(line, "x,1,train,1,0,1");
  logs.push_back(logs[0]);
  std::stringstream dup;
  EXPECT_THROW(export_curves(logs, dup), ContractError);
}

TEST(Histogram, ProducesSvgWithEscapedTitle) {
  const std::vector<double> v = {0.1, 0.2, 0.9};
  const auto svg = histogram_svg(v, 4, 0, 1, "a<b");
  EXPECT_NE(svg.find("<svg"), std::string::npos);
  EXPECT_NE(svg.find("a&lt;b"), std::string::npos);
  EXPECT_THROW(histogram_svg(v, 0, 0, 1, ""), ContractError);
}

}  // namespace
}  // namespace dnd::analysis
