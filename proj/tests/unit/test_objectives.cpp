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
#include "dnd/encoder3d/encoder3d.hpp"
#include "dnd/objectives/objectives.hpp"
#include "dnd/util/error.hpp"
#include "op_cases.hpp"
#include "oracle_values.hpp"
#include "symmetry.hpp"
#include "test_util.hpp"

namespace dnd::obj {
namespace {

using ad::Array;
using ad::Tape;

enc3d::Encoder3DConfig teacher_cfg() {
  enc3d::Encoder3DConfig c;
  c.num_layers = 2;
  c.hidden_dim = 12;
  c.num_rbf = 8;
  return c;
}

enc2d::Encoder2DConfig student_cfg() {
  enc2d::Encoder2DConfig c;
  c.num_layers = 1;
  c.num_heads = 2;
  c.hidden_dim = 8;
  c.identifier_dim = 12;
  return c;
}

TEST(SampleNoise, DeterministicAndScaled) {
  mol::Conformer c{{{0, 0, 0}, {1.5, 0, 0}}};
  auto a = sample_noise(c, 0.1, 4);
  auto b = sample_noise(c, 0.1, 4);
  EXPECT_EQ(a.perturbed, b.perturbed);
  EXPECT_EQ(a.epsilon, b.epsilon);
  for (std::size_t i = 0; i < 2; ++i) {
    for (int k = 0; k < 3; ++k) {
      EXPECT_DOUBLE_EQ(a.perturbed.coords[i][k], c.coords[i][k] + 0.1 * a.epsilon(i, k));
    }
  }
  auto tiny = sample_noise(c, 1e-300, 4);
  for (std::size_t i = 0; i < 2; ++i) {
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(tiny.perturbed.coords[i][k], c.coords[i][k], 1e-280);
  }
  EXPECT_THROW(sample_noise(c, 0.0, 1), ConfigError);
  EXPECT_THROW(sample_noise(c, -1.0, 1), ConfigError);
}

TEST(SampleNoise, EmpiricalStdMatchesSigma) {
  mol::Conformer c;
  c.coords.assign(1000, {0.0, 0.0, 0.0});
  double sum = 0, sq = 0;
  std::size_t n = 0;
  for (std::uint64_t s = 0; s < 34; ++s) {
    auto sample = sample_noise(c, 0.1, s);
    for (const auto& p : sample.perturbed.coords) {
      for (double v : p) {
        sum += v;
        sq += v * v;
        ++n;
      }
    }
  }
  ASSERT_GE(n, 100000u);
  const double mean = sum / double(n);
  const double sd = std::sqrt(sq / double(n) - mean * mean);
  EXPECT_NEAR(sd, 0.1, 0.002);
}

TEST(DenoiseLoss, ZeroPredictorScoresOne) {
  enc3d::Encoder3D<double> teacher(teacher_cfg(), 1);
  enc3d::NoiseHead<double> head(teacher_cfg(), 2);
  for (auto* p : head.params().all()) p->value.fill(0.0);
  const auto rec = testing::small_dataset(1, 3, 6, 6).records[0];
  double total = 0;
  const int draws = 10000;
  for (int s = 0; s < draws; ++s) {
    Tape<double> t(false);
    total += denoise_loss(t, teacher, head, rec.graph, sample_noise(*rec.conformer, 0.1, s))
                 .value()
                 .item();
  }
  EXPECT_NEAR(total / draws, 1.0, 0.05);
}

TEST(DenoiseLoss, TranslationInvariantPerSample) {
  enc3d::Encoder3D<double> teacher(teacher_cfg(), 1);
  enc3d::NoiseHead<double> head(teacher_cfg(), 2);
  const auto rec = testing::small_dataset(1, 5).records[0];
  mol::Conformer moved{testing::rigid_motion(rec.conformer->coords, testing::rotation_z(0), {3, -1, 7})};
  Tape<double> t(false);
  const double a = denoise_loss(t, teacher, head, rec.graph, sample_noise(*rec.conformer, 0.1, 9)).value().item();
  const double b = denoise_loss(t, teacher, head, rec.graph, sample_noise(moved, 0.1, 9)).value().item();
  EXPECT_NEAR(a, b, 1e-10);
}

TEST(DenoiseLoss, AtomCountMismatchThrows) {
  enc3d::Encoder3D<double> teacher(teacher_cfg(), 1);
  enc3d::NoiseHead<double> head(teacher_cfg(), 2);
  const auto rec = testing::small_dataset(1, 5).records[0];
  mol::Conformer shorter = *rec.conformer;
  shorter.coords.pop_back();
  Tape<double> t(false);
  EXPECT_THROW(denoise_loss(t, teacher, head, rec.graph, sample_noise(shorter, 0.1, 1)),
               DimensionError);
}

// Projection with W = I, b = 0 so student nodes land on teacher nodes directly.
void make_identity(ProjectionHead<double>& p) {
  for (auto* param : p.params().all()) {
    param->value.fill(0.0);
    if (param->value.rank() == 2) {
      for (std::size_t i = 0; i < param->value.rows(); ++i) param->value(i, i) = 1.0;
    }
  }
}

TEST(DistillLoss, PerfectMatchIsZero) {
  ProjectionHead<double> proj(4, 4, 0);
  make_identity(proj);
  Rng rng(1);
  const auto teacher = testing::random_array({5, 4}, rng);
  Tape<double> t;
  auto s = t.input(teacher);
  EXPECT_NEAR(distill_graph_loss(t, s, proj, teacher).value().item(), 0.0, 1e-15);
  EXPECT_NEAR(distill_node_loss(t, s, proj, teacher).value().item(), 0.0, 1e-15);
}

TEST(DistillLoss, NodeLossDominatesGraphLoss) {
  ProjectionHead<double> proj(6, 4, 2);
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto teacher = testing::random_array({7, 4}, rng);
    Tape<double> t(false);
    auto s = t.constant(testing::random_array({7, 6}, rng));
    EXPECT_GE(distill_node_loss(t, s, proj, teacher).value().item(),
              distill_graph_loss(t, s, proj, teacher).value().item());
  }
  // Mean-zero per-node field: graph loss vanishes, node loss does not.
  ProjectionHead<double> id(4, 4, 0);
  make_identity(id);
  const auto teacher = testing::random_array({6, 4}, rng);
  auto field = testing::random_array({6, 4}, rng);
  for (std::size_t c = 0; c < 4; ++c) {
    double m = 0;
    for (std::size_t i = 0; i < 6; ++i) m += field(i, c);
    for (std::size_t i = 0; i < 6; ++i) field(i, c) -= m / 6;
  }
  auto shifted = teacher;
  for (std::size_t k = 0; k < shifted.size(); ++k) shifted[k] += field[k];
  Tape<double> t(false);
  auto s = t.constant(shifted);
  EXPECT_NEAR(distill_graph_loss(t, s, id, teacher).value().item(), 0.0, 1e-14);
  EXPECT_GT(distill_node_loss(t, s, id, teacher).value().item(), 0.1);
}

TEST(DistillLoss, TeacherReceivesNoGradient) {
  enc3d::Encoder3D<double> teacher(teacher_cfg(), 1);
  enc2d::Encoder2D<double> student(student_cfg(), 2);
  ProjectionHead<double> proj(8, 12, 3);
  teacher.params().set_frozen(true);
  teacher.params().zero_grad();
  student.params().zero_grad();
  const auto rec = testing::small_dataset(1, 4).records[0];
  for (auto v : {DistillVariant::kGraph, DistillVariant::kNode}) {
    Tape<double> t;
    auto loss = distill_loss(t, v, student, proj, teacher, rec, 7);
    t.backward(loss);
    t.accumulate_param_grads();
    for (const auto* p : teacher.params().all()) EXPECT_FALSE(p->has_nonzero_grad()) << p->name;
    bool any = false;
    for (const auto* p : student.params().all()) any = any || p->has_nonzero_grad();
    EXPECT_TRUE(any);
  }
}

TEST(DistillLoss, RigidMotionAndPermutationInvariant) {
  enc3d::Encoder3D<double> teacher(teacher_cfg(), 1);
  enc2d::Encoder2D<double> student(student_cfg(), 2);
  ProjectionHead<double> proj(8, 12, 3);
  Rng rng(5);
  const auto rec = testing::small_dataset(1, 6).records[0];
  const std::size_t n = rec.graph.num_atoms();
  const auto ids = enc2d::make_identifiers(n, 12, 4);
  auto loss = [&](const mol::MoleculeRecord& r, const Array<double>& identifiers, DistillVariant v) {
    Tape<double> t(false);
    auto enc = student.encode(t, enc2d::tokenize(r.graph, identifiers, false));
    return distill_loss(t, v, enc.nodes, proj, teacher_representation(teacher, r)).value().item();
  };
  auto moved = rec;
  moved.conformer->coords = testing::rigid_motion(rec.conformer->coords, testing::random_rotation(rng), {1, 2, 3});
  const auto perm = testing::random_permutation(n, rng);
  const auto permuted = testing::permute_record(rec, perm);
  for (auto v : {DistillVariant::kGraph, DistillVariant::kNode}) {
    const double base = loss(rec, ids, v);
    EXPECT_NEAR(loss(moved, ids, v), base, 1e-10);
    EXPECT_NEAR(loss(permuted, testing::permute_identifiers(ids, perm), v), base, 1e-10);
  }
}

TEST(DistillLoss, MissingConformerThrows) {
  enc3d::Encoder3D<double> teacher(teacher_cfg(), 1);
  auto rec = testing::small_dataset(1, 6).records[0];
  rec.conformer.reset();
  EXPECT_THROW(teacher_representation(teacher, rec), ContractError);
}

TEST(Ntxent, ClosedFormTwoSample) {
  Tape<double> t;
  auto eye = Array<double>::matrix(2, 2, {1, 0, 0, 1});
  const double v = ntxent_loss(t.constant(eye), t.constant(eye), 0.01).value().item();
  EXPECT_NEAR(v, testing::kNtxentClosedForm, 1e-6);
  EXPECT_NEAR(v, testing::kNtxentOrthonormalTau001, 1e-12);
}

TEST(Ntxent, GeneralCaseMatchesReference) {
  Tape<double> t;
  Array<double> s({3, 3}, std::vector<double>(testing::kNtxentStudent.begin(), testing::kNtxentStudent.end()));
  Array<double> q({3, 3}, std::vector<double>(testing::kNtxentTeacher.begin(), testing::kNtxentTeacher.end()));
  EXPECT_NEAR(ntxent_loss(t.constant(s), t.constant(q), 0.5).value().item(),
              testing::kNtxentGeneralTau05, 1e-12);
  auto scaled = s;
  for (auto& v : scaled.storage()) v *= 37.0;
  EXPECT_NEAR(ntxent_loss(t.constant(scaled), t.constant(q), 0.5).value().item(),
              testing::kNtxentGeneralTau05, 1e-12);
}

TEST(Ntxent, GradientAndBatchGuard) {
  Rng rng(2);
  auto r = ad::grad_check(
      [](Tape<double>&, std::span<const testing::VarD> x) { return ntxent_loss(x[0], x[1], 0.3); },
      {testing::random_array({4, 5}, rng), testing::random_array({4, 5}, rng)});
  EXPECT_LT(r.max_relative_error, 1e-4) << r.worst_location;
  Tape<double> t;
  auto one = t.constant(testing::random_array({1, 3}, rng));
  EXPECT_THROW(ntxent_loss(one, one, 0.01), ContractError);
}

TEST(FinetuneLoss, Examples) {
  Tape<double> t;
  auto pred = t.constant(Array<double>::matrix(2, 1, {0.5, -1.0}));
  std::vector<mol::Label> exact = {0.5, -1.0};
  EXPECT_EQ(finetune_loss(pred, std::span<const mol::Label>(exact), TaskType::kRegression).value().item(), 0.0);

  auto logit = t.constant(Array<double>::matrix(1, 1, {0.0}));
  std::vector<mol::Label> pos = {1.0};
  EXPECT_NEAR(finetune_loss(logit, std::span<const mol::Label>(pos), TaskType::kClassification).value().item(),
              testing::kBceLogit0Label1, 1e-15);
}

TEST(FinetuneLoss, MaskedTargetContributesNothing) {
  Tape<double> t;
  auto two = t.constant(Array<double>::matrix(3, 2, {1, 9, 2, -4, 0, 100}));
  std::vector<mol::Label> masked = {2.0, std::nullopt, 1.0, std::nullopt, 1.0, std::nullopt};
  auto one = t.constant(Array<double>::matrix(3, 1, {1, 2, 0}));
  std::vector<mol::Label> single = {2.0, 1.0, 1.0};
  for (auto task : {TaskType::kRegression, TaskType::kClassification}) {
    std::vector<mol::Label> m = masked, s = single;
    if (task == TaskType::kClassification) {
      for (auto* v : {&m, &s}) {
        for (auto& l : *v) {
          if (l) l = *l > 1.5 ? 1.0 : 0.0;
        }
      }
    }
    EXPECT_NEAR(finetune_loss(two, std::span<const mol::Label>(m), task).value().item(),
                finetune_loss(one, std::span<const mol::Label>(s), task).value().item(), 1e-15);
  }
  std::vector<mol::Label> none(6);
  EXPECT_THROW(finetune_loss(two, std::span<const mol::Label>(none), TaskType::kRegression),
               DegenerateError);
  EXPECT_THROW(finetune_loss(two, std::span<const mol::Label>(none), TaskType::kClassification),
               DegenerateError);
}

}  // namespace
}  // namespace dnd::obj
