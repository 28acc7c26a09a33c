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

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dnd/autodiff/layers.hpp"
#include "dnd/autodiff/ops.hpp"
#include "dnd/encoder2d/encoder2d.hpp"
#include "dnd/encoder3d/encoder3d.hpp"
#include "dnd/moldata/types.hpp"

namespace dnd::obj {

inline constexpr double kDefaultSigma = 0.1;
inline constexpr double kDefaultTemperature = 0.01;

// perturbed = clean + sigma * epsilon, epsilon i.i.d. standard normal.
struct NoiseSample {
  mol::Conformer clean;
  mol::Conformer perturbed;
  ad::Array<double> epsilon;  // (N, 3)
  double sigma = kDefaultSigma;
};

// Throws ConfigError unless sigma > 0 and finite.
NoiseSample sample_noise(const mol::Conformer& conformer, double sigma, std::uint64_t seed);

// Mean over the 3N entries of (eps_hat - eps)^2. The teacher sees the
// perturbed conformer.
template <typename T>
ad::Var<T> denoise_loss(ad::Tape<T>& tape, const enc3d::Encoder3D<T>& teacher,
                        const enc3d::NoiseHead<T>& head, const mol::MoleculeGraph& graph,
                        const NoiseSample& sample);

// Affine map from student width to teacher width.
template <typename T>
class ProjectionHead {
 public:
  ProjectionHead(std::size_t student_dim, std::size_t teacher_dim, std::uint64_t seed);

  ad::ParameterStore<T>& params() { return store_; }
  const ad::ParameterStore<T>& params() const { return store_; }
  std::size_t input_dim() const { return linear_.in_features(); }
  std::size_t output_dim() const { return linear_.out_features(); }

  ad::Var<T> operator()(ad::Tape<T>& tape, ad::Var<T> x) const { return linear_(tape, x); }

 private:
  ad::ParameterStore<T> store_;
  ad::Linear<T> linear_;
};

enum class DistillVariant { kGraph, kNode };

DistillVariant parse_distill_variant(const std::string& name);
std::string distill_variant_name(DistillVariant v);

// Per-atom teacher representation of the clean conformer, computed without a
// gradient path so the teacher can never receive updates. Shape (N, d_t).
template <typename T>
ad::Array<T> teacher_representation(const enc3d::Encoder3D<T>& teacher,
                                    const mol::MoleculeRecord& record);

// Squared distance between mean-pooled projected student nodes and the
// mean-pooled teacher rep, averaged over d_t.
template <typename T>
ad::Var<T> distill_graph_loss(ad::Tape<T>& tape, ad::Var<T> student_nodes,
                              const ProjectionHead<T>& projection,
                              const ad::Array<T>& teacher_nodes);

// Mean over N x d_t of squared error between projected student nodes and
// teacher nodes.
template <typename T>
ad::Var<T> distill_node_loss(ad::Tape<T>& tape, ad::Var<T> student_nodes,
                             const ProjectionHead<T>& projection,
                             const ad::Array<T>& teacher_nodes);

template <typename T>
ad::Var<T> distill_loss(ad::Tape<T>& tape, DistillVariant variant, ad::Var<T> student_nodes,
                        const ProjectionHead<T>& projection, const ad::Array<T>& teacher_nodes);

// Convenience form: encodes the record with both models.
template <typename T>
ad::Var<T> distill_loss(ad::Tape<T>& tape, DistillVariant variant,
                        const enc2d::Encoder2D<T>& student, const ProjectionHead<T>& projection,
                        const enc3d::Encoder3D<T>& teacher, const mol::MoleculeRecord& record,
                        std::uint64_t identifier_seed);

// Symmetrized cross-entropy of cosine similarity / tau with in-batch
// negatives. Inputs are (B, d) graph-level reps with B >= 2.
template <typename T>
ad::Var<T> ntxent_loss(ad::Var<T> student, ad::Var<T> teacher, T temperature);

enum class TaskType { kRegression, kClassification };

TaskType parse_task_type(const std::string& name);
std::string task_type_name(TaskType t);

// prediction has shape (B, K); labels holds B*K row-major entries. Missing
// labels are masked. Regression uses L1, classification BCE with logits.
// Throws DegenerateError when every label is missing.
template <typename T>
ad::Var<T> finetune_loss(ad::Var<T> prediction, std::span<const mol::Label> labels, TaskType task);

}  // namespace dnd::obj
