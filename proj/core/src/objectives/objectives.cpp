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

#include "dnd/objectives/objectives.hpp"

#include <cmath>

#include "dnd/util/error.hpp"
#include "dnd/util/rng.hpp"

namespace dnd::obj {

using ad::Array;
using ad::Shape;
using ad::Tape;
using ad::Var;

NoiseSample sample_noise(const mol::Conformer& conformer, double sigma, std::uint64_t seed) {
  if (!(sigma > 0) || !std::isfinite(sigma)) {
    throw ConfigError("sample_noise: sigma must be a positive finite number, got " +
                      std::to_string(sigma));
  }
  Rng rng(seed);
  const std::size_t n = conformer.size();
  NoiseSample s;
  s.clean = conformer;
  s.perturbed = conformer;
  s.sigma = sigma;
  s.epsilon = Array<double>(Shape{n, 3});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      const double e = rng.normal();
      s.epsilon(i, c) = e;
      s.perturbed.coords[i][c] += sigma * e;
    }
  }
  return s;
}

template <typename T>
Var<T> denoise_loss(Tape<T>& tape, const enc3d::Encoder3D<T>& teacher,
                    const enc3d::NoiseHead<T>& head, const mol::MoleculeGraph& graph,
                    const NoiseSample& sample) {
  const std::size_t n = graph.num_atoms();
  if (sample.perturbed.size() != n) {
    throw DimensionError("denoise_loss: conformer has " + std::to_string(sample.perturbed.size()) +
                         " atoms, graph has " + std::to_string(n));
  }
  const auto geometry = teacher.geometry(sample.perturbed.coords);
  Var<T> z = teacher.encode(tape, graph, geometry);
  auto pred = head.predict(tape, z, geometry);
  return ad::mse(pred.epsilon, tape.constant(sample.epsilon.cast<T>()));
}

template <typename T>
ProjectionHead<T>::ProjectionHead(std::size_t student_dim, std::size_t teacher_dim,
                                  std::uint64_t seed)
    : store_("projection") {
  if (student_dim == 0 || teacher_dim == 0) {
    throw ConfigError("projection head: dimensions must be positive");
  }
  Rng rng(mix_seed(seed, 0x9e0));
  linear_ = ad::Linear<T>(store_, "linear", student_dim, teacher_dim, 0, rng);
}

DistillVariant parse_distill_variant(const std::string& name) {
  if (name == "graph") return DistillVariant::kGraph;
  if (name == "node") return DistillVariant::kNode;
  throw ConfigError("distill variant must be 'graph' or 'node', got '" + name + "'");
}

std::string distill_variant_name(DistillVariant v) {
  return v == DistillVariant::kGraph ? "graph" : "node";
}

template <typename T>
Array<T> teacher_representation(const enc3d::Encoder3D<T>& teacher,
                                const mol::MoleculeRecord& record) {
  if (!record.conformer) {
    throw ContractError("distillation: record '" + record.id + "' has no conformer");
  }
  if (record.conformer->size() != record.graph.num_atoms()) {
    throw DimensionError("distillation: record '" + record.id + "' conformer/graph atom mismatch");
  }
  return teacher.infer(record.graph, record.conformer->coords);
}

namespace {

template <typename T>
void check_teacher_shape(Var<T> student_nodes, const ProjectionHead<T>& projection,
                         const Array<T>& teacher_nodes, const char* what) {
  const Shape& s = student_nodes.shape();
  if (s.size() != 2 || s[1] != projection.input_dim()) {
    throw DimensionError(std::string(what) + ": student reps " + ad::shape_string(s) +
                         " do not match projection input " +
                         std::to_string(projection.input_dim()));
  }
  if (teacher_nodes.rank() != 2 || teacher_nodes.shape()[0] != s[0] ||
      teacher_nodes.shape()[1] != projection.output_dim()) {
    throw DimensionError(std::string(what) + ": teacher reps " +
                         ad::shape_string(teacher_nodes.shape()) + " vs student " +
                         ad::shape_string(s) + " projected to " +
                         std::to_string(projection.output_dim()));
  }
}

}  // namespace

template <typename T>
Var<T> distill_graph_loss(Tape<T>& tape, Var<T> student_nodes, const ProjectionHead<T>& projection,
                          const Array<T>& teacher_nodes) {
  check_teacher_shape(student_nodes, projection, teacher_nodes, "distill_graph_loss");
  Var<T> s = ad::mean_axis(projection(tape, student_nodes), 0);
  Var<T> t = ad::mean_axis(tape.constant(teacher_nodes), 0);
  return ad::mse(s, t);
}

template <typename T>
Var<T> distill_node_loss(Tape<T>& tape, Var<T> student_nodes, const ProjectionHead<T>& projection,
                         const Array<T>& teacher_nodes) {
  check_teacher_shape(student_nodes, projection, teacher_nodes, "distill_node_loss");
  return ad::mse(projection(tape, student_nodes), tape.constant(teacher_nodes));
}

template <typename T>
Var<T> distill_loss(Tape<T>& tape, DistillVariant variant, Var<T> student_nodes,
                    const ProjectionHead<T>& projection, const Array<T>& teacher_nodes) {
  return variant == DistillVariant::kGraph
             ? distill_graph_loss(tape, student_nodes, projection, teacher_nodes)
             : distill_node_loss(tape, student_nodes, projection, teacher_nodes);
}

template <typename T>
Var<T> distill_loss(Tape<T>& tape, DistillVariant variant, const enc2d::Encoder2D<T>& student,
                    const ProjectionHead<T>& projection, const enc3d::Encoder3D<T>& teacher,
                    const mol::MoleculeRecord& record, std::uint64_t identifier_seed) {
  const Array<T> teacher_nodes = teacher_representation(teacher, record);
  const auto tokens = enc2d::tokenize(record.graph, identifier_seed, student.config());
  auto encoded = student.encode(tape, tokens);
  return distill_loss(tape, variant, encoded.nodes, projection, teacher_nodes);
}

template <typename T>
Var<T> ntxent_loss(Var<T> student, Var<T> teacher, T temperature) {
  const Shape& s = student.shape();
  if (s.size() != 2 || teacher.shape() != s) {
    throw DimensionError("ntxent_loss: shapes " + ad::shape_string(s) + " and " +
                         ad::shape_string(teacher.shape()) + " must match and be rank 2");
  }
  const std::size_t b = s[0];
  if (b < 2) throw ContractError("ntxent_loss: batch size must be at least 2");
  if (!(temperature > 0)) throw ConfigError("ntxent_loss: temperature must be positive");
  Var<T> sim = ad::scale(
      ad::matmul(ad::l2_normalize_rows(student), ad::transpose(ad::l2_normalize_rows(teacher))),
      T(1) / temperature);
  std::vector<std::uint32_t> diag(b);
  for (std::size_t i = 0; i < b; ++i) diag[i] = static_cast<std::uint32_t>(i * b + i);
  Var<T> s2t = ad::mean_all(ad::select(ad::log_softmax_rows(sim), std::span(diag)));
  Var<T> t2s = ad::mean_all(ad::select(ad::log_softmax_rows(ad::transpose(sim)), std::span(diag)));
  return ad::scale(ad::add(s2t, t2s), T(-0.5));
}

TaskType parse_task_type(const std::string& name) {
  if (name == "regression") return TaskType::kRegression;
  if (name == "classification") return TaskType::kClassification;
  throw ConfigError("task type must be 'regression' or 'classification', got '" + name + "'");
}

std::string task_type_name(TaskType t) {
  return t == TaskType::kRegression ? "regression" : "classification";
}

template <typename T>
Var<T> finetune_loss(Var<T> prediction, std::span<const mol::Label> labels, TaskType task) {
  const Array<T>& P = prediction.value();
  if (P.size() != labels.size()) {
    throw DimensionError("finetune_loss: prediction " + ad::shape_string(P.shape()) + " vs " +
                         std::to_string(labels.size()) + " labels");
  }
  Tape<T>& tape = *prediction.tape;
  if (task == TaskType::kClassification) {
    Array<T> targets(P.shape());
    std::vector<std::uint8_t> mask(P.size(), 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i]) {
        targets[i] = static_cast<T>(*labels[i]);
        mask[i] = 1;
      }
    }
    return ad::bce_with_logits(prediction, tape.constant(std::move(targets)), std::span(mask));
  }
  std::vector<std::uint32_t> valid;
  std::vector<T> values;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i]) {
      valid.push_back(static_cast<std::uint32_t>(i));
      values.push_back(static_cast<T>(*labels[i]));
    }
  }
  if (valid.empty()) throw DegenerateError("finetune_loss: every label is missing");
  Array<T> y(Shape{values.size()});
  for (std::size_t i = 0; i < values.size(); ++i) y[i] = values[i];
  return ad::l1(ad::select(prediction, std::span(valid)), tape.constant(std::move(y)));
}

#define DND_INSTANTIATE_OBJECTIVES(T)                                                          \
  template Var<T> denoise_loss(Tape<T>&, const enc3d::Encoder3D<T>&,                           \
                               const enc3d::NoiseHead<T>&, const mol::MoleculeGraph&,          \
                               const NoiseSample&);                                            \
  template class ProjectionHead<T>;                                                            \
  template Array<T> teacher_representation(const enc3d::Encoder3D<T>&,                         \
                                           const mol::MoleculeRecord&);                        \
  template Var<T> distill_graph_loss(Tape<T>&, Var<T>, const ProjectionHead<T>&,               \
                                     const Array<T>&);                                         \
  template Var<T> distill_node_loss(Tape<T>&, Var<T>, const ProjectionHead<T>&,                \
                                    const Array<T>&);                                          \
  template Var<T> distill_loss(Tape<T>&, DistillVariant, Var<T>, const ProjectionHead<T>&,     \
                               const Array<T>&);                                               \
  template Var<T> distill_loss(Tape<T>&, DistillVariant, const enc2d::Encoder2D<T>&,           \
                               const ProjectionHead<T>&, const enc3d::Encoder3D<T>&,           \
                               const mol::MoleculeRecord&, std::uint64_t);                     \
  template Var<T> ntxent_loss(Var<T>, Var<T>, T);                                              \
  template Var<T> finetune_loss(Var<T>, std::span<const mol::Label>, TaskType);

DND_INSTANTIATE_OBJECTIVES(float)
DND_INSTANTIATE_OBJECTIVES(double)

}  // namespace dnd::obj
