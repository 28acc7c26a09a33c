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

#include "dnd/util/error.hpp"
#include "loop.hpp"

namespace dnd::train {

namespace {

Stage distill_stage(obj::DistillVariant v) {
  return v == obj::DistillVariant::kGraph ? Stage::kDistillGraph : Stage::kDistillNode;
}

std::vector<ad::Array<Real>> teacher_cache(const enc3d::Encoder3D<Real>& teacher,
                                           const mol::Dataset& data) {
  std::vector<ad::Array<Real>> reps;
  reps.reserve(data.size());
  for (const auto& r : data.records) reps.push_back(obj::teacher_representation(teacher, r));
  return reps;
}

double distill_eval_cached(const DistillModel& model, const mol::Dataset& data,
                           const std::vector<enc2d::TokenSequence>& tokens,
                           const std::vector<ad::Array<Real>>& reps, obj::DistillVariant variant) {
  double total = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    ad::Tape<Real> tape(false);
    auto enc = model.student.encode(tape, tokens[i]);
    total += static_cast<double>(
        obj::distill_loss(tape, variant, enc.nodes, model.projection, reps[i]).value().item());
  }
  return total / static_cast<double>(data.size());
}

std::vector<enc2d::TokenSequence> eval_tokens(const mol::Dataset& data,
                                              const enc2d::Encoder2DConfig& config) {
  std::vector<enc2d::TokenSequence> out;
  out.reserve(data.size());
  for (const auto& r : data.records) {
    out.push_back(enc2d::tokenize(r.graph, eval_identifier_seed(r), config));
  }
  return out;
}

}  // namespace

void DistillConfig::validate() const {
  student.validate();
  train.validate();
}

void to_json(nlohmann::json& j, const DistillConfig& c) {
  j = nlohmann::json{{"student", c.student},
                     {"variant", obj::distill_variant_name(c.variant)},
                     {"train", c.train}};
}

void from_json(const nlohmann::json& j, DistillConfig& c) {
  if (j.contains("student")) c.student = j.at("student").get<enc2d::Encoder2DConfig>();
  if (j.contains("variant")) c.variant = obj::parse_distill_variant(j.at("variant"));
  if (j.contains("train")) c.train = j.at("train").get<TrainConfig>();
}

DistillModel::DistillModel(const enc2d::Encoder2DConfig& config, std::size_t teacher_dim,
                           std::uint64_t seed)
    : student(config, seed),
      projection(static_cast<std::size_t>(config.hidden_dim), teacher_dim, seed) {}

std::unique_ptr<DistillModel> DistillModel::from_checkpoint(const Checkpoint& ckpt) {
  require_stage(ckpt, {Stage::kDistillGraph, Stage::kDistillNode}, "distill model");
  const auto scfg = ckpt.config.at("student").get<enc2d::Encoder2DConfig>();
  const auto tcfg = ckpt.config.at("teacher").get<enc3d::Encoder3DConfig>();
  auto model =
      std::make_unique<DistillModel>(scfg, static_cast<std::size_t>(tcfg.hidden_dim), 0);
  restore_parameters(ckpt, model->student.params());
  restore_parameters(ckpt, model->projection.params());
  return model;
}

std::unique_ptr<enc3d::Encoder3D<Real>> load_teacher(const Checkpoint& ckpt) {
  require_stage(ckpt, {Stage::kDenoise}, "distillation teacher");
  const auto cfg = ckpt.config.at("teacher").get<enc3d::Encoder3DConfig>();
  auto teacher = std::make_unique<enc3d::Encoder3D<Real>>(cfg, 0);
  restore_parameters(ckpt, teacher->params());
  teacher->params().set_frozen(true);
  return teacher;
}

double distill_eval(const DistillModel& model, const enc3d::Encoder3D<Real>& teacher,
                    const mol::Dataset& data, obj::DistillVariant variant) {
  detail::require_nonempty(data, "distillation evaluation set");
  return distill_eval_cached(model, data, eval_tokens(data, model.student.config()),
                             teacher_cache(teacher, data), variant);
}

TrainResult train_distill(DistillModel& model, const enc3d::Encoder3D<Real>& teacher,
                          const mol::Dataset& train, const mol::Dataset& val,
                          const DistillConfig& config, const TrainOptions& options) {
  config.validate();
  detail::require_nonempty(train, "distillation training set");
  detail::require_nonempty(val, "distillation validation set");
  detail::require_conformers(train, "train_distill");
  detail::require_conformers(val, "train_distill");
  if (model.projection.output_dim() != static_cast<std::size_t>(teacher.config().hidden_dim)) {
    throw DimensionError("train_distill: projection output does not match teacher width");
  }

  // The teacher is frozen, so its representations are computed once.
  const auto train_reps = teacher_cache(teacher, train);
  const auto val_reps = teacher_cache(teacher, val);
  const auto val_tokens = eval_tokens(val, model.student.config());

  AdamW<Real> opt(config.train.optimizer, resolve_schedule(config.train, train.size()));
  const int layers = model.student.config().num_layers;
  opt.add(model.student.params(), layers);
  opt.add(model.projection.params(), layers);

  detail::LoopSpec spec;
  spec.stage = distill_stage(config.variant);
  spec.config = &config.train;
  spec.train_size = train.size();
  nlohmann::json snap = config;
  snap["teacher"] = teacher.config();
  spec.config_snapshot = nlohmann::ordered_json::parse(snap.dump());

  detail::LoopFns fns;
  fns.stores = {&model.student.params(), &model.projection.params()};
  fns.batch = [&](std::span<const std::size_t> batch, Rng& rng, std::int64_t step) {
    double sum = 0;
    for (std::size_t idx : batch) {
      const auto& rec = train.records[idx];
      const std::uint64_t id_seed =
          config.train.resample_identifiers ? rng.next_u64() : eval_identifier_seed(rec);
      const auto tokens = enc2d::tokenize(rec.graph, id_seed, model.student.config());
      ad::Tape<Real> tape;
      auto enc = model.student.encode(tape, tokens);
      auto loss =
          obj::distill_loss(tape, config.variant, enc.nodes, model.projection, train_reps[idx]);
      sum += detail::backward_example(tape, loss, batch.size(), step, rec.id);
    }
    return sum;
  };
  fns.validate = [&] {
    const double v = distill_eval_cached(model, val, val_tokens, val_reps, config.variant);
    return std::pair{v, v};
  };
  fns.capture = [&](Checkpoint& c) {
    capture_parameters(model.student.params(), c);
    capture_parameters(model.projection.params(), c);
  };
  fns.restore = [&](const Checkpoint& c) {
    restore_parameters(c, model.student.params());
    restore_parameters(c, model.projection.params());
  };
  return detail::run_training(spec, opt, fns, options);
}

TrainResult train_distill(DistillModel& model, const Checkpoint& teacher_checkpoint,
                          const mol::Dataset& train, const mol::Dataset& val,
                          const DistillConfig& config, const TrainOptions& options) {
  const auto teacher = load_teacher(teacher_checkpoint);
  return train_distill(model, *teacher, train, val, config, options);
}

}  // namespace dnd::train
