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

#include <cmath>

#include "dnd/util/error.hpp"
#include "loop.hpp"

namespace dnd::train {

void ContrastiveConfig::validate() const {
  student.validate();
  teacher.validate();
  train.validate();
  if (!(temperature > 0) || !std::isfinite(temperature)) {
    throw ConfigError("contrastive config: temperature must be > 0");
  }
  if (train.batch_size < 2) throw ConfigError("contrastive config: batch_size must be >= 2");
}

void to_json(nlohmann::json& j, const ContrastiveConfig& c) {
  j = nlohmann::json{{"student", c.student},
                     {"teacher", c.teacher},
                     {"temperature", c.temperature},
                     {"train", c.train}};
}

void from_json(const nlohmann::json& j, ContrastiveConfig& c) {
  if (j.contains("student")) c.student = j.at("student").get<enc2d::Encoder2DConfig>();
  if (j.contains("teacher")) c.teacher = j.at("teacher").get<enc3d::Encoder3DConfig>();
  c.temperature = j.value("temperature", c.temperature);
  if (j.contains("train")) c.train = j.at("train").get<TrainConfig>();
}

ContrastiveModel::ContrastiveModel(const enc2d::Encoder2DConfig& student_config,
                                   const enc3d::Encoder3DConfig& teacher_config,
                                   std::uint64_t seed)
    : student(student_config, seed),
      teacher(teacher_config, mix_seed(seed, 0x3d)),
      projection(static_cast<std::size_t>(student_config.hidden_dim),
                 static_cast<std::size_t>(teacher_config.hidden_dim), seed) {}

std::unique_ptr<ContrastiveModel> ContrastiveModel::from_checkpoint(const Checkpoint& ckpt) {
  require_stage(ckpt, {Stage::kContrastive}, "contrastive model");
  auto model = std::make_unique<ContrastiveModel>(
      ckpt.config.at("student").get<enc2d::Encoder2DConfig>(),
      ckpt.config.at("teacher").get<enc3d::Encoder3DConfig>(), 0);
  restore_parameters(ckpt, model->student.params());
  restore_parameters(ckpt, model->teacher.params());
  restore_parameters(ckpt, model->projection.params());
  return model;
}

namespace {

// NT-Xent over one batch; identifier seeds supplied per example.
ad::Var<Real> batch_loss(ad::Tape<Real>& tape, const ContrastiveModel& model,
                         const mol::Dataset& data, std::span<const std::size_t> batch,
                         std::span<const std::uint64_t> id_seeds, Real temperature) {
  std::vector<ad::Var<Real>> s_rows, t_rows;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& rec = data.records[batch[b]];
    const auto tokens = enc2d::tokenize(rec.graph, id_seeds[b], model.student.config());
    s_rows.push_back(enc2d::pool_mean(model.student.encode(tape, tokens).nodes));
    t_rows.push_back(enc2d::pool_mean(model.teacher.encode(tape, rec.graph, rec.conformer->coords)));
  }
  ad::Var<Real> s = model.projection(tape, ad::concat_rows<Real>(s_rows));
  ad::Var<Real> t = ad::concat_rows<Real>(t_rows);
  return obj::ntxent_loss(s, t, temperature);
}

}  // namespace

TrainResult train_contrastive(ContrastiveModel& model, const mol::Dataset& train,
                              const mol::Dataset& val, const ContrastiveConfig& config,
                              const TrainOptions& options) {
  config.validate();
  detail::require_conformers(train, "train_contrastive");
  detail::require_conformers(val, "train_contrastive");
  if (train.size() < 2 || val.size() < 2) {
    throw ContractError("train_contrastive: train and validation sets need at least 2 records");
  }
  const auto temperature = static_cast<Real>(config.temperature);

  std::vector<std::size_t> val_order(val.size());
  for (std::size_t i = 0; i < val.size(); ++i) val_order[i] = i;
  const auto val_batches =
      detail::make_batches(val_order, static_cast<std::size_t>(config.train.batch_size), 2);

  AdamW<Real> opt(config.train.optimizer, resolve_schedule(config.train, train.size()));
  opt.add(model.student.params(), model.student.config().num_layers);
  opt.add(model.projection.params(), model.student.config().num_layers);
  opt.add(model.teacher.params(), model.teacher.config().num_layers);

  detail::LoopSpec spec;
  spec.stage = Stage::kContrastive;
  spec.config = &config.train;
  spec.train_size = train.size();
  spec.min_batch = 2;
  spec.config_snapshot = nlohmann::ordered_json::parse(nlohmann::json(config).dump());

  detail::LoopFns fns;
  fns.stores = {&model.student.params(), &model.projection.params(), &model.teacher.params()};
  fns.batch = [&](std::span<const std::size_t> batch, Rng& rng, std::int64_t step) {
    std::vector<std::uint64_t> seeds;
    for (std::size_t idx : batch) {
      seeds.push_back(config.train.resample_identifiers ? rng.next_u64()
                                                        : eval_identifier_seed(train.records[idx]));
    }
    ad::Tape<Real> tape;
    auto loss = batch_loss(tape, model, train, batch, seeds, temperature);
    const double value = static_cast<double>(loss.value().item());
    if (!std::isfinite(value)) {
      throw NumericError("non-finite contrastive loss at step " + std::to_string(step) +
                         " on batch starting with record '" + train.records[batch[0]].id + "'");
    }
    tape.backward(loss);
    tape.accumulate_param_grads();
    return value * static_cast<double>(batch.size());
  };
  fns.validate = [&] {
    double total = 0;
    for (const auto& batch : val_batches) {
      std::vector<std::uint64_t> seeds;
      for (std::size_t idx : batch) seeds.push_back(eval_identifier_seed(val.records[idx]));
      ad::Tape<Real> tape(false);
      total += static_cast<double>(
                   batch_loss(tape, model, val, batch, seeds, temperature).value().item()) *
               static_cast<double>(batch.size());
    }
    const double v = total / static_cast<double>(val.size());
    return std::pair{v, v};
  };
  fns.capture = [&](Checkpoint& c) {
    capture_parameters(model.student.params(), c);
    capture_parameters(model.projection.params(), c);
    capture_parameters(model.teacher.params(), c);
    c.extra["temperature"] = config.temperature;
  };
  fns.restore = [&](const Checkpoint& c) {
    restore_parameters(c, model.student.params());
    restore_parameters(c, model.projection.params());
    restore_parameters(c, model.teacher.params());
  };
  return detail::run_training(spec, opt, fns, options);
}

}  // namespace dnd::train
