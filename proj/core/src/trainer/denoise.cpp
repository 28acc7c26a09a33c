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

void DenoiseConfig::validate() const {
  teacher.validate();
  train.validate();
  if (!(sigma > 0) || !std::isfinite(sigma)) throw ConfigError("denoise config: sigma must be > 0");
}

void to_json(nlohmann::json& j, const DenoiseConfig& c) {
  j = nlohmann::json{{"teacher", c.teacher}, {"train", c.train}, {"sigma", c.sigma}};
}

void from_json(const nlohmann::json& j, DenoiseConfig& c) {
  if (j.contains("teacher")) c.teacher = j.at("teacher").get<enc3d::Encoder3DConfig>();
  if (j.contains("train")) c.train = j.at("train").get<TrainConfig>();
  c.sigma = j.value("sigma", c.sigma);
}

DenoiseModel::DenoiseModel(const enc3d::Encoder3DConfig& config, std::uint64_t seed)
    : teacher(config, seed), head(config, seed) {}

std::unique_ptr<DenoiseModel> DenoiseModel::from_checkpoint(const Checkpoint& ckpt) {
  require_stage(ckpt, {Stage::kDenoise}, "denoise model");
  const auto cfg = ckpt.config.at("teacher").get<enc3d::Encoder3DConfig>();
  auto model = std::make_unique<DenoiseModel>(cfg, 0);
  restore_parameters(ckpt, model->teacher.params());
  restore_parameters(ckpt, model->head.params());
  return model;
}

double denoise_eval(const DenoiseModel& model, const mol::Dataset& data, double sigma,
                    std::uint64_t seed) {
  detail::require_nonempty(data, "denoise evaluation set");
  detail::require_conformers(data, "denoise evaluation");
  double total = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& rec = data.records[i];
    const auto sample = obj::sample_noise(*rec.conformer, sigma, mix_seed(seed, i));
    ad::Tape<Real> tape(false);
    total += static_cast<double>(
        obj::denoise_loss(tape, model.teacher, model.head, rec.graph, sample).value().item());
  }
  return total / static_cast<double>(data.size());
}

TrainResult train_denoise(DenoiseModel& model, const mol::Dataset& train, const mol::Dataset& val,
                          const DenoiseConfig& config, const TrainOptions& options) {
  config.validate();
  detail::require_nonempty(train, "denoise training set");
  detail::require_nonempty(val, "denoise validation set");
  detail::require_conformers(train, "train_denoise");
  detail::require_conformers(val, "train_denoise");

  AdamW<Real> opt(config.train.optimizer, resolve_schedule(config.train, train.size()));
  const int layers = model.teacher.config().num_layers;
  opt.add(model.teacher.params(), layers);
  opt.add(model.head.params(), layers);

  detail::LoopSpec spec;
  spec.stage = Stage::kDenoise;
  spec.config = &config.train;
  spec.train_size = train.size();
  spec.config_snapshot = nlohmann::ordered_json::parse(nlohmann::json(config).dump());

  const std::uint64_t val_seed = mix_seed(config.train.seed, 0x7a1);
  detail::LoopFns fns;
  fns.stores = {&model.teacher.params(), &model.head.params()};
  fns.batch = [&](std::span<const std::size_t> batch, Rng& rng, std::int64_t step) {
    double sum = 0;
    for (std::size_t idx : batch) {
      const auto& rec = train.records[idx];
      const auto sample = obj::sample_noise(*rec.conformer, config.sigma, rng.next_u64());
      ad::Tape<Real> tape;
      auto loss = obj::denoise_loss(tape, model.teacher, model.head, rec.graph, sample);
      sum += detail::backward_example(tape, loss, batch.size(), step, rec.id);
    }
    return sum;
  };
  fns.validate = [&] {
    const double v = denoise_eval(model, val, config.sigma, val_seed);
    return std::pair{v, v};
  };
  fns.capture = [&](Checkpoint& c) {
    capture_parameters(model.teacher.params(), c);
    capture_parameters(model.head.params(), c);
  };
  fns.restore = [&](const Checkpoint& c) {
    restore_parameters(c, model.teacher.params());
    restore_parameters(c, model.head.params());
  };
  return detail::run_training(spec, opt, fns, options);
}

}  // namespace dnd::train
