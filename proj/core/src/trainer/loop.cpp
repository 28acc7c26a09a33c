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

#include "loop.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "dnd/util/error.hpp"

namespace dnd::train {

void TrainConfig::validate() const {
  std::string problems;
  if (epochs < 1) problems += " epochs must be >= 1;";
  if (batch_size < 1) problems += " batch_size must be >= 1;";
  if (!(warmup_epochs >= 0)) problems += " warmup_epochs must be >= 0;";
  if (warmup_steps && *warmup_steps < 0) problems += " warmup_steps must be >= 0;";
  if (!(min_lr_fraction >= 0 && min_lr_fraction <= 1)) {
    problems += " min_lr_fraction must be in [0, 1];";
  }
  if (!(warmup_start_fraction >= 0 && warmup_start_fraction <= 1)) {
    problems += " warmup_start_fraction must be in [0, 1];";
  }
  try {
    optimizer.validate();
  } catch (const ConfigError& e) {
    problems += std::string(" ") + e.what() + ";";
  }
  if (!problems.empty()) throw ConfigError("train config:" + problems);
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"epochs", c.epochs},
                     {"batch_size", c.batch_size},
                     {"warmup_epochs", c.warmup_epochs},
                     {"warmup_steps", c.warmup_steps ? nlohmann::json(*c.warmup_steps)
                                                     : nlohmann::json(nullptr)},
                     {"min_lr_fraction", c.min_lr_fraction},
                     {"warmup_start_fraction", c.warmup_start_fraction},
                     {"optimizer", c.optimizer},
                     {"seed", c.seed},
                     {"resample_identifiers", c.resample_identifiers}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.warmup_epochs = j.value("warmup_epochs", c.warmup_epochs);
  if (j.contains("warmup_steps")) {
    const auto& w = j.at("warmup_steps");
    c.warmup_steps = w.is_null() ? std::nullopt : std::optional<std::int64_t>(w.get<std::int64_t>());
  }
  c.min_lr_fraction = j.value("min_lr_fraction", c.min_lr_fraction);
  c.warmup_start_fraction = j.value("warmup_start_fraction", c.warmup_start_fraction);
  if (j.contains("optimizer")) c.optimizer = j.at("optimizer").get<OptimizerConfig>();
  c.seed = j.value("seed", c.seed);
  c.resample_identifiers = j.value("resample_identifiers", c.resample_identifiers);
}

std::size_t steps_per_epoch(std::size_t train_size, int batch_size) {
  const auto b = static_cast<std::size_t>(batch_size);
  return std::max<std::size_t>(1, (train_size + b - 1) / b);
}

ScheduleConfig resolve_schedule(const TrainConfig& config, std::size_t train_size) {
  const auto per_epoch = static_cast<std::int64_t>(steps_per_epoch(train_size, config.batch_size));
  ScheduleConfig s;
  s.total_steps = per_epoch * config.epochs;
  const std::int64_t warmup =
      config.warmup_steps ? *config.warmup_steps
                          : std::llround(config.warmup_epochs * static_cast<double>(per_epoch));
  s.warmup_steps = std::min(warmup, s.total_steps - 1);
  s.min_lr_fraction = config.min_lr_fraction;
  s.warmup_start_fraction = config.warmup_start_fraction;
  return s;
}

std::uint64_t eval_identifier_seed(const mol::MoleculeRecord& record) {
  return hash_string(record.id);
}

namespace detail {

std::vector<std::vector<std::size_t>> make_batches(std::span<const std::size_t> order,
                                                   std::size_t batch_size, std::size_t min_batch) {
  if (order.size() < min_batch) {
    throw ContractError("batching: " + std::to_string(order.size()) +
                        " examples cannot fill a batch of at least " + std::to_string(min_batch));
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    const std::size_t end = std::min(order.size(), i + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  if (batches.size() > 1 && batches.back().size() < min_batch) {
    auto tail = std::move(batches.back());
    batches.pop_back();
    batches.back().insert(batches.back().end(), tail.begin(), tail.end());
  }
  return batches;
}

double backward_example(ad::Tape<Real>& tape, ad::Var<Real> loss, std::size_t batch_size,
                        std::int64_t step, const std::string& record_id) {
  const double value = static_cast<double>(loss.value().item());
  if (!std::isfinite(value)) {
    throw NumericError("non-finite loss at step " + std::to_string(step) + " on record '" +
                       record_id + "'");
  }
  tape.backward(ad::scale(loss, Real(1) / static_cast<Real>(batch_size)));
  tape.accumulate_param_grads();
  return value;
}

void require_conformers(const mol::Dataset& data, const std::string& consumer) {
  for (const auto& r : data.records) {
    if (!r.conformer) {
      throw ValidationError(consumer + ": record '" + r.id + "' has no conformer");
    }
  }
}

void require_nonempty(const mol::Dataset& data, const std::string& what) {
  if (data.empty()) throw ContractError(what + " is empty");
}

namespace {

nlohmann::ordered_json rows_to_json(const MetricsLog& log) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& r : log.rows()) {
    rows.push_back({{"stage", r.stage},
                    {"epoch", r.epoch},
                    {"train_loss", r.train_loss},
                    {"val_loss", r.val_loss},
                    {"lr", r.lr},
                    {"wall_time_s", r.wall_time_s}});
  }
  return rows;
}

MetricsLog rows_from_json(const nlohmann::ordered_json& rows) {
  MetricsLog log;
  for (const auto& r : rows) {
    log.append({r.at("stage").get<std::string>(), r.at("epoch").get<int>(),
                r.at("train_loss").get<double>(), r.at("val_loss").get<double>(),
                r.at("lr").get<double>(), r.at("wall_time_s").get<double>()});
  }
  return log;
}

}  // namespace

TrainResult run_training(const LoopSpec& spec, AdamW<Real>& optimizer, const LoopFns& fns,
                         const TrainOptions& options) {
  const TrainConfig& cfg = *spec.config;
  const std::string label = stage_name(spec.stage);
  if (spec.train_size == 0) throw ContractError(label + ": training set is empty");
  Rng rng(mix_seed(cfg.seed, hash_string(label)));

  TrainResult result;
  double best_score = std::numeric_limits<double>::infinity();
  int start_epoch = 1;
  double time_offset = 0;

  auto snapshot = [&](int epoch) {
    Checkpoint c;
    c.stage = spec.stage;
    c.epoch = epoch;
    c.step = optimizer.steps_taken();
    c.config = spec.config_snapshot;
    fns.capture(c);
    c.extra["best_epoch"] = result.best_epoch;
    c.extra["best_score"] = spec.higher_is_better ? -best_score : best_score;
    return c;
  };
  auto resumable = [&](int epoch) {
    Checkpoint c = snapshot(epoch);
    capture_optimizer(optimizer, c);
    c.rng_state = rng.state();
    c.extra["metrics"] = rows_to_json(result.log);
    return c;
  };

  if (options.resume != nullptr) {
    const Checkpoint& r = *options.resume;
    require_stage(r, {spec.stage}, label + " resume");
    fns.restore(r);
    restore_optimizer(r, optimizer);
    rng.set_state(r.rng_state);
    start_epoch = r.epoch + 1;
    result.log = rows_from_json(r.extra.at("metrics"));
    result.best_epoch = r.extra.at("best_epoch").get<int>();
    const double s = r.extra.at("best_score").get<double>();
    best_score = spec.higher_is_better ? -s : s;
    if (options.resume_best != nullptr) result.best = *options.resume_best;
    if (!result.log.empty()) time_offset = result.log.back().wall_time_s;
  }

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::size_t> order(spec.train_size);
  for (int epoch = start_epoch; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    const auto batches =
        make_batches(order, static_cast<std::size_t>(cfg.batch_size), spec.min_batch);
    double total = 0;
    std::size_t count = 0;
    double lr = 0;
    for (const auto& batch : batches) {
      for (auto* store : fns.stores) store->zero_grad();
      total += fns.batch(batch, rng, optimizer.steps_taken());
      count += batch.size();
      lr = optimizer.current_lr();
      optimizer.step();
    }
    const auto [val_loss, score] = fns.validate();
    if (!std::isfinite(val_loss)) {
      throw NumericError(label + ": non-finite validation loss at epoch " + std::to_string(epoch));
    }
    const double elapsed =
        time_offset +
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    MetricsRow row{label, epoch, total / static_cast<double>(count), val_loss, lr, elapsed};
    result.log.append(row);
    if (options.on_epoch) options.on_epoch(row);
    const double signed_score = spec.higher_is_better ? -score : score;
    if (signed_score < best_score) {
      best_score = signed_score;
      result.best_epoch = epoch;
      result.best = snapshot(epoch);
    }
    if (options.on_checkpoint) options.on_checkpoint(resumable(epoch), result.best);
  }

  const int final_epoch = std::max(cfg.epochs, start_epoch - 1);
  if (result.best.parameters.empty()) {
    result.best_epoch = final_epoch;
    result.best = snapshot(final_epoch);
  }
  result.last = resumable(final_epoch);
  return result;
}

}  // namespace detail
}  // namespace dnd::train
