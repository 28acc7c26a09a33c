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

#include <algorithm>
#include <cmath>

#include "dnd/util/error.hpp"
#include "loop.hpp"

namespace dnd::train {

Readout parse_readout(const std::string& name) {
  if (name == "mp") return Readout::kMean;
  if (name == "vn") return Readout::kVirtual;
  throw ConfigError("readout must be 'mp' or 'vn', got '" + name + "'");
}

std::string readout_name(Readout r) { return r == Readout::kMean ? "mp" : "vn"; }

Metric parse_metric(const std::string& name) {
  if (name == "rmse") return Metric::kRmse;
  if (name == "mae") return Metric::kMae;
  if (name == "roc_auc") return Metric::kRocAuc;
  throw ConfigError("metric must be 'rmse', 'mae' or 'roc_auc', got '" + name + "'");
}

std::string metric_name(Metric m) {
  switch (m) {
    case Metric::kRmse: return "rmse";
    case Metric::kMae: return "mae";
    case Metric::kRocAuc: return "roc_auc";
  }
  return "unknown";
}

bool higher_is_better(Metric m) { return m == Metric::kRocAuc; }

void FinetuneConfig::validate() const {
  std::string problems;
  if (targets.empty()) problems += " targets must not be empty;";
  if (!(label_fraction > 0 && label_fraction <= 1)) problems += " label_fraction must be in (0, 1];";
  try {
    student.validate();
  } catch (const ConfigError& e) {
    problems += std::string(" ") + e.what() + ";";
  }
  try {
    train.validate();
  } catch (const ConfigError& e) {
    problems += std::string(" ") + e.what() + ";";
  }
  if (!problems.empty()) throw ConfigError("finetune config:" + problems);
}

Metric FinetuneConfig::selection_metric() const {
  return task == obj::TaskType::kRegression ? Metric::kMae : Metric::kRocAuc;
}

void to_json(nlohmann::json& j, const FinetuneConfig& c) {
  j = nlohmann::json{{"task", obj::task_type_name(c.task)},
                     {"targets", c.targets},
                     {"readout", readout_name(c.readout)},
                     {"label_fraction", c.label_fraction},
                     {"student", c.student},
                     {"train", c.train}};
}

void from_json(const nlohmann::json& j, FinetuneConfig& c) {
  if (j.contains("task")) c.task = obj::parse_task_type(j.at("task"));
  if (j.contains("targets")) c.targets = j.at("targets").get<std::vector<std::size_t>>();
  if (j.contains("readout")) c.readout = parse_readout(j.at("readout"));
  c.label_fraction = j.value("label_fraction", c.label_fraction);
  if (j.contains("student")) c.student = j.at("student").get<enc2d::Encoder2DConfig>();
  if (j.contains("train")) c.train = j.at("train").get<TrainConfig>();
}

FinetuneModel::FinetuneModel(const enc2d::Encoder2DConfig& student_config,
                             std::size_t num_targets, Readout readout, obj::TaskType task,
                             std::uint64_t seed)
    : student_(student_config, seed), predictor_store_("predictor"), readout_(readout),
      task_(task) {
  if (num_targets == 0) throw ConfigError("finetune: at least one target is required");
  if (readout == Readout::kVirtual && !student_config.use_virtual_node) {
    throw ConfigError("finetune: readout 'vn' requires student.use_virtual_node = true");
  }
  Rng rng(mix_seed(seed, 0x9ead));
  predictor_ = ad::Linear<Real>(predictor_store_, "linear",
                                static_cast<std::size_t>(student_config.hidden_dim), num_targets,
                                student_config.num_layers, rng);
}

ad::Var<Real> FinetuneModel::forward(ad::Tape<Real>& tape,
                                     const enc2d::TokenSequence& tokens) const {
  auto enc = student_.encode(tape, tokens);
  ad::Var<Real> rep =
      readout_ == Readout::kMean ? enc2d::pool_mean(enc.nodes) : enc2d::pool_virtual(enc, tokens);
  return predictor_(tape, rep);
}

std::vector<double> FinetuneModel::predict(const mol::MoleculeRecord& record) const {
  const auto tokens = enc2d::tokenize(record.graph, eval_identifier_seed(record), student_.config());
  ad::Tape<Real> tape(false);
  const auto& out = forward(tape, tokens).value();
  std::vector<double> pred(out.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    pred[k] = static_cast<double>(out[k]);
    if (normalizer_) pred[k] = normalizer_->denormalize(k, pred[k]);
  }
  return pred;
}

std::unique_ptr<FinetuneModel> FinetuneModel::from_checkpoint(const Checkpoint& ckpt) {
  require_stage(ckpt, {Stage::kFinetune}, "finetune model");
  const auto cfg = ckpt.config.at("finetune").get<FinetuneConfig>();
  const auto scfg = ckpt.config.at("student").get<enc2d::Encoder2DConfig>();
  auto model = std::make_unique<FinetuneModel>(scfg, cfg.targets.size(), cfg.readout, cfg.task, 0);
  restore_parameters(ckpt, model->student().params());
  restore_parameters(ckpt, model->predictor_params());
  if (ckpt.extra.contains("normalizer")) {
    const auto& n = ckpt.extra.at("normalizer");
    model->set_normalizer(mol::LabelNormalizer::from_parts(
        n.at("targets").get<std::vector<std::size_t>>(), n.at("mean").get<std::vector<double>>(),
        n.at("std").get<std::vector<double>>()));
  }
  return model;
}

std::unique_ptr<FinetuneModel> make_finetune_model(const FinetuneConfig& config,
                                                   const Checkpoint* student_checkpoint,
                                                   std::uint64_t seed) {
  config.validate();
  if (student_checkpoint == nullptr) {
    return std::make_unique<FinetuneModel>(config.student, config.targets.size(), config.readout,
                                           config.task, seed);
  }
  require_stage(*student_checkpoint,
                {Stage::kDistillGraph, Stage::kDistillNode, Stage::kContrastive}, "finetune");
  const auto scfg = student_checkpoint->config.at("student").get<enc2d::Encoder2DConfig>();
  auto model = std::make_unique<FinetuneModel>(scfg, config.targets.size(), config.readout,
                                               config.task, seed);
  restore_parameters(*student_checkpoint, model->student().params());
  return model;
}

namespace {

struct LabeledSet {
  std::vector<std::size_t> records;              // indices into the source dataset
  std::vector<std::vector<mol::Label>> labels;   // modelled units
};

LabeledSet labeled_subset(const mol::Dataset& data, const std::vector<std::size_t>& targets,
                          const std::optional<mol::LabelNormalizer>& normalizer) {
  LabeledSet out;
  const auto raw = target_labels(data, targets);
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::vector<mol::Label> row = raw[i];
    bool any = false;
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (!row[k]) continue;
      any = true;
      if (normalizer) row[k] = normalizer->normalize(k, *row[k]);
    }
    if (!any) continue;
    out.records.push_back(i);
    out.labels.push_back(std::move(row));
  }
  return out;
}

}  // namespace

TrainResult train_finetune(FinetuneModel& model, const mol::Dataset& train,
                           const mol::Dataset& val, const FinetuneConfig& config,
                           const TrainOptions& options) {
  config.validate();
  if (model.num_targets() != config.targets.size() || model.readout() != config.readout ||
      model.task() != config.task) {
    throw ConfigError("train_finetune: model head does not match the finetune config");
  }
  detail::require_nonempty(train, "finetune training set");
  detail::require_nonempty(val, "finetune validation set");

  const mol::Dataset subset =
      mol::subsample(train, config.label_fraction, mix_seed(config.train.seed, 0x1abe1));
  if (config.task == obj::TaskType::kRegression) {
    model.set_normalizer(mol::LabelNormalizer::fit(subset, config.targets));
  }
  const LabeledSet train_set = labeled_subset(subset, config.targets, model.normalizer());
  const LabeledSet val_set = labeled_subset(val, config.targets, model.normalizer());
  if (train_set.records.empty()) throw DegenerateError("finetune: no labeled training records");
  if (val_set.records.empty()) throw DegenerateError("finetune: no labeled validation records");

  std::vector<enc2d::TokenSequence> val_tokens;
  for (std::size_t i : val_set.records) {
    val_tokens.push_back(enc2d::tokenize(val.records[i].graph,
                                         eval_identifier_seed(val.records[i]),
                                         model.student().config()));
  }

  AdamW<Real> opt(config.train.optimizer, resolve_schedule(config.train, train_set.records.size()));
  const int layers = model.student().config().num_layers;
  opt.add(model.student().params(), layers);
  opt.add(model.predictor_params(), layers);

  const Metric metric = config.selection_metric();
  detail::LoopSpec spec;
  spec.stage = Stage::kFinetune;
  spec.config = &config.train;
  spec.train_size = train_set.records.size();
  spec.higher_is_better = higher_is_better(metric);
  nlohmann::json snap;
  snap["finetune"] = config;
  snap["student"] = model.student().config();
  spec.config_snapshot = nlohmann::ordered_json::parse(snap.dump());

  detail::LoopFns fns;
  fns.stores = {&model.student().params(), &model.predictor_params()};
  fns.batch = [&](std::span<const std::size_t> batch, Rng& rng, std::int64_t step) {
    double sum = 0;
    for (std::size_t pos : batch) {
      const auto& rec = subset.records[train_set.records[pos]];
      const std::uint64_t id_seed =
          config.train.resample_identifiers ? rng.next_u64() : eval_identifier_seed(rec);
      const auto tokens = enc2d::tokenize(rec.graph, id_seed, model.student().config());
      ad::Tape<Real> tape;
      auto loss = obj::finetune_loss(model.forward(tape, tokens),
                                     std::span<const mol::Label>(train_set.labels[pos]),
                                     config.task);
      sum += detail::backward_example(tape, loss, batch.size(), step, rec.id);
    }
    return sum;
  };
  fns.validate = [&] {
    double total = 0;
    for (std::size_t p = 0; p < val_set.records.size(); ++p) {
      ad::Tape<Real> tape(false);
      total += static_cast<double>(
          obj::finetune_loss(model.forward(tape, val_tokens[p]),
                             std::span<const mol::Label>(val_set.labels[p]), config.task)
              .value()
              .item());
    }
    const double loss = total / static_cast<double>(val_set.records.size());
    double score = std::numeric_limits<double>::quiet_NaN();
    try {
      score = evaluate(model, val, config.targets, metric);
    } catch (const DegenerateError&) {
      // Selection falls back to the final epoch.
    }
    return std::pair{loss, score};
  };
  fns.capture = [&](Checkpoint& c) {
    capture_parameters(model.student().params(), c);
    capture_parameters(model.predictor_params(), c);
    if (model.normalizer()) {
      const auto& n = *model.normalizer();
      c.extra["normalizer"] = {{"targets", n.targets()}, {"mean", n.mean()}, {"std", n.std()}};
    }
    c.extra["selection_metric"] = metric_name(metric);
    c.extra["train_records"] = train_set.records.size();
  };
  fns.restore = [&](const Checkpoint& c) {
    restore_parameters(c, model.student().params());
    restore_parameters(c, model.predictor_params());
  };
  return detail::run_training(spec, opt, fns, options);
}

}  // namespace dnd::train
