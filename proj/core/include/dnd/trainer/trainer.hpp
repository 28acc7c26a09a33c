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
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dnd/encoder2d/encoder2d.hpp"
#include "dnd/encoder3d/encoder3d.hpp"
#include "dnd/moldata/split.hpp"
#include "dnd/moldata/types.hpp"
#include "dnd/objectives/objectives.hpp"
#include "dnd/trainer/checkpoint.hpp"
#include "dnd/trainer/metrics.hpp"
#include "dnd/trainer/optimizer.hpp"

namespace dnd::train {

// Training precision. Checkpoints record 32-bit parameters.
using Real = float;

struct TrainConfig {
  int epochs = 100;
  int batch_size = 16;
  double warmup_epochs = 5;
  // Overrides warmup_epochs when set.
  std::optional<std::int64_t> warmup_steps;
  double min_lr_fraction = 0.0;
  double warmup_start_fraction = 0.0;
  OptimizerConfig optimizer;
  std::uint64_t seed = 0;
  // Draw fresh node identifiers for every training example; evaluation
  // always uses identifiers seeded by the record id.
  bool resample_identifiers = true;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

std::size_t steps_per_epoch(std::size_t train_size, int batch_size);
// Warmup longer than the run is clamped to total_steps - 1.
ScheduleConfig resolve_schedule(const TrainConfig& config, std::size_t train_size);

// Identifier seed used at evaluation and analysis time.
std::uint64_t eval_identifier_seed(const mol::MoleculeRecord& record);

struct TrainResult {
  // State with the best validation selection score.
  Checkpoint best;
  // Final state; resumable.
  Checkpoint last;
  MetricsLog log;
  int best_epoch = 0;
};

struct TrainOptions {
  // Continue from a `last` checkpoint of the same stage.
  const Checkpoint* resume = nullptr;
  // Best checkpoint of the interrupted run, so selection spans both parts.
  const Checkpoint* resume_best = nullptr;
  // Called after every epoch with the log so far.
  std::function<void(const MetricsRow&)> on_epoch;
  // Called after every epoch with a resumable `last` checkpoint and the
  // current best. Persisting both lets an interrupted run continue exactly.
  std::function<void(const Checkpoint& last, const Checkpoint& best)> on_checkpoint;
};

// ---- Stage 1: denoising pretraining of the 3D teacher ----

struct DenoiseConfig {
  enc3d::Encoder3DConfig teacher;
  TrainConfig train;
  double sigma = obj::kDefaultSigma;

  void validate() const;
};

void to_json(nlohmann::json& j, const DenoiseConfig& c);
void from_json(const nlohmann::json& j, DenoiseConfig& c);

struct DenoiseModel {
  DenoiseModel(const enc3d::Encoder3DConfig& config, std::uint64_t seed);
  // Requires stage denoise.
  static std::unique_ptr<DenoiseModel> from_checkpoint(const Checkpoint& ckpt);

  enc3d::Encoder3D<Real> teacher;
  enc3d::NoiseHead<Real> head;
};

// Throws ValidationError when a record lacks a conformer and NumericError on
// a non-finite loss.
TrainResult train_denoise(DenoiseModel& model, const mol::Dataset& train, const mol::Dataset& val,
                          const DenoiseConfig& config, const TrainOptions& options = {});

// Mean denoising loss over a dataset with noise seeded per record.
double denoise_eval(const DenoiseModel& model, const mol::Dataset& data, double sigma,
                    std::uint64_t seed);

// ---- Stage 2: cross-modal distillation into the 2D student ----

struct DistillConfig {
  enc2d::Encoder2DConfig student;
  obj::DistillVariant variant = obj::DistillVariant::kNode;
  TrainConfig train;

  void validate() const;
};

void to_json(nlohmann::json& j, const DistillConfig& c);
void from_json(const nlohmann::json& j, DistillConfig& c);

struct DistillModel {
  DistillModel(const enc2d::Encoder2DConfig& config, std::size_t teacher_dim, std::uint64_t seed);
  // Requires stage distill-graph or distill-node.
  static std::unique_ptr<DistillModel> from_checkpoint(const Checkpoint& ckpt);

  enc2d::Encoder2D<Real> student;
  obj::ProjectionHead<Real> projection;
};

// Teacher encoder of a denoise checkpoint, frozen. Throws IncompatibleError
// for any other stage.
std::unique_ptr<enc3d::Encoder3D<Real>> load_teacher(const Checkpoint& ckpt);

TrainResult train_distill(DistillModel& model, const enc3d::Encoder3D<Real>& teacher,
                          const mol::Dataset& train, const mol::Dataset& val,
                          const DistillConfig& config, const TrainOptions& options = {});
TrainResult train_distill(DistillModel& model, const Checkpoint& teacher_checkpoint,
                          const mol::Dataset& train, const mol::Dataset& val,
                          const DistillConfig& config, const TrainOptions& options = {});

double distill_eval(const DistillModel& model, const enc3d::Encoder3D<Real>& teacher,
                    const mol::Dataset& data, obj::DistillVariant variant);

// ---- Stage 3: finetuning ----

enum class Readout { kMean, kVirtual };
Readout parse_readout(const std::string& name);  // "mp" or "vn"
std::string readout_name(Readout r);

enum class Metric { kRmse, kMae, kRocAuc };
Metric parse_metric(const std::string& name);
std::string metric_name(Metric m);
bool higher_is_better(Metric m);

struct FinetuneConfig {
  obj::TaskType task = obj::TaskType::kRegression;
  std::vector<std::size_t> targets = {0};
  Readout readout = Readout::kMean;
  double label_fraction = 1.0;
  // Student architecture for random initialization; a pretrained
  // checkpoint supplies its own.
  enc2d::Encoder2DConfig student;
  TrainConfig train;

  FinetuneConfig() { train.optimizer.layer_decay = 0.65; }
  void validate() const;
  Metric selection_metric() const;
};

void to_json(nlohmann::json& j, const FinetuneConfig& c);
void from_json(const nlohmann::json& j, FinetuneConfig& c);

class FinetuneModel {
 public:
  FinetuneModel(const enc2d::Encoder2DConfig& student_config, std::size_t num_targets,
                Readout readout, obj::TaskType task, std::uint64_t seed);
  // Requires stage finetune.
  static std::unique_ptr<FinetuneModel> from_checkpoint(const Checkpoint& ckpt);

  enc2d::Encoder2D<Real>& student() { return student_; }
  const enc2d::Encoder2D<Real>& student() const { return student_; }
  ad::ParameterStore<Real>& predictor_params() { return predictor_store_; }
  const ad::ParameterStore<Real>& predictor_params() const { return predictor_store_; }
  Readout readout() const { return readout_; }
  obj::TaskType task() const { return task_; }
  std::size_t num_targets() const { return predictor_.out_features(); }

  // Regression targets are modelled in normalized units when set.
  const std::optional<mol::LabelNormalizer>& normalizer() const { return normalizer_; }
  void set_normalizer(mol::LabelNormalizer n) { normalizer_ = std::move(n); }

  // Raw head output, shape (1, num_targets).
  ad::Var<Real> forward(ad::Tape<Real>& tape, const enc2d::TokenSequence& tokens) const;
  // De-normalized predictions (regression) or logits (classification).
  std::vector<double> predict(const mol::MoleculeRecord& record) const;

 private:
  enc2d::Encoder2D<Real> student_;
  ad::ParameterStore<Real> predictor_store_;
  ad::Linear<Real> predictor_;
  Readout readout_;
  obj::TaskType task_;
  std::optional<mol::LabelNormalizer> normalizer_;
};

// Fresh head on either a random student (RandInit) or the student of a
// distill or contrastive checkpoint. Throws ConfigError for +vn on a
// student without a virtual node.
std::unique_ptr<FinetuneModel> make_finetune_model(const FinetuneConfig& config,
                                                   const Checkpoint* student_checkpoint,
                                                   std::uint64_t seed);

// Selects the label_fraction subset, fits the normalizer, trains every
// parameter. Best epoch by validation metric.
TrainResult train_finetune(FinetuneModel& model, const mol::Dataset& train,
                           const mol::Dataset& val, const FinetuneConfig& config,
                           const TrainOptions& options = {});

// ---- Evaluation ----

// Mean over targets of per-target values; missing labels excluded.
double mae(const std::vector<std::vector<double>>& predictions,
           const std::vector<std::vector<mol::Label>>& labels);
double rmse(const std::vector<std::vector<double>>& predictions,
            const std::vector<std::vector<mol::Label>>& labels);
// Pairwise ranking with 0.5 credit for ties. Throws DegenerateError unless
// both classes occur.
double roc_auc(std::span<const double> scores, std::span<const int> labels);
// Averaged over targets with both classes; others are skipped and named in
// warnings. Throws DegenerateError when every target is skipped.
double roc_auc(const std::vector<std::vector<double>>& scores,
               const std::vector<std::vector<mol::Label>>& labels,
               std::vector<std::string>* warnings = nullptr);

// Labels of the model's targets in original units.
std::vector<std::vector<mol::Label>> target_labels(const mol::Dataset& data,
                                                   std::span<const std::size_t> targets);

// Throws ConfigError when the metric does not fit the task.
double evaluate(const FinetuneModel& model, const mol::Dataset& data,
                std::span<const std::size_t> targets, Metric metric,
                std::vector<std::string>* warnings = nullptr);
double evaluate(const Checkpoint& finetune_checkpoint, const mol::Dataset& data, Metric metric,
                std::vector<std::string>* warnings = nullptr);

// ---- Contrastive baseline ----

struct ContrastiveConfig {
  enc2d::Encoder2DConfig student;
  enc3d::Encoder3DConfig teacher;
  double temperature = obj::kDefaultTemperature;
  TrainConfig train;

  void validate() const;
};

void to_json(nlohmann::json& j, const ContrastiveConfig& c);
void from_json(const nlohmann::json& j, ContrastiveConfig& c);

struct ContrastiveModel {
  ContrastiveModel(const enc2d::Encoder2DConfig& student_config,
                   const enc3d::Encoder3DConfig& teacher_config, std::uint64_t seed);
  static std::unique_ptr<ContrastiveModel> from_checkpoint(const Checkpoint& ckpt);

  enc2d::Encoder2D<Real> student;
  enc3d::Encoder3D<Real> teacher;
  obj::ProjectionHead<Real> projection;
};

// Both encoders train jointly. Batches never hold a single molecule: a
// trailing singleton joins the previous batch.
TrainResult train_contrastive(ContrastiveModel& model, const mol::Dataset& train,
                              const mol::Dataset& val, const ContrastiveConfig& config,
                              const TrainOptions& options = {});

}  // namespace dnd::train
