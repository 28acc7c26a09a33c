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

namespace {

template <typename Reduce>
double per_target_mean(const std::vector<std::vector<double>>& predictions,
                       const std::vector<std::vector<mol::Label>>& labels, const char* name,
                       Reduce reduce) {
  if (predictions.size() != labels.size()) {
    throw DimensionError(std::string(name) + ": predictions and labels differ in length");
  }
  const std::size_t k = labels.empty() ? 0 : labels.front().size();
  double sum = 0;
  std::size_t used = 0;
  for (std::size_t t = 0; t < k; ++t) {
    std::vector<double> errors;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i].size() != k || predictions[i].size() != k) {
        throw DimensionError(std::string(name) + ": ragged prediction or label rows");
      }
      if (labels[i][t]) errors.push_back(predictions[i][t] - *labels[i][t]);
    }
    if (errors.empty()) continue;
    sum += reduce(errors);
    ++used;
  }
  if (used == 0) throw DegenerateError(std::string(name) + ": no labeled entries");
  return sum / static_cast<double>(used);
}

}  // namespace

double mae(const std::vector<std::vector<double>>& predictions,
           const std::vector<std::vector<mol::Label>>& labels) {
  return per_target_mean(predictions, labels, "mae", [](const std::vector<double>& e) {
    double s = 0;
    for (double x : e) s += std::abs(x);
    return s / static_cast<double>(e.size());
  });
}

double rmse(const std::vector<std::vector<double>>& predictions,
            const std::vector<std::vector<mol::Label>>& labels) {
  return per_target_mean(predictions, labels, "rmse", [](const std::vector<double>& e) {
    double s = 0;
    for (double x : e) s += x * x;
    return std::sqrt(s / static_cast<double>(e.size()));
  });
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DimensionError("roc_auc: length mismatch");
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] == 1) {
      pos.push_back(scores[i]);
    } else if (labels[i] == 0) {
      neg.push_back(scores[i]);
    } else {
      throw ValidationError("roc_auc: labels must be 0 or 1");
    }
  }
  if (pos.empty() || neg.empty()) throw DegenerateError("roc_auc: needs both classes");
  double credit = 0;
  for (double p : pos) {
    for (double n : neg) credit += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
  }
  return credit / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

double roc_auc(const std::vector<std::vector<double>>& scores,
               const std::vector<std::vector<mol::Label>>& labels,
               std::vector<std::string>* warnings) {
  if (scores.size() != labels.size()) throw DimensionError("roc_auc: length mismatch");
  const std::size_t k = labels.empty() ? 0 : labels.front().size();
  double sum = 0;
  std::size_t used = 0;
  for (std::size_t t = 0; t < k; ++t) {
    std::vector<double> s;
    std::vector<int> y;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (!labels[i][t]) continue;
      const double v = *labels[i][t];
      if (v != 0.0 && v != 1.0) throw ValidationError("roc_auc: labels must be 0 or 1");
      s.push_back(scores[i][t]);
      y.push_back(static_cast<int>(v));
    }
    try {
      sum += roc_auc(s, y);
      ++used;
    } catch (const DegenerateError&) {
      if (warnings != nullptr) {
        warnings->push_back("roc_auc: target " + std::to_string(t) +
                            " excluded (single class or no labels)");
      }
    }
  }
  if (used == 0) throw DegenerateError("roc_auc: every target has a single class");
  return sum / static_cast<double>(used);
}

std::vector<std::vector<mol::Label>> target_labels(const mol::Dataset& data,
                                                   std::span<const std::size_t> targets) {
  std::vector<std::vector<mol::Label>> out;
  out.reserve(data.size());
  for (const auto& r : data.records) {
    std::vector<mol::Label> row(targets.size());
    for (std::size_t k = 0; k < targets.size(); ++k) {
      if (r.labels && targets[k] < r.labels->size()) row[k] = (*r.labels)[targets[k]];
    }
    out.push_back(std::move(row));
  }
  return out;
}

double evaluate(const FinetuneModel& model, const mol::Dataset& data,
                std::span<const std::size_t> targets, Metric metric,
                std::vector<std::string>* warnings) {
  const bool classification = model.task() == obj::TaskType::kClassification;
  if (classification != (metric == Metric::kRocAuc)) {
    throw ConfigError("evaluate: metric '" + metric_name(metric) + "' does not fit a " +
                      obj::task_type_name(model.task()) + " task");
  }
  if (targets.size() != model.num_targets()) {
    throw DimensionError("evaluate: target list does not match the prediction head");
  }
  detail::require_nonempty(data, "evaluation set");
  std::vector<std::vector<double>> preds;
  preds.reserve(data.size());
  for (const auto& r : data.records) preds.push_back(model.predict(r));
  const auto labels = target_labels(data, targets);
  switch (metric) {
    case Metric::kRmse: return rmse(preds, labels);
    case Metric::kMae: return mae(preds, labels);
    case Metric::kRocAuc: return roc_auc(preds, labels, warnings);
  }
  return 0;
}

double evaluate(const Checkpoint& finetune_checkpoint, const mol::Dataset& data, Metric metric,
                std::vector<std::string>* warnings) {
  const auto model = FinetuneModel::from_checkpoint(finetune_checkpoint);
  const auto targets =
      finetune_checkpoint.config.at("finetune").at("targets").get<std::vector<std::size_t>>();
  return evaluate(*model, data, targets, metric, warnings);
}

}  // namespace dnd::train
