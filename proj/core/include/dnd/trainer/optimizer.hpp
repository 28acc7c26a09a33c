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
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dnd/autodiff/parameter.hpp"

namespace dnd::train {

struct OptimizerConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.05;
  double layer_decay = 1.0;

  void validate() const;
};

void to_json(nlohmann::json& j, const OptimizerConfig& c);
void from_json(const nlohmann::json& j, OptimizerConfig& c);

// Step-based schedule: linear warmup from warmup_start_fraction * peak to
// peak, then cosine decay to min_lr_fraction * peak at total_steps.
struct ScheduleConfig {
  std::int64_t total_steps = 1;
  std::int64_t warmup_steps = 0;
  double min_lr_fraction = 0.0;
  double warmup_start_fraction = 0.0;

  void validate() const;
};

// Learning-rate multiplier in [0, 1] before layer decay.
double schedule_factor(std::int64_t step, const ScheduleConfig& schedule);

// peak * schedule_factor * layer_decay^(num_layers - layer_index).
double lr_at_step(std::int64_t step, const OptimizerConfig& optimizer,
                  const ScheduleConfig& schedule, int layer_index, int num_layers);

// Decoupled weight decay Adam:
//   p <- p - lr * wd * p
//   p <- p - lr * m_hat / (sqrt(v_hat) + eps)
// Parameters with decay == false skip the first line; frozen ones are skipped.
template <typename T>
class AdamW {
 public:
  AdamW(OptimizerConfig optimizer, ScheduleConfig schedule);

  // Registers every parameter of a store. num_layers anchors layer decay.
  void add(ad::ParameterStore<T>& store, int num_layers);

  // One update from the current Parameter::grad values, then step() += 1.
  void step();
  std::int64_t steps_taken() const { return step_; }
  // LR of the top layer at the next step.
  double current_lr() const;

  const OptimizerConfig& optimizer() const { return optimizer_; }
  const ScheduleConfig& schedule() const { return schedule_; }

  struct Slot {
    ad::Parameter<T>* param = nullptr;
    int num_layers = 0;
    std::vector<double> m;
    std::vector<double> v;
  };
  const std::vector<Slot>& slots() const { return slots_; }

  // Moment and step restore. Throws IncompatibleError on missing or
  // mis-sized moments.
  void restore(std::int64_t step, const std::map<std::string, std::vector<double>>& first,
               const std::map<std::string, std::vector<double>>& second);

 private:
  OptimizerConfig optimizer_;
  ScheduleConfig schedule_;
  std::vector<Slot> slots_;
  std::int64_t step_ = 0;
};

}  // namespace dnd::train
