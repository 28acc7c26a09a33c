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

#include "dnd/trainer/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dnd/util/error.hpp"

namespace dnd::train {

void OptimizerConfig::validate() const {
  std::string problems;
  if (!(lr > 0) || !std::isfinite(lr)) problems += " lr must be > 0;";
  if (!(beta1 >= 0 && beta1 < 1)) problems += " beta1 must be in [0, 1);";
  if (!(beta2 >= 0 && beta2 < 1)) problems += " beta2 must be in [0, 1);";
  if (!(eps > 0)) problems += " eps must be > 0;";
  if (!(weight_decay >= 0)) problems += " weight_decay must be >= 0;";
  if (!(layer_decay > 0 && layer_decay <= 1)) problems += " layer_decay must be in (0, 1];";
  if (!problems.empty()) throw ConfigError("optimizer config:" + problems);
}

void to_json(nlohmann::json& j, const OptimizerConfig& c) {
  j = nlohmann::json{{"lr", c.lr},
                     {"beta1", c.beta1},
                     {"beta2", c.beta2},
                     {"eps", c.eps},
                     {"weight_decay", c.weight_decay},
                     {"layer_decay", c.layer_decay}};
}

void from_json(const nlohmann::json& j, OptimizerConfig& c) {
  c.lr = j.value("lr", c.lr);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.eps = j.value("eps", c.eps);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.layer_decay = j.value("layer_decay", c.layer_decay);
}

void ScheduleConfig::validate() const {
  std::string problems;
  if (total_steps < 1) problems += " total_steps must be >= 1;";
  if (warmup_steps < 0) problems += " warmup_steps must be >= 0;";
  if (warmup_steps >= total_steps && total_steps >= 1) {
    problems += " warmup_steps must be < total_steps;";
  }
  if (!(min_lr_fraction >= 0 && min_lr_fraction <= 1)) {
    problems += " min_lr_fraction must be in [0, 1];";
  }
  if (!(warmup_start_fraction >= 0 && warmup_start_fraction <= 1)) {
    problems += " warmup_start_fraction must be in [0, 1];";
  }
  if (!problems.empty()) throw ConfigError("schedule config:" + problems);
}

double schedule_factor(std::int64_t step, const ScheduleConfig& s) {
  step = std::max<std::int64_t>(step, 0);
  if (step < s.warmup_steps) {
    const double t = static_cast<double>(step) / static_cast<double>(s.warmup_steps);
    return s.warmup_start_fraction + (1.0 - s.warmup_start_fraction) * t;
  }
  const double span = static_cast<double>(s.total_steps - s.warmup_steps);
  const double t = std::min(1.0, static_cast<double>(step - s.warmup_steps) / span);
  return s.min_lr_fraction +
         (1.0 - s.min_lr_fraction) * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

double lr_at_step(std::int64_t step, const OptimizerConfig& optimizer,
                  const ScheduleConfig& schedule, int layer_index, int num_layers) {
  const int depth = std::max(0, num_layers - layer_index);
  return optimizer.lr * schedule_factor(step, schedule) *
         std::pow(optimizer.layer_decay, static_cast<double>(depth));
}

template <typename T>
AdamW<T>::AdamW(OptimizerConfig optimizer, ScheduleConfig schedule)
    : optimizer_(optimizer), schedule_(schedule) {
  optimizer_.validate();
  schedule_.validate();
}

template <typename T>
void AdamW<T>::add(ad::ParameterStore<T>& store, int num_layers) {
  for (ad::Parameter<T>* p : store.all()) {
    Slot s;
    s.param = p;
    s.num_layers = num_layers;
    s.m.assign(p->value.size(), 0.0);
    s.v.assign(p->value.size(), 0.0);
    slots_.push_back(std::move(s));
  }
}

template <typename T>
void AdamW<T>::step() {
  const double b1 = optimizer_.beta1, b2 = optimizer_.beta2;
  const double t = static_cast<double>(step_ + 1);
  const double c1 = 1.0 - std::pow(b1, t);
  const double c2 = 1.0 - std::pow(b2, t);
  for (Slot& s : slots_) {
    ad::Parameter<T>& p = *s.param;
    if (p.frozen) continue;
    const double lr = lr_at_step(step_, optimizer_, schedule_, p.layer_index, s.num_layers);
    const double wd = p.decay ? optimizer_.weight_decay : 0.0;
    const bool has_grad = p.grad.size() == p.value.size();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = has_grad ? static_cast<double>(p.grad[i]) : 0.0;
      double w = static_cast<double>(p.value[i]);
      w -= lr * wd * w;
      s.m[i] = b1 * s.m[i] + (1.0 - b1) * g;
      s.v[i] = b2 * s.v[i] + (1.0 - b2) * g * g;
      w -= lr * (s.m[i] / c1) / (std::sqrt(s.v[i] / c2) + optimizer_.eps);
      p.value[i] = static_cast<T>(w);
    }
  }
  ++step_;
}

template <typename T>
double AdamW<T>::current_lr() const {
  return lr_at_step(step_, optimizer_, schedule_, 0, 0);
}

template <typename T>
void AdamW<T>::restore(std::int64_t step, const std::map<std::string, std::vector<double>>& first,
                       const std::map<std::string, std::vector<double>>& second) {
  for (Slot& s : slots_) {
    auto a = first.find(s.param->name);
    auto b = second.find(s.param->name);
    if (a == first.end() || b == second.end() || a->second.size() != s.m.size() ||
        b->second.size() != s.v.size()) {
      throw IncompatibleError("optimizer restore: moments for '" + s.param->name +
                              "' missing or mis-sized");
    }
    s.m = a->second;
    s.v = b->second;
  }
  step_ = step;
}

template class AdamW<float>;
template class AdamW<double>;

}  // namespace dnd::train
