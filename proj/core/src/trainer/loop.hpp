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

// Shared epoch loop for every training stage.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dnd/trainer/trainer.hpp"
#include "dnd/util/rng.hpp"

namespace dnd::train::detail {

struct LoopSpec {
  Stage stage = Stage::kDenoise;
  const TrainConfig* config = nullptr;
  std::size_t train_size = 0;
  std::size_t min_batch = 1;
  bool higher_is_better = false;
  nlohmann::ordered_json config_snapshot;
};

struct LoopFns {
  // Returns the summed loss of the batch; gradients land in Parameter::grad
  // already divided by the batch size.
  std::function<double(std::span<const std::size_t> batch, Rng& rng, std::int64_t step)> batch;
  // Returns {validation loss, selection score}.
  std::function<std::pair<double, double>()> validate;
  // Appends model parameters and stage-specific metadata.
  std::function<void(Checkpoint&)> capture;
  std::function<void(const Checkpoint&)> restore;
  std::vector<ad::ParameterStore<Real>*> stores;
};

std::vector<std::vector<std::size_t>> make_batches(std::span<const std::size_t> order,
                                                   std::size_t batch_size, std::size_t min_batch);

TrainResult run_training(const LoopSpec& spec, AdamW<Real>& optimizer, const LoopFns& fns,
                         const TrainOptions& options);

// Backward of loss / batch_size and accumulation into Parameter::grad.
// Returns the loss value; throws NumericError naming the record when it is
// not finite.
double backward_example(ad::Tape<Real>& tape, ad::Var<Real> loss, std::size_t batch_size,
                        std::int64_t step, const std::string& record_id);

void require_conformers(const mol::Dataset& data, const std::string& consumer);
void require_nonempty(const mol::Dataset& data, const std::string& what);

}  // namespace dnd::train::detail
