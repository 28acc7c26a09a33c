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

#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "dnd/autodiff/array.hpp"

namespace dnd::ad {

template <typename T>
struct Parameter {
  std::string name;  // e.g. "encoder2d/layer3/attn/wq"
  int layer_index = 0;
  Array<T> value;
  // Accumulator written by Tape::accumulate_param_grads, hence mutable:
  // forward passes only need a const model.
  mutable Array<T> grad;
  // Frozen parameters enter a tape as constants; backward never touches them.
  bool frozen = false;
  // Rank-1 vectors (biases, norm gains) are exempt from weight decay.
  bool decay = true;

  void zero_grad() const { grad = Array<T>(value.shape()); }
  bool has_nonzero_grad() const;
};

// Owns the parameters of one model. Addresses are stable for the lifetime of
// the store.
template <typename T>
class ParameterStore {
 public:
  explicit ParameterStore(std::string prefix = {}) : prefix_(std::move(prefix)) {}

  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;
  ParameterStore(ParameterStore&&) = default;
  ParameterStore& operator=(ParameterStore&&) = default;

  // Registers `prefix/name`. Throws ContractError on duplicate names.
  Parameter<T>& add(const std::string& name, int layer_index, Array<T> init);

  Parameter<T>* find(const std::string& full_name);
  const Parameter<T>* find(const std::string& full_name) const;

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  const std::string& prefix() const { return prefix_; }

  std::vector<Parameter<T>*> all();
  std::vector<const Parameter<T>*> all() const;

  void zero_grad();
  void set_frozen(bool frozen);

 private:
  std::string prefix_;
  std::deque<Parameter<T>> params_;
};

}  // namespace dnd::ad
