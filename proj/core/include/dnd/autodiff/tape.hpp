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
#include <vector>

#include "dnd/autodiff/array.hpp"
#include "dnd/autodiff/parameter.hpp"

namespace dnd::ad {

template <typename T>
class Tape;

// Handle to a value recorded on a tape. Cheap to copy; valid while the tape
// lives.
template <typename T>
struct Var {
  Tape<T>* tape = nullptr;
  std::uint32_t id = 0;

  const Array<T>& value() const { return tape->value(*this); }
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const { return tape->requires_grad(*this); }
};

// Wengert list for one computation. Nodes are appended in evaluation order,
// so reverse order is a valid topological order for backward.
//
// A tape is owned by a single thread. Parameters are read through pointers
// and never written during forward; gradients land on the tape first and
// reach Parameter::grad only through accumulate_param_grads().
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::uint32_t self)>;

  // With gradients disabled every node is recorded as a constant, which
  // makes inference skip all backward bookkeeping.
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) { nodes_.reserve(256); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Array<T> value);
  Var<T> input(Array<T> value, bool requires_grad = true);
  Var<T> param(const Parameter<T>& p);
  Var<T> push(Array<T> value, bool requires_grad, BackwardFn backward);

  const Array<T>& value(Var<T> v) const { return value(v.id); }
  const Array<T>& value(std::uint32_t id) const;
  bool requires_grad(Var<T> v) const { return nodes_[v.id].requires_grad; }
  bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }

  // Gradient buffer of a node, allocated (zeroed) on first use.
  Array<T>& grad(std::uint32_t id);
  bool has_grad(std::uint32_t id) const { return nodes_[id].has_grad; }
  const Array<T>* grad_if_present(Var<T> v) const;

  // Seeds d(root)/d(root) = 1 and propagates. Root must hold one value.
  void backward(Var<T> root);

  // Adds leaf gradients into the Parameter::grad of every non-frozen
  // parameter read by this tape. Call after backward.
  void accumulate_param_grads() const;

  std::size_t size() const { return nodes_.size(); }
  bool grad_enabled() const { return grad_enabled_; }

 private:
  struct Node {
    Array<T> owned;
    const Array<T>* external = nullptr;
    Array<T> grad;
    bool has_grad = false;
    bool requires_grad = false;
    const Parameter<T>* param = nullptr;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  bool grad_enabled_ = true;
};

}  // namespace dnd::ad
