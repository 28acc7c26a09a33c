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

#include "dnd/autodiff/tape.hpp"

#include "dnd/util/error.hpp"

namespace dnd::ad {

template <typename T>
Var<T> Tape<T>::push(Array<T> value, bool requires_grad, BackwardFn backward) {
  Node& n = nodes_.emplace_back();
  n.owned = std::move(value);
  n.requires_grad = requires_grad && grad_enabled_;
  if (n.requires_grad) n.backward = std::move(backward);
  return Var<T>{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <typename T>
Var<T> Tape<T>::constant(Array<T> value) {
  return push(std::move(value), false, {});
}

template <typename T>
Var<T> Tape<T>::input(Array<T> value, bool requires_grad) {
  return push(std::move(value), requires_grad, {});
}

template <typename T>
Var<T> Tape<T>::param(const Parameter<T>& p) {
  Node& n = nodes_.emplace_back();
  n.owned = Array<T>(Shape{0});
  n.external = &p.value;
  n.requires_grad = grad_enabled_ && !p.frozen;
  if (n.requires_grad) n.param = &p;
  return Var<T>{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

template <typename T>
const Array<T>& Tape<T>::value(std::uint32_t id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.owned;
}

template <typename T>
Array<T>& Tape<T>::grad(std::uint32_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Array<T>(value(id).shape());
    n.has_grad = true;
  }
  return n.grad;
}

template <typename T>
const Array<T>* Tape<T>::grad_if_present(Var<T> v) const {
  const Node& n = nodes_[v.id];
  return n.has_grad ? &n.grad : nullptr;
}

template <typename T>
void Tape<T>::backward(Var<T> root) {
  if (root.tape != this) throw ContractError("backward: variable belongs to another tape");
  if (value(root).size() != 1) {
    throw ContractError("backward: root must be scalar, got shape " +
                        shape_string(value(root).shape()));
  }
  if (!nodes_[root.id].requires_grad) return;
  grad(root.id)[0] += T(1);
  for (std::uint32_t id = root.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.has_grad && n.requires_grad && n.backward) n.backward(*this, id);
  }
}

template <typename T>
void Tape<T>::accumulate_param_grads() const {
  for (const Node& n : nodes_) {
    if (n.param == nullptr || !n.has_grad) continue;
    Array<T>& dst = n.param->grad;
    if (dst.shape() != n.grad.shape()) dst = Array<T>(n.grad.shape());
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += n.grad[i];
  }
}

template class Tape<float>;
template class Tape<double>;

}  // namespace dnd::ad
