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

#include "dnd/autodiff/parameter.hpp"

#include "dnd/util/error.hpp"

namespace dnd::ad {

template <typename T>
bool Parameter<T>::has_nonzero_grad() const {
  for (T g : grad.values()) {
    if (g != T(0)) return true;
  }
  return false;
}

template <typename T>
Parameter<T>& ParameterStore<T>::add(const std::string& name, int layer_index, Array<T> init) {
  std::string full = prefix_.empty() ? name : prefix_ + "/" + name;
  if (find(full) != nullptr) throw ContractError("duplicate parameter name '" + full + "'");
  if (layer_index < 0) throw ContractError("negative layer index for '" + full + "'");
  Parameter<T>& p = params_.emplace_back();
  p.name = std::move(full);
  p.layer_index = layer_index;
  p.decay = init.rank() >= 2;
  p.grad = Array<T>(init.shape());
  p.value = std::move(init);
  return p;
}

template <typename T>
Parameter<T>* ParameterStore<T>::find(const std::string& full_name) {
  for (auto& p : params_) {
    if (p.name == full_name) return &p;
  }
  return nullptr;
}

template <typename T>
const Parameter<T>* ParameterStore<T>::find(const std::string& full_name) const {
  for (const auto& p : params_) {
    if (p.name == full_name) return &p;
  }
  return nullptr;
}

template <typename T>
std::size_t ParameterStore<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <typename T>
std::vector<Parameter<T>*> ParameterStore<T>::all() {
  std::vector<Parameter<T>*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(&p);
  return out;
}

template <typename T>
std::vector<const Parameter<T>*> ParameterStore<T>::all() const {
  std::vector<const Parameter<T>*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(&p);
  return out;
}

template <typename T>
void ParameterStore<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template <typename T>
void ParameterStore<T>::set_frozen(bool frozen) {
  for (auto& p : params_) p.frozen = frozen;
}

template struct Parameter<float>;
template struct Parameter<double>;
template class ParameterStore<float>;
template class ParameterStore<double>;

}  // namespace dnd::ad
