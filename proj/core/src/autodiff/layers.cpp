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

#include "dnd/autodiff/layers.hpp"

#include <cmath>

#include "dnd/util/error.hpp"

namespace dnd::ad {

Activation parse_activation(const std::string& name) {
  if (name == "silu") return Activation::kSilu;
  if (name == "relu") return Activation::kRelu;
  throw ConfigError("unknown activation '" + name + "' (expected silu or relu)");
}

const char* activation_name(Activation a) {
  return a == Activation::kSilu ? "silu" : "relu";
}

template <typename T>
Array<T> normal_array(Shape shape, double std, Rng& rng) {
  Array<T> out(std::move(shape));
  for (T& v : out.values()) v = static_cast<T>(std * rng.normal());
  return out;
}

template <typename T>
Array<T> glorot_normal(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double std = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
  return normal_array<T>(Shape{fan_in, fan_out}, std, rng);
}

template <typename T>
Linear<T>::Linear(ParameterStore<T>& store, const std::string& name, std::size_t in,
                  std::size_t out, int layer_index, Rng& rng, bool bias)
    : in_(in), out_(out) {
  weight_ = &store.add(name + "/w", layer_index, glorot_normal<T>(in, out, rng));
  if (bias) bias_ = &store.add(name + "/b", layer_index, Array<T>(Shape{out}));
}

template <typename T>
Var<T> Linear<T>::operator()(Tape<T>& tape, Var<T> x) const {
  Var<T> y = matmul(x, tape.param(*weight_));
  return bias_ ? add_row(y, tape.param(*bias_)) : y;
}

template <typename T>
LayerNormParams<T>::LayerNormParams(ParameterStore<T>& store, const std::string& name,
                                    std::size_t dim, int layer_index) {
  gain_ = &store.add(name + "/gain", layer_index, Array<T>(Shape{dim}, T(1)));
  bias_ = &store.add(name + "/bias", layer_index, Array<T>(Shape{dim}));
}

template <typename T>
Var<T> LayerNormParams<T>::operator()(Tape<T>& tape, Var<T> x) const {
  return layer_norm(x, tape.param(*gain_), tape.param(*bias_));
}

template Array<float> normal_array<float>(Shape, double, Rng&);
template Array<double> normal_array<double>(Shape, double, Rng&);
template Array<float> glorot_normal<float>(std::size_t, std::size_t, Rng&);
template Array<double> glorot_normal<double>(std::size_t, std::size_t, Rng&);
template class Linear<float>;
template class Linear<double>;
template class LayerNormParams<float>;
template class LayerNormParams<double>;

}  // namespace dnd::ad
