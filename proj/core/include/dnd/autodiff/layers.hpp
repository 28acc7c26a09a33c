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

#include <string>

#include "dnd/autodiff/ops.hpp"
#include "dnd/util/rng.hpp"

// Parameter bundles shared by the encoders and heads.
namespace dnd::ad {

enum class Activation { kSilu, kRelu };

Activation parse_activation(const std::string& name);
const char* activation_name(Activation a);

template <typename T>
Var<T> activate(Var<T> x, Activation a) {
  return a == Activation::kSilu ? silu(x) : relu(x);
}

// Gaussian init with std sqrt(2 / (fan_in + fan_out)).
template <typename T>
Array<T> glorot_normal(std::size_t fan_in, std::size_t fan_out, Rng& rng);

template <typename T>
Array<T> normal_array(Shape shape, double std, Rng& rng);

template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore<T>& store, const std::string& name, std::size_t in, std::size_t out,
         int layer_index, Rng& rng, bool bias = true);

  Var<T> operator()(Tape<T>& tape, Var<T> x) const;

  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }
  const Parameter<T>& weight() const { return *weight_; }

 private:
  const Parameter<T>* weight_ = nullptr;
  const Parameter<T>* bias_ = nullptr;
  std::size_t in_ = 0;
  std::size_t out_ = 0;
};

template <typename T>
class LayerNormParams {
 public:
  LayerNormParams() = default;
  LayerNormParams(ParameterStore<T>& store, const std::string& name, std::size_t dim,
                  int layer_index);

  Var<T> operator()(Tape<T>& tape, Var<T> x) const;

 private:
  const Parameter<T>* gain_ = nullptr;
  const Parameter<T>* bias_ = nullptr;
};

}  // namespace dnd::ad
