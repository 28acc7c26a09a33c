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

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dnd/autodiff/ops.hpp"

namespace dnd {
class Rng;
}

namespace dnd::ad {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_location;  // "input 1 [7]" or "<param name> [3]"
  std::size_t coordinates_checked = 0;
};

// Builds a scalar from the given inputs on a fresh tape.
using InputFn = std::function<Var<double>(Tape<double>&, std::span<const Var<double>>)>;
// Builds a scalar reading model parameters through Tape::param.
using ParamFn = std::function<Var<double>(Tape<double>&)>;

// Compares the reverse-mode gradient against central differences with step h.
// Relative error per coordinate is |a - n| / max(|a|, |n|, 1e-6). The floor
// sits above central-difference roundoff (about 1e-11 for O(1) losses), so
// structurally zero gradients do not register as failures. Only 64-bit
// precision is supported; finite differences at 32-bit are not meaningful.
// Throws ContractError when the function is not scalar-valued.
GradCheckResult grad_check(const InputFn& f, std::vector<Array<double>> inputs,
                           double h = 1e-5);

// Same, with respect to parameters. When `max_coordinates` is smaller than
// the total parameter count, that many coordinates are sampled with `rng`.
GradCheckResult grad_check_params(const ParamFn& f, std::span<Parameter<double>* const> params,
                                  double h = 1e-5, std::size_t max_coordinates = 0,
                                  Rng* rng = nullptr);

}  // namespace dnd::ad
