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

#include "dnd/autodiff/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dnd/util/error.hpp"
#include "dnd/util/rng.hpp"

namespace dnd::ad {
namespace {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

double eval_scalar(const ParamFn& f) {
  Tape<double> tape;
  Var<double> out = f(tape);
  if (out.value().size() != 1) {
    throw ContractError("grad_check: function output has shape " +
                        shape_string(out.value().shape()) + ", expected a scalar");
  }
  return out.value()[0];
}

}  // namespace

GradCheckResult grad_check_params(const ParamFn& f, std::span<Parameter<double>* const> params,
                                  double h, std::size_t max_coordinates, Rng* rng) {
  for (Parameter<double>* p : params) p->zero_grad();
  {
    Tape<double> tape;
    Var<double> out = f(tape);
    if (out.value().size() != 1) {
      throw ContractError("grad_check: function output has shape " +
                          shape_string(out.value().shape()) + ", expected a scalar");
    }
    tape.backward(out);
    tape.accumulate_param_grads();
  }

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k]->frozen) continue;
    for (std::size_t i = 0; i < params[k]->value.size(); ++i) coords.emplace_back(k, i);
  }
  if (max_coordinates != 0 && coords.size() > max_coordinates) {
    if (rng == nullptr) throw ContractError("grad_check_params: sampling requires an rng");
    rng->shuffle(coords);
    coords.resize(max_coordinates);
  }

  GradCheckResult result;
  for (auto [k, i] : coords) {
    Parameter<double>& p = *params[k];
    const double saved = p.value[i];
    p.value[i] = saved + h;
    const double up = eval_scalar(f);
    p.value[i] = saved - h;
    const double down = eval_scalar(f);
    p.value[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double err = relative_error(p.grad[i], numeric);
    ++result.coordinates_checked;
    if (err > result.max_relative_error || result.worst_location.empty()) {
      result.max_relative_error = err;
      std::ostringstream where;
      where << p.name << " [" << i << "] analytic " << p.grad[i] << " numeric " << numeric;
      result.worst_location = where.str();
    }
  }
  return result;
}

GradCheckResult grad_check(const InputFn& f, std::vector<Array<double>> inputs, double h) {
  ParameterStore<double> store;
  std::vector<Parameter<double>*> params;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    params.push_back(&store.add("input " + std::to_string(k), 0, std::move(inputs[k])));
  }
  ParamFn wrapped = [&](Tape<double>& tape) {
    std::vector<Var<double>> vars;
    vars.reserve(params.size());
    for (Parameter<double>* p : params) vars.push_back(tape.param(*p));
    return f(tape, vars);
  };
  return grad_check_params(wrapped, params, h);
}

}  // namespace dnd::ad
