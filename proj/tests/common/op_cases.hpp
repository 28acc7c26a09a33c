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


// Registry of differentiable operations for randomized gradient checks.
// Each case draws fresh inputs from the supplied Rng and wraps the op in a
// fixed random linear probe so every output coordinate affects the scalar.

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dnd/autodiff/grad_check.hpp"
#include "dnd/autodiff/ops.hpp"
#include "dnd/util/rng.hpp"
#include "test_util.hpp"

namespace dnd::testing {

using ad::Array;
using ad::Tape;
using ad::Var;
using VarD = Var<double>;

// sum(out * C) with C fixed by the output shape.
inline VarD probe(VarD out) {
  Rng rng(0x5eed + out.value().size());
  Array<double> c(out.shape());
  for (auto& v : c.storage()) v = rng.normal();
  return ad::sum_all(ad::mul(out, out.tape->constant(std::move(c))));
}

struct OpCase {
  std::string name;
  std::function<std::vector<Array<double>>(Rng&)> inputs;
  ad::InputFn fn;
};

inline std::vector<OpCase> op_cases() {
  using S = std::span<const VarD>;
  auto r = [](ad::Shape s, double scale = 1.0) {
    return [s, scale](Rng& rng) { return std::vector<Array<double>>{random_array(s, rng, scale)}; };
  };
  auto r2 = [](ad::Shape a, ad::Shape b) {
    return [a, b](Rng& rng) {
      return std::vector<Array<double>>{random_array(a, rng), random_array(b, rng)};
    };
  };
  std::vector<OpCase> cases;
  cases.push_back({"matmul", r2({3, 4}, {4, 2}),
                   [](Tape<double>&, S x) { return probe(ad::matmul(x[0], x[1])); }});
  cases.push_back({"transpose", r({3, 5}),
                   [](Tape<double>&, S x) { return probe(ad::transpose(x[0])); }});
  cases.push_back({"add", r2({3, 4}, {3, 4}),
                   [](Tape<double>&, S x) { return probe(ad::add(x[0], x[1])); }});
  cases.push_back({"sub", r2({3, 4}, {3, 4}),
                   [](Tape<double>&, S x) { return probe(ad::sub(x[0], x[1])); }});
  cases.push_back({"mul", r2({3, 4}, {3, 4}),
                   [](Tape<double>&, S x) { return probe(ad::mul(x[0], x[1])); }});
  cases.push_back({"scale", r({2, 3}),
                   [](Tape<double>&, S x) { return probe(ad::scale(x[0], -1.7)); }});
  cases.push_back({"add_row", r2({4, 3}, {3}),
                   [](Tape<double>&, S x) { return probe(ad::add_row(x[0], x[1])); }});
  cases.push_back({"mul_rows", r2({4, 3}, {4, 1}),
                   [](Tape<double>&, S x) { return probe(ad::mul_rows(x[0], x[1])); }});
  cases.push_back({"silu", r({3, 4}, 2.0),
                   [](Tape<double>&, S x) { return probe(ad::silu(x[0])); }});
  cases.push_back({"relu", r({3, 4}),
                   [](Tape<double>&, S x) { return probe(ad::relu(x[0])); }});
  cases.push_back({"square", r({3, 4}),
                   [](Tape<double>&, S x) { return probe(ad::square(x[0])); }});
  cases.push_back({"concat", r2({3, 2}, {3, 4}), [](Tape<double>&, S x) {
                     return probe(ad::concat<double>({x[0], x[1]}));
                   }});
  cases.push_back({"concat_rows", r2({2, 3}, {4, 3}), [](Tape<double>&, S x) {
                     return probe(ad::concat_rows<double>(x));
                   }});
  cases.push_back({"slice_cols", r({3, 6}),
                   [](Tape<double>&, S x) { return probe(ad::slice_cols(x[0], 2, 3)); }});
  cases.push_back({"sum_axis0", r({3, 4}),
                   [](Tape<double>&, S x) { return probe(ad::sum_axis(x[0], 0)); }});
  cases.push_back({"sum_axis1", r({3, 4}),
                   [](Tape<double>&, S x) { return probe(ad::sum_axis(x[0], 1)); }});
  cases.push_back({"mean_axis0", r({3, 4}),
                   [](Tape<double>&, S x) { return probe(ad::mean_axis(x[0], 0)); }});
  cases.push_back({"mean_axis1", r({3, 4}),
                   [](Tape<double>&, S x) { return probe(ad::mean_axis(x[0], 1)); }});
  cases.push_back({"sum_all", r({3, 4}),
                   [](Tape<double>&, S x) { return ad::sum_all(ad::square(x[0])); }});
  cases.push_back({"mean_all", r({3, 4}),
                   [](Tape<double>&, S x) { return ad::mean_all(ad::square(x[0])); }});
  cases.push_back({"gather_rows", r({4, 3}), [](Tape<double>&, S x) {
                     static const std::vector<std::uint32_t> idx = {3, 0, 0, 2, 3};
                     return probe(ad::gather_rows(x[0], std::span<const std::uint32_t>(idx)));
                   }});
  cases.push_back({"scatter_add_rows", r({5, 3}), [](Tape<double>&, S x) {
                     static const std::vector<std::uint32_t> idx = {1, 0, 1, 3, 1};
                     return probe(ad::scatter_add_rows(4, std::span<const std::uint32_t>(idx), x[0]));
                   }});
  cases.push_back({"select", r({3, 4}), [](Tape<double>&, S x) {
                     static const std::vector<std::uint32_t> idx = {0, 5, 5, 11};
                     return probe(ad::select(x[0], std::span<const std::uint32_t>(idx)));
                   }});
  cases.push_back({"softmax_rows", r({3, 5}, 2.0),
                   [](Tape<double>&, S x) { return probe(ad::softmax_rows(x[0])); }});
  cases.push_back({"softmax_rows_masked", r({3, 4}, 2.0), [](Tape<double>&, S x) {
                     static const std::vector<std::uint8_t> mask = {1, 0, 1, 1, 0, 1, 1, 1,
                                                                    1, 1, 0, 0};
                     return probe(ad::softmax_rows(x[0], std::span<const std::uint8_t>(mask)));
                   }});
  cases.push_back({"log_softmax_rows", r({3, 5}, 2.0),
                   [](Tape<double>&, S x) { return probe(ad::log_softmax_rows(x[0])); }});
  cases.push_back({"l2_normalize_rows", r({3, 4}),
                   [](Tape<double>&, S x) { return probe(ad::l2_normalize_rows(x[0])); }});
  cases.push_back({"layer_norm",
                   [](Rng& rng) {
                     return std::vector<Array<double>>{random_array({3, 5}, rng),
                                                       random_array({5}, rng),
                                                       random_array({5}, rng)};
                   },
                   [](Tape<double>&, S x) { return probe(ad::layer_norm(x[0], x[1], x[2])); }});
  cases.push_back({"mse", r2({3, 4}, {3, 4}),
                   [](Tape<double>&, S x) { return ad::mse(x[0], x[1]); }});
  cases.push_back({"l1", r2({3, 4}, {3, 4}),
                   [](Tape<double>&, S x) { return ad::l1(x[0], x[1]); }});
  cases.push_back({"bce_with_logits",
                   [](Rng& rng) {
                     Array<double> t({3, 2});
                     for (auto& v : t.storage()) v = rng.uniform();
                     return std::vector<Array<double>>{random_array({3, 2}, rng, 2.0), t};
                   },
                   [](Tape<double>&, S x) {
                     static const std::vector<std::uint8_t> mask = {1, 1, 0, 1, 1, 0};
                     return ad::bce_with_logits(x[0], x[1], std::span<const std::uint8_t>(mask));
                   }});
  return cases;
}

}  // namespace dnd::testing
