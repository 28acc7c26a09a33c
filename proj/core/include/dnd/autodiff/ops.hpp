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
#include <cstdint>
#include <span>
#include <vector>

#include "dnd/autodiff/tape.hpp"

// Differentiable operations. Shapes must match exactly except where an op
// documents otherwise: add_row and layer_norm broadcast a vector along the
// trailing axis, scale multiplies by a constant scalar, and mul_rows scales
// each row by its own (differentiable) scalar.
namespace dnd::ad {

template <typename T> Var<T> matmul(Var<T> a, Var<T> b);
template <typename T> Var<T> transpose(Var<T> a);

template <typename T> Var<T> add(Var<T> a, Var<T> b);
template <typename T> Var<T> sub(Var<T> a, Var<T> b);
template <typename T> Var<T> mul(Var<T> a, Var<T> b);
template <typename T> Var<T> scale(Var<T> a, T s);
// a: (m, n), bias: (n)
template <typename T> Var<T> add_row(Var<T> a, Var<T> bias);
// a: (m, n), s: (m, 1) or (m)
template <typename T> Var<T> mul_rows(Var<T> a, Var<T> s);

template <typename T> Var<T> silu(Var<T> a);
template <typename T> Var<T> relu(Var<T> a);
template <typename T> Var<T> square(Var<T> a);

// Concatenation along the last axis; all parts share their leading extents.
template <typename T> Var<T> concat(std::span<const Var<T>> parts);
template <typename T> Var<T> concat(std::initializer_list<Var<T>> parts);
// Stacks rank-1 vectors or rank-2 blocks along the first axis.
template <typename T> Var<T> concat_rows(std::span<const Var<T>> parts);
template <typename T> Var<T> slice_cols(Var<T> a, std::size_t start, std::size_t count);

// Reductions over axis 0 (rows) or the last axis of a rank-2 array; the
// reduced axis is dropped. A rank-1 input reduces to a scalar.
template <typename T> Var<T> sum_axis(Var<T> a, int axis);
template <typename T> Var<T> mean_axis(Var<T> a, int axis);
template <typename T> Var<T> sum_all(Var<T> a);
template <typename T> Var<T> mean_all(Var<T> a);

template <typename T> Var<T> gather_rows(Var<T> a, std::span<const std::uint32_t> index);
template <typename T>
Var<T> scatter_add_rows(std::size_t target_count, std::span<const std::uint32_t> index,
                        Var<T> rows);
// Picks individual entries by flat index; result is rank-1.
template <typename T> Var<T> select(Var<T> a, std::span<const std::uint32_t> flat_index);

// Row-wise softmax over the last axis. `mask` (1 = keep) is either one entry
// per column, shared across rows, or one entry per element.
template <typename T>
Var<T> softmax_rows(Var<T> x, std::span<const std::uint8_t> mask = {});
template <typename T> Var<T> log_softmax_rows(Var<T> x);
template <typename T> Var<T> l2_normalize_rows(Var<T> x, T eps = T(1e-12));

inline constexpr double kLayerNormEpsilon = 1e-5;
template <typename T> Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> bias);

// Losses; each returns a rank-0 value averaged over valid entries.
template <typename T> Var<T> mse(Var<T> pred, Var<T> target);
template <typename T> Var<T> l1(Var<T> pred, Var<T> target);
template <typename T>
Var<T> bce_with_logits(Var<T> logits, Var<T> targets, std::span<const std::uint8_t> mask = {});

}  // namespace dnd::ad
