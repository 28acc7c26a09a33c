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

#include "dnd/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dnd/util/error.hpp"

namespace dnd::ad {
namespace {

template <typename T>
Tape<T>& same_tape(Var<T> a, Var<T> b, const char* op) {
  if (a.tape == nullptr || a.tape != b.tape) {
    throw ContractError(std::string(op) + ": operands recorded on different tapes");
  }
  return *a.tape;
}

template <typename T>
void require_same_shape(const Array<T>& a, const Array<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                         " vs " + shape_string(b.shape()));
  }
}

template <typename T>
void require_rank2(const Array<T>& a, const char* op) {
  if (a.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a rank-2 array, got shape " +
                         shape_string(a.shape()));
  }
}

// C(m,n) += A(m,k) * B(k,n)
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    const T* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      if (av == T(0)) continue;
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C(m,n) += A(m,k) * B(n,k)^T
template <typename T>
void gemm_nt(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const T* brow = b + j * k;
      T acc = 0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      c[i * n + j] += acc;
    }
  }
}

// C(m,n) += A(k,m)^T * B(k,n)
template <typename T>
void gemm_tn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const T* arow = a + p * m;
    const T* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const T av = arow[i];
      if (av == T(0)) continue;
      T* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
T sigmoid(T x) {
  if (x >= 0) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
Shape reduced_shape(const Shape& s, int axis) {
  Shape out = s;
  out.erase(out.begin() + axis);
  return out;
}

}  // namespace

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  Tape<T>& tape = same_tape(a, b, "matmul");
  const Array<T>& A = a.value();
  const Array<T>& B = b.value();
  if (A.rank() != 2 || B.rank() != 2 || A.shape()[1] != B.shape()[0]) {
    throw DimensionError("matmul: incompatible shapes " + shape_string(A.shape()) + " and " +
                         shape_string(B.shape()));
  }
  const std::size_t m = A.shape()[0], k = A.shape()[1], n = B.shape()[1];
  Array<T> C(Shape{m, n});
  gemm_nn(A.data(), B.data(), C.data(), m, k, n);
  const std::uint32_t ia = a.id, ib = b.id;
  return tape.push(std::move(C), a.requires_grad() || b.requires_grad(),
                   [ia, ib, m, k, n](Tape<T>& t, std::uint32_t self) {
                     const Array<T>& G = t.grad(self);
                     if (t.requires_grad(ia)) {
                       gemm_nt(G.data(), t.value(ib).data(), t.grad(ia).data(), m, n, k);
                     }
                     if (t.requires_grad(ib)) {
                       gemm_tn(t.value(ia).data(), G.data(), t.grad(ib).data(), k, m, n);
                     }
                   });
}

template <typename T>
Var<T> transpose(Var<T> a) {
  const Array<T>& A = a.value();
  require_rank2(A, "transpose");
  const std::size_t m = A.shape()[0], n = A.shape()[1];
  Array<T> out(Shape{n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out(j, i) = A(i, j);
  const std::uint32_t ia = a.id;
  return a.tape->push(std::move(out), a.requires_grad(),
                      [ia, m, n](Tape<T>& t, std::uint32_t self) {
                        const Array<T>& G = t.grad(self);
                        Array<T>& ga = t.grad(ia);
                        for (std::size_t i = 0; i < m; ++i)
                          for (std::size_t j = 0; j < n; ++j) ga(i, j) += G(j, i);
                      });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  Tape<T>& tape = same_tape(a, b, "add");
  require_same_shape(a.value(), b.value(), "add");
  Array<T> out = a.value();
  const Array<T>& B = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += B[i];
  const std::uint32_t ia = a.id, ib = b.id;
  return tape.push(std::move(out), a.requires_grad() || b.requires_grad(),
                   [ia, ib](Tape<T>& t, std::uint32_t self) {
                     const Array<T>& G = t.grad(self);
                     for (std::uint32_t id : {ia, ib}) {
                       if (!t.requires_grad(id)) continue;
                       Array<T>& g = t.grad(id);
                       for (std::size_t i = 0; i < g.size(); ++i) g[i] += G[i];
                     }
                   });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  Tape<T>& tape = same_tape(a, b, "sub");
  require_same_shape(a.value(), b.value(), "sub");
  Array<T> out = a.value();
  const Array<T>& B = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= B[i];
  const std::uint32_t ia = a.id, ib = b.id;
  return tape.push(std::move(out), a.requires_grad() || b.requires_grad(),
                   [ia, ib](Tape<T>& t, std::uint32_t self) {
                     const Array<T>& G = t.grad(self);
                     if (t.requires_grad(ia)) {
                       Array<T>& g = t.grad(ia);
                       for (std::size_t i = 0; i < g.size(); ++i) g[i] += G[i];
                     }
                     if (t.requires_grad(ib)) {
                       Array<T>& g = t.grad(ib);
                       for (std::size_t i = 0; i < g.size(); ++i) g[i] -= G[i];
                     }
                   });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  Tape<T>& tape = same_tape(a, b, "mul");
  require_same_shape(a.value(), b.value(), "mul");
  Array<T> out = a.value();
  const Array<T>& B = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= B[i];
  const std::uint32_t ia = a.id, ib = b.id;
  return tape.push(std::move(out), a.requires_grad() || b.requires_grad(),
                   [ia, ib](Tape<T>& t, std::uint32_t self) {
                     const Array<T>& G = t.grad(self);
                     if (t.requires_grad(ia)) {
                       const Array<T>& B = t.value(ib);
                       Array<T>& g = t.grad(ia);
                       for (std::size_t i = 0; i < g.size(); ++i) g[i] += G[i] * B[i];
                     }
                     if (t.requires_grad(ib)) {
                       const Array<T>& A = t.value(ia);
                       Array<T>& g = t.grad(ib);
                       for (std::size_t i = 0; i < g.size(); ++i) g[i] += G[i] * A[i];
                     }
                   });
}

template <typename T>
Var<T> scale(Var<T> a, T s) {
  Array<T> out = a.value();
  for (T& v : out.values()) v *= s;
  const std::uint32_t ia = a.id;
  return a.tape->push(std::move(out), a.requires_grad(), [ia, s](Tape<T>& t, std::uint32_t self) {
    const Array<T>& G = t.grad(self);
    Array<T>& g = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * G[i];
  });
}

template <typename T>
Var<T> add_row(Var<T> a, Var<T> bias) {
  Tape<T>& tape = same_tape(a, bias, "add_row");
  const Array<T>& A = a.value();
  const Array<T>& b = bias.value();
  if (A.rank() < 1 || b.rank() != 1 || b.size() != A.cols()) {
    throw DimensionError("add_row: cannot add vector of shape " + shape_string(b.shape()) +
                         " along the last axis of " + shape_string(A.shape()));
  }
  const std::size_t rows = A.rows(), cols = A.cols();
  Array<T> out = A;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += b[c];
  const std::uint32_t ia = a.id, ib = bias.id;
  return tape.push(std::move(out), a.requires_grad() || bias.requires_grad(),
                   [ia, ib, rows, cols](Tape<T>& t, std::uint32_t self) {
                     const Array<T>& G = t.grad(self);
                     if (t.requires_grad(ia)) {
                       Array<T>& g = t.grad(ia);
                       for (std::size_t i = 0; i < g.size(); ++i) g[i] += G[i];
                     }
                     if (t.requires_grad(ib)) {
                       Array<T>& g = t.grad(ib);
                       for (std::size_t r = 0; r < rows; ++r)
                         for (std::size_t c = 0; c < cols; ++c) g[c] += G[r * cols + c];
                     }
                   });
}

template <typename T>
Var<T> mul_rows(Var<T> a, Var<T> s) {
  Tape<T>& tape = same_tape(a, s, "mul_rows");
  const Array<T>& A = a.value();
  const Array<T>& S = s.value();
  const std::size_t rows = A.rows(), cols = A.cols();
  const bool ok = A.rank() == 2 && S.size() == rows &&
                  (S.rank() == 1 || (S.rank() == 2 && S.shape()[1] == 1));
  if (!ok) {
    throw DimensionError("mul_rows: scale of shape " + shape_string(S.shape()) +
                         " does not match rows of " + shape_string(A.shape()));
  }
  Array<T> out = A;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] *= S[r];
  const std::uint32_t ia = a.id, is = s.id;
  return tape.push(std::move(out), a.requires_grad() || s.requires_grad(),
                   [ia, is, rows, cols](Tape<T>& t, std::uint32_t self) {
                     const Array<T>& G = t.grad(self);
                     if (t.requires_grad(ia)) {
                       const Array<T>& S = t.value(is);
                       Array<T>& g = t.grad(ia);
                       for (std::size_t r = 0; r < rows; ++r)
                         for (std::size_t c = 0; c < cols; ++c)
                           g[r * cols + c] += G[r * cols + c] * S[r];
                     }
                     if (t.requires_grad(is)) {
                       const Array<T>& A = t.value(ia);
                       Array<T>& g = t.grad(is);
                       for (std::size_t r = 0; r < rows; ++r) {
                         T acc = 0;
                         for (std::size_t c = 0; c < cols; ++c)
                           acc += G[r * cols + c] * A[r * cols + c];
                         g[r] += acc;
                       }
                     }
                   });
}

template <typename T>
Var<T> silu(Var<T> a) {
  Array<T> out = a.value();
  for (T& v : out.values()) v = v * sigmoid(v);
  const std::uint32_t ia = a.id;
  return a.tape->push(std::move(out), a.requires_grad(), [ia](Tape<T>& t, std::uint32_t self) {
    const Array<T>& G = t.grad(self);
    const Array<T>& X = t.value(ia);
    Array<T>& g = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const T s = sigmoid(X[i]);
      g[i] += G[i] * s * (T(1) + X[i] * (T(1) - s));
    }
  });
}

template <typename T>
Var<T> relu(Var<T> a) {
  Array<T> out = a.value();
  for (T& v : out.values()) v = v > T(0) ? v : T(0);
  const std::uint32_t ia = a.id;
  return a.tape->push(std::move(out), a.requires_grad(), [ia](Tape<T>& t, std::uint32_t self) {
    const Array<T>& G = t.grad(self);
    const Array<T>& X = t.value(ia);
    Array<T>& g = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (X[i] > T(0)) g[i] += G[i];
    }
  });
}

template <typename T>
Var<T> square(Var<T> a) {
  Array<T> out = a.value();
  for (T& v : out.values()) v = v * v;
  const std::uint32_t ia = a.id;
  return a.tape->push(std::move(out), a.requires_grad(), [ia](Tape<T>& t, std::uint32_t self) {
    const Array<T>& G = t.grad(self);
    const Array<T>& X = t.value(ia);
    Array<T>& g = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += T(2) * X[i] * G[i];
  });
}

template <typename T>
Var<T> concat(std::span<const Var<T>> parts) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  Tape<T>& tape = *parts[0].tape;
  const Shape& first = parts[0].shape();
  if (first.empty()) throw DimensionError("concat: scalar input");
  const std::size_t rows = parts[0].value().rows();
  std::size_t total = 0;
  bool rg = false;
  std::vector<std::uint32_t> ids;
  std::vector<std::size_t> widths;
  for (const Var<T>& p : parts) {
    same_tape(parts[0], p, "concat");
    const Shape& s = p.shape();
    if (s.size() != first.size() || !std::equal(s.begin(), s.end() - 1, first.begin())) {
      throw DimensionError("concat: leading extents differ, " + shape_string(first) + " vs " +
                           shape_string(s));
    }
    total += s.back();
    rg = rg || p.requires_grad();
    ids.push_back(p.id);
    widths.push_back(s.back());
  }
  Shape out_shape = first;
  out_shape.back() = total;
  Array<T> out(out_shape);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Array<T>& v = parts[k].value();
    const std::size_t w = widths[k];
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(v.data() + r * w, w, out.data() + r * total + offset);
    offset += w;
  }
  return tape.push(std::move(out), rg,
                   [ids, widths, rows, total](Tape<T>& t, std::uint32_t self) {
                     const Array<T>& G = t.grad(self);
                     std::size_t off = 0;
                     for (std::size_t k = 0; k < ids.size(); ++k) {
                       const std::size_t w = widths[k];
                       if (t.requires_grad(ids[k])) {
                         Array<T>& g = t.grad(ids[k]);
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t c = 0; c < w; ++c)
                             g[r * w + c] += G[r * total + off + c];
                       }
                       off += w;
                     }
                   });
}

template <typename T>
Var<T> concat(std::initializer_list<Var<T>> parts) {
  return concat(std::span<const Var<T>>(parts.begin(), parts.size()));
}

template <typename T>
Var<T> concat_rows(std::span<const Var<T>> parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  Tape<T>& tape = *parts[0].tape;
  const Shape& first = parts[0].shape();
  const bool vectors = first.size() == 1;
  if (first.size() != 1 && first.size() != 2) {
    throw DimensionError("concat_rows: expected rank-1 or rank-2 inputs, got " +
                         shape_string(first));
  }
  const std::size_t cols = first.back();
  std::size_t rows = 0;
  bool rg = false;
  std::vector<std::uint32_t> ids;
  std::vector<std::size_t> sizes;
  for (const Var<T>& p : parts) {
    same_tape(parts[0], p, "concat_rows");
    const Shape& s = p.shape();
    if (s.size() != first.size() || s.back() != cols) {
      throw DimensionError("concat_rows: shape " + shape_string(s) + " incompatible with " +
                           shape_string(first));
    }
    rows += vectors ? 1 : s[0];
    rg = rg || p.requires_grad();
    ids.push_back(p.id);
    sizes.push_back(p.value().size());
  }
  Array<T> out(Shape{rows, cols});
  std::size_t offset = 0;
  for (const Var<T>& p : parts) {
    const Array<T>& v = p.value();
    std::copy_n(v.data(), v.size(), out.data() + offset);
    offset += v.size();
  }
  return tape.push(std::move(out), rg, [ids, sizes](Tape<T>& t, std::uint32_t self) {
    const Array<T>& G = t.grad(self);
    std::size_t off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (t.requires_grad(ids[k])) {
        Array<T>& g = t.grad(ids[k]);
        for (std::size_t i = 0; i < sizes[k]; ++i) g[i] += G[off + i];
      }
      off += sizes[k];
    }
  });
}

template <typename T>
Var<T> slice_cols(Var<T> a, std::size_t start, std::size_t count) {
  const Array<T>& A = a.value();
  require_rank2(A, "slice_cols");
  const std::size_t rows = A.shape()[0], cols = A.shape()[1];
  if (start + count > cols) {
    throw IndexError("slice_cols: columns [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") out of range for " +
                     shape_string(A.shape()));
  }
  Array<T> out(Shape{rows, count});
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(A.data() + r * cols + start, count, out.data() + r * count);
  const std::uint32_t ia = a.id;
  return a.tape->push(std::move(out), a.requires_grad(),
                      [ia, rows, cols, start, count](Tape<T>& t, std::uint32_t self) {
                        const Array<T>& G = t.grad(self);
                        Array<T>& g = t.grad(ia);
                        for (std::size_t r = 0; r < rows; ++r)
                          for (std::size_t c = 0; c < count; ++c)
                            g[r * cols + start + c] += G[r * count + c];
                      });
}

template <typename T>
Var<T> sum_axis(Var<T> a, int axis) {
  const Array<T>& A = a.value();
  if (A.rank() != 1 && A.rank() != 2) {
    throw DimensionError("sum_axis: expected rank 1 or 2, got " + shape_string(A.shape()));
  }
  const int rank = static_cast<int>(A.rank());
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) {
    throw DimensionError("sum_axis: axis out of range for " + shape_string(A.shape()));
  }
  const std::size_t rows = A.rank() == 1 ? 1 : A.shape()[0];
  const std::size_t cols = A.cols();
  // For a rank-1 input the only axis is the last one.
  const bool over_rows = A.rank() == 2 && axis == 0;
  Array<T> out(reduced_shape<T>(A.shape(), axis));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[over_rows ? c : r] += A[r * cols + c];
  const std::uint32_t ia = a.id;
  return a.tape->push(std::move(out), a.requires_grad(),
                      [ia, rows, cols, over_rows](Tape<T>& t, std::uint32_t self) {
                        const Array<T>& G = t.grad(self);
                        Array<T>& g = t.grad(ia);
                        for (std::size_t r = 0; r < rows; ++r)
                          for (std::size_t c = 0; c < cols; ++c)
                            g[r * cols + c] += G[over_rows ? c : r];
                      });
}

template <typename T>
Var<T> mean_axis(Var<T> a, int axis) {
  const Array<T>& A = a.value();
  const int rank = static_cast<int>(A.rank());
  const int ax = axis < 0 ? axis + rank : axis;
  if (ax < 0 || ax >= rank) {
    throw DimensionError("mean_axis: axis out of range for " + shape_string(A.shape()));
  }
  const std::size_t extent = A.shape()[ax];
  if (extent == 0) throw DimensionError("mean_axis: empty axis in " + shape_string(A.shape()));
  return scale(sum_axis(a, axis), T(1) / static_cast<T>(extent));
}

template <typename T>
Var<T> sum_all(Var<T> a) {
  const Array<T>& A = a.value();
  T acc = 0;
  for (T v : A.values()) acc += v;
  const std::uint32_t ia = a.id;
  return a.tape->push(Array<T>::scalar(acc), a.requires_grad(),
                      [ia](Tape<T>& t, std::uint32_t self) {
                        const T G = t.grad(self)[0];
                        Array<T>& g = t.grad(ia);
                        for (T& v : g.values()) v += G;
                      });
}

template <typename T>
Var<T> mean_all(Var<T> a) {
  if (a.value().size() == 0) throw DegenerateError("mean_all: empty input");
  return scale(sum_all(a), T(1) / static_cast<T>(a.value().size()));
}

template <typename T>
Var<T> gather_rows(Var<T> a, std::span<const std::uint32_t> index) {
  const Array<T>& A = a.value();
  if (A.rank() != 1 && A.rank() != 2) {
    throw DimensionError("gather_rows: expected rank 1 or 2, got " + shape_string(A.shape()));
  }
  const std::size_t n = A.rank() == 1 ? A.size() : A.shape()[0];
  const std::size_t cols = A.rank() == 1 ? 1 : A.shape()[1];
  for (std::uint32_t i : index) {
    if (i >= n) {
      throw IndexError("gather_rows: index " + std::to_string(i) + " out of range for " +
                       std::to_string(n) + " rows");
    }
  }
  Shape out_shape = A.rank() == 1 ? Shape{index.size()} : Shape{index.size(), cols};
  Array<T> out(out_shape);
  for (std::size_t r = 0; r < index.size(); ++r)
    std::copy_n(A.data() + index[r] * cols, cols, out.data() + r * cols);
  std::vector<std::uint32_t> idx(index.begin(), index.end());
  const std::uint32_t ia = a.id;
  return a.tape->push(std::move(out), a.requires_grad(),
                      [ia, idx = std::move(idx), cols](Tape<T>& t, std::uint32_t self) {
                        const Array<T>& G = t.grad(self);
                        Array<T>& g = t.grad(ia);
                        for (std::size_t r = 0; r < idx.size(); ++r)
                          for (std::size_t c = 0; c < cols; ++c)
                            g[idx[r] * cols + c] += G[r * cols + c];
                      });
}

template <typename T>
Var<T> scatter_add_rows(std::size_t target_count, std::span<const std::uint32_t> index,
                        Var<T> rows) {
  const Array<T>& R = rows.value();
  require_rank2(R, "scatter_add_rows");
  if (R.shape()[0] != index.size()) {
    throw DimensionError("scatter_add_rows: " + std::to_string(index.size()) +
                         " indices for rows of shape " + shape_string(R.shape()));
  }
  const std::size_t cols = R.shape()[1];
  for (std::uint32_t i : index) {
    if (i >= target_count) {
      throw IndexError("scatter_add_rows: index " + std::to_string(i) + " out of range for " +
                       std::to_string(target_count) + " targets");
    }
  }
  Array<T> out(Shape{target_count, cols});
  for (std::size_t r = 0; r < index.size(); ++r)
    for (std::size_t c = 0; c < cols; ++c) out[index[r] * cols + c] += R[r * cols + c];
  std::vector<std::uint32_t> idx(index.begin(), index.end());
  const std::uint32_t ir = rows.id;
  return rows.tape->push(std::move(out), rows.requires_grad(),
                         [ir, idx = std::move(idx), cols](Tape<T>& t, std::uint32_t self) {
                           const Array<T>& G = t.grad(self);
                           Array<T>& g = t.grad(ir);
                           for (std::size_t r = 0; r < idx.size(); ++r)
                             for (std::size_t c = 0; c < cols; ++c)
                               g[r * cols + c] += G[idx[r] * cols + c];
                         });
}

template <typename T>
Var<T> select(Var<T> a, std::span<const std::uint32_t> flat_index) {
  const Array<T>& A = a.value();
  Array<T> out(Shape{flat_index.size()});
  for (std::size_t k = 0; k < flat_index.size(); ++k) {
    if (flat_index[k] >= A.size()) {
      throw IndexError("select: flat index " + std::to_string(flat_index[k]) +
                       " out of range for " + shape_string(A.shape()));
    }
    out[k] = A[flat_index[k]];
  }
  std::vector<std::uint32_t> idx(flat_index.begin(), flat_index.end());
  const std::uint32_t ia = a.id;
  return a.tape->push(std::move(out), a.requires_grad(),
                      [ia, idx = std::move(idx)](Tape<T>& t, std::uint32_t self) {
                        const Array<T>& G = t.grad(self);
                        Array<T>& g = t.grad(ia);
                        for (std::size_t k = 0; k < idx.size(); ++k) g[idx[k]] += G[k];
                      });
}

template <typename T>
Var<T> softmax_rows(Var<T> x, std::span<const std::uint8_t> mask) {
  const Array<T>& X = x.value();
  if (X.rank() < 1) throw DimensionError("softmax_rows: scalar input");
  const std::size_t rows = X.rows(), cols = X.cols();
  const bool shared = !mask.empty() && mask.size() == cols;
  if (!mask.empty() && !shared && mask.size() != X.size()) {
    throw DimensionError("softmax_rows: mask of length " + std::to_string(mask.size()) +
                         " matches neither the last axis nor the shape " +
                         shape_string(X.shape()));
  }
  auto keep = [&](std::size_t r, std::size_t c) {
    if (mask.empty()) return true;
    return mask[shared ? c : r * cols + c] != 0;
  };
  Array<T> out(X.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    T mx = -std::numeric_limits<T>::infinity();
    bool any = false;
    for (std::size_t c = 0; c < cols; ++c) {
      if (!keep(r, c)) continue;
      any = true;
      mx = std::max(mx, X[r * cols + c]);
    }
    if (!any) {
      throw DegenerateError("softmax_rows: row " + std::to_string(r) + " is fully masked");
    }
    T total = 0;
    for (std::size_t c = 0; c < cols; ++c) {
      if (!keep(r, c)) continue;
      const T e = std::exp(X[r * cols + c] - mx);
      out[r * cols + c] = e;
      total += e;
    }
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] /= total;
  }
  const std::uint32_t ix = x.id;
  return x.tape->push(std::move(out), x.requires_grad(),
                      [ix, rows, cols](Tape<T>& t, std::uint32_t self) {
                        const Array<T>& G = t.grad(self);
                        const Array<T>& Y = t.value(self);
                        Array<T>& g = t.grad(ix);
                        for (std::size_t r = 0; r < rows; ++r) {
                          T dot = 0;
                          for (std::size_t c = 0; c < cols; ++c)
                            dot += G[r * cols + c] * Y[r * cols + c];
                          for (std::size_t c = 0; c < cols; ++c)
                            g[r * cols + c] += Y[r * cols + c] * (G[r * cols + c] - dot);
                        }
                      });
}

template <typename T>
Var<T> log_softmax_rows(Var<T> x) {
  const Array<T>& X = x.value();
  if (X.rank() < 1) throw DimensionError("log_softmax_rows: scalar input");
  const std::size_t rows = X.rows(), cols = X.cols();
  if (cols == 0) throw DimensionError("log_softmax_rows: empty rows");
  Array<T> out(X.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = X.data() + r * cols;
    const T mx = *std::max_element(row, row + cols);
    T total = 0;
    for (std::size_t c = 0; c < cols; ++c) total += std::exp(row[c] - mx);
    const T lse = mx + std::log(total);
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = row[c] - lse;
  }
  const std::uint32_t ix = x.id;
  return x.tape->push(std::move(out), x.requires_grad(),
                      [ix, rows, cols](Tape<T>& t, std::uint32_t self) {
                        const Array<T>& G = t.grad(self);
                        const Array<T>& Y = t.value(self);
                        Array<T>& g = t.grad(ix);
                        for (std::size_t r = 0; r < rows; ++r) {
                          T gsum = 0;
                          for (std::size_t c = 0; c < cols; ++c) gsum += G[r * cols + c];
                          for (std::size_t c = 0; c < cols; ++c)
                            g[r * cols + c] += G[r * cols + c] - std::exp(Y[r * cols + c]) * gsum;
                        }
                      });
}

template <typename T>
Var<T> l2_normalize_rows(Var<T> x, T eps) {
  const Array<T>& X = x.value();
  if (X.rank() < 1) throw DimensionError("l2_normalize_rows: scalar input");
  const std::size_t rows = X.rows(), cols = X.cols();
  Array<T> out(X.shape());
  std::vector<T> norms(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    T ss = 0;
    for (std::size_t c = 0; c < cols; ++c) ss += X[r * cols + c] * X[r * cols + c];
    norms[r] = std::max(std::sqrt(ss), eps);
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = X[r * cols + c] / norms[r];
  }
  const std::uint32_t ix = x.id;
  return x.tape->push(
      std::move(out), x.requires_grad(),
      [ix, rows, cols, eps, norms = std::move(norms)](Tape<T>& t, std::uint32_t self) {
        const Array<T>& G = t.grad(self);
        const Array<T>& Y = t.value(self);
        Array<T>& g = t.grad(ix);
        for (std::size_t r = 0; r < rows; ++r) {
          if (norms[r] <= eps) {
            // Clamped branch: y = x / eps.
            for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += G[r * cols + c] / eps;
            continue;
          }
          T dot = 0;
          for (std::size_t c = 0; c < cols; ++c) dot += G[r * cols + c] * Y[r * cols + c];
          for (std::size_t c = 0; c < cols; ++c)
            g[r * cols + c] += (G[r * cols + c] - Y[r * cols + c] * dot) / norms[r];
        }
      });
}

template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> bias) {
  Tape<T>& tape = same_tape(x, gain, "layer_norm");
  same_tape(x, bias, "layer_norm");
  const Array<T>& X = x.value();
  if (X.rank() < 1 || X.cols() == 0) {
    throw DimensionError("layer_norm: last extent is 0 in shape " + shape_string(X.shape()));
  }
  const std::size_t rows = X.rows(), cols = X.cols();
  const Array<T>& Gn = gain.value();
  const Array<T>& Bs = bias.value();
  if (Gn.size() != cols || Bs.size() != cols || Gn.rank() != 1 || Bs.rank() != 1) {
    throw DimensionError("layer_norm: gain " + shape_string(Gn.shape()) + " / bias " +
                         shape_string(Bs.shape()) + " do not match last axis of " +
                         shape_string(X.shape()));
  }
  Array<T> out(X.shape());
  std::vector<T> xhat(X.size());
  std::vector<T> inv_std(rows);
  const T eps = static_cast<T>(kLayerNormEpsilon);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* row = X.data() + r * cols;
    T mean = 0;
    for (std::size_t c = 0; c < cols; ++c) mean += row[c];
    mean /= static_cast<T>(cols);
    T var = 0;
    for (std::size_t c = 0; c < cols; ++c) var += (row[c] - mean) * (row[c] - mean);
    var /= static_cast<T>(cols);
    inv_std[r] = T(1) / std::sqrt(var + eps);
    for (std::size_t c = 0; c < cols; ++c) {
      const T h = (row[c] - mean) * inv_std[r];
      xhat[r * cols + c] = h;
      out[r * cols + c] = h * Gn[c] + Bs[c];
    }
  }
  const std::uint32_t ix = x.id, ig = gain.id, ib = bias.id;
  const bool rg = x.requires_grad() || gain.requires_grad() || bias.requires_grad();
  return tape.push(
      std::move(out), rg,
      [ix, ig, ib, rows, cols, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          Tape<T>& t, std::uint32_t self) {
        const Array<T>& G = t.grad(self);
        const Array<T>& Gn = t.value(ig);
        if (t.requires_grad(ix)) {
          Array<T>& g = t.grad(ix);
          const T inv_n = T(1) / static_cast<T>(cols);
          for (std::size_t r = 0; r < rows; ++r) {
            T sum_d = 0, sum_dx = 0;
            for (std::size_t c = 0; c < cols; ++c) {
              const T d = G[r * cols + c] * Gn[c];
              sum_d += d;
              sum_dx += d * xhat[r * cols + c];
            }
            for (std::size_t c = 0; c < cols; ++c) {
              const T d = G[r * cols + c] * Gn[c];
              g[r * cols + c] +=
                  inv_std[r] * (d - sum_d * inv_n - xhat[r * cols + c] * sum_dx * inv_n);
            }
          }
        }
        if (t.requires_grad(ig)) {
          Array<T>& g = t.grad(ig);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) g[c] += G[r * cols + c] * xhat[r * cols + c];
        }
        if (t.requires_grad(ib)) {
          Array<T>& g = t.grad(ib);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) g[c] += G[r * cols + c];
        }
      });
}

template <typename T>
Var<T> mse(Var<T> pred, Var<T> target) {
  Tape<T>& tape = same_tape(pred, target, "mse");
  require_same_shape(pred.value(), target.value(), "mse");
  const Array<T>& P = pred.value();
  const Array<T>& Y = target.value();
  if (P.size() == 0) throw DegenerateError("mse: no valid entries");
  T acc = 0;
  for (std::size_t i = 0; i < P.size(); ++i) acc += (P[i] - Y[i]) * (P[i] - Y[i]);
  const T inv_n = T(1) / static_cast<T>(P.size());
  const std::uint32_t ip = pred.id, iy = target.id;
  return tape.push(Array<T>::scalar(acc * inv_n),
                   pred.requires_grad() || target.requires_grad(),
                   [ip, iy, inv_n](Tape<T>& t, std::uint32_t self) {
                     const T G = t.grad(self)[0];
                     const Array<T>& P = t.value(ip);
                     const Array<T>& Y = t.value(iy);
                     const T k = T(2) * inv_n * G;
                     if (t.requires_grad(ip)) {
                       Array<T>& g = t.grad(ip);
                       for (std::size_t i = 0; i < g.size(); ++i) g[i] += k * (P[i] - Y[i]);
                     }
                     if (t.requires_grad(iy)) {
                       Array<T>& g = t.grad(iy);
                       for (std::size_t i = 0; i < g.size(); ++i) g[i] -= k * (P[i] - Y[i]);
                     }
                   });
}

template <typename T>
Var<T> l1(Var<T> pred, Var<T> target) {
  Tape<T>& tape = same_tape(pred, target, "l1");
  require_same_shape(pred.value(), target.value(), "l1");
  const Array<T>& P = pred.value();
  const Array<T>& Y = target.value();
  if (P.size() == 0) throw DegenerateError("l1: no valid entries");
  T acc = 0;
  for (std::size_t i = 0; i < P.size(); ++i) acc += std::abs(P[i] - Y[i]);
  const T inv_n = T(1) / static_cast<T>(P.size());
  const std::uint32_t ip = pred.id, iy = target.id;
  return tape.push(Array<T>::scalar(acc * inv_n),
                   pred.requires_grad() || target.requires_grad(),
                   [ip, iy, inv_n](Tape<T>& t, std::uint32_t self) {
                     const T G = t.grad(self)[0];
                     const Array<T>& P = t.value(ip);
                     const Array<T>& Y = t.value(iy);
                     auto sign = [](T v) { return v > 0 ? T(1) : (v < 0 ? T(-1) : T(0)); };
                     if (t.requires_grad(ip)) {
                       Array<T>& g = t.grad(ip);
                       for (std::size_t i = 0; i < g.size(); ++i)
                         g[i] += G * inv_n * sign(P[i] - Y[i]);
                     }
                     if (t.requires_grad(iy)) {
                       Array<T>& g = t.grad(iy);
                       for (std::size_t i = 0; i < g.size(); ++i)
                         g[i] -= G * inv_n * sign(P[i] - Y[i]);
                     }
                   });
}

template <typename T>
Var<T> bce_with_logits(Var<T> logits, Var<T> targets, std::span<const std::uint8_t> mask) {
  Tape<T>& tape = same_tape(logits, targets, "bce_with_logits");
  require_same_shape(logits.value(), targets.value(), "bce_with_logits");
  const Array<T>& X = logits.value();
  const Array<T>& Y = targets.value();
  if (!mask.empty() && mask.size() != X.size()) {
    throw DimensionError("bce_with_logits: mask of length " + std::to_string(mask.size()) +
                         " for logits of shape " + shape_string(X.shape()));
  }
  std::vector<std::uint8_t> valid(X.size(), 1);
  if (!mask.empty()) valid.assign(mask.begin(), mask.end());
  std::size_t count = 0;
  T acc = 0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    if (!valid[i]) continue;
    ++count;
    const T x = X[i];
    acc += std::max(x, T(0)) - x * Y[i] + std::log1p(std::exp(-std::abs(x)));
  }
  if (count == 0) throw DegenerateError("bce_with_logits: no valid (unmasked) entries");
  const T inv_n = T(1) / static_cast<T>(count);
  const std::uint32_t ix = logits.id, iy = targets.id;
  return tape.push(Array<T>::scalar(acc * inv_n),
                   logits.requires_grad() || targets.requires_grad(),
                   [ix, iy, inv_n, valid = std::move(valid)](Tape<T>& t, std::uint32_t self) {
                     const T G = t.grad(self)[0];
                     const Array<T>& X = t.value(ix);
                     const Array<T>& Y = t.value(iy);
                     if (t.requires_grad(ix)) {
                       Array<T>& g = t.grad(ix);
                       for (std::size_t i = 0; i < g.size(); ++i)
                         if (valid[i]) g[i] += G * inv_n * (sigmoid(X[i]) - Y[i]);
                     }
                     if (t.requires_grad(iy)) {
                       Array<T>& g = t.grad(iy);
                       for (std::size_t i = 0; i < g.size(); ++i)
                         if (valid[i]) g[i] -= G * inv_n * X[i];
                     }
                   });
}

#define DND_INSTANTIATE_OPS(T)                                                             \
  template Var<T> matmul(Var<T>, Var<T>);                                                  \
  template Var<T> transpose(Var<T>);                                                       \
  template Var<T> add(Var<T>, Var<T>);                                                     \
  template Var<T> sub(Var<T>, Var<T>);                                                     \
  template Var<T> mul(Var<T>, Var<T>);                                                     \
  template Var<T> scale(Var<T>, T);                                                        \
  template Var<T> add_row(Var<T>, Var<T>);                                                 \
  template Var<T> mul_rows(Var<T>, Var<T>);                                                \
  template Var<T> silu(Var<T>);                                                            \
  template Var<T> relu(Var<T>);                                                            \
  template Var<T> square(Var<T>);                                                          \
  template Var<T> concat(std::span<const Var<T>>);                                         \
  template Var<T> concat(std::initializer_list<Var<T>>);                                   \
  template Var<T> concat_rows(std::span<const Var<T>>);                                    \
  template Var<T> slice_cols(Var<T>, std::size_t, std::size_t);                            \
  template Var<T> sum_axis(Var<T>, int);                                                   \
  template Var<T> mean_axis(Var<T>, int);                                                  \
  template Var<T> sum_all(Var<T>);                                                         \
  template Var<T> mean_all(Var<T>);                                                        \
  template Var<T> gather_rows(Var<T>, std::span<const std::uint32_t>);                     \
  template Var<T> scatter_add_rows(std::size_t, std::span<const std::uint32_t>, Var<T>);   \
  template Var<T> select(Var<T>, std::span<const std::uint32_t>);                          \
  template Var<T> softmax_rows(Var<T>, std::span<const std::uint8_t>);                     \
  template Var<T> log_softmax_rows(Var<T>);                                                \
  template Var<T> l2_normalize_rows(Var<T>, T);                                            \
  template Var<T> layer_norm(Var<T>, Var<T>, Var<T>);                                      \
  template Var<T> mse(Var<T>, Var<T>);                                                     \
  template Var<T> l1(Var<T>, Var<T>);                                                      \
  template Var<T> bce_with_logits(Var<T>, Var<T>, std::span<const std::uint8_t>);

DND_INSTANTIATE_OPS(float)
DND_INSTANTIATE_OPS(double)

#undef DND_INSTANTIATE_OPS

}  // namespace dnd::ad
