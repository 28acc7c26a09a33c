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


// Shared fixtures for unit and acceptance tests.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "dnd/autodiff/array.hpp"
#include "dnd/moldata/synthetic.hpp"
#include "dnd/moldata/types.hpp"
#include "dnd/util/rng.hpp"

namespace dnd::testing {

using Mat3 = std::array<std::array<double, 3>, 3>;

// Uniformly random rotation from a normalized quaternion.
inline Mat3 random_rotation(Rng& rng) {
  double q[4];
  double norm = 0;
  for (double& v : q) {
    v = rng.normal();
    norm += v * v;
  }
  norm = std::sqrt(norm);
  for (double& v : q) v /= norm;
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  return {{{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
           {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
           {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}}};
}

inline Mat3 rotation_z(double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {{{c, -s, 0}, {s, c, 0}, {0, 0, 1}}};
}

inline mol::Vec3 apply(const Mat3& q, const mol::Vec3& v) {
  mol::Vec3 out{};
  for (int r = 0; r < 3; ++r) out[r] = q[r][0] * v[0] + q[r][1] * v[1] + q[r][2] * v[2];
  return out;
}

// x -> Q x + t for every atom.
inline std::vector<mol::Vec3> rigid_motion(const std::vector<mol::Vec3>& coords, const Mat3& q,
                                           const mol::Vec3& t) {
  std::vector<mol::Vec3> out;
  out.reserve(coords.size());
  for (const auto& c : coords) {
    auto r = apply(q, c);
    out.push_back({r[0] + t[0], r[1] + t[1], r[2] + t[2]});
  }
  return out;
}

// Rows of an (N, 3) array rotated by Q.
template <typename T>
ad::Array<double> rotate_rows(const ad::Array<T>& a, const Mat3& q) {
  ad::Array<double> out(a.shape());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const mol::Vec3 v{double(a(i, 0)), double(a(i, 1)), double(a(i, 2))};
    const auto r = apply(q, v);
    for (int k = 0; k < 3; ++k) out(i, k) = r[k];
  }
  return out;
}

inline mol::Dataset small_dataset(std::size_t count, std::uint64_t seed, std::size_t min_atoms = 4,
                                  std::size_t max_atoms = 10) {
  mol::SyntheticConfig c;
  c.count = count;
  c.seed = seed;
  c.min_atoms = min_atoms;
  c.max_atoms = max_atoms;
  return mol::generate_synthetic(c);
}

// Relabels atoms so that new atom i is old atom perm[i].
inline mol::MoleculeRecord permute_record(const mol::MoleculeRecord& rec,
                                          const std::vector<std::uint32_t>& perm) {
  std::vector<std::uint32_t> inverse(perm.size());
  for (std::uint32_t i = 0; i < perm.size(); ++i) inverse[perm[i]] = i;
  mol::MoleculeRecord out = rec;
  for (std::size_t i = 0; i < perm.size(); ++i) out.graph.atoms[i] = rec.graph.atoms[perm[i]];
  for (auto& b : out.graph.bonds) {
    b.u = inverse[b.u];
    b.v = inverse[b.v];
  }
  if (rec.conformer) {
    for (std::size_t i = 0; i < perm.size(); ++i) {
      out.conformer->coords[i] = rec.conformer->coords[perm[i]];
    }
  }
  return out;
}

inline std::vector<std::uint32_t> random_permutation(std::size_t n, Rng& rng) {
  std::vector<std::uint32_t> p(n);
  for (std::uint32_t i = 0; i < n; ++i) p[i] = i;
  rng.shuffle(p);
  return p;
}

inline ad::Array<double> random_array(ad::Shape shape, Rng& rng, double scale = 1.0) {
  ad::Array<double> a(std::move(shape));
  for (auto& v : a.storage()) v = scale * rng.normal();
  return a;
}

}  // namespace dnd::testing
