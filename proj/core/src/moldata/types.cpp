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

#include "dnd/moldata/types.hpp"

#include <cmath>
#include <set>
#include <sstream>
#include <unordered_set>

#include "dnd/util/error.hpp"

namespace dnd::mol {

std::array<int, kNumAtomFeatures> AtomFeatures::codes() const {
  return {atomic_number,         chirality,     degree,      formal_charge, num_hydrogens,
          num_radical_electrons, hybridization, is_aromatic, is_in_ring};
}

AtomFeatures AtomFeatures::from_codes(const std::array<int, kNumAtomFeatures>& c) {
  return {c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7], c[8]};
}

std::vector<std::vector<std::uint32_t>> MoleculeGraph::adjacency() const {
  std::vector<std::vector<std::uint32_t>> adj(atoms.size());
  for (const Bond& b : bonds) {
    if (b.u < atoms.size() && b.v < atoms.size()) {
      adj[b.u].push_back(b.v);
      adj[b.v].push_back(b.u);
    }
  }
  return adj;
}

bool MoleculeGraph::is_connected() const {
  if (atoms.empty()) return false;
  const auto adj = adjacency();
  std::vector<char> seen(atoms.size(), 0);
  std::vector<std::uint32_t> stack{0};
  seen[0] = 1;
  std::size_t visited = 1;
  while (!stack.empty()) {
    const std::uint32_t a = stack.back();
    stack.pop_back();
    for (std::uint32_t b : adj[a]) {
      if (!seen[b]) {
        seen[b] = 1;
        ++visited;
        stack.push_back(b);
      }
    }
  }
  return visited == atoms.size();
}

void MoleculeGraph::collect_problems(std::vector<std::string>& problems) const {
  if (atoms.empty()) {
    problems.push_back("graph has no atoms");
    return;
  }
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    const auto codes = atoms[i].codes();
    for (int k = 0; k < kNumAtomFeatures; ++k) {
      if (codes[k] < 0 || codes[k] >= kAtomFeatureVocab[k]) {
        problems.push_back("atom " + std::to_string(i) + " feature " + std::to_string(k) +
                           " code " + std::to_string(codes[k]) + " outside [0, " +
                           std::to_string(kAtomFeatureVocab[k]) + ")");
      }
    }
    if (atoms[i].atomic_number < 1) {
      problems.push_back("atom " + std::to_string(i) + " has atomic number < 1");
    }
  }
  std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
  bool indices_ok = true;
  for (const Bond& b : bonds) {
    if (!(b.u < b.v && b.v < atoms.size())) {
      problems.push_back("bond (" + std::to_string(b.u) + ", " + std::to_string(b.v) +
                         ") violates 0 <= u < v < N with N = " + std::to_string(atoms.size()));
      indices_ok = false;
      continue;
    }
    if (!seen.insert({b.u, b.v}).second) {
      problems.push_back("duplicate bond (" + std::to_string(b.u) + ", " +
                         std::to_string(b.v) + ")");
    }
    const auto codes = b.features.codes();
    for (int k = 0; k < kNumBondFeatures; ++k) {
      if (codes[k] < 0 || codes[k] >= kBondFeatureVocab[k]) {
        problems.push_back("bond (" + std::to_string(b.u) + ", " + std::to_string(b.v) +
                           ") feature " + std::to_string(k) + " code " +
                           std::to_string(codes[k]) + " out of range");
      }
    }
  }
  if (indices_ok && !is_connected()) problems.push_back("graph is disconnected");
}

void Conformer::collect_problems(std::size_t expected_atoms,
                                 std::vector<std::string>& problems) const {
  if (coords.size() != expected_atoms) {
    problems.push_back("conformer has " + std::to_string(coords.size()) + " rows, graph has " +
                       std::to_string(expected_atoms) + " atoms");
  }
  for (std::size_t i = 0; i < coords.size(); ++i) {
    for (double x : coords[i]) {
      if (!std::isfinite(x)) {
        problems.push_back("conformer row " + std::to_string(i) + " is not finite");
        return;
      }
    }
  }
  for (std::size_t i = 0; i < coords.size(); ++i) {
    for (std::size_t j = i + 1; j < coords.size(); ++j) {
      double d2 = 0;
      for (int k = 0; k < 3; ++k) d2 += (coords[i][k] - coords[j][k]) * (coords[i][k] - coords[j][k]);
      if (d2 < kMinAtomSeparation * kMinAtomSeparation) {
        std::ostringstream os;
        os << "atoms " << i << " and " << j << " are " << std::sqrt(d2)
           << " A apart (minimum " << kMinAtomSeparation << ")";
        problems.push_back(os.str());
      }
    }
  }
}

Vec3 Conformer::centroid() const {
  Vec3 c{0, 0, 0};
  if (coords.empty()) return c;
  for (const Vec3& p : coords)
    for (int k = 0; k < 3; ++k) c[k] += p[k];
  for (double& v : c) v /= static_cast<double>(coords.size());
  return c;
}

std::vector<std::string> MoleculeRecord::problems() const {
  std::vector<std::string> out;
  if (id.empty()) out.push_back("empty id");
  graph.collect_problems(out);
  if (conformer) conformer->collect_problems(graph.num_atoms(), out);
  if (labels) {
    for (std::size_t k = 0; k < labels->size(); ++k) {
      if ((*labels)[k] && !std::isfinite(*(*labels)[k])) {
        out.push_back("label " + std::to_string(k) + " is not finite");
      }
    }
  }
  return out;
}

void MoleculeRecord::validate() const {
  const auto issues = problems();
  if (issues.empty()) return;
  std::string msg = "record '" + id + "' is invalid:";
  for (const auto& p : issues) msg += " " + p + ";";
  throw ValidationError(msg);
}

std::size_t Dataset::max_atoms() const {
  std::size_t n = 0;
  for (const auto& r : records) n = std::max(n, r.graph.num_atoms());
  return n;
}

void Dataset::validate() const {
  std::unordered_set<std::string> ids;
  std::string msg;
  for (const auto& r : records) {
    for (const auto& p : r.problems()) msg += " record '" + r.id + "': " + p + ";";
    if (!ids.insert(r.id).second) msg += " duplicate id '" + r.id + "';";
  }
  if (!msg.empty()) throw ValidationError("dataset is invalid:" + msg);
}

}  // namespace dnd::mol
