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

#include "dnd/moldata/overlap.hpp"

#include <algorithm>
#include <queue>
#include <set>
#include <sstream>
#include <unordered_set>

#include "dnd/util/error.hpp"

namespace dnd::mol {
namespace {

std::string serialize_from(const MoleculeGraph& g, std::uint32_t start) {
  const std::size_t n = g.num_atoms();
  std::vector<std::vector<std::pair<std::uint32_t, BondFeatures>>> adj(n);
  for (const Bond& b : g.bonds) {
    adj[b.u].push_back({b.v, b.features});
    adj[b.v].push_back({b.u, b.features});
  }
  for (auto& nbrs : adj) {
    std::stable_sort(nbrs.begin(), nbrs.end(), [&](const auto& x, const auto& y) {
      if (g.atoms[x.first] != g.atoms[y.first]) return g.atoms[x.first] < g.atoms[y.first];
      return x.second < y.second;
    });
  }
  std::vector<int> rank(n, -1);
  std::vector<std::uint32_t> order;
  std::queue<std::uint32_t> q;
  q.push(start);
  rank[start] = 0;
  while (!q.empty()) {
    const std::uint32_t a = q.front();
    q.pop();
    order.push_back(a);
    for (const auto& [b, f] : adj[a]) {
      if (rank[b] < 0) {
        rank[b] = static_cast<int>(order.size() + q.size());
        q.push(b);
      }
    }
  }
  std::ostringstream os;
  for (std::uint32_t a : order) {
    os << '[';
    for (int c : g.atoms[a].codes()) os << c << ',';
    os << ']';
  }
  std::vector<std::array<int, 5>> bonds;
  for (const Bond& b : g.bonds) {
    const int u = rank[b.u], v = rank[b.v];
    const auto c = b.features.codes();
    bonds.push_back({std::min(u, v), std::max(u, v), c[0], c[1], c[2]});
  }
  std::sort(bonds.begin(), bonds.end());
  os << '|';
  for (const auto& b : bonds) os << b[0] << '-' << b[1] << ':' << b[2] << b[3] << b[4] << ';';
  return os.str();
}

}  // namespace

std::string canonical_form(const MoleculeGraph& graph) {
  if (graph.num_atoms() == 0) return {};
  std::string best;
  for (std::uint32_t s = 0; s < graph.num_atoms(); ++s) {
    std::string candidate = serialize_from(graph, s);
    if (s == 0 || candidate < best) best = std::move(candidate);
  }
  return best;
}

std::string composition_key(const MoleculeGraph& graph) {
  std::vector<int> z;
  for (const auto& a : graph.atoms) z.push_back(a.atomic_number);
  std::sort(z.begin(), z.end());
  std::string key;
  for (std::size_t i = 0; i < z.size(); ++i) key += (i ? "," : "") + std::to_string(z[i]);
  return key;
}

OverlapStats dataset_overlap(const Dataset& a, const Dataset& b) {
  if (a.empty() || b.empty()) throw ContractError("dataset_overlap: empty dataset");
  std::set<int> elements_a, elements_b;
  std::unordered_set<std::string> comp_b, mol_b;
  for (const auto& r : b.records) {
    for (const auto& atom : r.graph.atoms) elements_b.insert(atom.atomic_number);
    comp_b.insert(composition_key(r.graph));
    mol_b.insert(canonical_form(r.graph));
  }
  std::size_t comp_hits = 0, mol_hits = 0;
  for (const auto& r : a.records) {
    for (const auto& atom : r.graph.atoms) elements_a.insert(atom.atomic_number);
    if (comp_b.count(composition_key(r.graph))) ++comp_hits;
    if (mol_b.count(canonical_form(r.graph))) ++mol_hits;
  }
  std::size_t element_hits = 0;
  for (int z : elements_a) element_hits += elements_b.count(z);
  OverlapStats s;
  s.element_pct = 100.0 * static_cast<double>(element_hits) / static_cast<double>(elements_a.size());
  s.composition_pct = 100.0 * static_cast<double>(comp_hits) / static_cast<double>(a.size());
  s.molecule_pct = 100.0 * static_cast<double>(mol_hits) / static_cast<double>(a.size());
  return s;
}

void write_overlap_csv(const OverlapStats& stats, std::ostream& out) {
  out << "level,percent\n";
  out << "element," << stats.element_pct << '\n';
  out << "composition," << stats.composition_pct << '\n';
  out << "molecule," << stats.molecule_pct << '\n';
}

}  // namespace dnd::mol
