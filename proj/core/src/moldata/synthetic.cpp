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

#include "dnd/moldata/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <tuple>

#include "dnd/moldata/jsonl.hpp"
#include "dnd/util/error.hpp"
#include "dnd/util/rng.hpp"

namespace dnd::mol {
namespace {

int base_valence(int atomic_number) {
  switch (atomic_number) {
    case 1: case 9: case 17: case 35: case 53: return 1;
    case 8: case 16: return 2;
    case 5: case 7: case 15: return 3;
    case 6: case 14: return 4;
    default: return 2;
  }
}

// Valence after charge: N+ behaves like C, O- like F.
int valence(const AtomFeatures& a) {
  return base_valence(a.atomic_number) + (a.atomic_number == 7 ? a.formal_charge_value() : 0) +
         (a.atomic_number == 8 ? a.formal_charge_value() : 0);
}

std::vector<std::uint32_t> tree_path(const std::vector<std::vector<std::uint32_t>>& adj,
                                     std::uint32_t from, std::uint32_t to) {
  std::vector<int> parent(adj.size(), -1);
  std::queue<std::uint32_t> q;
  q.push(from);
  parent[from] = static_cast<int>(from);
  while (!q.empty()) {
    const std::uint32_t a = q.front();
    q.pop();
    if (a == to) break;
    for (std::uint32_t b : adj[a]) {
      if (parent[b] < 0) {
        parent[b] = static_cast<int>(a);
        q.push(b);
      }
    }
  }
  std::vector<std::uint32_t> path{to};
  while (path.back() != from) path.push_back(static_cast<std::uint32_t>(parent[path.back()]));
  return path;
}

void finalize_features(MoleculeGraph& g) {
  for (auto& a : g.atoms) a.degree = 0;
  for (const Bond& b : g.bonds) {
    ++g.atoms[b.u].degree;
    ++g.atoms[b.v].degree;
  }
  for (auto& a : g.atoms) {
    a.num_hydrogens = std::max(0, valence(a) - a.degree);
    a.hybridization = kHybridizationSp3;
  }
}

}  // namespace

MoleculeGraph generate_graph(std::size_t num_atoms, const SyntheticConfig& config,
                             std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> multivalent;
  for (int z : config.element_set) {
    if (base_valence(z) >= 2) multivalent.push_back(z);
  }
  if (multivalent.empty() && num_atoms > 2) {
    throw ConfigError("element_set has no element of valence >= 2; cannot build chains");
  }

  MoleculeGraph g;
  std::vector<int> free_slots;
  auto add_atom = [&](int z) {
    AtomFeatures a;
    a.atomic_number = z;
    if (z == 7 && rng.bernoulli(config.charge_probability)) a.formal_charge = kFormalChargeOffset + 1;
    if (z == 8 && rng.bernoulli(config.charge_probability)) a.formal_charge = kFormalChargeOffset - 1;
    g.atoms.push_back(a);
    free_slots.push_back(valence(a));
  };

  add_atom(num_atoms > 2 ? multivalent[rng.index(multivalent.size())]
                         : config.element_set[rng.index(config.element_set.size())]);
  for (std::size_t i = 1; i < num_atoms; ++i) {
    std::vector<std::uint32_t> open;
    int total_open = 0;
    for (std::uint32_t k = 0; k < g.atoms.size(); ++k) {
      if (free_slots[k] > 0) {
        open.push_back(k);
        total_open += free_slots[k];
      }
    }
    if (open.empty()) throw ConfigError("synthetic generator ran out of valence");
    const std::uint32_t parent =
        config.chain ? static_cast<std::uint32_t>(i - 1) : open[rng.index(open.size())];
    // Keep at least one open slot while atoms remain to be placed.
    const bool must_extend = (config.chain || total_open == 1) && i + 1 < num_atoms;
    int z = must_extend ? multivalent[rng.index(multivalent.size())]
                        : config.element_set[rng.index(config.element_set.size())];
    add_atom(z);
    const std::uint32_t child = static_cast<std::uint32_t>(g.atoms.size() - 1);
    if (must_extend && free_slots[child] < 2) {
      // A -1 charge on O leaves a single slot; drop the charge.
      g.atoms[child].formal_charge = kFormalChargeOffset;
      free_slots[child] = valence(g.atoms[child]);
    }
    g.bonds.push_back({parent, child, {}});
    --free_slots[parent];
    --free_slots[child];
  }

  if (!config.chain && num_atoms >= 5 && rng.bernoulli(config.ring_probability)) {
    const auto adj = g.adjacency();
    std::vector<std::pair<std::uint32_t, std::uint32_t>> candidates;
    for (std::uint32_t u = 0; u < g.atoms.size(); ++u) {
      if (free_slots[u] <= 0) continue;
      for (std::uint32_t v = u + 1; v < g.atoms.size(); ++v) {
        if (free_slots[v] <= 0) continue;
        const std::size_t hops = tree_path(adj, u, v).size() - 1;
        if (hops >= 4 && hops <= 6) candidates.emplace_back(u, v);
      }
    }
    if (!candidates.empty()) {
      const auto [u, v] = candidates[rng.index(candidates.size())];
      for (std::uint32_t a : tree_path(adj, u, v)) g.atoms[a].is_in_ring = 1;
      g.bonds.push_back({u, v, {}});
      --free_slots[u];
      --free_slots[v];
    }
  }
  std::sort(g.bonds.begin(), g.bonds.end(),
            [](const Bond& a, const Bond& b) { return std::tie(a.u, a.v) < std::tie(b.u, b.v); });
  finalize_features(g);
  return g;
}

double relax_energy(const MoleculeGraph& graph, const std::vector<Vec3>& coords,
                    std::vector<Vec3>* gradient) {
  const std::size_t n = coords.size();
  if (gradient) gradient->assign(n, Vec3{0, 0, 0});
  std::vector<char> bonded(n * n, 0);
  for (const Bond& b : graph.bonds) {
    bonded[b.u * n + b.v] = 1;
    bonded[b.v * n + b.u] = 1;
  }
  double energy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      Vec3 diff{};
      double d2 = 0;
      for (int k = 0; k < 3; ++k) {
        diff[k] = coords[i][k] - coords[j][k];
        d2 += diff[k] * diff[k];
      }
      const double d = std::sqrt(d2);
      double de = 0;  // dE/dd
      if (bonded[i * n + j]) {
        energy += (d - kBondLength) * (d - kBondLength);
        de = 2 * (d - kBondLength);
      } else if (d < kNonbondedMinimum) {
        energy += (kNonbondedMinimum - d) * (kNonbondedMinimum - d);
        de = -2 * (kNonbondedMinimum - d);
      }
      if (gradient && de != 0 && d > 0) {
        for (int k = 0; k < 3; ++k) {
          (*gradient)[i][k] += de * diff[k] / d;
          (*gradient)[j][k] -= de * diff[k] / d;
        }
      }
    }
  }
  return energy;
}

RelaxResult relax_geometry(const MoleculeGraph& graph, std::uint64_t seed,
                           const RelaxOptions& options) {
  if (!graph.is_connected()) throw ValidationError("relax_geometry: graph is not connected");
  const std::size_t n = graph.num_atoms();
  Rng rng(seed);

  // Random walk along a BFS tree, then jitter.
  std::vector<Vec3> x(n, Vec3{0, 0, 0});
  {
    const auto adj = graph.adjacency();
    std::vector<char> placed(n, 0);
    std::queue<std::uint32_t> q;
    q.push(0);
    placed[0] = 1;
    while (!q.empty()) {
      const std::uint32_t a = q.front();
      q.pop();
      for (std::uint32_t b : adj[a]) {
        if (placed[b]) continue;
        Vec3 dir{rng.normal(), rng.normal(), rng.normal()};
        const double len = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
        for (int k = 0; k < 3; ++k) x[b][k] = x[a][k] + kBondLength * dir[k] / std::max(len, 1e-12);
        placed[b] = 1;
        q.push(b);
      }
    }
    for (auto& p : x)
      for (double& v : p) v += 0.3 * rng.normal();
  }

  RelaxResult result;
  std::vector<Vec3> grad;
  double energy = relax_energy(graph, x, &grad);
  result.initial_energy = energy;
  double step = 0.1;
  std::vector<Vec3> trial(n);
  std::vector<Vec3> trial_grad;
  auto norm_of = [](const std::vector<Vec3>& g) {
    double s = 0;
    for (const auto& p : g)
      for (double v : p) s += v * v;
    return std::sqrt(s);
  };
  double gnorm = norm_of(grad);
  std::size_t it = 0;
  for (; it < options.max_steps && gnorm >= options.gradient_tolerance; ++it) {
    while (true) {
      for (std::size_t i = 0; i < n; ++i)
        for (int k = 0; k < 3; ++k) trial[i][k] = x[i][k] - step * grad[i][k];
      const double e = relax_energy(graph, trial, &trial_grad);
      if (e <= energy - 1e-4 * step * gnorm * gnorm) {
        x.swap(trial);
        grad.swap(trial_grad);
        energy = e;
        step = std::min(step * 1.5, 1.0);
        break;
      }
      step *= 0.5;
      if (step < 1e-14) break;
    }
    gnorm = norm_of(grad);
    if (step < 1e-14) break;
  }
  result.steps = it;
  result.converged = gnorm < options.gradient_tolerance;
  result.final_energy = energy;
  result.gradient_norm = gnorm;

  Conformer c{std::move(x)};
  const Vec3 mid = c.centroid();
  for (auto& p : c.coords)
    for (int k = 0; k < 3; ++k) p[k] -= mid[k];
  result.conformer = std::move(c);
  return result;
}

std::vector<std::vector<int>> shortest_path_lengths(const MoleculeGraph& graph) {
  const std::size_t n = graph.num_atoms();
  const auto adj = graph.adjacency();
  std::vector<std::vector<int>> dist(n, std::vector<int>(n, -1));
  for (std::uint32_t s = 0; s < n; ++s) {
    std::queue<std::uint32_t> q;
    q.push(s);
    dist[s][s] = 0;
    while (!q.empty()) {
      const std::uint32_t a = q.front();
      q.pop();
      for (std::uint32_t b : adj[a]) {
        if (dist[s][b] < 0) {
          dist[s][b] = dist[s][a] + 1;
          q.push(b);
        }
      }
    }
  }
  return dist;
}

double wiener_index(const MoleculeGraph& graph) {
  const auto dist = shortest_path_lengths(graph);
  double total = 0;
  for (std::size_t i = 0; i < dist.size(); ++i)
    for (std::size_t j = i + 1; j < dist.size(); ++j) total += dist[i][j];
  return total;
}

double radius_of_gyration(const Conformer& conformer) {
  if (conformer.coords.empty()) throw ContractError("radius_of_gyration: empty conformer");
  const Vec3 c = conformer.centroid();
  double acc = 0;
  for (const auto& p : conformer.coords)
    for (int k = 0; k < 3; ++k) acc += (p[k] - c[k]) * (p[k] - c[k]);
  return std::sqrt(acc / static_cast<double>(conformer.coords.size()));
}

SyntheticTargets synthetic_targets(const MoleculeRecord& record) {
  if (!record.conformer) {
    throw ContractError("synthetic_targets: record '" + record.id +
                        "' has no conformer for radius_of_gyration");
  }
  SyntheticTargets t;
  t.radius_of_gyration = radius_of_gyration(*record.conformer);
  t.wiener_index = wiener_index(record.graph);
  for (const auto& a : record.graph.atoms) t.charge_sum += a.formal_charge_value();
  return t;
}

Dataset generate_synthetic(const SyntheticConfig& config) {
  if (config.min_atoms < 4 || config.min_atoms > config.max_atoms || config.max_atoms > 30) {
    throw ConfigError("generate_synthetic: need 4 <= min_atoms <= max_atoms <= 30, got " +
                      std::to_string(config.min_atoms) + ".." + std::to_string(config.max_atoms));
  }
  if (config.element_set.empty()) throw ConfigError("generate_synthetic: empty element_set");
  for (int z : config.element_set) {
    if (z < 1 || z >= kAtomFeatureVocab[0]) {
      throw ConfigError("generate_synthetic: atomic number " + std::to_string(z) + " out of range");
    }
  }
  if (config.ring_probability < 0 || config.ring_probability > 1) {
    throw ConfigError("generate_synthetic: ring_probability must lie in [0, 1]");
  }

  Dataset ds;
  ds.records.reserve(config.count);
  for (std::size_t i = 0; i < config.count; ++i) {
    const std::uint64_t record_seed = mix_seed(config.seed, i);
    Rng size_rng(record_seed);
    const std::size_t n =
        config.min_atoms + size_rng.index(config.max_atoms - config.min_atoms + 1);
    MoleculeRecord r;
    char id[32];
    std::snprintf(id, sizeof id, "syn-%06zu", i);
    r.id = id;
    r.graph = generate_graph(n, config, mix_seed(record_seed, 1));
    RelaxResult relaxed = relax_geometry(r.graph, mix_seed(record_seed, 2));
    r.relax_converged = relaxed.converged;
    for (auto& p : relaxed.conformer.coords)
      for (double& v : p) v = round_to_serialized(v);
    r.conformer = std::move(relaxed.conformer);
    const SyntheticTargets t = synthetic_targets(r);
    r.labels = std::vector<Label>{round_to_serialized(t.radius_of_gyration),
                                  round_to_serialized(t.wiener_index),
                                  round_to_serialized(t.charge_sum)};
    ds.records.push_back(std::move(r));
  }
  return ds;
}

}  // namespace dnd::mol
