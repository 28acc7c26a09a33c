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

#include <cstdint>
#include <vector>

#include "dnd/moldata/types.hpp"

namespace dnd::mol {

struct SyntheticConfig {
  std::size_t count = 100;
  std::uint64_t seed = 0;
  std::size_t min_atoms = 6;
  std::size_t max_atoms = 20;
  std::vector<int> element_set = {6, 6, 6, 7, 8};  // repeats act as weights
  double ring_probability = 0.3;
  // Chance that an eligible N (O) atom carries a +1 (-1) formal charge.
  double charge_probability = 0.05;
  // Path graphs only (no branching, no rings).
  bool chain = false;
};

// Random connected heavy-atom graphs (trees plus at most one ring closure)
// with relaxed conformers and labels {radius_of_gyration, wiener_index,
// charge_sum}. Record i is generated from mix_seed(seed, i), so the output
// is deterministic and independent of generation order.
Dataset generate_synthetic(const SyntheticConfig& config);

// One graph as generate_synthetic would build it for the given seed.
MoleculeGraph generate_graph(std::size_t num_atoms, const SyntheticConfig& config,
                             std::uint64_t seed);

inline constexpr double kBondLength = 1.5;       // angstrom
inline constexpr double kNonbondedMinimum = 2.0;  // angstrom

struct RelaxOptions {
  double gradient_tolerance = 1e-4;
  std::size_t max_steps = 5000;
};

struct RelaxResult {
  Conformer conformer;  // centered at the origin
  bool converged = false;
  std::size_t steps = 0;
  double initial_energy = 0.0;
  double final_energy = 0.0;
  double gradient_norm = 0.0;
};

// E = sum_bonds (d - 1.5)^2 + sum_nonbonded max(0, 2 - d)^2.
double relax_energy(const MoleculeGraph& graph, const std::vector<Vec3>& coords,
                    std::vector<Vec3>* gradient = nullptr);

// Gradient descent with Armijo backtracking from a seeded random-walk
// initialization.
RelaxResult relax_geometry(const MoleculeGraph& graph, std::uint64_t seed,
                           const RelaxOptions& options = {});

struct SyntheticTargets {
  double radius_of_gyration = 0.0;
  double wiener_index = 0.0;
  double charge_sum = 0.0;
};

inline constexpr std::size_t kTargetRadiusOfGyration = 0;
inline constexpr std::size_t kTargetWienerIndex = 1;
inline constexpr std::size_t kTargetChargeSum = 2;

// Throws ContractError when the record lacks a conformer.
SyntheticTargets synthetic_targets(const MoleculeRecord& record);
double radius_of_gyration(const Conformer& conformer);
double wiener_index(const MoleculeGraph& graph);
// All-pairs hop counts by BFS.
std::vector<std::vector<int>> shortest_path_lengths(const MoleculeGraph& graph);

}  // namespace dnd::mol
