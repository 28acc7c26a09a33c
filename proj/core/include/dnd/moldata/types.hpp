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

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dnd::mol {

inline constexpr int kNumAtomFeatures = 9;
inline constexpr int kNumBondFeatures = 3;

// Vocabulary size of each categorical atom feature, in field order. The
// atomic number is stored as-is, so its table has an unused row 0.
inline constexpr std::array<int, kNumAtomFeatures> kAtomFeatureVocab = {120, 4, 12, 16, 10,
                                                                         6,   7, 2,  2};
inline constexpr std::array<int, kNumBondFeatures> kBondFeatureVocab = {5, 6, 2};

// Formal charges are stored as codes; code kFormalChargeOffset is neutral.
inline constexpr int kFormalChargeOffset = 5;

// Hybridization codes follow the usual SP, SP2, SP3, SP3D, SP3D2, other order.
inline constexpr int kHybridizationSp3 = 2;

struct AtomFeatures {
  int atomic_number = 6;
  int chirality = 0;
  int degree = 0;
  int formal_charge = kFormalChargeOffset;
  int num_hydrogens = 0;
  int num_radical_electrons = 0;
  int hybridization = kHybridizationSp3;
  int is_aromatic = 0;
  int is_in_ring = 0;

  std::array<int, kNumAtomFeatures> codes() const;
  static AtomFeatures from_codes(const std::array<int, kNumAtomFeatures>& codes);
  int formal_charge_value() const { return formal_charge - kFormalChargeOffset; }

  friend bool operator==(const AtomFeatures&, const AtomFeatures&) = default;
  friend auto operator<=>(const AtomFeatures&, const AtomFeatures&) = default;
};

struct BondFeatures {
  int bond_type = 0;
  int stereo = 0;
  int is_conjugated = 0;

  std::array<int, kNumBondFeatures> codes() const { return {bond_type, stereo, is_conjugated}; }
  static BondFeatures from_codes(const std::array<int, kNumBondFeatures>& c) {
    return {c[0], c[1], c[2]};
  }

  friend bool operator==(const BondFeatures&, const BondFeatures&) = default;
  friend auto operator<=>(const BondFeatures&, const BondFeatures&) = default;
};

struct Bond {
  std::uint32_t u = 0;
  std::uint32_t v = 0;
  BondFeatures features;

  friend bool operator==(const Bond&, const Bond&) = default;
};

// Heavy-atom graph; hydrogens only appear through AtomFeatures::num_hydrogens.
struct MoleculeGraph {
  std::vector<AtomFeatures> atoms;
  std::vector<Bond> bonds;

  std::size_t num_atoms() const { return atoms.size(); }
  std::size_t num_bonds() const { return bonds.size(); }
  std::vector<std::vector<std::uint32_t>> adjacency() const;

  // Appends every invariant violation to `problems`.
  void collect_problems(std::vector<std::string>& problems) const;
  bool is_connected() const;

  friend bool operator==(const MoleculeGraph&, const MoleculeGraph&) = default;
};

using Vec3 = std::array<double, 3>;

// Coordinates in angstrom.
struct Conformer {
  std::vector<Vec3> coords;

  std::size_t size() const { return coords.size(); }
  void collect_problems(std::size_t expected_atoms, std::vector<std::string>& problems) const;
  Vec3 centroid() const;

  friend bool operator==(const Conformer&, const Conformer&) = default;
};

inline constexpr double kMinAtomSeparation = 0.5;

using Label = std::optional<double>;

struct MoleculeRecord {
  std::string id;
  MoleculeGraph graph;
  std::optional<Conformer> conformer;
  std::optional<std::vector<Label>> labels;
  // Set when geometry relaxation hit its step limit. Not serialized.
  bool relax_converged = true;

  std::vector<std::string> problems() const;
  // Throws ValidationError naming the record.
  void validate() const;

  friend bool operator==(const MoleculeRecord& a, const MoleculeRecord& b) {
    return a.id == b.id && a.graph == b.graph && a.conformer == b.conformer &&
           a.labels == b.labels;
  }
};

struct Dataset {
  std::vector<MoleculeRecord> records;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  // Largest atom count; sizes the node-identifier width of the 2D encoder.
  std::size_t max_atoms() const;
  // Validates every record plus id uniqueness.
  void validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

}  // namespace dnd::mol
