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

#include <ostream>
#include <string>

#include "dnd/moldata/types.hpp"

namespace dnd::mol {

// Lexicographically smallest serialization over BFS orderings started from
// every atom, with neighbors visited in (atom features, bond features) order.
// Isomorphic graphs usually, but not always, share a form: ties between
// equal-featured neighbors fall back to input order, so highly symmetric
// graphs may produce distinct forms.
std::string canonical_form(const MoleculeGraph& graph);

// Sorted heavy-atom atomic numbers, e.g. "6,6,7,8".
std::string composition_key(const MoleculeGraph& graph);

struct OverlapStats {
  double element_pct = 0.0;
  double composition_pct = 0.0;
  double molecule_pct = 0.0;
};

// Percentages (0-100) of `a` found in `b` at each level.
OverlapStats dataset_overlap(const Dataset& a, const Dataset& b);

// CSV with header "level,percent".
void write_overlap_csv(const OverlapStats& stats, std::ostream& out);

}  // namespace dnd::mol
