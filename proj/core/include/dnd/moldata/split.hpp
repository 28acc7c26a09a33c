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
#include <vector>

#include "dnd/moldata/types.hpp"

namespace dnd::mol {

struct Splits {
  Dataset train;
  Dataset val;
  Dataset test;
};

// Orders records by a seeded hash of their id, then cuts val and test with
// floor(ratio * n); the remainder goes to train. The partition therefore
// depends on ids, not input positions.
Splits split_random(const Dataset& dataset, std::array<double, 3> ratios, std::uint64_t seed);

// Deterministic subset of round(fraction * n) records (at least one), chosen
// by the same id hashing as split_random.
Dataset subsample(const Dataset& dataset, double fraction, std::uint64_t seed);

// Per-target standardization fit on a training split.
class LabelNormalizer {
 public:
  LabelNormalizer() = default;

  // Fits the listed targets. Needs at least 2 non-missing values per target
  // and a non-zero population std.
  static LabelNormalizer fit(const Dataset& train, const std::vector<std::size_t>& targets);
  // Rebuilds a fitted normalizer. Throws ContractError on length mismatch or
  // non-positive std.
  static LabelNormalizer from_parts(std::vector<std::size_t> targets, std::vector<double> mean,
                                    std::vector<double> std);

  const std::vector<std::size_t>& targets() const { return targets_; }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& std() const { return std_; }

  // Returns a copy whose labels are the normalized selected targets, in the
  // order of targets(). Missing labels stay missing.
  Dataset apply(const Dataset& dataset) const;
  double normalize(std::size_t slot, double value) const;
  double denormalize(std::size_t slot, double value) const;

 private:
  std::vector<std::size_t> targets_;
  std::vector<double> mean_;
  std::vector<double> std_;
};

}  // namespace dnd::mol
