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

#include "dnd/moldata/split.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dnd/util/error.hpp"
#include "dnd/util/rng.hpp"

namespace dnd::mol {
namespace {

std::vector<std::size_t> hashed_order(const Dataset& dataset, std::uint64_t seed) {
  std::vector<std::pair<std::uint64_t, std::size_t>> keyed;
  keyed.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    keyed.emplace_back(mix_seed(seed, hash_string(dataset.records[i].id)), i);
  }
  std::sort(keyed.begin(), keyed.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return dataset.records[a.second].id < dataset.records[b.second].id;
  });
  std::vector<std::size_t> order;
  order.reserve(keyed.size());
  for (const auto& k : keyed) order.push_back(k.second);
  return order;
}

}  // namespace

Splits split_random(const Dataset& dataset, std::array<double, 3> ratios, std::uint64_t seed) {
  if (dataset.empty()) throw ContractError("split_random: empty dataset");
  for (double r : ratios) {
    if (r < 0) throw ConfigError("split_random: negative ratio");
  }
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) {
    throw ConfigError("split_random: ratios must sum to 1");
  }
  const std::size_t n = dataset.size();
  // Small epsilon so 0.1 * 10 floors to 1, not 0.
  const auto n_val = static_cast<std::size_t>(std::floor(ratios[1] * static_cast<double>(n) + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(ratios[2] * static_cast<double>(n) + 1e-9));
  const std::size_t n_train = n - n_val - n_test;
  const auto order = hashed_order(dataset, seed);
  Splits s;
  for (std::size_t k = 0; k < n; ++k) {
    const MoleculeRecord& r = dataset.records[order[k]];
    if (k < n_train) {
      s.train.records.push_back(r);
    } else if (k < n_train + n_val) {
      s.val.records.push_back(r);
    } else {
      s.test.records.push_back(r);
    }
  }
  return s;
}

Dataset subsample(const Dataset& dataset, double fraction, std::uint64_t seed) {
  if (fraction <= 0 || fraction > 1) throw ConfigError("subsample: fraction must lie in (0, 1]");
  if (dataset.empty()) throw ContractError("subsample: empty dataset");
  if (fraction == 1.0) return dataset;
  const auto order = hashed_order(dataset, mix_seed(seed, 0x5ab5));
  const std::size_t keep = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(dataset.size()))));
  std::vector<std::size_t> chosen(order.begin(), order.begin() + keep);
  std::sort(chosen.begin(), chosen.end());
  Dataset out;
  for (std::size_t i : chosen) out.records.push_back(dataset.records[i]);
  return out;
}

LabelNormalizer LabelNormalizer::fit(const Dataset& train,
                                     const std::vector<std::size_t>& targets) {
  if (targets.empty()) throw ConfigError("LabelNormalizer: no targets selected");
  LabelNormalizer n;
  n.targets_ = targets;
  for (std::size_t t : targets) {
    std::vector<double> values;
    for (const auto& r : train.records) {
      if (r.labels && t < r.labels->size() && (*r.labels)[t]) values.push_back(*(*r.labels)[t]);
    }
    if (values.size() < 2) {
      throw DegenerateError("LabelNormalizer: target " + std::to_string(t) + " has " +
                            std::to_string(values.size()) + " values, need at least 2");
    }
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) /
                        static_cast<double>(values.size());
    double var = 0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size());
    if (!(var > 0)) {
      throw DegenerateError("LabelNormalizer: target " + std::to_string(t) + " is constant");
    }
    n.mean_.push_back(mean);
    n.std_.push_back(std::sqrt(var));
  }
  return n;
}

LabelNormalizer LabelNormalizer::from_parts(std::vector<std::size_t> targets,
                                            std::vector<double> mean, std::vector<double> std) {
  if (mean.size() != targets.size() || std.size() != targets.size()) {
    throw ContractError("label normalizer: targets, mean and std lengths differ");
  }
  for (double s : std) {
    if (!(s > 0)) throw ContractError("label normalizer: std must be positive");
  }
  LabelNormalizer n;
  n.targets_ = std::move(targets);
  n.mean_ = std::move(mean);
  n.std_ = std::move(std);
  return n;
}

Dataset LabelNormalizer::apply(const Dataset& dataset) const {
  Dataset out = dataset;
  for (auto& r : out.records) {
    std::vector<Label> labels(targets_.size());
    if (r.labels) {
      for (std::size_t s = 0; s < targets_.size(); ++s) {
        const std::size_t t = targets_[s];
        if (t < r.labels->size() && (*r.labels)[t]) labels[s] = normalize(s, *(*r.labels)[t]);
      }
    }
    r.labels = std::move(labels);
  }
  return out;
}

double LabelNormalizer::normalize(std::size_t slot, double value) const {
  return (value - mean_.at(slot)) / std_.at(slot);
}

double LabelNormalizer::denormalize(std::size_t slot, double value) const {
  return value * std_.at(slot) + mean_.at(slot);
}

}  // namespace dnd::mol
