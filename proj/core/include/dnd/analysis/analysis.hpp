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
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dnd/autodiff/array.hpp"
#include "dnd/encoder2d/encoder2d.hpp"
#include "dnd/moldata/types.hpp"
#include "dnd/trainer/metrics.hpp"
#include "dnd/trainer/trainer.hpp"

namespace dnd::analysis {

// Sample Pearson correlation. Throws DimensionError for unequal lengths or
// fewer than 2 points and DegenerateError when either input is constant.
double pearson(std::span<const double> x, std::span<const double> y);

struct HeadCorrelation {
  int layer = 0;
  int head = 0;
  double abs_pearson = 0;  // mean over contributing molecules
  std::size_t molecules = 0;
};

struct HeadDistance {
  int layer = 0;
  int head = 0;
  double mean_weighted_distance = 0;  // angstrom
  std::size_t molecules = 0;
};

struct AttentionReport {
  std::vector<HeadCorrelation> correlations;  // layer-major, num_layers x num_heads rows
  std::vector<HeadDistance> distances;
  std::size_t molecules_used = 0;
  std::size_t skipped_small = 0;     // N < 3
  std::size_t skipped_constant = 0;  // (molecule, head) pairs with constant logits
};

// Called before each molecule is encoded.
using MoleculeObserver = std::function<void(const mol::MoleculeRecord&)>;

// Node-pair (i != j) pre-softmax logits against 3D distances per head, and
// attention-weighted distances from post-softmax weights. Identifiers are
// seeded by record id. Records need conformers; the student never sees them.
AttentionReport attention_report(enc2d::Encoder2D<train::Real>& student, const mol::Dataset& data,
                                 const MoleculeObserver& observer = {});

std::vector<HeadCorrelation> attention_distance_report(enc2d::Encoder2D<train::Real>& student,
                                                       const mol::Dataset& data);
std::vector<HeadDistance> attention_weighted_distance(enc2d::Encoder2D<train::Real>& student,
                                                      const mol::Dataset& data);

// Student of a distill, contrastive or finetune checkpoint.
std::unique_ptr<enc2d::Encoder2D<train::Real>> load_student(const train::Checkpoint& ckpt);

void write_correlations_csv(const std::vector<HeadCorrelation>& rows,
                            const std::filesystem::path& path);
void write_distances_csv(const std::vector<HeadDistance>& rows, const std::filesystem::path& path);

// Static SVG histogram of values over [lo, hi] with the given bin count.
std::string histogram_svg(std::span<const double> values, int bins, double lo, double hi,
                          const std::string& title);

// Mixture of isotropic Gaussians around component conformers.
struct GaussianMixtureOracle {
  std::vector<std::vector<mol::Vec3>> components;
  std::vector<double> weights;
  double sigma = 0.1;

  // Throws ContractError unless weights are positive, sum to 1 within 1e-9,
  // match the components, and all components share one atom count.
  void validate() const;
};

// E[eps | perturbed] = sum_k w_k (perturbed - R_k) / sigma with
// responsibilities from log-sum-exp. Shape (N, 3).
ad::Array<double> oracle_denoiser(const GaussianMixtureOracle& oracle,
                                  const std::vector<mol::Vec3>& perturbed);

// Proper rotation and translation of mobile onto target minimizing RMSD.
std::vector<mol::Vec3> kabsch_align(const std::vector<mol::Vec3>& mobile,
                                    const std::vector<mol::Vec3>& target);

// Single-component oracle over the rigid-motion orbit of reference: the
// reference is first aligned onto the perturbed coordinates.
ad::Array<double> aligned_oracle_denoiser(const std::vector<mol::Vec3>& reference,
                                          const std::vector<mol::Vec3>& perturbed, double sigma);

// Tidy CSV with columns variant,epoch,split,loss,log10_loss,gap where gap is
// val - train of that epoch. Throws ContractError on duplicate
// (variant, epoch) pairs.
void export_curves(const std::vector<std::pair<std::string, train::MetricsLog>>& logs,
                   std::ostream& out);
void export_curves(const std::vector<std::pair<std::string, train::MetricsLog>>& logs,
                   const std::filesystem::path& path);

}  // namespace dnd::analysis
