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

#include <nlohmann/json.hpp>

#include "dnd/autodiff/layers.hpp"
#include "dnd/moldata/types.hpp"

namespace dnd::enc3d {

struct Encoder3DConfig {
  int num_layers = 4;
  int hidden_dim = 64;
  int num_rbf = 16;
  double cutoff = 6.0;  // angstrom
  std::string activation = "silu";
  int num_elements = mol::kAtomFeatureVocab[0];

  // Paper-scale reference preset (8 layers, 768 dims, 64 kernels).
  static Encoder3DConfig paper_preset();
  void validate() const;
};

void to_json(nlohmann::json& j, const Encoder3DConfig& c);
void from_json(const nlohmann::json& j, Encoder3DConfig& c);

// Gaussian radial basis with centers evenly spaced on [0, cutoff] and width
// equal to the center spacing.
struct RbfExpansion {
  std::vector<double> centers;
  double gamma = 1.0;

  RbfExpansion(int num_rbf, double cutoff);
  void expand(double distance, double* out) const;
};

// Cosine envelope, 1 at d = 0 and 0 (with zero slope) at d >= cutoff.
double smooth_cutoff(double distance, double cutoff);

// Symmetric N x N Euclidean distance matrix (row-major).
std::vector<double> pairwise_distances(const std::vector<mol::Vec3>& coords);

// Ordered pairs (i <- j), i != j, within the cutoff, with their distance
// features. Built once per conformer and shared by encoder and head.
template <typename T>
struct PairGeometry {
  std::size_t num_atoms = 0;
  std::vector<std::uint32_t> receiver;  // i
  std::vector<std::uint32_t> sender;    // j
  ad::Array<T> rbf;                     // (P, num_rbf)
  ad::Array<T> envelope;                // (P, 1)
  ad::Array<T> direction;               // (P, 3): (r_i - r_j) / max(d_ij, delta)

  std::size_t num_pairs() const { return receiver.size(); }
};

inline constexpr double kDirectionFloor = 1e-6;

template <typename T>
PairGeometry<T> make_pair_geometry(const std::vector<mol::Vec3>& coords, int num_rbf,
                                   double cutoff);

// Distance-only message passing encoder, invariant to rigid motions of the
// input and equivariant to atom permutations.
template <typename T>
class Encoder3D {
 public:
  Encoder3D(const Encoder3DConfig& config, std::uint64_t seed);

  const Encoder3DConfig& config() const { return config_; }
  ad::ParameterStore<T>& params() { return store_; }
  const ad::ParameterStore<T>& params() const { return store_; }

  // Z3D with shape (N, hidden_dim). Throws IndexError for atomic numbers
  // outside the embedding table.
  ad::Var<T> encode(ad::Tape<T>& tape, const mol::MoleculeGraph& graph,
                    const PairGeometry<T>& geometry) const;
  ad::Var<T> encode(ad::Tape<T>& tape, const mol::MoleculeGraph& graph,
                    const std::vector<mol::Vec3>& coords) const;

  // Forward pass without gradient bookkeeping.
  ad::Array<T> infer(const mol::MoleculeGraph& graph, const std::vector<mol::Vec3>& coords) const;

  PairGeometry<T> geometry(const std::vector<mol::Vec3>& coords) const {
    return make_pair_geometry<T>(coords, config_.num_rbf, config_.cutoff);
  }

 private:
  struct Layer {
    ad::Linear<T> msg_receiver;
    ad::Linear<T> msg_sender;
    ad::Linear<T> msg_rbf;
    ad::Linear<T> msg_out;
    ad::Linear<T> update;
    ad::LayerNormParams<T> norm;
  };

  Encoder3DConfig config_;
  ad::Activation activation_;
  ad::ParameterStore<T> store_;
  const ad::Parameter<T>* element_embedding_ = nullptr;
  const ad::Parameter<T>* chirality_embedding_ = nullptr;
  std::vector<Layer> layers_;
};

template <typename T>
struct NoisePrediction {
  ad::Var<T> epsilon;  // (N, 3)
  // True when no atom had a neighbor inside the cutoff (e.g. N = 1); the
  // prediction is then identically zero.
  bool no_neighbors = false;
};

// eps_i = sum_j phi(z_i, z_j, rbf(d_ij)) * (r_i - r_j) / max(d_ij, delta):
// invariant to translations, equivariant to rotations.
template <typename T>
class NoiseHead {
 public:
  NoiseHead(const Encoder3DConfig& config, std::uint64_t seed);

  ad::ParameterStore<T>& params() { return store_; }
  const ad::ParameterStore<T>& params() const { return store_; }

  NoisePrediction<T> predict(ad::Tape<T>& tape, ad::Var<T> z,
                             const PairGeometry<T>& geometry) const;

 private:
  ad::Activation activation_;
  ad::ParameterStore<T> store_;
  ad::Linear<T> receiver_;
  ad::Linear<T> sender_;
  ad::Linear<T> rbf_;
  ad::Linear<T> out_;
};

}  // namespace dnd::enc3d
