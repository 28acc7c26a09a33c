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

#include "dnd/encoder3d/encoder3d.hpp"

#include <cmath>
#include <numbers>

#include "dnd/util/error.hpp"
#include "dnd/util/rng.hpp"

namespace dnd::enc3d {

using ad::Array;
using ad::Shape;
using ad::Tape;
using ad::Var;

Encoder3DConfig Encoder3DConfig::paper_preset() {
  Encoder3DConfig c;
  c.num_layers = 8;
  c.hidden_dim = 768;
  c.num_rbf = 64;
  return c;
}

void Encoder3DConfig::validate() const {
  std::string problems;
  if (num_layers < 1) problems += " num_layers must be >= 1;";
  if (hidden_dim < 4) problems += " hidden_dim must be >= 4;";
  if (num_rbf < 2) problems += " num_rbf must be >= 2;";
  if (!(cutoff > 0)) problems += " cutoff must be > 0;";
  if (num_elements < 2) problems += " num_elements must be >= 2;";
  try {
    ad::parse_activation(activation);
  } catch (const ConfigError& e) {
    problems += std::string(" ") + e.what() + ";";
  }
  if (!problems.empty()) throw ConfigError("encoder3d config:" + problems);
}

void to_json(nlohmann::json& j, const Encoder3DConfig& c) {
  j = nlohmann::json{{"num_layers", c.num_layers}, {"hidden_dim", c.hidden_dim},
                     {"num_rbf", c.num_rbf},       {"cutoff", c.cutoff},
                     {"activation", c.activation}, {"num_elements", c.num_elements}};
}

void from_json(const nlohmann::json& j, Encoder3DConfig& c) {
  c.num_layers = j.value("num_layers", c.num_layers);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.num_rbf = j.value("num_rbf", c.num_rbf);
  c.cutoff = j.value("cutoff", c.cutoff);
  c.activation = j.value("activation", c.activation);
  c.num_elements = j.value("num_elements", c.num_elements);
}

RbfExpansion::RbfExpansion(int num_rbf, double cutoff) {
  const double spacing = cutoff / static_cast<double>(num_rbf - 1);
  for (int k = 0; k < num_rbf; ++k) centers.push_back(spacing * k);
  gamma = 0.5 / (spacing * spacing);
}

void RbfExpansion::expand(double distance, double* out) const {
  for (std::size_t k = 0; k < centers.size(); ++k) {
    const double u = distance - centers[k];
    out[k] = std::exp(-gamma * u * u);
  }
}

double smooth_cutoff(double distance, double cutoff) {
  if (distance >= cutoff) return 0.0;
  return 0.5 * (std::cos(std::numbers::pi * distance / cutoff) + 1.0);
}

std::vector<double> pairwise_distances(const std::vector<mol::Vec3>& coords) {
  const std::size_t n = coords.size();
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0;
      for (int k = 0; k < 3; ++k) s += (coords[i][k] - coords[j][k]) * (coords[i][k] - coords[j][k]);
      d[i * n + j] = d[j * n + i] = std::sqrt(s);
    }
  }
  return d;
}

template <typename T>
PairGeometry<T> make_pair_geometry(const std::vector<mol::Vec3>& coords, int num_rbf,
                                   double cutoff) {
  const std::size_t n = coords.size();
  for (const auto& p : coords) {
    for (double v : p) {
      if (!std::isfinite(v)) throw NumericError("pair geometry: non-finite coordinate");
    }
  }
  const auto dist = pairwise_distances(coords);
  const RbfExpansion rbf(num_rbf, cutoff);
  PairGeometry<T> g;
  g.num_atoms = n;
  std::vector<double> rbf_rows, env, dirs, buf(static_cast<std::size_t>(num_rbf));
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d = dist[i * n + j];
      if (d >= cutoff) continue;
      g.receiver.push_back(i);
      g.sender.push_back(j);
      rbf.expand(d, buf.data());
      rbf_rows.insert(rbf_rows.end(), buf.begin(), buf.end());
      env.push_back(smooth_cutoff(d, cutoff));
      const double denom = std::max(d, kDirectionFloor);
      for (int k = 0; k < 3; ++k) dirs.push_back((coords[i][k] - coords[j][k]) / denom);
    }
  }
  const std::size_t p = g.receiver.size();
  g.rbf = Array<T>(Shape{p, static_cast<std::size_t>(num_rbf)},
                   std::vector<T>(rbf_rows.begin(), rbf_rows.end()));
  g.envelope = Array<T>(Shape{p, 1}, std::vector<T>(env.begin(), env.end()));
  g.direction = Array<T>(Shape{p, 3}, std::vector<T>(dirs.begin(), dirs.end()));
  return g;
}

template <typename T>
Encoder3D<T>::Encoder3D(const Encoder3DConfig& config, std::uint64_t seed)
    : config_(config), activation_(ad::parse_activation(config.activation)), store_("encoder3d") {
  config_.validate();
  Rng rng(mix_seed(seed, 0x3d));
  const auto d = static_cast<std::size_t>(config_.hidden_dim);
  const auto k = static_cast<std::size_t>(config_.num_rbf);
  element_embedding_ = &store_.add(
      "embed/element", 0,
      ad::normal_array<T>(Shape{static_cast<std::size_t>(config_.num_elements), d}, 1.0, rng));
  chirality_embedding_ = &store_.add(
      "embed/chirality", 0,
      ad::normal_array<T>(Shape{static_cast<std::size_t>(mol::kAtomFeatureVocab[1]), d}, 0.1, rng));
  for (int l = 0; l < config_.num_layers; ++l) {
    const std::string name = "layer" + std::to_string(l);
    const int li = l + 1;
    Layer layer{
        ad::Linear<T>(store_, name + "/msg_receiver", d, d, li, rng),
        ad::Linear<T>(store_, name + "/msg_sender", d, d, li, rng, false),
        ad::Linear<T>(store_, name + "/msg_rbf", k, d, li, rng, false),
        ad::Linear<T>(store_, name + "/msg_out", d, d, li, rng),
        ad::Linear<T>(store_, name + "/update", d, d, li, rng),
        ad::LayerNormParams<T>(store_, name + "/norm", d, li),
    };
    layers_.push_back(std::move(layer));
  }
}

template <typename T>
Var<T> Encoder3D<T>::encode(Tape<T>& tape, const mol::MoleculeGraph& graph,
                            const PairGeometry<T>& geometry) const {
  const std::size_t n = graph.num_atoms();
  if (n == 0) throw ContractError("encode3d: empty molecule");
  if (geometry.num_atoms != n) {
    throw DimensionError("encode3d: conformer has " + std::to_string(geometry.num_atoms) +
                         " atoms, graph has " + std::to_string(n));
  }
  std::vector<std::uint32_t> elements(n), chirality(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = graph.atoms[i];
    if (a.atomic_number < 0 || a.atomic_number >= config_.num_elements) {
      throw IndexError("encode3d: atomic number " + std::to_string(a.atomic_number) +
                       " outside the embedding table of " +
                       std::to_string(config_.num_elements) + " elements (unseen element)");
    }
    elements[i] = static_cast<std::uint32_t>(a.atomic_number);
    chirality[i] = static_cast<std::uint32_t>(a.chirality);
  }
  Var<T> z = ad::add(ad::gather_rows(tape.param(*element_embedding_), std::span(elements)),
                     ad::gather_rows(tape.param(*chirality_embedding_), std::span(chirality)));

  Var<T> rbf = tape.constant(geometry.rbf);
  Var<T> envelope = tape.constant(geometry.envelope);
  const std::span<const std::uint32_t> recv(geometry.receiver);
  const std::span<const std::uint32_t> send(geometry.sender);
  for (const Layer& layer : layers_) {
    Var<T> pre = ad::add(ad::gather_rows(layer.msg_receiver(tape, z), recv),
                         ad::gather_rows(layer.msg_sender(tape, z), send));
    pre = ad::add(pre, layer.msg_rbf(tape, rbf));
    Var<T> msg = layer.msg_out(tape, ad::activate(pre, activation_));
    msg = ad::mul_rows(msg, envelope);
    Var<T> agg = ad::scatter_add_rows(n, recv, msg);
    z = layer.norm(tape, ad::add(z, ad::activate(layer.update(tape, agg), activation_)));
  }
  return z;
}

template <typename T>
Var<T> Encoder3D<T>::encode(Tape<T>& tape, const mol::MoleculeGraph& graph,
                            const std::vector<mol::Vec3>& coords) const {
  return encode(tape, graph, geometry(coords));
}

template <typename T>
Array<T> Encoder3D<T>::infer(const mol::MoleculeGraph& graph,
                             const std::vector<mol::Vec3>& coords) const {
  Tape<T> tape(false);
  return encode(tape, graph, coords).value();
}

template <typename T>
NoiseHead<T>::NoiseHead(const Encoder3DConfig& config, std::uint64_t seed)
    : activation_(ad::parse_activation(config.activation)), store_("noise_head") {
  config.validate();
  Rng rng(mix_seed(seed, 0x4ead));
  const auto d = static_cast<std::size_t>(config.hidden_dim);
  const auto k = static_cast<std::size_t>(config.num_rbf);
  const int li = config.num_layers;
  receiver_ = ad::Linear<T>(store_, "phi_receiver", d, d, li, rng);
  sender_ = ad::Linear<T>(store_, "phi_sender", d, d, li, rng, false);
  rbf_ = ad::Linear<T>(store_, "phi_rbf", k, d, li, rng, false);
  out_ = ad::Linear<T>(store_, "phi_out", d, 1, li, rng);
}

template <typename T>
NoisePrediction<T> NoiseHead<T>::predict(Tape<T>& tape, Var<T> z,
                                         const PairGeometry<T>& geometry) const {
  const std::size_t n = geometry.num_atoms;
  if (z.value().rank() != 2 || z.value().shape()[0] != n) {
    throw DimensionError("noise_head: representation shape " + ad::shape_string(z.shape()) +
                         " does not match " + std::to_string(n) + " atoms");
  }
  const std::span<const std::uint32_t> recv(geometry.receiver);
  const std::span<const std::uint32_t> send(geometry.sender);
  Var<T> pre = ad::add(ad::gather_rows(receiver_(tape, z), recv),
                       ad::gather_rows(sender_(tape, z), send));
  pre = ad::add(pre, rbf_(tape, tape.constant(geometry.rbf)));
  Var<T> phi = out_(tape, ad::activate(pre, activation_));  // (P, 1)
  Var<T> vectors = ad::mul_rows(tape.constant(geometry.direction), phi);
  NoisePrediction<T> out;
  out.epsilon = ad::scatter_add_rows(n, recv, vectors);
  out.no_neighbors = geometry.num_pairs() == 0;
  return out;
}

template struct PairGeometry<float>;
template struct PairGeometry<double>;
template PairGeometry<float> make_pair_geometry<float>(const std::vector<mol::Vec3>&, int, double);
template PairGeometry<double> make_pair_geometry<double>(const std::vector<mol::Vec3>&, int, double);
template class Encoder3D<float>;
template class Encoder3D<double>;
template class NoiseHead<float>;
template class NoiseHead<double>;

}  // namespace dnd::enc3d
