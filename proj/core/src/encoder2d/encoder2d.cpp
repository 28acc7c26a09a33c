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

#include "dnd/encoder2d/encoder2d.hpp"

#include <cmath>

#include "dnd/util/error.hpp"
#include "dnd/util/rng.hpp"

namespace dnd::enc2d {

using ad::Array;
using ad::Shape;
using ad::Tape;
using ad::Var;

Encoder2DConfig Encoder2DConfig::paper_preset() {
  Encoder2DConfig c;
  c.num_layers = 12;
  c.num_heads = 32;
  c.hidden_dim = 128;
  return c;
}

void Encoder2DConfig::validate() const {
  std::string problems;
  if (num_layers < 1) problems += " num_layers must be >= 1;";
  if (num_heads < 1) problems += " num_heads must be >= 1;";
  if (hidden_dim < 1) problems += " hidden_dim must be >= 1;";
  if (num_heads >= 1 && hidden_dim % num_heads != 0) {
    problems += " hidden_dim must be divisible by num_heads;";
  }
  if (identifier_dim < 1) problems += " identifier_dim must be >= 1;";
  if (ffn_multiplier < 1) problems += " ffn_multiplier must be >= 1;";
  try {
    ad::parse_activation(activation);
  } catch (const ConfigError& e) {
    problems += std::string(" ") + e.what() + ";";
  }
  if (!problems.empty()) throw ConfigError("encoder2d config:" + problems);
}

void to_json(nlohmann::json& j, const Encoder2DConfig& c) {
  j = nlohmann::json{{"num_layers", c.num_layers},
                     {"num_heads", c.num_heads},
                     {"hidden_dim", c.hidden_dim},
                     {"identifier_dim", c.identifier_dim},
                     {"use_virtual_node", c.use_virtual_node},
                     {"capture_attention", c.capture_attention},
                     {"ffn_multiplier", c.ffn_multiplier},
                     {"activation", c.activation}};
}

void from_json(const nlohmann::json& j, Encoder2DConfig& c) {
  c.num_layers = j.value("num_layers", c.num_layers);
  c.num_heads = j.value("num_heads", c.num_heads);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.identifier_dim = j.value("identifier_dim", c.identifier_dim);
  c.use_virtual_node = j.value("use_virtual_node", c.use_virtual_node);
  c.capture_attention = j.value("capture_attention", c.capture_attention);
  c.ffn_multiplier = j.value("ffn_multiplier", c.ffn_multiplier);
  c.activation = j.value("activation", c.activation);
}

Array<double> make_identifiers(std::size_t num_nodes, std::size_t k, std::uint64_t seed) {
  if (k < num_nodes) {
    throw DimensionError("node identifiers: width " + std::to_string(k) + " cannot hold " +
                         std::to_string(num_nodes) + " orthonormal rows");
  }
  Rng rng(mix_seed(seed, 0x1d));
  const std::size_t n = num_nodes;
  std::vector<double> q(n * n);
  for (double& v : q) v = rng.normal();
  for (std::size_t i = 0; i < n; ++i) {
    double* row = q.data() + i * n;
    // Two passes of modified Gram-Schmidt for numerical orthogonality.
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t j = 0; j < i; ++j) {
        const double* prev = q.data() + j * n;
        double dot = 0;
        for (std::size_t c = 0; c < n; ++c) dot += row[c] * prev[c];
        for (std::size_t c = 0; c < n; ++c) row[c] -= dot * prev[c];
      }
    }
    double norm = 0;
    for (std::size_t c = 0; c < n; ++c) norm += row[c] * row[c];
    norm = std::sqrt(norm);
    if (norm < 1e-10) throw NumericError("node identifiers: degenerate Gaussian draw");
    for (std::size_t c = 0; c < n; ++c) row[c] /= norm;
  }
  Array<double> p(Shape{n, k});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < n; ++c) p(i, c) = q[i * n + c];
  return p;
}

TokenSequence tokenize(const mol::MoleculeGraph& graph, const Array<double>& identifiers,
                       bool use_virtual_node) {
  const std::size_t n = graph.num_atoms();
  const std::size_t m = graph.num_bonds();
  if (n == 0) throw ContractError("tokenize: empty graph");
  if (identifiers.rank() != 2 || identifiers.shape()[0] != n) {
    throw DimensionError("tokenize: identifiers of shape " + ad::shape_string(identifiers.shape()) +
                         " for " + std::to_string(n) + " nodes");
  }
  const std::size_t k = identifiers.shape()[1];
  TokenSequence seq;
  seq.num_nodes = n;
  seq.num_edges = m;
  seq.has_virtual = use_virtual_node;
  const std::size_t t = n + m + (use_virtual_node ? 1 : 0);
  seq.identifier_block = Array<double>(Shape{t, 2 * k});
  for (std::size_t i = 0; i < n; ++i) {
    seq.kinds.push_back(TokenKind::kNode);
    seq.atom_codes.push_back(graph.atoms[i].codes());
    for (std::size_t c = 0; c < k; ++c) {
      seq.identifier_block(i, c) = identifiers(i, c);
      seq.identifier_block(i, k + c) = identifiers(i, c);
    }
  }
  for (std::size_t e = 0; e < m; ++e) {
    const mol::Bond& b = graph.bonds[e];
    if (b.u >= n || b.v >= n) throw IndexError("tokenize: bond endpoint out of range");
    seq.kinds.push_back(TokenKind::kEdge);
    seq.bond_codes.push_back(b.features.codes());
    for (std::size_t c = 0; c < k; ++c) {
      seq.identifier_block(n + e, c) = identifiers(b.u, c);
      seq.identifier_block(n + e, k + c) = identifiers(b.v, c);
    }
  }
  if (use_virtual_node) seq.kinds.push_back(TokenKind::kVirtual);
  return seq;
}

TokenSequence tokenize(const mol::MoleculeGraph& graph, std::uint64_t seed,
                       const Encoder2DConfig& config) {
  return tokenize(graph,
                  make_identifiers(graph.num_atoms(),
                                   static_cast<std::size_t>(config.identifier_dim), seed),
                  config.use_virtual_node);
}

Array<double> AttentionTrace::node_block(const Array<double>& m, std::size_t num_nodes) {
  Array<double> out(Shape{num_nodes, num_nodes});
  for (std::size_t i = 0; i < num_nodes; ++i)
    for (std::size_t j = 0; j < num_nodes; ++j) out(i, j) = m(i, j);
  return out;
}

template <typename T>
Encoder2D<T>::Encoder2D(const Encoder2DConfig& config, std::uint64_t seed)
    : config_(config), activation_(ad::parse_activation(config.activation)), store_("encoder2d") {
  config_.validate();
  Rng rng(mix_seed(seed, 0x2d));
  const auto d = static_cast<std::size_t>(config_.hidden_dim);
  const auto k = static_cast<std::size_t>(config_.identifier_dim);
  const double embed_std = 1.0 / std::sqrt(static_cast<double>(mol::kNumAtomFeatures));
  for (int f = 0; f < mol::kNumAtomFeatures; ++f) {
    atom_tables_.push_back(&store_.add(
        "embed/atom" + std::to_string(f), 0,
        ad::normal_array<T>(Shape{static_cast<std::size_t>(mol::kAtomFeatureVocab[f]), d},
                            embed_std, rng)));
  }
  for (int f = 0; f < mol::kNumBondFeatures; ++f) {
    bond_tables_.push_back(&store_.add(
        "embed/bond" + std::to_string(f), 0,
        ad::normal_array<T>(Shape{static_cast<std::size_t>(mol::kBondFeatureVocab[f]), d},
                            embed_std, rng)));
  }
  type_table_ = &store_.add("embed/type", 0, ad::normal_array<T>(Shape{3, d}, 0.5, rng));
  identifier_proj_ = ad::Linear<T>(store_, "embed/identifier", 2 * k, d, 0, rng, false);
  const std::size_t ffn = d * static_cast<std::size_t>(config_.ffn_multiplier);
  for (int l = 0; l < config_.num_layers; ++l) {
    const std::string name = "layer" + std::to_string(l);
    const int li = l + 1;
    Layer layer{
        ad::LayerNormParams<T>(store_, name + "/attn_norm", d, li),
        ad::Linear<T>(store_, name + "/attn/wq", d, d, li, rng),
        ad::Linear<T>(store_, name + "/attn/wk", d, d, li, rng),
        ad::Linear<T>(store_, name + "/attn/wv", d, d, li, rng),
        ad::Linear<T>(store_, name + "/attn/wo", d, d, li, rng),
        ad::LayerNormParams<T>(store_, name + "/ffn_norm", d, li),
        ad::Linear<T>(store_, name + "/ffn/in", d, ffn, li, rng),
        ad::Linear<T>(store_, name + "/ffn/out", ffn, d, li, rng),
    };
    layers_.push_back(std::move(layer));
  }
  final_norm_ = ad::LayerNormParams<T>(store_, "final_norm", d, config_.num_layers);
}

template <typename T>
Encoded<T> Encoder2D<T>::encode(Tape<T>& tape, const TokenSequence& seq) const {
  const std::size_t n = seq.num_nodes, m = seq.num_edges, t = seq.size();
  const auto d = static_cast<std::size_t>(config_.hidden_dim);
  const auto k = static_cast<std::size_t>(config_.identifier_dim);
  if (seq.identifier_block.shape() != Shape{t, 2 * k}) {
    throw DimensionError("encode2d: identifier block " +
                         ad::shape_string(seq.identifier_block.shape()) + ", expected " +
                         ad::shape_string(Shape{t, 2 * k}));
  }
  if (seq.has_virtual != config_.use_virtual_node) {
    throw ContractError("encode2d: token sequence and encoder disagree on the virtual node");
  }

  // Feature embeddings, stacked in token order.
  std::vector<Var<T>> blocks;
  {
    Var<T> nodes;
    for (int f = 0; f < mol::kNumAtomFeatures; ++f) {
      std::vector<std::uint32_t> codes(n);
      for (std::size_t i = 0; i < n; ++i) codes[i] = static_cast<std::uint32_t>(seq.atom_codes[i][f]);
      Var<T> e = ad::gather_rows(tape.param(*atom_tables_[f]), std::span(codes));
      nodes = f == 0 ? e : ad::add(nodes, e);
    }
    blocks.push_back(nodes);
  }
  if (m > 0) {
    Var<T> edges;
    for (int f = 0; f < mol::kNumBondFeatures; ++f) {
      std::vector<std::uint32_t> codes(m);
      for (std::size_t e = 0; e < m; ++e) codes[e] = static_cast<std::uint32_t>(seq.bond_codes[e][f]);
      Var<T> x = ad::gather_rows(tape.param(*bond_tables_[f]), std::span(codes));
      edges = f == 0 ? x : ad::add(edges, x);
    }
    blocks.push_back(edges);
  }
  if (seq.has_virtual) blocks.push_back(tape.constant(Array<T>(Shape{1, d})));
  Var<T> x = blocks.size() == 1 ? blocks[0] : ad::concat_rows<T>(blocks);

  std::vector<std::uint32_t> kinds(t);
  for (std::size_t i = 0; i < t; ++i) kinds[i] = static_cast<std::uint32_t>(seq.kinds[i]);
  x = ad::add(x, ad::gather_rows(tape.param(*type_table_), std::span(kinds)));
  x = ad::add(x, identifier_proj_(tape, tape.constant(seq.identifier_block.cast<T>())));

  std::optional<AttentionTrace> trace;
  if (config_.capture_attention) {
    trace.emplace();
    trace->num_layers = config_.num_layers;
    trace->num_heads = config_.num_heads;
    trace->num_tokens = t;
    trace->num_nodes = n;
  }

  const auto heads = static_cast<std::size_t>(config_.num_heads);
  const std::size_t dh = d / heads;
  const T inv_sqrt = T(1) / static_cast<T>(std::sqrt(static_cast<double>(dh)));
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    Var<T> h = layer.attn_norm(tape, x);
    Var<T> q = layer.wq(tape, h);
    Var<T> kk = layer.wk(tape, h);
    Var<T> v = layer.wv(tape, h);
    std::vector<Var<T>> head_out;
    for (std::size_t hd = 0; hd < heads; ++hd) {
      Var<T> qh = ad::slice_cols(q, hd * dh, dh);
      Var<T> kh = ad::slice_cols(kk, hd * dh, dh);
      Var<T> vh = ad::slice_cols(v, hd * dh, dh);
      Var<T> logits = ad::scale(ad::matmul(qh, ad::transpose(kh)), inv_sqrt);
      if (override_) {
        Array<double> replaced = logits.value().template cast<double>();
        override_(static_cast<int>(l), static_cast<int>(hd), replaced);
        logits = tape.constant(replaced.cast<T>());
      }
      Var<T> attn = ad::softmax_rows(logits);
      if (trace) {
        trace->logits.push_back(logits.value().template cast<double>());
        trace->weights.push_back(attn.value().template cast<double>());
      }
      head_out.push_back(ad::matmul(attn, vh));
    }
    Var<T> merged = heads == 1 ? head_out[0] : ad::concat<T>(head_out);
    x = ad::add(x, layer.wo(tape, merged));
    Var<T> f = layer.ffn_norm(tape, x);
    f = layer.ffn_out(tape, ad::activate(layer.ffn_in(tape, f), activation_));
    x = ad::add(x, f);
  }
  x = final_norm_(tape, x);

  std::vector<std::uint32_t> node_rows(n);
  for (std::size_t i = 0; i < n; ++i) node_rows[i] = static_cast<std::uint32_t>(i);
  Encoded<T> out;
  out.tokens = x;
  out.nodes = ad::gather_rows(x, std::span(node_rows));
  out.trace = std::move(trace);
  return out;
}

template <typename T>
Var<T> pool_mean(Var<T> nodes) {
  if (nodes.value().rank() != 2 || nodes.value().shape()[0] == 0) {
    throw ContractError("pool_mean: needs at least one node representation");
  }
  const std::size_t n = nodes.value().shape()[0];
  Var<T> weights = nodes.tape->constant(Array<T>(Shape{1, n}, T(1) / static_cast<T>(n)));
  return ad::matmul(weights, nodes);
}

template <typename T>
Var<T> pool_virtual(const Encoded<T>& encoded, const TokenSequence& tokens) {
  if (!tokens.has_virtual) throw ContractError("pool_virtual: sequence has no virtual token");
  const std::uint32_t row = static_cast<std::uint32_t>(tokens.virtual_index());
  return ad::gather_rows(encoded.tokens, std::span(&row, 1));
}

template class Encoder2D<float>;
template class Encoder2D<double>;
template Var<float> pool_mean(Var<float>);
template Var<double> pool_mean(Var<double>);
template Var<float> pool_virtual(const Encoded<float>&, const TokenSequence&);
template Var<double> pool_virtual(const Encoded<double>&, const TokenSequence&);

}  // namespace dnd::enc2d
