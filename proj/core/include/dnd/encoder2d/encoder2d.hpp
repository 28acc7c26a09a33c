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
#include <functional>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "dnd/autodiff/layers.hpp"
#include "dnd/moldata/types.hpp"

namespace dnd::enc2d {

struct Encoder2DConfig {
  int num_layers = 4;
  int num_heads = 4;
  int hidden_dim = 64;
  // Width k of the node identifiers; must be at least the atom count of
  // every molecule encoded (typically the dataset's max_atoms).
  int identifier_dim = 30;
  bool use_virtual_node = false;
  bool capture_attention = false;
  int ffn_multiplier = 2;
  std::string activation = "silu";

  // Paper-scale reference preset (12 layers, 32 heads, 128 dims).
  static Encoder2DConfig paper_preset();
  void validate() const;
};

void to_json(nlohmann::json& j, const Encoder2DConfig& c);
void from_json(const nlohmann::json& j, Encoder2DConfig& c);

// N x k matrix with orthonormal rows: a Gaussian N x N block orthonormalized
// by modified Gram-Schmidt, zero-padded to k columns. Throws
// DimensionError when k < N.
ad::Array<double> make_identifiers(std::size_t num_nodes, std::size_t k, std::uint64_t seed);

enum class TokenKind : std::uint8_t { kNode = 0, kEdge = 1, kVirtual = 2 };

// Nodes first (token i is node i), then edges in bond order, then the
// optional virtual token.
struct TokenSequence {
  std::vector<TokenKind> kinds;
  std::vector<std::array<int, mol::kNumAtomFeatures>> atom_codes;  // per node
  std::vector<std::array<int, mol::kNumBondFeatures>> bond_codes;  // per edge
  // (T, 2k): node u carries [P_u | P_u], edge (u, v) carries [P_u | P_v],
  // the virtual token carries zeros.
  ad::Array<double> identifier_block;
  std::size_t num_nodes = 0;
  std::size_t num_edges = 0;
  bool has_virtual = false;

  std::size_t size() const { return kinds.size(); }
  std::size_t virtual_index() const { return num_nodes + num_edges; }
};

TokenSequence tokenize(const mol::MoleculeGraph& graph, const ad::Array<double>& identifiers,
                       bool use_virtual_node);
// Draws identifiers from `seed` with the configured width.
TokenSequence tokenize(const mol::MoleculeGraph& graph, std::uint64_t seed,
                       const Encoder2DConfig& config);

// Pre-softmax scores and post-softmax weights of every head, flattened as
// index layer * num_heads + head, each (T, T).
struct AttentionTrace {
  int num_layers = 0;
  int num_heads = 0;
  std::size_t num_tokens = 0;
  std::size_t num_nodes = 0;
  std::vector<ad::Array<double>> logits;
  std::vector<ad::Array<double>> weights;

  const ad::Array<double>& logit(int layer, int head) const {
    return logits[static_cast<std::size_t>(layer * num_heads + head)];
  }
  const ad::Array<double>& weight(int layer, int head) const {
    return weights[static_cast<std::size_t>(layer * num_heads + head)];
  }
  // The (N, N) node-pair block of a (T, T) matrix.
  static ad::Array<double> node_block(const ad::Array<double>& m, std::size_t num_nodes);
};

template <typename T>
struct Encoded {
  ad::Var<T> tokens;  // (T, d)
  ad::Var<T> nodes;   // (N, d), Z2D in node order
  std::optional<AttentionTrace> trace;
};

// Replaces the scaled scores of one head before the softmax; the replaced
// scores enter the tape as constants. Test and analysis seam.
using LogitOverride =
    std::function<void(int layer, int head, ad::Array<double>& logits)>;

template <typename T>
class Encoder2D {
 public:
  Encoder2D(const Encoder2DConfig& config, std::uint64_t seed);

  const Encoder2DConfig& config() const { return config_; }
  ad::ParameterStore<T>& params() { return store_; }
  const ad::ParameterStore<T>& params() const { return store_; }

  void set_capture_attention(bool on) { config_.capture_attention = on; }
  void set_logit_override(LogitOverride fn) { override_ = std::move(fn); }

  Encoded<T> encode(ad::Tape<T>& tape, const TokenSequence& tokens) const;

 private:
  struct Layer {
    ad::LayerNormParams<T> attn_norm;
    ad::Linear<T> wq, wk, wv, wo;
    ad::LayerNormParams<T> ffn_norm;
    ad::Linear<T> ffn_in, ffn_out;
  };

  Encoder2DConfig config_;
  ad::Activation activation_;
  ad::ParameterStore<T> store_;
  std::vector<const ad::Parameter<T>*> atom_tables_;
  std::vector<const ad::Parameter<T>*> bond_tables_;
  const ad::Parameter<T>* type_table_ = nullptr;
  ad::Linear<T> identifier_proj_;
  std::vector<Layer> layers_;
  ad::LayerNormParams<T> final_norm_;
  LogitOverride override_;
};

// Mean over node tokens only, as a (1, d) row.
template <typename T>
ad::Var<T> pool_mean(ad::Var<T> nodes);

// Output row (1, d) of the virtual token; throws ContractError when there is none.
template <typename T>
ad::Var<T> pool_virtual(const Encoded<T>& encoded, const TokenSequence& tokens);

}  // namespace dnd::enc2d
