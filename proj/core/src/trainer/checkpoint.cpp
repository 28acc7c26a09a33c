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

#include "dnd/trainer/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "dnd/util/error.hpp"
#include "dnd/util/sha256.hpp"

namespace dnd::train {

namespace {

constexpr char kMagic[8] = {'D', 'N', 'D', 'C', 'K', 'P', 'T', '1'};
constexpr std::size_t kHashBytes = 32;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void string(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::vector<std::uint8_t>& buffer() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw CorruptionError("checkpoint: truncated payload");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_++]) << (8 * i);
    return v;
  }
  std::string string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void write_tensor(Writer& w, const NamedTensor& t, int bits) {
  w.string(t.name);
  w.u32(static_cast<std::uint32_t>(t.value.rank()));
  for (std::size_t d : t.value.shape()) w.u64(d);
  for (std::size_t i = 0; i < t.value.size(); ++i) {
    if (bits == 32) {
      w.u32(std::bit_cast<std::uint32_t>(static_cast<float>(t.value[i])));
    } else {
      w.u64(std::bit_cast<std::uint64_t>(t.value[i]));
    }
  }
}

NamedTensor read_tensor(Reader& r, int bits) {
  NamedTensor t;
  t.name = r.string(r.u32());
  const std::uint32_t rank = r.u32();
  if (rank > 8) throw CorruptionError("checkpoint: implausible tensor rank");
  ad::Shape shape(rank);
  std::size_t count = 1;
  for (auto& d : shape) {
    d = r.u64();
    if (d > (std::size_t{1} << 32)) throw CorruptionError("checkpoint: implausible tensor dim");
    count *= d;
  }
  r.need(count * static_cast<std::size_t>(bits / 8));
  t.value = ad::Array<double>(shape);
  for (std::size_t i = 0; i < count; ++i) {
    t.value[i] = bits == 32 ? static_cast<double>(std::bit_cast<float>(r.u32()))
                            : std::bit_cast<double>(r.u64());
  }
  return t;
}

nlohmann::ordered_json metadata(const Checkpoint& c) {
  nlohmann::ordered_json names = nlohmann::ordered_json::array();
  for (const auto& t : c.parameters) names.push_back(t.name);
  return {{"format_version", c.version},
          {"stage", stage_name(c.stage)},
          {"precision_bits", c.precision_bits},
          {"step", c.step},
          {"epoch", c.epoch},
          {"rng_state", c.rng_state},
          {"config", c.config},
          {"extra", c.extra},
          {"parameter_count", c.parameters.size()},
          {"moment_count", c.moments.size()},
          {"parameter_hash", parameter_hash(c)}};
}

std::string hex_digest(const std::vector<std::uint8_t>& bytes) {
  return to_hex(sha256(std::span<const std::uint8_t>(bytes)));
}

}  // namespace

std::string stage_name(Stage s) {
  switch (s) {
    case Stage::kDenoise: return "denoise";
    case Stage::kDistillGraph: return "distill-graph";
    case Stage::kDistillNode: return "distill-node";
    case Stage::kFinetune: return "finetune";
    case Stage::kContrastive: return "contrastive";
  }
  return "unknown";
}

Stage parse_stage(const std::string& name) {
  for (Stage s : {Stage::kDenoise, Stage::kDistillGraph, Stage::kDistillNode, Stage::kFinetune,
                  Stage::kContrastive}) {
    if (stage_name(s) == name) return s;
  }
  throw ConfigError("unknown stage '" + name + "'");
}

const NamedTensor* Checkpoint::find_parameter(const std::string& name) const {
  for (const auto& t : parameters) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

std::vector<std::uint8_t> serialize(const Checkpoint& c) {
  if (c.precision_bits != 32 && c.precision_bits != 64) {
    throw ContractError("checkpoint: precision_bits must be 32 or 64");
  }
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  const std::string meta = metadata(c).dump();
  w.u64(meta.size());
  w.bytes(meta.data(), meta.size());
  w.u64(c.parameters.size() + c.moments.size());
  for (const auto& t : c.parameters) write_tensor(w, t, c.precision_bits);
  // Moments are always 64-bit so resumed runs match uninterrupted ones.
  for (const auto& t : c.moments) write_tensor(w, t, 64);
  const Digest d = sha256(std::span<const std::uint8_t>(w.buffer()));
  w.bytes(d.data(), d.size());
  return std::move(w.buffer());
}

Checkpoint deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof kMagic + 8 + kHashBytes ||
      std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw CorruptionError("checkpoint: missing magic header or file too short");
  }
  const auto body = bytes.first(bytes.size() - kHashBytes);
  const Digest d = sha256(body);
  if (std::memcmp(d.data(), bytes.data() + body.size(), kHashBytes) != 0) {
    throw CorruptionError("checkpoint: content hash mismatch");
  }
  Reader r(body.subspan(sizeof kMagic));
  const std::uint64_t meta_len = r.u64();
  nlohmann::ordered_json meta;
  try {
    meta = nlohmann::ordered_json::parse(r.string(meta_len));
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError(std::string("checkpoint: metadata is not JSON: ") + e.what());
  }
  Checkpoint c;
  try {
    c.version = meta.at("format_version").get<int>();
    if (c.version != Checkpoint::kFormatVersion) {
      throw IncompatibleError("checkpoint: format version " + std::to_string(c.version) +
                              ", expected " + std::to_string(Checkpoint::kFormatVersion));
    }
    c.stage = parse_stage(meta.at("stage").get<std::string>());
    c.precision_bits = meta.at("precision_bits").get<int>();
    c.step = meta.at("step").get<std::int64_t>();
    c.epoch = meta.at("epoch").get<int>();
    c.rng_state = meta.at("rng_state").get<std::string>();
    c.config = meta.at("config");
    c.extra = meta.at("extra");
    const auto np = meta.at("parameter_count").get<std::size_t>();
    const auto nm = meta.at("moment_count").get<std::size_t>();
    if (r.u64() != np + nm) throw CorruptionError("checkpoint: tensor count mismatch");
    if (c.precision_bits != 32 && c.precision_bits != 64) {
      throw CorruptionError("checkpoint: bad precision");
    }
    for (std::size_t i = 0; i < np; ++i) c.parameters.push_back(read_tensor(r, c.precision_bits));
    for (std::size_t i = 0; i < nm; ++i) c.moments.push_back(read_tensor(r, 64));
    if (!r.done()) throw CorruptionError("checkpoint: trailing bytes after tensors");
    if (meta.at("parameter_hash").get<std::string>() != parameter_hash(c)) {
      throw CorruptionError("checkpoint: parameter hash mismatch");
    }
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError(std::string("checkpoint: malformed metadata: ") + e.what());
  } catch (const ConfigError& e) {
    throw CorruptionError(std::string("checkpoint: ") + e.what());
  }
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = serialize(ckpt);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into '" + path.string() + "': " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

std::string content_hash(const Checkpoint& ckpt) {
  const auto bytes = serialize(ckpt);
  Digest d;
  std::memcpy(d.data(), bytes.data() + bytes.size() - kHashBytes, kHashBytes);
  return to_hex(d);
}

std::string parameter_hash(const Checkpoint& ckpt, const std::string& prefix) {
  Writer w;
  for (const auto& t : ckpt.parameters) {
    if (t.name.compare(0, prefix.size(), prefix) != 0) continue;
    write_tensor(w, t, ckpt.precision_bits);
  }
  return hex_digest(w.buffer());
}

void require_stage(const Checkpoint& ckpt, std::initializer_list<Stage> allowed,
                   const std::string& consumer) {
  for (Stage s : allowed) {
    if (s == ckpt.stage) return;
  }
  std::string names;
  for (Stage s : allowed) names += (names.empty() ? "" : ", ") + stage_name(s);
  throw IncompatibleError(consumer + ": checkpoint stage '" + stage_name(ckpt.stage) +
                          "' is not one of {" + names + "}");
}

template <typename T>
void capture_parameters(const ad::ParameterStore<T>& store, Checkpoint& ckpt) {
  for (const ad::Parameter<T>* p : store.all()) {
    ckpt.parameters.push_back({p->name, p->value.template cast<double>()});
  }
}

template <typename T>
void restore_parameters(const Checkpoint& ckpt, ad::ParameterStore<T>& store) {
  std::map<std::string, const NamedTensor*> index;
  for (const auto& t : ckpt.parameters) index[t.name] = &t;
  for (ad::Parameter<T>* p : store.all()) {
    auto it = index.find(p->name);
    if (it == index.end()) {
      throw IncompatibleError("checkpoint has no parameter '" + p->name + "'");
    }
    if (it->second->value.shape() != p->value.shape()) {
      throw IncompatibleError("parameter '" + p->name + "' has shape " +
                              ad::shape_string(it->second->value.shape()) + " in checkpoint, " +
                              ad::shape_string(p->value.shape()) + " in model");
    }
    p->value = it->second->value.template cast<T>();
  }
}

template <typename T>
void capture_optimizer(const AdamW<T>& optimizer, Checkpoint& ckpt) {
  for (const auto& s : optimizer.slots()) {
    ad::Array<double> m(ad::Shape{s.m.size()}), v(ad::Shape{s.v.size()});
    for (std::size_t i = 0; i < s.m.size(); ++i) {
      m[i] = s.m[i];
      v[i] = s.v[i];
    }
    ckpt.moments.push_back({"m/" + s.param->name, std::move(m)});
    ckpt.moments.push_back({"v/" + s.param->name, std::move(v)});
  }
  ckpt.step = optimizer.steps_taken();
}

template <typename T>
void restore_optimizer(const Checkpoint& ckpt, AdamW<T>& optimizer) {
  std::map<std::string, std::vector<double>> first, second;
  for (const auto& t : ckpt.moments) {
    std::vector<double> values(t.value.data(), t.value.data() + t.value.size());
    if (t.name.rfind("m/", 0) == 0) first[t.name.substr(2)] = std::move(values);
    if (t.name.rfind("v/", 0) == 0) second[t.name.substr(2)] = std::move(values);
  }
  optimizer.restore(ckpt.step, first, second);
}

#define DND_INSTANTIATE_CKPT(T)                                                  \
  template void capture_parameters(const ad::ParameterStore<T>&, Checkpoint&);  \
  template void restore_parameters(const Checkpoint&, ad::ParameterStore<T>&);  \
  template void capture_optimizer(const AdamW<T>&, Checkpoint&);                \
  template void restore_optimizer(const Checkpoint&, AdamW<T>&);

DND_INSTANTIATE_CKPT(float)
DND_INSTANTIATE_CKPT(double)

}  // namespace dnd::train
