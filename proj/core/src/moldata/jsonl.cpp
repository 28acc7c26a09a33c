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

#include "dnd/moldata/jsonl.hpp"

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "dnd/util/error.hpp"

namespace dnd::mol {
namespace {

using json = nlohmann::ordered_json;

template <std::size_t K>
std::array<int, K> read_codes(const json& arr, std::size_t offset, const char* what) {
  if (!arr.is_array() || arr.size() != offset + K) {
    throw ParseError(std::string(what) + " must have " + std::to_string(offset + K) +
                     " integer entries");
  }
  std::array<int, K> out{};
  for (std::size_t k = 0; k < K; ++k) {
    const json& v = arr[offset + k];
    if (!v.is_number_integer()) throw ParseError(std::string(what) + " entries must be integers");
    out[k] = v.get<int>();
  }
  return out;
}

MoleculeRecord record_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("line is not a JSON object");
  for (const char* key : {"id", "atoms", "bonds"}) {
    if (!j.contains(key)) throw ParseError(std::string("missing key '") + key + "'");
  }
  MoleculeRecord r;
  if (!j["id"].is_string()) throw ParseError("'id' must be a string");
  r.id = j["id"].get<std::string>();
  if (!j["atoms"].is_array()) throw ParseError("'atoms' must be an array");
  for (const json& a : j["atoms"]) {
    r.graph.atoms.push_back(AtomFeatures::from_codes(read_codes<kNumAtomFeatures>(a, 0, "atom")));
  }
  if (!j["bonds"].is_array()) throw ParseError("'bonds' must be an array");
  for (const json& b : j["bonds"]) {
    if (!b.is_array() || b.size() != 2 + kNumBondFeatures || !b[0].is_number_integer() ||
        !b[1].is_number_integer()) {
      throw ParseError("bond must be [u, v, 3 ints]");
    }
    const long long u = b[0].get<long long>(), v = b[1].get<long long>();
    if (u < 0 || v < 0) throw ParseError("bond indices must be non-negative");
    Bond bond;
    bond.u = static_cast<std::uint32_t>(u);
    bond.v = static_cast<std::uint32_t>(v);
    bond.features = BondFeatures::from_codes(read_codes<kNumBondFeatures>(b, 2, "bond"));
    r.graph.bonds.push_back(bond);
  }
  if (j.contains("coords") && !j["coords"].is_null()) {
    if (!j["coords"].is_array()) throw ParseError("'coords' must be an array or null");
    Conformer c;
    for (const json& p : j["coords"]) {
      if (!p.is_array() || p.size() != 3) throw ParseError("coordinate rows must have 3 numbers");
      Vec3 v{};
      for (int k = 0; k < 3; ++k) {
        if (!p[k].is_number()) throw ParseError("coordinates must be numbers");
        v[k] = p[k].get<double>();
      }
      c.coords.push_back(v);
    }
    r.conformer = std::move(c);
  }
  if (j.contains("labels") && !j["labels"].is_null()) {
    if (!j["labels"].is_array()) throw ParseError("'labels' must be an array or null");
    std::vector<Label> labels;
    for (const json& v : j["labels"]) {
      if (v.is_null()) {
        labels.emplace_back(std::nullopt);
      } else if (v.is_number()) {
        labels.emplace_back(v.get<double>());
      } else {
        throw ParseError("labels must be numbers or null");
      }
    }
    r.labels = std::move(labels);
  }
  return r;
}

std::string format_issues(const std::vector<JsonlIssue>& issues) {
  std::string msg;
  for (const auto& i : issues) {
    msg += "\n  line " + std::to_string(i.line);
    if (!i.record_id.empty()) msg += " (record '" + i.record_id + "')";
    msg += ": " + i.message;
  }
  return msg;
}

}  // namespace

double round_to_serialized(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return std::strtod(buf, nullptr);
}

JsonlReport read_jsonl(std::istream& in) {
  JsonlReport report;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    MoleculeRecord record;
    try {
      record = record_from_json(json::parse(line));
    } catch (const json::exception& e) {
      report.issues.push_back({line_no, {}, std::string("malformed JSON: ") + e.what()});
      continue;
    } catch (const ParseError& e) {
      report.issues.push_back({line_no, {}, e.what()});
      continue;
    }
    auto problems = record.problems();
    if (!ids.insert(record.id).second) problems.push_back("duplicate id");
    if (!problems.empty()) {
      std::string msg;
      for (std::size_t k = 0; k < problems.size(); ++k) msg += (k ? "; " : "") + problems[k];
      report.issues.push_back({line_no, record.id, "validation: " + msg});
      continue;
    }
    report.dataset.records.push_back(std::move(record));
  }
  return report;
}

Dataset parse_jsonl(std::istream& in) {
  JsonlReport report = read_jsonl(in);
  if (report.issues.empty()) return std::move(report.dataset);
  bool any_parse = false;
  for (const auto& i : report.issues) any_parse = any_parse || i.record_id.empty();
  const std::string msg = std::to_string(report.issues.size()) + " problem line(s):" +
                          format_issues(report.issues);
  if (any_parse) throw ParseError(msg);
  throw ValidationError(msg);
}

Dataset parse_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_jsonl(in);
}

std::string to_jsonl_line(const MoleculeRecord& record) {
  json j;
  j["id"] = record.id;
  json atoms = json::array();
  for (const auto& a : record.graph.atoms) atoms.push_back(a.codes());
  j["atoms"] = std::move(atoms);
  json bonds = json::array();
  for (const auto& b : record.graph.bonds) {
    const auto c = b.features.codes();
    bonds.push_back({b.u, b.v, c[0], c[1], c[2]});
  }
  j["bonds"] = std::move(bonds);
  if (record.conformer) {
    json coords = json::array();
    for (const auto& p : record.conformer->coords) {
      coords.push_back({round_to_serialized(p[0]), round_to_serialized(p[1]),
                        round_to_serialized(p[2])});
    }
    j["coords"] = std::move(coords);
  } else {
    j["coords"] = nullptr;
  }
  if (record.labels) {
    json labels = json::array();
    for (const auto& l : *record.labels) {
      if (l) {
        labels.push_back(round_to_serialized(*l));
      } else {
        labels.push_back(nullptr);
      }
    }
    j["labels"] = std::move(labels);
  } else {
    j["labels"] = nullptr;
  }
  return j.dump();
}

void write_jsonl(const Dataset& dataset, std::ostream& out) {
  for (const auto& r : dataset.records) out << to_jsonl_line(r) << '\n';
}

void write_jsonl(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_jsonl(dataset, out);
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace dnd::mol
