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

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "dnd/moldata/types.hpp"

namespace dnd::mol {

// One problem found while reading a JSONL file.
struct JsonlIssue {
  std::size_t line = 0;  // 1-based
  std::string record_id;  // empty when the line did not parse
  std::string message;
};

struct JsonlReport {
  Dataset dataset;  // records that parsed and validated
  std::vector<JsonlIssue> issues;
};

// Reads every line, collecting malformed lines and invariant breaches rather
// than stopping at the first.
JsonlReport read_jsonl(std::istream& in);

// Strict variants: throw ParseError when any line is malformed, otherwise
// ValidationError when any record breaks an invariant. The message lists
// every issue with its line number and record id.
Dataset parse_jsonl(std::istream& in);
Dataset parse_jsonl(const std::filesystem::path& path);

// Canonical serialization: keys in schema order, coordinates rounded to 9
// significant digits.
std::string to_jsonl_line(const MoleculeRecord& record);
void write_jsonl(const Dataset& dataset, std::ostream& out);
void write_jsonl(const Dataset& dataset, const std::filesystem::path& path);

// Rounds to 9 significant digits, the precision of the on-disk format.
double round_to_serialized(double x);

}  // namespace dnd::mol
