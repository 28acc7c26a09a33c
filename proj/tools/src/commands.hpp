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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "run.hpp"

namespace dnd::cli {

enum class FlagKind {
  kJson,      // value parsed as JSON, falling back to a string
  kString,    // value kept verbatim
  kSwitch,    // presence sets true
  kKeyValue,  // "name=value" stored under path.name
};

// A dedicated command-line flag that writes one config field.
struct FlagSpec {
  std::string name;  // e.g. "--epochs"
  std::string path;  // dotted config path
  std::string help;
  FlagKind kind = FlagKind::kJson;
};

struct Context {
  bool quiet = false;
  std::optional<fs::path> resume;
};

struct CommandSpec {
  std::string name;
  std::string description;
  // Fully populated default config; doubles as the schema for key checks.
  Json defaults;
  std::vector<FlagSpec> flags;
  bool has_seed = false;
  bool resumable = false;
  // Canonicalizes the merged config in place (absolute paths, seed fan-out).
  std::function<void(Json&)> normalize;
  // Appends every problem; must not touch the filesystem beyond existence checks.
  std::function<void(const Json&, Violations&)> validate;
  std::function<void(const Json&, Run&, const Context&)> execute;
};

const std::vector<CommandSpec>& command_specs();

}  // namespace dnd::cli
