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
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace dnd::cli {

using Json = nlohmann::json;

// Accumulates every configuration problem so a run reports them together.
class Violations {
 public:
  void add(const std::string& field, const std::string& message);
  // Runs check and files each clause of a thrown ConfigError under field.
  void collect(const std::string& field, const std::function<void()>& check);
  bool empty() const { return items_.empty(); }
  const std::vector<std::string>& items() const { return items_; }
  // Throws ConfigError listing every violation; no-op when empty.
  void raise() const;

 private:
  std::vector<std::string> items_;
};

// Parses a JSON config file. Throws IoError or ConfigError.
Json load_json_file(const std::filesystem::path& path);

// Deep merge: objects merge key by key, everything else is replaced.
void merge_into(Json& base, const Json& patch);

// Applies "a.b.c=value". The value is read as JSON when it parses and as a
// string otherwise. Intermediate objects are created as needed.
void apply_override(Json& config, const std::string& assignment, Violations& violations);

// Reports keys of config absent from schema and values whose JSON type
// differs from the schema default. Null schema values accept anything.
void check_against_schema(const Json& config, const Json& schema, Violations& violations,
                          const std::string& prefix = {});

// Reads the field at a dotted path, or null.
const Json& at_path(const Json& config, const std::string& dotted);
void set_path(Json& config, const std::string& dotted, Json value);

}  // namespace dnd::cli
