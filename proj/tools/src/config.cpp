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

#include "config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "dnd/util/error.hpp"

namespace dnd::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_path(const std::string& dotted) {
  std::vector<std::string> parts;
  std::stringstream ss(dotted);
  std::string part;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  return parts;
}

const char* type_label(const Json& j) {
  if (j.is_boolean()) return "boolean";
  if (j.is_number()) return "number";
  if (j.is_string()) return "string";
  if (j.is_array()) return "array";
  if (j.is_object()) return "object";
  return "null";
}

}  // namespace

void Violations::add(const std::string& field, const std::string& message) {
  items_.push_back(field.empty() ? message : field + ": " + message);
}

void Violations::collect(const std::string& field, const std::function<void()>& check) {
  try {
    check();
  } catch (const ConfigError& e) {
    // Core validators report "<scope>: clause; clause; ...".
    std::string msg = e.what();
    const auto colon = msg.find(':');
    if (colon != std::string::npos) msg = msg.substr(colon + 1);
    std::stringstream ss(msg);
    std::string clause;
    bool any = false;
    while (std::getline(ss, clause, ';')) {
      clause = trim(clause);
      if (clause.empty()) continue;
      add(field, clause);
      any = true;
    }
    if (!any) add(field, e.what());
  }
}

void Violations::raise() const {
  if (items_.empty()) return;
  std::string msg = std::to_string(items_.size()) + " config violation" +
                    (items_.size() == 1 ? "" : "s") + ": ";
  for (std::size_t i = 0; i < items_.size(); ++i) {
    if (i) msg += "; ";
    msg += items_[i];
  }
  throw ConfigError(msg);
}

Json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
}

void merge_into(Json& base, const Json& patch) {
  if (!base.is_object() || !patch.is_object()) {
    base = patch;
    return;
  }
  for (const auto& [key, value] : patch.items()) {
    if (base.contains(key) && base[key].is_object() && value.is_object()) {
      merge_into(base[key], value);
    } else {
      base[key] = value;
    }
  }
}

void apply_override(Json& config, const std::string& assignment, Violations& violations) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    violations.add("--set " + assignment, "expected key=value");
    return;
  }
  const std::string key = trim(assignment.substr(0, eq));
  const std::string raw = assignment.substr(eq + 1);
  Json value;
  try {
    value = Json::parse(raw);
  } catch (const Json::parse_error&) {
    value = raw;
  }
  set_path(config, key, std::move(value));
}

void check_against_schema(const Json& config, const Json& schema, Violations& violations,
                          const std::string& prefix) {
  if (!config.is_object()) return;
  for (const auto& [key, value] : config.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!schema.is_object() || !schema.contains(key)) {
      violations.add(path, "unknown key");
      continue;
    }
    const Json& expected = schema.at(key);
    if (expected.is_null() || value.is_null()) continue;
    if (expected.is_object()) {
      if (!value.is_object()) {
        violations.add(path, std::string("expected object, got ") + type_label(value));
      } else {
        check_against_schema(value, expected, violations, path);
      }
      continue;
    }
    if (std::string(type_label(expected)) != type_label(value)) {
      violations.add(path, std::string("expected ") + type_label(expected) + ", got " +
                               type_label(value));
      continue;
    }
    if (expected.is_number_integer() && value.is_number_float()) {
      const double v = value.get<double>();
      if (std::floor(v) != v) violations.add(path, "expected an integer");
    }
  }
}

const Json& at_path(const Json& config, const std::string& dotted) {
  static const Json kNull;
  const Json* node = &config;
  for (const auto& part : split_path(dotted)) {
    if (!node->is_object() || !node->contains(part)) return kNull;
    node = &node->at(part);
  }
  return *node;
}

void set_path(Json& config, const std::string& dotted, Json value) {
  Json* node = &config;
  const auto parts = split_path(dotted);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    Json& child = (*node)[parts[i]];
    if (!child.is_object()) child = Json::object();
    node = &child;
  }
  (*node)[parts.back()] = std::move(value);
}

}  // namespace dnd::cli
