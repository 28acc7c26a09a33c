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
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dnd/util/error.hpp"

namespace dnd::cli {

namespace fs = std::filesystem;
using Json = nlohmann::json;

inline constexpr const char* kManifestName = "manifest.json";

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;
inline constexpr int kExitIo = 5;

int exit_code_for(ErrorKind kind);
// One line of JSON: {"status":"error","exit_code":..,"kind":..,"message":..}.
std::string error_line(int exit_code, const std::string& kind, const std::string& message);

std::string file_sha256(const fs::path& path);

// Content address: hex SHA-256 over the command, the canonical dump of the
// resolved config and the seed, truncated to 16 characters.
std::string run_id(const std::string& command, const Json& config, std::uint64_t seed);

struct ArtifactRef {
  std::string role;
  fs::path path;
  std::string sha256;
  std::string parent_run;  // run id of the producing run, when known
};

// Output directory <root>/<command>-<run id> with checkpoints/, metrics/,
// reports/ and data/ below it, plus a manifest written on completion.
class Run {
 public:
  Run(std::string command, Json config, std::uint64_t seed, const fs::path& root,
      std::vector<std::string> argv);

  const std::string& id() const { return id_; }
  const fs::path& dir() const { return dir_; }
  fs::path checkpoints() const;
  fs::path metrics() const;
  fs::path reports() const;
  fs::path data() const;

  void add_input(const std::string& role, const fs::path& path);
  void add_output(const std::string& role, const fs::path& path);
  // Free-form results recorded in the manifest.
  Json& summary() { return summary_; }

  void write_manifest() const;

 private:
  std::string command_;
  Json config_;
  std::uint64_t seed_;
  std::vector<std::string> argv_;
  std::string id_;
  fs::path dir_;
  std::vector<ArtifactRef> inputs_;
  std::vector<ArtifactRef> outputs_;
  Json summary_ = Json::object();
};

// Run id recorded in the nearest manifest.json above path, or empty.
std::string producing_run(const fs::path& path);

}  // namespace dnd::cli
