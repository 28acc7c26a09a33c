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

#include "run.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>

#include "dnd/util/sha256.hpp"

namespace dnd::cli {

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
      return kExitConfig;
    case ErrorKind::kParse:
    case ErrorKind::kValidation:
    case ErrorKind::kDegenerate:
    case ErrorKind::kDimension:
    case ErrorKind::kIndex:
      return kExitData;
    case ErrorKind::kNumeric:
      return kExitNumeric;
    case ErrorKind::kIo:
    case ErrorKind::kCorruption:
    case ErrorKind::kIncompatible:
      return kExitIo;
    case ErrorKind::kContract:
      return kExitInternal;
  }
  return kExitInternal;
}

std::string error_line(int exit_code, const std::string& kind, const std::string& message) {
  Json j = {{"status", "error"}, {"exit_code", exit_code}, {"kind", kind}, {"message", message}};
  return j.dump(-1, ' ', false, Json::error_handler_t::replace);
}

std::string file_sha256(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return to_hex(sha256(bytes));
}

std::string run_id(const std::string& command, const Json& config, std::uint64_t seed) {
  // nlohmann::json keeps object keys sorted, so the dump is canonical.
  const std::string material = command + "\n" + config.dump() + "\n" + std::to_string(seed);
  return to_hex(sha256(material)).substr(0, 16);
}

std::string producing_run(const fs::path& path) {
  std::error_code ec;
  fs::path dir = fs::absolute(path, ec).parent_path();
  for (int depth = 0; depth < 3 && !dir.empty(); ++depth) {
    const auto manifest = dir / kManifestName;
    if (fs::exists(manifest, ec)) {
      std::ifstream in(manifest);
      const auto j = Json::parse(in, nullptr, false);
      if (!j.is_discarded() && j.contains("run_id") && j["run_id"].is_string()) {
        return j["run_id"].get<std::string>();
      }
      return {};
    }
    if (dir == dir.root_path()) break;
    dir = dir.parent_path();
  }
  return {};
}

Run::Run(std::string command, Json config, std::uint64_t seed, const fs::path& root,
         std::vector<std::string> argv)
    : command_(std::move(command)),
      config_(std::move(config)),
      seed_(seed),
      argv_(std::move(argv)),
      id_(run_id(command_, config_, seed_)),
      dir_(root / (command_ + "-" + id_)) {
  std::error_code ec;
  for (const auto& sub : {checkpoints(), metrics(), reports(), data()}) {
    fs::create_directories(sub, ec);
    if (ec) throw IoError("cannot create " + sub.string() + ": " + ec.message());
  }
}

fs::path Run::checkpoints() const { return dir_ / "checkpoints"; }
fs::path Run::metrics() const { return dir_ / "metrics"; }
fs::path Run::reports() const { return dir_ / "reports"; }
fs::path Run::data() const { return dir_ / "data"; }

void Run::add_input(const std::string& role, const fs::path& path) {
  inputs_.push_back({role, fs::absolute(path), file_sha256(path), producing_run(path)});
}

void Run::add_output(const std::string& role, const fs::path& path) {
  outputs_.push_back({role, fs::relative(path, dir_), file_sha256(path), id_});
}

void Run::write_manifest() const {
  auto refs = [](const std::vector<ArtifactRef>& list) {
    Json arr = Json::array();
    for (const auto& a : list) {
      Json j = {{"role", a.role}, {"path", a.path.generic_string()}, {"sha256", a.sha256}};
      if (!a.parent_run.empty()) j["run_id"] = a.parent_run;
      arr.push_back(j);
    }
    return arr;
  };
  Json parents = Json::array();
  for (const auto& a : inputs_) {
    if (!a.parent_run.empty() && std::find(parents.begin(), parents.end(), a.parent_run) ==
                                     parents.end()) {
      parents.push_back(a.parent_run);
    }
  }
  Json manifest = {{"tool", "dnd"},
                   {"tool_version", DND_VERSION},
                   {"command", command_},
                   {"run_id", id_},
                   {"seed", seed_},
                   {"config", config_},
                   {"argv", argv_},
                   {"parents", parents},
                   {"inputs", refs(inputs_)},
                   {"outputs", refs(outputs_)},
                   {"summary", summary_}};
  const auto path = dir_ / kManifestName;
  const auto tmp = dir_ / (std::string(kManifestName) + ".tmp");
  {
    std::ofstream out(tmp);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << manifest.dump(2) << "\n";
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move manifest into place: " + ec.message());
}

}  // namespace dnd::cli
