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

// dnd: data generation, the three training stages, the contrastive
// baseline, evaluation and analysis. Every run writes into a
// content-addressed directory with a manifest. On failure the last stderr
// line is a single JSON object carrying the exit code.

#include <cstdint>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "CLI11.hpp"

#include "commands.hpp"
#include "config.hpp"
#include "run.hpp"

namespace {

using namespace dnd::cli;

struct Invocation {
  std::string config_file;
  std::string manifest_file;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::string out_root = "runs";
  std::string resume;
  bool quiet = false;
  bool print_config = false;
  // (config path, raw value, kind) in command-line order.
  std::vector<std::tuple<std::string, std::string, FlagKind>> flags;
};

Json parse_value(const std::string& raw, FlagKind kind) {
  if (kind == FlagKind::kString) return raw;
  try {
    return Json::parse(raw);
  } catch (const Json::parse_error&) {
    return raw;
  }
}

Json resolve(const CommandSpec& spec, const Invocation& inv) {
  Violations v;
  Json user = Json::object();
  if (!inv.manifest_file.empty()) {
    const Json manifest = load_json_file(inv.manifest_file);
    if (manifest.value("command", std::string()) != spec.name) {
      v.add("--manifest", "manifest was written by '" + manifest.value("command", std::string("?")) +
                              "', not '" + spec.name + "'");
    } else if (manifest.contains("config")) {
      user = manifest.at("config");
    }
  } else if (!inv.config_file.empty()) {
    user = load_json_file(inv.config_file);
    if (!user.is_object()) v.add("--config", "top level must be a JSON object");
  }
  for (const auto& s : inv.sets) apply_override(user, s, v);
  for (const auto& [path, raw, kind] : inv.flags) {
    if (kind == FlagKind::kKeyValue) {
      const auto eq = raw.find('=');
      if (eq == std::string::npos || eq == 0) {
        v.add(path, "expected NAME=VALUE, got '" + raw + "'");
        continue;
      }
      set_path(user, path + "." + raw.substr(0, eq), raw.substr(eq + 1));
    } else if (kind == FlagKind::kSwitch) {
      set_path(user, path, true);
    } else {
      set_path(user, path, parse_value(raw, kind));
    }
  }
  if (inv.seed) {
    if (spec.has_seed) {
      user["seed"] = *inv.seed;
    } else {
      v.add("--seed", "not used by " + spec.name);
    }
  }
  check_against_schema(user, spec.defaults, v);

  Json cfg = spec.defaults;
  merge_into(cfg, user);
  try {
    spec.normalize(cfg);
    spec.validate(cfg, v);
  } catch (const Json::exception& e) {
    v.add("config", e.what());
  }
  v.raise();
  return cfg;
}

int execute(const CommandSpec& spec, const Invocation& inv, const std::vector<std::string>& argv) {
  const Json cfg = resolve(spec, inv);
  if (inv.print_config) {
    std::cout << cfg.dump(2) << std::endl;
    return kExitOk;
  }
  Context ctx;
  ctx.quiet = inv.quiet;
  if (!inv.resume.empty()) {
    if (!spec.resumable) throw dnd::ConfigError("--resume: " + spec.name + " does not train");
    ctx.resume = fs::path(inv.resume);
  }
  const std::uint64_t seed = cfg.value("seed", std::uint64_t{0});
  Run run(spec.name, cfg, seed, inv.out_root, argv);
  if (!inv.quiet) std::cerr << spec.name << ": run " << run.dir().string() << std::endl;
  spec.execute(cfg, run, ctx);
  run.write_manifest();
  Json ok = {{"status", "ok"},
             {"command", spec.name},
             {"run_id", run.id()},
             {"run_dir", fs::absolute(run.dir()).generic_string()}};
  if (run.summary().contains("report")) ok["report"] = run.summary()["report"];
  std::cout << ok.dump() << std::endl;
  return kExitOk;
}

int fail(int code, const std::string& kind, const std::string& message) {
  std::cerr << error_line(code, kind, message) << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dnd: 3D-to-2D molecular distillation pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", DND_VERSION);

  const auto& specs = command_specs();
  std::map<std::string, Invocation> invocations;
  const CommandSpec* chosen = nullptr;

  for (const auto& spec : specs) {
    auto& inv = invocations[spec.name];
    auto* sub = app.add_subcommand(spec.name, spec.description);
    sub->add_option("--config", inv.config_file, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--manifest", inv.manifest_file, "re-run the config recorded in a manifest")
        ->check(CLI::ExistingFile)
        ->excludes("--config");
    sub->add_option("--set", inv.sets, "override a config field: key.path=value (repeatable)")
        ->expected(1)
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    if (spec.has_seed) sub->add_option("--seed", inv.seed, "run seed");
    sub->add_option("--out", inv.out_root, "root directory for run outputs")->capture_default_str();
    if (spec.resumable) sub->add_option("--resume", inv.resume, "continue from a last.ckpt");
    sub->add_flag("--quiet", inv.quiet, "suppress progress output");
    sub->add_flag("--print-config", inv.print_config, "print the resolved config and exit");
    for (const auto& flag : spec.flags) {
      const std::string path = flag.path;
      const FlagKind kind = flag.kind;
      if (kind == FlagKind::kSwitch) {
        sub->add_flag_callback(flag.name, [&inv, path] {
          inv.flags.emplace_back(path, "true", FlagKind::kSwitch);
        }, flag.help);
      } else {
        auto* opt = sub->add_option_function<std::vector<std::string>>(
            flag.name,
            [&inv, path, kind](const std::vector<std::string>& values) {
              for (const auto& v : values) inv.flags.emplace_back(path, v, kind);
            },
            flag.help);
        opt->expected(1);
        if (kind == FlagKind::kKeyValue) opt->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
      }
    }
    sub->callback([&chosen, &spec] { chosen = &spec; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(kExitConfig, "config", e.what());
  }
  if (!chosen) return fail(kExitConfig, "config", "no subcommand given");

  std::vector<std::string> args(argv, argv + argc);
  try {
    return execute(*chosen, invocations.at(chosen->name), args);
  } catch (const dnd::Error& e) {
    return fail(exit_code_for(e.kind()), dnd::to_string(e.kind()), e.what());
  } catch (const Json::exception& e) {
    return fail(kExitConfig, "config", e.what());
  } catch (const std::exception& e) {
    return fail(kExitInternal, "internal", e.what());
  }
}
