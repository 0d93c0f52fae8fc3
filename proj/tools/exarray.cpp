// Copyright 2026 The exarray Authors.
// SPDX-License-Identifier: Apache-2.0

// exarray <command> [flags]
//   commands: generate, decompose, verify-mz, verify-lil, counterexample, selftest

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "exarray/report.hpp"

int main(int argc, char** argv) {
  using namespace exarray;
  CLI::App app{"Simulation lab for jointly exchangeable dissociated arrays"};
  app.set_version_flag("--version", std::string(kVersion));

  std::string command, config_path;
  std::map<std::string, std::string> flags;
  std::string seeds;
  bool check = true, no_check = false;
  app.add_option("command", command, "generate | decompose | verify-mz | verify-lil | counterexample | selftest")
      ->required();
  app.add_option("--config", config_path, "key=value file; flags override it");
  for (const char* key : {"model", "k", "r", "alpha", "grid", "reps", "mc-samples", "out", "threads", "master-seed"})
    app.add_option(std::string("--") + key, flags[key]);
  app.add_option("--seeds", seeds, "comma-separated seeds");
  auto* check_flag = app.add_flag("--check", check, "exit 1 when a check fails (default)");
  auto* no_check_flag = app.add_flag("--no-check", no_check, "always exit 0 once outputs are written");
  check_flag->excludes(no_check_flag);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    ExperimentConfig cfg;
    if (const char* env = std::getenv("EXARRAY_SEED")) cfg.master_seed = parse_u64(env, "EXARRAY_SEED");
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      if (!f) throw UsageError("cannot read config '" + config_path + "'");
      std::stringstream ss;
      ss << f.rdbuf();
      parse_config_text(cfg, ss.str());
    }
    cfg.command = command;
    for (const auto& [key, value] : flags) {
      if (app.get_option("--" + key)->count() == 0) continue;
      std::string k = key;
      for (char& c : k)
        if (c == '-') c = '_';
      apply_setting(cfg, k, value);
    }
    if (app.get_option("--seeds")->count()) {
      cfg.seeds.clear();
      apply_setting(cfg, "seeds", seeds);
    }
    if (no_check) cfg.check = false;
    if (check_flag->count()) cfg.check = true;

    const auto rep = run(cfg);
    for (const auto& c : rep.checks) std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
    std::cout << "manifest: " << rep.manifest.string() << "\n";
    return rep.exit_code();
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
