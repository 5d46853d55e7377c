// Copyright 2026 The splitmc Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdlib>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "splitmc/cli/commands.hpp"

namespace splitmc::cli {
namespace {

constexpr int kExitAnalysis = 2;
constexpr int kExitConfig = 3;

unsigned resolve_threads(int flag) {
  if (flag > 0) return static_cast<unsigned>(flag);
  if (const char* env = std::getenv("SPLITMC_THREADS"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1) throw ConfigError("SPLITMC_THREADS must be a positive integer");
    return static_cast<unsigned>(v);
  }
  return std::max(1U, std::thread::hardware_concurrency());
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Operator-splitting KMC simulator and relative-entropy-rate analysis"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::string out_dir = ".";
  for (const char* name : {"analyze-chain", "simulate", "sweep", "compare"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "Config file (JSON)")->required();
    sub->add_option("--seed", seed, "Override the config seed");
    sub->add_option("--threads", threads, "Worker threads (default: SPLITMC_THREADS or cores)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--out", out_dir, "Output directory");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }
  std::string command = app.get_subcommands().front()->get_name();
  try {
    Runtime rt;
    rt.threads = resolve_threads(threads);
    auto rc = load_config(command, config_path, seed);
    auto files = run_command(rc, rt);
    write_atomic(out_dir, files);
    for (const auto& [name, content] : files) std::cout << out_dir << "/" << name << "\n";
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "splitmc: config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const AnalysisError& e) {
    std::cerr << "splitmc: analysis error: " << e.what() << "\n";
    return kExitAnalysis;
  } catch (const std::exception& e) {
    std::cerr << "splitmc: error: " << e.what() << "\n";
    return kExitAnalysis;
  }
}

}  // namespace splitmc::cli
