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

#pragma once

#include <map>
#include <string>

#include "splitmc/cli/run_config.hpp"

namespace splitmc::cli {

struct Runtime {
  unsigned threads = 1;
  bool timing = true;
};

// File name -> content. Commands build the full set before anything is
// written, so a failure leaves no partial output.
using OutputSet = std::map<std::string, std::string>;

OutputSet analyze_chain(const RunConfig& rc, const Runtime& rt);
OutputSet simulate_run(const RunConfig& rc, const Runtime& rt);
OutputSet sweep(const RunConfig& rc, const Runtime& rt);
OutputSet compare(const RunConfig& rc, const Runtime& rt);

OutputSet run_command(const RunConfig& rc, const Runtime& rt);

// Writes every file to a temporary name in `dir`, then renames them all.
void write_atomic(const std::string& dir, const OutputSet& files);

// Full command-line entry point; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace splitmc::cli
