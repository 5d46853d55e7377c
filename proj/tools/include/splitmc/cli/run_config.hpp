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

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "splitmc/splitmc.hpp"

namespace splitmc::cli {

inline constexpr int kSchemaVersion = 1;

struct NamedObservable {
  std::string name;
  Eigen::VectorXd values;
};

struct DenseSplit {
  SchemeSpec scheme;
  std::string first;
  std::string second;
  DenseGenerator L1;
  DenseGenerator L2;
};

struct CompareEntry {
  std::string name;
  std::optional<double> coefficient;  // literal A, else estimated
  int order = 1;
  double stderr_ = 0.0;
};

// Parsed, validated configuration. `resolved` is the input with every
// default filled in and the effective seed; it is echoed into outputs.
struct RunConfig {
  nlohmann::json resolved;
  std::string command;
  std::uint64_t seed = 0;

  // System.
  bool lattice = false;
  std::vector<int> dims;
  ArrheniusRates rates;
  int m = 1;
  DenseGenerator generator;  // dense chains, or the enumerated lattice chain

  // analyze-chain
  std::vector<DenseSplit> splits;
  std::vector<double> dt_grid;
  int fit_degree = 5;
  std::vector<double> uq_dt;
  std::vector<NamedObservable> observables;

  // simulate / sweep
  std::vector<SchemeSpec> schemes;
  double dt = 0.1;
  double T = 1.0;
  double burn_in = 0.0;
  std::uint64_t samples = 0;
  std::string initial = "empty";
  StrangVariant strang_variant = StrangVariant::kConservative;
  std::uint64_t batch = 100;
  std::uint64_t output_stride = 1;
  bool event_log = false;
  std::vector<double> tolerances;
  bool dense_oracle = false;

  // compare
  std::vector<CompareEntry> compare;
  std::optional<std::pair<int, int>> comm;  // (N, m)
};

// Throws ConfigError on any invalid field. `seed_override` replaces the
// config seed when present.
RunConfig parse_config(const std::string& command, const nlohmann::json& input,
                       std::optional<std::uint64_t> seed_override);

RunConfig load_config(const std::string& command, const std::string& path,
                      std::optional<std::uint64_t> seed_override);

}  // namespace splitmc::cli
