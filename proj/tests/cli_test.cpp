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

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "splitmc/cli/commands.hpp"

using namespace splitmc;
using namespace splitmc::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& tag) {
  static std::atomic<int> counter{0};
  fs::path p = fs::temp_directory_path() /
               ("splitmc_cli_" + tag + "_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter++));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_config(const fs::path& dir, const json& j) {
  fs::path p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

int invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "splitmc");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json lattice_system(std::vector<int> dims, double c1 = 1.0, double c2 = 1.0) {
  return {{"kind", "lattice"},
          {"dims", dims},
          {"rates", {{"c1", c1}, {"c2", c2}, {"beta", 1.0}, {"J0", 1.0}, {"h", 0.0}}}};
}

json example_system() {
  return {{"kind", "dense"},
          {"generator", {{-3, 1, 2}, {3, -4, 1}, {1, 0, -1}}},
          {"components", {{"B", {{"pairs", {{2, 0}}}}}, {"A", {{"complement_of", "B"}}}}}};
}

OutputSet run(const std::string& command, const json& cfg, unsigned threads = 1) {
  return run_command(parse_config(command, cfg, std::nullopt), Runtime{threads, false});
}

}  // namespace

TEST_CASE("analyze-chain on the worked example") {
  std::string cfg_dir = SPLITMC_CONFIG_DIR;
  for (auto [file, slope, coeff, order] :
       {std::tuple{"example_lie.json", 1.0, 0.124, 1}, std::tuple{"example_strang.json", 3.0,
                                                                  0.0279, 3}}) {
    auto rc = load_config("analyze-chain", cfg_dir + "/" + file, std::nullopt);
    auto out = analyze_chain(rc, Runtime{});
    auto j = json::parse(out.at("analysis.json"));
    const auto& s = j["schemes"][0];
    CHECK(s["fit"]["slope"].get<double>() == doctest::Approx(slope).epsilon(0.05 / slope));
    CHECK(s["fit"]["coeffs"][0].get<double>() == doctest::Approx(coeff).epsilon(0.01));
    CHECK(s["connectivity"]["diameter"] == 2);
    CHECK(s["predicted_order"] == order);
    CHECK(j["schema_version"] == kSchemaVersion);
  }
}

TEST_CASE("analyze-chain with an empty split reports zero rows") {
  json sys = example_system();
  sys["components"] = {{"all", {{"complement_of", "none"}}}, {"none", {{"pairs", json::array()}}}};
  json cfg = {{"system", sys},
              {"schemes", {{{"kind", "lie"}, {"first", "all"}, {"second", "none"}}}}};
  auto j = json::parse(run("analyze-chain", cfg).at("analysis.json"));
  const auto& s = j["schemes"][0];
  for (const auto& row : s["rer"]) CHECK(row["rer_stationary"].get<double>() == 0.0);
  CHECK(s["fit"].contains("error"));
}

TEST_CASE("simulate is reproducible and thread-count independent") {
  json cfg = {{"system", lattice_system({6})},
              {"decomposition", {{"m", 3}}},
              {"scheme", "lie"},
              {"dt", 0.5},
              {"T", 2000},
              {"burn_in", 10},
              {"event_log", true},
              {"seed", 42}};
  auto a = run("simulate", cfg, 1);
  auto b = run("simulate", cfg, 1);
  auto c = run("simulate", cfg, 3);
  CHECK(a == b);
  CHECK(a == c);
  cfg["seed"] = 43;
  CHECK(run("simulate", cfg, 1).at("estimate.json") != a.at("estimate.json"));
  for (const auto& [name, content] : a) {
    CHECK((content.find("\"seed\":42") != std::string::npos ||
           content.find("\"seed\": 42") != std::string::npos));
    CHECK(content.find("\"decomposition\"") != std::string::npos);
  }
}

TEST_CASE("simulate with zero rates") {
  json cfg = {{"system", lattice_system({6}, 0.0, 0.0)},
              {"decomposition", {{"m", 3}}},
              {"dt", 0.5},
              {"T", 20},
              {"seed", 1}};
  auto j = json::parse(run("simulate", cfg).at("estimate.json"));
  CHECK(j["coefficient"].get<double>() == 0.0);
  CHECK(j["comm"]["events"] == 0);
}

TEST_CASE("strang beats lie on a 32 by 32 torus") {
  json cfg = {{"system", lattice_system({32, 32})},
              {"decomposition", {{"m", 4}}},
              {"dt", 0.125},
              {"T", 10},
              {"burn_in", 5},
              {"seed", 11}};
  cfg["scheme"] = "lie";
  auto lie = json::parse(run("simulate", cfg).at("estimate.json"));
  cfg["scheme"] = "strang";
  auto strang = json::parse(run("simulate", cfg).at("estimate.json"));
  CHECK(strang["pp_rer"].get<double>() < lie["pp_rer"].get<double>());
  CHECK(lie["comm"]["sync_events_per_step"].get<double>() == 1.0);
  CHECK(strang["comm"]["sync_events_per_step"].get<double>() == 2.0);
}

TEST_CASE("sweep recovers both orders against the dense oracle") {
  json cfg = {{"system", lattice_system({6})},
              {"decomposition", {{"m", 3}}},
              {"dt_grid", {0.125, 0.0625, 0.03125, 0.015625, 0.0078125}},
              {"samples", 300},
              {"dense_oracle", true},
              {"seed", 5}};
  auto out = run("sweep", cfg);
  CHECK(out.count("sweep.csv") == 1);
  CHECK(out.count("tolerance.csv") == 1);
  auto j = json::parse(out.at("sweep.json"));
  for (const auto& s : j["schemes"]) {
    double want = s["scheme"] == "lie" ? 1.0 : 2.0;
    CHECK(std::abs(s["fit_dense"]["slope"].get<double>() - want) < 0.1);
  }
}

TEST_CASE("sweep tolerance table") {
  json cfg = {{"system", lattice_system({6}, 4.0, 4.0)},
              {"decomposition", {{"m", 3}}},
              {"dt_grid", {0.125, 0.0625, 0.03125, 0.015625}},
              {"samples", 2000},
              {"tolerances", {1e-3}},
              {"seed", 6}};
  auto j = json::parse(run("sweep", cfg).at("sweep.json"));
  CHECK(j["tolerance"][0]["strang_to_lie_ratio"].get<double>() > 10.0);
}

TEST_CASE("compare") {
  json pair = {{"schemes",
                {{{"name", "lie"}, {"A", 0.124}, {"order", 1}},
                 {{"name", "strang"}, {"A", 0.0279}, {"order", 3}}}},
               {"dt_grid", {0.1}},
               {"comm", {{"N", 100}, {"m", 10}}}};
  auto j = json::parse(run("compare", pair).at("compare.json"));
  CHECK(j["criterion"][0]["criterion"].get<double>() == doctest::Approx(0.0123721).epsilon(1e-9));
  CHECK(j["schemes"][0]["comm_bound"].get<double>() == doctest::Approx(0.22));
  CHECK(j["schemes"][1]["comm_bound"].get<double>() == doctest::Approx(0.66));

  json same = pair;
  same["schemes"][1] = same["schemes"][0];
  same["dt_grid"] = {0.1, 0.05, 0.01};
  auto k = json::parse(run("compare", same).at("compare.json"));
  for (const auto& row : k["criterion"]) CHECK(row["criterion"].get<double>() == 0.0);
}

TEST_CASE("exit codes and atomic output") {
  auto dir = scratch("exit");
  auto out = dir / "out";
  std::string cfg_dir = SPLITMC_CONFIG_DIR;

  CHECK(invoke({"analyze-chain", "--config", cfg_dir + "/example_lie.json", "--out", out.string(),
             "--threads", "1"}) == 0);
  CHECK(fs::exists(out / "analysis.json"));

  CHECK(invoke({"simulate", "--config", (dir / "missing.json").string(), "--out", out.string()}) ==
        3);
  std::ofstream(dir / "broken.json") << "{ not json";
  CHECK(invoke({"simulate", "--config", (dir / "broken.json").string(), "--out", out.string()}) ==
        3);
  CHECK(invoke({"simulate"}) == 3);
  CHECK(invoke({"frobnicate"}) == 3);

  auto fresh = dir / "fresh";
  json bad_m = {{"system", lattice_system({6})}, {"decomposition", {{"m", 4}}}};
  CHECK(invoke({"simulate", "--config", write_config(dir, bad_m).string(), "--out",
             fresh.string()}) == 3);
  CHECK((!fs::exists(fresh) || fs::is_empty(fresh)));

  // Two disconnected blocks: the exact chain has no unique stationary law.
  json reducible = {
      {"system",
       {{"kind", "dense"},
        {"generator", {{-1, 1, 0, 0}, {1, -1, 0, 0}, {0, 0, -1, 1}, {0, 0, 1, -1}}},
        {"components", {{"B", {{"pairs", {{0, 1}}}}}, {"A", {{"complement_of", "B"}}}}}}},
      {"schemes", {{{"kind", "lie"}, {"first", "B"}, {"second", "A"}}}}};
  CHECK(invoke({"analyze-chain", "--config", write_config(dir, reducible).string(), "--out",
             fresh.string()}) == 2);
  CHECK((!fs::exists(fresh) || fs::is_empty(fresh)));

  ::setenv("SPLITMC_THREADS", "zero", 1);
  CHECK(invoke({"analyze-chain", "--config", cfg_dir + "/example_lie.json", "--out",
             out.string()}) == 3);
  ::setenv("SPLITMC_THREADS", "2", 1);
  CHECK(invoke({"analyze-chain", "--config", cfg_dir + "/example_lie.json", "--out",
             out.string()}) == 0);
  ::unsetenv("SPLITMC_THREADS");

  for (const auto& e : fs::directory_iterator(out))
    CHECK(e.path().filename().string().find(".tmp") == std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("atomic writer stages every file") {
  auto dir = scratch("atomic");
  write_atomic(dir.string(), {{"a.txt", "alpha"}, {"b.txt", "beta"}});
  CHECK(slurp(dir / "a.txt") == "alpha");
  CHECK(slurp(dir / "b.txt") == "beta");
  std::size_t count = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++count;
  CHECK(count == 2);
  fs::remove_all(dir);
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS(parse_config("simulate", json::array(), std::nullopt), ConfigError);
  json neg = {{"system", lattice_system({6}, -1.0)}, {"decomposition", {{"m", 3}}}};
  CHECK_THROWS_AS(parse_config("simulate", neg, std::nullopt), ConfigError);
  json rows = {{"system",
                {{"kind", "dense"},
                 {"generator", {{-1, 2}, {1, -1}}},
                 {"components", {{"B", {{"pairs", {{0, 1}}}}}, {"A", {{"complement_of", "B"}}}}}}},
               {"schemes", {{{"kind", "lie"}, {"first", "B"}, {"second", "A"}}}}};
  CHECK_THROWS_AS(parse_config("analyze-chain", rows, std::nullopt), ConfigError);

  json ok = {{"system", lattice_system({6})}, {"decomposition", {{"m", 3}}}, {"seed", 4}};
  auto rc = parse_config("simulate", ok, std::uint64_t{9});
  CHECK(rc.seed == 9);
  CHECK(rc.resolved["seed"] == 9);
  CHECK(rc.resolved.contains("dt"));
}
