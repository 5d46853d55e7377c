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

#include "splitmc/cli/run_config.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace splitmc::cli {
namespace {

using json = nlohmann::json;

[[noreturn]] void bad(const std::string& what) { throw ConfigError("config: " + what); }

template <class T>
T convert(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception& e) {
    bad("field '" + key + "' has the wrong type (" + e.what() + ")");
  }
}

template <class T>
T take(json& obj, const std::string& key, const T& def) {
  if (!obj.contains(key)) obj[key] = def;
  return convert<T>(obj[key], key);
}

template <class T>
T need(const json& obj, const std::string& key) {
  if (!obj.contains(key)) bad("missing required field '" + key + "'");
  return convert<T>(obj.at(key), key);
}

json& object_field(json& obj, const std::string& key) {
  if (!obj.contains(key)) obj[key] = json::object();
  if (!obj[key].is_object()) bad("field '" + key + "' must be an object");
  return obj[key];
}

std::vector<double> dyadic(int lo, int hi) {
  std::vector<double> g;
  for (int k = lo; k <= hi; ++k) g.push_back(std::ldexp(1.0, -k));
  return g;
}

Eigen::MatrixXd parse_matrix(const json& v, const std::string& key) {
  if (!v.is_array() || v.empty()) bad("'" + key + "' must be a non-empty array of rows");
  const std::size_t n = v.size();
  if (n > kDenseStateCap) bad("'" + key + "' exceeds the 4096-state dense cap");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    auto row = convert<std::vector<double>>(v[i], key);
    if (row.size() != n) bad("'" + key + "' must be square");
    for (std::size_t j = 0; j < n; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
  }
  return m;
}

void check_grid(const std::vector<double>& g, const std::string& key, std::size_t min_size) {
  if (g.size() < min_size)
    bad("'" + key + "' needs at least " + std::to_string(min_size) + " entries");
  for (double v : g)
    if (!(v > 0.0 && v < 1.0)) bad("'" + key + "' entries must lie in (0,1)");
}

void parse_lattice(RunConfig& rc, json& sys, json& root) {
  rc.lattice = true;
  rc.dims = need<std::vector<int>>(sys, "dims");
  json& r = object_field(sys, "rates");
  rc.rates.c1 = take(r, "c1", 1.0);
  rc.rates.c2 = take(r, "c2", 1.0);
  rc.rates.beta = take(r, "beta", 1.0);
  rc.rates.J0 = take(r, "J0", 1.0);
  rc.rates.h = take(r, "h", 0.0);
  rc.rates.validate();
  sys["boundary"] = "periodic";
  json& dec = object_field(root, "decomposition");
  rc.m = take(dec, "m", 1);
  make_shape(rc.dims);  // validates dims
}

std::vector<NamedObservable> parse_observables(json& root, const RunConfig& rc) {
  const std::size_t n = rc.generator.size();
  std::vector<NamedObservable> out;
  json& v = root["observables"];
  if (v.is_string()) {
    auto kind = v.get<std::string>();
    if (kind == "coordinates") {
      for (std::size_t i = 0; i < n; ++i) {
        Eigen::VectorXd f = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
        f(static_cast<Eigen::Index>(i)) = 1.0;
        out.push_back({"state_" + std::to_string(i), f});
      }
    } else if (kind == "coverage") {
      if (!rc.lattice) bad("'coverage' observable needs a lattice system");
      auto shape = make_shape(rc.dims);
      Eigen::VectorXd f(static_cast<Eigen::Index>(n));
      for (std::size_t s = 0; s < n; ++s)
        f(static_cast<Eigen::Index>(s)) = SpinConfiguration::from_index(shape, s).coverage();
      out.push_back({"coverage", f});
    } else {
      bad("unknown observable set '" + kind + "'");
    }
    return out;
  }
  if (!v.is_array()) bad("'observables' must be a string or an array");
  for (auto& o : v) {
    auto name = need<std::string>(o, "name");
    auto vals = need<std::vector<double>>(o, "values");
    if (vals.size() != n) bad("observable '" + name + "' has the wrong length");
    out.push_back({name, Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(n))});
  }
  return out;
}

void parse_analyze(RunConfig& rc, json& root) {
  json& sys = root["system"];
  std::map<std::string, PairMask> masks;
  if (rc.lattice) {
    auto shape = make_shape(rc.dims);
    if (shape->site_count() > 12) bad("dense analysis needs at most 12 lattice sites");
    rc.generator = lattice_generator(*shape, rc.rates);
    Decomposition dec(shape, rc.m);
    for (Group g : {Group::kFirst, Group::kSecond}) {
      masks.emplace(to_string(g), PairMask::select(rc.generator, [&](std::size_t i, std::size_t j) {
                      std::size_t diff = i ^ j;
                      if (std::popcount(diff) != 1) return false;
                      auto site = static_cast<Site>(std::countr_zero(diff));
                      return dec.group_of(site) == g;
                    }));
    }
  } else {
    rc.generator = DenseGenerator(parse_matrix(need<json>(sys, "generator"), "generator"));
    if (!sys.contains("components") || !sys["components"].is_object())
      bad("dense systems need a 'components' object");
    const std::size_t n = rc.generator.size();
    std::vector<std::pair<std::string, std::string>> complements;
    for (auto& [name, spec] : sys["components"].items()) {
      if (spec.contains("pairs")) {
        auto pairs = convert<std::vector<std::pair<std::size_t, std::size_t>>>(spec["pairs"], name);
        masks.emplace(name, PairMask::from_pairs(n, pairs));
      } else if (spec.contains("complement_of")) {
        complements.emplace_back(name, convert<std::string>(spec["complement_of"], name));
      } else {
        bad("component '" + name + "' needs 'pairs' or 'complement_of'");
      }
    }
    for (auto& [name, of] : complements) {
      auto it = masks.find(of);
      if (it == masks.end()) bad("component '" + name + "' complements unknown '" + of + "'");
      masks.emplace(name, it->second.complement());
    }
  }

  json def_schemes = json::array();
  if (rc.lattice) {
    def_schemes.push_back({{"kind", "lie"}, {"first", "G1"}, {"second", "G2"}});
    def_schemes.push_back({{"kind", "strang"}, {"first", "G1"}, {"second", "G2"}});
  }
  if (!root.contains("schemes")) {
    if (!rc.lattice) bad("dense systems need a 'schemes' list");
    root["schemes"] = def_schemes;
  }
  if (!root["schemes"].is_array() || root["schemes"].empty())
    bad("'schemes' must be a non-empty array");
  for (auto& s : root["schemes"]) {
    DenseSplit split;
    split.scheme = SchemeSpec::parse(need<std::string>(s, "kind"));
    split.first = need<std::string>(s, "first");
    split.second = need<std::string>(s, "second");
    auto a = masks.find(split.first), b = masks.find(split.second);
    if (a == masks.end()) bad("unknown component '" + split.first + "'");
    if (b == masks.end()) bad("unknown component '" + split.second + "'");
    validate_split(rc.generator, a->second, b->second);
    split.L1 = restrict(rc.generator, a->second);
    split.L2 = restrict(rc.generator, b->second);
    rc.splits.push_back(std::move(split));
  }
  rc.dt_grid = take(root, "dt_grid", dyadic(2, 8));
  check_grid(rc.dt_grid, "dt_grid", 4);
  rc.fit_degree = take(root, "fit_degree", 5);
  if (rc.fit_degree < 0) bad("'fit_degree' must be >= 0");
  rc.uq_dt = take(root, "uq_dt", std::vector<double>{0.05, 0.1});
  for (double v : rc.uq_dt)
    if (!(v > 0.0 && v <= 1.0)) bad("'uq_dt' entries must lie in (0,1]");
  if (!root.contains("observables")) root["observables"] = rc.lattice ? "coverage" : "coordinates";
  rc.observables = parse_observables(root, rc);
}

void parse_sim_common(RunConfig& rc, json& root) {
  rc.strang_variant = parse_strang_variant(take<std::string>(root, "strang_estimator", "conservative"));
  rc.batch = take<std::uint64_t>(root, "batch", 100);
  if (rc.batch == 0) bad("'batch' must be positive");
  rc.initial = take<std::string>(root, "initial", "empty");
  if (rc.initial != "empty" && rc.initial != "full" && rc.initial != "random")
    bad("'initial' must be empty, full or random");
  // Validates divisibility and width up front so failures map to exit 3.
  checkerboard(make_shape(rc.dims), rc.m);
}

void parse_simulate(RunConfig& rc, json& root) {
  if (!rc.lattice) bad("simulate needs a lattice system");
  rc.schemes = {SchemeSpec::parse(take<std::string>(root, "scheme", "lie"))};
  rc.dt = take(root, "dt", 0.1);
  rc.T = take(root, "T", 100.0);
  rc.burn_in = take(root, "burn_in", 0.0);
  if (!(rc.dt > 0.0 && rc.dt <= 1.0)) bad("'dt' must lie in (0,1]");
  if (!(rc.burn_in >= 0.0 && rc.T >= rc.burn_in)) bad("need T >= burn_in >= 0");
  rc.output_stride = take<std::uint64_t>(root, "output_stride", 1);
  if (rc.output_stride == 0) bad("'output_stride' must be positive");
  rc.event_log = take(root, "event_log", false);
  parse_sim_common(rc, root);
}

void parse_sweep(RunConfig& rc, json& root) {
  if (!rc.lattice) bad("sweep needs a lattice system");
  auto names = take(root, "schemes", std::vector<std::string>{"lie", "strang"});
  if (names.empty()) bad("'schemes' must not be empty");
  for (auto& n : names) rc.schemes.push_back(SchemeSpec::parse(n));
  rc.dt_grid = take(root, "dt_grid", std::vector<double>{0.5, 0.25, 0.125, 0.0625});
  check_grid(rc.dt_grid, "dt_grid", 4);
  rc.samples = take<std::uint64_t>(root, "samples", 10000);
  if (rc.samples == 0) bad("'samples' must be positive");
  rc.burn_in = take(root, "burn_in", 10.0);
  if (!(rc.burn_in >= 0.0)) bad("'burn_in' must be >= 0");
  rc.tolerances = take(root, "tolerances", std::vector<double>{1e-3});
  for (double t : rc.tolerances)
    if (!(t > 0.0)) bad("'tolerances' entries must be positive");
  std::size_t sites = make_shape(rc.dims)->site_count();
  if (!root.contains("dense_oracle")) root["dense_oracle"] = sites <= 8;
  rc.dense_oracle = convert<bool>(root["dense_oracle"], "dense_oracle");
  if (rc.dense_oracle && sites > 10) bad("'dense_oracle' supports at most 10 sites");
  parse_sim_common(rc, root);
}

void parse_compare(RunConfig& rc, json& root) {
  if (!root.contains("schemes") || !root["schemes"].is_array() || root["schemes"].size() != 2)
    bad("compare needs exactly two entries in 'schemes'");
  bool needs_sim = false;
  for (auto& s : root["schemes"]) {
    CompareEntry e;
    if (s.contains("A")) {
      e.coefficient = convert<double>(s["A"], "A");
      e.order = need<int>(s, "order");
      e.name = need<std::string>(s, "name");
      if (e.order < 1) bad("'order' must be >= 1");
    } else {
      auto spec = SchemeSpec::parse(need<std::string>(s, "scheme"));
      e.name = take<std::string>(s, "name", spec.name());
      e.order = spec.rer_order();
      needs_sim = true;
      rc.schemes.push_back(spec);
    }
    rc.compare.push_back(e);
  }
  rc.dt_grid = take(root, "dt_grid", dyadic(1, 7));
  for (double v : rc.dt_grid)
    if (!(v > 0.0 && v <= 1.0)) bad("'dt_grid' entries must lie in (0,1]");
  if (needs_sim) {
    if (!rc.lattice) bad("estimated coefficients need a lattice system");
    rc.dt = take(root, "dt", 0.1);
    rc.T = take(root, "T", 100.0);
    rc.burn_in = take(root, "burn_in", 0.0);
    if (!(rc.dt > 0.0 && rc.dt <= 1.0)) bad("'dt' must lie in (0,1]");
    if (!(rc.burn_in >= 0.0 && rc.T >= rc.burn_in)) bad("need T >= burn_in >= 0");
    parse_sim_common(rc, root);
  }
  if (root.contains("comm")) {
    json& c = root["comm"];
    rc.comm = std::make_pair(need<int>(c, "N"), need<int>(c, "m"));
  } else if (rc.lattice) {
    rc.comm = std::make_pair(rc.dims.front(), rc.m);
    root["comm"] = {{"N", rc.comm->first}, {"m", rc.comm->second}};
  }
  if (rc.comm && (rc.comm->second < 1 || rc.comm->second > rc.comm->first))
    bad("'comm' needs 1 <= m <= N");
}

}  // namespace

RunConfig parse_config(const std::string& command, const json& input,
                       std::optional<std::uint64_t> seed_override) {
  if (!input.is_object()) bad("top level must be an object");
  RunConfig rc;
  rc.command = command;
  json root = input;
  root.erase("threads");
  rc.seed = take<std::uint64_t>(root, "seed", 0);
  if (seed_override) {
    rc.seed = *seed_override;
    root["seed"] = rc.seed;
  }
  if (root.contains("system")) {
    json& sys = object_field(root, "system");
    auto kind = need<std::string>(sys, "kind");
    if (kind == "lattice") {
      parse_lattice(rc, sys, root);
    } else if (kind != "dense") {
      bad("system kind must be 'dense' or 'lattice'");
    }
  } else if (command != "compare") {
    bad("missing required field 'system'");
  }

  if (command == "analyze-chain")
    parse_analyze(rc, root);
  else if (command == "simulate")
    parse_simulate(rc, root);
  else if (command == "sweep")
    parse_sweep(rc, root);
  else if (command == "compare")
    parse_compare(rc, root);
  else
    bad("unknown command '" + command + "'");
  rc.resolved = std::move(root);
  return rc;
}

RunConfig load_config(const std::string& command, const std::string& path,
                      std::optional<std::uint64_t> seed_override) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in, nullptr, true, true);
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse config '" + path + "': " + e.what());
  }
  return parse_config(command, j, seed_override);
}

}  // namespace splitmc::cli
