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

#include "splitmc/cli/commands.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace splitmc::cli {
namespace {

using json = nlohmann::json;
using Eigen::VectorXd;

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json header(const RunConfig& rc) {
  return {{"schema_version", kSchemaVersion},
          {"command", rc.command},
          {"seed", rc.seed},
          {"config", rc.resolved}};
}

std::string csv_header(const RunConfig& rc) {
  std::ostringstream os;
  os << "# schema_version=" << kSchemaVersion << "\n"
     << "# command=" << rc.command << "\n"
     << "# seed=" << rc.seed << "\n"
     << "# config=" << rc.resolved.dump() << "\n";
  return os.str();
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json to_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    VectorXd r = m.row(i).transpose();
    rows.push_back(to_json(r));
  }
  return rows;
}

json to_json(const OrderFit& f) {
  return {{"slope", f.slope}, {"order", f.order}, {"coeffs", f.coeffs}, {"rsq", f.rsq},
          {"grid", f.grid}};
}

// Runs fit_order, turning numerical rejection into a reported reason.
json try_fit(const std::vector<std::pair<double, double>>& s, int degree) {
  try {
    return to_json(fit_order(s, degree));
  } catch (const Error& e) {
    return {{"error", e.what()}};
  }
}

json connectivity_json(const ConnectivityReport& c) {
  json d = json::array();
  for (const auto& row : c.dist) {
    json r = json::array();
    for (int v : row) r.push_back(v == kUnreachable ? json(nullptr) : json(v));
    d.push_back(r);
  }
  return {{"diameter", c.diameter}, {"k_hat", c.k_hat}, {"distance", d}};
}

}  // namespace

OutputSet analyze_chain(const RunConfig& rc, const Runtime&) {
  json rep = header(rc);
  const auto& gen = rc.generator;
  const std::size_t n = gen.size();
  rep["states"] = n;
  rep["exact_stationary"] = to_json(stationary(expm(gen, 1.0)));
  std::vector<double> grid = rc.dt_grid;
  std::sort(grid.begin(), grid.end());

  json schemes = json::array();
  for (const auto& sp : rc.splits) {
    json s;
    s["scheme"] = sp.scheme.name();
    s["first"] = sp.first;
    s["second"] = sp.second;
    s["p"] = sp.scheme.p;
    json rows = json::array();
    std::vector<std::pair<double, double>> st, un;
    for (double dt : grid) {
      auto po = expm(gen, dt);
      auto pb = scheme_matrix(sp.L1, sp.L2, sp.scheme, dt);
      VectorXd mub = stationary(pb);
      double hs = rer(pb, po, mub);
      double hu = rer(pb, po, uniform_measure(n));
      st.emplace_back(dt, hs);
      un.emplace_back(dt, hu);
      rows.push_back({{"dt", dt}, {"rer_stationary", hs}, {"rer_uniform", hu},
                      {"scheme_stationary", to_json(mub)}});
    }
    s["rer"] = rows;
    s["fit"] = try_fit(st, rc.fit_degree);
    s["fit_uniform"] = try_fit(un, rc.fit_degree);

    auto comm = commutator(gen, sp.L1, sp.L2, sp.scheme);
    auto conn = connectivity(gen, sp.scheme.p);
    s["commutator"] = {{"p", comm.p},
                       {"residual", comm.residual},
                       {"max_abs", comm.C.cwiseAbs().maxCoeff()},
                       {"formula_sign", comm.formula_sign},
                       {"formula_deviation", comm.formula_deviation},
                       {"C", to_json(comm.C)}};
    s["connectivity"] = connectivity_json(conn);
    try {
      s["predicted_order"] = predict_order(conn, comm);
    } catch (const AnalysisError& e) {
      s["predicted_order"] = nullptr;
      s["prediction_note"] = e.what();
    }

    json uq = json::array();
    for (double dt : rc.uq_dt) {
      auto po = expm(gen, dt);
      auto pb = scheme_matrix(sp.L1, sp.L2, sp.scheme, dt);
      VectorXd muq = stationary(pb), mup = stationary(po);
      for (const auto& ob : rc.observables) {
        auto b = goal_oriented_bounds(pb, po, ob.values);
        double gap = muq.dot(ob.values) - mup.dot(ob.values);
        uq.push_back({{"dt", dt},
                      {"observable", ob.name},
                      {"gap", gap},
                      {"xi_minus", b.xi_minus},
                      {"xi_plus", b.xi_plus},
                      {"linearized_bound", linearized_bound(pb, po, ob.values)}});
      }
    }
    s["uq"] = uq;
    schemes.push_back(s);
  }
  rep["schemes"] = schemes;
  return {{"analysis.json", dump(rep)}};
}

namespace {

SpinConfiguration initial_state(const RunConfig& rc, const ShapePtr& shape) {
  SpinConfiguration s(shape);
  if (rc.initial == "full") {
    for (std::size_t x = 0; x < s.size(); ++x) s.set(static_cast<Site>(x), 1);
  } else if (rc.initial == "random") {
    CounterRng rng(rc.seed, ~std::uint64_t{0}, 0, 0);
    for (std::size_t x = 0; x < s.size(); ++x)
      s.set(static_cast<Site>(x), rng.uniform() < 0.5 ? 1 : 0);
  }
  return s;
}

struct EstimatorRun {
  RerAccumulator acc;
  SimulationResult sim;
  double mean_coverage = 0.0;
};

EstimatorRun run_estimator(const RunConfig& rc, const SchemeSpec& scheme, double dt,
                           double T, double burn_in, std::uint64_t seed, const Runtime& rt,
                           std::ostringstream* csv, EventLog* log) {
  auto shape = make_shape(rc.dims);
  Decomposition dec(shape, rc.m);
  CoefficientEstimator est(dec, rc.rates, scheme, rc.strang_variant);
  EstimatorRun out{est.make_accumulator(rc.batch), {SpinConfiguration(shape), {}, {}, 0, 0}, 0.0};
  double cov = 0.0;
  std::uint64_t idx = 0;
  SampleHook hook = [&](const SpinConfiguration& s, const SimClock& c) {
    auto v = est.evaluate(s);
    if (v.singular > 0)
      out.acc.flag_excluded();
    else
      out.acc.add(v.value);
    double cv = s.coverage();
    cov += cv;
    if (csv != nullptr && idx % rc.output_stride == 0)
      *csv << c.step_count << ',' << num(static_cast<double>(c.step_count) * dt) << ','
           << num(cv) << ',' << num(v.value) << '\n';
    ++idx;
  };
  Executor ex(rt.threads);
  SimulationOptions opt{dt, T, burn_in, seed, &ex, log, rt.timing};
  out.sim = simulate(initial_state(rc, shape), dec, scheme, rc.rates, opt,
                     std::span<const SampleHook>(&hook, 1));
  if (out.acc.excluded() > 0)
    throw AnalysisError(std::to_string(out.acc.excluded()) +
                        " samples had singular local terms; estimator invalid for this system");
  if (out.sim.samples > 0) out.mean_coverage = cov / static_cast<double>(out.sim.samples);
  return out;
}

json comm_json(const CommStats& st, std::size_t sites, int N, int m, const SchemeSpec& scheme) {
  double steps = static_cast<double>(std::max<std::uint64_t>(st.steps, 1));
  return {{"steps", st.steps},
          {"sync_events", st.sync_events},
          {"sync_events_per_step", static_cast<double>(st.sync_events) / steps},
          {"boundary_rate_evals", st.boundary_rate_evals},
          {"normalized_boundary_evals_per_step", st.normalized_boundary_evals(sites)},
          {"comm_bound", comm_bound(m, N, scheme)},
          {"bulk_rate_evals", st.bulk_rate_evals},
          {"events", st.events}};
}

std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return mix64(seed ^ mix64((a << 32) ^ b));
}

}  // namespace

OutputSet simulate_run(const RunConfig& rc, const Runtime& rt) {
  const auto& scheme = rc.schemes.front();
  std::ostringstream csv;
  csv << csv_header(rc) << "step,time,coverage,f_sample\n";
  EventLog log;
  auto run = run_estimator(rc, scheme, rc.dt, rc.T, rc.burn_in, rc.seed, rt, &csv,
                           rc.event_log ? &log : nullptr);
  const std::size_t sites = make_shape(rc.dims)->site_count();
  json rep = header(rc);
  rep["scheme"] = scheme.name();
  rep["order"] = run.acc.order();
  rep["dt"] = rc.dt;
  rep["sites"] = sites;
  rep["samples"] = run.acc.count();
  rep["excluded"] = run.acc.excluded();
  rep["batches"] = run.acc.batches();
  rep["strang_estimator"] = to_string(rc.strang_variant);
  if (run.acc.count() > 0) {
    double scale = std::pow(rc.dt, run.acc.order()) / static_cast<double>(sites);
    rep["coefficient"] = run.acc.estimate();
    rep["coefficient_stderr"] = run.acc.standard_error();
    rep["pp_rer"] = pp_rer(run.acc, sites, rc.dt);
    rep["pp_rer_stderr"] = run.acc.standard_error() * scale;
    rep["mean_coverage"] = run.mean_coverage;
  } else {
    for (const char* k : {"coefficient", "coefficient_stderr", "pp_rer", "pp_rer_stderr",
                          "mean_coverage"})
      rep[k] = nullptr;
  }
  rep["comm"] = comm_json(run.sim.stats, sites, rc.dims.front(), rc.m, scheme);

  OutputSet out;
  out["estimate.json"] = dump(rep);
  out["observables.csv"] = csv.str();
  if (rt.timing) {
    json tm = header(rc);
    tm.update(json{{"note", "wall-clock measurements; not covered by the determinism guarantee"},
                   {"threads", rt.threads},
                   {"comm_seconds", run.sim.stats.comm_seconds},
                   {"total_seconds", run.sim.stats.total_seconds},
                   {"wall_fraction_comm", run.sim.stats.wall_fraction_comm()}});
    out["timing.json"] = dump(tm);
  }
  if (rc.event_log) {
    std::ostringstream ev;
    ev << csv_header(rc) << "step,sublattice,site,new_spin,local_time\n";
    for (const auto& r : log)
      ev << r.step << ',' << r.sublattice << ',' << r.site << ',' << r.new_spin << ','
         << num(r.local_time) << '\n';
    out["events.csv"] = ev.str();
  }
  return out;
}

OutputSet sweep(const RunConfig& rc, const Runtime& rt) {
  auto shape = make_shape(rc.dims);
  const std::size_t sites = shape->site_count();
  std::vector<double> grid = rc.dt_grid;
  std::sort(grid.begin(), grid.end());

  std::optional<DenseGenerator> g, l1, l2;
  if (rc.dense_oracle) {
    Decomposition dec(shape, rc.m);
    Group a = Group::kFirst, b = Group::kSecond;
    g = lattice_generator(*shape, rc.rates);
    l1 = lattice_generator(*shape, rc.rates, dec.site_groups(), &a);
    l2 = lattice_generator(*shape, rc.rates, dec.site_groups(), &b);
  }

  std::ostringstream csv;
  csv << csv_header(rc)
      << "scheme,dt,coefficient,coefficient_stderr,pp_rer,pp_rer_stderr,samples,excluded,"
         "dense_pp_rer\n";
  json rep = header(rc);
  json schemes = json::array();
  std::map<std::string, std::pair<double, int>> pooled;
  for (std::size_t si = 0; si < rc.schemes.size(); ++si) {
    const auto& scheme = rc.schemes[si];
    json s = {{"scheme", scheme.name()}, {"order", scheme.rer_order()}};
    json rows = json::array();
    std::vector<std::pair<double, double>> est_pts, dense_pts;
    std::optional<RerAccumulator> pool;
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
      double dt = grid[gi];
      auto burn_steps = static_cast<std::uint64_t>(std::ceil(rc.burn_in / dt - 1e-9));
      double burn = static_cast<double>(burn_steps) * dt;
      double T = static_cast<double>(burn_steps + rc.samples) * dt;
      auto run = run_estimator(rc, scheme, dt, T, burn, derived_seed(rc.seed, si, gi), rt,
                               nullptr, nullptr);
      double scale = std::pow(dt, run.acc.order()) / static_cast<double>(sites);
      double pp = pp_rer(run.acc, sites, dt);
      double pp_se = run.acc.standard_error() * scale;
      json row = {{"dt", dt},
                  {"coefficient", run.acc.estimate()},
                  {"coefficient_stderr", run.acc.standard_error()},
                  {"pp_rer", pp},
                  {"pp_rer_stderr", pp_se},
                  {"samples", run.acc.count()},
                  {"excluded", run.acc.excluded()}};
      std::string dense_col;
      if (rc.dense_oracle) {
        auto po = expm(*g, dt);
        auto pb = scheme_matrix(*l1, *l2, scheme, dt);
        double d = rer(pb, po, stationary(pb)) / static_cast<double>(sites);
        row["dense_pp_rer"] = d;
        dense_pts.emplace_back(dt, d);
        dense_col = num(d);
      }
      if (pp > 0.0) est_pts.emplace_back(dt, pp);
      csv << scheme.name() << ',' << num(dt) << ',' << num(run.acc.estimate()) << ','
          << num(run.acc.standard_error()) << ',' << num(pp) << ',' << num(pp_se) << ','
          << run.acc.count() << ',' << run.acc.excluded() << ',' << dense_col << '\n';
      rows.push_back(row);
      if (pool)
        pool->merge(run.acc);
      else
        pool = run.acc;
    }
    s["rows"] = rows;
    s["fit_estimated"] = est_pts.size() == grid.size()
                             ? try_fit(est_pts, 1)
                             : json{{"error", "non-positive pp_rer estimates"}};
    if (rc.dense_oracle) s["fit_dense"] = try_fit(dense_pts, 1);
    double a = pool->estimate();
    s["pooled_coefficient"] = a;
    s["pooled_coefficient_stderr"] = pool->standard_error();
    s["pooled_pp_coefficient"] = a / static_cast<double>(sites);
    pooled[scheme.name()] = {a / static_cast<double>(sites), scheme.rer_order()};
    schemes.push_back(s);
  }
  rep["schemes"] = schemes;

  std::ostringstream tol;
  tol << csv_header(rc) << "scheme,tolerance,pp_coefficient,order,dt_max\n";
  json tol_rows = json::array();
  for (double t : rc.tolerances) {
    json row = {{"tolerance", t}};
    for (const auto& [name, co] : pooled) {
      std::string dtm;
      if (co.first > 0.0) {
        double v = dt_for_tolerance(co.first, co.second, t);
        row["dt_max_" + name] = v;
        dtm = num(v);
      } else {
        row["dt_max_" + name] = nullptr;
      }
      tol << name << ',' << num(t) << ',' << num(co.first) << ',' << co.second << ',' << dtm
          << '\n';
    }
    if (row.contains("dt_max_lie") && row.contains("dt_max_strang") &&
        row["dt_max_lie"].is_number() && row["dt_max_strang"].is_number())
      row["strang_to_lie_ratio"] =
          row["dt_max_strang"].get<double>() / row["dt_max_lie"].get<double>();
    tol_rows.push_back(row);
  }
  rep["tolerance"] = tol_rows;
  return {{"sweep.csv", csv.str()}, {"tolerance.csv", tol.str()}, {"sweep.json", dump(rep)}};
}

OutputSet compare(const RunConfig& rc, const Runtime& rt) {
  json rep = header(rc);
  std::vector<CompareEntry> entries = rc.compare;
  std::size_t sim_idx = 0;
  json ej = json::array();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& e = entries[i];
    json j = {{"name", e.name}, {"order", e.order}};
    if (!e.coefficient) {
      const auto& scheme = rc.schemes[sim_idx++];
      auto run = run_estimator(rc, scheme, rc.dt, rc.T, rc.burn_in, derived_seed(rc.seed, i, 0),
                               rt, nullptr, nullptr);
      e.coefficient = run.acc.estimate();
      e.stderr_ = run.acc.standard_error();
      j["stderr"] = e.stderr_;
      j["source"] = "simulation";
    } else {
      j["source"] = "literal";
    }
    j["A"] = *e.coefficient;
    if (rc.comm) {
      try {
        j["comm_bound"] = comm_bound(rc.comm->second, rc.comm->first, SchemeSpec::parse(e.name));
      } catch (const ConfigError&) {
        j["comm_bound"] = nullptr;
      }
    }
    ej.push_back(j);
  }
  rep["schemes"] = ej;
  const auto& a = entries[0];
  const auto& b = entries[1];
  json rows = json::array();
  std::vector<double> grid = rc.dt_grid;
  std::sort(grid.begin(), grid.end());
  for (double dt : grid) {
    double v = info_criterion(dt, *a.coefficient, a.order, *b.coefficient, b.order);
    rows.push_back({{"dt", dt},
                    {"criterion", v},
                    {"preferred", v > 0.0 ? b.name : (v < 0.0 ? a.name : "either")}});
  }
  rep["criterion"] = rows;
  auto cross = crossover_dt(*a.coefficient, a.order, *b.coefficient, b.order);
  rep["crossover_dt"] = cross ? json(*cross) : json(nullptr);
  if (rc.comm) rep["comm"] = {{"N", rc.comm->first}, {"m", rc.comm->second}};
  return {{"compare.json", dump(rep)}};
}

OutputSet run_command(const RunConfig& rc, const Runtime& rt) {
  if (rc.command == "analyze-chain") return analyze_chain(rc, rt);
  if (rc.command == "simulate") return simulate_run(rc, rt);
  if (rc.command == "sweep") return sweep(rc, rt);
  if (rc.command == "compare") return compare(rc, rt);
  throw ConfigError("unknown command '" + rc.command + "'");
}

void write_atomic(const std::string& dir, const OutputSet& files) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
  std::vector<std::pair<fs::path, fs::path>> staged;
  auto cleanup = [&] {
    for (auto& [tmp, dst] : staged) fs::remove(tmp, ec);
  };
  try {
    for (const auto& [name, content] : files) {
      fs::path dst = fs::path(dir) / name;
      fs::path tmp = fs::path(dir) / ("." + name + ".tmp." + std::to_string(::getpid()));
      staged.emplace_back(tmp, dst);
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out << content;
      out.close();
      if (!out) throw ConfigError("cannot write '" + tmp.string() + "'");
    }
    for (auto& [tmp, dst] : staged) fs::rename(tmp, dst);
  } catch (...) {
    cleanup();
    throw;
  }
}

}  // namespace splitmc::cli
