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

#include "splitmc/lattice_kmc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "splitmc/errors.hpp"

namespace splitmc {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int find_root(std::vector<int>& parent, int v) {
  while (parent[static_cast<std::size_t>(v)] != v) {
    parent[static_cast<std::size_t>(v)] =
        parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(v)])];
    v = parent[static_cast<std::size_t>(v)];
  }
  return v;
}

}  // namespace

Decomposition::Decomposition(ShapePtr shape, int m, int range)
    : shape_(std::move(shape)), m_(m), width_(0) {
  if (m < 1) throw ConfigError("decomposition needs m >= 1");
  const int dim = shape_->dimension();
  for (int a = 0; a < dim; ++a) {
    int n = shape_->extent(a);
    if (n % m != 0) {
      std::ostringstream os;
      os << "lattice extent " << n << " is not divisible by m = " << m;
      throw ConfigError(os.str());
    }
  }
  width_ = shape_->extent(0) / m;
  for (int a = 0; a < dim; ++a)
    if (m > 1 && shape_->extent(a) / m <= range) {
      std::ostringstream os;
      os << "sublattice width " << shape_->extent(a) / m
         << " is too small for interaction range " << range;
      throw ConfigError(os.str());
    }

  const std::size_t sites = shape_->site_count();
  const std::size_t blocks = dim == 1 ? static_cast<std::size_t>(m)
                                      : static_cast<std::size_t>(m) * static_cast<std::size_t>(m);
  assignment_.resize(sites);
  group_.resize(blocks);
  members_.assign(blocks, {});
  boundary_.assign(blocks, {});
  for (std::size_t b = 0; b < blocks; ++b) {
    int parity = dim == 1 ? static_cast<int>(b) : static_cast<int>(b) / m + static_cast<int>(b) % m;
    group_[b] = parity % 2 == 0 ? Group::kFirst : Group::kSecond;
  }
  for (std::size_t x = 0; x < sites; ++x) {
    auto c = shape_->coords(static_cast<Site>(x));
    int b;
    if (dim == 1) {
      b = c[0] / (shape_->extent(0) / m);
    } else {
      b = (c[0] / (shape_->extent(0) / m)) * m + c[1] / (shape_->extent(1) / m);
    }
    assignment_[x] = b;
    members_[static_cast<std::size_t>(b)].push_back(static_cast<Site>(x));
  }
  site_groups_.resize(sites);
  cross_.assign(sites, 0);
  for (std::size_t x = 0; x < sites; ++x) {
    Site sx = static_cast<Site>(x);
    site_groups_[x] = group_of(sx);
    bool boundary = false;
    for (Site y : shape_->neighbors(sx)) {
      if (sublattice_of(y) != sublattice_of(sx)) boundary = true;
      if (group_of(y) != group_of(sx)) cross_[x] = 1;
    }
    if (boundary) boundary_[static_cast<std::size_t>(assignment_[x])].push_back(sx);
  }

  // Merge same-group blocks that touch (only across the wrap for odd m).
  std::vector<int> parent(blocks);
  std::iota(parent.begin(), parent.end(), 0);
  for (auto [x, y] : shape_->edges()) {
    int a = sublattice_of(x), b = sublattice_of(y);
    if (a != b && group_of_sublattice(a) == group_of_sublattice(b)) {
      int ra = find_root(parent, a), rb = find_root(parent, b);
      if (ra != rb) parent[static_cast<std::size_t>(std::max(ra, rb))] = std::min(ra, rb);
    }
  }
  std::vector<int> unit_of(blocks, -1);
  for (std::size_t b = 0; b < blocks; ++b) {
    int r = find_root(parent, static_cast<int>(b));
    if (unit_of[static_cast<std::size_t>(r)] < 0) {
      unit_of[static_cast<std::size_t>(r)] = static_cast<int>(units_.size());
      units_.push_back({group_[b], {}, {}});
    }
    auto& u = units_[static_cast<std::size_t>(unit_of[static_cast<std::size_t>(r)])];
    u.sublattices.push_back(static_cast<int>(b));
    u.sites.insert(u.sites.end(), members_[b].begin(), members_[b].end());
  }
  for (std::size_t i = 0; i < units_.size(); ++i) {
    std::sort(units_[i].sites.begin(), units_[i].sites.end());
    (units_[i].group == Group::kFirst ? units_g1_ : units_g2_).push_back(i);
  }
}

Decomposition checkerboard(ShapePtr shape, int m) { return Decomposition(std::move(shape), m); }

double CommStats::normalized_boundary_evals(std::size_t sites) const {
  if (steps == 0 || sites == 0) return 0.0;
  return static_cast<double>(boundary_rate_evals) /
         (static_cast<double>(steps) * static_cast<double>(sites));
}

CommStats& CommStats::operator+=(const CommStats& o) {
  steps += o.steps;
  boundary_rate_evals += o.boundary_rate_evals;
  bulk_rate_evals += o.bulk_rate_evals;
  sync_events += o.sync_events;
  events += o.events;
  comm_seconds += o.comm_seconds;
  total_seconds += o.total_seconds;
  return *this;
}

SsaResult ssa_run(SpinConfiguration& sigma, std::span<const Site> active,
                  const ArrheniusRates& params, double horizon, CounterRng& rng,
                  EventLog* log, std::span<const std::uint8_t> boundary_flags) {
  SsaResult res;
  if (!(horizon >= 0.0)) throw ConfigError("ssa horizon must be >= 0");
  const std::size_t n = active.size();
  std::vector<double> rates(n);
  for (std::size_t i = 0; i < n; ++i) {
    rates[i] = arrhenius_rate(active[i], sigma, params);
    ++res.rate_evals;
    if (!boundary_flags.empty() && boundary_flags[static_cast<std::size_t>(active[i])])
      ++res.boundary_evals;
  }
  const auto& shape = sigma.shape();
  double t = 0.0;
  while (true) {
    double total = 0.0;
    for (double r : rates) total += r;
    if (!(total > 0.0)) break;
    double wait = rng.exponential(total);
    if (t + wait > horizon) break;
    t += wait;
    double target = rng.uniform() * total;
    std::size_t k = 0;
    double acc = rates[0];
    while (acc <= target && k + 1 < n) acc += rates[++k];
    // Never pick a zero-rate channel because of rounding at the tail.
    while (rates[k] == 0.0 && k > 0) --k;
    Site x = active[k];
    sigma.flip(x);
    ++res.events;
    if (log != nullptr) log->push_back({0, -1, x, sigma[x], t});
    rates[k] = arrhenius_rate(x, sigma, params);
    ++res.rate_evals;
    for (Site y : shape.neighbors(x)) {
      auto it = std::lower_bound(active.begin(), active.end(), y);
      if (it != active.end() && *it == y) {
        rates[static_cast<std::size_t>(it - active.begin())] = arrhenius_rate(y, sigma, params);
        ++res.rate_evals;
      }
    }
  }
  res.local_time = horizon;
  return res;
}

Executor::Executor(unsigned threads) : threads_(threads == 0 ? 1 : threads) {
  for (unsigned i = 1; i < threads_; ++i) pool_.emplace_back([this] { worker(); });
}

Executor::~Executor() {
  {
    std::lock_guard<std::mutex> lk(mu_);
    stop_ = true;
  }
  wake_.notify_all();
  for (auto& t : pool_) t.join();
}

void Executor::drain() {
  while (true) {
    std::size_t i;
    const std::function<void(std::size_t)>* fn;
    {
      std::lock_guard<std::mutex> lk(mu_);
      if (next_ >= n_) return;
      i = next_++;
      fn = job_;
    }
    (*fn)(i);
    {
      std::lock_guard<std::mutex> lk(mu_);
      if (++finished_ == n_) done_.notify_all();
    }
  }
}

void Executor::worker() {
  std::uint64_t seen = 0;
  while (true) {
    {
      std::unique_lock<std::mutex> lk(mu_);
      wake_.wait(lk, [&] { return stop_ || generation_ != seen; });
      if (stop_) return;
      seen = generation_;
    }
    drain();
  }
}

void Executor::parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  if (threads_ == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  {
    std::lock_guard<std::mutex> lk(mu_);
    job_ = &fn;
    n_ = n;
    next_ = 0;
    finished_ = 0;
    ++generation_;
  }
  wake_.notify_all();
  drain();
  std::unique_lock<std::mutex> lk(mu_);
  done_.wait(lk, [&] { return finished_ == n_; });
  job_ = nullptr;
}

CommStats scheme_step(SpinConfiguration& sigma, const Decomposition& dec,
                      const SchemeSpec& scheme, const ArrheniusRates& params, double dt,
                      const StepContext& ctx, SimClock* clock) {
  if (!(dt > 0.0 && dt <= 1.0)) throw ConfigError("scheme step dt must lie in (0,1]");
  if (!(sigma.shape() == dec.shape())) throw ConfigError("configuration and decomposition differ");
  CommStats st;
  st.steps = 1;
  auto t_step = Clock::now();
  const auto& units = dec.units();
  const bool logging = ctx.log != nullptr;
  for (std::size_t j = 0; j < scheme.schedule.size(); ++j) {
    const auto& sub = scheme.schedule[j];
    const auto& ids = dec.units_of(sub.group);
    const double horizon = sub.fraction * dt;
    std::vector<SsaResult> results(ids.size());
    std::vector<EventLog> logs(logging ? ids.size() : 0);
    std::vector<double> busy(ids.size(), 0.0);
    std::span<const std::uint8_t> flags;
    if (j > 0) flags = dec.cross_group();
    auto run = [&](std::size_t k) {
      auto t0 = ctx.timing ? Clock::now() : Clock::time_point{};
      std::size_t u = ids[k];
      CounterRng rng(ctx.seed, static_cast<std::uint64_t>(units[u].sublattices.front()),
                     ctx.step_index, j);
      results[k] = ssa_run(sigma, units[u].sites, params, horizon, rng,
                           logging ? &logs[k] : nullptr, flags);
      if (ctx.timing) busy[k] = seconds_since(t0);
    };
    auto t_sub = Clock::now();
    if (ctx.executor != nullptr) {
      ctx.executor->parallel_for(ids.size(), run);
    } else {
      for (std::size_t k = 0; k < ids.size(); ++k) run(k);
    }
    if (ctx.timing && j > 0) {
      // Barrier idle time of this exchange phase.
      double wall = seconds_since(t_sub);
      double longest = busy.empty() ? 0.0 : *std::max_element(busy.begin(), busy.end());
      st.comm_seconds += std::max(0.0, wall - longest);
    }
    for (std::size_t k = 0; k < ids.size(); ++k) {
      st.boundary_rate_evals += results[k].boundary_evals;
      st.bulk_rate_evals += results[k].rate_evals - results[k].boundary_evals;
      st.events += results[k].events;
      if (logging)
        for (auto rec : logs[k]) {
          rec.step = ctx.step_index;
          rec.sublattice = dec.sublattice_of(rec.site);
          ctx.log->push_back(rec);
        }
    }
    if (j + 1 < scheme.schedule.size()) ++st.sync_events;
  }
  if (ctx.timing) st.total_seconds = seconds_since(t_step);
  if (clock != nullptr) {
    clock->global_time += dt;
    ++clock->step_count;
    clock->local_clocks.assign(dec.sublattice_count(), clock->global_time);
  }
  return st;
}

SimulationResult simulate(SpinConfiguration initial, const Decomposition& dec,
                          const SchemeSpec& scheme, const ArrheniusRates& params,
                          const SimulationOptions& opt, std::span<const SampleHook> hooks) {
  params.validate();
  scheme.validate();
  if (!(opt.dt > 0.0 && opt.dt <= 1.0)) throw ConfigError("dt must lie in (0,1]");
  if (!(opt.burn_in >= 0.0) || !(opt.T >= opt.burn_in))
    throw ConfigError("need T >= burn_in >= 0");
  const double steps_f = opt.T / opt.dt;
  const auto steps = static_cast<std::uint64_t>(std::llround(steps_f));
  if (std::abs(steps_f - static_cast<double>(steps)) > 1e-9 * std::max(1.0, steps_f))
    throw ConfigError("T must be an integer multiple of dt");
  const auto burn = static_cast<std::uint64_t>(std::ceil(opt.burn_in / opt.dt - 1e-9));

  SimulationResult res{std::move(initial), {}, {}, 0, 0};
  res.clock.local_clocks.assign(dec.sublattice_count(), 0.0);
  for (std::uint64_t k = 0; k < steps; ++k) {
    StepContext ctx{opt.seed, k, opt.executor, opt.log, opt.timing};
    res.stats += scheme_step(res.final_state, dec, scheme, params, opt.dt, ctx, &res.clock);
    ++res.steps;
    if (k + 1 > burn) {
      for (const auto& h : hooks) h(res.final_state, res.clock);
      ++res.samples;
    }
  }
  return res;
}

double comm_bound(int m, int N, const SchemeSpec& scheme) {
  if (m < 1 || N < 1 || m > N) throw ConfigError("comm_bound needs 1 <= m <= N");
  double k = scheme.kind == SchemeKind::kLie ? 2.0 : 6.0;
  return k * (m + 1) / static_cast<double>(N);
}

}  // namespace splitmc
