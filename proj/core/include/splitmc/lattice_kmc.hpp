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

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

#include "splitmc/core_model.hpp"
#include "splitmc/rng.hpp"

namespace splitmc {

// Checkerboard partition into m (1D) or m*m (2D) square blocks.
//
// Same-group blocks that touch across the periodic wrap (odd m) are merged
// into one execution unit so every sub-step stays an exact sample of the
// restricted generator.
class Decomposition {
 public:
  struct Unit {
    Group group;
    std::vector<int> sublattices;
    std::vector<Site> sites;  // sorted
  };

  Decomposition(ShapePtr shape, int m, int range = 1);

  const LatticeShape& shape() const { return *shape_; }
  const ShapePtr& shape_ptr() const { return shape_; }
  int m() const { return m_; }
  int width() const { return width_; }
  std::size_t sublattice_count() const { return group_.size(); }

  int sublattice_of(Site x) const { return assignment_[static_cast<std::size_t>(x)]; }
  Group group_of_sublattice(int s) const { return group_[static_cast<std::size_t>(s)]; }
  Group group_of(Site x) const { return group_of_sublattice(sublattice_of(x)); }
  const std::vector<Group>& site_groups() const { return site_groups_; }

  const std::vector<Site>& sublattice_sites(int s) const {
    return members_[static_cast<std::size_t>(s)];
  }
  // Sites with part of their neighbourhood outside their own block.
  const std::vector<Site>& boundary_sites(int s) const {
    return boundary_[static_cast<std::size_t>(s)];
  }
  // 1 for sites with a neighbour in the other group.
  const std::vector<std::uint8_t>& cross_group() const { return cross_; }

  const std::vector<Unit>& units() const { return units_; }
  const std::vector<std::size_t>& units_of(Group g) const {
    return g == Group::kFirst ? units_g1_ : units_g2_;
  }

 private:
  ShapePtr shape_;
  int m_;
  int width_;
  std::vector<int> assignment_;
  std::vector<Group> group_;
  std::vector<Group> site_groups_;
  std::vector<std::vector<Site>> members_;
  std::vector<std::vector<Site>> boundary_;
  std::vector<std::uint8_t> cross_;
  std::vector<Unit> units_;
  std::vector<std::size_t> units_g1_, units_g2_;
};

Decomposition checkerboard(ShapePtr shape, int m);

struct SimClock {
  double global_time = 0.0;
  std::uint64_t step_count = 0;
  std::vector<double> local_clocks;
};

struct CommStats {
  std::uint64_t steps = 0;
  std::uint64_t boundary_rate_evals = 0;
  std::uint64_t bulk_rate_evals = 0;
  std::uint64_t sync_events = 0;
  std::uint64_t events = 0;
  double comm_seconds = 0.0;
  double total_seconds = 0.0;

  double wall_fraction_comm() const {
    return total_seconds > 0.0 ? comm_seconds / total_seconds : 0.0;
  }
  // Boundary evaluations per step per lattice site.
  double normalized_boundary_evals(std::size_t sites) const;
  CommStats& operator+=(const CommStats& o);
};

struct EventRecord {
  std::uint64_t step = 0;
  int sublattice = -1;
  Site site = 0;
  int new_spin = 0;
  double local_time = 0.0;
};
using EventLog = std::vector<EventRecord>;

struct SsaResult {
  std::uint64_t events = 0;
  std::uint64_t rate_evals = 0;
  std::uint64_t boundary_evals = 0;
  double local_time = 0.0;
};

// Rejection-free SSA restricted to `active` (sorted, distinct). Neighbours
// outside the active set are read as-is and must not change meanwhile.
// Events past the horizon are discarded. Initial rate evaluations at sites
// flagged in `boundary_flags` are reported as boundary evaluations.
SsaResult ssa_run(SpinConfiguration& sigma, std::span<const Site> active,
                  const ArrheniusRates& params, double horizon, CounterRng& rng,
                  EventLog* log = nullptr, std::span<const std::uint8_t> boundary_flags = {});

// Fixed-size worker pool. parallel_for runs inline when threads == 1.
class Executor {
 public:
  explicit Executor(unsigned threads = 1);
  ~Executor();
  Executor(const Executor&) = delete;
  Executor& operator=(const Executor&) = delete;

  unsigned threads() const { return threads_; }
  void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

 private:
  void worker();
  void drain();

  unsigned threads_;
  std::vector<std::thread> pool_;
  std::mutex mu_;
  std::condition_variable wake_, done_;
  const std::function<void(std::size_t)>* job_ = nullptr;
  std::size_t n_ = 0, next_ = 0, finished_ = 0;
  std::uint64_t generation_ = 0;
  bool stop_ = false;
};

struct StepContext {
  std::uint64_t seed = 0;
  std::uint64_t step_index = 0;
  Executor* executor = nullptr;  // null: sequential
  EventLog* log = nullptr;
  bool timing = false;
};

CommStats scheme_step(SpinConfiguration& sigma, const Decomposition& dec,
                      const SchemeSpec& scheme, const ArrheniusRates& params, double dt,
                      const StepContext& ctx, SimClock* clock = nullptr);

using SampleHook = std::function<void(const SpinConfiguration&, const SimClock&)>;

struct SimulationResult {
  SpinConfiguration final_state;
  SimClock clock;
  CommStats stats;
  std::uint64_t steps = 0;
  std::uint64_t samples = 0;
};

struct SimulationOptions {
  double dt = 0.1;
  double T = 1.0;
  double burn_in = 0.0;
  std::uint64_t seed = 0;
  Executor* executor = nullptr;
  EventLog* log = nullptr;
  bool timing = false;
};

SimulationResult simulate(SpinConfiguration initial, const Decomposition& dec,
                          const SchemeSpec& scheme, const ArrheniusRates& params,
                          const SimulationOptions& opt, std::span<const SampleHook> hooks);

// Upper bound on normalized boundary traffic per step.
double comm_bound(int m, int N, const SchemeSpec& scheme);

}  // namespace splitmc
