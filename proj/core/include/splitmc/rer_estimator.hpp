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
#include <span>
#include <vector>

#include "splitmc/core_model.hpp"
#include "splitmc/lattice_kmc.hpp"

namespace splitmc {

// Strang denominators. Conservative uses the exact-chain coefficient and
// never underestimates; exact reproduces the true leading coefficient.
enum class StrangVariant { kConservative, kExact };

StrangVariant parse_strang_variant(const std::string& name);
std::string to_string(StrangVariant v);

struct LocalTerms {
  double c = 0.0;   // dt^p coefficient of (Po - Pb)(sigma, sigma^S)
  double lq = 0.0;  // dt^p coefficient of Pb(sigma, sigma^S)
  double f = 0.0;
  bool singular = false;
};

// Tuples whose commutator can be nonzero: sites span both groups and are
// linked through nearest-neighbour bonds.
bool admissible_tuple(std::span<const Site> sites, const Decomposition& dec);

// Rate evaluations performed by the local routines are added to *rate_evals.
double local_commutator(const SpinConfiguration& sigma, std::span<const Site> sites,
                        const Decomposition& dec, const ArrheniusRates& params,
                        const SchemeSpec& scheme, std::uint64_t* rate_evals = nullptr);

double local_scheme_coefficient(const SpinConfiguration& sigma, std::span<const Site> sites,
                                const Decomposition& dec, const ArrheniusRates& params,
                                const SchemeSpec& scheme, std::uint64_t* rate_evals = nullptr);

// nullopt when the M-ratio is singular for c != 0.
std::optional<double> f_term(double c, double lq, const SchemeSpec& scheme,
                             StrangVariant variant = StrangVariant::kConservative);

LocalTerms local_terms(const SpinConfiguration& sigma, std::span<const Site> sites,
                       const Decomposition& dec, const ArrheniusRates& params,
                       const SchemeSpec& scheme, StrangVariant variant,
                       bool prune = true, std::uint64_t* rate_evals = nullptr);

// Mergeable running estimate of the leading RER coefficient. Standard
// errors use non-overlapping batch means.
class RerAccumulator {
 public:
  RerAccumulator() = default;
  RerAccumulator(SchemeKind scheme, int order, std::uint64_t batch = 100);

  void add(double sample);
  void flag_excluded(std::uint64_t n = 1) { excluded_ += n; }
  void merge(const RerAccumulator& other);

  SchemeKind scheme() const { return scheme_; }
  int order() const { return order_; }
  std::uint64_t count() const { return count_; }
  std::uint64_t excluded() const { return excluded_; }
  std::uint64_t batches() const { return n_batches_; }
  double sum() const { return sum_; }
  double sum_sq() const { return sum_sq_; }

  double estimate() const;
  double standard_error() const;

 private:
  void close_batch(double mean);

  SchemeKind scheme_ = SchemeKind::kLie;
  int order_ = 1;
  std::uint64_t batch_ = 100;
  double sum_ = 0.0;
  double sum_sq_ = 0.0;
  std::uint64_t count_ = 0;
  std::uint64_t excluded_ = 0;
  double fill_sum_ = 0.0;
  std::uint64_t fill_ = 0;
  std::uint64_t n_batches_ = 0;
  double bm_mean_ = 0.0;
  double bm_m2_ = 0.0;
};

// Sums f_term over every admissible tuple of a configuration.
class CoefficientEstimator {
 public:
  CoefficientEstimator(const Decomposition& dec, const ArrheniusRates& params,
                       const SchemeSpec& scheme,
                       StrangVariant variant = StrangVariant::kConservative,
                       bool prune = true);

  const std::vector<std::vector<Site>>& tuples() const { return tuples_; }
  const SchemeSpec& scheme() const { return scheme_; }

  struct Sample {
    double value = 0.0;
    std::uint64_t singular = 0;
    std::uint64_t rate_evals = 0;
  };
  Sample evaluate(const SpinConfiguration& sigma) const;

  RerAccumulator make_accumulator(std::uint64_t batch = 100) const;
  void accumulate(RerAccumulator& acc, const SpinConfiguration& sigma) const;

 private:
  const Decomposition* dec_;
  ArrheniusRates params_;
  SchemeSpec scheme_;
  StrangVariant variant_;
  bool prune_;
  std::vector<std::vector<Site>> tuples_;
};

void accumulate(RerAccumulator& acc, const SpinConfiguration& sigma,
                const CoefficientEstimator& est);

// Stationary expectation of the estimator by full enumeration against the
// Gibbs weights; a noise-free reference for small lattices.
double exact_coefficient(const CoefficientEstimator& est, const Decomposition& dec,
                         const ArrheniusRates& params);

double pp_rer(const RerAccumulator& acc, std::size_t n_sites, double dt);
double dt_for_tolerance(double coeff, int order, double tol);
double info_criterion(double dt, double a1, int p1, double a2, int p2);
// Step where a1 dt^p1 = a2 dt^p2; nullopt if the curves never cross.
std::optional<double> crossover_dt(double a1, int p1, double a2, int p2);

}  // namespace splitmc
