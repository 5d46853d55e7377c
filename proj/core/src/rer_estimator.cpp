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

#include "splitmc/rer_estimator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

#include "splitmc/errors.hpp"

namespace splitmc {
namespace {

// Weight of a flip order under the scheme: sum over nondecreasing
// substep assignments with matching groups of prod tau_j^{n_j} / n_j!.
double order_weight(std::span<const Group> seq, const SchemeSpec& scheme) {
  const std::size_t k = seq.size();
  const std::size_t J = scheme.schedule.size();
  std::vector<std::size_t> s(k, 0);
  double total = 0.0;
  while (true) {
    bool ok = true;
    for (std::size_t i = 0; i < k && ok; ++i) ok = scheme.schedule[s[i]].group == seq[i];
    if (ok) {
      double w = 1.0;
      std::vector<int> n(J, 0);
      for (std::size_t i = 0; i < k; ++i) ++n[s[i]];
      for (std::size_t j = 0; j < J; ++j) {
        double tau = scheme.schedule[j].fraction;
        double fact = 1.0;
        for (int r = 2; r <= n[j]; ++r) fact *= r;
        w *= std::pow(tau, n[j]) / fact;
      }
      total += w;
    }
    // Next nondecreasing sequence.
    std::size_t pos = k;
    while (pos > 0 && s[pos - 1] == J - 1) --pos;
    if (pos == 0) break;
    ++s[pos - 1];
    for (std::size_t i = pos; i < k; ++i) s[i] = s[pos - 1];
  }
  return total;
}

struct Coefs {
  double po = 0.0;
  double pb = 0.0;
};

Coefs path_coefficients(const SpinConfiguration& sigma, std::span<const Site> sites,
                        const Decomposition& dec, const ArrheniusRates& params,
                        const SchemeSpec& scheme, std::uint64_t* rate_evals) {
  const std::size_t k = sites.size();
  std::vector<Site> perm(sites.begin(), sites.end());
  std::sort(perm.begin(), perm.end());
  SpinConfiguration scratch = sigma;
  std::vector<Group> seq(k);
  double fact = 1.0;
  for (std::size_t r = 2; r <= k; ++r) fact *= static_cast<double>(r);
  Coefs out;
  std::uint64_t evals = 0;
  do {
    double prod = 1.0;
    for (std::size_t i = 0; i < k; ++i) {
      prod *= arrhenius_rate(perm[i], scratch, params);
      ++evals;
      scratch.flip(perm[i]);
      seq[i] = dec.group_of(perm[i]);
    }
    for (std::size_t i = 0; i < k; ++i) scratch.flip(perm[i]);
    out.po += prod;
    out.pb += prod * order_weight(seq, scheme);
  } while (std::next_permutation(perm.begin(), perm.end()));
  out.po /= fact;
  if (rate_evals != nullptr) *rate_evals += evals;
  return out;
}

void check_tuple(std::span<const Site> sites, const SchemeSpec& scheme) {
  if (sites.size() != static_cast<std::size_t>(scheme.p))
    throw ConfigError("site tuple size must equal the scheme's local order");
  std::vector<Site> s(sites.begin(), sites.end());
  std::sort(s.begin(), s.end());
  if (std::adjacent_find(s.begin(), s.end()) != s.end())
    throw ConfigError("site tuple has repeated sites");
}

}  // namespace

StrangVariant parse_strang_variant(const std::string& name) {
  if (name == "conservative") return StrangVariant::kConservative;
  if (name == "exact") return StrangVariant::kExact;
  throw ConfigError("unknown strang_estimator '" + name + "' (expected conservative or exact)");
}

std::string to_string(StrangVariant v) {
  return v == StrangVariant::kConservative ? "conservative" : "exact";
}

bool admissible_tuple(std::span<const Site> sites, const Decomposition& dec) {
  if (sites.empty()) return false;
  bool mixed = false;
  for (Site s : sites) mixed = mixed || dec.group_of(s) != dec.group_of(sites[0]);
  if (!mixed) return false;
  // Connectivity through bonds inside the tuple.
  std::vector<char> seen(sites.size(), 0);
  std::vector<std::size_t> stack{0};
  seen[0] = 1;
  std::size_t reached = 1;
  while (!stack.empty()) {
    std::size_t i = stack.back();
    stack.pop_back();
    for (std::size_t j = 0; j < sites.size(); ++j)
      if (!seen[j] && dec.shape().adjacent(sites[i], sites[j])) {
        seen[j] = 1;
        ++reached;
        stack.push_back(j);
      }
  }
  return reached == sites.size();
}

double local_commutator(const SpinConfiguration& sigma, std::span<const Site> sites,
                        const Decomposition& dec, const ArrheniusRates& params,
                        const SchemeSpec& scheme, std::uint64_t* rate_evals) {
  check_tuple(sites, scheme);
  if (!admissible_tuple(sites, dec)) return 0.0;
  auto c = path_coefficients(sigma, sites, dec, params, scheme, rate_evals);
  return c.po - c.pb;
}

double local_scheme_coefficient(const SpinConfiguration& sigma, std::span<const Site> sites,
                                const Decomposition& dec, const ArrheniusRates& params,
                                const SchemeSpec& scheme, std::uint64_t* rate_evals) {
  check_tuple(sites, scheme);
  return path_coefficients(sigma, sites, dec, params, scheme, rate_evals).pb;
}

std::optional<double> f_term(double c, double lq, const SchemeSpec& scheme,
                             StrangVariant variant) {
  if (c == 0.0) return 0.0;
  double den = (scheme.kind == SchemeKind::kStrang && variant == StrangVariant::kConservative)
                   ? lq + c
                   : 2.0 * lq + c;
  if (!(den > 0.0)) return std::nullopt;
  double m = c / den;
  if (!(std::abs(m) < 1.0)) return std::nullopt;
  double tail;  // atanh(m) - m
  if (std::abs(m) < 1e-4) {
    double m2 = m * m;
    tail = m * m2 * (1.0 / 3.0 + m2 / 5.0 + m2 * m2 / 7.0);
  } else {
    tail = std::atanh(m) - m;
  }
  return c * m - 2.0 * lq * tail;
}

LocalTerms local_terms(const SpinConfiguration& sigma, std::span<const Site> sites,
                       const Decomposition& dec, const ArrheniusRates& params,
                       const SchemeSpec& scheme, StrangVariant variant, bool prune,
                       std::uint64_t* rate_evals) {
  check_tuple(sites, scheme);
  LocalTerms t;
  if (prune && !admissible_tuple(sites, dec)) return t;
  auto c = path_coefficients(sigma, sites, dec, params, scheme, rate_evals);
  t.c = c.po - c.pb;
  t.lq = c.pb;
  auto f = f_term(t.c, t.lq, scheme, variant);
  t.singular = !f.has_value();
  t.f = f.value_or(0.0);
  return t;
}

RerAccumulator::RerAccumulator(SchemeKind scheme, int order, std::uint64_t batch)
    : scheme_(scheme), order_(order), batch_(batch == 0 ? 1 : batch) {}

void RerAccumulator::close_batch(double mean) {
  ++n_batches_;
  double d = mean - bm_mean_;
  bm_mean_ += d / static_cast<double>(n_batches_);
  bm_m2_ += d * (mean - bm_mean_);
}

void RerAccumulator::add(double sample) {
  sum_ += sample;
  sum_sq_ += sample * sample;
  ++count_;
  fill_sum_ += sample;
  if (++fill_ == batch_) {
    close_batch(fill_sum_ / static_cast<double>(batch_));
    fill_sum_ = 0.0;
    fill_ = 0;
  }
}

void RerAccumulator::merge(const RerAccumulator& o) {
  if (o.scheme_ != scheme_ || o.order_ != order_ || o.batch_ != batch_)
    throw ConfigError("cannot merge accumulators of different schemes");
  sum_ += o.sum_;
  sum_sq_ += o.sum_sq_;
  count_ += o.count_;
  excluded_ += o.excluded_;
  if (o.n_batches_ > 0) {
    // Chan et al. pairwise combination of batch-mean moments.
    double na = static_cast<double>(n_batches_), nb = static_cast<double>(o.n_batches_);
    double d = o.bm_mean_ - bm_mean_;
    double n = na + nb;
    bm_mean_ += d * nb / n;
    bm_m2_ += o.bm_m2_ + d * d * na * nb / n;
    n_batches_ += o.n_batches_;
  }
  fill_sum_ += o.fill_sum_;
  fill_ += o.fill_;
  if (fill_ >= batch_) {
    close_batch(fill_sum_ / static_cast<double>(fill_));
    fill_sum_ = 0.0;
    fill_ = 0;
  }
}

double RerAccumulator::estimate() const {
  if (count_ == 0) throw AnalysisError("empty accumulator");
  return sum_ / static_cast<double>(count_);
}

double RerAccumulator::standard_error() const {
  if (count_ == 0) throw AnalysisError("empty accumulator");
  if (n_batches_ >= 2) {
    double var = bm_m2_ / static_cast<double>(n_batches_ - 1);
    return std::sqrt(std::max(var, 0.0) / static_cast<double>(n_batches_));
  }
  if (count_ < 2) return 0.0;
  double n = static_cast<double>(count_);
  double mean = sum_ / n;
  double var = (sum_sq_ - n * mean * mean) / (n - 1.0);
  return std::sqrt(std::max(var, 0.0) / n);
}

CoefficientEstimator::CoefficientEstimator(const Decomposition& dec,
                                           const ArrheniusRates& params,
                                           const SchemeSpec& scheme, StrangVariant variant,
                                           bool prune)
    : dec_(&dec), params_(params), scheme_(scheme), variant_(variant), prune_(prune) {
  params_.validate();
  scheme_.validate();
  const auto& shape = dec.shape();
  const auto n = static_cast<Site>(shape.site_count());
  if (!prune_) {
    // Every k-subset; used to check that pruning loses nothing.
    std::vector<Site> t(static_cast<std::size_t>(scheme.p));
    auto rec = [&](auto&& self, std::size_t pos, Site from) -> void {
      if (pos == t.size()) {
        tuples_.push_back(t);
        return;
      }
      for (Site s = from; s < n; ++s) {
        t[pos] = s;
        self(self, pos + 1, s + 1);
      }
    };
    rec(rec, 0, 0);
    return;
  }
  if (scheme.kind == SchemeKind::kLie) {
    for (auto [x, y] : shape.edges())
      if (dec.group_of(x) != dec.group_of(y)) tuples_.push_back({x, y});
    return;
  }
  std::set<std::array<Site, 3>> seen;
  for (Site y = 0; y < n; ++y) {
    auto nb = shape.neighbors(y);
    for (std::size_t i = 0; i < nb.size(); ++i)
      for (std::size_t j = i + 1; j < nb.size(); ++j) {
        std::array<Site, 3> t{nb[i], y, nb[j]};
        std::sort(t.begin(), t.end());
        if (admissible_tuple(t, dec) && seen.insert(t).second)
          tuples_.push_back({t[0], t[1], t[2]});
      }
  }
}

CoefficientEstimator::Sample CoefficientEstimator::evaluate(const SpinConfiguration& sigma) const {
  Sample s;
  for (const auto& t : tuples_) {
    auto lt = local_terms(sigma, t, *dec_, params_, scheme_, variant_, prune_, &s.rate_evals);
    if (lt.singular)
      ++s.singular;
    else
      s.value += lt.f;
  }
  return s;
}

RerAccumulator CoefficientEstimator::make_accumulator(std::uint64_t batch) const {
  return RerAccumulator(scheme_.kind, scheme_.rer_order(), batch);
}

void CoefficientEstimator::accumulate(RerAccumulator& acc, const SpinConfiguration& sigma) const {
  auto s = evaluate(sigma);
  if (s.singular > 0) {
    acc.flag_excluded(1);
    return;
  }
  acc.add(s.value);
}

void accumulate(RerAccumulator& acc, const SpinConfiguration& sigma,
                const CoefficientEstimator& est) {
  est.accumulate(acc, sigma);
}

double exact_coefficient(const CoefficientEstimator& est, const Decomposition& dec,
                         const ArrheniusRates& params) {
  Eigen::VectorXd pi = arrhenius_stationary(dec.shape(), params);
  double total = 0.0;
  for (Eigen::Index s = 0; s < pi.size(); ++s) {
    auto sigma = SpinConfiguration::from_index(dec.shape_ptr(), static_cast<std::uint64_t>(s));
    auto v = est.evaluate(sigma);
    if (v.singular > 0) throw AnalysisError("singular local term in exact enumeration");
    total += pi(s) * v.value;
  }
  return total;
}

double pp_rer(const RerAccumulator& acc, std::size_t n_sites, double dt) {
  if (n_sites == 0) throw ConfigError("pp_rer needs a positive site count");
  return acc.estimate() * std::pow(dt, acc.order()) / static_cast<double>(n_sites);
}

double dt_for_tolerance(double coeff, int order, double tol) {
  if (!(coeff > 0.0) || !(tol > 0.0) || order < 1)
    throw ConfigError("dt_for_tolerance needs coeff > 0, tol > 0, order >= 1");
  return std::min(1.0, std::pow(tol / coeff, 1.0 / order));
}

double info_criterion(double dt, double a1, int p1, double a2, int p2) {
  if (!(dt > 0.0 && dt <= 1.0)) throw ConfigError("info_criterion dt must lie in (0,1]");
  return a1 * std::pow(dt, p1) - a2 * std::pow(dt, p2);
}

std::optional<double> crossover_dt(double a1, int p1, double a2, int p2) {
  if (p1 == p2 || !(a1 > 0.0) || !(a2 > 0.0)) return std::nullopt;
  return std::pow(a1 / a2, 1.0 / (p2 - p1));
}

}  // namespace splitmc
