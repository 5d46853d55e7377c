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

#include "splitmc/core_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

#include "splitmc/errors.hpp"

namespace splitmc {

std::string to_string(Group g) { return g == Group::kFirst ? "G1" : "G2"; }

LatticeShape::LatticeShape(std::vector<int> dims) : dims_(std::move(dims)) {
  if (dims_.empty() || dims_.size() > 2)
    throw ConfigError("lattice must be 1D or 2D");
  sites_ = 1;
  for (int d : dims_) {
    if (d < 1) throw ConfigError("lattice extent must be positive");
    sites_ *= static_cast<std::size_t>(d);
  }
  offsets_.assign(sites_ + 1, 0);
  std::vector<Site> nb;
  for (std::size_t x = 0; x < sites_; ++x) {
    nb.clear();
    auto c = coords(static_cast<Site>(x));
    for (int axis = 0; axis < dimension(); ++axis) {
      for (int dir : {-1, 1}) {
        std::vector<int> s(dims_.size(), 0);
        s[static_cast<std::size_t>(axis)] = dir;
        Site y = translate(static_cast<Site>(x), s);
        if (y != static_cast<Site>(x) && std::find(nb.begin(), nb.end(), y) == nb.end())
          nb.push_back(y);
      }
    }
    std::sort(nb.begin(), nb.end());
    table_.insert(table_.end(), nb.begin(), nb.end());
    offsets_[x + 1] = table_.size();
  }
}

bool LatticeShape::adjacent(Site x, Site y) const {
  auto nb = neighbors(x);
  return std::binary_search(nb.begin(), nb.end(), y);
}

std::vector<int> LatticeShape::coords(Site x) const {
  if (dims_.size() == 1) return {static_cast<int>(x)};
  return {static_cast<int>(x) / dims_[1], static_cast<int>(x) % dims_[1]};
}

Site LatticeShape::site_at(std::span<const int> c) const {
  auto wrap = [](int v, int n) { return ((v % n) + n) % n; };
  if (dims_.size() == 1) return static_cast<Site>(wrap(c[0], dims_[0]));
  return static_cast<Site>(wrap(c[0], dims_[0]) * dims_[1] + wrap(c[1], dims_[1]));
}

Site LatticeShape::translate(Site x, std::span<const int> shift) const {
  auto c = coords(x);
  for (std::size_t i = 0; i < c.size(); ++i) c[i] += shift[i];
  return site_at(c);
}

std::vector<std::pair<Site, Site>> LatticeShape::edges() const {
  std::vector<std::pair<Site, Site>> out;
  for (std::size_t x = 0; x < sites_; ++x)
    for (Site y : neighbors(static_cast<Site>(x)))
      if (static_cast<Site>(x) < y) out.emplace_back(static_cast<Site>(x), y);
  return out;
}

ShapePtr make_shape(std::vector<int> dims) {
  return std::make_shared<const LatticeShape>(std::move(dims));
}

SpinConfiguration::SpinConfiguration(ShapePtr shape)
    : shape_(std::move(shape)), spins_(shape_->site_count(), 0) {}

SpinConfiguration::SpinConfiguration(ShapePtr shape, std::vector<std::uint8_t> spins)
    : shape_(std::move(shape)), spins_(std::move(spins)) {
  if (spins_.size() != shape_->site_count())
    throw ConfigError("spin vector length does not match lattice");
  for (auto s : spins_)
    if (s > 1) throw ConfigError("spin values must be 0 or 1");
}

SpinConfiguration SpinConfiguration::from_index(ShapePtr shape, std::uint64_t index) {
  SpinConfiguration c(std::move(shape));
  if (c.size() > 64) throw ConfigError("lattice too large for packed state index");
  for (std::size_t x = 0; x < c.size(); ++x) c.spins_[x] = (index >> x) & 1U;
  return c;
}

std::uint64_t SpinConfiguration::index() const {
  if (spins_.size() > 64) throw ConfigError("lattice too large for packed state index");
  std::uint64_t v = 0;
  for (std::size_t x = 0; x < spins_.size(); ++x)
    v |= static_cast<std::uint64_t>(spins_[x]) << x;
  return v;
}

void SpinConfiguration::set(Site x, int v) {
  if (v != 0 && v != 1) throw ConfigError("spin values must be 0 or 1");
  spins_[static_cast<std::size_t>(x)] = static_cast<std::uint8_t>(v);
}

SpinConfiguration SpinConfiguration::flipped(Site x) const {
  SpinConfiguration c = *this;
  c.flip(x);
  return c;
}

int SpinConfiguration::occupied_neighbors(Site x) const {
  int n = 0;
  for (Site y : shape_->neighbors(x)) n += spins_[static_cast<std::size_t>(y)];
  return n;
}

std::size_t SpinConfiguration::occupied() const {
  return static_cast<std::size_t>(std::count(spins_.begin(), spins_.end(), 1));
}

double SpinConfiguration::coverage() const {
  return static_cast<double>(occupied()) / static_cast<double>(spins_.size());
}

void ArrheniusRates::validate() const {
  auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(c1) || !finite(c2) || !finite(beta) || !finite(J0) || !finite(h))
    throw ConfigError("Arrhenius parameters must be finite");
  if (c1 < 0.0 || c2 < 0.0) throw ConfigError("c1 and c2 must be non-negative");
  if (beta < 0.0) throw ConfigError("beta must be non-negative");
}

double arrhenius_rate(Site x, const SpinConfiguration& sigma, const ArrheniusRates& p) {
  if (sigma[x] == 0) return p.c1;
  double u = p.J0 * sigma.occupied_neighbors(x) + p.h;
  return p.c2 * std::exp(-p.beta * u);
}

double total_rate(const SpinConfiguration& sigma, const ArrheniusRates& params) {
  double s = 0.0;
  for (std::size_t x = 0; x < sigma.size(); ++x)
    s += arrhenius_rate(static_cast<Site>(x), sigma, params);
  return s;
}

DenseGenerator::DenseGenerator(Eigen::MatrixXd rates) : q_(std::move(rates)) {
  if (q_.rows() != q_.cols()) throw ConfigError("generator must be square");
  for (Eigen::Index i = 0; i < q_.rows(); ++i) {
    double scale = 0.0;
    for (Eigen::Index j = 0; j < q_.cols(); ++j) {
      if (!std::isfinite(q_(i, j))) throw ConfigError("generator entries must be finite");
      if (i != j && q_(i, j) < 0.0) {
        std::ostringstream os;
        os << "negative off-diagonal rate at (" << i << "," << j << ")";
        throw ConfigError(os.str());
      }
      scale = std::max(scale, std::abs(q_(i, j)));
    }
    if (std::abs(q_.row(i).sum()) > 1e-12 * std::max(1.0, scale)) {
      std::ostringstream os;
      os << "generator row " << i << " does not sum to zero";
      throw ConfigError(os.str());
    }
  }
}

DenseGenerator DenseGenerator::from_offdiagonal(const Eigen::MatrixXd& rates) {
  Eigen::MatrixXd q = rates;
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    q(i, i) = 0.0;
    q(i, i) = -q.row(i).sum();
  }
  return DenseGenerator(std::move(q));
}

DenseGenerator DenseGenerator::zero(std::size_t n) {
  auto k = static_cast<Eigen::Index>(n);
  return DenseGenerator(Eigen::MatrixXd::Zero(k, k));
}

double total_rate(std::size_t state, const DenseGenerator& gen) {
  return -gen.rate(state, state);
}

PairMask PairMask::all(std::size_t n) {
  PairMask m(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) m.set(i, j);
  return m;
}

PairMask PairMask::from_pairs(std::size_t n,
                              std::span<const std::pair<std::size_t, std::size_t>> pairs) {
  PairMask m(n);
  for (auto [i, j] : pairs) {
    if (i >= n || j >= n) throw ConfigError("restriction pair out of range");
    if (i == j) throw ConfigError("restriction pairs must be off-diagonal");
    m.set(i, j);
  }
  return m;
}

PairMask PairMask::complement() const {
  PairMask m(n_);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j)
      if (i != j && !contains(i, j)) m.set(i, j);
  return m;
}

DenseGenerator restrict(const DenseGenerator& gen, const PairMask& mask) {
  if (mask.size() != gen.size()) throw ConfigError("mask size does not match generator");
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(gen.matrix().rows(), gen.matrix().cols());
  for (std::size_t i = 0; i < gen.size(); ++i)
    for (std::size_t j = 0; j < gen.size(); ++j)
      if (i != j && mask.contains(i, j))
        q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = gen.rate(i, j);
  return DenseGenerator::from_offdiagonal(q);
}

void validate_split(const DenseGenerator& gen, const PairMask& a, const PairMask& b) {
  if (a.size() != gen.size() || b.size() != gen.size())
    throw ConfigError("mask size does not match generator");
  for (std::size_t i = 0; i < gen.size(); ++i)
    for (std::size_t j = 0; j < gen.size(); ++j) {
      if (i == j) continue;
      if (a.contains(i, j) && b.contains(i, j)) {
        std::ostringstream os;
        os << "restriction masks overlap at (" << i << "," << j << ")";
        throw ConfigError(os.str());
      }
      if (gen.rate(i, j) > 0.0 && !a.contains(i, j) && !b.contains(i, j)) {
        std::ostringstream os;
        os << "positive-rate pair (" << i << "," << j << ") not covered by the split";
        throw ConfigError(os.str());
      }
    }
}

DenseGenerator lattice_generator(const LatticeShape& shape, const ArrheniusRates& params,
                                 std::span<const Group> site_groups, const Group* only,
                                 std::size_t cap) {
  params.validate();
  const std::size_t sites = shape.site_count();
  if (sites >= 63 || (std::size_t{1} << sites) > cap)
    throw ConfigError("state space exceeds the enumeration cap");
  if (only != nullptr && site_groups.size() != sites)
    throw ConfigError("group filter needs one label per site");
  const std::size_t n = std::size_t{1} << sites;
  auto sp = std::make_shared<const LatticeShape>(shape);
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                            static_cast<Eigen::Index>(n));
  for (std::size_t s = 0; s < n; ++s) {
    auto sigma = SpinConfiguration::from_index(sp, s);
    for (std::size_t x = 0; x < sites; ++x) {
      if (only != nullptr && site_groups[x] != *only) continue;
      q(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s ^ (std::size_t{1} << x))) =
          arrhenius_rate(static_cast<Site>(x), sigma, params);
    }
  }
  return DenseGenerator::from_offdiagonal(q);
}

Eigen::VectorXd arrhenius_stationary(const LatticeShape& shape, const ArrheniusRates& params,
                                     std::size_t cap) {
  params.validate();
  if (params.c1 <= 0.0 || params.c2 <= 0.0)
    throw ConfigError("Gibbs weights need c1 > 0 and c2 > 0");
  const std::size_t sites = shape.site_count();
  if (sites >= 63 || (std::size_t{1} << sites) > cap)
    throw ConfigError("state space exceeds the enumeration cap");
  const std::size_t n = std::size_t{1} << sites;
  const auto edges = shape.edges();
  const double field = params.beta * params.h + std::log(params.c1 / params.c2);
  const double bond = params.beta * params.J0;
  Eigen::VectorXd logw(static_cast<Eigen::Index>(n));
  for (std::size_t s = 0; s < n; ++s) {
    double e = 0.0;
    for (auto [x, y] : edges) e += static_cast<double>(((s >> x) & (s >> y)) & 1U);
    e *= bond;
    e += field * static_cast<double>(std::popcount(s));
    logw(static_cast<Eigen::Index>(s)) = e;
  }
  Eigen::VectorXd w = (logw.array() - logw.maxCoeff()).exp();
  return w / w.sum();
}

SchemeSpec SchemeSpec::lie() {
  return {SchemeKind::kLie, 2, {{Group::kFirst, 1.0}, {Group::kSecond, 1.0}}};
}

SchemeSpec SchemeSpec::strang() {
  return {SchemeKind::kStrang,
          3,
          {{Group::kFirst, 0.5}, {Group::kSecond, 1.0}, {Group::kFirst, 0.5}}};
}

SchemeSpec SchemeSpec::parse(const std::string& name) {
  if (name == "lie" || name == "Lie") return lie();
  if (name == "strang" || name == "Strang") return strang();
  throw ConfigError("unknown scheme '" + name + "' (expected lie or strang)");
}

std::string SchemeSpec::name() const { return kind == SchemeKind::kLie ? "lie" : "strang"; }

void SchemeSpec::validate() const {
  double f1 = 0.0, f2 = 0.0;
  for (const auto& s : schedule) (s.group == Group::kFirst ? f1 : f2) += s.fraction;
  if (std::abs(f1 - 1.0) > 1e-15 || std::abs(f2 - 1.0) > 1e-15)
    throw ConfigError("schedule fractions must sum to 1 per group");
  int want = kind == SchemeKind::kLie ? 2 : 3;
  if (p != want) throw ConfigError("local order does not match scheme kind");
}

}  // namespace splitmc
