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

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace splitmc {

using Site = std::int32_t;

enum class Group : std::uint8_t { kFirst = 1, kSecond = 2 };

std::string to_string(Group g);

// Dense engines refuse larger matrices.
inline constexpr std::size_t kDenseStateCap = 4096;
// Enumeration-only helpers (Gibbs weights, exact expectations).
inline constexpr std::size_t kEnumerationCap = std::size_t{1} << 20;

// Periodic 1D ring or 2D torus with nearest-neighbour sets. Sites are
// numbered row-major (site = row * cols + col). Neighbour lists hold
// distinct sites only, so N = 2 has one neighbour and N = 1 none.
class LatticeShape {
 public:
  explicit LatticeShape(std::vector<int> dims);

  int dimension() const { return static_cast<int>(dims_.size()); }
  int extent(int axis) const { return dims_[static_cast<std::size_t>(axis)]; }
  const std::vector<int>& dims() const { return dims_; }
  std::size_t site_count() const { return sites_; }

  std::span<const Site> neighbors(Site x) const {
    auto b = offsets_[static_cast<std::size_t>(x)];
    auto e = offsets_[static_cast<std::size_t>(x) + 1];
    return {table_.data() + b, e - b};
  }
  bool adjacent(Site x, Site y) const;

  // Coordinates of a site, one entry per axis.
  std::vector<int> coords(Site x) const;
  Site site_at(std::span<const int> coords) const;
  Site translate(Site x, std::span<const int> shift) const;

  // Unordered nearest-neighbour pairs (x < y).
  std::vector<std::pair<Site, Site>> edges() const;

  bool operator==(const LatticeShape& o) const { return dims_ == o.dims_; }

 private:
  std::vector<int> dims_;
  std::size_t sites_ = 0;
  std::vector<std::size_t> offsets_;
  std::vector<Site> table_;
};

using ShapePtr = std::shared_ptr<const LatticeShape>;

ShapePtr make_shape(std::vector<int> dims);

// Occupation sigma: Lambda -> {0,1}.
class SpinConfiguration {
 public:
  explicit SpinConfiguration(ShapePtr shape);
  SpinConfiguration(ShapePtr shape, std::vector<std::uint8_t> spins);

  // Binary packing, site 0 is the least significant bit.
  static SpinConfiguration from_index(ShapePtr shape, std::uint64_t index);
  std::uint64_t index() const;

  const LatticeShape& shape() const { return *shape_; }
  const ShapePtr& shape_ptr() const { return shape_; }
  std::size_t size() const { return spins_.size(); }

  int operator[](Site x) const { return spins_[static_cast<std::size_t>(x)]; }
  void set(Site x, int v);
  void flip(Site x) { spins_[static_cast<std::size_t>(x)] ^= 1U; }
  SpinConfiguration flipped(Site x) const;

  int occupied_neighbors(Site x) const;
  std::size_t occupied() const;
  double coverage() const;

  const std::vector<std::uint8_t>& spins() const { return spins_; }

  bool operator==(const SpinConfiguration& o) const {
    return spins_ == o.spins_ && *shape_ == *o.shape_;
  }

 private:
  ShapePtr shape_;
  std::vector<std::uint8_t> spins_;
};

struct ArrheniusRates {
  double c1 = 1.0;
  double c2 = 1.0;
  double beta = 1.0;
  double J0 = 1.0;
  double h = 0.0;

  void validate() const;
};

double arrhenius_rate(Site x, const SpinConfiguration& sigma,
                      const ArrheniusRates& params);

// Sum over all sites of the flip rates.
double total_rate(const SpinConfiguration& sigma, const ArrheniusRates& params);

// Rate matrix q over an enumerated state space. Diagonal holds -lambda.
class DenseGenerator {
 public:
  DenseGenerator() = default;
  // Validates row sums and off-diagonal signs.
  explicit DenseGenerator(Eigen::MatrixXd rates);
  // Builds the diagonal from the off-diagonal entries of `rates`.
  static DenseGenerator from_offdiagonal(const Eigen::MatrixXd& rates);
  static DenseGenerator zero(std::size_t n);

  std::size_t size() const { return static_cast<std::size_t>(q_.rows()); }
  double rate(std::size_t i, std::size_t j) const {
    return q_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  const Eigen::MatrixXd& matrix() const { return q_; }

 private:
  Eigen::MatrixXd q_;
};

double total_rate(std::size_t state, const DenseGenerator& gen);

// Set of ordered state pairs used to restrict a dense generator.
class PairMask {
 public:
  explicit PairMask(std::size_t n = 0) : n_(n), bits_(n * n, 0) {}
  static PairMask all(std::size_t n);
  static PairMask from_pairs(std::size_t n,
                             std::span<const std::pair<std::size_t, std::size_t>> pairs);
  // Pairs with positive rate in `gen` selected by `pred(i, j)`.
  template <class Pred>
  static PairMask select(const DenseGenerator& gen, Pred pred) {
    PairMask m(gen.size());
    for (std::size_t i = 0; i < gen.size(); ++i)
      for (std::size_t j = 0; j < gen.size(); ++j)
        if (i != j && pred(i, j)) m.set(i, j);
    return m;
  }

  std::size_t size() const { return n_; }
  bool contains(std::size_t i, std::size_t j) const { return bits_[i * n_ + j] != 0; }
  void set(std::size_t i, std::size_t j, bool on = true) { bits_[i * n_ + j] = on ? 1 : 0; }
  PairMask complement() const;

 private:
  std::size_t n_;
  std::vector<std::uint8_t> bits_;
};

DenseGenerator restrict(const DenseGenerator& gen, const PairMask& mask);

// Throws ConfigError unless the masks are disjoint and together cover every
// positive-rate off-diagonal pair of gen.
void validate_split(const DenseGenerator& gen, const PairMask& a, const PairMask& b);

// Dense generator of the spin-flip chain. With `site_groups` and `only`
// set, flips are limited to sites whose group equals `only`.
DenseGenerator lattice_generator(const LatticeShape& shape, const ArrheniusRates& params,
                                 std::span<const Group> site_groups = {},
                                 const Group* only = nullptr,
                                 std::size_t cap = kDenseStateCap);

// Stationary (Gibbs) law of the spin-flip chain over packed states:
// pi ~ exp(beta J0 sum_<xy> s_x s_y + (beta h + log(c1/c2)) sum_x s_x).
// Every group restriction preserves it. Needs c1, c2 > 0.
Eigen::VectorXd arrhenius_stationary(const LatticeShape& shape, const ArrheniusRates& params,
                                     std::size_t cap = kEnumerationCap);

enum class SchemeKind { kLie, kStrang };

struct SubStep {
  Group group;
  double fraction;
};

struct SchemeSpec {
  SchemeKind kind = SchemeKind::kLie;
  int p = 2;
  std::vector<SubStep> schedule;

  static SchemeSpec lie();
  static SchemeSpec strang();
  static SchemeSpec parse(const std::string& name);

  // RER exponent on lattices, where the state-space diameter exceeds p.
  int rer_order() const { return p - 1; }
  std::string name() const;
  void validate() const;
};

}  // namespace splitmc
