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

#include <random>

#include "splitmc/splitmc.hpp"

namespace splitmc::testing {

// The three-state chain used throughout the worked examples.
inline DenseGenerator example_q() {
  Eigen::MatrixXd q(3, 3);
  q << -3, 1, 2, 3, -4, 1, 1, 0, -1;
  return DenseGenerator(q);
}

inline PairMask example_b_mask() {
  PairMask m(3);
  m.set(2, 0);
  return m;
}

// Random generator with off-diagonal rates in [lo, hi] and the given
// edge density; row sums fixed afterwards.
inline DenseGenerator random_generator(std::mt19937_64& rng, std::size_t n, double density,
                                       double lo = 0.5, double hi = 2.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0), r(lo, hi);
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                            static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && u(rng) < density)
        q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r(rng);
  return DenseGenerator::from_offdiagonal(q);
}

inline PairMask random_mask(std::mt19937_64& rng, std::size_t n) {
  std::bernoulli_distribution coin(0.5);
  PairMask m(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && coin(rng)) m.set(i, j);
  return m;
}

inline Eigen::MatrixXd random_stochastic(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Eigen::MatrixXd p(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.cols(); ++j) p(i, j) = u(rng);
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

struct LatticeChain {
  ShapePtr shape;
  Decomposition dec;
  DenseGenerator L, L1, L2;
};

inline LatticeChain lattice_chain(std::vector<int> dims, int m, const ArrheniusRates& p) {
  auto shape = make_shape(std::move(dims));
  Decomposition dec(shape, m);
  Group a = Group::kFirst, b = Group::kSecond;
  return {shape, dec, lattice_generator(*shape, p),
          lattice_generator(*shape, p, dec.site_groups(), &a),
          lattice_generator(*shape, p, dec.site_groups(), &b)};
}

}  // namespace splitmc::testing
