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
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "splitmc/core_model.hpp"

namespace splitmc {

// Row-stochastic matrix tagged with the time step that produced it.
class TransitionMatrix {
 public:
  TransitionMatrix() = default;
  // Entries below -1e-12 throw; smaller negatives are clamped and the
  // affected rows renormalized. Rows must then sum to 1 within 1e-10.
  TransitionMatrix(Eigen::MatrixXd probs, double dt);

  std::size_t size() const { return static_cast<std::size_t>(p_.rows()); }
  double dt() const { return dt_; }
  double operator()(std::size_t i, std::size_t j) const {
    return p_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  const Eigen::MatrixXd& matrix() const { return p_; }

 private:
  Eigen::MatrixXd p_;
  double dt_ = 0.0;
};

// e^{tL} without any stochastic post-processing. Useful when small
// differences between nearby matrices matter.
Eigen::MatrixXd expm_raw(const Eigen::MatrixXd& L, double t);

TransitionMatrix expm(const DenseGenerator& gen, double t);

Eigen::MatrixXd scheme_matrix_raw(const DenseGenerator& L1, const DenseGenerator& L2,
                                  const SchemeSpec& scheme, double dt);
TransitionMatrix scheme_matrix(const DenseGenerator& L1, const DenseGenerator& L2,
                               const SchemeSpec& scheme, double dt);

// Strongly connected components of the graph {(i,j): M(i,j) > 0, i != j}.
std::vector<std::vector<std::size_t>> strongly_connected_components(const Eigen::MatrixXd& m);

Eigen::VectorXd stationary(const TransitionMatrix& P);
Eigen::VectorXd uniform_measure(std::size_t n);

// Normalized relative entropy rate (1/dt) sum_x w(x) sum_y Q log(Q/P).
double rer(const TransitionMatrix& Q, const TransitionMatrix& P,
           const Eigen::VectorXd& sampling);

// Plain relative entropy R(a || b) between distributions.
double relative_entropy(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// Relative entropy of the M-step path laws of (nu0, Q) against (mu0, P).
double path_relative_entropy(const TransitionMatrix& Q, const TransitionMatrix& P,
                             const Eigen::VectorXd& nu0, const Eigen::VectorXd& mu0,
                             int M);

struct CommutatorReport {
  Eigen::MatrixXd C;   // dt^p coefficient of expm(L,dt) - scheme(dt)
  int p = 0;
  double residual = 0.0;
  Eigen::MatrixXd formula;     // closed-form commutator expression
  int formula_sign = 0;        // +1 / -1 when C matches +-formula, 0 otherwise
  double formula_deviation = 0.0;
};

CommutatorReport commutator(const DenseGenerator& L, const DenseGenerator& L1,
                            const DenseGenerator& L2, const SchemeSpec& scheme);

inline constexpr int kUnreachable = std::numeric_limits<int>::max();

struct ConnectivityReport {
  std::vector<std::vector<int>> dist;  // kUnreachable for no path
  int diameter = 0;
  int k_hat = 0;
};

ConnectivityReport connectivity(const DenseGenerator& gen, int p);

// Threshold deciding whether a commutator entry is genuinely nonzero.
double commutator_threshold(const CommutatorReport& c);

int predict_order(const ConnectivityReport& conn, const CommutatorReport& comm);

struct OrderFit {
  double slope = 0.0;
  int order = 0;                // round(slope)
  std::vector<double> coeffs;   // polynomial in dt of H / dt^order
  std::vector<double> grid;
  double rsq = 0.0;
};

OrderFit fit_order(std::vector<std::pair<double, double>> samples, int poly_degree = 3);

double tilted_eigenvalue(const TransitionMatrix& P, const Eigen::VectorXd& f, double c);

struct UqBounds {
  double xi_minus = 0.0;
  double xi_plus = 0.0;
};

UqBounds goal_oriented_bounds(const TransitionMatrix& Q, const TransitionMatrix& P,
                              const Eigen::VectorXd& f);

double linearized_bound(const TransitionMatrix& Q, const TransitionMatrix& P,
                        const Eigen::VectorXd& f, int max_lag = 100000);

}  // namespace splitmc
