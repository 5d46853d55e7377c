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

#include "splitmc/exact_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <sstream>

#include "splitmc/errors.hpp"

namespace splitmc {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

double max_abs(const MatrixXd& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

// (1+u) log(1+u) - u, accurate near 0 where the direct form cancels.
double phi(double u) {
  if (u <= -1.0) return 1.0;
  if (std::abs(u) < 1e-3) {
    double u2 = u * u;
    return u2 * (0.5 - u / 6.0 + u2 / 12.0 - u2 * u / 20.0);
  }
  return (1.0 + u) * std::log1p(u) - u;
}

constexpr double kZero = 1e-300;

void check_measure(const VectorXd& w, std::size_t n, const char* what) {
  if (static_cast<std::size_t>(w.size()) != n)
    throw ConfigError(std::string(what) + " has the wrong length");
  if ((w.array() < 0.0).any()) throw ConfigError(std::string(what) + " has negative mass");
  if (std::abs(w.sum() - 1.0) > 1e-9) throw ConfigError(std::string(what) + " does not sum to 1");
}

// Square a near-identity stochastic matrix until its diagonal no longer
// dominates, so power iteration contracts quickly. Returns the power count.
int accelerate(MatrixXd& m) {
  int k = 0;
  while (k < 60 && m.diagonal().maxCoeff() > 0.5) {
    m = m * m;
    ++k;
  }
  return k;
}

void check_irreducible(const MatrixXd& p) {
  auto comps = strongly_connected_components(p);
  if (comps.size() > 1) {
    std::ostringstream os;
    os << "chain is reducible; components:";
    for (const auto& c : comps) {
      os << " {";
      for (std::size_t i = 0; i < c.size(); ++i) os << (i ? "," : "") << c[i];
      os << "}";
    }
    throw AnalysisError(os.str());
  }
}

void check_aperiodic(const MatrixXd& p) {
  const Index n = p.rows();
  std::vector<long> level(static_cast<std::size_t>(n), -1);
  std::queue<Index> q;
  level[0] = 0;
  q.push(0);
  while (!q.empty()) {
    Index i = q.front();
    q.pop();
    for (Index j = 0; j < n; ++j)
      if (p(i, j) > 0.0 && level[static_cast<std::size_t>(j)] < 0) {
        level[static_cast<std::size_t>(j)] = level[static_cast<std::size_t>(i)] + 1;
        q.push(j);
      }
  }
  long g = 0;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (p(i, j) > 0.0)
        g = std::gcd(g, std::abs(level[static_cast<std::size_t>(i)] + 1 -
                                 level[static_cast<std::size_t>(j)]));
  if (g != 1) throw AnalysisError("chain is periodic (period " + std::to_string(g) + ")");
}

MatrixXd commutator_of(const MatrixXd& a, const MatrixXd& b) { return a * b - b * a; }

// e^{tL} - I without forming the identity, so differences of nearby
// propagators keep their relative accuracy at small t.
MatrixXd expm1_raw(const MatrixXd& L, double t) {
  const Index n = L.rows();
  MatrixXd a = t * L;
  double norm = n == 0 ? 0.0 : a.cwiseAbs().rowwise().sum().maxCoeff();
  int s = 0;
  if (norm > 0.5) s = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  a /= std::ldexp(1.0, s);
  MatrixXd x = a;
  MatrixXd term = a;
  for (int k = 2; k < 64; ++k) {
    term = term * a / static_cast<double>(k);
    x += term;
    if (max_abs(term) < 1e-17 * max_abs(x)) break;
  }
  for (int i = 0; i < s; ++i) x = 2.0 * x + x * x;
  return x;
}

// scheme(h) - I, composing (I + X)(I + Y) - I = X + Y + XY.
MatrixXd scheme_minus_identity(const DenseGenerator& L1, const DenseGenerator& L2,
                               const SchemeSpec& scheme, double dt) {
  const Index n = static_cast<Index>(L1.size());
  MatrixXd out = MatrixXd::Zero(n, n);
  for (const auto& sub : scheme.schedule) {
    const auto& g = sub.group == Group::kFirst ? L1 : L2;
    MatrixXd y = expm1_raw(g.matrix(), sub.fraction * dt);
    out = out + y + out * y;
  }
  return out;
}

}  // namespace

TransitionMatrix::TransitionMatrix(MatrixXd probs, double dt) : p_(std::move(probs)), dt_(dt) {
  if (p_.rows() != p_.cols()) throw ConfigError("transition matrix must be square");
  if (!(dt >= 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be finite and >= 0");
  for (Index i = 0; i < p_.rows(); ++i) {
    bool clamped = false;
    for (Index j = 0; j < p_.cols(); ++j) {
      double v = p_(i, j);
      if (!std::isfinite(v)) throw AnalysisError("non-finite transition probability");
      if (v < -1e-12) {
        std::ostringstream os;
        os << "negative transition probability " << v << " at (" << i << "," << j << ")";
        throw AnalysisError(os.str());
      }
      if (v < 0.0) {
        p_(i, j) = 0.0;
        clamped = true;
      }
    }
    if (clamped) p_.row(i) /= p_.row(i).sum();
    if (std::abs(p_.row(i).sum() - 1.0) > 1e-10) {
      std::ostringstream os;
      os << "row " << i << " of transition matrix sums to " << p_.row(i).sum();
      throw AnalysisError(os.str());
    }
  }
}

MatrixXd expm_raw(const MatrixXd& L, double t) {
  if (!(t >= 0.0)) throw ConfigError("expm needs t >= 0");
  const Index n = L.rows();
  MatrixXd a = t * L;
  double norm = n == 0 ? 0.0 : a.cwiseAbs().rowwise().sum().maxCoeff();
  int s = 0;
  if (norm > 0.5) s = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  a /= std::ldexp(1.0, s);
  MatrixXd e = MatrixXd::Identity(n, n);
  MatrixXd term = MatrixXd::Identity(n, n);
  for (int k = 1; k < 64; ++k) {
    term = term * a / static_cast<double>(k);
    e += term;
    if (max_abs(term) < 1e-16 * max_abs(e)) break;
  }
  for (int i = 0; i < s; ++i) e = e * e;
  return e;
}

TransitionMatrix expm(const DenseGenerator& gen, double t) {
  if (gen.size() > kDenseStateCap) throw ConfigError("dense engine caps at 4096 states");
  return TransitionMatrix(expm_raw(gen.matrix(), t), t);
}

MatrixXd scheme_matrix_raw(const DenseGenerator& L1, const DenseGenerator& L2,
                           const SchemeSpec& scheme, double dt) {
  if (L1.size() != L2.size()) throw ConfigError("split generators differ in dimension");
  const Index n = static_cast<Index>(L1.size());
  MatrixXd out = MatrixXd::Identity(n, n);
  for (const auto& sub : scheme.schedule) {
    const auto& g = sub.group == Group::kFirst ? L1 : L2;
    out = out * expm_raw(g.matrix(), sub.fraction * dt);
  }
  return out;
}

TransitionMatrix scheme_matrix(const DenseGenerator& L1, const DenseGenerator& L2,
                               const SchemeSpec& scheme, double dt) {
  if (!(dt > 0.0 && dt <= 1.0)) throw ConfigError("scheme dt must lie in (0,1]");
  if (L1.size() > kDenseStateCap) throw ConfigError("dense engine caps at 4096 states");
  return TransitionMatrix(scheme_matrix_raw(L1, L2, scheme, dt), dt);
}

std::vector<std::vector<std::size_t>> strongly_connected_components(const MatrixXd& m) {
  // Iterative Tarjan.
  const std::size_t n = static_cast<std::size_t>(m.rows());
  std::vector<int> index(n, -1), low(n, 0);
  std::vector<char> on_stack(n, 0);
  std::vector<std::size_t> stack;
  std::vector<std::vector<std::size_t>> comps;
  int counter = 0;
  for (std::size_t root = 0; root < n; ++root) {
    if (index[root] >= 0) continue;
    std::vector<std::pair<std::size_t, std::size_t>> work{{root, 0}};
    while (!work.empty()) {
      auto& [v, next] = work.back();
      if (next == 0 && index[v] < 0) {
        index[v] = low[v] = counter++;
        stack.push_back(v);
        on_stack[v] = 1;
      }
      bool descended = false;
      while (next < n) {
        std::size_t w = next++;
        if (w == v || !(m(static_cast<Index>(v), static_cast<Index>(w)) > 0.0)) continue;
        if (index[w] < 0) {
          work.emplace_back(w, 0);
          descended = true;
          break;
        }
        if (on_stack[w]) low[v] = std::min(low[v], index[w]);
      }
      if (descended) continue;
      if (low[v] == index[v]) {
        std::vector<std::size_t> comp;
        std::size_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = 0;
          comp.push_back(w);
        } while (w != v);
        std::sort(comp.begin(), comp.end());
        comps.push_back(std::move(comp));
      }
      std::size_t done = v;
      work.pop_back();
      if (!work.empty()) {
        std::size_t parent = work.back().first;
        low[parent] = std::min(low[parent], low[done]);
      }
    }
  }
  std::sort(comps.begin(), comps.end());
  return comps;
}

VectorXd uniform_measure(std::size_t n) {
  return VectorXd::Constant(static_cast<Index>(n), 1.0 / static_cast<double>(n));
}

VectorXd stationary(const TransitionMatrix& P) {
  const MatrixXd& p = P.matrix();
  if (p.rows() == 0) throw ConfigError("empty transition matrix");
  check_irreducible(p);
  check_aperiodic(p);
  MatrixXd m = p;
  accelerate(m);
  Eigen::RowVectorXd mu = uniform_measure(P.size()).transpose();
  bool converged = false;
  for (int it = 0; it < 1000000; ++it) {
    Eigen::RowVectorXd next = mu * m;
    next /= next.sum();
    double diff = (next - mu).cwiseAbs().sum();
    mu = next;
    if (diff < 1e-13) {
      converged = true;
      break;
    }
  }
  if (!converged) throw AnalysisError("stationary power iteration did not converge");
  // Polish on the original matrix.
  for (int it = 0; it < 1000; ++it) {
    Eigen::RowVectorXd next = mu * p;
    next /= next.sum();
    double diff = (next - mu).cwiseAbs().sum();
    mu = next;
    if (diff < 1e-15) break;
  }
  return mu.transpose();
}

double rer(const TransitionMatrix& Q, const TransitionMatrix& P, const VectorXd& sampling) {
  if (Q.size() != P.size()) throw ConfigError("rer: matrices differ in dimension");
  if (std::abs(Q.dt() - P.dt()) > 1e-15 * std::max(1.0, Q.dt()))
    throw ConfigError("rer: matrices built at different dt");
  if (!(Q.dt() > 0.0)) throw ConfigError("rer: dt must be positive");
  check_measure(sampling, Q.size(), "sampling measure");
  const std::size_t n = Q.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double w = sampling(static_cast<Index>(i));
    if (w == 0.0) continue;
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double q = Q(i, j), p = P(i, j);
      if (p <= kZero) {
        if (q > kZero) {
          std::ostringstream os;
          os << "absolute continuity violated at pair (" << i << "," << j << ")";
          throw AnalysisError(os.str());
        }
        continue;
      }
      row += p * phi((q - p) / p);
    }
    total += w * row;
  }
  return total / Q.dt();
}

double relative_entropy(const VectorXd& a, const VectorXd& b) {
  if (a.size() != b.size()) throw ConfigError("relative_entropy: length mismatch");
  double total = 0.0;
  for (Index i = 0; i < a.size(); ++i) {
    if (b(i) <= kZero) {
      if (a(i) > kZero) {
        std::ostringstream os;
        os << "absolute continuity violated at state " << i;
        throw AnalysisError(os.str());
      }
      continue;
    }
    total += b(i) * phi((a(i) - b(i)) / b(i));
  }
  return total;
}

double path_relative_entropy(const TransitionMatrix& Q, const TransitionMatrix& P,
                             const VectorXd& nu0, const VectorXd& mu0, int M) {
  if (M < 1) throw ConfigError("path_relative_entropy needs M >= 1");
  check_measure(nu0, Q.size(), "nu0");
  check_measure(mu0, Q.size(), "mu0");
  double total = relative_entropy(nu0, mu0);
  Eigen::RowVectorXd nu = nu0.transpose();
  for (int i = 1; i <= M; ++i) {
    VectorXd w = nu.transpose();
    w /= w.sum();
    total += Q.dt() * rer(Q, P, w);
    nu = nu * Q.matrix();
  }
  return total;
}

CommutatorReport commutator(const DenseGenerator& L, const DenseGenerator& L1,
                            const DenseGenerator& L2, const SchemeSpec& scheme) {
  if (L.size() != L1.size() || L.size() != L2.size())
    throw ConfigError("commutator: generators differ in dimension");
  const MatrixXd& q = L.matrix();
  double scale = std::max(1.0, max_abs(q));
  if (max_abs(q - L1.matrix() - L2.matrix()) > 1e-12 * scale)
    throw ConfigError("commutator: L is not L1 + L2");
  const int p = scheme.p;

  // Neville table on R(h) = (e^{hL} - scheme(h)) / h^p with h = 2^-k.
  constexpr int kLo = 6, kHi = 12;
  constexpr int rows = kHi - kLo + 1;
  std::vector<std::vector<MatrixXd>> t(rows);
  for (int i = 0; i < rows; ++i) {
    double h = std::ldexp(1.0, -(kLo + i));
    MatrixXd d = expm1_raw(q, h) - scheme_minus_identity(L1, L2, scheme, h);
    t[static_cast<std::size_t>(i)].push_back(d / std::pow(h, p));
  }
  MatrixXd best = t[0][0];
  double best_err = std::numeric_limits<double>::infinity();
  for (int i = 1; i < rows; ++i) {
    auto& ti = t[static_cast<std::size_t>(i)];
    const auto& tp = t[static_cast<std::size_t>(i - 1)];
    for (int j = 1; j <= i; ++j) {
      double f = std::ldexp(1.0, j) - 1.0;
      const MatrixXd& a = ti[static_cast<std::size_t>(j - 1)];
      MatrixXd next = a + (a - tp[static_cast<std::size_t>(j - 1)]) / f;
      double err = std::max(max_abs(next - a), max_abs(next - tp[static_cast<std::size_t>(j - 1)]));
      if (err < best_err) {
        best_err = err;
        best = next;
      }
      ti.push_back(std::move(next));
    }
  }

  CommutatorReport out;
  out.C = best;
  out.p = p;
  out.residual = best_err;
  const MatrixXd& a = L1.matrix();
  const MatrixXd& b = L2.matrix();
  if (scheme.kind == SchemeKind::kLie) {
    out.formula = 0.5 * commutator_of(a, b);
  } else {
    MatrixXd ab = commutator_of(a, b);
    MatrixXd ba = commutator_of(b, a);
    out.formula = (commutator_of(a, ab) - 2.0 * commutator_of(b, ba)) / 24.0;
  }
  double plus = max_abs(out.C - out.formula);
  double minus = max_abs(out.C + out.formula);
  out.formula_deviation = std::min(plus, minus);
  double tol = 10.0 * out.residual + 1e-9;
  if (out.formula_deviation <= tol) out.formula_sign = plus <= minus ? 1 : -1;
  return out;
}

ConnectivityReport connectivity(const DenseGenerator& gen, int p) {
  const std::size_t n = gen.size();
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && gen.rate(i, j) > 0.0) adj[i].push_back(j);
  ConnectivityReport r;
  r.dist.assign(n, std::vector<int>(n, kUnreachable));
  for (std::size_t s = 0; s < n; ++s) {
    auto& d = r.dist[s];
    std::queue<std::size_t> q;
    d[s] = 0;
    q.push(s);
    while (!q.empty()) {
      std::size_t v = q.front();
      q.pop();
      for (std::size_t w : adj[v])
        if (d[w] == kUnreachable) {
          d[w] = d[v] + 1;
          q.push(w);
        }
    }
    for (int v : d)
      if (v != kUnreachable) r.diameter = std::max(r.diameter, v);
  }
  r.k_hat = std::min(r.diameter, p);
  return r;
}

double commutator_threshold(const CommutatorReport& c) { return 10.0 * c.residual + 1e-12; }

int predict_order(const ConnectivityReport& conn, const CommutatorReport& comm) {
  const std::size_t n = conn.dist.size();
  if (static_cast<std::size_t>(comm.C.rows()) != n)
    throw ConfigError("predict_order: reports differ in dimension");
  const double thr = commutator_threshold(comm);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (conn.dist[i][j] == conn.k_hat &&
          std::abs(comm.C(static_cast<Index>(i), static_cast<Index>(j))) > thr)
        return 2 * comm.p - (conn.k_hat + 1);
  throw AnalysisError("no nonzero commutator entry at distance k_hat; theorem inapplicable");
}

OrderFit fit_order(std::vector<std::pair<double, double>> samples, int poly_degree) {
  if (samples.size() < 4) throw ConfigError("fit_order needs at least 4 samples");
  std::sort(samples.begin(), samples.end());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto [dt, h] = samples[i];
    if (!(dt > 0.0 && dt < 1.0)) throw ConfigError("fit_order: dt must lie in (0,1)");
    if (!(h > 0.0) || !std::isfinite(h))
      throw AnalysisError("fit_order: non-positive H value rejected");
    if (i > 0 && !(dt > samples[i - 1].first))
      throw ConfigError("fit_order: duplicate dt values");
  }
  const Index n = static_cast<Index>(samples.size());
  VectorXd x(n), y(n);
  for (Index i = 0; i < n; ++i) {
    x(i) = std::log(samples[static_cast<std::size_t>(i)].first);
    y(i) = std::log(samples[static_cast<std::size_t>(i)].second);
  }
  double mx = x.mean(), my = y.mean();
  double sxy = ((x.array() - mx) * (y.array() - my)).sum();
  double sxx = (x.array() - mx).square().sum();
  double syy = (y.array() - my).square().sum();
  OrderFit fit;
  fit.slope = sxy / sxx;
  fit.rsq = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  fit.order = static_cast<int>(std::lround(fit.slope));
  for (auto& s : samples) fit.grid.push_back(s.first);

  // Polynomial in dt (scaled by the largest dt for conditioning).
  int deg = std::clamp(poly_degree, 0, static_cast<int>(n) - 1);
  double xmax = samples.back().first;
  MatrixXd v(n, deg + 1);
  VectorXd rhs(n);
  for (Index i = 0; i < n; ++i) {
    auto [dt, h] = samples[static_cast<std::size_t>(i)];
    double u = dt / xmax;
    double pw = 1.0;
    for (int k = 0; k <= deg; ++k) {
      v(i, k) = pw;
      pw *= u;
    }
    rhs(i) = h / std::pow(dt, fit.order);
  }
  VectorXd c = v.colPivHouseholderQr().solve(rhs);
  for (int k = 0; k <= deg; ++k) fit.coeffs.push_back(c(k) / std::pow(xmax, k));
  return fit;
}

double tilted_eigenvalue(const TransitionMatrix& P, const VectorXd& f, double c) {
  if (static_cast<std::size_t>(f.size()) != P.size())
    throw ConfigError("observable length does not match chain");
  VectorXd mu = stationary(P);
  VectorXd fbar = f.array() - mu.dot(f);
  VectorXd expo = c * fbar;
  double shift = expo.maxCoeff();
  MatrixXd m = P.matrix();
  for (Index j = 0; j < m.cols(); ++j) m.col(j) *= std::exp(expo(j) - shift);

  // Square while the underlying chain is sluggish, tracking the scale.
  MatrixXd probe = P.matrix();
  int k = accelerate(probe);
  double logscale = 0.0;
  for (int i = 0; i < k; ++i) {
    m = m * m;
    double mx = m.maxCoeff();
    if (!(mx > 0.0) || !std::isfinite(mx)) throw AnalysisError("tilted matrix degenerated");
    m /= mx;
    logscale = 2.0 * logscale + std::log(mx);
  }
  VectorXd v = VectorXd::Ones(m.rows()) / static_cast<double>(m.rows());
  double rho = 0.0;
  bool converged = false;
  for (int it = 0; it < 100000; ++it) {
    VectorXd w = m * v;
    double r = w.sum();
    if (!(r > 0.0)) throw AnalysisError("tilted power iteration collapsed");
    w /= r;
    double diff = (w - v).cwiseAbs().sum();
    v = w;
    bool settle = std::abs(r - rho) <= 1e-15 * r;
    rho = r;
    if (diff < 1e-14 && settle) {
      converged = true;
      break;
    }
  }
  if (!converged) throw AnalysisError("tilted power iteration diverged (non-primitive matrix?)");
  return (logscale + std::log(rho)) / std::ldexp(1.0, k) + shift;
}

namespace {

// Minimize g over u = log c in [log 1e-3, log 1e3] by golden section.
template <class G>
double golden_min(G g) {
  const double phi_inv = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = std::log(1e-3), b = std::log(1e3);
  double best = std::min(g(a), g(b));
  double x1 = b - phi_inv * (b - a), x2 = a + phi_inv * (b - a);
  double f1 = g(x1), f2 = g(x2);
  int it = 0;
  for (; it < 200 && (b - a) > 1e-9; ++it) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi_inv * (b - a);
      f1 = g(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi_inv * (b - a);
      f2 = g(x2);
    }
  }
  if ((b - a) > 1e-9) throw AnalysisError("golden-section search did not converge");
  return std::min({best, f1, f2});
}

bool is_constant(const VectorXd& f) {
  return f.size() == 0 || (f.maxCoeff() - f.minCoeff()) == 0.0;
}

}  // namespace

UqBounds goal_oriented_bounds(const TransitionMatrix& Q, const TransitionMatrix& P,
                              const VectorXd& f) {
  if (Q.size() != P.size()) throw ConfigError("bounds: matrices differ in dimension");
  VectorXd muq = stationary(Q);
  double H = Q.dt() * rer(Q, P, muq);
  if (H == 0.0 || is_constant(f)) return {0.0, 0.0};
  auto plus = [&](double u) {
    double c = std::exp(u);
    return (tilted_eigenvalue(P, f, c) + H) / c;
  };
  auto minus = [&](double u) {
    double c = std::exp(u);
    return (tilted_eigenvalue(P, f, -c) + H) / c;
  };
  UqBounds b;
  b.xi_plus = golden_min(plus);
  b.xi_minus = -golden_min(minus);
  return b;
}

double linearized_bound(const TransitionMatrix& Q, const TransitionMatrix& P,
                        const VectorXd& f, int max_lag) {
  if (Q.size() != P.size()) throw ConfigError("bounds: matrices differ in dimension");
  if (static_cast<std::size_t>(f.size()) != P.size())
    throw ConfigError("observable length does not match chain");
  VectorXd muq = stationary(Q);
  double H = Q.dt() * rer(Q, P, muq);
  if (H == 0.0 || is_constant(f)) return 0.0;
  VectorXd mu = stationary(P);
  VectorXd fbar = f.array() - mu.dot(f);
  double upsilon = mu.dot(fbar.cwiseProduct(fbar));
  VectorXd g = fbar;
  int k = 1;
  for (;; ++k) {
    if (k > max_lag) throw AnalysisError("autocorrelation did not decay within the lag cutoff");
    g = P.matrix() * g;
    double cov = mu.dot(fbar.cwiseProduct(g));
    if (std::abs(cov) < 1e-12) break;
    upsilon += 2.0 * cov;
  }
  upsilon = std::max(upsilon, 0.0);
  return std::sqrt(upsilon) * std::sqrt(2.0 * H);
}

}  // namespace splitmc
