//
// Copyright 2026 The privfilter Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

/// \file
/// Maximal correlation rho_m^2(X, Z_gamma) by alternating conditional
/// expectations on a quadrature discretization of (X, Z), and the one-sided
/// eta^2_Z(X) on the same discretization.

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "privfilter/errors.hpp"
#include "privfilter/law.hpp"
#include "privfilter/models.hpp"
#include "privfilter/numerics.hpp"

namespace privfilter {

struct DependenceEstimates {
  Estimate rho_m_sq;  // rho_m^2(X, Z)
  Estimate eta_sq;    // eta^2_Z(X) = var(E[X|Z]) / var(X)
};

inline constexpr int kAceMaxSweeps = 500;
inline constexpr std::size_t kAceMaxNodes = 8000;
inline constexpr std::size_t kAceBlock = 4;

namespace detail {

// Eigen-decomposition of a small symmetric matrix (row-major, n x n) by cyclic
// Jacobi rotations. Returns eigenvalues in decreasing order; column c of
// `vecs` is the eigenvector for value c.
inline std::vector<double> symmetric_eigen(std::vector<double> a, std::size_t n,
                                           std::vector<double>& vecs) {
  vecs.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) vecs[i * n + i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t r = p + 1; r < n; ++r) off += a[p * n + r] * a[p * n + r];
    }
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t r = p + 1; r < n; ++r) {
        const double apr = a[p * n + r];
        if (std::abs(apr) < 1e-300) continue;
        const double theta = (a[r * n + r] - a[p * n + p]) / (2.0 * apr);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p], akr = a[k * n + r];
          a[k * n + p] = c * akp - s * akr;
          a[k * n + r] = s * akp + c * akr;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k], ark = a[r * n + k];
          a[p * n + k] = c * apk - s * ark;
          a[r * n + k] = s * apk + c * ark;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = vecs[k * n + p], vkr = vecs[k * n + r];
          vecs[k * n + p] = c * vkp - s * vkr;
          vecs[k * n + r] = s * vkp + c * vkr;
        }
      }
    }
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return a[x * n + x] > a[y * n + y]; });
  std::vector<double> vals(n), sorted(n * n);
  for (std::size_t c = 0; c < n; ++c) {
    vals[c] = a[order[c] * n + order[c]];
    for (std::size_t r = 0; r < n; ++r) sorted[r * n + c] = vecs[r * n + order[c]];
  }
  vecs = std::move(sorted);
  return vals;
}

}  // namespace detail

// Discrete joint law of (X, Z_gamma): P[i][j] = w_i u_j p(z_j | x_i).
class AceGrid {
 public:
  // `resolution` scales the X panel width; 1 is the working grid. The X
  // spacing is chosen for `spacing_gamma` (default: gamma itself), so one
  // grid can serve a whole range of gamma below it.
  AceGrid(const JointModel& m, double gamma, double resolution, const NumericsConfig& cfg,
          double spacing_gamma = 0.0)
      : gamma_(gamma) {
    if (spacing_gamma < gamma) spacing_gamma = gamma;
    const double sg = std::sqrt(gamma);
    const Moments mo = moments(m);
    // A point x moves Z by sg * slope * dx; Z|X=x is smoothed by the Gaussian
    // part of Y|X (if any) plus the unit channel noise.
    double smooth_var = kInf;
    for (const auto& b : cond_branches(m)) {
      smooth_var = std::min(smooth_var, b.base.is_single_gaussian() ? b.base.var() : 0.0);
    }
    const double natural = 0.25 * std::sqrt(mo.var_x);
    double spacing = std::min(natural, std::sqrt(smooth_var + 1.0 / spacing_gamma) / x_to_y_scale(m));
    spacing *= resolution;
    atoms_ = x_atoms(m, spacing, 8);
    if (atoms_.size() > kAceMaxNodes) {
      throw NoConvergence("maximal_correlation: X grid too large at gamma " +
                          std::to_string(gamma));
    }
    std::vector<Law> conds;
    conds.reserve(atoms_.size());
    for (const auto& a : atoms_) conds.push_back(cond_density_y_given_x(m, a.x));

    const Law law_y = marginal_y(m);
    const Rule zr = z_rule(law_y, gamma, std::max(8, z_order(cfg) / 2));
    if (zr.size() > 2 * kAceMaxNodes) {
      throw NoConvergence("maximal_correlation: Z grid too large at gamma " +
                          std::to_string(gamma));
    }
    nx_ = atoms_.size();
    nz_ = zr.size();
    p_.assign(nx_ * nz_, 0.0);
    for (std::size_t i = 0; i < nx_; ++i) {
      for (std::size_t j = 0; j < nz_; ++j) {
        const double le = log_evidence(conds[i], zr.nodes[j], sg);
        if (le > kNegInf) p_[i * nz_ + j] = atoms_[i].weight * zr.weights[j] * std::exp(le);
      }
    }
    row_.assign(nx_, 0.0);
    col_.assign(nz_, 0.0);
    for (std::size_t i = 0; i < nx_; ++i) {
      for (std::size_t j = 0; j < nz_; ++j) {
        row_[i] += p_[i * nz_ + j];
        col_[j] += p_[i * nz_ + j];
      }
    }
  }

  double gamma() const { return gamma_; }
  std::size_t x_size() const { return nx_; }
  std::size_t z_size() const { return nz_; }

  // Second singular value squared of D_row^{-1/2} P D_col^{-1/2}: the top
  // eigenvalue of f <- E[E[f(X)|Z]|X] with the constants projected out.
  // Subspace iteration on a small block with Rayleigh-Ritz, so nearly equal
  // leading eigenvalues (odd and even eigenfunctions of symmetric models) do
  // not slow convergence.
  double rho_m_sq(double tol) const {
    std::vector<double> b(nx_ * nz_, 0.0);
    for (std::size_t i = 0; i < nx_; ++i) {
      for (std::size_t j = 0; j < nz_; ++j) {
        const double d = row_[i] * col_[j];
        if (d > 0.0) b[i * nz_ + j] = p_[i * nz_ + j] / std::sqrt(d);
      }
    }
    std::vector<double> top(nx_);
    double top_nn = 0.0;
    for (std::size_t i = 0; i < nx_; ++i) {
      top[i] = std::sqrt(row_[i]);
      top_nn += row_[i];
    }
    auto dot = [&](const std::vector<double>& u, const std::vector<double>& v) {
      double s = 0.0;
      for (std::size_t i = 0; i < nx_; ++i) s += u[i] * v[i];
      return s;
    };
    std::vector<double> g(nz_);
    auto apply = [&](const std::vector<double>& f, std::vector<double>& out) {
      std::fill(g.begin(), g.end(), 0.0);
      for (std::size_t i = 0; i < nx_; ++i) {
        const double fi = f[i];
        const double* bi = &b[i * nz_];
        for (std::size_t j = 0; j < nz_; ++j) g[j] += bi[j] * fi;
      }
      for (std::size_t i = 0; i < nx_; ++i) {
        const double* bi = &b[i * nz_];
        double acc = 0.0;
        for (std::size_t j = 0; j < nz_; ++j) acc += bi[j] * g[j];
        out[i] = acc;
      }
    };
    // Orthonormalizes the block against the constants and itself; columns
    // that vanish are dropped.
    auto orthonormalize = [&](std::vector<std::vector<double>>& q) {
      std::vector<std::vector<double>> kept;
      for (auto& v : q) {
        for (int pass = 0; pass < 2; ++pass) {
          const double c = dot(v, top) / top_nn;
          for (std::size_t i = 0; i < nx_; ++i) v[i] -= c * top[i];
          for (const auto& u : kept) {
            const double d = dot(v, u);
            for (std::size_t i = 0; i < nx_; ++i) v[i] -= d * u[i];
          }
        }
        const double n = std::sqrt(dot(v, v));
        if (n > 1e-12) {
          for (double& x : v) x /= n;
          kept.push_back(std::move(v));
        }
      }
      q = std::move(kept);
    };

    // Starting block: low-order polynomials in standardized x plus a
    // point-mass indicator.
    double mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < nx_; ++i) mean += row_[i] * atoms_[i].x;
    for (std::size_t i = 0; i < nx_; ++i) {
      var += row_[i] * (atoms_[i].x - mean) * (atoms_[i].x - mean);
    }
    const double sd = std::sqrt(std::max(var, 1e-300));
    const std::size_t block = std::min<std::size_t>(kAceBlock, nx_ > 1 ? nx_ - 1 : 0);
    if (block == 0) return 0.0;
    std::vector<std::vector<double>> q(block + 1, std::vector<double>(nx_));
    for (std::size_t i = 0; i < nx_; ++i) {
      const double u = (atoms_[i].x - mean) / sd;
      double pw = 1.0;
      for (std::size_t k = 0; k < block; ++k) {
        pw *= u;
        q[k][i] = top[i] * pw / (1.0 + 0.1 * pw * pw);
      }
      q[block][i] = top[i] * (atoms_[i].x == 0.0 ? 1.0 : 0.0);
    }
    orthonormalize(q);
    if (q.empty()) return 0.0;

    std::vector<std::vector<double>> y(q.size(), std::vector<double>(nx_));
    double lambda = -1.0;
    for (int sweep = 0; sweep < kAceMaxSweeps; ++sweep) {
      const std::size_t k = q.size();
      y.resize(k, std::vector<double>(nx_));
      for (std::size_t c = 0; c < k; ++c) apply(q[c], y[c]);
      std::vector<double> h(k * k);
      for (std::size_t r = 0; r < k; ++r) {
        for (std::size_t c = r; c < k; ++c) h[r * k + c] = h[c * k + r] = dot(q[r], y[c]);
      }
      std::vector<double> vecs;
      const std::vector<double> vals = detail::symmetric_eigen(h, k, vecs);
      // Rotate the images onto the Ritz vectors, largest first.
      std::vector<std::vector<double>> next(k, std::vector<double>(nx_, 0.0));
      for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t r = 0; r < k; ++r) {
          const double w = vecs[r * k + c];
          for (std::size_t i = 0; i < nx_; ++i) next[c][i] += w * y[r][i];
        }
      }
      const double prev = lambda;
      lambda = vals[0];
      if (sweep > 2 && std::abs(lambda - prev) < tol) return std::clamp(lambda, 0.0, 1.0);
      q = std::move(next);
      orthonormalize(q);
      if (q.empty()) return 0.0;
    }
    throw NoConvergence("maximal_correlation: subspace iteration stalled after " +
                        std::to_string(kAceMaxSweeps) + " sweeps");
  }

  // var(E[X|Z]) / var(X) for the discrete law.
  double eta_sq_x_given_z() const {
    double mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < nx_; ++i) mean += row_[i] * atoms_[i].x;
    for (std::size_t i = 0; i < nx_; ++i) {
      var += row_[i] * (atoms_[i].x - mean) * (atoms_[i].x - mean);
    }
    double explained = 0.0;
    for (std::size_t j = 0; j < nz_; ++j) {
      if (!(col_[j] > 0.0)) continue;
      double acc = 0.0;
      for (std::size_t i = 0; i < nx_; ++i) acc += p_[i * nz_ + j] * atoms_[i].x;
      const double d = acc / col_[j] - mean;
      explained += col_[j] * d * d;
    }
    return std::min(explained / var, 1.0);
  }

 private:
  double gamma_;
  std::vector<XAtom> atoms_;
  std::size_t nx_ = 0, nz_ = 0;
  std::vector<double> p_, row_, col_;
};

// rho_m^2(X, Z_gamma) and eta^2_Z(X). Jointly Gaussian models use the closed
// form rho^2 gamma var(Y) / (1 + gamma var(Y)) unless cfg.force_numeric. The
// error compares the working grid against one with half the X spacing.
inline DependenceEstimates dependence(const JointModel& m, double gamma,
                                      const NumericsConfig& cfg) {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
    throw std::invalid_argument("gamma must be finite and >= 0");
  }
  if (gamma == 0.0) return {Estimate::closed_form(0.0), Estimate::closed_form(0.0)};
  if (const auto* g = std::get_if<BivariateGaussian>(&m); g && !cfg.force_numeric) {
    const double s = gamma * g->var_y;
    const double v = g->rho * g->rho * s / (1.0 + s);
    return {Estimate::closed_form(v), Estimate::closed_form(v)};
  }
  const AceGrid work(m, gamma, 1.0, cfg);
  const AceGrid fine(m, gamma, 0.5, cfg);
  const double r1 = work.rho_m_sq(cfg.abs_tol);
  const double r2 = fine.rho_m_sq(cfg.abs_tol);
  const double e1 = work.eta_sq_x_given_z();
  const double e2 = fine.eta_sq_x_given_z();
  return {{r2, std::abs(r2 - r1) + cfg.abs_tol, Method::kQuadrature},
          {e2, std::abs(e2 - e1) + 1e-14, Method::kQuadrature}};
}

inline Estimate maximal_correlation(const JointModel& m, double gamma, const NumericsConfig& cfg) {
  return dependence(m, gamma, cfg).rho_m_sq;
}

// rho_m^2(X, Y). Exact for jointly Gaussian pairs (rho^2) and the clipped
// model (1: X determines Y on an event of positive mass). Additive models
// take the limit of rho_m^2(X, Z_gamma), which increases to rho_m^2(X, Y)
// with a gap close to c / gamma; three probes a factor 4 apart give a
// Richardson estimate, and its error is the disagreement between the two
// available extrapolations plus the size of the correction.
inline Estimate maximal_correlation_xy(const JointModel& m, const NumericsConfig& cfg) {
  if (const auto* g = std::get_if<BivariateGaussian>(&m)) {
    return Estimate::closed_form(g->rho * g->rho);
  }
  if (std::holds_alternative<Clipped>(m)) return Estimate::closed_form(1.0);
  const auto& a = std::get<AdditiveNoise>(m);
  if (is_gaussian(a.x) && is_gaussian(a.noise)) {
    const Moments mo = moments(m);
    return Estimate::closed_form(mo.corr * mo.corr);
  }
  const double vy = moments(m).var_y;
  // Non-smooth noise needs an X grid as fine as 1/sqrt(gamma).
  const double first = is_gaussian(a.noise) ? 256.0 : 16.0;
  double r[3];
  double grid_err = 0.0;
  for (int k = 0; k < 3; ++k) {
    const Estimate e = maximal_correlation(m, first * std::pow(4.0, k) / vy, cfg);
    r[k] = e.value;
    grid_err = std::max(grid_err, e.err);
  }
  const double rich_lo = r[1] + (r[1] - r[0]) / 3.0;
  const double rich_hi = r[2] + (r[2] - r[1]) / 3.0;
  const double value = std::min(rich_hi, 1.0);
  return {value, std::abs(rich_hi - rich_lo) + std::abs(rich_hi - r[2]) + grid_err,
          Method::kQuadrature};
}

}  // namespace privfilter
