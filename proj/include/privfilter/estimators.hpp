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
/// Estimation- and information-theoretic functionals of a joint model seen
/// through Z = sqrt(gamma) * Y + N. All information quantities are in nats.

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "privfilter/errors.hpp"
#include "privfilter/law.hpp"
#include "privfilter/models.hpp"
#include "privfilter/numerics.hpp"

namespace privfilter {

struct MmsePair {
  Estimate mmse_y_z;   // mmse(Y | Z)
  Estimate mmse_y_zx;  // mmse(Y | Z, X)
  Estimate var2_y_z;   // E[var(Y | Z)^2]
  Estimate var2_y_zx;  // E[var(Y | Z, X)^2]
};

struct InfoPoint {
  double gamma = 0.0;
  Estimate mi_y_z;
  Estimate mi_x_z;
};

inline constexpr double kTwoPiE = 2.0 * std::numbers::pi * std::numbers::e;

// Differential entropy of a Gaussian with variance v, nats.
inline double gaussian_entropy(double v) { return 0.5 * std::log(kTwoPiE * v); }

// Non-Gaussianness D(P || N(mean, var)) of a law with a density, nats.
inline Estimate non_gaussianness(const Law& law, const NumericsConfig& cfg) {
  if (law.is_single_gaussian()) return Estimate::closed_form(0.0);
  const Estimate h = differential_entropy(law, cfg);
  return {gaussian_entropy(law.var()) - h.value, h.err, h.method};
}

inline Estimate non_gaussianness(const ScalarDist& d, const NumericsConfig& cfg) {
  if (is_gaussian(d)) return Estimate::closed_form(0.0);
  return non_gaussianness(to_law(d), cfg);
}

// Evaluates the functionals of one model. Laws are built once at
// construction; every method is const and safe to call concurrently.
class Evaluator {
 public:
  Evaluator(JointModel model, NumericsConfig cfg)
      : model_(std::move(model)), cfg_(cfg) {
    cfg_.validate();
    validate(model_);
    moments_ = moments(model_);
    law_y_ = marginal_y(model_);
    branches_ = cond_branches(model_);
    closed_ = is_bivariate_gaussian(model_) && !cfg_.force_numeric;
  }

  const JointModel& model() const { return model_; }
  const NumericsConfig& config() const { return cfg_; }
  const Moments& moments_xy() const { return moments_; }
  const Law& law_y() const { return law_y_; }
  const std::vector<CondBranch>& branches() const { return branches_; }
  // True when jointly Gaussian answers come from closed forms.
  bool closed_form() const { return closed_; }

  // Variance of Y given X, conditional to the Gaussian branch (closed form).
  double gaussian_cond_var() const {
    const auto& g = std::get<BivariateGaussian>(model_);
    return (1.0 - g.rho * g.rho) * g.var_y;
  }

  // E[var(Y|X)] and E[var(Y|X)^2], exact from the branch structure.
  double mean_cond_var() const {
    double acc = 0.0;
    for (const auto& b : branches_) acc += b.weight * b.base.var();
    return acc;
  }
  double mean_cond_var2() const {
    double acc = 0.0;
    for (const auto& b : branches_) acc += b.weight * b.base.var() * b.base.var();
    return acc;
  }

  // mmse(Y|Z), E[var^2(Y|Z)] and h(Z) at the working quadrature order only.
  ChannelStats stats_y(double gamma) const {
    if (closed_) {
      const double v = moments_.var_y;
      const double m = v / (1.0 + gamma * v);
      return {m, m * m, gaussian_entropy(gamma * v + 1.0), 1.0};
    }
    return channel_stats(law_y_, gamma, z_order(cfg_));
  }
  // The same conditioned on X.
  ChannelStats stats_yx(double gamma) const {
    if (closed_) {
      const double v = gaussian_cond_var();
      const double m = v / (1.0 + gamma * v);
      return {m, m * m, gaussian_entropy(gamma * v + 1.0), 1.0};
    }
    ChannelStats out;
    for (const auto& b : branches_) {
      const ChannelStats s = channel_stats(b.base, gamma, z_order(cfg_));
      out.mmse += b.weight * s.mmse;
      out.var2 += b.weight * s.var2;
      out.entropy_z += b.weight * s.entropy_z;
      out.mass += b.weight * s.mass;
    }
    return out;
  }

  MmsePair mmse_pair(double gamma) const {
    check_gamma(gamma);
    if (closed_) {
      const ChannelStats y = stats_y(gamma);
      const ChannelStats yx = stats_yx(gamma);
      return {Estimate::closed_form(y.mmse), Estimate::closed_form(yx.mmse),
              Estimate::closed_form(y.var2), Estimate::closed_form(yx.var2)};
    }
    const ChannelEstimates y = channel_estimates(law_y_, gamma, cfg_);
    MmsePair out{y.mmse, {0.0, 0.0, Method::kQuadrature}, y.var2, {0.0, 0.0, Method::kQuadrature}};
    for (const auto& b : branches_) {
      const ChannelEstimates s = channel_estimates(b.base, gamma, cfg_);
      out.mmse_y_zx.value += b.weight * s.mmse.value;
      out.mmse_y_zx.err += b.weight * s.mmse.err;
      out.var2_y_zx.value += b.weight * s.var2.value;
      out.var2_y_zx.err += b.weight * s.var2.err;
    }
    return out;
  }

  // I(Y; Z_gamma) = 1/2 \int_0^gamma mmse(Y|Z_t) dt.
  Estimate mi_y_z(double gamma) const {
    check_gamma(gamma);
    if (gamma == 0.0) return Estimate::closed_form(0.0);
    if (closed_) return Estimate::closed_form(0.5 * std::log1p(gamma * moments_.var_y));
    return integrate_info([this](double t) { return 0.5 * stats_y(t).mmse; }, gamma);
  }

  // I(X; Z_gamma) = 1/2 \int_0^gamma [mmse(Y|Z_t) - mmse(Y|Z_t,X)] dt.
  Estimate mi_x_z(double gamma) const {
    check_gamma(gamma);
    if (gamma == 0.0) return Estimate::closed_form(0.0);
    if (closed_) {
      const double v = moments_.var_y;
      return Estimate::closed_form(0.5 * (std::log1p(gamma * v) -
                                          std::log1p(gamma * gaussian_cond_var())));
    }
    return integrate_info([this](double t) { return mi_x_z_rate(t); }, gamma);
  }

  // d I(X;Z_t) / dt.
  double mi_x_z_rate(double t) const { return 0.5 * (stats_y(t).mmse - stats_yx(t).mmse); }

  InfoPoint info(double gamma) const { return {gamma, mi_y_z(gamma), mi_x_z(gamma)}; }

  // info() along an increasing list of gamma, integrating each segment once
  // and accumulating values and errors.
  std::vector<InfoPoint> info_path(const std::vector<double>& gammas) const {
    std::vector<InfoPoint> out;
    out.reserve(gammas.size());
    double prev = 0.0;
    Estimate iy = Estimate::closed_form(0.0), ix = Estimate::closed_form(0.0);
    for (double g : gammas) {
      check_gamma(g);
      if (g < prev) throw std::invalid_argument("info_path: gammas must be increasing");
      if (closed_ || g == 0.0) {
        out.push_back(info(g));
        prev = g;
        continue;
      }
      if (g > prev) {
        const Estimate dy =
            integrate_segment([this](double t) { return 0.5 * stats_y(t).mmse; }, prev, g);
        const Estimate dx = integrate_segment([this](double t) { return mi_x_z_rate(t); }, prev, g);
        iy = {iy.value + dy.value, iy.err + dy.err, Method::kQuadrature};
        ix = {ix.value + dx.value, ix.err + dx.err, Method::kQuadrature};
      }
      const double end = 0.5 * g * channel_estimates(law_y_, g, cfg_).mmse.err;
      out.push_back({g, {iy.value, iy.err + end, Method::kQuadrature},
                     {ix.value, ix.err + end, Method::kQuadrature}});
      prev = g;
    }
    return out;
  }

  // eta^2_X(Y) = var(E[Y|X]) / var(Y) by quadrature of E[Y|X=x] over the law
  // of X. The error compares against the law of total variance.
  Estimate eta_sq() const {
    if (is_bivariate_gaussian(model_)) {
      return Estimate::closed_form(moments_.corr * moments_.corr);
    }
    const auto atoms = x_atoms(model_, 0.25 * std::sqrt(moments_.var_x), 16);
    double mean = 0.0;
    for (const auto& a : atoms) mean += a.weight * cond_mean_y(model_, a.x);
    double var = 0.0;
    for (const auto& a : atoms) {
      const double d = cond_mean_y(model_, a.x) - mean;
      var += a.weight * d * d;
    }
    const double direct = var / moments_.var_y;
    const double by_total_variance = 1.0 - mean_cond_var() / moments_.var_y;
    return {direct, std::abs(direct - by_total_variance) + 1e-15, Method::kQuadrature};
  }

  // Second-order Taylor coefficient of g at 0 (nats).
  Estimate delta_coeff() const {
    const Estimate eta = eta_sq();
    if (!(eta.value > 0.0)) throw DegenerateModel("delta_coeff: eta^2 = 0");
    const double vy = moments_.var_y;
    const double ev2 = mean_cond_var2();
    const double e2 = eta.value;
    const double value = ((vy * vy - ev2) / (vy * vy * e2) - 1.0) / (e2 * e2);
    // d(value)/d(eta^2) scaled by the error on eta^2.
    const double h = std::max(1e-7 * e2, eta.err);
    auto at = [&](double e) { return ((vy * vy - ev2) / (vy * vy * e) - 1.0) / (e * e); };
    const double slope = (at(e2 + h) - at(e2 - h)) / (2.0 * h);
    return {value, std::abs(slope) * eta.err, eta.method};
  }

  // D(Y) in nats.
  Estimate non_gaussianness_y() const {
    if (closed_) return Estimate::closed_form(0.0);
    return non_gaussianness(law_y_, cfg_);
  }

  // h(Z_gamma) and h(Z_gamma | X) in nats.
  Estimate entropy_z(double gamma) const {
    check_gamma(gamma);
    if (closed_) return Estimate::closed_form(gaussian_entropy(gamma * moments_.var_y + 1.0));
    return channel_estimates(law_y_, gamma, cfg_).entropy_z;
  }
  Estimate cond_entropy_z(double gamma) const {
    check_gamma(gamma);
    if (closed_) return Estimate::closed_form(gaussian_entropy(gamma * gaussian_cond_var() + 1.0));
    Estimate out{0.0, 0.0, Method::kQuadrature};
    for (const auto& b : branches_) {
      const Estimate h = channel_estimates(b.base, gamma, cfg_).entropy_z;
      out.value += b.weight * h.value;
      out.err += b.weight * h.err;
    }
    return out;
  }

  // Residual variance of Z given X under the jointly Gaussian surrogate.
  double surrogate_cond_var_z(double gamma) const {
    const double cov = moments_.cov;
    return gamma * moments_.var_y + 1.0 - gamma * cov * cov / moments_.var_x;
  }

  // D(Z_gamma | X): divergence of P_{Z|X} from the surrogate Gaussian
  // conditional, averaged over X.
  Estimate cond_non_gaussianness(double gamma) const {
    check_gamma(gamma);
    if (gamma == 0.0 || closed_) return Estimate::closed_form(0.0);
    const Estimate h = cond_entropy_z(gamma);
    return {gaussian_entropy(surrogate_cond_var_z(gamma)) - h.value, h.err, h.method};
  }

  // D(Z_gamma).
  Estimate non_gaussianness_z(double gamma) const {
    check_gamma(gamma);
    if (gamma == 0.0 || closed_) return Estimate::closed_form(0.0);
    const Estimate h = entropy_z(gamma);
    return {gaussian_entropy(gamma * law_y_.var() + 1.0) - h.value, h.err, h.method};
  }

  // I(X;Z) from the I-MMSE integral minus its decomposition into the
  // Gaussian-surrogate information plus the two non-Gaussianness terms.
  Estimate decomposition_residual(double gamma) const {
    check_gamma(gamma);
    if (gamma == 0.0) return Estimate::closed_form(0.0);
    const Estimate mi = mi_x_z(gamma);
    const double cov = moments_.cov;
    const double var_z = gamma * moments_.var_y + 1.0;
    const double rho_xz_sq = gamma * cov * cov / (moments_.var_x * var_z);
    const double info_gauss = -0.5 * std::log1p(-rho_xz_sq);
    const Estimate dcond = cond_non_gaussianness(gamma);
    const Estimate dz = non_gaussianness_z(gamma);
    const double value = mi.value - (info_gauss + dcond.value - dz.value);
    const bool exact = mi.method == Method::kClosedForm && dcond.method == Method::kClosedForm &&
                       dz.method == Method::kClosedForm;
    const double err = mi.err + dcond.err + dz.err + 1e-12 * (std::abs(mi.value) + 1.0);
    return {value, exact ? 0.0 : err, exact ? Method::kClosedForm : Method::kQuadrature};
  }

  // I(X;Y) in nats; +inf when Y is a function of X on a set of positive mass.
  Estimate mutual_information_xy() const {
    if (const auto* g = std::get_if<BivariateGaussian>(&model_)) {
      return Estimate::closed_form(-0.5 * std::log1p(-g->rho * g->rho));
    }
    if (std::holds_alternative<Clipped>(model_)) return Estimate::closed_form(kInf);
    const auto& a = std::get<AdditiveNoise>(model_);
    const Estimate hy = differential_entropy(law_y_, cfg_);
    const Estimate hm = differential_entropy(to_law(a.noise), cfg_);
    return {hy.value - hm.value, hy.err + hm.err, Method::kQuadrature};
  }

 private:
  static void check_gamma(double gamma) {
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
      throw std::invalid_argument("gamma must be finite and >= 0");
    }
  }

  // The I-MMSE integrands are smooth, decreasing and bounded by var(Y)/2, so
  // the integral's scale is at most gamma * var(Y) / 2; tolerances are taken
  // relative to that scale so small-gamma values keep their relative accuracy.
  template <class F>
  Estimate integrate_segment(F&& rate, double lo, double hi) const {
    NumericsConfig c = cfg_;
    const double scale = 0.5 * (hi - lo) * moments_.var_y;
    c.abs_tol = std::min(cfg_.abs_tol, std::max(1e-3 * cfg_.rel_tol * scale, 1e-300));
    return adaptive_integrate(rate, lo, hi, c);
  }

  template <class F>
  Estimate integrate_info(F&& rate, double gamma) const {
    NumericsConfig c = cfg_;
    const double scale = 0.5 * gamma * moments_.var_y;
    c.abs_tol = std::min(cfg_.abs_tol, std::max(1e-3 * cfg_.rel_tol * scale, 1e-300));
    Estimate e = adaptive_integrate(rate, 0.0, gamma, c);
    // Quadrature error of the z-integrals, bounded through the endpoint.
    const ChannelEstimates end = channel_estimates(law_y_, gamma, cfg_);
    e.err += 0.5 * gamma * end.mmse.err;
    return e;
  }

  JointModel model_;
  NumericsConfig cfg_;
  Moments moments_;
  Law law_y_;
  std::vector<CondBranch> branches_;
  bool closed_ = false;
};

// ---------------------------------------------------------------------------
// Free-function forms.

inline MmsePair mmse_pair(const JointModel& m, double gamma, const NumericsConfig& cfg) {
  return Evaluator(m, cfg).mmse_pair(gamma);
}
inline Estimate mi_y_z(const JointModel& m, double gamma, const NumericsConfig& cfg) {
  return Evaluator(m, cfg).mi_y_z(gamma);
}
inline Estimate mi_x_z(const JointModel& m, double gamma, const NumericsConfig& cfg) {
  return Evaluator(m, cfg).mi_x_z(gamma);
}
inline Estimate eta_sq(const JointModel& m, const NumericsConfig& cfg) {
  return Evaluator(m, cfg).eta_sq();
}
inline Estimate delta_coeff(const JointModel& m, const NumericsConfig& cfg) {
  return Evaluator(m, cfg).delta_coeff();
}
inline Estimate cond_non_gaussianness(const JointModel& m, double gamma,
                                      const NumericsConfig& cfg) {
  return Evaluator(m, cfg).cond_non_gaussianness(gamma);
}
inline Estimate decomposition_residual(const JointModel& m, double gamma,
                                       const NumericsConfig& cfg) {
  return Evaluator(m, cfg).decomposition_residual(gamma);
}

// ---------------------------------------------------------------------------
// Strong data-processing constant.

// Lower bound on S*(Y,X) = sup_Q D(Q_X||P_X) / D(Q_Y||P_Y) over a fixed
// family of perturbations of P_Y: exponential tilts in the standardized
// value and its square, and Gaussian bumps. Q_X is pushed through P_{X|Y}.
// Both divergences are evaluated on one discretization of X, so the
// data-processing inequality holds exactly for the discrete surrogate.
inline Estimate s_star_lower_bound(const JointModel& m, const NumericsConfig& cfg) {
  validate(m);
  if (const auto* g = std::get_if<BivariateGaussian>(&m); g && g->rho == 0.0) {
    return Estimate::closed_form(0.0);
  }
  const Moments mo = moments(m);
  const double mu = mo.mean_y;
  const double sd = std::sqrt(mo.var_y);

  struct Member {
    int kind;  // 0 linear tilt, 1 quadratic tilt, 2 bump
    double a, b;
  };
  std::vector<Member> family;
  for (double t : {0.01, 0.05, 0.1, 0.3, 0.6, 1.0}) {
    family.push_back({0, t, 0});
    family.push_back({0, -t, 0});
  }
  for (double s : {-0.5, -0.2, -0.05, 0.02, 0.05, 0.1, 0.2}) family.push_back({1, s, 0});
  for (double c : {-2.5, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.5}) {
    for (double w : {0.3, 0.7}) family.push_back({2, c, w});
  }
  auto unnormalized = [&](const Member& f, double y) {
    const double u = (y - mu) / sd;
    switch (f.kind) {
      case 0:
        return std::exp(f.a * u);
      case 1:
        return std::exp(f.a * u * u);
      default:
        return 1.0 + std::exp(-0.5 * (u - f.a) * (u - f.a) / (f.b * f.b));
    }
  };

  auto run = [&](double spacing) {
    const auto atoms = x_atoms(m, spacing, 8);
    std::vector<Law> conds;
    conds.reserve(atoms.size());
    for (const auto& a : atoms) conds.push_back(cond_density_y_given_x(m, a.x));
    double best = 0.0;
    for (const Member& f : family) {
      std::vector<double> r(atoms.size());
      double norm = 0.0;
      for (std::size_t i = 0; i < atoms.size(); ++i) {
        r[i] = expectation(conds[i], [&](double y) { return unnormalized(f, y); }, cfg);
        norm += atoms[i].weight * r[i];
      }
      const double log_norm = std::log(norm);
      double dy = 0.0;
      double dx = 0.0;
      for (std::size_t i = 0; i < atoms.size(); ++i) {
        const double ly = expectation(
            conds[i],
            [&](double y) {
              const double l = unnormalized(f, y);
              return l * (std::log(l) - log_norm);
            },
            cfg);
        dy += atoms[i].weight * ly / norm;
        const double ri = r[i] / norm;
        if (ri > 0.0) dx += atoms[i].weight * ri * std::log(ri);
      }
      if (dy > 1e-12) best = std::max(best, dx / dy);
    }
    return best;
  };
  const double base = 0.25 * std::sqrt(mo.var_x);
  const double fine = run(base);
  const double coarse = run(2.0 * base);
  return {fine, std::abs(fine - coarse), Method::kQuadrature};
}

}  // namespace privfilter
