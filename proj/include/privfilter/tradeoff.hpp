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
/// The rate-privacy function g_eps, its derivatives and bounds, the
/// estimation noise-to-signal ratio, and curve sweeps.
///
/// Every eps and g handled here is in nats unless a Units argument says
/// otherwise. g_second and Delta are always in the nats convention; the
/// second derivative in bits is ln 2 times the nats value.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "privfilter/ace.hpp"
#include "privfilter/errors.hpp"
#include "privfilter/estimators.hpp"
#include "privfilter/models.hpp"
#include "privfilter/numerics.hpp"

namespace privfilter {

enum class Units { kNats, kBits };

inline double to_nats(double v, Units u) { return u == Units::kBits ? v * kLn2 : v; }
inline double from_nats(double v, Units u) { return u == Units::kBits ? v / kLn2 : v; }
inline const char* to_string(Units u) { return u == Units::kBits ? "bits" : "nats"; }

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Why a sweep point failed.
enum class Failure { kNone, kEpsOutOfRange, kNoConvergence, kOther };

inline Failure classify(const std::exception& e) {
  if (dynamic_cast<const EpsOutOfRange*>(&e)) return Failure::kEpsOutOfRange;
  if (dynamic_cast<const NoConvergence*>(&e)) return Failure::kNoConvergence;
  return Failure::kOther;
}

struct TradeoffPoint {
  double eps = 0.0;
  double gamma_eps = 0.0;
  Estimate g_eps;
  Estimate g_prime;   // unit-free
  Estimate g_second;  // nats convention
  double taylor2 = 0.0;
  double lower_epi = 0.0;
  double upper_epi = 0.0;
  // eps / eta^2, certified only when Y given X is a Gaussian translate.
  std::optional<double> sdpi_lower;
  // Set when the point could not be computed; the numbers are then NaN.
  std::string error;
  Failure failure = Failure::kNone;
};

struct EnsrPoint {
  double eps = 0.0;
  double gamma_eps = 0.0;
  Estimate ensr;
  double gaussian_upper = 0.0;
  double thm4_lower = kNaN;  // NaN where the bound does not apply
  double linear_lower = kNaN;
  bool constraint_monotone = true;
  std::string error;
  Failure failure = Failure::kNone;
};

enum class EnsrMode { kStrong, kWeak };

struct RatioScan {
  Estimate value;
  std::vector<double> gammas;
  std::vector<double> ratios;
};

// ---------------------------------------------------------------------------

// Solves and evaluates the tradeoff for one model. The model-level constants
// (I(X;Y), eta^2, Delta, D(Y), rho_m^2(X,Y)) are computed once on first use.
class TradeoffSolver {
 public:
  TradeoffSolver(JointModel model, NumericsConfig cfg) : ev_(std::move(model), cfg) {}

  const Evaluator& evaluator() const { return ev_; }
  const JointModel& model() const { return ev_.model(); }
  const NumericsConfig& config() const { return ev_.config(); }

  Estimate info_xy() const { return cached(info_once_, info_, [&] { return ev_.mutual_information_xy(); }); }
  Estimate eta_sq() const { return cached(eta_once_, eta_, [&] { return ev_.eta_sq(); }); }
  Estimate delta() const { return cached(delta_once_, delta_, [&] { return ev_.delta_coeff(); }); }
  Estimate non_gaussianness_y() const {
    return cached(dy_once_, dy_, [&] { return ev_.non_gaussianness_y(); });
  }
  Estimate rho_m_sq_xy() const {
    return cached(rho_once_, rho_, [&] { return maximal_correlation_xy(model(), config()); });
  }

  // Computes the constants a curve sweep needs, so worker threads only read.
  void warm_up() const {
    info_xy();
    eta_sq();
    delta();
    non_gaussianness_y();
  }

  // gamma with I(X; Z_gamma) = eps (nats).
  double gamma_eps(double eps) const { return solve_gamma(eps).gamma; }

  // Second-order approximation eps / eta^2 + Delta eps^2 (nats).
  double taylor(double eps) const {
    const double e2 = eta_sq().value;
    if (!(e2 > 0.0)) throw DegenerateModel("taylor: eta^2 = 0");
    return eps / e2 + delta().value * eps * eps;
  }

  TradeoffPoint g_eps(double eps) const {
    const GammaSolve gs = solve_gamma(eps);
    const double gamma = gs.gamma;
    const double vy = ev_.moments_xy().var_y;
    TradeoffPoint p;
    p.eps = eps;
    p.gamma_eps = gamma;

    const MmsePair mp = ev_.mmse_pair(gamma);
    const double m1 = mp.mmse_y_z.value;
    const double m2 = mp.mmse_y_zx.value;
    const double v1 = mp.var2_y_z.value;
    const double v2 = mp.var2_y_zx.value;
    const double gap = m1 - m2;
    if (!(gap > 0.0)) throw DegenerateModel("g_eps: mmse(Y|Z) equals mmse(Y|Z,X)");
    const bool exact = mp.mmse_y_z.method == Method::kClosedForm;
    const double e1 = mp.mmse_y_z.err;
    const double e2 = mp.mmse_y_zx.err;

    const double gp = m1 / gap;
    // |d gp / d m1| = m2 / gap^2, |d gp / d m2| = m1 / gap^2.
    p.g_prime = {gp, (m2 * e1 + m1 * e2) / (gap * gap), mp.mmse_y_z.method};

    const double num = m2 * v1 - m1 * v2;
    const double gs2 = 2.0 * num / (gap * gap * gap);
    const double num_err = m2 * mp.var2_y_z.err + v1 * e2 + m1 * mp.var2_y_zx.err + v2 * e1;
    p.g_second = {gs2,
                  exact ? 0.0
                        : 2.0 * num_err / std::abs(gap * gap * gap) +
                              3.0 * std::abs(gs2) * (e1 + e2) / gap,
                  mp.mmse_y_z.method};

    if (gamma == 0.0) {
      p.g_eps = {0.0, 0.0, exact ? Method::kClosedForm : Method::kQuadrature};
    } else {
      Estimate g = ev_.mi_y_z(gamma);
      // Mis-hitting the target by r moves g by g' * r.
      g.err += gp * gs.residual;
      p.g_eps = g;
    }
    const double d = non_gaussianness_y().value;
    p.lower_epi = 0.5 * std::log1p(gamma * std::exp(-2.0 * d) * vy);
    p.upper_epi = 0.5 * std::log1p(gamma * vy);
    p.taylor2 = taylor(eps);
    if (has_gaussian_noise(model())) p.sdpi_lower = eps / eta_sq().value;
    return p;
  }

  // Non-Gaussianness lower bounds on M_eps for Gaussian X, in base 2 with g
  // evaluated at the same numeric eps read as bits. Returns NaNs when g is
  // infinite there.
  std::pair<double, double> thm4_bounds(double eps) const {
    if (!has_gaussian_x(model())) {
      throw ModelNotSupported("ensr_thm4_lower: X must be Gaussian");
    }
    const double d_bits = non_gaussianness_y().value / kLn2;
    const double scale = std::exp2(-d_bits);
    const double linear = std::clamp(scale * (1.0 - 2.0 * eps / eta_sq().value), 0.0, 1.0);
    const double eps_nats = eps * kLn2;
    if (!(eps_nats < info_xy().value)) return {kNaN, linear};
    const double g_bits = g_eps(eps_nats).g_eps.value / kLn2;
    return {scale * std::exp2(-2.0 * g_bits), linear};
  }

  EnsrPoint ensr(double eps, EnsrMode mode) const {
    if (!(eps >= 0.0 && eps <= 1.0)) {
      throw EpsOutOfRange("ensr: eps must lie in [0, 1], got " + std::to_string(eps));
    }
    const double vy = ev_.moments_xy().var_y;
    EnsrPoint p;
    p.eps = eps;
    const Estimate rm = rho_m_sq_xy();
    p.gaussian_upper = 1.0 - eps / rm.value;
    if (has_gaussian_x(model())) std::tie(p.thm4_lower, p.linear_lower) = thm4_bounds(eps);

    if (eps == 0.0) {
      p.gamma_eps = 0.0;
      p.ensr = Estimate::closed_form(1.0);
      return p;
    }
    if (const auto* g = std::get_if<BivariateGaussian>(&model()); g && !config().force_numeric) {
      const double r2 = g->rho * g->rho;
      if (eps > r2) {
        throw EpsOutOfRange("ensr: eps exceeds rho_m^2(X,Y) = " + std::to_string(r2));
      }
      p.gamma_eps = eps == r2 ? kInf : eps / (g->var_y * (r2 - eps));
      p.ensr = Estimate::closed_form(1.0 - eps / r2);
      return p;
    }

    const ConstraintSolve cs = solve_constraint(eps, mode);
    p.gamma_eps = cs.gamma;
    p.constraint_monotone = cs.monotone;
    const ChannelEstimates ce = channel_estimates(ev_.law_y(), cs.gamma, config());
    // d mmse / d gamma = -E[var^2(Y|Z)]; the constraint error maps to gamma
    // through the local slope of the constraint curve.
    const double dgamma = cs.slope > 0.0 ? cs.constraint_err / cs.slope : 0.0;
    p.ensr = {ce.mmse.value / vy, (ce.mmse.err + ce.var2.value * dgamma) / vy,
              Method::kQuadrature};
    return p;
  }

 private:
  template <class F>
  static Estimate cached(std::once_flag& flag, std::optional<Estimate>& slot, F&& f) {
    std::call_once(flag, [&] { slot = f(); });
    return *slot;
  }

  struct GammaSolve {
    double gamma;
    double residual;  // |I(X;Z_gamma) - eps| bound, nats
  };

  GammaSolve solve_gamma(double eps) const {
    if (!(eps >= 0.0) || !std::isfinite(eps)) {
      throw EpsOutOfRange("eps must be finite and >= 0, got " + std::to_string(eps));
    }
    if (eps == 0.0) return {0.0, 0.0};
    const double ixy = info_xy().value;
    if (!(eps < ixy)) {
      throw EpsOutOfRange("eps = " + std::to_string(eps) + " nats is not below I(X;Y) = " +
                          std::to_string(ixy) + " nats");
    }
    const double vy = ev_.moments_xy().var_y;
    if (ev_.closed_form()) {
      const auto& g = std::get<BivariateGaussian>(model());
      const double q = std::exp(-2.0 * eps);
      return {-std::expm1(-2.0 * eps) / (vy * (q + g.rho * g.rho - 1.0)), 0.0};
    }
    const NumericsConfig& cfg = config();
    auto rate = [this](double t) { return ev_.mi_x_z_rate(t); };
    CumulativeIntegral<decltype(rate)> info(rate, 0.0, cfg);
    double last_err = 0.0;
    auto f = [&](double g) {
      const Estimate e = info(g);
      last_err = e.err;
      return e.value;
    };
    const double hint = 1.25 * 2.0 * eps / (vy * std::max(eta_sq().value, 1e-6));
    try {
      const double gamma = bisect_monotone(f, eps, hint, cfg, rate);
      const double hit = info(gamma).value;
      return {gamma, std::abs(hit - eps) + last_err};
    } catch (const TargetUnreachable& e) {
      throw EpsOutOfRange(std::string("eps not reachable: ") + e.what());
    }
  }

  struct ConstraintSolve {
    double gamma;
    double constraint_err;
    double slope;
    bool monotone;
  };

  // Largest gamma whose constraint value (rho_m^2 or eta^2 of X given Z)
  // stays at or below eps. The bracket is grown on grids adapted to each
  // probe; the final search runs on one grid built for the upper end so the
  // constraint is continuous in gamma, using the Illinois variant of regula
  // falsi.
  ConstraintSolve solve_constraint(double eps, EnsrMode mode) const {
    const NumericsConfig& cfg = config();
    const double vy = ev_.moments_xy().var_y;
    std::vector<std::pair<double, double>> probes;
    auto measure = [&](double gamma, double spacing_gamma, double resolution) {
      const AceGrid grid(model(), gamma, resolution, cfg, spacing_gamma);
      return mode == EnsrMode::kStrong ? grid.rho_m_sq(0.1 * cfg.abs_tol)
                                       : grid.eta_sq_x_given_z();
    };
    const double cap = 1e6 / vy;
    double lo = 0.0, flo = 0.0;
    double hi = eps / vy, fhi = 0.0;
    for (;;) {
      fhi = measure(hi, hi, 1.0);
      probes.emplace_back(hi, fhi);
      if (fhi >= eps) break;
      lo = hi;
      flo = fhi;
      hi *= 4.0;
      if (hi > cap) {
        throw EpsOutOfRange("ensr: constraint stays below eps = " + std::to_string(eps) +
                            " up to gamma = " + std::to_string(cap));
      }
    }
    const double ref = hi;
    if (lo > 0.0) flo = measure(lo, ref, 1.0);
    const double tol = std::max(cfg.abs_tol, 1e-10);
    double x = hi, fx = fhi;
    int side = 0;
    for (int it = 0; it < 200; ++it) {
      if (hi - lo <= 1e-10 * hi) break;
      x = (lo * (fhi - eps) - hi * (flo - eps)) / (fhi - flo);
      if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);
      fx = measure(x, ref, 1.0);
      probes.emplace_back(x, fx);
      if (std::abs(fx - eps) <= tol) break;
      if (fx < eps) {
        lo = x;
        flo = fx;
        if (side == -1) fhi = eps + 0.5 * (fhi - eps);
        side = -1;
      } else {
        hi = x;
        fhi = fx;
        if (side == 1) flo = eps + 0.5 * (flo - eps);
        side = 1;
      }
    }
    // Keep the feasible side.
    if (fx > eps + tol) {
      x = lo;
    }
    const double fine = measure(x, ref, 0.5);
    const double work = measure(x, ref, 1.0);
    std::sort(probes.begin(), probes.end());
    bool monotone = true;
    for (std::size_t k = 1; k < probes.size(); ++k) {
      if (probes[k].second < probes[k - 1].second - 1e-7) monotone = false;
    }
    double slope = 0.0;
    {
      const double h = std::max(1e-4 * x, 1e-8);
      slope = (measure(x + h, ref, 1.0) - measure(std::max(x - h, 0.0), ref, 1.0)) /
              (x + h - std::max(x - h, 0.0));
    }
    return {x, std::abs(fine - work) + std::abs(work - eps), slope, monotone};
  }

  Evaluator ev_;
  mutable std::once_flag info_once_, eta_once_, delta_once_, dy_once_, rho_once_;
  mutable std::optional<Estimate> info_, eta_, delta_, dy_, rho_;
};

// ---------------------------------------------------------------------------
// Free-function forms.

inline double gamma_eps(const JointModel& m, double eps_nats, const NumericsConfig& cfg) {
  return TradeoffSolver(m, cfg).gamma_eps(eps_nats);
}

inline TradeoffPoint g_eps(const JointModel& m, double eps_nats, const NumericsConfig& cfg) {
  return TradeoffSolver(m, cfg).g_eps(eps_nats);
}

inline double taylor_g_eps(const JointModel& m, double eps_nats, const NumericsConfig& cfg) {
  return TradeoffSolver(m, cfg).taylor(eps_nats);
}

inline EnsrPoint ensr(const JointModel& m, double eps, EnsrMode mode, const NumericsConfig& cfg) {
  return TradeoffSolver(m, cfg).ensr(eps, mode);
}

inline std::pair<double, double> ensr_thm4_lower(const JointModel& m, double eps,
                                                 const NumericsConfig& cfg) {
  return TradeoffSolver(m, cfg).thm4_bounds(eps);
}

namespace detail {

inline void require_gaussian_noise(const JointModel& m, const char* what) {
  if (!has_gaussian_noise(m)) {
    throw ModelNotSupported(std::string(what) + ": needs Y = aX + Gaussian noise");
  }
}

inline std::vector<double> log_grid(double lo, double hi, int per_decade) {
  std::vector<double> out;
  const int n = static_cast<int>(std::round(std::log10(hi / lo) * per_decade));
  for (int k = 0; k <= n; ++k) out.push_back(lo * std::pow(10.0, static_cast<double>(k) / per_decade));
  return out;
}

}  // namespace detail

// sup_gamma I(X;Z_gamma) / I(Y;Z_gamma). The ratio is largest as gamma -> 0,
// so the scan runs over a log grid from 1e-3 and the two smallest points are
// extrapolated linearly to gamma = 0; the error is the gap to the second
// extrapolation from the next pair.
inline RatioScan sdpi_ratio_sup(const JointModel& m, const NumericsConfig& cfg) {
  detail::require_gaussian_noise(m, "sdpi_ratio_sup");
  const Evaluator ev(m, cfg);
  const double vy = ev.moments_xy().var_y;
  RatioScan out;
  out.gammas = detail::log_grid(1e-3 / vy, 1e2 / vy, 4);
  double quad_err = 0.0;
  for (const InfoPoint& p : ev.info_path(out.gammas)) {
    const Estimate& ix = p.mi_x_z;
    const Estimate& iy = p.mi_y_z;
    out.ratios.push_back(ix.value / iy.value);
    quad_err = std::max(quad_err, (ix.err + out.ratios.back() * iy.err) / iy.value);
  }
  const auto& gm = out.gammas;
  const auto& r = out.ratios;
  auto extrapolate = [&](std::size_t i) {
    return r[i] + (r[i] - r[i + 1]) * gm[i] / (gm[i + 1] - gm[i]);
  };
  const double r0 = extrapolate(0);
  const double r1 = extrapolate(1);
  const double grid_max = *std::max_element(r.begin(), r.end());
  out.value = {std::max(r0, grid_max), std::abs(r0 - r1) + quad_err, Method::kQuadrature};
  return out;
}

// inf_gamma mmse(Y|Z_gamma,X) / mmse(Y|Z_gamma) over a grid that includes
// gamma = 0, where the ratio is E[var(Y|X)] / var(Y) exactly.
inline RatioScan mmse_ratio_inf(const JointModel& m, const NumericsConfig& cfg) {
  detail::require_gaussian_noise(m, "mmse_ratio_inf");
  const Evaluator ev(m, cfg);
  const double vy = ev.moments_xy().var_y;
  RatioScan out;
  out.gammas = {0.0};
  for (double g : detail::log_grid(1e-3 / vy, 1e2 / vy, 4)) out.gammas.push_back(g);
  double best = kInf, best_err = 0.0;
  for (double g : out.gammas) {
    const MmsePair mp = ev.mmse_pair(g);
    const double ratio = mp.mmse_y_zx.value / mp.mmse_y_z.value;
    out.ratios.push_back(ratio);
    if (ratio < best) {
      best = ratio;
      best_err = (mp.mmse_y_zx.err + ratio * mp.mmse_y_z.err) / mp.mmse_y_z.value;
    }
  }
  out.value = {best, best_err, Method::kQuadrature};
  return out;
}

// ---------------------------------------------------------------------------
// Sweeps.

// Worker count: PRIVFILTER_THREADS if set, otherwise the hardware count.
inline unsigned worker_count() {
  if (const char* env = std::getenv("PRIVFILTER_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs fn(i) for i in [0, n) on up to worker_count() threads. Each index is
// written by exactly one call, so results do not depend on scheduling.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(worker_count(), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

inline TradeoffPoint failed_point(double eps, const std::exception& why) {
  TradeoffPoint p;
  p.eps = eps;
  p.gamma_eps = kNaN;
  p.g_eps = p.g_prime = p.g_second = {kNaN, kNaN, Method::kQuadrature};
  p.taylor2 = p.lower_epi = p.upper_epi = kNaN;
  p.error = why.what();
  p.failure = classify(why);
  return p;
}

// g_eps over a grid given in `units`; eps, g, its error, taylor2 and the
// epi bounds of each returned point are in the same units. A point that
// fails carries the message in `error` and the sweep continues.
inline std::vector<TradeoffPoint> rate_privacy_curve(const TradeoffSolver& solver,
                                                     const std::vector<double>& eps_grid,
                                                     Units units) {
  std::vector<TradeoffPoint> out(eps_grid.size());
  if (eps_grid.empty()) return out;
  solver.warm_up();
  parallel_for(eps_grid.size(), [&](std::size_t i) {
    const double eps = eps_grid[i];
    try {
      TradeoffPoint p = solver.g_eps(to_nats(eps, units));
      p.eps = eps;
      p.g_eps.value = from_nats(p.g_eps.value, units);
      p.g_eps.err = from_nats(p.g_eps.err, units);
      p.taylor2 = from_nats(p.taylor2, units);
      p.lower_epi = from_nats(p.lower_epi, units);
      p.upper_epi = from_nats(p.upper_epi, units);
      if (p.sdpi_lower) p.sdpi_lower = from_nats(*p.sdpi_lower, units);
      out[i] = p;
    } catch (const std::exception& e) {
      out[i] = failed_point(eps, e);
    }
  });
  return out;
}

inline std::vector<TradeoffPoint> rate_privacy_curve(const JointModel& m,
                                                     const std::vector<double>& eps_grid,
                                                     Units units, const NumericsConfig& cfg) {
  return rate_privacy_curve(TradeoffSolver(m, cfg), eps_grid, units);
}

// ENSR over a grid of constraint levels; per-point failures are recorded.
inline std::vector<EnsrPoint> ensr_curve(const TradeoffSolver& solver,
                                         const std::vector<double>& eps_grid, EnsrMode mode) {
  std::vector<EnsrPoint> out(eps_grid.size());
  if (eps_grid.empty()) return out;
  solver.warm_up();
  solver.rho_m_sq_xy();
  parallel_for(eps_grid.size(), [&](std::size_t i) {
    try {
      out[i] = solver.ensr(eps_grid[i], mode);
    } catch (const std::exception& e) {
      EnsrPoint p;
      p.eps = eps_grid[i];
      p.gamma_eps = p.gaussian_upper = kNaN;
      p.ensr = {kNaN, kNaN, Method::kQuadrature};
      p.error = e.what();
      p.failure = classify(e);
      out[i] = p;
    }
  });
  return out;
}

}  // namespace privfilter
