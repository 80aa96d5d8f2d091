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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <queue>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "privfilter/errors.hpp"

namespace privfilter {

struct NumericsConfig {
  int hermite_order = 64;
  int legendre_order = 32;
  int max_panels = 4096;
  double abs_tol = 1e-8;
  double rel_tol = 1e-6;
  std::int64_t mc_samples = 1'000'000;
  std::uint64_t seed = 0;
  // Bracket growth in bisect_monotone gives up beyond this argument.
  double gamma_cap = 1e12;
  // Skip closed-form shortcuts for jointly Gaussian models.
  bool force_numeric = false;

  void validate() const {
    if (hermite_order < 2) throw std::invalid_argument("hermite_order must be >= 2");
    if (legendre_order < 2) throw std::invalid_argument("legendre_order must be >= 2");
    if (max_panels < 1) throw std::invalid_argument("max_panels must be >= 1");
    if (!(abs_tol > 0.0) || !(rel_tol > 0.0)) {
      throw std::invalid_argument("tolerances must be positive");
    }
    if (mc_samples < 1) throw std::invalid_argument("mc_samples must be >= 1");
  }
};

enum class Method { kQuadrature, kMonteCarlo, kClosedForm };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::kQuadrature:
      return "quadrature";
    case Method::kMonteCarlo:
      return "monte_carlo";
    case Method::kClosedForm:
      return "closed_form";
  }
  return "unknown";
}

// A numerical value with an absolute error estimate and the route it came from.
struct Estimate {
  double value = 0.0;
  double err = 0.0;
  Method method = Method::kQuadrature;

  static Estimate closed_form(double v) { return {v, 0.0, Method::kClosedForm}; }
};

// ---------------------------------------------------------------------------
// Standard normal helpers.

inline constexpr double kSqrt2 = std::numbers::sqrt2;
inline constexpr double kSqrtPi = 1.7724538509055160273;
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;
inline constexpr double kLn2 = std::numbers::ln2;

inline double log_norm_pdf(double x) { return -0.5 * x * x - kLogSqrt2Pi; }
inline double norm_pdf(double x) { return std::exp(log_norm_pdf(x)); }
inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }
inline double norm_sf(double x) { return 0.5 * std::erfc(x / kSqrt2); }

// P(a < G < b) for standard normal G without cancellation in either tail.
inline double norm_interval(double a, double b) {
  if (!(a < b)) return 0.0;
  if (a >= 0.0) return norm_sf(a) - norm_sf(b);
  if (b <= 0.0) return norm_cdf(b) - norm_cdf(a);
  return 1.0 - norm_cdf(a) - norm_sf(b);
}

inline double log_sum_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// ---------------------------------------------------------------------------
// Quadrature rules.

struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
};

namespace detail {

inline Rule compute_gauss_hermite(int n) {
  Rule r;
  r.nodes.assign(n, 0.0);
  r.weights.assign(n, 0.0);
  constexpr double kPiM4 = 0.7511255444649425;  // pi^(-1/4)
  const int m = (n + 1) / 2;
  double z = 0.0;
  for (int i = 0; i < m; ++i) {
    if (i == 0) {
      z = std::sqrt(2.0 * n + 1) - 1.85575 * std::pow(2.0 * n + 1, -0.16667);
    } else if (i == 1) {
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * r.nodes[0];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * r.nodes[1];
    } else {
      z = 2.0 * z - r.nodes[i - 2];
    }
    double pp = 0.0;
    bool converged = false;
    for (int it = 0; it < 100; ++it) {
      double p1 = kPiM4;
      double p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1)) * p2 -
             std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-15 * std::max(1.0, std::abs(z))) {
        converged = true;
        break;
      }
    }
    if (!converged) throw NoConvergence("Gauss-Hermite node iteration");
    r.nodes[i] = z;
    r.nodes[n - 1 - i] = -z;
    r.weights[i] = r.weights[n - 1 - i] = 2.0 / (pp * pp);
  }
  if (n % 2 == 1) r.nodes[m - 1] = 0.0;
  // Ascending order.
  std::reverse(r.nodes.begin(), r.nodes.end());
  std::reverse(r.weights.begin(), r.weights.end());
  return r;
}

inline Rule compute_gauss_legendre(int n) {
  Rule r;
  r.nodes.assign(n, 0.0);
  r.weights.assign(n, 0.0);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0;
      double p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1);
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-16) break;
    }
    r.nodes[i] = -z;
    r.nodes[n - 1 - i] = z;
    r.weights[i] = r.weights[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
  }
  if (n % 2 == 1) r.nodes[m - 1] = 0.0;
  return r;
}

template <class Compute>
const Rule& cached_rule(std::map<int, Rule>& cache, std::mutex& mu, int order,
                        Compute compute) {
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(order);
  if (it == cache.end()) it = cache.emplace(order, compute(order)).first;
  return it->second;
}

}  // namespace detail

// Nodes and weights for \int f(t) exp(-t^2) dt, nodes ascending.
inline const Rule& gauss_hermite(int order) {
  if (order < 2) throw std::invalid_argument("gauss_hermite: order must be >= 2");
  static std::map<int, Rule> cache;
  static std::mutex mu;
  return detail::cached_rule(cache, mu, order, detail::compute_gauss_hermite);
}

// Nodes and weights on [-1, 1], nodes ascending.
inline const Rule& gauss_legendre(int order) {
  if (order < 1) throw std::invalid_argument("gauss_legendre: order must be >= 1");
  static std::map<int, Rule> cache;
  static std::mutex mu;
  return detail::cached_rule(cache, mu, order, detail::compute_gauss_legendre);
}

// Appends a composite Gauss-Legendre rule on [lo, hi] split into `panels`.
inline void append_composite_legendre(Rule& out, double lo, double hi, int panels,
                                      int order) {
  if (!(hi > lo) || panels < 1) return;
  const Rule& gl = gauss_legendre(order);
  const double h = (hi - lo) / panels;
  for (int p = 0; p < panels; ++p) {
    const double a = lo + p * h;
    const double half = 0.5 * h;
    const double mid = a + half;
    for (std::size_t k = 0; k < gl.size(); ++k) {
      out.nodes.push_back(mid + half * gl.nodes[k]);
      out.weights.push_back(half * gl.weights[k]);
    }
  }
}

inline Rule composite_legendre(double lo, double hi, int panels, int order) {
  Rule r;
  append_composite_legendre(r, lo, hi, panels, order);
  return r;
}

// Expectation of f(G) for G ~ N(mean, var) by Gauss-Hermite.
template <class F>
double gaussian_expectation(F&& f, double mean, double var, int order) {
  if (var <= 0.0) return f(mean);
  const Rule& gh = gauss_hermite(order);
  const double scale = std::sqrt(2.0 * var);
  double acc = 0.0;
  for (std::size_t k = 0; k < gh.size(); ++k) {
    acc += gh.weights[k] * f(mean + scale * gh.nodes[k]);
  }
  return acc / kSqrtPi;
}

// ---------------------------------------------------------------------------
// Adaptive integration.

// Globally adaptive composite Gauss-Legendre. Each panel is compared against
// the sum over its two halves; the worst panel is split until the summed
// discrepancy is within max(abs_tol, rel_tol * |value|). The reported err is
// the summed discrepancy of the coarser rule, which bounds the refined value's
// error for integrands the rule resolves.
template <class F>
Estimate adaptive_integrate(F&& f, double lo, double hi, const NumericsConfig& cfg) {
  if (lo == hi) return {0.0, 0.0, Method::kQuadrature};
  if (lo > hi) {
    Estimate e = adaptive_integrate(f, hi, lo, cfg);
    e.value = -e.value;
    return e;
  }
  const Rule& gl = gauss_legendre(cfg.legendre_order);
  auto quad = [&](double a, double b) {
    const double half = 0.5 * (b - a);
    const double mid = a + half;
    double acc = 0.0;
    for (std::size_t k = 0; k < gl.size(); ++k) {
      const double v = f(mid + half * gl.nodes[k]);
      if (!std::isfinite(v)) throw NoConvergence("non-finite integrand");
      acc += gl.weights[k] * v;
    }
    return acc * half;
  };

  struct Panel {
    double a, b, left, right, err;
    bool operator<(const Panel& o) const { return err < o.err; }
  };
  auto make_panel = [&](double a, double b, double whole) {
    const double m = 0.5 * (a + b);
    const double l = quad(a, m);
    const double r = quad(m, b);
    return Panel{a, b, l, r, std::abs(whole - (l + r))};
  };

  std::priority_queue<Panel> heap;
  heap.push(make_panel(lo, hi, quad(lo, hi)));
  double value = heap.top().left + heap.top().right;
  double err = heap.top().err;
  int panels = 1;
  while (err > std::max(cfg.abs_tol, cfg.rel_tol * std::abs(value))) {
    if (std::max(cfg.abs_tol, cfg.rel_tol * std::abs(value)) <
        64.0 * std::numeric_limits<double>::epsilon() * std::abs(value)) {
      throw NoConvergence("adaptive_integrate: tolerance below double-precision resolution");
    }
    if (panels >= cfg.max_panels) {
      throw NoConvergence("adaptive_integrate: max_panels exceeded (err " +
                          std::to_string(err) + ")");
    }
    Panel worst = heap.top();
    heap.pop();
    const double m = 0.5 * (worst.a + worst.b);
    Panel l = make_panel(worst.a, m, worst.left);
    Panel r = make_panel(m, worst.b, worst.right);
    value += (l.left + l.right + r.left + r.right) - (worst.left + worst.right);
    err += l.err + r.err - worst.err;
    heap.push(l);
    heap.push(r);
    ++panels;
  }
  // Resum to shed the drift of the incremental updates.
  value = 0.0;
  err = 0.0;
  while (!heap.empty()) {
    value += heap.top().left + heap.top().right;
    err += heap.top().err;
    heap.pop();
  }
  return {value, err, Method::kQuadrature};
}

// Running integral F(x) = \int_origin^x f. Every evaluation is kept as an
// anchor and the next request integrates only from the nearest one, so a root
// search over F costs little more than one pass over the bracket.
template <class F>
class CumulativeIntegral {
 public:
  CumulativeIntegral(F f, double origin, NumericsConfig cfg)
      : f_(std::move(f)), cfg_(cfg) {
    anchors_.emplace(origin, Estimate{0.0, 0.0, Method::kQuadrature});
  }

  Estimate operator()(double x) {
    auto hit = anchors_.find(x);
    if (hit != anchors_.end()) return hit->second;
    auto upper = anchors_.lower_bound(x);
    auto nearest = upper;
    if (upper == anchors_.end()) {
      nearest = std::prev(upper);
    } else if (upper != anchors_.begin()) {
      auto lower = std::prev(upper);
      if (x - lower->first <= upper->first - x) nearest = lower;
    }
    const Estimate seg = adaptive_integrate(f_, nearest->first, x, cfg_);
    Estimate out{nearest->second.value + seg.value, nearest->second.err + seg.err,
                 Method::kQuadrature};
    anchors_.emplace(x, out);
    return out;
  }

 private:
  F f_;
  NumericsConfig cfg_;
  std::map<double, Estimate> anchors_;
};

// ---------------------------------------------------------------------------
// Monotone root finding.

template <class F, class D>
double bisect_monotone(F&& f, double target, double lo_hint, const NumericsConfig& cfg,
                       D&& slope);

// Solves f(x) = target for continuous increasing f with f(0) <= target. The
// upper bracket is grown geometrically from lo_hint, then the bracket is
// bisected until |f(x) - target| <= abs_tol.
template <class F>
double bisect_monotone(F&& f, double target, double lo_hint, const NumericsConfig& cfg) {
  return bisect_monotone(f, target, lo_hint, cfg, [](double) { return 0.0; });
}

// Same contract; `slope` (the derivative of f, or 0 when unknown) is used for
// safeguarded Newton steps that stay inside the current bracket.
template <class F, class D>
double bisect_monotone(F&& f, double target, double lo_hint, const NumericsConfig& cfg,
                       D&& slope) {
  double lo = 0.0;
  const double f0 = f(lo);
  if (std::abs(f0 - target) <= cfg.abs_tol) return lo;
  if (f0 > target) throw std::invalid_argument("bisect_monotone: f(0) exceeds target");

  double hi = lo_hint > 0.0 ? lo_hint : 1.0;
  double fhi = f(hi);
  double last_x = hi;
  double last_f = fhi;
  while (fhi < target) {
    if (std::abs(fhi - target) <= cfg.abs_tol) return hi;
    lo = hi;
    last_x = hi;
    last_f = fhi;
    hi *= 2.0;
    if (hi > cfg.gamma_cap) {
      throw TargetUnreachable("bisect_monotone: target " + std::to_string(target) +
                              " not reached below cap " + std::to_string(cfg.gamma_cap));
    }
    fhi = f(hi);
    last_x = hi;
    last_f = fhi;
  }
  if (std::abs(fhi - target) <= cfg.abs_tol) return hi;

  double width_before = hi - lo;
  for (int it = 0; it < 400; ++it) {
    double x = 0.5 * (lo + hi);
    const double d = slope(last_x);
    if (d > 0.0 && std::isfinite(d)) {
      const double newton = last_x - (last_f - target) / d;
      if (newton > lo && newton < hi) x = newton;
    }
    // Guarantee geometric shrinkage even when Newton stalls at one end.
    if ((it % 3) == 2 && hi - lo > 0.5 * width_before) x = 0.5 * (lo + hi);
    if (it % 3 == 2) width_before = hi - lo;

    const double fx = f(x);
    last_x = x;
    last_f = fx;
    if (std::abs(fx - target) <= cfg.abs_tol) return x;
    if (fx < target) {
      lo = x;
    } else {
      hi = x;
    }
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, hi)) {
      throw NoConvergence("bisect_monotone: bracket collapsed with |f - target| = " +
                          std::to_string(std::abs(fx - target)));
    }
  }
  throw NoConvergence("bisect_monotone: iteration limit");
}

// ---------------------------------------------------------------------------
// Monte Carlo.

namespace detail {
inline constexpr std::int64_t kMcChunk = 1 << 16;

inline std::mt19937_64 chunk_engine(std::uint64_t seed, std::uint64_t chunk) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chunk),
                    static_cast<std::uint32_t>(chunk >> 32)};
  return std::mt19937_64(seq);
}
}  // namespace detail

// Sample mean of sampler(engine) over cfg.mc_samples draws; err is three
// standard errors. Each chunk of draws has its own engine seeded from
// (seed, chunk), so the result is independent of how chunks are scheduled.
template <class Sampler>
Estimate mc_mean(Sampler&& sampler, const NumericsConfig& cfg) {
  if (cfg.mc_samples < 100) throw std::invalid_argument("mc_mean: need >= 100 samples");
  const std::int64_t n = cfg.mc_samples;
  double mean = 0.0;
  double m2 = 0.0;
  std::int64_t count = 0;
  for (std::int64_t start = 0, chunk = 0; start < n; start += detail::kMcChunk, ++chunk) {
    auto rng = detail::chunk_engine(cfg.seed, static_cast<std::uint64_t>(chunk));
    const std::int64_t stop = std::min(n, start + detail::kMcChunk);
    for (std::int64_t i = start; i < stop; ++i) {
      const double x = sampler(rng);
      ++count;
      const double delta = x - mean;
      mean += delta / static_cast<double>(count);
      m2 += delta * (x - mean);
    }
  }
  const double var = count > 1 ? m2 / static_cast<double>(count - 1) : 0.0;
  return {mean, 3.0 * std::sqrt(var / static_cast<double>(count)), Method::kMonteCarlo};
}

}  // namespace privfilter
