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
/// Joint source models (X, Y): exact moments, conditional laws of Y given X,
/// the marginal law of Y, discretizations of X, samplers and the text format
/// used to specify a model.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "privfilter/errors.hpp"
#include "privfilter/law.hpp"
#include "privfilter/numerics.hpp"

namespace privfilter {

// ---------------------------------------------------------------------------
// Scalar distributions.

struct GaussianDist {
  double mean = 0.0;
  double var = 1.0;
};

struct UniformDist {
  double lo = 0.0;
  double hi = 1.0;
};

// Piecewise-linear density through (points[i], pdf[i]).
struct GridDist {
  std::vector<double> points;
  std::vector<double> pdf;
};

using ScalarDist = std::variant<GaussianDist, UniformDist, GridDist>;

inline double grid_trapezoid(const GridDist& g) {
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < g.points.size(); ++i) {
    acc += 0.5 * (g.pdf[i] + g.pdf[i + 1]) * (g.points[i + 1] - g.points[i]);
  }
  return acc;
}

inline void validate(const ScalarDist& d) {
  if (const auto* g = std::get_if<GaussianDist>(&d)) {
    if (!std::isfinite(g->mean)) throw std::invalid_argument("gaussian mean must be finite");
    if (!(g->var > 0.0) || !std::isfinite(g->var)) {
      throw std::invalid_argument("gaussian var must be > 0");
    }
  } else if (const auto* u = std::get_if<UniformDist>(&d)) {
    if (!(u->hi > u->lo) || !std::isfinite(u->lo) || !std::isfinite(u->hi)) {
      throw std::invalid_argument("uniform needs lo < hi");
    }
  } else {
    const auto& g = std::get<GridDist>(d);
    if (g.points.size() < 2 || g.points.size() != g.pdf.size()) {
      throw std::invalid_argument("grid needs >= 2 points and matching pdf values");
    }
    for (std::size_t i = 0; i < g.points.size(); ++i) {
      if (!std::isfinite(g.points[i]) || !(g.pdf[i] >= 0.0) || !std::isfinite(g.pdf[i])) {
        throw std::invalid_argument("grid values must be finite and pdf nonnegative");
      }
      if (i > 0 && !(g.points[i] > g.points[i - 1])) {
        throw std::invalid_argument("grid points must be strictly increasing");
      }
    }
    const double mass = grid_trapezoid(g);
    if (std::abs(mass - 1.0) > 1e-10) {
      throw std::invalid_argument("grid pdf integrates to " + std::to_string(mass) +
                                  ", expected 1");
    }
  }
}

inline bool is_gaussian(const ScalarDist& d) { return std::holds_alternative<GaussianDist>(d); }

inline Law to_law(const ScalarDist& d) {
  if (const auto* g = std::get_if<GaussianDist>(&d)) return Law::gaussian(g->mean, g->var);
  if (const auto* u = std::get_if<UniformDist>(&d)) return Law::uniform(u->lo, u->hi);
  const auto& g = std::get<GridDist>(d);
  return Law::grid(g.points, g.pdf);
}

inline double mean(const ScalarDist& d) {
  if (const auto* g = std::get_if<GaussianDist>(&d)) return g->mean;
  if (const auto* u = std::get_if<UniformDist>(&d)) return 0.5 * (u->lo + u->hi);
  return to_law(d).mean();
}

inline double variance(const ScalarDist& d) {
  if (const auto* g = std::get_if<GaussianDist>(&d)) return g->var;
  if (const auto* u = std::get_if<UniformDist>(&d)) {
    const double w = u->hi - u->lo;
    return w * w / 12.0;
  }
  return to_law(d).var();
}

inline double pdf(const ScalarDist& d, double x) { return to_law(d).pdf(x); }

// Support of a distribution; Gaussians report +-inf.
inline std::pair<double, double> support(const ScalarDist& d) {
  if (std::holds_alternative<GaussianDist>(d)) return {kNegInf, kInf};
  if (const auto* u = std::get_if<UniformDist>(&d)) return {u->lo, u->hi};
  const auto& g = std::get<GridDist>(d);
  return {g.points.front(), g.points.back()};
}

// One draw. Grid cells are selected by mass and inverted exactly within the
// cell (the cdf is quadratic there).
template <class Rng>
double draw(const ScalarDist& d, Rng& rng) {
  if (const auto* g = std::get_if<GaussianDist>(&d)) {
    std::normal_distribution<double> n(g->mean, std::sqrt(g->var));
    return n(rng);
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (const auto* u = std::get_if<UniformDist>(&d)) {
    return u->lo + (u->hi - u->lo) * unit(rng);
  }
  const auto& g = std::get<GridDist>(d);
  double target = unit(rng);
  const std::size_t cells = g.points.size() - 1;
  for (std::size_t i = 0; i < cells; ++i) {
    const double h = g.points[i + 1] - g.points[i];
    const double mass = 0.5 * (g.pdf[i] + g.pdf[i + 1]) * h;
    if (target > mass && i + 1 < cells) {
      target -= mass;
      continue;
    }
    // Solve p0 t + (p1 - p0) t^2 / (2h) = target for t in [0, h].
    const double p0 = g.pdf[i];
    const double slope = (g.pdf[i + 1] - p0) / h;
    target = std::min(target, mass);
    double t;
    if (std::abs(slope) * h < 1e-12 * std::max(p0, 1e-300)) {
      t = p0 > 0.0 ? target / p0 : 0.5 * h;
    } else {
      const double disc = std::max(0.0, p0 * p0 + 2.0 * slope * target);
      t = 2.0 * target / (p0 + std::sqrt(disc));
    }
    return g.points[i] + std::clamp(t, 0.0, h);
  }
  return g.points.back();
}

// ---------------------------------------------------------------------------
// Joint models.

struct BivariateGaussian {
  double mean_x = 0.0;
  double mean_y = 0.0;
  double var_x = 1.0;
  double var_y = 1.0;
  double rho = 0.0;
};

// Y = a X + M with M independent of X.
struct AdditiveNoise {
  ScalarDist x = GaussianDist{};
  double a = 1.0;
  ScalarDist noise = GaussianDist{};
};

// X = Y when |Y| <= threshold, X = 0 otherwise. Y is a centred Gaussian.
struct Clipped {
  ScalarDist y = GaussianDist{};
  double threshold = 1.0;
};

using JointModel = std::variant<BivariateGaussian, AdditiveNoise, Clipped>;

inline void validate(const JointModel& m) {
  if (const auto* g = std::get_if<BivariateGaussian>(&m)) {
    if (!std::isfinite(g->mean_x) || !std::isfinite(g->mean_y)) {
      throw std::invalid_argument("means must be finite");
    }
    if (!(g->var_x > 0.0) || !(g->var_y > 0.0)) {
      throw std::invalid_argument("var_x and var_y must be > 0");
    }
    if (!(g->rho > -1.0 && g->rho < 1.0)) throw std::invalid_argument("rho must lie in (-1, 1)");
  } else if (const auto* a = std::get_if<AdditiveNoise>(&m)) {
    validate(a->x);
    validate(a->noise);
    if (!(a->a != 0.0) || !std::isfinite(a->a)) throw std::invalid_argument("a must be nonzero");
  } else {
    const auto& c = std::get<Clipped>(m);
    const auto* g = std::get_if<GaussianDist>(&c.y);
    if (g == nullptr || g->mean != 0.0) {
      throw ModelNotSupported("clipped model needs a centred Gaussian Y");
    }
    validate(c.y);
    if (!(c.threshold > 0.0) || !std::isfinite(c.threshold)) {
      throw std::invalid_argument("threshold L must be > 0");
    }
    const double tail = 2.0 * norm_sf(c.threshold / std::sqrt(g->var));
    if (!(tail > 0.0 && tail < 1.0)) throw DegenerateModel("P(|Y| <= L) must lie in (0, 1)");
  }
}

inline const char* kind_name(const JointModel& m) {
  switch (m.index()) {
    case 0:
      return "gaussian";
    case 1:
      return "additive";
    default:
      return "clipped";
  }
}

inline bool is_bivariate_gaussian(const JointModel& m) {
  return std::holds_alternative<BivariateGaussian>(m);
}

// True when Y given X has a Gaussian law of constant variance, i.e.
// Gaussian noise on top of a*X.
inline bool has_gaussian_noise(const JointModel& m) {
  if (is_bivariate_gaussian(m)) return true;
  const auto* a = std::get_if<AdditiveNoise>(&m);
  return a != nullptr && is_gaussian(a->noise);
}

// True when X is Gaussian.
inline bool has_gaussian_x(const JointModel& m) {
  if (is_bivariate_gaussian(m)) return true;
  const auto* a = std::get_if<AdditiveNoise>(&m);
  return a != nullptr && is_gaussian(a->x);
}

struct Moments {
  double mean_x = 0.0;
  double mean_y = 0.0;
  double var_x = 0.0;
  double var_y = 0.0;
  double corr = 0.0;
  double cov = 0.0;
};

namespace detail {

// Clipped model constants for Y ~ N(0, s^2) and threshold L.
struct ClipConstants {
  double sd;         // s
  double tail;       // P(|Y| > L)
  double inner_var;  // E[Y^2 ; |Y| <= L]
  double tail_m2;    // E[Y^2 | |Y| > L]
};

inline ClipConstants clip_constants(const Clipped& c) {
  const double s = std::sqrt(std::get<GaussianDist>(c.y).var);
  const double t = c.threshold / s;
  const double tail = 2.0 * norm_sf(t);
  const double inner = s * s * (norm_interval(-t, t) - 2.0 * t * norm_pdf(t));
  return {s, tail, inner, s * s * (1.0 + 2.0 * t * norm_pdf(t) / tail)};
}

}  // namespace detail

inline Moments moments(const JointModel& m) {
  Moments out;
  if (const auto* g = std::get_if<BivariateGaussian>(&m)) {
    out = {g->mean_x, g->mean_y, g->var_x, g->var_y, g->rho,
           g->rho * std::sqrt(g->var_x * g->var_y)};
  } else if (const auto* a = std::get_if<AdditiveNoise>(&m)) {
    const double vx = variance(a->x);
    const double vm = variance(a->noise);
    out.mean_x = mean(a->x);
    out.mean_y = a->a * out.mean_x + mean(a->noise);
    out.var_x = vx;
    out.var_y = a->a * a->a * vx + vm;
    out.cov = a->a * vx;
  } else {
    const auto& c = std::get<Clipped>(m);
    const auto k = detail::clip_constants(c);
    out.mean_x = 0.0;
    out.mean_y = 0.0;
    out.var_x = k.inner_var;
    out.var_y = k.sd * k.sd;
    out.cov = k.inner_var;  // E[XY] = E[X^2]
  }
  if (!(out.var_x > 0.0) || !(out.var_y > 0.0)) {
    throw DegenerateModel("moments: zero variance");
  }
  if (!is_bivariate_gaussian(m)) {
    out.corr = std::clamp(out.cov / std::sqrt(out.var_x * out.var_y), -1.0, 1.0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Conditional structure.

// Law of Y given X = x.
inline Law cond_density_y_given_x(const JointModel& m, double x) {
  if (const auto* g = std::get_if<BivariateGaussian>(&m)) {
    const double slope = g->rho * std::sqrt(g->var_y / g->var_x);
    return Law::gaussian(g->mean_y + slope * (x - g->mean_x), (1.0 - g->rho * g->rho) * g->var_y);
  }
  if (const auto* a = std::get_if<AdditiveNoise>(&m)) {
    const auto [lo, hi] = support(a->x);
    if (x < lo || x > hi || !std::isfinite(x)) {
      throw UnsupportedPoint("x = " + std::to_string(x) + " outside the support of X");
    }
    return to_law(a->noise).shifted(a->a * x);
  }
  const auto& c = std::get<Clipped>(m);
  if (x == 0.0) {
    return Law::gaussian_tails(0.0, std::get<GaussianDist>(c.y).var, c.threshold);
  }
  if (std::abs(x) <= c.threshold) return Law::point(x);
  throw UnsupportedPoint("x = " + std::to_string(x) + " outside the support of X");
}

// E[Y | X = x].
inline double cond_mean_y(const JointModel& m, double x) {
  if (const auto* g = std::get_if<BivariateGaussian>(&m)) {
    return g->mean_y + g->rho * std::sqrt(g->var_y / g->var_x) * (x - g->mean_x);
  }
  if (const auto* a = std::get_if<AdditiveNoise>(&m)) return a->a * x + mean(a->noise);
  return x;  // the tail of a centred Gaussian has mean zero
}

// Y given X, grouped into branches within which the conditional law is a
// translate of one base law. Translation leaves every posterior-variance and
// entropy functional unchanged, so mmse(Y|Z,X) and h(Z|X) are weighted sums
// over the branches.
struct CondBranch {
  double weight;
  Law base;
};

inline std::vector<CondBranch> cond_branches(const JointModel& m) {
  if (const auto* g = std::get_if<BivariateGaussian>(&m)) {
    return {{1.0, Law::gaussian(0.0, (1.0 - g->rho * g->rho) * g->var_y)}};
  }
  if (const auto* a = std::get_if<AdditiveNoise>(&m)) return {{1.0, to_law(a->noise)}};
  const auto& c = std::get<Clipped>(m);
  const auto k = detail::clip_constants(c);
  return {{1.0 - k.tail, Law::point(0.0)},
          {k.tail, Law::gaussian_tails(0.0, k.sd * k.sd, c.threshold)}};
}

// Weighted points representing the law of X.
struct XAtom {
  double weight;
  double x;
};

namespace detail {

// Composite Gauss-Legendre nodes of a density on [lo, hi], panels no wider
// than `spacing`, weights multiplied by the density.
template <class Pdf>
void append_density_atoms(std::vector<XAtom>& out, Pdf&& p, double lo, double hi,
                          double spacing, int order, double scale = 1.0) {
  const int panels = std::clamp(static_cast<int>(std::ceil((hi - lo) / spacing)), 1, 100000);
  const Rule r = composite_legendre(lo, hi, panels, order);
  for (std::size_t k = 0; k < r.size(); ++k) {
    const double w = r.weights[k] * p(r.nodes[k]) * scale;
    if (w > 0.0) out.push_back({w, r.nodes[k]});
  }
}

inline void append_dist_atoms(std::vector<XAtom>& out, const ScalarDist& d, double spacing,
                              int order) {
  if (const auto* g = std::get_if<GaussianDist>(&d)) {
    const double s = std::sqrt(g->var);
    append_density_atoms(
        out, [&](double x) { return norm_pdf((x - g->mean) / s) / s; }, g->mean - 9.5 * s,
        g->mean + 9.5 * s, spacing, order);
    return;
  }
  if (const auto* u = std::get_if<UniformDist>(&d)) {
    append_density_atoms(
        out, [&](double) { return 1.0 / (u->hi - u->lo); }, u->lo, u->hi, spacing, order);
    return;
  }
  // Cells narrower than `spacing` get proportionally fewer nodes; two nodes
  // already reproduce the mass, mean and variance of a linear cell exactly.
  const auto& g = std::get<GridDist>(d);
  for (std::size_t i = 0; i + 1 < g.points.size(); ++i) {
    const double x0 = g.points[i];
    const double h = g.points[i + 1] - x0;
    const double p0 = g.pdf[i];
    const double p1 = g.pdf[i + 1];
    if (p0 == 0.0 && p1 == 0.0) continue;
    const int cell_order =
        h >= spacing ? order : std::clamp(static_cast<int>(std::ceil(order * h / spacing)), 2, order);
    append_density_atoms(
        out, [&](double x) { return p0 + (p1 - p0) * (x - x0) / h; }, x0, x0 + h, spacing,
        cell_order);
  }
}

inline void normalize_atoms(std::vector<XAtom>& atoms) {
  double total = 0.0;
  for (const auto& a : atoms) total += a.weight;
  for (auto& a : atoms) a.weight /= total;
}

}  // namespace detail

// Discretization of a scalar law with panels no wider than `spacing`.
inline std::vector<XAtom> dist_atoms(const ScalarDist& d, double spacing, int order = 8) {
  std::vector<XAtom> out;
  detail::append_dist_atoms(out, d, spacing, order);
  detail::normalize_atoms(out);
  return out;
}

// Discretization of the law of X. Clipped models keep the atom at 0 exactly.
inline std::vector<XAtom> x_atoms(const JointModel& m, double spacing, int order = 8) {
  std::vector<XAtom> out;
  if (const auto* g = std::get_if<BivariateGaussian>(&m)) {
    detail::append_dist_atoms(out, GaussianDist{g->mean_x, g->var_x}, spacing, order);
  } else if (const auto* a = std::get_if<AdditiveNoise>(&m)) {
    detail::append_dist_atoms(out, a->x, spacing, order);
  } else {
    const auto& c = std::get<Clipped>(m);
    const auto k = detail::clip_constants(c);
    out.push_back({k.tail, 0.0});
    detail::append_density_atoms(
        out, [&](double x) { return norm_pdf(x / k.sd) / k.sd; }, -c.threshold, c.threshold,
        spacing, order);
    // Renormalize the continuous part to its exact mass.
    double cont = 0.0;
    for (std::size_t i = 1; i < out.size(); ++i) cont += out[i].weight;
    for (std::size_t i = 1; i < out.size(); ++i) out[i].weight *= (1.0 - k.tail) / cont;
    return out;
  }
  detail::normalize_atoms(out);
  return out;
}

// Slope of E[Y|X=x] in x, the factor that maps X-resolution onto Y.
inline double x_to_y_scale(const JointModel& m) {
  if (const auto* g = std::get_if<BivariateGaussian>(&m)) {
    return std::max(std::abs(g->rho) * std::sqrt(g->var_y / g->var_x), 1e-12);
  }
  if (const auto* a = std::get_if<AdditiveNoise>(&m)) return std::abs(a->a);
  return 1.0;
}

// Marginal law of Y. Exact for Gaussian and clipped models; additive models
// with one non-Gaussian factor become a Gaussian mixture over quadrature
// nodes of the non-Gaussian factor, resolved finely relative to the Gaussian
// factor's width.
inline Law marginal_y(const JointModel& m) {
  if (const auto* g = std::get_if<BivariateGaussian>(&m)) return Law::gaussian(g->mean_y, g->var_y);
  if (const auto* c = std::get_if<Clipped>(&m)) {
    const auto& y = std::get<GaussianDist>(c->y);
    return Law::gaussian(y.mean, y.var);
  }
  const auto& a = std::get<AdditiveNoise>(m);
  const double aa = std::abs(a.a);
  if (is_gaussian(a.x) && is_gaussian(a.noise)) {
    const auto& x = std::get<GaussianDist>(a.x);
    const auto& n = std::get<GaussianDist>(a.noise);
    return Law::gaussian(a.a * x.mean + n.mean, a.a * a.a * x.var + n.var);
  }
  Law out;
  if (is_gaussian(a.noise)) {
    const auto& n = std::get<GaussianDist>(a.noise);
    for (const XAtom& at : dist_atoms(a.x, 0.5 * std::sqrt(n.var) / aa)) {
      out.add(at.weight, Kernel::gaussian(a.a * at.x + n.mean, n.var));
    }
    return out;
  }
  if (is_gaussian(a.x)) {
    const auto& x = std::get<GaussianDist>(a.x);
    const double kernel_var = a.a * a.a * x.var;
    for (const XAtom& at : dist_atoms(a.noise, 0.5 * std::sqrt(kernel_var))) {
      out.add(at.weight, Kernel::gaussian(a.a * x.mean + at.x, kernel_var));
    }
    return out;
  }
  throw ModelNotSupported("additive model needs a Gaussian X or Gaussian noise");
}

// ---------------------------------------------------------------------------
// Sampling.

struct XYSample {
  double x;
  double y;
};

namespace detail {

template <class Rng>
XYSample draw_pair(const JointModel& m, Rng& rng) {
  if (const auto* g = std::get_if<BivariateGaussian>(&m)) {
    std::normal_distribution<double> n(0.0, 1.0);
    const double u = n(rng);
    const double v = n(rng);
    const double x = g->mean_x + std::sqrt(g->var_x) * u;
    const double y =
        g->mean_y + std::sqrt(g->var_y) * (g->rho * u + std::sqrt(1.0 - g->rho * g->rho) * v);
    return {x, y};
  }
  if (const auto* a = std::get_if<AdditiveNoise>(&m)) {
    const double x = draw(a->x, rng);
    return {x, a->a * x + draw(a->noise, rng)};
  }
  const auto& c = std::get<Clipped>(m);
  const double y = draw(c.y, rng);
  return {std::abs(y) <= c.threshold ? y : 0.0, y};
}

}  // namespace detail

// n i.i.d. pairs. Chunk k of the output always comes from the engine seeded
// with (seed, k), so the result does not depend on how chunks are scheduled.
inline std::vector<XYSample> sample(const JointModel& m, std::int64_t n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
  std::vector<XYSample> out(static_cast<std::size_t>(n));
  for (std::int64_t start = 0, chunk = 0; start < n; start += detail::kMcChunk, ++chunk) {
    auto rng = detail::chunk_engine(seed, static_cast<std::uint64_t>(chunk));
    const std::int64_t stop = std::min(n, start + detail::kMcChunk);
    for (std::int64_t i = start; i < stop; ++i) {
      out[static_cast<std::size_t>(i)] = detail::draw_pair(m, rng);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Text format.
//
//   kind=gaussian rho=0.5 [mean_x= mean_y= var_x= var_y=]
//   kind=additive [a=1] x=DIST noise=DIST
//   kind=clipped [L=1] [var_y=1]
//
// DIST is gaussian:MEAN,VAR | uniform:LO,HI | grid:FILE, where FILE holds one
// "point pdf" pair per line ('#' starts a comment).

namespace detail {

inline double parse_number(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  in.imbue(std::locale::classic());
  double v;
  if (!(in >> v) || !(in >> std::ws).eof() || !std::isfinite(v)) {
    throw ParseError(key, "expected a number, got '" + text + "'");
  }
  return v;
}

inline std::vector<double> parse_pair(const std::string& key, const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw ParseError(key, "expected two comma-separated numbers");
  return {parse_number(key, text.substr(0, comma)), parse_number(key, text.substr(comma + 1))};
}

inline GridDist read_grid_file(const std::string& key, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(key, "cannot open grid file '" + path + "'");
  GridDist g;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream row(line);
    row.imbue(std::locale::classic());
    double x, p;
    if (!(row >> x)) continue;
    if (!(row >> p)) throw ParseError(key, "grid line without pdf value: '" + line + "'");
    g.points.push_back(x);
    g.pdf.push_back(p);
  }
  return g;
}

}  // namespace detail

inline ScalarDist parse_dist(const std::string& key, const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw ParseError(key, "expected gaussian:MEAN,VAR, uniform:LO,HI or grid:FILE");
  }
  const std::string kind = text.substr(0, colon);
  const std::string args = text.substr(colon + 1);
  ScalarDist d;
  if (kind == "gaussian") {
    const auto v = detail::parse_pair(key, args);
    d = GaussianDist{v[0], v[1]};
  } else if (kind == "uniform") {
    const auto v = detail::parse_pair(key, args);
    d = UniformDist{v[0], v[1]};
  } else if (kind == "grid") {
    d = detail::read_grid_file(key, args);
  } else {
    throw ParseError(key, "unknown distribution '" + kind + "'");
  }
  try {
    validate(d);
  } catch (const std::invalid_argument& e) {
    throw ParseError(key, e.what());
  }
  return d;
}

// Parses a model specification. `text` may also name a file holding one.
inline JointModel parse_model(const std::string& text) {
  std::string body = text;
  if (body.find('=') == std::string::npos) {
    std::ifstream in(text);
    if (!in) throw ParseError("model", "neither a specification nor a readable file: '" + text + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    body = ss.str();
  }
  std::map<std::string, std::string> kv;
  std::istringstream in(body);
  std::string token;
  while (in >> token) {
    if (token[0] == '#') {
      std::getline(in, token);
      continue;
    }
    const auto eq = token.find('=');
    if (eq == std::string::npos || eq == 0) throw ParseError(token, "expected key=value");
    const std::string key = token.substr(0, eq);
    if (!kv.emplace(key, token.substr(eq + 1)).second) throw ParseError(key, "given twice");
  }
  if (!kv.count("kind")) throw ParseError("kind", "missing");
  const std::string kind = kv["kind"];
  kv.erase("kind");

  auto take = [&](const std::string& key, double fallback, bool required) {
    auto it = kv.find(key);
    if (it == kv.end()) {
      if (required) throw ParseError(key, "missing");
      return fallback;
    }
    const double v = detail::parse_number(key, it->second);
    kv.erase(it);
    return v;
  };
  auto take_dist = [&](const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw ParseError(key, "missing");
    ScalarDist d = parse_dist(key, it->second);
    kv.erase(it);
    return d;
  };

  JointModel model;
  if (kind == "gaussian") {
    BivariateGaussian g;
    g.rho = take("rho", 0.0, true);
    g.mean_x = take("mean_x", 0.0, false);
    g.mean_y = take("mean_y", 0.0, false);
    g.var_x = take("var_x", 1.0, false);
    g.var_y = take("var_y", 1.0, false);
    model = g;
  } else if (kind == "additive") {
    AdditiveNoise a;
    a.a = take("a", 1.0, false);
    a.x = take_dist("x");
    a.noise = take_dist("noise");
    model = a;
  } else if (kind == "clipped") {
    Clipped c;
    c.threshold = take("L", 1.0, false);
    c.y = GaussianDist{0.0, take("var_y", 1.0, false)};
    model = c;
  } else {
    throw ParseError("kind", "unknown model kind '" + kind + "'");
  }
  if (!kv.empty()) throw ParseError(kv.begin()->first, "unknown key for kind=" + kind);
  try {
    validate(model);
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    // Map the violated invariant back to the key that carries it.
    const std::string what = e.what();
    std::string key = "kind";
    for (const char* k : {"rho", "var_x", "var_y", "mean_x", "mean_y", "L", "a"}) {
      if (what.find(k) != std::string::npos) {
        key = k;
        break;
      }
    }
    if (what.find("threshold") != std::string::npos) key = "L";
    throw ParseError(key, what);
  }
  return model;
}

}  // namespace privfilter
