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
/// Scalar laws as finite mixtures of Gaussian kernels, point masses and
/// piecewise densities, together with everything the estimators need about
/// observing such a law through Z = sqrt(gamma) * Y + N: evidence p(z),
/// posterior moments of Y given z, and expectations over z.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "privfilter/errors.hpp"
#include "privfilter/numerics.hpp"

namespace privfilter {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// One smooth piece of a density: (c0 + c1 y) * exp(-(y - mu)^2 / (2 v)) on
// [lo, hi]. v = +inf drops the Gaussian factor. The linear factor must be
// nonnegative on the piece.
struct Piece {
  double lo = 0.0;
  double hi = 0.0;
  double c0 = 0.0;
  double c1 = 0.0;
  double mu = 0.0;
  double v = kInf;

  bool has_gauss() const { return std::isfinite(v); }

  double log_pdf(double y) const {
    const double lin = c0 + c1 * y;
    if (!(lin > 0.0)) return kNegInf;
    double out = std::log(lin);
    if (has_gauss()) out -= (y - mu) * (y - mu) / (2.0 * v);
    return out;
  }
  double pdf(double y) const {
    if (y < lo || y > hi) return 0.0;
    const double l = log_pdf(y);
    return l == kNegInf ? 0.0 : std::exp(l);
  }
  Piece shifted(double d) const {
    // (c0 + c1 (y - d)) keeps the same shape at y + d.
    return Piece{lo + d, hi + d, c0 - c1 * d, c1, mu + d, v};
  }
  // Integral of the piece over [lo, min(hi, t)].
  double mass_below(double t) const {
    const double b = std::min(hi, t);
    if (!(b > lo)) return 0.0;
    if (!has_gauss()) {
      return c0 * (b - lo) + 0.5 * c1 * (b * b - lo * lo);
    }
    if (c1 != 0.0) throw ModelNotSupported("cdf of sloped Gaussian piece");
    const double s = std::sqrt(v);
    return c0 * s * std::sqrt(2.0 * std::numbers::pi) *
           norm_interval((lo - mu) / s, (b - mu) / s);
  }
};

// A mixture component: either N(mean, var) (var == 0 is a point mass) or a
// normalized piecewise density.
class Kernel {
 public:
  static Kernel gaussian(double mean, double var) {
    if (!(var >= 0.0) || !std::isfinite(mean)) {
      throw std::invalid_argument("Kernel::gaussian: bad parameters");
    }
    Kernel k;
    k.gauss_ = true;
    k.mean_ = mean;
    k.var_ = var;
    return k;
  }
  static Kernel point(double at) { return gaussian(at, 0.0); }

  // Pieces must integrate to one.
  static Kernel density(std::vector<Piece> pieces) {
    if (pieces.empty()) throw std::invalid_argument("Kernel::density: no pieces");
    Kernel k;
    k.gauss_ = false;
    k.pieces_ = std::move(pieces);
    k.init_moments();
    return k;
  }

  bool is_gaussian() const { return gauss_; }
  bool is_point() const { return gauss_ && var_ == 0.0; }
  double mean() const { return mean_; }
  double var() const { return var_; }
  const std::vector<Piece>& pieces() const { return pieces_; }
  double lo() const { return gauss_ ? mean_ - 12.0 * std::sqrt(var_) : pieces_.front().lo; }
  double hi() const { return gauss_ ? mean_ + 12.0 * std::sqrt(var_) : pieces_.back().hi; }

  double pdf(double y) const {
    if (gauss_) {
      if (var_ == 0.0) throw DegenerateModel("point mass has no density");
      const double s = std::sqrt(var_);
      return norm_pdf((y - mean_) / s) / s;
    }
    double acc = 0.0;
    for (const Piece& p : pieces_) acc += p.pdf(y);
    return acc;
  }

  double cdf(double y) const {
    if (gauss_) {
      if (var_ == 0.0) return y >= mean_ ? 1.0 : 0.0;
      return norm_cdf((y - mean_) / std::sqrt(var_));
    }
    double acc = 0.0;
    for (const Piece& p : pieces_) acc += p.mass_below(y);
    return std::min(1.0, acc);
  }

  Kernel shifted(double d) const {
    if (gauss_) return gaussian(mean_ + d, var_);
    Kernel k = *this;
    for (Piece& p : k.pieces_) p = p.shifted(d);
    k.mean_ += d;
    return k;
  }

  // Integrates f against the density with composite Gauss-Legendre per piece.
  template <class F>
  double integrate_pieces(F&& f, int order) const {
    double acc = 0.0;
    for (const Piece& p : pieces_) {
      const double width = p.hi - p.lo;
      int panels = 1;
      if (p.has_gauss()) {
        panels = std::clamp(static_cast<int>(std::ceil(width / std::sqrt(p.v))), 1, 64);
      }
      const Rule r = composite_legendre(p.lo, p.hi, panels, order);
      for (std::size_t k = 0; k < r.size(); ++k) {
        const double dens = p.pdf(r.nodes[k]);
        if (dens > 0.0) acc += r.weights[k] * dens * f(r.nodes[k]);
      }
    }
    return acc;
  }

 private:
  void init_moments() {
    const double mass = integrate_pieces([](double) { return 1.0; }, 24);
    if (std::abs(mass - 1.0) > 1e-9) {
      throw std::invalid_argument("Kernel::density: pieces integrate to " +
                                  std::to_string(mass));
    }
    mean_ = integrate_pieces([](double y) { return y; }, 24);
    const double m = mean_;
    var_ = integrate_pieces([m](double y) { return (y - m) * (y - m); }, 24);
  }

  bool gauss_ = true;
  double mean_ = 0.0;
  double var_ = 0.0;
  std::vector<Piece> pieces_;
};

// Posterior summary of one observation z.
struct Posterior {
  double log_evidence = kNegInf;  // log p(z)
  double mean = 0.0;              // E[Y | z]
  double var = 0.0;               // var(Y | z)
};

class Law {
 public:
  Law() = default;
  explicit Law(Kernel k) { add(1.0, std::move(k)); }

  static Law gaussian(double mean, double var) { return Law(Kernel::gaussian(mean, var)); }
  static Law point(double at) { return Law(Kernel::point(at)); }
  static Law uniform(double lo, double hi) {
    if (!(hi > lo)) throw std::invalid_argument("Law::uniform: hi must exceed lo");
    return Law(Kernel::density({Piece{lo, hi, 1.0 / (hi - lo), 0.0, 0.0, kInf}}));
  }
  // Piecewise-linear density through (points[i], pdf[i]).
  static Law grid(const std::vector<double>& points, const std::vector<double>& pdf) {
    std::vector<Piece> pieces;
    for (std::size_t i = 0; i + 1 < points.size(); ++i) {
      if (pdf[i] == 0.0 && pdf[i + 1] == 0.0) continue;
      const double slope = (pdf[i + 1] - pdf[i]) / (points[i + 1] - points[i]);
      pieces.push_back(Piece{points[i], points[i + 1], pdf[i] - slope * points[i], slope,
                             0.0, kInf});
    }
    return Law(Kernel::density(std::move(pieces)));
  }
  // N(mean, var) conditioned on |Y - mean| > half_width.
  static Law gaussian_tails(double mean, double var, double half_width) {
    const double s = std::sqrt(var);
    const double tail = 2.0 * norm_sf(half_width / s);
    if (!(tail > 0.0)) throw DegenerateModel("gaussian_tails: empty tail");
    const double c = 1.0 / (tail * s * std::sqrt(2.0 * std::numbers::pi));
    const double reach = std::max(half_width, 0.0) + 10.0 * s;
    return Law(Kernel::density({Piece{mean - reach, mean - half_width, c, 0.0, mean, var},
                                Piece{mean + half_width, mean + reach, c, 0.0, mean, var}}));
  }

  void add(double weight, Kernel k) {
    if (!(weight >= 0.0)) throw std::invalid_argument("Law::add: negative weight");
    weights_.push_back(weight);
    log_weights_.push_back(weight > 0.0 ? std::log(weight) : kNegInf);
    kernels_.push_back(std::move(k));
  }

  // Rescales the weights to sum to one.
  void normalize() {
    const double total = std::accumulate(weights_.begin(), weights_.end(), 0.0);
    if (!(total > 0.0)) throw DegenerateModel("Law::normalize: zero mass");
    for (double& w : weights_) w /= total;
    const double shift = std::log(total);
    for (double& lw : log_weights_) lw -= shift;
  }

  std::size_t size() const { return kernels_.size(); }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& log_weights() const { return log_weights_; }
  const std::vector<Kernel>& kernels() const { return kernels_; }

  bool is_single_gaussian() const {
    return kernels_.size() == 1 && kernels_[0].is_gaussian() && !kernels_[0].is_point();
  }
  bool has_points() const {
    return std::any_of(kernels_.begin(), kernels_.end(),
                       [](const Kernel& k) { return k.is_point(); });
  }

  double mean() const {
    double m = 0.0;
    for (std::size_t k = 0; k < size(); ++k) m += weights_[k] * kernels_[k].mean();
    return m;
  }
  double var() const {
    const double m = mean();
    double v = 0.0;
    for (std::size_t k = 0; k < size(); ++k) {
      const double d = kernels_[k].mean() - m;
      v += weights_[k] * (kernels_[k].var() + d * d);
    }
    return v;
  }

  double pdf(double y) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < size(); ++k) {
      if (weights_[k] > 0.0) acc += weights_[k] * kernels_[k].pdf(y);
    }
    return acc;
  }
  double cdf(double y) const {
    double acc = 0.0;
    for (std::size_t k = 0; k < size(); ++k) acc += weights_[k] * kernels_[k].cdf(y);
    return acc;
  }

  Law shifted(double d) const {
    Law out;
    for (std::size_t k = 0; k < size(); ++k) out.add(weights_[k], kernels_[k].shifted(d));
    return out;
  }

  double lo() const {
    double v = kInf;
    for (const Kernel& k : kernels_) v = std::min(v, k.lo());
    return v;
  }
  double hi() const {
    double v = kNegInf;
    for (const Kernel& k : kernels_) v = std::max(v, k.hi());
    return v;
  }

 private:
  std::vector<double> weights_;
  std::vector<double> log_weights_;
  std::vector<Kernel> kernels_;
};

// ---------------------------------------------------------------------------
// Observation through the Gaussian channel.

namespace detail {

inline constexpr int kWindowOrder = 12;
// Integrand values below exp(-kWindowDepth) of the peak are dropped.
inline constexpr double kWindowDepth = 40.0;

struct Quadratic {
  double m;  // peak of the combined Gaussian exponent
  double s;  // its standard deviation
};

inline Quadratic combined_quadratic(const Piece& p, double z, double sg) {
  const double gamma = sg * sg;
  double prec = gamma;
  double lin = sg * z;
  if (p.has_gauss()) {
    prec += 1.0 / p.v;
    lin += p.mu / p.v;
  }
  return {lin / prec, 1.0 / std::sqrt(prec)};
}

inline double piece_log_integrand(const Piece& p, double y, double z, double sg) {
  const double r = z - sg * y;
  return p.log_pdf(y) - 0.5 * r * r;
}

// Posterior of a piecewise density given z by windowed quadrature. Moments
// are accumulated about a reference point to keep var free of cancellation.
inline Posterior density_posterior(const Kernel& k, double z, double sg) {
  const auto& pieces = k.pieces();
  struct Window {
    double lo, hi, scale, peak;
  };
  std::vector<Window> windows;
  windows.reserve(pieces.size());
  double global_peak = kNegInf;
  double ref_point = 0.0;
  for (const Piece& p : pieces) {
    const Quadratic q = combined_quadratic(p, z, sg);
    const double star = std::clamp(q.m, p.lo, p.hi);
    const double d = std::abs(star - q.m);
    const double reach = q.s * std::sqrt(d * d / (q.s * q.s) + 2.0 * kWindowDepth);
    const double wlo = std::max(p.lo, q.m - reach);
    const double whi = std::min(p.hi, q.m + reach);
    const double scale = q.s * std::min(1.0, q.s / std::max(d, 1e-300));
    double peak = std::max({piece_log_integrand(p, star, z, sg),
                            piece_log_integrand(p, wlo, z, sg),
                            piece_log_integrand(p, whi, z, sg)});
    windows.push_back({wlo, whi, scale, peak});
    if (peak > global_peak) {
      global_peak = peak;
      ref_point = star;
    }
  }
  if (global_peak == kNegInf) return Posterior{kNegInf, k.mean(), k.var()};

  const Rule& gl = gauss_legendre(kWindowOrder);
  double s0 = 0.0, s1 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    const Window& w = windows[i];
    if (w.peak < global_peak - 2.0 * kWindowDepth || !(w.hi > w.lo)) continue;
    const int panels =
        std::clamp(static_cast<int>(std::ceil((w.hi - w.lo) / (2.0 * w.scale))), 1, 512);
    const double h = (w.hi - w.lo) / panels;
    for (int pnl = 0; pnl < panels; ++pnl) {
      const double half = 0.5 * h;
      const double mid = w.lo + pnl * h + half;
      for (std::size_t j = 0; j < gl.size(); ++j) {
        const double y = mid + half * gl.nodes[j];
        const double l = piece_log_integrand(pieces[i], y, z, sg);
        if (l == kNegInf) continue;
        const double e = half * gl.weights[j] * std::exp(l - global_peak);
        const double dy = y - ref_point;
        s0 += e;
        s1 += e * dy;
        s2 += e * dy * dy;
      }
    }
  }
  if (!(s0 > 0.0)) return Posterior{kNegInf, k.mean(), k.var()};
  const double m1 = s1 / s0;
  return Posterior{global_peak + std::log(s0) - kLogSqrt2Pi, ref_point + m1,
                   std::max(0.0, s2 / s0 - m1 * m1)};
}

// log of \int_piece pdf(y) phi(z - sg y) dy in closed form; NaN when the
// closed form loses accuracy.
inline double piece_log_evidence(const Piece& p, double z, double sg) {
  const Quadratic q = combined_quadratic(p, z, sg);
  // Constant left over after completing the square.
  double k = -0.5 * z * z + 0.5 * q.m * q.m / (q.s * q.s);
  if (p.has_gauss()) k -= 0.5 * p.mu * p.mu / p.v;
  const double a = (p.lo - q.m) / q.s;
  const double b = (p.hi - q.m) / q.s;
  const double mass = norm_interval(a, b);
  const double lin_at_m = p.c0 + p.c1 * q.m;
  const double edge = p.c1 * q.s * (norm_pdf(a) - norm_pdf(b));
  const double bracket = lin_at_m * mass + edge;
  const double scale = std::abs(lin_at_m) * mass + std::abs(edge);
  if (!(bracket > 1e-10 * scale)) {
    if (scale == 0.0) return kNegInf;
    return std::numeric_limits<double>::quiet_NaN();
  }
  // The sqrt(2 pi) of the y-integral cancels the normalization of phi.
  return k + std::log(q.s) + std::log(bracket);
}

}  // namespace detail

// Posterior of one kernel given z observed at sqrt(gamma) = sg.
inline Posterior posterior(const Kernel& k, double z, double sg) {
  if (sg == 0.0) return Posterior{log_norm_pdf(z), k.mean(), k.var()};
  if (k.is_gaussian()) {
    const double v = k.var();
    const double denom = 1.0 + sg * sg * v;
    const double r = z - sg * k.mean();
    return Posterior{-0.5 * r * r / denom - 0.5 * std::log(denom) - kLogSqrt2Pi,
                     k.mean() + sg * v * r / denom, v / denom};
  }
  return detail::density_posterior(k, z, sg);
}

// log p(z) for one kernel, closed form where stable.
inline double log_evidence(const Kernel& k, double z, double sg) {
  if (sg == 0.0) return log_norm_pdf(z);
  if (k.is_gaussian()) {
    const double denom = 1.0 + sg * sg * k.var();
    const double r = z - sg * k.mean();
    return -0.5 * r * r / denom - 0.5 * std::log(denom) - kLogSqrt2Pi;
  }
  double acc = kNegInf;
  for (const Piece& p : k.pieces()) {
    const double l = detail::piece_log_evidence(p, z, sg);
    if (std::isnan(l)) return detail::density_posterior(k, z, sg).log_evidence;
    acc = log_sum_exp(acc, l);
  }
  return acc;
}

// Mixture components whose posterior weight is below e^{-kPruneLog} of the
// largest are dropped; their share of the posterior is below 1e-19.
inline constexpr double kPruneLog = 44.0;

inline Posterior posterior(const Law& law, double z, double sg) {
  const auto& ks = law.kernels();
  const auto& lws = law.log_weights();
  if (ks.size() == 1) return posterior(ks[0], z, sg);
  thread_local std::vector<double> logw;
  logw.resize(ks.size());
  // First pass: log posterior weights, closed form for Gaussian kernels.
  double top = kNegInf;
  double last_var = -1.0, log_denom = 0.0;
  for (std::size_t k = 0; k < ks.size(); ++k) {
    if (lws[k] == kNegInf) {
      logw[k] = kNegInf;
      continue;
    }
    const Kernel& kern = ks[k];
    if (sg > 0.0 && kern.is_gaussian()) {
      const double v = kern.var();
      if (v != last_var) {
        last_var = v;
        log_denom = std::log1p(sg * sg * v);
      }
      const double r = z - sg * kern.mean();
      logw[k] = lws[k] - 0.5 * r * r * std::exp(-log_denom) - 0.5 * log_denom - kLogSqrt2Pi;
    } else {
      logw[k] = lws[k] + log_evidence(kern, z, sg);
    }
    top = std::max(top, logw[k]);
  }
  if (top == kNegInf) return Posterior{kNegInf, law.mean(), law.var()};
  // Second pass: moments of the surviving components.
  double total = 0.0, s1 = 0.0, s2 = 0.0;
  for (std::size_t k = 0; k < ks.size(); ++k) {
    if (!(logw[k] > top - kPruneLog)) continue;
    const double pi = std::exp(logw[k] - top);
    const Posterior part = posterior(ks[k], z, sg);
    total += pi;
    s1 += pi * part.mean;
    s2 += pi * (part.var + part.mean * part.mean);
  }
  const double mean = s1 / total;
  // Central second moment, accumulated around the mean for stability.
  double var = 0.0;
  if (s2 / total - mean * mean > 1e-8 * (s2 / total)) {
    var = s2 / total - mean * mean;
  } else {
    for (std::size_t k = 0; k < ks.size(); ++k) {
      if (!(logw[k] > top - kPruneLog)) continue;
      const Posterior part = posterior(ks[k], z, sg);
      const double d = part.mean - mean;
      var += std::exp(logw[k] - top) * (part.var + d * d);
    }
    var /= total;
  }
  return Posterior{top + std::log(total), mean, var};
}

inline double log_evidence(const Law& law, double z, double sg) {
  double acc = kNegInf;
  const auto& ks = law.kernels();
  const auto& ws = law.weights();
  for (std::size_t k = 0; k < ks.size(); ++k) {
    if (ws[k] > 0.0) acc = log_sum_exp(acc, std::log(ws[k]) + log_evidence(ks[k], z, sg));
  }
  return acc;
}

// ---------------------------------------------------------------------------
// z-quadrature.

inline constexpr double kZReach = 10.0;      // standard deviations covered
inline constexpr double kZPanelWidth = 2.0;  // noise N has unit variance

// Support intervals of Z = sg * (Y + shift) + N for a set of shifted laws.
inline std::vector<std::pair<double, double>> z_ranges(
    const std::vector<std::pair<const Law*, double>>& shifted_laws, double sg) {
  std::vector<std::pair<double, double>> iv;
  for (const auto& [law, shift] : shifted_laws) {
    for (const Kernel& k : law->kernels()) {
      if (k.is_gaussian()) {
        const double c = sg * (k.mean() + shift);
        const double half = kZReach * std::sqrt(sg * sg * k.var() + 1.0);
        iv.emplace_back(c - half, c + half);
      } else {
        iv.emplace_back(sg * (k.lo() + shift) - kZReach, sg * (k.hi() + shift) + kZReach);
      }
    }
  }
  std::sort(iv.begin(), iv.end());
  std::vector<std::pair<double, double>> merged;
  for (const auto& r : iv) {
    if (!merged.empty() && r.first <= merged.back().second) {
      merged.back().second = std::max(merged.back().second, r.second);
    } else {
      merged.push_back(r);
    }
  }
  return merged;
}

inline int z_order(const NumericsConfig& cfg) { return std::max(8, cfg.legendre_order / 2); }

inline Rule z_rule(const std::vector<std::pair<double, double>>& ranges, int order) {
  Rule r;
  for (const auto& [lo, hi] : ranges) {
    const int panels = std::max(1, static_cast<int>(std::ceil((hi - lo) / kZPanelWidth)));
    append_composite_legendre(r, lo, hi, panels, order);
  }
  return r;
}

inline Rule z_rule(const Law& law, double gamma, int order) {
  return z_rule(z_ranges({{&law, 0.0}}, std::sqrt(gamma)), order);
}

// Expectations over Z of posterior functionals of Y.
struct ChannelStats {
  double mmse = 0.0;       // E[var(Y|Z)]
  double var2 = 0.0;       // E[var(Y|Z)^2]
  double entropy_z = 0.0;  // h(Z), nats
  double mass = 0.0;       // \int p(z) dz, should be 1
};

inline ChannelStats channel_stats(const Law& law, double gamma, int order) {
  if (!(gamma >= 0.0)) throw std::invalid_argument("channel_stats: gamma must be >= 0");
  const double sg = std::sqrt(gamma);
  ChannelStats out;
  if (sg == 0.0) {
    // Z = N: posterior equals prior for every z.
    const double v = law.var();
    out.mmse = v;
    out.var2 = v * v;
    out.entropy_z = 0.5 + kLogSqrt2Pi;
    out.mass = 1.0;
    return out;
  }
  const Rule r = z_rule(law, gamma, order);
  for (std::size_t j = 0; j < r.size(); ++j) {
    const Posterior post = posterior(law, r.nodes[j], sg);
    if (post.log_evidence == kNegInf) continue;
    const double p = std::exp(post.log_evidence);
    const double wp = r.weights[j] * p;
    out.mass += wp;
    out.mmse += wp * post.var;
    out.var2 += wp * post.var * post.var;
    out.entropy_z -= wp * post.log_evidence;
  }
  return out;
}

// Same quantities with an error estimate from a lower-order rule on the same
// panels.
struct ChannelEstimates {
  Estimate mmse, var2, entropy_z;
};

inline ChannelEstimates channel_estimates(const Law& law, double gamma,
                                          const NumericsConfig& cfg) {
  const int order = z_order(cfg);
  const ChannelStats hi = channel_stats(law, gamma, order);
  if (gamma == 0.0) {
    return {Estimate{hi.mmse, 0.0, Method::kQuadrature},
            Estimate{hi.var2, 0.0, Method::kQuadrature},
            Estimate{hi.entropy_z, 0.0, Method::kQuadrature}};
  }
  const ChannelStats lo = channel_stats(law, gamma, std::max(4, (2 * order) / 3));
  auto pack = [](double a, double b) {
    return Estimate{a, std::abs(a - b) + 1e-15 * std::abs(a), Method::kQuadrature};
  };
  return {pack(hi.mmse, lo.mmse), pack(hi.var2, lo.var2), pack(hi.entropy_z, lo.entropy_z)};
}

// ---------------------------------------------------------------------------
// Integrals over y.

// Integration rule over the support of a law that has no point masses.
// Pieces are integrated panel-wise; Gaussian kernels on ranges of 12 sd with
// panels no wider than the narrowest kernel.
inline Rule y_rule(const Law& law, int order) {
  if (law.has_points()) throw DegenerateModel("law with point masses has no density");
  std::vector<double> breaks;
  double narrow = kInf;
  std::vector<std::pair<double, double>> iv;
  for (const Kernel& k : law.kernels()) {
    if (k.is_gaussian()) {
      const double s = std::sqrt(k.var());
      narrow = std::min(narrow, s);
      iv.emplace_back(k.mean() - 12.0 * s, k.mean() + 12.0 * s);
    } else {
      for (const Piece& p : k.pieces()) {
        breaks.push_back(p.lo);
        breaks.push_back(p.hi);
        iv.emplace_back(p.lo, p.hi);
        if (p.has_gauss()) narrow = std::min(narrow, std::sqrt(p.v));
      }
    }
  }
  std::sort(iv.begin(), iv.end());
  std::vector<std::pair<double, double>> merged;
  for (const auto& r : iv) {
    if (!merged.empty() && r.first <= merged.back().second) {
      merged.back().second = std::max(merged.back().second, r.second);
    } else {
      merged.push_back(r);
    }
  }
  std::sort(breaks.begin(), breaks.end());
  Rule out;
  for (const auto& [lo, hi] : merged) {
    std::vector<double> cuts{lo};
    for (double b : breaks) {
      if (b > lo && b < hi) cuts.push_back(b);
    }
    cuts.push_back(hi);
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      const double width = cuts[i + 1] - cuts[i];
      const int panels = std::isfinite(narrow)
                             ? std::clamp(static_cast<int>(std::ceil(width / narrow)), 1, 20000)
                             : 1;
      append_composite_legendre(out, cuts[i], cuts[i + 1], panels, order);
    }
  }
  return out;
}

// Differential entropy h(Y) in nats.
inline Estimate differential_entropy(const Law& law, const NumericsConfig& cfg) {
  if (law.is_single_gaussian()) {
    return Estimate::closed_form(
        0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * law.var()));
  }
  auto run = [&](int order) {
    const Rule r = y_rule(law, order);
    double h = 0.0;
    for (std::size_t k = 0; k < r.size(); ++k) {
      const double p = law.pdf(r.nodes[k]);
      if (p > 0.0) h -= r.weights[k] * p * std::log(p);
    }
    return h;
  };
  const int order = std::max(8, cfg.legendre_order / 2);
  const double hi = run(order);
  const double lo = run(std::max(4, (2 * order) / 3));
  return {hi, std::abs(hi - lo) + 1e-15 * std::abs(hi), Method::kQuadrature};
}

// E[f(Y)] under the law: Gauss-Hermite for Gaussian kernels, composite
// Gauss-Legendre for piecewise densities.
template <class F>
double expectation(const Law& law, F&& f, const NumericsConfig& cfg) {
  double acc = 0.0;
  for (std::size_t k = 0; k < law.size(); ++k) {
    const Kernel& kern = law.kernels()[k];
    const double w = law.weights()[k];
    if (!(w > 0.0)) continue;
    if (kern.is_gaussian()) {
      acc += w * gaussian_expectation(f, kern.mean(), kern.var(), cfg.hermite_order);
    } else {
      acc += w * kern.integrate_pieces(f, std::max(8, cfg.legendre_order / 2));
    }
  }
  return acc;
}

}  // namespace privfilter
