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

// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 iff all
// criteria pass. Oracles are computed here from closed forms or by direct
// integration, independently of the library's quadrature.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "privfilter.hpp"

namespace {

using namespace privfilter;

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Tracker {
 public:
  // Records `measured` against `expected` with an absolute tolerance.
  void close(const std::string& what, double measured, double expected, double tol) {
    note(what, tol - std::abs(measured - expected), measured, expected, tol);
  }
  // Records measured <= limit + tol.
  void below(const std::string& what, double measured, double limit, double tol) {
    note(what, limit + tol - measured, measured, limit, tol);
  }
  void truth(const std::string& what, bool ok) { note(what, ok ? 1.0 : -1.0, ok, 1.0, 0.0); }

  Outcome outcome() const {
    Outcome o;
    o.pass = failures_ == 0;
    std::ostringstream ss;
    ss << checks_ << " checks";
    if (failures_) ss << ", " << failures_ << " failed; first: " << first_failure_;
    if (!worst_.empty()) ss << "; " << worst_;
    o.detail = ss.str();
    return o;
  }

 private:
  // `slack` is the distance to failing; negative (or NaN) means failed.
  void note(const std::string& what, double slack, double m, double e, double t) {
    const bool ok = slack >= 0.0;
    ++checks_;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s measured=%.10g expected=%.10g tol=%.3g", what.c_str(), m,
                  e, t);
    if (!ok && failures_++ == 0) first_failure_ = buf;
    if (ok && slack <= tightest_) {
      tightest_ = slack;
      worst_ = std::string("tightest: ") + buf;
    }
  }
  int checks_ = 0;
  int failures_ = 0;
  std::string first_failure_;
  double tightest_ = std::numeric_limits<double>::infinity();
  std::string worst_;
};

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

NumericsConfig numeric() {
  NumericsConfig c;
  c.force_numeric = true;
  return c;
}

template <class F>
double simpson(F&& f, double lo, double hi, int n) {
  const double h = (hi - lo) / n;
  double acc = f(lo) + f(hi);
  for (int i = 1; i < n; ++i) acc += (i % 2 ? 4.0 : 2.0) * f(lo + i * h);
  return acc * h / 3.0;
}

double phi(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }

const double kR3 = std::sqrt(3.0);
const JointModel kUniformX = AdditiveNoise{UniformDist{-kR3, kR3}, 1.0, GaussianDist{0.0, 1.0}};
const JointModel kUniformNoise =
    AdditiveNoise{GaussianDist{0.0, 1.0}, 1.0, UniformDist{-kR3, kR3}};
const JointModel kClipped = Clipped{GaussianDist{0.0, 1.0}, 1.0};
const JointModel kGridX = AdditiveNoise{bimodal_grid(), 1.5, GaussianDist{0.0, 0.5}};

// 1. Gaussian closed-form equivalence on the numerical path.
Outcome acc1() {
  Tracker t;
  const auto start = std::chrono::steady_clock::now();
  for (double rho : {0.3, 0.5, 0.8}) {
    const double r2 = rho * rho;
    const double info_bits = -0.5 * std::log2(1.0 - r2);
    std::vector<double> grid;
    for (int i = 0; i < 50; ++i) grid.push_back(0.95 * info_bits * i / 49.0);
    const auto pts =
        rate_privacy_curve(BivariateGaussian{0, 0, 1, 1, rho}, grid, Units::kBits, numeric());
    for (const auto& p : pts) {
      const double q = std::exp2(-2.0 * p.eps);
      const double g = 0.5 * std::log2(r2 / (q + r2 - 1.0));
      const double gamma = (1.0 - q) / (q + r2 - 1.0);
      t.truth("point computed", p.error.empty());
      t.close("g rho=" + std::to_string(rho), p.g_eps.value, g, 1e-3);
      t.below("gamma rel rho=" + std::to_string(rho),
              gamma > 0.0 ? std::abs(p.gamma_eps / gamma - 1.0) : std::abs(p.gamma_eps), 0.0,
              1e-3);
    }
  }
  t.below("runtime seconds", seconds_since(start), 60.0, 0.0);
  return t.outcome();
}

// 2. Derivative identities.
Outcome acc2() {
  Tracker t;
  for (double rho : {0.3, 0.5, 0.8}) {
    const double r2 = rho * rho;
    const TradeoffSolver s(BivariateGaussian{0, 0, 1, 1, rho}, numeric());
    const double info_bits = -0.5 * std::log2(1.0 - r2);
    for (int i = 1; i <= 10; ++i) {
      const double eps_bits = 0.9 * info_bits * i / 10.0;
      const double q = std::exp2(-2.0 * eps_bits);
      const double expected = q / (q + r2 - 1.0);
      const TradeoffPoint p = s.g_eps(eps_bits * kLn2);
      t.below("g' rel rho=" + std::to_string(rho), std::abs(p.g_prime.value / expected - 1.0),
              0.0, 1e-3);
    }
    t.close("g'(0) rho=" + std::to_string(rho), s.g_eps(0.0).g_prime.value, 1.0 / r2, 1e-4);
  }
  for (const JointModel* m : {&kUniformX, &kUniformNoise, &kClipped}) {
    const TradeoffSolver s(*m, NumericsConfig{});
    const double expected = 1.0 / s.eta_sq().value;
    t.close(std::string("g'(0) ") + kind_name(*m), s.g_eps(0.0).g_prime.value, expected,
            1e-3 * expected);
  }
  return t.outcome();
}

// 3. Second-order coefficient at eps = 0.01 nats.
Outcome acc3() {
  Tracker t;
  const double eps = 0.01;
  {
    const TradeoffSolver s(BivariateGaussian{0, 0, 1, 1, 0.5}, numeric());
    const double c = (s.g_eps(eps).g_eps.value - eps / 0.25) / (eps * eps);
    t.close("gaussian coefficient vs 12", c, 12.0, 1.2);
  }
  for (const JointModel* m : {&kUniformX, &kUniformNoise, &kGridX}) {
    const TradeoffSolver s(*m, NumericsConfig{});
    const double d = s.delta().value;
    const double c = (s.g_eps(eps).g_eps.value - eps / s.eta_sq().value) / (eps * eps);
    t.close("additive coefficient vs Delta", c, d, 0.1 * std::abs(d));
  }
  return t.outcome();
}

// 4. Local concavity of the clipped model.
Outcome acc4() {
  Tracker t;
  const TradeoffSolver s(kClipped, NumericsConfig{});
  // E[var^2(Y|X)] = P(|Y| > 1) (E[Y^2 | |Y| > 1])^2 by direct integration.
  const double tail = 2.0 * simpson(phi, 1.0, 14.0, 40000);
  const double m2 = 2.0 * simpson([](double y) { return y * y * phi(y); }, 1.0, 14.0, 40000) / tail;
  t.close("E[var^2(Y|X)]", s.evaluator().mean_cond_var2(), tail * m2 * m2, 1e-8);
  t.close("E[var^2(Y|X)] vs 2.0232", s.evaluator().mean_cond_var2(), 2.0232, 1e-4);
  t.below("Delta", s.delta().value, 0.0, 0.0);
  const TradeoffPoint p = s.g_eps(0.05);
  t.below("g(0.05) vs 0.05/eta^2", p.g_eps.value + p.g_eps.err, 0.05 / s.eta_sq().value, 0.0);
  return t.outcome();
}

// 5. ENSR closed form and forced numerical path.
Outcome acc5() {
  Tracker t;
  for (double rho : {0.3, 0.5, 0.8}) {
    const JointModel g = BivariateGaussian{0, 0, 1, 1, rho};
    for (double frac : {0.0, 0.2, 0.5, 0.8}) {
      const double eps = frac * rho * rho;
      const EnsrPoint c = ensr(g, eps, EnsrMode::kStrong, NumericsConfig{});
      t.close("closed M", c.ensr.value, 1.0 - eps / (rho * rho), 0.0);
      t.close("closed err", c.ensr.err, 0.0, 0.0);
      const EnsrPoint n = ensr(g, eps, EnsrMode::kStrong, numeric());
      t.close("numeric M", n.ensr.value, 1.0 - eps / (rho * rho), 1e-3);
    }
  }
  return t.outcome();
}

// 6. Additive Gaussian-noise equalities.
Outcome acc6() {
  Tracker t;
  for (const JointModel* m : {&kUniformX, &kGridX}) {
    const NumericsConfig cfg;
    const double eta = Evaluator(*m, cfg).eta_sq().value;
    const RatioScan sup = sdpi_ratio_sup(*m, cfg);
    const RatioScan inf = mmse_ratio_inf(*m, cfg);
    t.close("sup I(X;Z)/I(Y;Z)", sup.value.value, eta, 1e-3);
    t.close("inf mmse ratio", inf.value.value, 1.0 - eta, 1e-3);
    for (double r : sup.ratios) t.below("pointwise ratio", r, eta, sup.value.err);
  }
  return t.outcome();
}

// 7. Ordering W <= M <= 1 - eps / rho_m^2.
Outcome acc7() {
  Tracker t;
  for (const JointModel* m : {&kClipped, &kUniformNoise}) {
    const TradeoffSolver s(*m, NumericsConfig{});
    const Estimate rm = s.rho_m_sq_xy();
    for (int i = 1; i <= 10; ++i) {
      const double eps = 0.02 * i;
      const EnsrPoint strong = s.ensr(eps, EnsrMode::kStrong);
      const EnsrPoint weak = s.ensr(eps, EnsrMode::kWeak);
      t.below("W <= M", weak.ensr.value, strong.ensr.value, weak.ensr.err + strong.ensr.err);
      t.below("M <= 1 - eps/rho_m^2", strong.ensr.value, strong.gaussian_upper,
              strong.ensr.err + eps * rm.err / (rm.value * rm.value));
    }
  }
  return t.outcome();
}

// 8. Non-Gaussianness lower bound on M.
Outcome acc8() {
  Tracker t;
  const TradeoffSolver s(kUniformNoise, NumericsConfig{});
  const double top = 0.2 * s.rho_m_sq_xy().value;
  for (int i = 0; i <= 5; ++i) {
    const EnsrPoint p = s.ensr(top * i / 5.0, EnsrMode::kStrong);
    t.below("thm4_lower <= M", p.thm4_lower, p.ensr.value, p.ensr.err);
  }
  const EnsrPoint g = ensr(BivariateGaussian{0, 0, 1, 1, 0.5}, 0.1, EnsrMode::kStrong,
                           NumericsConfig{});
  t.close("gaussian thm4_lower(0.1 bits)", g.thm4_lower, 0.4823, 2e-4);
  t.close("gaussian thm4_lower exact", g.thm4_lower, (std::exp2(-0.2) + 0.25 - 1.0) / 0.25,
          1e-12);
  t.below("gaussian thm4_lower <= 0.6", g.thm4_lower, 0.6, 0.0);
  return t.outcome();
}

// 9. Decomposition residual and the small-gamma slope bound.
Outcome acc9() {
  Tracker t;
  const std::pair<const JointModel*, double> pairs[] = {
      {&kUniformX, 0.5}, {&kUniformX, 2.0}, {&kUniformNoise, 1.0},
      {&kClipped, 0.5},  {&kClipped, 2.0},  {&kGridX, 1.0}};
  for (const auto& [m, g] : pairs) {
    const Estimate r = Evaluator(*m, NumericsConfig{}).decomposition_residual(g);
    t.close(std::string("residual ") + kind_name(*m), r.value, 0.0, r.err + 1e-9);
  }
  for (const JointModel* m : {&kUniformNoise, static_cast<const JointModel*>(nullptr)}) {
    const JointModel model =
        m ? *m : JointModel{AdditiveNoise{GaussianDist{0.0, 1.0}, 1.0, GaussianDist{0.0, 0.5}}};
    const Evaluator ev(model, NumericsConfig{});
    const Moments mo = moments(model);
    const double rho2 = mo.corr * mo.corr;
    const double bound = 0.5 * ((1.0 - rho2) * mo.var_y - ev.mean_cond_var());
    const double g1 = 1e-3, g2 = 1e-2;
    const Estimate d1 = ev.cond_non_gaussianness(g1), d2 = ev.cond_non_gaussianness(g2);
    const double s1 = d1.value / g1, s2 = d2.value / g2;
    const double s0 = s1 - g1 * (s2 - s1) / (g2 - g1);
    t.below("slope at 1e-3", s1, bound, std::abs(s1 - s0) + d1.err / g1 + 1e-9);
    t.below("slope at 1e-2", s2, bound, std::abs(s2 - s0) + d2.err / g2 + 1e-9);
  }
  return t.outcome();
}

// 10. The verify command: I-MMSE checks pass and the whole run exits 0 in
// under five minutes.
Outcome acc10() {
  Tracker t;
  const auto start = std::chrono::steady_clock::now();
  std::ostringstream out, err;
  const char* argv[] = {"privfilter", "verify"};
  const int code = cli::run_cli(2, argv, out, err);
  const double secs = seconds_since(start);
  const std::string report = out.str();
  int imm = 0;
  std::istringstream in(report);
  for (std::string line; std::getline(in, line);) {
    if (line.find("I-MMSE") != std::string::npos || line.find("-E[var^2]") != std::string::npos) {
      ++imm;
      t.truth(line.substr(0, 60), line.rfind("PASS", 0) == 0);
    }
  }
  t.close("I-MMSE checks found", imm, 3, 0);
  t.close("verify exit code", code, 0, 0);
  t.below("verify seconds", secs, 300.0, 0.0);
  Outcome o = t.outcome();
  if (code != 0) o.detail += "\n" + report;
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"ACC1 gaussian closed-form equivalence", acc1},
      {"ACC2 derivative identities", acc2},
      {"ACC3 taylor coefficients", acc3},
      {"ACC4 clipped concavity", acc4},
      {"ACC5 ensr closed form", acc5},
      {"ACC6 additive-noise equalities", acc6},
      {"ACC7 ENSR ordering", acc7},
      {"ACC8 ENSR lower bound", acc8},
      {"ACC9 decomposition and small-gamma slope", acc9},
      {"ACC10 I-MMSE suite and verify command", acc10},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    char secs[32];
    std::snprintf(secs, sizeof secs, "%.1f s", seconds_since(start));
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << " (" << secs << ") " << o.detail
              << std::endl;
    failed += o.pass ? 0 : 1;
  }
  std::cout << (failed ? "FAIL" : "PASS") << ' ' << criteria.size() - failed << '/'
            << criteria.size() << std::endl;
  return failed ? 1 : 0;
}
