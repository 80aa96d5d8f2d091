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
/// Command-line front end. Subcommands:
///   curve   rate-privacy curve g_eps with derivatives and bounds (CSV)
///   ensr    estimation noise-to-signal ratio M_eps or W_eps (CSV)
///   approx  g_eps against its first- and second-order expansions (CSV)
///   info    model constants in nats and bits
///   verify  property checks over the built-in model battery
///
/// Exit codes: 0 success, 1 failed checks or other errors, 2 bad arguments,
/// 3 eps out of range, 4 no convergence.

#pragma once

#include <charconv>
#include <fstream>
#include <iostream>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "privfilter.hpp"

namespace privfilter::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailed = 1;
inline constexpr int kExitParse = 2;
inline constexpr int kExitEpsRange = 3;
inline constexpr int kExitNoConvergence = 4;

inline constexpr char kDefaultModel[] = "kind=gaussian rho=0.5";

struct EpsGrid {
  double start = 0.0;
  double stop = 0.0;
  int count = 1;

  // Inclusive of both ends; a single point is `start`.
  std::vector<double> points() const {
    std::vector<double> out;
    if (count == 1) return {start};
    for (int i = 0; i < count; ++i) {
      out.push_back(i == count - 1 ? stop : start + (stop - start) * i / (count - 1));
    }
    return out;
  }
};

// start:stop:count
inline EpsGrid parse_eps_grid(const std::string& text) {
  std::vector<std::string> parts;
  std::size_t from = 0;
  for (;;) {
    const auto colon = text.find(':', from);
    parts.push_back(text.substr(from, colon - from));
    if (colon == std::string::npos) break;
    from = colon + 1;
  }
  if (parts.size() != 3) throw ParseError("eps", "expected start:stop:count");
  auto number = [](const std::string& s) {
    double v = 0.0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size() || !std::isfinite(v)) {
      throw ParseError("eps", "'" + s + "' is not a number");
    }
    return v;
  };
  EpsGrid g;
  g.start = number(parts[0]);
  g.stop = number(parts[1]);
  int count = 0;
  const auto& c = parts[2];
  const auto [end, ec] = std::from_chars(c.data(), c.data() + c.size(), count);
  if (ec != std::errc() || end != c.data() + c.size() || count < 1) {
    throw ParseError("eps", "count must be a positive integer, got '" + c + "'");
  }
  g.count = count;
  if (g.start < 0.0) throw ParseError("eps", "start must be >= 0");
  if (g.count > 1 && g.stop < g.start) throw ParseError("eps", "stop must be >= start");
  return g;
}

// 12 significant digits, independent of the C locale.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 12);
  return ec == std::errc() ? std::string(buf, end) : std::string("nan");
}

// Error text made safe for a CSV cell.
inline std::string csv_text(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += (c == '\n' || c == '\r') ? ' ' : c;
  }
  return out + "\"";
}

inline int exit_code(Failure f) {
  switch (f) {
    case Failure::kNone:
      return kExitOk;
    case Failure::kEpsOutOfRange:
      return kExitEpsRange;
    case Failure::kNoConvergence:
      return kExitNoConvergence;
    default:
      return kExitFailed;
  }
}

struct Options {
  std::string model = kDefaultModel;
  std::string eps = "0:0.1:11";
  std::string units = "bits";
  std::string out;
  std::string mode = "strong";
  NumericsConfig numerics;
};

namespace detail {

inline void write_row(std::ostream& os, const std::vector<double>& values, bool error_column,
                      const std::string& error) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) os << ',';
    os << format_number(values[i]);
  }
  if (error_column) os << ',' << (error.empty() ? std::string() : csv_text(error));
  os << '\n';
}

inline Units parse_units(const std::string& s) {
  if (s == "bits") return Units::kBits;
  if (s == "nats") return Units::kNats;
  throw ParseError("units", "expected nats or bits, got '" + s + "'");
}

// Clips the grid to [0, 0.999 I(X;Y)) in the given units.
inline std::vector<double> clip_to_info(std::vector<double> grid, const TradeoffSolver& solver,
                                        Units units, std::ostream& err) {
  const double info = solver.info_xy().value;
  if (!std::isfinite(info)) return grid;
  const double limit = from_nats(0.999 * info, units);
  bool clipped = false;
  for (double& e : grid) {
    if (e > limit) {
      e = limit;
      clipped = true;
    }
  }
  if (clipped) {
    err << "warning: eps clipped to 0.999 * I(X;Y) = " << format_number(limit) << ' '
        << to_string(units) << '\n';
  }
  return grid;
}

template <class Point>
int worst_exit(const std::vector<Point>& pts) {
  for (const auto& p : pts) {
    if (!p.error.empty()) return exit_code(p.failure);
  }
  return kExitOk;
}

template <class Point>
bool any_error(const std::vector<Point>& pts) {
  for (const auto& p : pts) {
    if (!p.error.empty()) return true;
  }
  return false;
}

}  // namespace detail

inline int run_curve(const Options& o, std::ostream& os, std::ostream& err) {
  const Units units = detail::parse_units(o.units);
  const TradeoffSolver solver(parse_model(o.model), o.numerics);
  const auto grid = detail::clip_to_info(parse_eps_grid(o.eps).points(), solver, units, err);
  const auto pts = rate_privacy_curve(solver, grid, units);
  const bool errors = detail::any_error(pts);
  os << "eps,gamma_eps,g_eps,g_eps_err,g_prime,g_second,taylor2,lower_epi,upper_epi"
     << (errors ? ",error" : "") << '\n';
  for (const auto& p : pts) {
    detail::write_row(os,
                      {p.eps, p.gamma_eps, p.g_eps.value, p.g_eps.err, p.g_prime.value,
                       p.g_second.value, p.taylor2, p.lower_epi, p.upper_epi},
                      errors, p.error);
  }
  return detail::worst_exit(pts);
}

inline int run_ensr(const Options& o, std::ostream& os, std::ostream&) {
  EnsrMode mode;
  if (o.mode == "strong") {
    mode = EnsrMode::kStrong;
  } else if (o.mode == "weak") {
    mode = EnsrMode::kWeak;
  } else {
    throw ParseError("mode", "expected strong or weak, got '" + o.mode + "'");
  }
  const TradeoffSolver solver(parse_model(o.model), o.numerics);
  const auto pts = ensr_curve(solver, parse_eps_grid(o.eps).points(), mode);
  const bool errors = detail::any_error(pts);
  os << "eps,gamma_eps,ensr,ensr_err,gaussian_upper,thm4_lower,linear_lower"
     << (errors ? ",error" : "") << '\n';
  for (const auto& p : pts) {
    detail::write_row(os,
                      {p.eps, p.gamma_eps, p.ensr.value, p.ensr.err, p.gaussian_upper,
                       p.thm4_lower, p.linear_lower},
                      errors, p.error);
  }
  return detail::worst_exit(pts);
}

inline int run_approx(const Options& o, std::ostream& os, std::ostream& err) {
  const Units units = detail::parse_units(o.units);
  const TradeoffSolver solver(parse_model(o.model), o.numerics);
  const auto grid = detail::clip_to_info(parse_eps_grid(o.eps).points(), solver, units, err);
  const auto pts = rate_privacy_curve(solver, grid, units);
  const double eta = solver.eta_sq().value;
  const bool errors = detail::any_error(pts);
  os << "eps,g_eps,taylor1,taylor2" << (errors ? ",error" : "") << '\n';
  for (const auto& p : pts) {
    // eps / eta^2 is the same in either unit system.
    detail::write_row(os, {p.eps, p.g_eps.value, p.eps / eta, p.taylor2}, errors, p.error);
  }
  return detail::worst_exit(pts);
}

inline int run_info(const Options& o, std::ostream& os, std::ostream&) {
  const TradeoffSolver solver(parse_model(o.model), o.numerics);
  os << "model: " << kind_name(solver.model()) << '\n';
  auto line = [&](const std::string& name, auto&& compute, bool scale_bits) {
    os << name << ": ";
    try {
      const Estimate e = compute();
      if (scale_bits) {
        os << "nats=" << format_number(e.value) << " bits=" << format_number(e.value / kLn2)
           << " err_nats=" << format_number(e.err);
      } else {
        os << format_number(e.value) << " err=" << format_number(e.err);
      }
    } catch (const std::exception& ex) {
      os << "unavailable (" << ex.what() << ")";
    }
    os << '\n';
  };
  line("I(X;Y)", [&] { return solver.info_xy(); }, true);
  line("eta^2", [&] { return solver.eta_sq(); }, false);
  // Delta is the eps^2 coefficient of g; with both g and eps in bits it
  // picks up a factor ln 2.
  os << "Delta: ";
  try {
    const Estimate d = solver.delta();
    os << "nats=" << format_number(d.value) << " bits=" << format_number(kLn2 * d.value)
       << " err_nats=" << format_number(d.err);
  } catch (const std::exception& ex) {
    os << "unavailable (" << ex.what() << ")";
  }
  os << '\n';
  line("rho_m^2(X,Y)", [&] { return solver.rho_m_sq_xy(); }, false);
  line("D(Y)", [&] { return solver.non_gaussianness_y(); }, true);
  return kExitOk;
}

inline int run_verify_command(const Options& o, std::ostream& os, std::ostream&) {
  const VerifyReport r = run_verify(o.numerics, &os);
  os << (r.ok() ? "PASS " : "FAIL ") << r.passed() << '/' << r.total() << '\n';
  return r.ok() ? kExitOk : kExitFailed;
}

inline void add_common(CLI::App* sub, Options& o, bool with_eps, bool with_units) {
  sub->add_option("--model", o.model, "model specification or file")->capture_default_str();
  if (with_eps) {
    sub->add_option("--eps", o.eps, "eps grid start:stop:count, inclusive")->capture_default_str();
  }
  if (with_units) {
    sub->add_option("--units", o.units, "nats or bits")->capture_default_str();
  }
  sub->add_option("--out", o.out, "output file (default stdout)");
  sub->add_option("--hermite", o.numerics.hermite_order, "Gauss-Hermite order")
      ->capture_default_str();
  sub->add_option("--legendre", o.numerics.legendre_order, "Gauss-Legendre order")
      ->capture_default_str();
  sub->add_option("--tol-abs", o.numerics.abs_tol, "absolute tolerance")->capture_default_str();
  sub->add_option("--tol-rel", o.numerics.rel_tol, "relative tolerance")->capture_default_str();
  sub->add_option("--mc", o.numerics.mc_samples, "Monte Carlo samples")->capture_default_str();
  sub->add_option("--seed", o.numerics.seed, "random seed")->capture_default_str();
  sub->add_flag("--force-numeric", o.numerics.force_numeric,
                "use the numerical path for jointly Gaussian models");
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Rate-privacy and estimation-privacy tradeoffs for Z = sqrt(gamma) Y + N"};
  app.require_subcommand(1);
  Options o;
  CLI::App* curve = app.add_subcommand("curve", "rate-privacy function g_eps (CSV)");
  CLI::App* ensr_cmd = app.add_subcommand("ensr", "estimation noise-to-signal ratio (CSV)");
  CLI::App* approx = app.add_subcommand("approx", "g_eps and its expansions (CSV)");
  CLI::App* info = app.add_subcommand("info", "model constants in nats and bits");
  CLI::App* verify = app.add_subcommand("verify", "property checks over built-in models");
  add_common(curve, o, true, true);
  add_common(ensr_cmd, o, true, false);
  ensr_cmd->add_option("--mode", o.mode, "strong (rho_m^2) or weak (eta^2)")
      ->capture_default_str();
  add_common(approx, o, true, true);
  add_common(info, o, false, false);
  add_common(verify, o, false, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitParse;
  }

  std::ofstream file;
  std::ostream* os = &out;
  try {
    o.numerics.validate();
    if (!o.out.empty()) {
      file.open(o.out);
      if (!file) throw ParseError("out", "cannot open '" + o.out + "' for writing");
      os = &file;
    }
    if (curve->parsed()) return run_curve(o, *os, err);
    if (ensr_cmd->parsed()) return run_ensr(o, *os, err);
    if (approx->parsed()) return run_approx(o, *os, err);
    if (info->parsed()) return run_info(o, *os, err);
    return run_verify_command(o, *os, err);
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitParse;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitParse;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(classify(e));
  }
}

}  // namespace privfilter::cli
