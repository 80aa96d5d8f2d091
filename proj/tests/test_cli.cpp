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

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"

namespace privfilter::cli {
namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "privfilter");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<double> fields(const std::string& line) {
  std::vector<double> out;
  std::istringstream in(line);
  for (std::string f; std::getline(in, f, ',');) out.push_back(std::stod(f));
  return out;
}

TEST(EpsGrid, ParseAndExpand) {
  const EpsGrid g = parse_eps_grid("0:0.2:5");
  const auto p = g.points();
  ASSERT_EQ(p.size(), 5u);
  EXPECT_EQ(p.front(), 0.0);
  EXPECT_EQ(p.back(), 0.2);
  EXPECT_NEAR(p[2], 0.1, 1e-16);
  EXPECT_EQ(parse_eps_grid("0.3:0.1:1").points(), std::vector<double>{0.3});
  EXPECT_THROW(parse_eps_grid("0:1"), ParseError);
  EXPECT_THROW(parse_eps_grid("0:1:0"), ParseError);
  EXPECT_THROW(parse_eps_grid("a:1:3"), ParseError);
  EXPECT_THROW(parse_eps_grid("1:0:3"), ParseError);
}

TEST(Format, TwelveSignificantDigits) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(1.0 / 3.0), "0.333333333333");
  EXPECT_EQ(format_number(1e-20), "1e-20");
  EXPECT_EQ(format_number(std::nan("")), "nan");
}

TEST(Curve, GaussianMatchesClosedForm) {
  const CliResult r = run({"curve", "--model", "kind=gaussian rho=0.5", "--eps", "0:0.2:50",
                     "--units", "bits", "--force-numeric"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 51u);
  EXPECT_EQ(ls[0], "eps,gamma_eps,g_eps,g_eps_err,g_prime,g_second,taylor2,lower_epi,upper_epi");
  for (std::size_t i = 1; i < ls.size(); ++i) {
    const auto f = fields(ls[i]);
    ASSERT_EQ(f.size(), 9u);
    const double g = 0.5 * std::log2(0.25 / (std::exp2(-2.0 * f[0]) + 0.25 - 1.0));
    EXPECT_NEAR(f[2], g, 1e-3);
  }
}

TEST(Curve, SinglePointAtZero) {
  const CliResult r = run({"curve", "--eps", "0:0:1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 2u);
  const auto f = fields(ls[1]);
  EXPECT_EQ(f[0], 0.0);
  EXPECT_EQ(f[1], 0.0);
  EXPECT_EQ(f[2], 0.0);
  EXPECT_EQ(f[3], 0.0);
  EXPECT_EQ(f[4], 4.0);
}

TEST(Curve, ClippedStartsConcave) {
  const CliResult r = run({"curve", "--model", "kind=clipped L=1", "--eps", "0:0.5:20"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 21u);
  EXPECT_LT(fields(ls[1])[5], 0.0);  // g'' at eps = 0
  // The tangent eps/eta^2 lies above g.
  const CliResult a = run({"approx", "--model", "kind=clipped L=1", "--eps", "0:0.2:5"});
  ASSERT_EQ(a.code, 0) << a.err;
  const auto al = lines(a.out);
  for (std::size_t i = 2; i < al.size(); ++i) {
    const auto f = fields(al[i]);
    EXPECT_GT(f[2], f[1]) << al[i];
  }
}

TEST(Curve, StopClippedWithWarning) {
  const CliResult r = run({"curve", "--eps", "0:1:3", "--units", "bits"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("warning"), std::string::npos);
  const auto f = fields(lines(r.out)[3]);
  EXPECT_NEAR(f[0], 0.999 * 0.5 * std::log2(1.0 / 0.75), 1e-11);
}

TEST(Curve, ByteIdenticalAcrossRuns) {
  const std::vector<std::string> args = {"curve", "--model", "kind=clipped L=1", "--eps",
                                         "0:0.3:4"};
  EXPECT_EQ(run(args).out, run(args).out);
}

TEST(Errors, ParseFailuresExitTwo) {
  CliResult r = run({"curve", "--model", "kind=gaussian rho=0.5 colour=red"});
  EXPECT_EQ(r.code, kExitParse);
  EXPECT_NE(r.err.find("colour"), std::string::npos);
  EXPECT_EQ(run({"curve", "--eps", "0:1"}).code, kExitParse);
  EXPECT_EQ(run({"curve", "--units", "furlongs"}).code, kExitParse);
  EXPECT_EQ(run({"curve", "--bogus"}).code, kExitParse);
  EXPECT_EQ(run({"curve", "--tol-abs", "-1"}).code, kExitParse);
  EXPECT_EQ(run({}).code, kExitParse);
}

TEST(Errors, EpsOutOfRangeExitThree) {
  const CliResult r = run({"ensr", "--eps", "0:0.5:3"});
  EXPECT_EQ(r.code, kExitEpsRange);
  const auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 4u);
  EXPECT_NE(ls[0].find(",error"), std::string::npos);
  EXPECT_EQ(fields(ls[1].substr(0, ls[1].rfind(',')))[2], 1.0);
}

TEST(Errors, NoConvergenceExitFour) {
  const CliResult r = run({"curve", "--force-numeric", "--tol-abs", "1e-20", "--tol-rel", "1e-20",
                     "--eps", "0.05:0.1:2"});
  EXPECT_EQ(r.code, kExitNoConvergence) << r.out << r.err;
}

TEST(Ensr, GaussianColumn) {
  const CliResult r = run({"ensr", "--eps", "0:0.2:5"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto ls = lines(r.out);
  EXPECT_EQ(ls[0], "eps,gamma_eps,ensr,ensr_err,gaussian_upper,thm4_lower,linear_lower");
  for (std::size_t i = 1; i < ls.size(); ++i) {
    const auto f = fields(ls[i]);
    EXPECT_NEAR(f[2], 1.0 - f[0] / 0.25, 1e-15);
  }
}

TEST(Approx, Columns) {
  const CliResult r = run({"approx", "--units", "nats", "--eps", "0:0.05:3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto ls = lines(r.out);
  EXPECT_EQ(ls[0], "eps,g_eps,taylor1,taylor2");
  const auto f = fields(ls[3]);
  EXPECT_NEAR(f[2], 0.05 / 0.25, 1e-12);
  EXPECT_NEAR(f[3], 0.05 / 0.25 + 12.0 * 0.0025, 1e-12);
}

TEST(Info, BothUnits) {
  const CliResult r = run({"info", "--model", "kind=gaussian rho=0.5"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("I(X;Y): nats=0.143841036226 bits=0.207518749639"), std::string::npos)
      << r.out;
  EXPECT_NE(r.out.find("Delta: nats=12 bits=8.31776616672"), std::string::npos) << r.out;
}

}  // namespace
}  // namespace privfilter::cli
