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
#include <cstdlib>

#include "privfilter/tradeoff.hpp"

namespace privfilter {
namespace {

NumericsConfig numeric_cfg() {
  NumericsConfig cfg;
  cfg.force_numeric = true;
  return cfg;
}

const JointModel kGauss = BivariateGaussian{0.0, 0.0, 1.0, 1.0, 0.5};
const JointModel kUniformNoise =
    AdditiveNoise{GaussianDist{0.0, 1.0}, 1.0, UniformDist{-std::sqrt(3.0), std::sqrt(3.0)}};
const JointModel kClipped = Clipped{GaussianDist{0.0, 1.0}, 1.0};

// Closed forms in bits for the unit-variance Gaussian pair.
double g_bits(double eps, double rho2) {
  return 0.5 * std::log2(rho2 / (std::exp2(-2.0 * eps) + rho2 - 1.0));
}
double gamma_bits(double eps, double rho2) {
  const double q = std::exp2(-2.0 * eps);
  return (1.0 - q) / (q + rho2 - 1.0);
}

TEST(Units, Conversion) {
  EXPECT_NEAR(to_nats(1.0, Units::kBits), std::log(2.0), 1e-16);
  EXPECT_EQ(from_nats(0.7, Units::kNats), 0.7);
  EXPECT_STREQ(to_string(Units::kBits), "bits");
}

TEST(RatePrivacy, GaussianClosedForm) {
  const TradeoffSolver s(kGauss, NumericsConfig{});
  const double eps = 0.1 * kLn2;
  const TradeoffPoint p = s.g_eps(eps);
  EXPECT_NEAR(p.g_eps.value / kLn2, g_bits(0.1, 0.25), 1e-12);
  EXPECT_NEAR(p.gamma_eps, gamma_bits(0.1, 0.25), 1e-10);
  const double q = std::exp2(-0.2);
  EXPECT_NEAR(p.g_prime.value, q / (q + 0.25 - 1.0), 1e-10);
  EXPECT_EQ(p.g_eps.err, 0.0);
}

TEST(RatePrivacy, GaussianNumericPath) {
  const TradeoffSolver s(kGauss, numeric_cfg());
  for (double eps_bits : {0.02, 0.1, 0.18}) {
    const TradeoffPoint p = s.g_eps(eps_bits * kLn2);
    EXPECT_NEAR(p.g_eps.value / kLn2, g_bits(eps_bits, 0.25), 1e-6);
    EXPECT_NEAR(p.gamma_eps / gamma_bits(eps_bits, 0.25), 1.0, 1e-6);
    EXPECT_LE(p.lower_epi, p.g_eps.value + 1e-12);
    EXPECT_LE(p.g_eps.value, p.upper_epi + 1e-12);
  }
}

TEST(RatePrivacy, DerivativesAtZero) {
  const TradeoffSolver s(kGauss, numeric_cfg());
  const TradeoffPoint p = s.g_eps(0.0);
  EXPECT_EQ(p.gamma_eps, 0.0);
  EXPECT_EQ(p.g_eps.value, 0.0);
  EXPECT_NEAR(p.g_prime.value, 4.0, 1e-10);
  EXPECT_NEAR(p.g_second.value, 24.0, 1e-8);
}

TEST(RatePrivacy, OutOfRange) {
  const TradeoffSolver s(kGauss, NumericsConfig{});
  const double info = s.info_xy().value;
  EXPECT_THROW(s.g_eps(info), EpsOutOfRange);
  EXPECT_THROW(s.g_eps(-0.1), EpsOutOfRange);
  const auto pts = rate_privacy_curve(s, {0.01, info * 1.5}, Units::kNats);
  EXPECT_TRUE(pts[0].error.empty());
  EXPECT_EQ(pts[1].failure, Failure::kEpsOutOfRange);
  EXPECT_TRUE(std::isnan(pts[1].g_eps.value));
}

TEST(RatePrivacy, ClippedIsLocallyConcave) {
  const TradeoffSolver s(kClipped, NumericsConfig{});
  EXPECT_LT(s.delta().value, 0.0);
  const TradeoffPoint p = s.g_eps(0.05);
  EXPECT_LT(p.g_eps.value, 0.05 / s.eta_sq().value);
  EXPECT_GT(p.taylor2 - p.g_eps.value, -1.0);
}

TEST(RatePrivacy, CurveUnitsAndDeterminism) {
  const TradeoffSolver s(kGauss, numeric_cfg());
  const auto bits = rate_privacy_curve(s, {0.05, 0.1}, Units::kBits);
  const auto nats = rate_privacy_curve(s, {0.05 * kLn2, 0.1 * kLn2}, Units::kNats);
  EXPECT_NEAR(bits[1].g_eps.value * kLn2, nats[1].g_eps.value, 1e-12);
  ::setenv("PRIVFILTER_THREADS", "1", 1);
  const auto one = rate_privacy_curve(s, {0.02, 0.05, 0.1, 0.15}, Units::kBits);
  ::setenv("PRIVFILTER_THREADS", "3", 1);
  const auto three = rate_privacy_curve(s, {0.02, 0.05, 0.1, 0.15}, Units::kBits);
  ::unsetenv("PRIVFILTER_THREADS");
  for (std::size_t i = 0; i < one.size(); ++i) {
    EXPECT_EQ(one[i].g_eps.value, three[i].g_eps.value);
    EXPECT_EQ(one[i].gamma_eps, three[i].gamma_eps);
  }
}

TEST(Ensr, GaussianClosedAndNumeric) {
  const EnsrPoint c = ensr(kGauss, 0.1, EnsrMode::kStrong, NumericsConfig{});
  EXPECT_EQ(c.ensr.value, 1.0 - 0.1 / 0.25);
  EXPECT_EQ(c.ensr.err, 0.0);
  const EnsrPoint n = ensr(kGauss, 0.1, EnsrMode::kStrong, numeric_cfg());
  EXPECT_NEAR(n.ensr.value, 0.6, 1e-6);
  EXPECT_EQ(ensr(kGauss, 0.0, EnsrMode::kWeak, NumericsConfig{}).ensr.value, 1.0);
  EXPECT_THROW(ensr(kGauss, 0.3, EnsrMode::kStrong, NumericsConfig{}), EpsOutOfRange);
}

TEST(Ensr, Thm4GaussianValue) {
  const EnsrPoint c = ensr(kGauss, 0.1, EnsrMode::kStrong, NumericsConfig{});
  // 2^{-2 g} at eps = 0.1 bits with D(Y) = 0.
  EXPECT_NEAR(c.thm4_lower, (std::exp2(-0.2) + 0.25 - 1.0) / 0.25, 1e-12);
  EXPECT_NEAR(c.linear_lower, 1.0 - 0.2 / 0.25, 1e-12);
  EXPECT_LE(c.thm4_lower, c.ensr.value);
}

TEST(Ensr, UniformNoiseOrdering) {
  const TradeoffSolver s(kUniformNoise, NumericsConfig{});
  const EnsrPoint strong = s.ensr(0.05, EnsrMode::kStrong);
  const EnsrPoint weak = s.ensr(0.05, EnsrMode::kWeak);
  EXPECT_LE(weak.ensr.value, strong.ensr.value + weak.ensr.err + strong.ensr.err);
  EXPECT_LE(strong.ensr.value, strong.gaussian_upper + 1e-3);
  EXPECT_LE(strong.thm4_lower, strong.ensr.value + strong.ensr.err);
  EXPECT_TRUE(strong.constraint_monotone);
}

TEST(Ratios, SupAndInfForGaussianNoise) {
  const double r3 = std::sqrt(3.0);
  const JointModel m = AdditiveNoise{UniformDist{-r3, r3}, 1.0, GaussianDist{0.0, 1.0}};
  const NumericsConfig cfg;
  EXPECT_NEAR(sdpi_ratio_sup(m, cfg).value.value, 0.5, 1e-3);
  EXPECT_NEAR(mmse_ratio_inf(m, cfg).value.value, 0.5, 1e-3);
  EXPECT_THROW(sdpi_ratio_sup(kClipped, cfg), ModelNotSupported);
  EXPECT_THROW(mmse_ratio_inf(kUniformNoise, cfg), ModelNotSupported);
}

TEST(Failure, Classification) {
  EXPECT_EQ(classify(EpsOutOfRange("x")), Failure::kEpsOutOfRange);
  EXPECT_EQ(classify(NoConvergence("x")), Failure::kNoConvergence);
  EXPECT_EQ(classify(std::runtime_error("x")), Failure::kOther);
}

}  // namespace
}  // namespace privfilter
