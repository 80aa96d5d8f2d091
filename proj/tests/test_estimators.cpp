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

#include "privfilter/estimators.hpp"

namespace privfilter {
namespace {

template <class F>
double simpson(F&& f, double lo, double hi, int n = 20000) {
  const double h = (hi - lo) / n;
  double acc = f(lo) + f(hi);
  for (int i = 1; i < n; ++i) acc += (i % 2 ? 4.0 : 2.0) * f(lo + i * h);
  return acc * h / 3.0;
}

double phi(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }

NumericsConfig numeric_cfg() {
  NumericsConfig cfg;
  cfg.force_numeric = true;
  return cfg;
}

const JointModel kGauss = BivariateGaussian{0.0, 0.0, 1.0, 1.0, 0.5};
const JointModel kUniformX =
    AdditiveNoise{UniformDist{-std::sqrt(3.0), std::sqrt(3.0)}, 1.0, GaussianDist{0.0, 1.0}};
const JointModel kUniformNoise =
    AdditiveNoise{GaussianDist{0.0, 1.0}, 1.0, UniformDist{-std::sqrt(3.0), std::sqrt(3.0)}};
const JointModel kClipped = Clipped{GaussianDist{0.0, 1.0}, 1.0};

TEST(Mmse, GaussianNumericMatchesClosedForm) {
  const Evaluator ev(kGauss, numeric_cfg());
  EXPECT_FALSE(ev.closed_form());
  for (double g : {0.3, 1.0, 4.0}) {
    const MmsePair mp = ev.mmse_pair(g);
    EXPECT_NEAR(mp.mmse_y_z.value, 1.0 / (1.0 + g), 1e-12);
    EXPECT_NEAR(mp.mmse_y_zx.value, 0.75 / (1.0 + 0.75 * g), 1e-12);
    EXPECT_NEAR(mp.var2_y_z.value, 1.0 / ((1.0 + g) * (1.0 + g)), 1e-12);
  }
}

TEST(Mmse, UniformPriorAgainstDirectIntegration) {
  // mmse(Y|Z) for Y uniform on [-sqrt3, sqrt3], A = 1 + noise, by brute force.
  const double r3 = std::sqrt(3.0);
  const JointModel m = AdditiveNoise{UniformDist{-r3, r3}, 1.0, GaussianDist{0.0, 0.5}};
  const Evaluator ev(m, NumericsConfig{});
  const double gamma = 2.0, sg = std::sqrt(gamma);
  // Z = sg Y + N with Y = X + M; X|Z and Y|Z via the joint of (Y, Z).
  const Law ly = marginal_y(m);
  auto pz = [&](double z) {
    return simpson([&](double y) { return ly.pdf(y) * phi(z - sg * y); }, -8.0, 8.0, 1600);
  };
  auto post_var = [&](double z) {
    const double p = pz(z);
    const double m1 =
        simpson([&](double y) { return y * ly.pdf(y) * phi(z - sg * y); }, -8.0, 8.0, 1600) / p;
    const double m2 = simpson([&](double y) { return y * y * ly.pdf(y) * phi(z - sg * y); },
                              -8.0, 8.0, 1600) /
                      p;
    return (m2 - m1 * m1) * p;
  };
  const double direct = simpson(post_var, -16.0, 16.0, 800);
  EXPECT_NEAR(ev.mmse_pair(gamma).mmse_y_z.value, direct, 1e-7);
}

TEST(MutualInformation, GaussianClosedForms) {
  const Evaluator ev(kGauss, numeric_cfg());
  EXPECT_NEAR(ev.mi_y_z(1.0).value, 0.5 * std::log(2.0), 1e-9);
  EXPECT_NEAR(ev.mi_x_z(1.0).value, 0.5 * std::log(2.0 / 1.75), 1e-9);
  EXPECT_EQ(ev.mi_x_z(0.0).value, 0.0);
  const auto path = ev.info_path({0.5, 1.0, 2.0});
  EXPECT_NEAR(path[1].mi_x_z.value, 0.5 * std::log(2.0 / 1.75), 1e-9);
  EXPECT_NEAR(path[2].mi_y_z.value, 0.5 * std::log(3.0), 1e-9);
}

TEST(MutualInformation, AdditiveUniformNoise) {
  // I(X;Y) = h(Y) - h(M) with h(Y) by direct integration of the convolution.
  const double r3 = std::sqrt(3.0);
  auto py = [&](double y) {
    return (0.5 * std::erfc(-(y + r3) / std::sqrt(2.0)) - 0.5 * std::erfc(-(y - r3) / std::sqrt(2.0))) /
           (2.0 * r3);
  };
  const double hy = simpson(
      [&](double y) {
        const double p = py(y);
        return p > 0.0 ? -p * std::log(p) : 0.0;
      },
      -14.0, 14.0, 40000);
  const Evaluator ev(kUniformNoise, NumericsConfig{});
  EXPECT_NEAR(ev.mutual_information_xy().value, hy - std::log(2.0 * r3), 1e-8);
}

TEST(Eta, ValuesAndTotalVariance) {
  EXPECT_NEAR(Evaluator(kGauss, numeric_cfg()).eta_sq().value, 0.25, 1e-12);
  EXPECT_NEAR(Evaluator(kUniformX, NumericsConfig{}).eta_sq().value, 0.5, 1e-12);
  const double ex2 = simpson([](double y) { return y * y * phi(y); }, -1.0, 1.0);
  EXPECT_NEAR(Evaluator(kClipped, NumericsConfig{}).eta_sq().value, ex2, 1e-10);
  const Evaluator c(kClipped, NumericsConfig{});
  EXPECT_NEAR(c.mean_cond_var(), 1.0 - ex2, 1e-10);
}

TEST(Delta, GaussianAndClipped) {
  EXPECT_NEAR(Evaluator(kGauss, numeric_cfg()).delta_coeff().value, 12.0, 1e-8);
  // E[var^2(Y|X)] for the clipped model: the tail branch contributes
  // P(|Y| > 1) * (E[Y^2 | |Y| > 1])^2.
  const double tail = 2.0 * simpson(phi, 1.0, 12.0);
  const double m2 = 2.0 * simpson([](double y) { return y * y * phi(y); }, 1.0, 12.0) / tail;
  const Evaluator c(kClipped, NumericsConfig{});
  EXPECT_NEAR(c.mean_cond_var2(), tail * m2 * m2, 1e-9);
  EXPECT_LT(c.delta_coeff().value, 0.0);
}

TEST(NonGaussianness, UniformAndGaussian) {
  const NumericsConfig cfg;
  EXPECT_NEAR(non_gaussianness(UniformDist{0.0, 1.0}, cfg).value,
              0.5 * std::log(2.0 * M_PI * M_E / 12.0), 1e-10);
  EXPECT_NEAR(non_gaussianness(GaussianDist{3.0, 2.0}, cfg).value, 0.0, 1e-14);
}

TEST(Decomposition, ResidualVanishes) {
  for (const JointModel* m : {&kGauss, &kUniformX, &kUniformNoise, &kClipped}) {
    const Evaluator ev(*m, numeric_cfg());
    for (double g : {0.5, 2.0}) {
      const Estimate r = ev.decomposition_residual(g);
      EXPECT_NEAR(r.value, 0.0, r.err + 1e-9) << kind_name(*m) << " gamma=" << g;
    }
  }
}

TEST(Decomposition, GaussianConditionalIsGaussian) {
  const Evaluator ev(kGauss, numeric_cfg());
  EXPECT_NEAR(ev.cond_non_gaussianness(1.0).value, 0.0, 1e-10);
}

TEST(SStar, BoundsAndGaussianValue) {
  const NumericsConfig cfg;
  const Estimate g = s_star_lower_bound(kGauss, cfg);
  EXPECT_LE(g.value, 0.25 + 1e-9);
  EXPECT_GE(g.value, 0.24);
  const Estimate u = s_star_lower_bound(kUniformX, cfg);
  EXPECT_GE(u.value, 0.5 - 0.01);
  EXPECT_LE(u.value, 1.0);
  EXPECT_EQ(s_star_lower_bound(BivariateGaussian{0, 0, 1, 1, 0.0}, cfg).value, 0.0);
}

TEST(Errors, NegativeGammaRejected) {
  const Evaluator ev(kUniformX, NumericsConfig{});
  EXPECT_THROW(ev.mmse_pair(-1.0), std::invalid_argument);
}

}  // namespace
}  // namespace privfilter
