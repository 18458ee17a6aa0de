#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "kwc/error.hpp"
#include "kwc/model.hpp"

namespace {

using kwc::ModelParams;
using kwc::ScalarFunction;

TEST(FDelta, MatchesClosedForm) {
  const std::vector<double> w{3.0, 4.0};
  EXPECT_DOUBLE_EQ(kwc::eval_f_delta(1.0, w), std::sqrt(26.0) - 1.0);
  EXPECT_DOUBLE_EQ(kwc::eval_f_delta(3.0, std::vector<double>{4.0}), 2.0);
  EXPECT_EQ(kwc::eval_f_delta(0.5, std::vector<double>{0.0, 0.0}), 0.0);
}

TEST(FDelta, RejectsNonpositiveDelta) {
  const std::vector<double> w{1.0};
  EXPECT_THROW(kwc::eval_f_delta(0.0, w), kwc::InvalidParameter);
  EXPECT_THROW(kwc::eval_grad_f_delta(-1.0, w), kwc::InvalidParameter);
}

TEST(FDelta, SandwichMonotonicityConvexity) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::uniform_real_distribution<double> d(1e-3, 2.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int k = 0; k < 1000; ++k) {
    const std::vector<double> a{u(rng), u(rng)};
    const std::vector<double> b{u(rng), u(rng)};
    const double delta = d(rng);
    const double norm = std::hypot(a[0], a[1]);
    const double f = kwc::eval_f_delta(delta, a);
    EXPECT_GE(norm - f, -1e-14);
    EXPECT_LE(norm - f, delta + 1e-14);

    const double smaller = delta * unit(rng);
    if (smaller > 0.0) EXPECT_GE(kwc::eval_f_delta(smaller, a), f - 1e-14);

    const double lambda = unit(rng);
    const std::vector<double> mix{lambda * a[0] + (1 - lambda) * b[0], lambda * a[1] + (1 - lambda) * b[1]};
    EXPECT_LE(kwc::eval_f_delta(delta, mix),
              lambda * f + (1 - lambda) * kwc::eval_f_delta(delta, b) + 1e-12);
  }
}

TEST(FDelta, GradientMatchesCentralDifferences) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int k = 0; k < 200; ++k) {
    const double delta = 0.05 + 0.5 * std::abs(u(rng));
    std::vector<double> w{u(rng), u(rng)};
    const auto grad = kwc::eval_grad_f_delta(delta, w);
    EXPECT_LT(std::hypot(grad[0], grad[1]), 1.0);
    for (int i = 0; i < 2; ++i) {
      const double h = 1e-6;
      auto plus = w;
      auto minus = w;
      plus[i] += h;
      minus[i] -= h;
      const double fd = (kwc::eval_f_delta(delta, plus) - kwc::eval_f_delta(delta, minus)) / (2 * h);
      EXPECT_LE(std::abs(fd - grad[i]), 1e-6 * std::max(1.0, std::abs(grad[i])));
    }
  }
}

TEST(TauStar, Examples) {
  EXPECT_DOUBLE_EQ(kwc::tau_star(1, 1), 1.0 / 6.0);
  EXPECT_DOUBLE_EQ(kwc::tau_star(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(kwc::tau_star(3, 0), 0.125);
  EXPECT_THROW(kwc::tau_star(-1, 0), kwc::InvalidParameter);
  for (double l : {0.0, 0.3, 10.0, 1e6}) {
    EXPECT_GT(kwc::tau_star(l, l), 0.0);
    EXPECT_LE(kwc::tau_star(l, l), 0.5);
  }
}

TEST(ScalarFunctions, ValuesDerivativesPrimitives) {
  const ScalarFunction g{"linear_g", {2.0, 1.0}};
  EXPECT_DOUBLE_EQ(g.value(0.0), -2.0);
  EXPECT_DOUBLE_EQ(g.derivative(0.3), 2.0);
  EXPECT_DOUBLE_EQ(g.primitive(0.0), 1.0);
  const ScalarFunction alpha{"quadratic_alpha", {0.1, 0.0, 1.0}};
  EXPECT_DOUBLE_EQ(alpha.value(1.0), 0.6);
  EXPECT_DOUBLE_EQ(alpha.derivative(0.5), 0.5);
  EXPECT_DOUBLE_EQ(alpha.second_derivative(0.2), 1.0);
  EXPECT_THROW(kwc::check_function({"cubic", {1.0}}, "alpha"), kwc::InvalidParameter);
  EXPECT_THROW(kwc::check_function({"constant", {1.0, 2.0}}, "alpha0"), kwc::InvalidParameter);
}

TEST(Validation, DefaultConfigPasses) {
  const auto report = kwc::validate_assumptions(ModelParams{});
  EXPECT_TRUE(report.ok());
  EXPECT_NEAR(report.delta_alpha, 0.1, 1e-12);
  EXPECT_NEAR(report.lip_g, 1.0, 1e-9);
  EXPECT_NEAR(report.tau_star, 1.0 / 6.0, 1e-9);
}

TEST(Validation, AlphaWithNonzeroSlopeAtZeroFailsA3) {
  ModelParams p;
  p.alpha = {"linear", {0.0, 1.0}};
  const auto report = kwc::validate_assumptions(p);
  const auto* failure = report.first_failure();
  ASSERT_NE(failure, nullptr);
  bool a3 = false;
  for (const auto& c : report.checks) {
    if (c.label == "A3" && !c.passed) {
      a3 = true;
      ASSERT_TRUE(c.witness.has_value());
      EXPECT_EQ(*c.witness, 0.0);
      break;
    }
  }
  EXPECT_TRUE(a3);
}

TEST(Validation, PositiveConstantGFailsA1) {
  ModelParams p;
  p.g = {"constant", {1.0}};
  const auto report = kwc::validate_assumptions(p);
  ASSERT_NE(report.first_failure(), nullptr);
  EXPECT_EQ(report.first_failure()->label, "A1");
}

TEST(Validation, StepSizeGuard) {
  ModelParams p;
  p.tau = 1.0 / 6.0;
  auto report = kwc::validate_assumptions(p);
  ASSERT_NE(report.first_failure(), nullptr);
  EXPECT_EQ(report.first_failure()->label, "tau");
  p.tau = 1.0 / 6.0 - 1e-6;
  EXPECT_TRUE(kwc::validate_assumptions(p).ok());
}

TEST(Validation, ParameterRanges) {
  ModelParams p;
  p.kappa = 0.0;
  EXPECT_FALSE(kwc::validate_assumptions(p).ok());
  p = ModelParams{};
  p.r0 = 2.0;
  EXPECT_FALSE(kwc::validate_assumptions(p).ok());
}

}  // namespace
