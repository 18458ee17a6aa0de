#ifndef KWC_MODEL_HPP
#define KWC_MODEL_HPP

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kwc/mesh.hpp"

namespace kwc {

/**
 * A scalar model function picked by a string tag plus coefficients.
 *
 *   "constant"        [c]            c
 *   "linear"          [a, b]         a + b*s
 *   "linear_g"        [k, root]      k*(s - root), primitive k/2*(s - root)^2
 *   "quadratic_alpha" [c0, c1, c2]   c0 + c1*s + c2*s^2/2
 *
 * primitive() is the antiderivative used as g-hat when the function plays
 * the role of g or g_Gamma.
 */
struct ScalarFunction {
  std::string kind = "constant";
  std::vector<double> coeffs = {0.0};

  double value(double s) const;
  double derivative(double s) const;
  double second_derivative(double s) const;
  double primitive(double s) const;

  bool operator==(const ScalarFunction&) const = default;
};

/// Checks the tag and the coefficient count; throws InvalidParameter.
void check_function(const ScalarFunction& f, std::string_view role);

struct ModelParams {
  double kappa = 0.05;
  double kappa_gamma = 0.05;
  double epsilon = 1.0;
  double delta = 0.05;
  double tau = 0.01;
  double r0 = 0.0;
  double r1 = 1.0;
  ScalarFunction g{"linear_g", {1.0, 1.0}};
  ScalarFunction g_gamma{"linear_g", {1.0, 1.0}};
  ScalarFunction alpha{"quadratic_alpha", {0.1, 0.0, 1.0}};
  ScalarFunction alpha0{"constant", {1.0}};
  ScalarFunction alpha_gamma0{"constant", {1.0}};
  MeshSpec grid{};

  bool operator==(const ModelParams&) const = default;
};

/// f_delta(w) = sqrt(delta^2 + |w|^2) - delta.
double eval_f_delta(double delta, std::span<const double> omega);
/// grad f_delta(w) = w / sqrt(delta^2 + |w|^2), strictly inside the unit ball.
std::vector<double> eval_grad_f_delta(double delta, std::span<const double> omega);

// Unchecked scalar forms used per edge by the solvers.
inline double f_delta(double delta, double w) { return std::sqrt(delta * delta + w * w) - delta; }
inline double f_delta_prime(double delta, double w) { return w / std::sqrt(delta * delta + w * w); }
inline double f_delta_second(double delta, double w) {
  const double r2 = delta * delta + w * w;
  return delta * delta / (r2 * std::sqrt(r2));
}

/// The fixed 1001-point sampling of [-2, 3] used by every sample-based check.
std::span<const double> assumption_samples();

/// Largest |f'| seen on the assumption samples: difference quotients between
/// neighbouring samples and |f'| at every sample.
double lipschitz_estimate(const ScalarFunction& f);

/// Largest step for which the eta-step objective stays strictly convex:
/// 1 / (2 (1 + lip_g + lip_g_gamma)).
double tau_star(double lip_g, double lip_g_gamma);

struct AssumptionCheck {
  std::string label;  // "A1" ... "A4", "params", "tau"
  std::string description;
  bool passed = true;
  std::optional<double> witness;  // sample point where the check failed
};

struct ValidationReport {
  std::vector<AssumptionCheck> checks;
  double lip_g = 0.0;
  double lip_g_gamma = 0.0;
  double delta_alpha = 0.0;
  double tau_star = 0.0;

  bool ok() const;
  /// First failing check, if any.
  const AssumptionCheck* first_failure() const;
};


/// Sample-based verification of (A1)-(A4), the parameter ranges and the
/// step-size guard tau < tau_star. Never throws for a failed assumption.
ValidationReport validate_assumptions(const ModelParams& params);

}  // namespace kwc

#endif  // KWC_MODEL_HPP
