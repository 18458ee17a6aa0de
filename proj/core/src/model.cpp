#include "kwc/model.hpp"

#include <algorithm>
#include <limits>
#include <array>
#include <sstream>

#include "kwc/error.hpp"

namespace kwc {

namespace {

double coeff(const ScalarFunction& f, std::size_t k) { return k < f.coeffs.size() ? f.coeffs[k] : 0.0; }

std::size_t expected_coeffs(const std::string& kind) {
  if (kind == "constant") return 1;
  if (kind == "linear" || kind == "linear_g") return 2;
  if (kind == "quadratic_alpha") return 3;
  return 0;
}

}  // namespace

double ScalarFunction::value(double s) const {
  if (kind == "constant") return coeff(*this, 0);
  if (kind == "linear") return coeff(*this, 0) + coeff(*this, 1) * s;
  if (kind == "linear_g") return coeff(*this, 0) * (s - coeff(*this, 1));
  if (kind == "quadratic_alpha") return coeff(*this, 0) + coeff(*this, 1) * s + 0.5 * coeff(*this, 2) * s * s;
  throw InvalidParameter("unknown function kind '" + kind + "'");
}

double ScalarFunction::derivative(double s) const {
  if (kind == "constant") return 0.0;
  if (kind == "linear") return coeff(*this, 1);
  if (kind == "linear_g") return coeff(*this, 0);
  if (kind == "quadratic_alpha") return coeff(*this, 1) + coeff(*this, 2) * s;
  throw InvalidParameter("unknown function kind '" + kind + "'");
}

double ScalarFunction::second_derivative(double) const {
  if (kind == "constant" || kind == "linear" || kind == "linear_g") return 0.0;
  if (kind == "quadratic_alpha") return coeff(*this, 2);
  throw InvalidParameter("unknown function kind '" + kind + "'");
}

double ScalarFunction::primitive(double s) const {
  if (kind == "constant") return coeff(*this, 0) * s;
  if (kind == "linear") return coeff(*this, 0) * s + 0.5 * coeff(*this, 1) * s * s;
  if (kind == "linear_g") {
    const double d = s - coeff(*this, 1);
    return 0.5 * coeff(*this, 0) * d * d;
  }
  if (kind == "quadratic_alpha")
    return coeff(*this, 0) * s + 0.5 * coeff(*this, 1) * s * s + coeff(*this, 2) * s * s * s / 6.0;
  throw InvalidParameter("unknown function kind '" + kind + "'");
}

void check_function(const ScalarFunction& f, std::string_view role) {
  const std::size_t want = expected_coeffs(f.kind);
  if (want == 0) throw InvalidParameter(std::string(role) + ": unknown function kind '" + f.kind + "'");
  if (f.coeffs.size() != want) {
    std::ostringstream msg;
    msg << role << ": kind '" << f.kind << "' takes " << want << " coefficient(s), got " << f.coeffs.size();
    throw InvalidParameter(msg.str());
  }
  for (double c : f.coeffs)
    if (!std::isfinite(c)) throw InvalidParameter(std::string(role) + ": non-finite coefficient");
}

double eval_f_delta(double delta, std::span<const double> omega) {
  if (!(delta > 0.0)) throw InvalidParameter("f_delta: delta must be positive");
  double sq = 0.0;
  for (double w : omega) sq += w * w;
  return std::sqrt(delta * delta + sq) - delta;
}

std::vector<double> eval_grad_f_delta(double delta, std::span<const double> omega) {
  if (!(delta > 0.0)) throw InvalidParameter("grad f_delta: delta must be positive");
  double sq = 0.0;
  for (double w : omega) sq += w * w;
  const double r = std::sqrt(delta * delta + sq);
  std::vector<double> out(omega.begin(), omega.end());
  for (double& w : out) w /= r;
  return out;
}

double tau_star(double lip_g, double lip_g_gamma) {
  if (!(lip_g >= 0.0) || !(lip_g_gamma >= 0.0))
    throw InvalidParameter("tau_star: Lipschitz constants must be nonnegative");
  return 1.0 / (2.0 * (1.0 + lip_g + lip_g_gamma));
}

bool ValidationReport::ok() const { return first_failure() == nullptr; }

const AssumptionCheck* ValidationReport::first_failure() const {
  for (const auto& c : checks)
    if (!c.passed) return &c;
  return nullptr;
}

std::span<const double> assumption_samples() {
  static const std::array<double, 1001> samples = [] {
    std::array<double, 1001> s{};
    for (int k = 0; k <= 1000; ++k) s[k] = -2.0 + 5.0 * k / 1000.0;
    return s;
  }();
  return samples;
}

double lipschitz_estimate(const ScalarFunction& f) {
  const auto xs = assumption_samples();
  double lip = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    lip = std::max(lip, std::abs(f.derivative(xs[k])));
    if (k + 1 < xs.size())
      lip = std::max(lip, std::abs(f.value(xs[k + 1]) - f.value(xs[k])) / (xs[k + 1] - xs[k]));
  }
  return lip;
}

namespace {

void add(ValidationReport& r, std::string label, std::string description, bool passed,
         std::optional<double> witness = std::nullopt) {
  r.checks.push_back({std::move(label), std::move(description), passed, passed ? std::nullopt : witness});
}

/// First sample where pred fails, if any.
template <class Pred>
std::optional<double> first_violation(Pred pred) {
  for (double s : assumption_samples())
    if (!pred(s)) return s;
  return std::nullopt;
}

}  // namespace

ValidationReport validate_assumptions(const ModelParams& p) {
  ValidationReport r;

  add(r, "params", "kappa > 0", p.kappa > 0.0);
  add(r, "params", "kappa_gamma > 0", p.kappa_gamma > 0.0);
  add(r, "params", "epsilon >= 0", p.epsilon >= 0.0);
  add(r, "params", "delta > 0", p.delta > 0.0);
  add(r, "params", "tau > 0", p.tau > 0.0);
  add(r, "params", "r0 <= r1", p.r0 <= p.r1);

  const std::pair<const ScalarFunction*, const char*> functions[] = {
      {&p.g, "g"}, {&p.g_gamma, "g_gamma"}, {&p.alpha, "alpha"}, {&p.alpha0, "alpha0"},
      {&p.alpha_gamma0, "alpha_gamma0"}};
  for (const auto& [f, role] : functions) {
    try {
      check_function(*f, role);
    } catch (const InvalidParameter& e) {
      add(r, "params", e.what(), false);
      return r;
    }
  }

  // (A1) sign conditions and nonnegative primitives.
  add(r, "A1", "g(0) <= 0", p.g.value(0.0) <= 0.0, 0.0);
  add(r, "A1", "g(1) >= 0", p.g.value(1.0) >= 0.0, 1.0);
  add(r, "A1", "g_gamma(0) <= 0", p.g_gamma.value(0.0) <= 0.0, 0.0);
  add(r, "A1", "g_gamma(1) >= 0", p.g_gamma.value(1.0) >= 0.0, 1.0);
  {
    auto w = first_violation([&](double s) { return p.g.primitive(s) >= 0.0; });
    add(r, "A1", "g-hat >= 0 on samples", !w, w);
    w = first_violation([&](double s) { return p.g_gamma.primitive(s) >= 0.0; });
    add(r, "A1", "g_gamma-hat >= 0 on samples", !w, w);
  }
  r.lip_g = lipschitz_estimate(p.g);
  r.lip_g_gamma = lipschitz_estimate(p.g_gamma);

  // (A2) positivity of the mobility coefficients.
  {
    auto w = first_violation([&](double s) { return p.alpha0.value(s) > 0.0; });
    add(r, "A2", "alpha0 > 0 on samples", !w, w);
    w = first_violation([&](double s) { return p.alpha_gamma0.value(s) > 0.0; });
    add(r, "A2", "alpha_gamma0 > 0 on samples", !w, w);
  }

  // (A3) alpha'(0) = 0, convexity.
  add(r, "A3", "alpha'(0) = 0", std::abs(p.alpha.derivative(0.0)) <= 1e-12, 0.0);
  {
    auto w = first_violation([&](double s) { return p.alpha.second_derivative(s) >= 0.0; });
    add(r, "A3", "alpha'' >= 0 on samples", !w, w);
  }

  // (A4) uniform positivity.
  double inf = std::numeric_limits<double>::infinity();
  double arg = 0.0;
  for (double s : assumption_samples()) {
    for (const ScalarFunction* f : {&p.alpha, &p.alpha0, &p.alpha_gamma0}) {
      const double v = f->value(s);
      if (v < inf) {
        inf = v;
        arg = s;
      }
    }
  }
  r.delta_alpha = inf;
  add(r, "A4", "delta_alpha = inf(alpha, alpha0, alpha_gamma0) > 0", inf > 0.0, arg);

  r.tau_star = tau_star(r.lip_g, r.lip_g_gamma);
  std::ostringstream msg;
  msg << "tau < tau_star = " << r.tau_star;
  add(r, "tau", msg.str(), p.tau < r.tau_star, p.tau);
  return r;
}

}  // namespace kwc
