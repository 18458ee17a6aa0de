#include "kwc/scheme.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "detail/stencil.hpp"

namespace kwc {

std::string_view to_string(ThetaMethod m) {
  switch (m) {
    case ThetaMethod::lagged_diffusivity: return "lagged_diffusivity";
    case ThetaMethod::newton: return "newton";
    case ThetaMethod::hybrid: return "hybrid";
  }
  return "hybrid";
}

std::string_view to_string(LinearSolver s) { return s == LinearSolver::cg ? "cg" : "direct"; }

ThetaMethod theta_method_from_string(std::string_view name) {
  if (name == "lagged_diffusivity") return ThetaMethod::lagged_diffusivity;
  if (name == "newton") return ThetaMethod::newton;
  if (name == "hybrid") return ThetaMethod::hybrid;
  throw InvalidParameter("unknown theta solver '" + std::string(name) + "'");
}

LinearSolver linear_solver_from_string(std::string_view name) {
  if (name == "cg") return LinearSolver::cg;
  if (name == "direct") return LinearSolver::direct;
  throw InvalidParameter("unknown linear solver '" + std::string(name) + "'");
}

double h_norm_squared(const Field& u, const Field& mass) { return u.cwiseAbs2().dot(mass); }

Field a0_mass(const Mesh& mesh, const ModelParams& p, const Field& eta) {
  mesh.check_nodal(eta, "a0_mass");
  Field m(mesh.num_nodes());
  for (int i = 0; i < m.size(); ++i) m[i] = p.alpha0.value(eta[i]) * mesh.volumes()[i];
  for (int s = 0; s < mesh.num_surface_nodes(); ++s) {
    const int node = mesh.boundary_nodes()[s].node;
    m[node] += p.alpha_gamma0.value(eta[node]) * mesh.surface_areas()[s];
  }
  return m;
}

double step_size_limit(const ModelParams& params) {
  return tau_star(lipschitz_estimate(params.g), lipschitz_estimate(params.g_gamma));
}

// ---------------------------------------------------------------------------
// Objectives

ThetaObjective::ThetaObjective(const Mesh& mesh, const ModelParams& params, const Field& eta_prev,
                               const Field& theta_prev)
    : mesh_(&mesh),
      tau_(params.tau),
      delta_(params.delta),
      kappa_gamma_(params.kappa_gamma),
      theta_prev_(theta_prev) {
  mesh.check_nodal(eta_prev, "theta objective eta_prev");
  mesh.check_nodal(theta_prev, "theta objective theta_prev");
  if (!(tau_ > 0.0)) throw InvalidParameter("theta objective: tau must be positive");
  if (!(delta_ > 0.0)) throw InvalidParameter("theta objective: delta must be positive");
  mass_ = a0_mass(mesh, params, eta_prev);
  beta_e_ = edge_average(mesh, apply_function(params.alpha, eta_prev));
}

double ThetaObjective::value(const Field& theta) const {
  const Mesh& m = *mesh_;
  m.check_nodal(theta, "theta objective");
  const Field g = apply_gradient(m, theta);
  const Field& w = m.edge_weights();
  double bulk = 0.0;
  for (Eigen::Index e = 0; e < g.size(); ++e)
    bulk += w[e] * (beta_e_[e] * f_delta(delta_, g[e]) + 0.5 * delta_ * delta_ * g[e] * g[e]);
  const Field gs = apply_surface_gradient(m, restrict_to_surface(m, theta));
  const double surface = 0.5 * kappa_gamma_ * kappa_gamma_ * gs.cwiseAbs2().dot(m.surface_edge_weights());
  return 0.5 / tau_ * h_norm_squared(theta - theta_prev_, mass_) + bulk + surface;
}

Field ThetaObjective::gradient(const Field& theta) const {
  Field magnitude;
  return gradient(theta, magnitude);
}

Field ThetaObjective::gradient(const Field& theta, Field& magnitude) const {
  const Mesh& m = *mesh_;
  m.check_nodal(theta, "theta objective");
  Field grad = mass_.cwiseProduct(theta - theta_prev_) / tau_;
  magnitude = mass_.cwiseProduct(theta.cwiseAbs() + theta_prev_.cwiseAbs()) / tau_;
  const auto edges = m.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const Edge& edge = edges[e];
    const double ge = (theta[edge.head] - theta[edge.tail]) / edge.length;
    const double flux = edge.weight * (beta_e_[e] * f_delta_prime(delta_, ge) + delta_ * delta_ * ge) / edge.length;
    grad[edge.head] += flux;
    grad[edge.tail] -= flux;
    magnitude[edge.head] += std::abs(flux);
    magnitude[edge.tail] += std::abs(flux);
  }
  const auto boundary = m.boundary_nodes();
  for (const Edge& edge : m.surface_edges()) {
    const int a = boundary[edge.tail].node;
    const int b = boundary[edge.head].node;
    const double flux = kappa_gamma_ * kappa_gamma_ * edge.weight * (theta[b] - theta[a]) / (edge.length * edge.length);
    grad[b] += flux;
    grad[a] -= flux;
    magnitude[b] += std::abs(flux);
    magnitude[a] += std::abs(flux);
  }
  return grad;
}

EtaObjective::EtaObjective(const Mesh& mesh, const ModelParams& params, const Field& eta_prev,
                           const Field& theta_new)
    : mesh_(&mesh), params_(&params), eta_prev_(eta_prev) {
  mesh.check_nodal(eta_prev, "eta objective eta_prev");
  mesh.check_nodal(theta_new, "eta objective theta_new");
  if (!(params.tau > 0.0)) throw InvalidParameter("eta objective: tau must be positive");
  if (!(params.delta > 0.0)) throw InvalidParameter("eta objective: delta must be positive");
  mass_ = mesh.h_mass();
  const Field g = apply_gradient(mesh, theta_new);
  f_e_ = g.unaryExpr([d = params.delta](double w) { return f_delta(d, w); });
  nodal_length_ = Field::Zero(mesh.num_nodes());
  const auto edges = mesh.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const double share = 0.5 * edges[e].weight * f_e_[e];
    nodal_length_[edges[e].tail] += share;
    nodal_length_[edges[e].head] += share;
  }
}

double EtaObjective::value(const Field& eta) const {
  const Mesh& m = *mesh_;
  const ModelParams& p = *params_;
  m.check_nodal(eta, "eta objective");
  const Field eta_s = restrict_to_surface(m, eta);
  double v = 0.5 / p.tau * h_norm_squared(eta - eta_prev_, m.h_mass());
  v += 0.5 * p.kappa * p.kappa * apply_gradient(m, eta).cwiseAbs2().dot(m.edge_weights());
  v += 0.5 * p.epsilon * p.epsilon * apply_surface_gradient(m, eta_s).cwiseAbs2().dot(m.surface_edge_weights());
  for (int i = 0; i < m.num_nodes(); ++i)
    v += p.g.primitive(eta[i]) * m.volumes()[i] + p.alpha.value(eta[i]) * nodal_length_[i];
  for (int s = 0; s < m.num_surface_nodes(); ++s) v += p.g_gamma.primitive(eta_s[s]) * m.surface_areas()[s];
  return v;
}

Field EtaObjective::gradient(const Field& eta) const {
  Field magnitude;
  return gradient(eta, magnitude);
}

Field EtaObjective::gradient(const Field& eta, Field& magnitude) const {
  const Mesh& m = *mesh_;
  const ModelParams& p = *params_;
  m.check_nodal(eta, "eta objective");
  Field grad = mass_.cwiseProduct(eta - eta_prev_) / p.tau;
  magnitude = mass_.cwiseProduct(eta.cwiseAbs() + eta_prev_.cwiseAbs()) / p.tau;
  for (int i = 0; i < m.num_nodes(); ++i) {
    const double reaction = p.g.value(eta[i]) * m.volumes()[i];
    const double coupling = p.alpha.derivative(eta[i]) * nodal_length_[i];
    grad[i] += reaction + coupling;
    magnitude[i] += std::abs(reaction) + std::abs(coupling);
  }
  for (int s = 0; s < m.num_surface_nodes(); ++s) {
    const int node = m.boundary_nodes()[s].node;
    const double reaction = p.g_gamma.value(eta[node]) * m.surface_areas()[s];
    grad[node] += reaction;
    magnitude[node] += std::abs(reaction);
  }
  const double k2 = p.kappa * p.kappa;
  for (const Edge& edge : m.edges()) {
    const double flux = k2 * edge.weight * (eta[edge.head] - eta[edge.tail]) / (edge.length * edge.length);
    grad[edge.head] += flux;
    grad[edge.tail] -= flux;
    magnitude[edge.head] += std::abs(flux);
    magnitude[edge.tail] += std::abs(flux);
  }
  const double e2 = p.epsilon * p.epsilon;
  const auto boundary = m.boundary_nodes();
  for (const Edge& edge : m.surface_edges()) {
    const int a = boundary[edge.tail].node;
    const int b = boundary[edge.head].node;
    const double flux = e2 * edge.weight * (eta[b] - eta[a]) / (edge.length * edge.length);
    grad[b] += flux;
    grad[a] -= flux;
    magnitude[b] += std::abs(flux);
    magnitude[a] += std::abs(flux);
  }
  return grad;
}

Field EtaObjective::hessian_diagonal(const Field& eta) const {
  const Mesh& m = *mesh_;
  const ModelParams& p = *params_;
  Field d = mass_ / p.tau;
  for (int i = 0; i < m.num_nodes(); ++i)
    d[i] += p.g.derivative(eta[i]) * m.volumes()[i] + p.alpha.second_derivative(eta[i]) * nodal_length_[i];
  for (int s = 0; s < m.num_surface_nodes(); ++s) {
    const int node = m.boundary_nodes()[s].node;
    d[node] += p.g_gamma.derivative(eta[node]) * m.surface_areas()[s];
  }
  return d;
}

// ---------------------------------------------------------------------------
// Step solvers

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

/// Edge coefficients c * w_e / len_e^2 of a graph Laplacian.
Field laplacian_coefficients(std::span<const Edge> edges, double c) {
  Field out(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) out[e] = c * edges[e].weight / (edges[e].length * edges[e].length);
  return out;
}

/// Stopping rule shared by both steps: the residual must fall below
/// tol * r_ref, or below the rounding floor of the gradient evaluation.
struct Convergence {
  double tol;
  double r_ref;

  bool reached(const Field& grad, const Field& magnitude) const {
    const double r = grad.lpNorm<Eigen::Infinity>();
    const double floor = 100.0 * std::numeric_limits<double>::epsilon() * magnitude.lpNorm<Eigen::Infinity>();
    return r <= std::max(tol * r_ref, floor);
  }
  double relative(const Field& grad) const {
    const double r = grad.lpNorm<Eigen::Infinity>();
    return r_ref > 0.0 ? r / r_ref : r;
  }
};

/// Backtracking on f along d from x; returns the accepted step or 0 when no
/// decrease is found.
template <class Objective>
double backtrack(const Objective& f, const Field& x, double fx, const Field& grad, const Field& d) {
  const double slope = grad.dot(d);
  if (!(slope < 0.0)) return 0.0;
  double t = 1.0;
  for (int k = 0; k < 60; ++k, t *= 0.5) {
    if (f.value(x + t * d) <= fx + 1e-4 * t * slope) return t;
  }
  return 0.0;
}

void check_pair(const Mesh& mesh, const FieldPair& f, std::string_view what) {
  mesh.check_nodal(f.bulk, what);
  for (Eigen::Index i = 0; i < f.bulk.size(); ++i)
    if (!std::isfinite(f.bulk[i])) throw InvalidParameter(std::string(what) + ": non-finite entry");
}

}  // namespace

StepResult theta_step(const Mesh& mesh, const ModelParams& params, const FieldPair& eta_prev,
                      const FieldPair& theta_prev, const SolverOptions& opts,
                      const std::optional<Field>& initial_guess) {
  const auto start = Clock::now();
  check_pair(mesh, eta_prev, "theta_step eta_prev");
  check_pair(mesh, theta_prev, "theta_step theta_prev");
  const ThetaObjective objective(mesh, params, eta_prev.bulk, theta_prev.bulk);

  Field magnitude;
  const Convergence conv{opts.tol_inner, objective.gradient(theta_prev.bulk, magnitude).lpNorm<Eigen::Infinity>()};
  Field theta = initial_guess.value_or(theta_prev.bulk);
  mesh.check_nodal(theta, "theta_step initial guess");

  SolveStats stats;
  const double j0 = objective.value(theta_prev.bulk);
  Field grad = objective.gradient(theta, magnitude);

  detail::EdgeStencil stencil(mesh);
  detail::SpdSolver solver(opts.linear_solver, opts.cg_tol);
  const Field diagonal = objective.weighted_mass() / params.tau;
  const Field surface_coeff = laplacian_coefficients(mesh.surface_edges(), params.kappa_gamma * params.kappa_gamma);
  const auto edges = mesh.edges();
  const double d2 = params.delta * params.delta;
  const Field& beta_e = objective.edge_beta();

  Field best = theta;
  double best_residual = conv.relative(grad);
  Field edge_coeff(edges.size());
  // Newton curvature (f_delta'') or the lagged secant curvature f_delta'(g)/g.
  auto assemble = [&](const Field& g, bool newton) -> const detail::SparseMatrix& {
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const double curvature = newton ? beta_e[e] * f_delta_second(params.delta, g[e])
                                      : beta_e[e] / std::sqrt(d2 + g[e] * g[e]);
      edge_coeff[e] = (curvature + d2) * edges[e].weight / (edges[e].length * edges[e].length);
    }
    return stencil.assemble(diagonal, edge_coeff, surface_coeff);
  };
  bool stalled = false;
  while (!conv.reached(grad, magnitude)) {
    if (stats.outer_iterations >= opts.max_outer) {
      std::ostringstream msg;
      msg << "theta_step: no convergence in " << opts.max_outer << " iterations (relative residual "
          << best_residual << ")";
      throw ConvergenceError(msg.str(), best, best_residual);
    }
    ++stats.outer_iterations;
    const Field g = apply_gradient(mesh, theta);
    const double r_now = grad.lpNorm<Eigen::Infinity>();
    bool advanced = false;

    if (opts.theta_method != ThetaMethod::lagged_diffusivity) {
      Field direction = Field::Zero(theta.size());
      stats.inner_linear_iterations += solver.solve(assemble(g, true), -grad, direction);
      if (opts.theta_method == ThetaMethod::newton) {
        const double t = backtrack(objective, theta, objective.value(theta), grad, direction);
        if (t == 0.0) {
          stalled = true;
          break;
        }
        theta += t * direction;
        advanced = true;
      } else {
        // Accept the full Newton step only if it halves the residual;
        // otherwise fall back to the monotone lagged-diffusivity update.
        Field trial = theta + direction;
        Field trial_magnitude;
        Field trial_grad = objective.gradient(trial, trial_magnitude);
        if (trial_grad.lpNorm<Eigen::Infinity>() <= 0.5 * r_now) {
          theta = std::move(trial);
          grad = std::move(trial_grad);
          magnitude = std::move(trial_magnitude);
          advanced = true;
        }
      }
    }
    if (!advanced) {
      // Lagged diffusivity: theta <- A(theta)^{-1} M theta_prev / tau, solved in
      // correction form since A(theta) theta - M theta_prev / tau = grad J(theta).
      Field correction = Field::Zero(theta.size());
      stats.inner_linear_iterations += solver.solve(assemble(g, false), -grad, correction);
      theta += correction;
    }
    if (!advanced || opts.theta_method == ThetaMethod::newton) grad = objective.gradient(theta, magnitude);
    const double r = conv.relative(grad);
    if (r < best_residual) {
      best_residual = r;
      best = theta;
    }
  }
  if (stalled && !conv.reached(grad, magnitude)) {
    throw ConvergenceError("theta_step: line search stalled before convergence", best, best_residual);
  }

  stats.final_residual_inf_norm = conv.relative(grad);
  stats.objective_decrease = j0 - objective.value(theta);
  stats.wall_time = seconds_since(start);
  return {FieldPair(std::move(theta)), stats};
}

StepResult eta_step(const Mesh& mesh, const ModelParams& params, const FieldPair& eta_prev,
                    const FieldPair& theta_new, const SolverOptions& opts,
                    const std::optional<Field>& initial_guess) {
  const auto start = Clock::now();
  const double limit = step_size_limit(params);
  if (!(params.tau < limit)) {
    std::ostringstream msg;
    msg << "eta_step: tau = " << params.tau << " must be < tau_star = " << limit;
    throw StepSizeError(msg.str());
  }
  check_pair(mesh, eta_prev, "eta_step eta_prev");
  check_pair(mesh, theta_new, "eta_step theta_new");
  const EtaObjective objective(mesh, params, eta_prev.bulk, theta_new.bulk);

  Field magnitude;
  const Convergence conv{opts.tol_inner, objective.gradient(eta_prev.bulk, magnitude).lpNorm<Eigen::Infinity>()};
  Field eta = initial_guess.value_or(eta_prev.bulk);
  mesh.check_nodal(eta, "eta_step initial guess");

  SolveStats stats;
  const double e0 = objective.value(eta_prev.bulk);
  Field grad = objective.gradient(eta, magnitude);

  detail::EdgeStencil stencil(mesh);
  detail::SpdSolver solver(opts.linear_solver, opts.cg_tol);
  const Field edge_coeff = laplacian_coefficients(mesh.edges(), params.kappa * params.kappa);
  const Field surface_coeff = laplacian_coefficients(mesh.surface_edges(), params.epsilon * params.epsilon);

  Field best = eta;
  double best_residual = conv.relative(grad);
  while (!conv.reached(grad, magnitude)) {
    if (stats.outer_iterations >= opts.max_outer) {
      std::ostringstream msg;
      msg << "eta_step: no convergence in " << opts.max_outer << " iterations (relative residual "
          << best_residual << ")";
      throw ConvergenceError(msg.str(), best, best_residual);
    }
    ++stats.outer_iterations;
    const auto& hessian = stencil.assemble(objective.hessian_diagonal(eta), edge_coeff, surface_coeff);
    Field direction = Field::Zero(eta.size());
    stats.inner_linear_iterations += solver.solve(hessian, -grad, direction);
    const double t = backtrack(objective, eta, objective.value(eta), grad, direction);
    if (t == 0.0) break;
    eta += t * direction;
    grad = objective.gradient(eta, magnitude);
    const double r = conv.relative(grad);
    if (r < best_residual) {
      best_residual = r;
      best = eta;
    }
  }
  if (!conv.reached(grad, magnitude)) {
    throw ConvergenceError("eta_step: line search stalled before convergence", best, best_residual);
  }

  stats.final_residual_inf_norm = conv.relative(grad);
  stats.objective_decrease = e0 - objective.value(eta);
  stats.wall_time = seconds_since(start);
  return {FieldPair(std::move(eta)), stats};
}

// ---------------------------------------------------------------------------
// Trajectories

void check_initial_data(const Mesh& mesh, const ModelParams& p, const State& s) {
  mesh.check_nodal(s.eta.bulk, "initial eta");
  mesh.check_nodal(s.theta.bulk, "initial theta");
  if (!s.eta.identified(mesh) || !s.theta.identified(mesh))
    throw InvalidInitialData("initial data: surface values must equal the boundary rows");
  auto report = [](std::string_view name, int node, double value, double lo, double hi) {
    std::ostringstream msg;
    msg << "initial data: " << name << "[" << node << "] = " << value << " outside [" << lo << ", " << hi << "]";
    throw InvalidInitialData(msg.str());
  };
  for (int i = 0; i < mesh.num_nodes(); ++i) {
    const double e = s.eta.bulk[i];
    const double t = s.theta.bulk[i];
    if (!(e >= 0.0 && e <= 1.0)) report("eta", i, e, 0.0, 1.0);
    if (!(t >= p.r0 && t <= p.r1)) report("theta", i, t, p.r0, p.r1);
  }
}

Trajectory run_scheme(const Mesh& mesh, const ModelParams& params, const State& initial, int n_steps,
                      const SolverOptions& opts) {
  if (n_steps < 1) throw InvalidParameter("run_scheme: n_steps must be positive");
  if (!(mesh.spec() == params.grid)) throw InvalidParameter("run_scheme: mesh does not match params.grid");
  const ValidationReport report = validate_assumptions(params);
  if (const AssumptionCheck* bad = report.first_failure()) {
    if (bad->label == "tau") throw StepSizeError("run_scheme: " + bad->description);
    throw InvalidParameter("run_scheme: (" + bad->label + ") " + bad->description + " fails");
  }
  check_initial_data(mesh, params, initial);

  Trajectory traj;
  traj.tau = params.tau;
  State s0{FieldPair(initial.eta.bulk), FieldPair(initial.theta.bulk), 0, 0.0};
  traj.energies.push_back(eval_free_energy(mesh, params, s0.eta, s0.theta, EnergyMode::relaxed));
  traj.states.push_back(std::move(s0));
  traj.states.reserve(n_steps + 1);

  const Field mass = mesh.h_mass();
  for (int i = 1; i <= n_steps; ++i) {
    const State& prev = traj.states.back();
    StepRecord rec;
    State next;
    try {
      auto theta = theta_step(mesh, params, prev.eta, prev.theta, opts);
      auto eta = eta_step(mesh, params, prev.eta, theta.field, opts);
      rec.theta = theta.stats;
      rec.eta = eta.stats;
      next = State{std::move(eta.field), std::move(theta.field), i, i * params.tau};
    } catch (const ConvergenceError& e) {
      throw SchemeConvergenceError(e, std::move(traj));
    }
    rec.diss_eta = 0.5 / params.tau * h_norm_squared(next.eta.bulk - prev.eta.bulk, mass);
    rec.diss_theta =
        0.5 / params.tau * h_norm_squared(next.theta.bulk - prev.theta.bulk, a0_mass(mesh, params, prev.eta.bulk));
    traj.energies.push_back(eval_free_energy(mesh, params, next.eta, next.theta, EnergyMode::relaxed));
    traj.steps.push_back(rec);
    traj.states.push_back(std::move(next));
  }
  return traj;
}

Interpolant interpolant_from_string(std::string_view name) {
  if (name == "forward") return Interpolant::forward;
  if (name == "backward") return Interpolant::backward;
  if (name == "linear") return Interpolant::linear;
  throw InvalidParameter("unknown interpolant '" + std::string(name) + "'");
}

State interpolate_trajectory(const Trajectory& traj, double t, Interpolant kind) {
  if (traj.states.empty()) throw RangeError("interpolate_trajectory: empty trajectory");
  const int n = static_cast<int>(traj.states.size()) - 1;
  const double t_end = n * traj.tau;
  const double slack = 1e-12 * std::max(1.0, t_end);
  if (!(t >= -slack && t <= t_end + slack)) {
    std::ostringstream msg;
    msg << "interpolate_trajectory: t = " << t << " outside [0, " << t_end << "]";
    throw RangeError(msg.str());
  }
  const double s = t <= 0.0 ? 0.0 : (t >= t_end ? static_cast<double>(n) : t / traj.tau);
  const double knot = std::round(s);
  if (std::abs(s - knot) <= 1e-12 * std::max(1.0, s)) {
    State out = traj.states[static_cast<int>(knot)];
    out.time = t;
    return out;
  }
  const int i = static_cast<int>(std::floor(s)) + 1;  // t in (t_{i-1}, t_i)
  const State& lo = traj.states[i - 1];
  const State& hi = traj.states[i];
  switch (kind) {
    case Interpolant::forward: {
      State out = hi;
      out.time = t;
      return out;
    }
    case Interpolant::backward: {
      State out = lo;
      out.time = t;
      return out;
    }
    case Interpolant::linear:
      break;
  }
  const double a = s - (i - 1);  // (t - t_{i-1}) / tau
  const double b = i - s;        // (t_i - t) / tau
  State out;
  out.eta = FieldPair(a * hi.eta.bulk + b * lo.eta.bulk);
  out.theta = FieldPair(a * hi.theta.bulk + b * lo.theta.bulk);
  out.step_index = i;
  out.time = t;
  return out;
}

}  // namespace kwc
