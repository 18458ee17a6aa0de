#include "kwc/diagnostics.hpp"

#include <atomic>
#include <cmath>
#include <future>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include <Eigen/Dense>

namespace kwc {

// ---------------------------------------------------------------------------
// Energy dissipation

std::vector<AuditRow> audit_dissipation(const Trajectory& traj, const Mesh& mesh, const ModelParams& params) {
  std::vector<AuditRow> rows;
  if (traj.states.size() < 2) return rows;
  const Field mass = mesh.h_mass();
  const double tau = traj.tau;
  double f_old = eval_free_energy(mesh, params, traj.states[0].eta, traj.states[0].theta, EnergyMode::relaxed).total;
  for (std::size_t i = 1; i < traj.states.size(); ++i) {
    const State& prev = traj.states[i - 1];
    const State& next = traj.states[i];
    const double f_new = eval_free_energy(mesh, params, next.eta, next.theta, EnergyMode::relaxed).total;
    const double diss_eta = 0.5 / tau * h_norm_squared(next.eta.bulk - prev.eta.bulk, mass);
    const double diss_theta =
        0.5 / tau * h_norm_squared(next.theta.bulk - prev.theta.bulk, a0_mass(mesh, params, prev.eta.bulk));
    AuditRow row;
    row.step = static_cast<int>(i);
    row.lhs = diss_eta + diss_theta + f_new;
    row.rhs = f_old;
    row.slack = row.rhs - row.lhs;
    rows.push_back(row);
    f_old = f_new;
  }
  return rows;
}

double dissipation_tolerance(double initial_energy) { return 1e-8 * (1.0 + initial_energy); }

std::optional<int> first_dissipation_failure(const std::vector<AuditRow>& rows, double tolerance) {
  for (const AuditRow& r : rows)
    if (!(r.slack >= -tolerance)) return r.step;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Bounds

double BoundsReport::max_excursion() const {
  return std::max(std::max(eta_below, eta_above), std::max(theta_below, theta_above));
}

BoundsReport audit_bounds(const Trajectory& traj, double r0, double r1) {
  BoundsReport r;
  double worst = 0.0;
  for (const State& s : traj.states) {
    r.eta_below = std::max(r.eta_below, -s.eta.bulk.minCoeff());
    r.eta_above = std::max(r.eta_above, s.eta.bulk.maxCoeff() - 1.0);
    r.theta_below = std::max(r.theta_below, r0 - s.theta.bulk.minCoeff());
    r.theta_above = std::max(r.theta_above, s.theta.bulk.maxCoeff() - r1);
    if (r.max_excursion() > worst) {
      worst = r.max_excursion();
      r.worst_step = s.step_index;
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Comparison

namespace {

double positive_part_norm(const Field& d, const Field& mass) {
  return std::sqrt(d.cwiseMax(0.0).cwiseAbs2().dot(mass));
}

bool nonincreasing(const std::vector<double>& v, double tol) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[i - 1] + tol) return false;
  return true;
}

}  // namespace

bool ComparisonReport::eta_nonincreasing() const { return nonincreasing(eta_plus, tolerance); }

bool ComparisonReport::theta_contracting() const {
  for (std::size_t i = 0; i < theta_plus_weighted.size(); ++i)
    if (theta_plus_weighted[i] > theta_plus_weighted_before[i] + tolerance) return false;
  return true;
}

ComparisonReport comparison_experiment(const Mesh& mesh, const ModelParams& params, const State& first,
                                       const State& second, int n_steps, const SolverOptions& opts) {
  if (!(mesh.spec() == params.grid)) throw InvalidPairing("comparison: mesh does not match params.grid");
  if (first.eta.bulk.size() != second.eta.bulk.size() || first.theta.bulk.size() != second.theta.bulk.size())
    throw InvalidPairing("comparison: initial states have different sizes");
  if (first.step_index != second.step_index || first.time != second.time)
    throw InvalidPairing("comparison: initial states are at different times");
  if (n_steps < 1) throw InvalidParameter("comparison: n_steps must be positive");
  const ValidationReport report = validate_assumptions(params);
  if (const AssumptionCheck* bad = report.first_failure()) {
    if (bad->label == "tau") throw StepSizeError("comparison: " + bad->description);
    throw InvalidParameter("comparison: (" + bad->label + ") " + bad->description + " fails");
  }
  check_initial_data(mesh, params, first);
  check_initial_data(mesh, params, second);

  const Field mass = mesh.h_mass();
  ComparisonReport out;
  FieldPair eta1(first.eta.bulk), theta1(first.theta.bulk);
  FieldPair eta2(second.eta.bulk), theta2(second.theta.bulk);
  out.eta_plus.push_back(positive_part_norm(eta1.bulk - eta2.bulk, mass));
  out.theta_plus.push_back(positive_part_norm(theta1.bulk - theta2.bulk, mass));

  for (int i = 1; i <= n_steps; ++i) {
    const Field weights = a0_mass(mesh, params, eta1.bulk);
    out.theta_plus_weighted_before.push_back(positive_part_norm(theta1.bulk - theta2.bulk, weights));

    // Common eta_{i-1} for both theta-steps, common theta_i for both eta-steps.
    FieldPair theta1_next = theta_step(mesh, params, eta1, theta1, opts).field;
    FieldPair theta2_next = theta_step(mesh, params, eta1, theta2, opts).field;
    FieldPair eta1_next = eta_step(mesh, params, eta1, theta1_next, opts).field;
    FieldPair eta2_next = eta_step(mesh, params, eta2, theta1_next, opts).field;

    out.theta_plus_weighted.push_back(positive_part_norm(theta1_next.bulk - theta2_next.bulk, weights));
    out.theta_plus.push_back(positive_part_norm(theta1_next.bulk - theta2_next.bulk, mass));
    out.eta_plus.push_back(positive_part_norm(eta1_next.bulk - eta2_next.bulk, mass));

    eta1 = std::move(eta1_next);
    eta2 = std::move(eta2_next);
    theta1 = std::move(theta1_next);
    theta2 = std::move(theta2_next);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Certificate

std::string_view to_string(BoundaryClass c) {
  switch (c) {
    case BoundaryClass::continuous:
      return "continuous";
    case BoundaryClass::jump:
      return "jump";
    case BoundaryClass::transition:
      return "transition";
    case BoundaryClass::violation:
      return "violation";
  }
  return "unknown";
}

int Certificate::count(BoundaryClass c) const {
  int n = 0;
  for (const auto& b : b2_report) n += b.classification == c;
  return n;
}

Certificate compute_certificate(const Mesh& mesh, const ModelParams& params, const State& state) {
  if (!(params.delta > 0.0)) throw InvalidParameter("compute_certificate: delta must be positive");
  mesh.check_nodal(state.theta.bulk, "compute_certificate");
  const double delta = params.delta;
  const Field g = apply_gradient(mesh, state.theta.bulk);

  Certificate c;
  c.omega_star = g.unaryExpr([delta](double w) { return f_delta_prime(delta, w); });
  c.max_norm_omega = c.omega_star.size() ? c.omega_star.cwiseAbs().maxCoeff() : 0.0;
  c.b1_edge_residual = g.cwiseAbs() - c.omega_star.cwiseProduct(g);
  c.b1_residual = Field::Zero(mesh.num_nodes());
  const auto edges = mesh.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    for (int node : {edges[e].tail, edges[e].head})
      c.b1_residual[node] = std::max(c.b1_residual[node], c.b1_edge_residual[e]);
  }

  c.boundary_flux = normal_component(mesh, c.omega_star);
  const Field jumps = state.theta.surface(mesh) - trace_interior(mesh, state.theta.bulk);
  c.jump_threshold = 10.0 * delta * mesh.normal_spacing();
  for (int s = 0; s < mesh.num_surface_nodes(); ++s) {
    BoundaryReport b{s, jumps[s], c.boundary_flux[s], BoundaryClass::continuous};
    const double af = std::abs(b.flux);
    if (std::abs(b.jump) > c.jump_threshold) {
      const bool same_sign = (b.flux > 0.0) == (b.jump > 0.0) && b.flux != 0.0;
      b.classification = same_sign && af >= 0.99 ? BoundaryClass::jump : BoundaryClass::violation;
    } else {
      b.classification = af <= 0.9 ? BoundaryClass::continuous : BoundaryClass::transition;
    }
    c.b2_report.push_back(b);
  }
  return c;
}

void write_omega_csv(std::ostream& out, const Mesh& mesh, const Certificate& cert) {
  const auto old = out.precision(17);
  out << "x,y,omega_x,omega_y\n";
  const auto edges = mesh.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto [x, y] = mesh.edge_midpoint(static_cast<int>(e));
    const double w = cert.omega_star[e];
    out << x << ',' << y << ',' << (edges[e].axis == 0 ? w : 0.0) << ',' << (edges[e].axis == 1 ? w : 0.0) << '\n';
  }
  out.precision(old);
}

void write_boundary_report_csv(std::ostream& out, const Mesh& mesh, const Certificate& cert) {
  const auto old = out.precision(17);
  out << "surface_index,x,y,jump,flux,class\n";
  for (const BoundaryReport& b : cert.b2_report) {
    const int node = mesh.boundary_nodes()[b.surface_index].node;
    out << b.surface_index << ',' << mesh.x(node) << ',' << mesh.y(node) << ',' << b.jump << ',' << b.flux << ','
        << to_string(b.classification) << '\n';
  }
  out.precision(old);
}

// ---------------------------------------------------------------------------
// delta continuation

bool ContinuationTable::cauchy_decreasing() const {
  std::vector<double> d;
  for (const auto& r : rows) {
    if (!r.error.empty()) return false;
    if (r.l2_to_previous) d.push_back(*r.l2_to_previous);
  }
  if (d.size() < 2) return false;
  for (std::size_t i = 1; i < d.size(); ++i)
    if (!(d[i] < d[i - 1])) return false;
  return true;
}

bool ContinuationTable::gaps_within_bounds() const {
  for (const auto& r : rows)
    if (!r.error.empty() || !(r.gap <= r.bound)) return false;
  return !rows.empty();
}

bool ContinuationTable::gaps_strictly_decreasing() const {
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (!(rows[i].gap < rows[i - 1].gap)) return false;
  return rows.size() >= 2;
}

ContinuationTable delta_continuation(const Mesh& mesh, const ModelParams& base, const std::vector<double>& deltas,
                                     const State& initial, int n_steps, const SolverOptions& opts, int workers) {
  if (deltas.empty()) throw InvalidParameter("delta_continuation: empty delta list");
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (!(deltas[i] > 0.0)) throw InvalidParameter("delta_continuation: deltas must be positive");
    if (i > 0 && !(deltas[i] < deltas[i - 1]))
      throw InvalidParameter("delta_continuation: deltas must be strictly decreasing");
  }
  if (n_steps < 0) throw InvalidParameter("delta_continuation: n_steps must be nonnegative");

  ContinuationTable table;
  table.rows.resize(deltas.size());
  auto run_one = [&](std::size_t k) {
    ContinuationRow& row = table.rows[k];
    row.delta = deltas[k];
    ModelParams p = base;
    p.delta = deltas[k];
    try {
      State final_state = initial;
      if (n_steps > 0) final_state = run_scheme(mesh, p, initial, n_steps, opts).states.back();
      const EnergyBreakdown relaxed =
          eval_free_energy(mesh, p, final_state.eta, final_state.theta, EnergyMode::relaxed);
      const EnergyBreakdown singular =
          eval_free_energy(mesh, p, final_state.eta, final_state.theta, EnergyMode::singular);
      row.relaxed_energy = relaxed.total;
      row.singular_energy = singular.total;
      row.gap = std::abs(relaxed.total - singular.total);
      const Field grad = apply_gradient(mesh, final_state.theta.bulk);
      const Field beta_e = edge_average(mesh, apply_function(p.alpha, final_state.eta.bulk));
      row.bound = p.delta * beta_e.dot(mesh.edge_weights()) +
                  0.5 * p.delta * p.delta * grad.cwiseAbs2().dot(mesh.edge_weights());
      row.max_boundary_jump =
          (final_state.theta.surface(mesh) - trace_interior(mesh, final_state.theta.bulk)).cwiseAbs().maxCoeff();
      row.final_theta = final_state.theta.bulk;
    } catch (const Error& e) {
      row.error = e.what();
    }
  };

  const int n_workers = std::max(1, std::min<int>(workers, static_cast<int>(deltas.size())));
  if (n_workers == 1) {
    for (std::size_t k = 0; k < deltas.size(); ++k) run_one(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::future<void>> pool;
    for (int w = 0; w < n_workers; ++w) {
      pool.push_back(std::async(std::launch::async, [&] {
        for (std::size_t k = next++; k < deltas.size(); k = next++) run_one(k);
      }));
    }
    for (auto& f : pool) f.get();
  }

  for (std::size_t k = 1; k < table.rows.size(); ++k) {
    const auto& a = table.rows[k - 1];
    auto& b = table.rows[k];
    if (a.error.empty() && b.error.empty())
      b.l2_to_previous = std::sqrt((b.final_theta - a.final_theta).cwiseAbs2().dot(mesh.volumes()));
  }
  return table;
}

void write_continuation_csv(std::ostream& out, const ContinuationTable& table) {
  const auto old = out.precision(17);
  out << "delta,relaxed_energy,singular_energy,gap,bound,l2_to_previous,max_boundary_jump,error\n";
  for (const auto& r : table.rows) {
    out << r.delta << ',' << r.relaxed_energy << ',' << r.singular_energy << ',' << r.gap << ',' << r.bound << ',';
    if (r.l2_to_previous) out << *r.l2_to_previous;
    out << ',' << r.max_boundary_jump << ',' << '"' << r.error << '"' << '\n';
  }
  out.precision(old);
}

// ---------------------------------------------------------------------------
// Dense oracle
//
// Assembled directly from the mesh geometry and the model functions; none of
// the production objective or solver code is reused.

namespace {

struct DenseProblem {
  Eigen::MatrixXd hessian;
  Eigen::VectorXd gradient;
  double value = 0.0;
};

/// Adds c/2 (u_b - u_a)^2 / len^2 * weight (quadratic edge energy).
void add_quadratic_edge(DenseProblem& p, const Eigen::VectorXd& u, int a, int b, double coeff) {
  const double d = u[b] - u[a];
  p.value += 0.5 * coeff * d * d;
  p.gradient[b] += coeff * d;
  p.gradient[a] -= coeff * d;
  p.hessian(a, a) += coeff;
  p.hessian(b, b) += coeff;
  p.hessian(a, b) -= coeff;
  p.hessian(b, a) -= coeff;
}

DenseProblem dense_theta(const Mesh& mesh, const ModelParams& prm, const Eigen::VectorXd& eta_prev,
                         const Eigen::VectorXd& theta_prev, const Eigen::VectorXd& theta) {
  const int n = mesh.num_nodes();
  DenseProblem p{Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n), 0.0};
  for (int i = 0; i < n; ++i) {
    double m = prm.alpha0.value(eta_prev[i]) * mesh.volumes()[i];
    if (mesh.is_boundary(i)) m += prm.alpha_gamma0.value(eta_prev[i]) * mesh.surface_areas()[mesh.surface_index(i)];
    const double d = theta[i] - theta_prev[i];
    p.value += 0.5 * m * d * d / prm.tau;
    p.gradient[i] += m * d / prm.tau;
    p.hessian(i, i) += m / prm.tau;
  }
  const double dl = prm.delta;
  for (const Edge& e : mesh.edges()) {
    const double beta = 0.5 * (prm.alpha.value(eta_prev[e.tail]) + prm.alpha.value(eta_prev[e.head]));
    const double slope = (theta[e.head] - theta[e.tail]) / e.length;
    const double root = std::sqrt(dl * dl + slope * slope);
    p.value += e.weight * beta * (root - dl);
    // d/dslope and d2/dslope2 of beta (root - delta), chained through slope.
    const double first = e.weight * beta * slope / root / e.length;
    const double second = e.weight * beta * dl * dl / (root * root * root) / (e.length * e.length);
    p.gradient[e.head] += first;
    p.gradient[e.tail] -= first;
    p.hessian(e.head, e.head) += second;
    p.hessian(e.tail, e.tail) += second;
    p.hessian(e.head, e.tail) -= second;
    p.hessian(e.tail, e.head) -= second;
    add_quadratic_edge(p, theta, e.tail, e.head, dl * dl * e.weight / (e.length * e.length));
  }
  const auto boundary = mesh.boundary_nodes();
  for (const Edge& e : mesh.surface_edges()) {
    add_quadratic_edge(p, theta, boundary[e.tail].node, boundary[e.head].node,
                       prm.kappa_gamma * prm.kappa_gamma * e.weight / (e.length * e.length));
  }
  return p;
}

DenseProblem dense_eta(const Mesh& mesh, const ModelParams& prm, const Eigen::VectorXd& eta_prev,
                       const Eigen::VectorXd& theta_new, const Eigen::VectorXd& eta) {
  const int n = mesh.num_nodes();
  DenseProblem p{Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n), 0.0};
  for (int i = 0; i < n; ++i) {
    const double vol = mesh.volumes()[i];
    const double area = mesh.is_boundary(i) ? mesh.surface_areas()[mesh.surface_index(i)] : 0.0;
    const double d = eta[i] - eta_prev[i];
    p.value += 0.5 * (vol + area) * d * d / prm.tau + vol * prm.g.primitive(eta[i]);
    p.gradient[i] += (vol + area) * d / prm.tau + vol * prm.g.value(eta[i]);
    p.hessian(i, i) += (vol + area) / prm.tau + vol * prm.g.derivative(eta[i]);
    if (area > 0.0) {
      p.value += area * prm.g_gamma.primitive(eta[i]);
      p.gradient[i] += area * prm.g_gamma.value(eta[i]);
      p.hessian(i, i) += area * prm.g_gamma.derivative(eta[i]);
    }
  }
  for (const Edge& e : mesh.edges()) {
    const double slope = (theta_new[e.head] - theta_new[e.tail]) / e.length;
    const double length_density = std::sqrt(prm.delta * prm.delta + slope * slope) - prm.delta;
    for (int node : {e.tail, e.head}) {
      const double c = 0.5 * e.weight * length_density;
      p.value += c * prm.alpha.value(eta[node]);
      p.gradient[node] += c * prm.alpha.derivative(eta[node]);
      p.hessian(node, node) += c * prm.alpha.second_derivative(eta[node]);
    }
    add_quadratic_edge(p, eta, e.tail, e.head, prm.kappa * prm.kappa * e.weight / (e.length * e.length));
  }
  const auto boundary = mesh.boundary_nodes();
  for (const Edge& e : mesh.surface_edges()) {
    add_quadratic_edge(p, eta, boundary[e.tail].node, boundary[e.head].node,
                       prm.epsilon * prm.epsilon * e.weight / (e.length * e.length));
  }
  return p;
}

}  // namespace

Field oracle_step(const Mesh& mesh, const ModelParams& params, OracleObjective which, const Field& eta_prev,
                  const Field& data) {
  if (mesh.num_nodes() > 64) throw InvalidParameter("oracle_step: at most 64 nodes");
  mesh.check_nodal(eta_prev, "oracle_step eta_prev");
  mesh.check_nodal(data, "oracle_step data");
  constexpr int kMaxIterations = 200;
  // Damped Newton on one objective; returns once |grad|_inf <= tol.
  auto minimize = [&](Eigen::VectorXd x, const ModelParams& prm, double tol) {
    auto evaluate = [&](const Eigen::VectorXd& z) {
      return which == OracleObjective::theta ? dense_theta(mesh, prm, eta_prev, data, z)
                                             : dense_eta(mesh, prm, eta_prev, data, z);
    };
    for (int iter = 0; iter < kMaxIterations; ++iter) {
      const DenseProblem p = evaluate(x);
      if (p.gradient.lpNorm<Eigen::Infinity>() <= tol) return x;
      const Eigen::VectorXd step = p.hessian.ldlt().solve(-p.gradient);
      const double grad_norm = p.gradient.lpNorm<Eigen::Infinity>();
      // The full step is taken whenever it halves the gradient: close to the
      // minimizer the value test below is decided by rounding.
      const Eigen::VectorXd full = x + step;
      if (evaluate(full).gradient.lpNorm<Eigen::Infinity>() <= 0.5 * grad_norm) {
        x = full;
        continue;
      }
      const double slope = p.gradient.dot(step);
      double t = 1.0;
      bool accepted = false;
      for (int k = 0; k < 60 && slope < 0.0; ++k, t *= 0.5) {
        if (evaluate(x + t * step).value <= p.value + 1e-4 * t * slope) {
          accepted = true;
          break;
        }
      }
      if (!accepted) {
        std::ostringstream msg;
        msg << "oracle_step: stalled with gradient " << grad_norm;
        throw ConvergenceError(msg.str(), x, grad_norm);
      }
      x += t * step;
    }
    const double r = evaluate(x).gradient.lpNorm<Eigen::Infinity>();
    throw ConvergenceError("oracle_step: no convergence in 200 Newton iterations", x, r);
  };

  constexpr double kTol = 1e-12;
  if (which == OracleObjective::eta) return minimize(eta_prev, params, kTol);
  // The theta objective flattens where |grad theta| >> delta, so Newton is
  // walked down from delta = 1 by halving, warm-starting each stage.
  Eigen::VectorXd x = data;
  ModelParams stage = params;
  std::vector<double> deltas;
  for (double d = 1.0; d > params.delta; d *= 0.5) deltas.push_back(d);
  for (double d : deltas) {
    stage.delta = d;
    x = minimize(x, stage, 1e-8);
  }
  return minimize(x, params, kTol);
}

}  // namespace kwc
