#include "kwc/energy.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "kwc/error.hpp"

namespace kwc {

Field FieldPair::surface(const Mesh& mesh) const {
  if (detached_surface) {
    mesh.check_surface(*detached_surface, "FieldPair::surface");
    return *detached_surface;
  }
  return restrict_to_surface(mesh, bulk);
}

bool FieldPair::identified(const Mesh& mesh) const {
  if (!detached_surface) return true;
  return (*detached_surface - restrict_to_surface(mesh, bulk)).cwiseAbs().maxCoeff() == 0.0;
}

std::string_view to_string(EnergyMode m) { return m == EnergyMode::relaxed ? "relaxed" : "singular"; }

Field edge_average(const Mesh& mesh, const Field& nodal) {
  mesh.check_nodal(nodal, "edge_average");
  const auto edges = mesh.edges();
  Field out(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) out[e] = 0.5 * (nodal[edges[e].tail] + nodal[edges[e].head]);
  return out;
}

Field apply_function(const ScalarFunction& f, const Field& u) {
  return u.unaryExpr([&f](double s) { return f.value(s); });
}

namespace {

double dirichlet(const Field& grad, const Field& weights) { return 0.5 * grad.cwiseAbs2().dot(weights); }

/// int beta f_delta(grad theta) + delta^2/2 int |grad theta|^2.
double relaxed_length(const Mesh& mesh, double delta, const Field& beta, const Field& theta) {
  const Field g = apply_gradient(mesh, theta);
  const Field beta_e = edge_average(mesh, beta);
  const Field& w = mesh.edge_weights();
  double length = 0.0;
  for (Eigen::Index e = 0; e < g.size(); ++e) length += beta_e[e] * f_delta(delta, g[e]) * w[e];
  return length + delta * delta * dirichlet(g, w);
}

}  // namespace

double eval_phi_delta(const Mesh& mesh, double delta, const Field& beta, const FieldPair& theta,
                      double kappa_gamma) {
  if (!(delta > 0.0)) throw InvalidParameter("eval_phi_delta: delta must be positive");
  mesh.check_nodal(beta, "eval_phi_delta beta");
  if (!(beta.minCoeff() > 0.0)) throw InvalidParameter("eval_phi_delta: beta must be positive");
  if (!theta.identified(mesh)) return std::numeric_limits<double>::infinity();

  const double gs = apply_surface_gradient(mesh, theta.surface(mesh)).cwiseAbs2().dot(mesh.surface_edge_weights());
  return relaxed_length(mesh, delta, beta, theta.bulk) + 0.5 * kappa_gamma * kappa_gamma * gs;
}

double eval_weighted_tv(const Mesh& mesh, const Field& beta, const Field& u, const Field& gamma) {
  mesh.check_nodal(beta, "eval_weighted_tv beta");
  mesh.check_surface(gamma, "eval_weighted_tv gamma");
  if (beta.minCoeff() < 0.0) throw InvalidParameter("eval_weighted_tv: beta must be nonnegative");
  const Field g = apply_gradient(mesh, u);
  const double bulk = edge_average(mesh, beta).cwiseProduct(g.cwiseAbs()).dot(mesh.edge_weights());
  const Field mismatch = (restrict_to_surface(mesh, u) - gamma).cwiseAbs();
  const double surface = restrict_to_surface(mesh, beta).cwiseProduct(mismatch).dot(mesh.surface_areas());
  return bulk + surface;
}

EnergyBreakdown eval_free_energy(const Mesh& mesh, const ModelParams& p, const FieldPair& eta,
                                 const FieldPair& theta, EnergyMode mode) {
  mesh.check_nodal(eta.bulk, "eval_free_energy eta");
  mesh.check_nodal(theta.bulk, "eval_free_energy theta");
  if (mode == EnergyMode::relaxed && !(p.delta > 0.0))
    throw InvalidParameter("eval_free_energy: relaxed mode needs delta > 0");

  EnergyBreakdown e;
  e.mode = mode;
  const Field eta_s = eta.surface(mesh);
  e.eta_bulk_dirichlet = p.kappa * p.kappa * dirichlet(apply_gradient(mesh, eta.bulk), mesh.edge_weights());
  e.eta_surface_dirichlet =
      p.epsilon * p.epsilon * dirichlet(apply_surface_gradient(mesh, eta_s), mesh.surface_edge_weights());

  double pot = 0.0;
  for (int i = 0; i < mesh.num_nodes(); ++i) pot += p.g.primitive(eta.bulk[i]) * mesh.volumes()[i];
  for (int s = 0; s < mesh.num_surface_nodes(); ++s) pot += p.g_gamma.primitive(eta_s[s]) * mesh.surface_areas()[s];
  e.potential_g = pot;

  const Field beta = apply_function(p.alpha, eta.bulk);
  const Field theta_s = theta.surface(mesh);
  e.theta_surface_dirichlet =
      p.kappa_gamma * p.kappa_gamma * dirichlet(apply_surface_gradient(mesh, theta_s), mesh.surface_edge_weights());
  if (mode == EnergyMode::relaxed) {
    if (!(beta.minCoeff() > 0.0)) throw InvalidParameter("eval_free_energy: alpha(eta) must be positive");
    e.weighted_length = theta.identified(mesh) ? relaxed_length(mesh, p.delta, beta, theta.bulk)
                                               : std::numeric_limits<double>::infinity();
  } else {
    e.weighted_length = eval_weighted_tv(mesh, beta, theta.bulk, theta_s);
  }
  e.total = e.eta_bulk_dirichlet + e.eta_surface_dirichlet + e.potential_g + e.weighted_length +
            e.theta_surface_dirichlet;
  return e;
}

std::string_view energy_csv_header() {
  return "step,t,total,eta_bulk,eta_surf,potential,weighted_len,theta_surf,mode";
}

void write_energy_csv_row(std::ostream& out, int step, double t, const EnergyBreakdown& e) {
  const auto old = out.precision(17);
  out << step << ',' << t << ',' << e.total << ',' << e.eta_bulk_dirichlet << ',' << e.eta_surface_dirichlet << ','
      << e.potential_g << ',' << e.weighted_length << ',' << e.theta_surface_dirichlet << ',' << to_string(e.mode);
  out.precision(old);
}

}  // namespace kwc
