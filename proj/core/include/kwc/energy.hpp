#ifndef KWC_ENERGY_HPP
#define KWC_ENERGY_HPP

#include <iosfwd>
#include <optional>
#include <string_view>

#include "kwc/mesh.hpp"
#include "kwc/model.hpp"

namespace kwc {

/**
 * A pair [u, u_Gamma]. The surface component is normally the boundary rows
 * of `bulk` (u|_Gamma = u_Gamma). A detached surface array represents pairs
 * outside that identification, which only the singular energy accepts.
 */
struct FieldPair {
  Field bulk;
  std::optional<Field> detached_surface;

  FieldPair() = default;
  explicit FieldPair(Field b) : bulk(std::move(b)) {}
  FieldPair(Field b, Field surface) : bulk(std::move(b)), detached_surface(std::move(surface)) {}

  /// u_Gamma: the detached array if present, else the boundary rows.
  Field surface(const Mesh& mesh) const;
  /// True when u_Gamma equals the boundary rows of `bulk`.
  bool identified(const Mesh& mesh) const;
};

enum class EnergyMode { relaxed, singular };
std::string_view to_string(EnergyMode m);

struct EnergyBreakdown {
  double eta_bulk_dirichlet = 0.0;       // kappa^2/2 int |grad eta|^2
  double eta_surface_dirichlet = 0.0;    // 1/2 int_Gamma |grad_Gamma (eps eta_Gamma)|^2
  double potential_g = 0.0;              // int g-hat(eta) + int_Gamma g_Gamma-hat(eta_Gamma)
  double weighted_length = 0.0;          // relaxed: int alpha f_delta + delta^2/2 |grad theta|^2
                                         // singular: weighted TV + boundary mismatch
  double theta_surface_dirichlet = 0.0;  // kappa_Gamma^2/2 int_Gamma |grad_Gamma theta_Gamma|^2
  double total = 0.0;
  EnergyMode mode = EnergyMode::relaxed;
};

/// Nodal values averaged onto edges (arithmetic mean of the end points).
Field edge_average(const Mesh& mesh, const Field& nodal);

/// f applied node by node.
Field apply_function(const ScalarFunction& f, const Field& u);

/// Relaxed weighted length plus surface Dirichlet energy of theta.
/// Returns +infinity for a theta outside V_delta (detached surface that
/// differs from the boundary rows).
double eval_phi_delta(const Mesh& mesh, double delta, const Field& beta, const FieldPair& theta,
                      double kappa_gamma);

/// sum_e beta_e |grad u|_e w_e + sum_Gamma beta |u|_Gamma - gamma| area.
double eval_weighted_tv(const Mesh& mesh, const Field& beta, const Field& u, const Field& gamma);

EnergyBreakdown eval_free_energy(const Mesh& mesh, const ModelParams& params, const FieldPair& eta,
                                 const FieldPair& theta, EnergyMode mode);

/// CSV columns `step,t,total,eta_bulk,eta_surf,potential,weighted_len,theta_surf,mode`.
std::string_view energy_csv_header();
void write_energy_csv_row(std::ostream& out, int step, double t, const EnergyBreakdown& e);

}  // namespace kwc

#endif  // KWC_ENERGY_HPP
