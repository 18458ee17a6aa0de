#ifndef KWC_DIAGNOSTICS_HPP
#define KWC_DIAGNOSTICS_HPP

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kwc/energy.hpp"
#include "kwc/mesh.hpp"
#include "kwc/model.hpp"
#include "kwc/scheme.hpp"

namespace kwc {

// ---------------------------------------------------------------------------
// Energy dissipation

/// One step of the discrete energy inequality
///   diss_eta + diss_theta + F(new) <= F(old).
struct AuditRow {
  int step = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;  // rhs - lhs
};

/// Recomputes energies and dissipation terms from the stored states.
std::vector<AuditRow> audit_dissipation(const Trajectory& traj, const Mesh& mesh, const ModelParams& params);

/// Audit threshold used throughout: slack >= -1e-8 * (1 + F_0).
double dissipation_tolerance(double initial_energy);

/// Index of the first row with slack below -tolerance, if any.
std::optional<int> first_dissipation_failure(const std::vector<AuditRow>& rows, double tolerance);

// ---------------------------------------------------------------------------
// Bounds

struct BoundsReport {
  double eta_below = 0.0;    // max(0 - eta) over all states, clipped at 0
  double eta_above = 0.0;    // max(eta - 1)
  double theta_below = 0.0;  // max(r0 - theta)
  double theta_above = 0.0;  // max(theta - r1)
  int worst_step = 0;

  double max_excursion() const;
};

BoundsReport audit_bounds(const Trajectory& traj, double r0, double r1);

// ---------------------------------------------------------------------------
// Comparison

/**
 * Coupled runs for the comparison lemmas. Run 1 evolves normally. The
 * eta-comparison advances eta^2 with run 1's theta_i, and the
 * theta-comparison advances theta^2 with run 1's eta_{i-1}, so each step
 * has the common coefficient the lemmas assume.
 */
struct ComparisonReport {
  std::vector<double> eta_plus;             // |[eta^1_i - eta^2_i]^+|_H, i = 0..n
  std::vector<double> theta_plus;           // |[theta^1_i - theta^2_i]^+|_H
  std::vector<double> theta_plus_weighted;  // |A0(eta^1_{i-1})^{1/2}[theta^1_i - theta^2_i]^+|_H (i >= 1)
  std::vector<double> theta_plus_weighted_before;  // same weights applied to step i - 1
  double tolerance = 1e-10;

  bool eta_nonincreasing() const;
  /// Per-step contraction in the A0(eta_{i-1})-weighted norm.
  bool theta_contracting() const;
  bool passed() const { return eta_nonincreasing() && theta_contracting(); }
};

ComparisonReport comparison_experiment(const Mesh& mesh, const ModelParams& params, const State& first,
                                       const State& second, int n_steps, const SolverOptions& opts = {});

// ---------------------------------------------------------------------------
// Certificate

enum class BoundaryClass {
  continuous,  // |flux| <= 0.9 and the jump is below threshold
  jump,        // |jump| above threshold, sign(flux) = sign(jump), |flux| >= 0.99
  transition,  // small jump, 0.9 < |flux|: neither regime is resolved
  violation,   // |jump| above threshold but the flux does not saturate with its sign
};

std::string_view to_string(BoundaryClass c);

struct BoundaryReport {
  int surface_index = 0;
  double jump = 0.0;  // theta_Gamma - trace_interior(theta)
  double flux = 0.0;  // outward normal component of omega*
  BoundaryClass classification = BoundaryClass::continuous;
};

struct Certificate {
  Field omega_star;         // per edge: grad f_delta(grad theta)
  Field boundary_flux;      // per surface node: [omega* . n_Gamma]
  Field b1_edge_residual;   // per edge: |g| - omega* g
  Field b1_residual;        // per node: max over incident edges
  std::vector<BoundaryReport> b2_report;
  double max_norm_omega = 0.0;
  double jump_threshold = 0.0;  // 10 delta h

  int count(BoundaryClass c) const;
};

Certificate compute_certificate(const Mesh& mesh, const ModelParams& params, const State& state);

/// Edge-wise dump `x,y,omega_x,omega_y` of omega* (edge midpoints).
void write_omega_csv(std::ostream& out, const Mesh& mesh, const Certificate& cert);
/// Boundary dump `surface_index,x,y,jump,flux,class`.
void write_boundary_report_csv(std::ostream& out, const Mesh& mesh, const Certificate& cert);

// ---------------------------------------------------------------------------
// delta continuation

struct ContinuationRow {
  double delta = 0.0;
  double relaxed_energy = 0.0;
  double singular_energy = 0.0;
  double gap = 0.0;    // |relaxed - singular|
  double bound = 0.0;  // delta sum beta w + delta^2/2 sum |grad theta|^2 w
  std::optional<double> l2_to_previous;
  double max_boundary_jump = 0.0;
  std::string error;  // non-empty when the run for this delta failed
  Field final_theta;
};

struct ContinuationTable {
  std::vector<ContinuationRow> rows;

  /// Consecutive L2 distances strictly decreasing (needs >= 3 rows).
  bool cauchy_decreasing() const;
  bool gaps_within_bounds() const;
  bool gaps_strictly_decreasing() const;
};

/// Runs n_steps from `initial` for every delta (n_steps = 0 evaluates the
/// frozen state). Entries may run on up to `workers` threads; results are
/// independent of the worker count.
ContinuationTable delta_continuation(const Mesh& mesh, const ModelParams& base, const std::vector<double>& deltas,
                                     const State& initial, int n_steps, const SolverOptions& opts = {},
                                     int workers = 1);

void write_continuation_csv(std::ostream& out, const ContinuationTable& table);

// ---------------------------------------------------------------------------
// Dense oracle

enum class OracleObjective { theta, eta };

/**
 * Minimizes the theta- or eta-step objective by Newton's method on a dense
 * Hessian assembled from scratch, to gradient inf-norm <= 1e-12. For meshes
 * of at most 64 nodes. `previous` is eta_prev for both objectives; `data` is
 * theta_prev (theta objective) or theta_new (eta objective).
 */
Field oracle_step(const Mesh& mesh, const ModelParams& params, OracleObjective which, const Field& eta_prev,
                  const Field& data);

}  // namespace kwc

#endif  // KWC_DIAGNOSTICS_HPP
