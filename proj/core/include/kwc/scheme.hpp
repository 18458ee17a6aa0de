#ifndef KWC_SCHEME_HPP
#define KWC_SCHEME_HPP

#include <optional>
#include <string_view>
#include <vector>

#include "kwc/energy.hpp"
#include "kwc/error.hpp"
#include "kwc/mesh.hpp"
#include "kwc/model.hpp"

namespace kwc {

enum class ThetaMethod { lagged_diffusivity, newton, hybrid };
enum class LinearSolver { cg, direct };

std::string_view to_string(ThetaMethod m);
std::string_view to_string(LinearSolver s);
ThetaMethod theta_method_from_string(std::string_view name);
LinearSolver linear_solver_from_string(std::string_view name);

struct SolverOptions {
  double tol_inner = 1e-10;  // residual relative to the residual at the previous state
  int max_outer = 200;
  double cg_tol = 1e-12;
  ThetaMethod theta_method = ThetaMethod::hybrid;
  LinearSolver linear_solver = LinearSolver::cg;

  bool operator==(const SolverOptions&) const = default;
};

struct SolveStats {
  int outer_iterations = 0;
  long inner_linear_iterations = 0;
  double final_residual_inf_norm = 0.0;  // relative, see SolverOptions::tol_inner
  double objective_decrease = 0.0;
  double wall_time = 0.0;  // seconds
};

struct State {
  FieldPair eta;
  FieldPair theta;
  int step_index = 0;
  double time = 0.0;
};

struct StepResult {
  FieldPair field;
  SolveStats stats;
};

/// Per-step bookkeeping of run_scheme; entry i describes the step that
/// produced state i + 1.
struct StepRecord {
  SolveStats theta;
  SolveStats eta;
  double diss_eta = 0.0;    // |eta_i - eta_{i-1}|_H^2 / (2 tau)
  double diss_theta = 0.0;  // |A0(eta_{i-1})^{1/2} (theta_i - theta_{i-1})|_H^2 / (2 tau)
};

struct Trajectory {
  double tau = 0.0;
  std::vector<State> states;             // 0..n
  std::vector<EnergyBreakdown> energies;  // relaxed energy of every state
  std::vector<StepRecord> steps;          // n entries

  int num_steps() const noexcept { return static_cast<int>(steps.size()); }
};

/// Convergence failure inside run_scheme; carries every completed state.
class SchemeConvergenceError : public ConvergenceError {
 public:
  SchemeConvergenceError(const ConvergenceError& cause, Trajectory partial)
      : ConvergenceError(cause), partial_(std::move(partial)) {}
  const Trajectory& partial() const noexcept { return partial_; }

 private:
  Trajectory partial_;
};

/**
 * theta -> 1/(2 tau) |A0(eta_prev)^{1/2} (theta - theta_prev)|_H^2
 *          + Phi_delta(alpha(eta_prev); theta)
 *
 * over nodal fields (the surface component is the boundary rows). Its
 * gradient is the variational identity of the theta-step tested with the
 * nodal basis.
 */
class ThetaObjective {
 public:
  ThetaObjective(const Mesh& mesh, const ModelParams& params, const Field& eta_prev, const Field& theta_prev);

  double value(const Field& theta) const;
  Field gradient(const Field& theta) const;
  /// Gradient plus, per node, the sum of absolute values of its terms.
  Field gradient(const Field& theta, Field& magnitude) const;

  const Mesh& mesh() const noexcept { return *mesh_; }
  const Field& weighted_mass() const noexcept { return mass_; }
  const Field& edge_beta() const noexcept { return beta_e_; }
  const Field& theta_prev() const noexcept { return theta_prev_; }
  double tau() const noexcept { return tau_; }
  double delta() const noexcept { return delta_; }
  double kappa_gamma() const noexcept { return kappa_gamma_; }

 private:
  const Mesh* mesh_;
  double tau_, delta_, kappa_gamma_;
  Field theta_prev_;
  Field mass_;    // A0(eta_prev) weighted lumped H mass
  Field beta_e_;  // alpha(eta_prev) on edges
};

/**
 * eta -> 1/(2 tau) |eta - eta_prev|_H^2 + Psi(kappa eta, eps eta_Gamma)
 *        + G(eta, eta_Gamma) + int alpha(eta) f_delta(grad theta_new)
 */
class EtaObjective {
 public:
  EtaObjective(const Mesh& mesh, const ModelParams& params, const Field& eta_prev, const Field& theta_new);

  double value(const Field& eta) const;
  Field gradient(const Field& eta) const;
  Field gradient(const Field& eta, Field& magnitude) const;
  /// Diagonal of the Hessian without the Laplacian parts.
  Field hessian_diagonal(const Field& eta) const;

  const Mesh& mesh() const noexcept { return *mesh_; }
  const ModelParams& params() const noexcept { return *params_; }
  const Field& mass() const noexcept { return mass_; }
  /// Per-node share of int f_delta(grad theta_new), so that
  /// d/d eta_i int alpha(eta) f_delta = alpha'(eta_i) * nodal_length()[i].
  const Field& nodal_length() const noexcept { return nodal_length_; }
  const Field& edge_length_density() const noexcept { return f_e_; }

 private:
  const Mesh* mesh_;
  const ModelParams* params_;
  Field eta_prev_;
  Field mass_;
  Field f_e_;           // f_delta(grad theta_new) per edge
  Field nodal_length_;  // 1/2 sum over incident edges of w_e f_e
};

/// Lumped H mass weighted by A0(eta): alpha0(eta) vol + alpha_Gamma0(eta) area.
Field a0_mass(const Mesh& mesh, const ModelParams& params, const Field& eta);

/// tau_star computed from the sampled Lipschitz constants of g and g_Gamma.
double step_size_limit(const ModelParams& params);

/// Minimizer of ThetaObjective. `initial_guess` defaults to theta_prev.
StepResult theta_step(const Mesh& mesh, const ModelParams& params, const FieldPair& eta_prev,
                      const FieldPair& theta_prev, const SolverOptions& opts = {},
                      const std::optional<Field>& initial_guess = std::nullopt);

/// Minimizer of EtaObjective; refuses tau >= tau_star with StepSizeError.
StepResult eta_step(const Mesh& mesh, const ModelParams& params, const FieldPair& eta_prev,
                    const FieldPair& theta_new, const SolverOptions& opts = {},
                    const std::optional<Field>& initial_guess = std::nullopt);

/// Throws InvalidInitialData unless eta in [0,1] and theta in [r0,r1] exactly.
void check_initial_data(const Mesh& mesh, const ModelParams& params, const State& initial);

/// n_steps of theta_step (with eta_{i-1}) followed by eta_step (with theta_i).
Trajectory run_scheme(const Mesh& mesh, const ModelParams& params, const State& initial, int n_steps,
                      const SolverOptions& opts = {});

enum class Interpolant { forward, backward, linear };
Interpolant interpolant_from_string(std::string_view name);

/// Piecewise-constant (forward: state i on (t_{i-1}, t_i], backward: state
/// i-1 on [t_{i-1}, t_i)) or piecewise-linear time interpolant.
State interpolate_trajectory(const Trajectory& traj, double t, Interpolant kind);

/// |u|_H^2 with the lumped mass `mass`.
double h_norm_squared(const Field& u, const Field& mass);

}  // namespace kwc

#endif  // KWC_SCHEME_HPP
