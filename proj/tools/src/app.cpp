#include "kwc/cli/app.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "kwc/cli/initial_data.hpp"
#include "kwc/diagnostics.hpp"
#include "kwc/energy.hpp"

namespace kwc::cli {

namespace fs = std::filesystem;

namespace {

constexpr double kBoundTolerance = 1e-9;

struct Flags {
  std::string config;
  std::string positional;
  std::optional<int> steps;
  std::optional<std::string> out;
  std::vector<double> deltas{0.1, 0.05, 0.025, 0.0125};
  int workers = 1;
  std::optional<double> tol;
};

// Audit failure carrying a readable summary; maps to exit code 1.
struct AuditFailure {
  std::string summary;
};

RunConfig load(const Flags& f) {
  const std::string path = !f.config.empty() ? f.config : f.positional;
  if (path.empty()) throw ConfigError({{"--config", 0, "no configuration file given"}});
  RunConfig c = parse_config(path);
  if (f.steps) c.n_steps = *f.steps;
  if (f.out) c.output_dir = *f.out;
  if (f.tol) c.solver.tol_inner = *f.tol;
  return c;
}

fs::path prepare_output(const std::string& dir) {
  const fs::path root(dir);
  std::error_code ec;
  fs::create_directories(root, ec);
  std::ofstream probe(root / ".write_test");
  if (ec || !probe) throw ConfigError({{"run.output_dir", 0, "cannot write to '" + dir + "'"}});
  probe.close();
  fs::remove(root / ".write_test", ec);
  return root;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError({{"run.output_dir", 0, "cannot write '" + path.string() + "'"}});
  return out;
}

void write_snapshot(const fs::path& root, const Mesh& mesh, const State& s) {
  const std::string name = "snap_" + std::to_string(s.step_index) + ".csv";
  auto eta = open_out(root / "eta" / name);
  write_field_csv(eta, mesh, s.eta.bulk);
  auto theta = open_out(root / "theta" / name);
  write_field_csv(theta, mesh, s.theta.bulk);
}

void write_trajectory(const fs::path& root, const Mesh& mesh, const RunConfig& c, const Trajectory& traj) {
  fs::create_directories(root / "eta");
  fs::create_directories(root / "theta");
  {
    auto out = open_out(root / "config.toml");
    write_config(out, c);
  }
  auto energy = open_out(root / "energy.csv");
  energy << energy_csv_header() << ",diss_eta,diss_theta,slack,theta_outer_iters,eta_outer_iters\n";
  energy.precision(17);
  auto bounds = open_out(root / "bounds.csv");
  bounds << "step,eta_min,eta_max,theta_min,theta_max\n";
  bounds.precision(17);
  for (std::size_t i = 0; i < traj.states.size(); ++i) {
    const State& s = traj.states[i];
    write_energy_csv_row(energy, s.step_index, s.time, traj.energies[i]);
    if (i == 0) {
      energy << ",0,0,0,0,0\n";
    } else {
      const StepRecord& r = traj.steps[i - 1];
      const double slack =
          traj.energies[i - 1].total - (traj.energies[i].total + r.diss_eta + r.diss_theta);
      energy << ',' << r.diss_eta << ',' << r.diss_theta << ',' << slack << ',' << r.theta.outer_iterations
             << ',' << r.eta.outer_iterations << '\n';
    }
    bounds << s.step_index << ',' << s.eta.bulk.minCoeff() << ',' << s.eta.bulk.maxCoeff() << ','
           << s.theta.bulk.minCoeff() << ',' << s.theta.bulk.maxCoeff() << '\n';
    const bool last = i + 1 == traj.states.size();
    if (last || s.step_index % c.snapshot_interval == 0) write_snapshot(root, mesh, s);
  }
}

// In-memory audits of a fresh trajectory.
std::optional<AuditFailure> audit_trajectory(const Trajectory& traj, const Mesh& mesh, const RunConfig& c,
                                             std::ostream& out) {
  const auto rows = audit_dissipation(traj, mesh, c.params);
  const double tol = dissipation_tolerance(traj.energies.front().total);
  double min_slack = std::numeric_limits<double>::infinity();
  for (const auto& r : rows) min_slack = std::min(min_slack, r.slack);
  const auto bounds = audit_bounds(traj, c.params.r0, c.params.r1);
  out << "dissipation: min slack " << min_slack << " (tolerance " << -tol << ")\n"
      << "bounds: max excursion " << bounds.max_excursion() << " (tolerance " << kBoundTolerance << ")\n";
  std::ostringstream why;
  if (const auto bad = first_dissipation_failure(rows, tol)) {
    why << "energy inequality fails at step " << rows[*bad].step << " (slack " << rows[*bad].slack << ")\n";
  }
  if (bounds.max_excursion() > kBoundTolerance) {
    why << "bounds exceeded by " << bounds.max_excursion() << " at step " << bounds.worst_step << "\n";
  }
  if (why.str().empty()) return std::nullopt;
  return AuditFailure{why.str()};
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream s(line);
  std::string cell;
  while (std::getline(s, cell, ',')) cells.push_back(cell);
  return cells;
}

// Reads a CSV with a header into named numeric columns (non-numeric cells become NaN).
std::map<std::string, std::vector<double>> read_table(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({{path.string(), 0, "cannot open file"}});
  std::string line;
  std::getline(in, line);
  const auto header = split_csv_line(line);
  std::map<std::string, std::vector<double>> table;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ConfigError({{path.string(), line_no, "expected " + std::to_string(header.size()) + " columns"}});
    }
    for (std::size_t k = 0; k < cells.size(); ++k) {
      char* end = nullptr;
      const double v = std::strtod(cells[k].c_str(), &end);
      table[header[k]].push_back(end == cells[k].c_str() ? std::nan("") : v);
    }
  }
  return table;
}

const std::vector<double>& column(const std::map<std::string, std::vector<double>>& t, const std::string& name,
                                  const fs::path& path) {
  const auto it = t.find(name);
  if (it == t.end()) throw ConfigError({{path.string(), 1, "missing column '" + name + "'"}});
  return it->second;
}

int cmd_validate(const Flags& f, std::ostream& out) {
  const RunConfig c = load(f);
  const auto report = validate_assumptions(c.params);
  out << "configuration ok\n"
      << "  tau = " << c.params.tau << " < tau_* = " << report.tau_star << "\n"
      << "  delta_alpha = " << report.delta_alpha << "\n"
      << "  Lipschitz(g) = " << report.lip_g << ", Lipschitz(g_gamma) = " << report.lip_g_gamma << "\n";
  return ok;
}

int cmd_run(const Flags& f, std::ostream& out, std::ostream& err) {
  const RunConfig c = load(f);
  const fs::path root = prepare_output(c.output_dir);
  const Mesh mesh = build_mesh(c.params.grid);
  const State initial = make_initial_state(c, mesh);
  const auto start = std::chrono::steady_clock::now();
  Trajectory traj;
  try {
    traj = run_scheme(mesh, c.params, initial, c.n_steps, c.solver);
  } catch (const SchemeConvergenceError& e) {
    write_trajectory(root, mesh, c, e.partial());
    err << "error: " << e.what() << "\n  completed " << e.partial().num_steps() << " of " << c.n_steps
        << " steps; partial output in " << root.string() << "\n";
    return no_convergence;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_trajectory(root, mesh, c, traj);
  out << "run: " << traj.num_steps() << " steps in " << seconds << " s\n"
      << "energy: " << traj.energies.front().total << " -> " << traj.energies.back().total << "\n";
  if (const auto failure = audit_trajectory(traj, mesh, c, out)) {
    err << "audit failed:\n" << failure->summary;
    return audit_failure;
  }
  return ok;
}

int cmd_audit(const Flags& f, std::ostream& out, std::ostream& err) {
  const fs::path root = f.out ? fs::path(*f.out) : fs::path(f.positional.empty() ? "out" : f.positional);
  const RunConfig c = parse_config(f.config.empty() ? root / "config.toml" : fs::path(f.config));
  const Mesh mesh = build_mesh(c.params.grid);
  std::ostringstream why;

  const fs::path energy_path = root / "energy.csv";
  const auto energy = read_table(energy_path);
  const auto& step = column(energy, "step", energy_path);
  const auto& total = column(energy, "total", energy_path);
  const auto& diss_eta = column(energy, "diss_eta", energy_path);
  const auto& diss_theta = column(energy, "diss_theta", energy_path);
  if (total.empty()) throw ConfigError({{energy_path.string(), 0, "no rows"}});
  const double tol = dissipation_tolerance(total.front());
  double min_slack = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < total.size(); ++i) {
    const double slack = total[i - 1] - (total[i] + diss_eta[i] + diss_theta[i]);
    min_slack = std::min(min_slack, slack);
    if (!(slack >= -tol)) why << "energy inequality fails at step " << step[i] << " (slack " << slack << ")\n";
  }
  out << "dissipation: " << total.size() - 1 << " steps, min slack " << min_slack << " (tolerance " << -tol
      << ")\n";

  const fs::path bounds_path = root / "bounds.csv";
  const auto bounds = read_table(bounds_path);
  double excursion = 0.0;
  const auto& bstep = column(bounds, "step", bounds_path);
  const auto& eta_min = column(bounds, "eta_min", bounds_path);
  const auto& eta_max = column(bounds, "eta_max", bounds_path);
  const auto& theta_min = column(bounds, "theta_min", bounds_path);
  const auto& theta_max = column(bounds, "theta_max", bounds_path);
  for (std::size_t i = 0; i < bstep.size(); ++i) {
    const double e = std::max({-eta_min[i], eta_max[i] - 1.0, c.params.r0 - theta_min[i],
                               theta_max[i] - c.params.r1, 0.0});
    excursion = std::max(excursion, e);
    if (e > kBoundTolerance) why << "bounds exceeded by " << e << " at step " << bstep[i] << "\n";
  }

  // Snapshots: bounds and energies recomputed from the stored fields.
  int snapshots = 0;
  double energy_mismatch = 0.0;
  if (fs::is_directory(root / "eta")) {
    for (const auto& entry : fs::directory_iterator(root / "eta")) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("snap_", 0) != 0) continue;
      const int k = std::stoi(name.substr(5));
      std::ifstream eta_in(entry.path());
      std::ifstream theta_in(root / "theta" / name);
      if (!theta_in) {
        why << "snapshot " << name << " has no theta counterpart\n";
        continue;
      }
      const FieldPair eta(read_field_csv(eta_in, mesh));
      const FieldPair theta(read_field_csv(theta_in, mesh));
      const double e = std::max({-eta.bulk.minCoeff(), eta.bulk.maxCoeff() - 1.0,
                                 c.params.r0 - theta.bulk.minCoeff(), theta.bulk.maxCoeff() - c.params.r1, 0.0});
      excursion = std::max(excursion, e);
      if (e > kBoundTolerance) why << "snapshot " << k << " exceeds bounds by " << e << "\n";
      const auto row = std::find(step.begin(), step.end(), static_cast<double>(k));
      if (row != step.end()) {
        const double recomputed = eval_free_energy(mesh, c.params, eta, theta, EnergyMode::relaxed).total;
        const double stored = total[row - step.begin()];
        const double mismatch = std::abs(recomputed - stored) / (1.0 + std::abs(stored));
        energy_mismatch = std::max(energy_mismatch, mismatch);
        if (mismatch > 1e-9) why << "snapshot " << k << " energy " << recomputed << " != recorded " << stored << "\n";
      }
      ++snapshots;
    }
  }
  out << "bounds: max excursion " << excursion << " (tolerance " << kBoundTolerance << ")\n"
      << "snapshots: " << snapshots << " rechecked, max relative energy mismatch " << energy_mismatch << "\n";
  if (!why.str().empty()) {
    err << "audit failed:\n" << why.str();
    return audit_failure;
  }
  out << "audit passed\n";
  return ok;
}

int cmd_compare(const Flags& f, std::ostream& out, std::ostream& err) {
  const RunConfig c = load(f);
  const fs::path root = prepare_output(c.output_dir);
  const Mesh mesh = build_mesh(c.params.grid);
  const State first = make_initial_state(c, mesh);
  // Second run: eta pulled toward 1 and theta toward r0, so eta^1 <= eta^2
  // and theta^1 >= theta^2 hold initially.
  State second = first;
  second.eta.bulk = (1.0 + first.eta.bulk.array()) / 2.0;
  second.theta.bulk = (c.params.r0 + first.theta.bulk.array()) / 2.0;
  const ComparisonReport report = comparison_experiment(mesh, c.params, first, second, c.n_steps, c.solver);
  auto csv = open_out(root / "compare.csv");
  csv.precision(17);
  csv << "step,eta_plus,theta_plus,theta_plus_weighted,theta_plus_weighted_before\n";
  for (std::size_t i = 0; i < report.eta_plus.size(); ++i) {
    csv << i << ',' << report.eta_plus[i] << ',' << report.theta_plus[i] << ',';
    if (i == 0) {
      csv << ",\n";
    } else {
      csv << report.theta_plus_weighted[i - 1] << ',' << report.theta_plus_weighted_before[i - 1] << '\n';
    }
  }
  out << "compare: " << c.n_steps << " coupled steps\n"
      << "  eta positive part: " << report.eta_plus.front() << " -> " << report.eta_plus.back()
      << (report.eta_nonincreasing() ? " (nonincreasing)" : " (INCREASES)") << "\n"
      << "  theta positive part: " << report.theta_plus.front() << " -> " << report.theta_plus.back()
      << (report.theta_contracting() ? " (contracting)" : " (NOT contracting)") << "\n";
  if (!report.passed()) {
    err << "audit failed: comparison property violated\n";
    return audit_failure;
  }
  return ok;
}

int cmd_certificate(const Flags& f, std::ostream& out, std::ostream& err) {
  const RunConfig c = load(f);
  const fs::path root = prepare_output(c.output_dir);
  const Mesh mesh = build_mesh(c.params.grid);
  State state = make_initial_state(c, mesh);
  if (c.n_steps > 0) {
    try {
      state = run_scheme(mesh, c.params, state, c.n_steps, c.solver).states.back();
    } catch (const SchemeConvergenceError& e) {
      err << "error: " << e.what() << "\n";
      return no_convergence;
    }
  }
  const Certificate cert = compute_certificate(mesh, c.params, state);
  {
    auto omega = open_out(root / "omega.csv");
    write_omega_csv(omega, mesh, cert);
    auto boundary = open_out(root / "boundary.csv");
    write_boundary_report_csv(boundary, mesh, cert);
  }
  const double b1_min = cert.b1_residual.minCoeff();
  const double b1_max = cert.b1_residual.maxCoeff();
  out << "certificate after " << c.n_steps << " steps (delta = " << c.params.delta << ")\n"
      << "  max |omega*| = " << cert.max_norm_omega << "\n"
      << "  b1 residual in [" << b1_min << ", " << b1_max << "]\n"
      << "  boundary: " << cert.count(BoundaryClass::continuous) << " continuous, "
      << cert.count(BoundaryClass::jump) << " jump, " << cert.count(BoundaryClass::transition) << " transition, "
      << cert.count(BoundaryClass::violation) << " violation (jump threshold " << cert.jump_threshold << ")\n";
  std::ostringstream why;
  if (!(cert.max_norm_omega < 1.0)) why << "max |omega*| >= 1\n";
  if (b1_min < 0.0 || b1_max > c.params.delta) why << "b1 residual outside [0, delta]\n";
  if (cert.count(BoundaryClass::violation) > 0) why << "boundary sign condition violated\n";
  if (!why.str().empty()) {
    err << "audit failed:\n" << why.str();
    return audit_failure;
  }
  return ok;
}

int cmd_sweep(const Flags& f, std::ostream& out, std::ostream& err) {
  const RunConfig c = load(f);
  const fs::path root = prepare_output(c.output_dir);
  const Mesh mesh = build_mesh(c.params.grid);
  const State initial = make_initial_state(c, mesh);
  const ContinuationTable table =
      delta_continuation(mesh, c.params, f.deltas, initial, c.n_steps, c.solver, std::max(1, f.workers));
  {
    auto csv = open_out(root / "continuation.csv");
    write_continuation_csv(csv, table);
  }
  out << "sweep-delta: " << table.rows.size() << " values, " << c.n_steps << " steps each\n";
  for (const auto& r : table.rows) {
    out << "  delta " << r.delta << ": gap " << r.gap << " (bound " << r.bound << ")";
    if (r.l2_to_previous) out << ", L2 to previous " << *r.l2_to_previous;
    if (!r.error.empty()) out << ", FAILED: " << r.error;
    out << "\n";
  }
  std::ostringstream why;
  for (const auto& r : table.rows) {
    if (!r.error.empty()) {
      err << "error: run for delta = " << r.delta << " failed: " << r.error << "\n";
      return no_convergence;
    }
  }
  if (!table.gaps_within_bounds()) why << "relaxation gap exceeds its bound\n";
  if (c.n_steps > 0 && table.rows.size() >= 3 && !table.cauchy_decreasing()) {
    why << "consecutive L2 distances are not strictly decreasing\n";
  }
  if (!why.str().empty()) {
    err << "audit failed:\n" << why.str();
    return audit_failure;
  }
  return ok;
}

}  // namespace

State make_initial_state(const RunConfig& c, const Mesh& mesh) {
  switch (c.initial) {
    case InitialData::two_grain: return two_grain_state(mesh, c.params);
    case InitialData::ground: return ground_state(mesh, c.params);
    case InitialData::random: return random_state(mesh, c.params, c.seed);
    case InitialData::from_file: {
      std::ifstream eta(c.initial_eta);
      std::ifstream theta(c.initial_theta);
      if (!eta) throw ConfigError({{"run.initial_eta", 0, "cannot open '" + c.initial_eta + "'"}});
      if (!theta) throw ConfigError({{"run.initial_theta", 0, "cannot open '" + c.initial_theta + "'"}});
      State s;
      s.eta = FieldPair(read_field_csv(eta, mesh));
      s.theta = FieldPair(read_field_csv(theta, mesh));
      return s;
    }
  }
  return two_grain_state(mesh, c.params);
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Relaxed KWC grain boundary solver with dynamic boundary conditions", "kwc"};
  app.require_subcommand(1);
  Flags flags;
  std::string deltas;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    sub->add_option("path", flags.positional, needs_config ? "configuration file" : "output directory");
    sub->add_option("--config", flags.config, "configuration file");
    sub->add_option("--out", flags.out, "output directory");
  };
  auto add_run_flags = [&](CLI::App* sub) {
    sub->add_option("--steps", flags.steps, "number of time steps")->check(CLI::NonNegativeNumber);
    sub->add_option("--tol", flags.tol, "relative inner solver tolerance")->check(CLI::PositiveNumber);
  };

  auto* validate = app.add_subcommand("validate", "check a configuration against the model assumptions");
  add_common(validate, true);
  auto* run = app.add_subcommand("run", "evolve, write energy.csv, bounds.csv and snapshots, then audit");
  add_common(run, true);
  add_run_flags(run);
  auto* audit = app.add_subcommand("audit", "re-audit the output directory of a run");
  add_common(audit, false);
  auto* compare = app.add_subcommand("compare", "coupled runs from ordered initial data");
  add_common(compare, true);
  add_run_flags(compare);
  auto* certificate = app.add_subcommand("certificate", "evolve, then check the subdifferential certificate");
  add_common(certificate, true);
  add_run_flags(certificate);
  auto* sweep = app.add_subcommand("sweep-delta", "repeat a run for a decreasing sequence of delta");
  add_common(sweep, true);
  add_run_flags(sweep);
  sweep->add_option("--deltas", deltas, "comma separated delta values");
  sweep->add_option("--workers", flags.workers, "worker threads")->check(CLI::PositiveNumber);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return ok;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return usage_error;
  }

  try {
    if (!deltas.empty()) {
      flags.deltas.clear();
      std::stringstream s(deltas);
      std::string item;
      while (std::getline(s, item, ',')) {
        std::size_t used = 0;
        const double d = std::stod(item, &used);
        if (used != item.size() || !(d > 0.0)) throw std::invalid_argument(item);
        flags.deltas.push_back(d);
      }
    }
  } catch (const std::exception&) {
    err << "usage error: --deltas expects positive numbers separated by commas\n";
    return usage_error;
  }

  out.precision(10);
  try {
    if (validate->parsed()) return cmd_validate(flags, out);
    if (run->parsed()) return cmd_run(flags, out, err);
    if (audit->parsed()) return cmd_audit(flags, out, err);
    if (compare->parsed()) return cmd_compare(flags, out, err);
    if (certificate->parsed()) return cmd_certificate(flags, out, err);
    if (sweep->parsed()) return cmd_sweep(flags, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return usage_error;
  } catch (const ConvergenceError& e) {
    err << "error: " << e.what() << "\n";
    return no_convergence;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return usage_error;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return usage_error;
  }
  return usage_error;
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace kwc::cli
