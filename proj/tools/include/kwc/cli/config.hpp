#ifndef KWC_CLI_CONFIG_HPP
#define KWC_CLI_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "kwc/error.hpp"
#include "kwc/model.hpp"
#include "kwc/scheme.hpp"

namespace kwc::cli {

enum class InitialData { two_grain, ground, random, from_file };

std::string_view to_string(InitialData k);

struct RunConfig {
  ModelParams params;  // includes the grid
  SolverOptions solver;
  int n_steps = 500;
  int snapshot_interval = 50;
  std::string output_dir = "out";
  std::uint64_t seed = 0;
  InitialData initial = InitialData::two_grain;
  std::string initial_eta;    // from_file only
  std::string initial_theta;  // from_file only

  bool operator==(const RunConfig&) const = default;
};

struct Diagnostic {
  std::string key;  // "section.key", or the assumption label
  int line = 0;     // 0 when not tied to a line
  std::string reason;
};

std::string format(const Diagnostic& d);

/// Parse or validation failure; carries every diagnostic found.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<Diagnostic> diagnostics);
  const std::vector<Diagnostic>& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::vector<Diagnostic> diagnostics_;
};

/**
 * Sectioned key = value text:
 *
 *   [model]   kappa kappa_gamma epsilon delta tau r0 r1
 *   [grid]    geometry nx ny lx ly
 *   [g] [g_gamma] [alpha] [alpha0] [alpha_gamma0]   kind coeffs
 *   [run]     n_steps snapshot_interval output_dir seed initial
 *             initial_eta initial_theta (from_file only)
 *   [solver]  tol_inner max_outer cg_tol theta_method linear_solver (optional)
 *
 * Values are numbers, "strings" or [number, ...] arrays; '#' starts a
 * comment. The result is checked against validate_assumptions.
 */
RunConfig parse_config_text(std::string_view text);
RunConfig parse_config(const std::filesystem::path& path);

/// Emits text that parse_config_text reads back to an equal RunConfig.
void write_config(std::ostream& out, const RunConfig& config);

}  // namespace kwc::cli

#endif  // KWC_CLI_CONFIG_HPP
