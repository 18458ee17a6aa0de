#ifndef KWC_CLI_APP_HPP
#define KWC_CLI_APP_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "kwc/cli/config.hpp"
#include "kwc/mesh.hpp"
#include "kwc/scheme.hpp"

namespace kwc::cli {

enum ExitCode : int { ok = 0, audit_failure = 1, usage_error = 2, no_convergence = 3 };

/// Initial state selected by the config (files are read for from_file).
State make_initial_state(const RunConfig& config, const Mesh& mesh);

/// Runs a subcommand. `args` excludes the program name. Summaries go to
/// `out`, errors to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main(int argc, char** argv);

}  // namespace kwc::cli

#endif  // KWC_CLI_APP_HPP
