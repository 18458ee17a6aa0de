#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <unistd.h>

#include <gtest/gtest.h>

#include "kwc/cli/app.hpp"
#include "kwc/cli/config.hpp"
#include "kwc/cli/initial_data.hpp"

namespace {

namespace fs = std::filesystem;
using namespace kwc;
using namespace kwc::cli;

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string default_text() { return slurp(KWC_DEFAULT_CONFIG); }

std::string replace(std::string text, const std::string& from, const std::string& to) {
  const auto at = text.find(from);
  EXPECT_NE(at, std::string::npos) << from;
  if (at != std::string::npos) text.replace(at, from.size(), to);
  return text;
}

const Diagnostic* find_key(const ConfigError& e, const std::string& key) {
  for (const auto& d : e.diagnostics())
    if (d.key == key) return &d;
  return nullptr;
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("kwc_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

int run_cli(const std::vector<std::string>& args, std::string* out_text = nullptr, std::string* err_text = nullptr) {
  std::ostringstream out, err;
  const int code = dispatch(args, out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

TEST(Config, ShippedDefaultParses) {
  const RunConfig c = parse_config(KWC_DEFAULT_CONFIG);
  EXPECT_EQ(c.params, ModelParams{});
  EXPECT_EQ(c.params.tau, 0.01);
  EXPECT_LT(c.params.tau, step_size_limit(c.params));
  EXPECT_NEAR(step_size_limit(c.params), 1.0 / 6.0, 1e-9);
  EXPECT_EQ(c.n_steps, 500);
  EXPECT_EQ(c.initial, InitialData::two_grain);
}

TEST(Config, LargeStepRejectedWithGuard) {
  try {
    parse_config_text(replace(default_text(), "tau = 0.01", "tau = 0.2"));
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const Diagnostic* d = find_key(e, "model.tau");
    ASSERT_NE(d, nullptr);
    EXPECT_NE(d->reason.find("tau < tau_*"), std::string::npos);
    EXPECT_NE(d->reason.find("0.1666666666666"), std::string::npos);
    EXPECT_GT(d->line, 0);
  }
}

TEST(Config, NonzeroAlphaSlopeCitesA3) {
  try {
    parse_config_text(replace(default_text(), "coeffs = [0.1, 0.0, 1.0]", "coeffs = [0.5, 0.2, 1.0]"));
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(find_key(e, "(A3)"), nullptr);
    EXPECT_NE(std::string(e.what()).find("(A3)"), std::string::npos);
  }
}

TEST(Config, MissingUnknownAndMalformedKeys) {
  std::string text = replace(default_text(), "kappa_gamma = 0.05\n", "");
  text = replace(text, "nx = 64", "nx = 64\nnz = 3");
  text = replace(text, "seed = 0", "seed = zero");
  try {
    parse_config_text(text);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const Diagnostic* missing = find_key(e, "model.kappa_gamma");
    ASSERT_NE(missing, nullptr);
    EXPECT_EQ(missing->reason, "missing key");
    const Diagnostic* unknown = find_key(e, "grid.nz");
    ASSERT_NE(unknown, nullptr);
    EXPECT_GT(unknown->line, 0);
    const Diagnostic* bad = find_key(e, "run.seed");
    ASSERT_NE(bad, nullptr);
    EXPECT_GT(bad->line, 0);
  }
}

TEST(Config, RoundTrip) {
  RunConfig c = parse_config(KWC_DEFAULT_CONFIG);
  c.params.delta = 0.1 / 3.0;
  c.params.alpha0 = {"linear", {1.0, 0.25}};
  c.seed = 12345;
  c.output_dir = "some dir/out";
  c.solver.linear_solver = LinearSolver::direct;
  std::ostringstream s;
  write_config(s, c);
  EXPECT_EQ(parse_config_text(s.str()), c);

  c.params.grid = {Geometry::interval, 16, 32, 2.0, 1.0};
  c.initial = InitialData::from_file;
  c.initial_eta = "eta.csv";
  c.initial_theta = "theta.csv";
  std::ostringstream t;
  write_config(t, c);
  EXPECT_EQ(parse_config_text(t.str()), c);
}

TEST(InitialData, TwoGrainProfile) {
  const ModelParams p;
  const Mesh m = build_mesh(p.grid);
  const State s = two_grain_state(m, p);
  EXPECT_NO_THROW(check_initial_data(m, p, s));
  EXPECT_NEAR(s.eta.bulk.minCoeff(), 0.2, 1e-12);
  EXPECT_EQ(s.theta.bulk.minCoeff(), p.r0);
  EXPECT_EQ(s.theta.bulk.maxCoeff(), p.r1);
  for (int i = 0; i < m.num_nodes(); ++i) {
    const double x = m.x(i);
    if (std::abs(x - 0.5) < 0.1) EXPECT_EQ(s.theta.bulk[i], p.r1);
    if (x < 0.1 || x > 0.9) EXPECT_EQ(s.theta.bulk[i], p.r0);
  }
  const State a = random_state(m, p, 7);
  const State b = random_state(m, p, 7);
  EXPECT_EQ((a.eta.bulk - b.eta.bulk).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_NO_THROW(check_initial_data(m, p, a));
}

TEST(Dispatch, ValidateDefault) {
  std::string out;
  EXPECT_EQ(run_cli({"validate", KWC_DEFAULT_CONFIG}, &out), ok);
  EXPECT_NE(out.find("tau_*"), std::string::npos);
  EXPECT_EQ(run_cli({"validate", "--config", KWC_DEFAULT_CONFIG}), ok);
}

TEST(Dispatch, UsageErrors) {
  EXPECT_EQ(run_cli({}), usage_error);
  EXPECT_EQ(run_cli({"frobnicate"}), usage_error);
  EXPECT_EQ(run_cli({"validate", "/nonexistent/config.toml"}), usage_error);
  EXPECT_EQ(run_cli({"sweep-delta", KWC_DEFAULT_CONFIG, "--deltas", "0.1,abc"}), usage_error);
}

TEST(Dispatch, RunRejectsLargeStep) {
  TempDir dir;
  const fs::path cfg = dir.path() / "bad.toml";
  std::ofstream(cfg) << replace(default_text(), "tau = 0.01", "tau = 0.2");
  std::string err;
  EXPECT_EQ(run_cli({"run", cfg.string(), "--out", (dir.path() / "o").string()}, nullptr, &err), usage_error);
  EXPECT_NE(err.find("tau_*"), std::string::npos);
}

TEST(Dispatch, RunThenAudit) {
  TempDir dir;
  const std::string out = (dir.path() / "run").string();
  ASSERT_EQ(run_cli({"run", KWC_DEFAULT_CONFIG, "--steps", "12", "--out", out}), ok);
  for (const char* f : {"energy.csv", "bounds.csv", "config.toml", "eta/snap_0.csv", "theta/snap_12.csv"})
    EXPECT_TRUE(fs::exists(fs::path(out) / f)) << f;
  const std::string energy = slurp(fs::path(out) / "energy.csv");
  EXPECT_EQ(energy.substr(0, energy.find('\n')),
            "step,t,total,eta_bulk,eta_surf,potential,weighted_len,theta_surf,mode,diss_eta,diss_theta,slack,"
            "theta_outer_iters,eta_outer_iters");
  std::string report;
  EXPECT_EQ(run_cli({"audit", out}, &report), ok);
  EXPECT_NE(report.find("audit passed"), std::string::npos);

  // Tampering with a recorded energy must be caught.
  std::istringstream lines(energy);
  std::string line, tampered;
  int n = 0;
  while (std::getline(lines, line)) {
    if (n++ == 5) {
      const auto first = line.find(',', line.find(',') + 1);
      const auto second = line.find(',', first + 1);
      line = line.substr(0, first + 1) + "1000" + line.substr(second);
    }
    tampered += line + "\n";
  }
  std::ofstream(fs::path(out) / "energy.csv") << tampered;
  EXPECT_EQ(run_cli({"audit", out}), audit_failure);
}

TEST(Dispatch, SameConfigGivesIdenticalEnergyCsv) {
  TempDir dir;
  const std::string a = (dir.path() / "a").string();
  const std::string b = (dir.path() / "b").string();
  ASSERT_EQ(run_cli({"run", KWC_DEFAULT_CONFIG, "--steps", "8", "--out", a}), ok);
  ASSERT_EQ(run_cli({"run", KWC_DEFAULT_CONFIG, "--steps", "8", "--out", b}), ok);
  EXPECT_EQ(slurp(fs::path(a) / "energy.csv"), slurp(fs::path(b) / "energy.csv"));
}

TEST(Dispatch, RandomInitialDataIsSeeded) {
  TempDir dir;
  const fs::path cfg = dir.path() / "random.toml";
  std::ofstream(cfg) << replace(replace(default_text(), "initial = \"two_grain\"", "initial = \"random\""),
                                "seed = 0", "seed = 31");
  const std::string a = (dir.path() / "a").string();
  const std::string b = (dir.path() / "b").string();
  ASSERT_EQ(run_cli({"run", cfg.string(), "--steps", "3", "--out", a}), ok);
  ASSERT_EQ(run_cli({"run", cfg.string(), "--steps", "3", "--out", b}), ok);
  EXPECT_EQ(slurp(fs::path(a) / "energy.csv"), slurp(fs::path(b) / "energy.csv"));
}

TEST(Dispatch, FromFileRestartsFromSnapshot) {
  TempDir dir;
  const std::string first = (dir.path() / "first").string();
  ASSERT_EQ(run_cli({"run", KWC_DEFAULT_CONFIG, "--steps", "4", "--out", first}), ok);
  const fs::path cfg = dir.path() / "restart.toml";
  std::string text = replace(default_text(), "initial = \"two_grain\"",
                             "initial = \"from_file\"\ninitial_eta = \"" + first + "/eta/snap_4.csv\"\n" +
                                 "initial_theta = \"" + first + "/theta/snap_4.csv\"");
  std::ofstream(cfg) << text;
  const std::string second = (dir.path() / "second").string();
  ASSERT_EQ(run_cli({"run", cfg.string(), "--steps", "2", "--out", second}), ok);
  EXPECT_EQ(slurp(fs::path(first) / "eta" / "snap_4.csv"), slurp(fs::path(second) / "eta" / "snap_0.csv"));
}

TEST(Dispatch, CompareCertificateSweep) {
  TempDir dir;
  const std::string out = dir.path().string();
  EXPECT_EQ(run_cli({"compare", KWC_DEFAULT_CONFIG, "--steps", "5", "--out", out}), ok);
  EXPECT_TRUE(fs::exists(dir.path() / "compare.csv"));
  EXPECT_EQ(run_cli({"certificate", KWC_DEFAULT_CONFIG, "--steps", "3", "--out", out}), ok);
  EXPECT_TRUE(fs::exists(dir.path() / "omega.csv"));
  EXPECT_TRUE(fs::exists(dir.path() / "boundary.csv"));
  EXPECT_EQ(run_cli({"sweep-delta", KWC_DEFAULT_CONFIG, "--steps", "0", "--deltas", "0.1,0.05", "--workers", "2",
                     "--out", out}),
            ok);
  const std::string csv = slurp(dir.path() / "continuation.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

}  // namespace
