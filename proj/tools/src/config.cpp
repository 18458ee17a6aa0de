#include "kwc/cli/config.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <variant>

namespace kwc::cli {

namespace {

using Value = std::variant<double, std::string, std::vector<double>>;

struct Entry {
  Value value;
  int line = 0;
  bool used = false;
};

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::optional<double> to_number(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

// Strips a trailing comment that is not inside a string.
std::string_view strip_comment(std::string_view s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

std::optional<Value> parse_value(std::string_view s, std::string& why) {
  s = trim(s);
  if (s.empty()) {
    why = "missing value";
    return std::nullopt;
  }
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"') {
      why = "unterminated string";
      return std::nullopt;
    }
    return Value{std::string(s.substr(1, s.size() - 2))};
  }
  if (s.front() == '[') {
    if (s.back() != ']') {
      why = "unterminated array";
      return std::nullopt;
    }
    std::vector<double> items;
    std::string_view body = trim(s.substr(1, s.size() - 2));
    while (!body.empty()) {
      const auto comma = body.find(',');
      const auto item = trim(body.substr(0, comma));
      if (!item.empty()) {
        const auto v = to_number(item);
        if (!v) {
          why = "array entry '" + std::string(item) + "' is not a number";
          return std::nullopt;
        }
        items.push_back(*v);
      }
      if (comma == std::string_view::npos) break;
      body = body.substr(comma + 1);
    }
    return Value{std::move(items)};
  }
  if (const auto v = to_number(s)) return Value{*v};
  why = "cannot read value '" + std::string(s) + "' (strings need double quotes)";
  return std::nullopt;
}

class Reader {
 public:
  std::map<std::string, Entry> entries;
  std::map<std::string, int> section_lines;
  std::vector<Diagnostic> diagnostics;

  void fail(std::string key, int line, std::string reason) {
    diagnostics.push_back({std::move(key), line, std::move(reason)});
  }

  int line_of(const std::string& key) const {
    const auto it = entries.find(key);
    return it == entries.end() ? 0 : it->second.line;
  }

  const Entry* find(const std::string& key, bool required) {
    const auto it = entries.find(key);
    if (it == entries.end()) {
      if (required) fail(key, 0, "missing key");
      return nullptr;
    }
    it->second.used = true;
    return &it->second;
  }

  void number(const std::string& key, double& out, bool required = true) {
    const Entry* e = find(key, required);
    if (!e) return;
    if (const auto* v = std::get_if<double>(&e->value)) {
      out = *v;
    } else {
      fail(key, e->line, "expected a number");
    }
  }

  template <class Int>
  void integer(const std::string& key, Int& out, bool required = true) {
    double v = 0.0;
    const std::size_t before = diagnostics.size();
    const Entry* e = entries.count(key) ? &entries.at(key) : nullptr;
    number(key, v, required);
    if (!e || diagnostics.size() != before) return;
    if (v != static_cast<double>(static_cast<Int>(v)) || v < 0.0) {
      fail(key, e->line, "expected a nonnegative integer");
      return;
    }
    out = static_cast<Int>(v);
  }

  void text(const std::string& key, std::string& out, bool required = true) {
    const Entry* e = find(key, required);
    if (!e) return;
    if (const auto* v = std::get_if<std::string>(&e->value)) {
      out = *v;
    } else {
      fail(key, e->line, "expected a quoted string");
    }
  }

  void array(const std::string& key, std::vector<double>& out) {
    const Entry* e = find(key, true);
    if (!e) return;
    if (const auto* v = std::get_if<std::vector<double>>(&e->value)) {
      out = *v;
    } else {
      fail(key, e->line, "expected an array of numbers");
    }
  }

  // Runs a string-to-enum conversion and turns its exception into a diagnostic.
  template <class F>
  void convert(const std::string& key, F&& f) {
    try {
      f();
    } catch (const Error& err) {
      fail(key, line_of(key), err.what());
    }
  }
};

Reader tokenize(std::string_view text) {
  Reader r;
  std::string section;
  int line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        r.fail("[" + section + "]", line_no, "malformed section header");
        continue;
      }
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (r.section_lines.count(section)) r.fail("[" + section + "]", line_no, "duplicate section");
      r.section_lines[section] = line_no;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      r.fail(section, line_no, "expected key = value");
      continue;
    }
    const auto name = std::string(trim(line.substr(0, eq)));
    const auto key = section.empty() ? name : section + "." + name;
    if (name.empty()) {
      r.fail(section, line_no, "empty key");
      continue;
    }
    std::string why;
    auto value = parse_value(line.substr(eq + 1), why);
    if (!value) {
      r.fail(key, line_no, why);
      continue;
    }
    if (r.entries.count(key)) {
      r.fail(key, line_no, "duplicate key (first set on line " + std::to_string(r.entries[key].line) + ")");
      continue;
    }
    r.entries[key] = Entry{std::move(*value), line_no, false};
  }
  return r;
}

const std::pair<const char*, ScalarFunction ModelParams::*> kFunctions[] = {
    {"g", &ModelParams::g},
    {"g_gamma", &ModelParams::g_gamma},
    {"alpha", &ModelParams::alpha},
    {"alpha0", &ModelParams::alpha0},
    {"alpha_gamma0", &ModelParams::alpha_gamma0},
};

// Line to cite for a failed assumption.
int assumption_line(const Reader& r, const std::string& label) {
  auto section = [&](const char* s) {
    const auto it = r.section_lines.find(s);
    return it == r.section_lines.end() ? 0 : it->second;
  };
  if (label == "tau") return r.line_of("model.tau");
  if (label == "A1") return section("g");
  if (label == "A2") return section("alpha0");
  if (label == "A3") return section("alpha");
  return 0;
}

}  // namespace

std::string_view to_string(InitialData k) {
  switch (k) {
    case InitialData::two_grain: return "two_grain";
    case InitialData::ground: return "ground";
    case InitialData::random: return "random";
    case InitialData::from_file: return "from_file";
  }
  return "two_grain";
}

std::string format(const Diagnostic& d) {
  std::ostringstream s;
  s << d.key;
  if (d.line > 0) s << " (line " << d.line << ")";
  s << ": " << d.reason;
  return s.str();
}

ConfigError::ConfigError(std::vector<Diagnostic> diagnostics)
    : Error([&] {
        std::string msg = "invalid configuration";
        for (const auto& d : diagnostics) msg += "\n  " + format(d);
        return msg;
      }()),
      diagnostics_(std::move(diagnostics)) {}

RunConfig parse_config_text(std::string_view text) {
  Reader r = tokenize(text);
  RunConfig c;
  ModelParams& p = c.params;

  r.number("model.kappa", p.kappa);
  r.number("model.kappa_gamma", p.kappa_gamma);
  r.number("model.epsilon", p.epsilon);
  r.number("model.delta", p.delta);
  r.number("model.tau", p.tau);
  r.number("model.r0", p.r0);
  r.number("model.r1", p.r1);

  std::string geometry;
  r.text("grid.geometry", geometry);
  r.convert("grid.geometry", [&] { p.grid.geometry = geometry_from_string(geometry); });
  r.integer("grid.nx", p.grid.nx);
  r.integer("grid.ny", p.grid.ny, p.grid.geometry == Geometry::periodic_strip);
  r.number("grid.lx", p.grid.lx);
  r.number("grid.ly", p.grid.ly, p.grid.geometry == Geometry::periodic_strip);

  for (const auto& [name, member] : kFunctions) {
    const std::string section = name;
    ScalarFunction& f = p.*member;
    r.text(section + ".kind", f.kind);
    r.array(section + ".coeffs", f.coeffs);
    r.convert(section + ".kind", [&] { check_function(f, name); });
  }

  r.integer("run.n_steps", c.n_steps);
  r.integer("run.snapshot_interval", c.snapshot_interval);
  r.text("run.output_dir", c.output_dir);
  r.integer("run.seed", c.seed);
  std::string initial;
  r.text("run.initial", initial);
  if (initial == "two_grain") {
    c.initial = InitialData::two_grain;
  } else if (initial == "ground") {
    c.initial = InitialData::ground;
  } else if (initial == "random") {
    c.initial = InitialData::random;
  } else if (initial == "from_file") {
    c.initial = InitialData::from_file;
  } else if (r.entries.count("run.initial")) {
    r.fail("run.initial", r.line_of("run.initial"),
           "unknown initial data '" + initial + "' (two_grain, ground, random, from_file)");
  }
  const bool from_file = c.initial == InitialData::from_file;
  r.text("run.initial_eta", c.initial_eta, from_file);
  r.text("run.initial_theta", c.initial_theta, from_file);
  if (c.snapshot_interval == 0 && r.entries.count("run.snapshot_interval")) {
    r.fail("run.snapshot_interval", r.line_of("run.snapshot_interval"), "must be positive");
  }

  r.number("solver.tol_inner", c.solver.tol_inner, false);
  r.integer("solver.max_outer", c.solver.max_outer, false);
  r.number("solver.cg_tol", c.solver.cg_tol, false);
  std::string method(to_string(c.solver.theta_method));
  std::string linear(to_string(c.solver.linear_solver));
  r.text("solver.theta_method", method, false);
  r.text("solver.linear_solver", linear, false);
  r.convert("solver.theta_method", [&] { c.solver.theta_method = theta_method_from_string(method); });
  r.convert("solver.linear_solver", [&] { c.solver.linear_solver = linear_solver_from_string(linear); });

  for (const auto& [key, entry] : r.entries) {
    if (!entry.used) r.fail(key, entry.line, "unknown key");
  }
  if (!r.diagnostics.empty()) throw ConfigError(std::move(r.diagnostics));

  try {
    build_mesh(p.grid);
  } catch (const Error& err) {
    r.fail("grid", r.section_lines.count("grid") ? r.section_lines.at("grid") : 0, err.what());
  }
  const ValidationReport report = validate_assumptions(p);
  for (const auto& check : report.checks) {
    if (check.passed) continue;
    std::ostringstream reason;
    reason.precision(17);
    if (check.label == "tau") {
      reason << "violates (tau < tau_*): tau = " << p.tau << ", tau_* = " << report.tau_star;
    } else {
      reason << "violates (" << check.label << "): " << check.description;
      if (check.witness) reason << " (fails at s = " << *check.witness << ")";
    }
    const std::string key = check.label == "tau" ? "model.tau" : "(" + check.label + ")";
    r.fail(key, assumption_line(r, check.label), reason.str());
  }
  if (!r.diagnostics.empty()) throw ConfigError(std::move(r.diagnostics));
  return c;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({{path.string(), 0, "cannot open file"}});
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

void write_config(std::ostream& out, const RunConfig& c) {
  const auto old = out.precision(17);
  const ModelParams& p = c.params;
  out << "[model]\n"
      << "kappa = " << p.kappa << "\n"
      << "kappa_gamma = " << p.kappa_gamma << "\n"
      << "epsilon = " << p.epsilon << "\n"
      << "delta = " << p.delta << "\n"
      << "tau = " << p.tau << "\n"
      << "r0 = " << p.r0 << "\n"
      << "r1 = " << p.r1 << "\n\n";
  out << "[grid]\n"
      << "geometry = \"" << to_string(p.grid.geometry) << "\"\n"
      << "nx = " << p.grid.nx << "\n"
      << "ny = " << p.grid.ny << "\n"
      << "lx = " << p.grid.lx << "\n"
      << "ly = " << p.grid.ly << "\n";
  for (const auto& [name, member] : kFunctions) {
    const ScalarFunction& f = p.*member;
    out << "\n[" << name << "]\nkind = \"" << f.kind << "\"\ncoeffs = [";
    for (std::size_t i = 0; i < f.coeffs.size(); ++i) out << (i ? ", " : "") << f.coeffs[i];
    out << "]\n";
  }
  out << "\n[run]\n"
      << "n_steps = " << c.n_steps << "\n"
      << "snapshot_interval = " << c.snapshot_interval << "\n"
      << "output_dir = \"" << c.output_dir << "\"\n"
      << "seed = " << c.seed << "\n"
      << "initial = \"" << to_string(c.initial) << "\"\n";
  if (c.initial == InitialData::from_file) {
    out << "initial_eta = \"" << c.initial_eta << "\"\n"
        << "initial_theta = \"" << c.initial_theta << "\"\n";
  }
  out << "\n[solver]\n"
      << "tol_inner = " << c.solver.tol_inner << "\n"
      << "max_outer = " << c.solver.max_outer << "\n"
      << "cg_tol = " << c.solver.cg_tol << "\n"
      << "theta_method = \"" << to_string(c.solver.theta_method) << "\"\n"
      << "linear_solver = \"" << to_string(c.solver.linear_solver) << "\"\n";
  out.precision(old);
}

}  // namespace kwc::cli
