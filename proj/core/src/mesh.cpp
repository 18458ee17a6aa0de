#include "kwc/mesh.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "kwc/error.hpp"

namespace kwc {

std::string_view to_string(Geometry g) {
  switch (g) {
    case Geometry::interval:
      return "interval";
    case Geometry::periodic_strip:
      return "periodic_strip";
  }
  return "unknown";
}

Geometry geometry_from_string(std::string_view name) {
  if (name == "interval") return Geometry::interval;
  if (name == "periodic_strip") return Geometry::periodic_strip;
  throw InvalidParameter("unknown geometry '" + std::string(name) + "'");
}

Mesh::Mesh(const MeshSpec& spec) : spec_(spec) {
  if (spec.nx < 2) throw InvalidParameter("mesh: nx must be >= 2");
  if (!(spec.lx > 0.0) || !std::isfinite(spec.lx)) throw InvalidParameter("mesh: lx must be positive");

  if (spec.geometry == Geometry::interval) {
    const int n = spec.nx;
    hx_ = spec.lx / (n - 1);
    hy_ = 0.0;
    volumes_ = Field::Constant(n, hx_);
    volumes_[0] = volumes_[n - 1] = 0.5 * hx_;
    for (int i = 0; i + 1 < n; ++i) edges_.push_back({i, i + 1, hx_, hx_, 0});
    boundary_.push_back({0, 1, 0, -1.0, 0});
    boundary_.push_back({n - 1, n - 2, n - 2, +1.0, 1});
    areas_ = Field::Ones(2);
  } else {
    if (spec.ny < 3) throw InvalidParameter("mesh: periodic_strip needs ny >= 3");
    if (!(spec.ly > 0.0) || !std::isfinite(spec.ly)) throw InvalidParameter("mesh: ly must be positive");
    const int nx = spec.nx;
    const int ny = spec.ny;
    hx_ = spec.lx / nx;
    hy_ = spec.ly / (ny - 1);
    const double cell = hx_ * hy_;
    volumes_ = Field::Constant(nx * ny, cell);
    for (int i = 0; i < nx; ++i) {
      volumes_[i] = 0.5 * cell;
      volumes_[(ny - 1) * nx + i] = 0.5 * cell;
    }
    for (int j = 0; j < ny; ++j) {
      const double w = (j == 0 || j == ny - 1) ? 0.5 * cell : cell;
      for (int i = 0; i < nx; ++i) edges_.push_back({j * nx + i, j * nx + (i + 1) % nx, hx_, w, 0});
    }
    const int first_vertical = static_cast<int>(edges_.size());
    for (int j = 0; j + 1 < ny; ++j)
      for (int i = 0; i < nx; ++i) edges_.push_back({j * nx + i, (j + 1) * nx + i, hy_, cell, 1});

    for (int i = 0; i < nx; ++i) boundary_.push_back({i, nx + i, first_vertical + i, -1.0, 0});
    for (int i = 0; i < nx; ++i) {
      const int node = (ny - 1) * nx + i;
      boundary_.push_back({node, node - nx, first_vertical + (ny - 2) * nx + i, +1.0, 1});
    }
    areas_ = Field::Constant(2 * nx, hx_);
    for (int c = 0; c < 2; ++c)
      for (int i = 0; i < nx; ++i) surface_edges_.push_back({c * nx + i, c * nx + (i + 1) % nx, hx_, hx_, 0});
  }

  surface_index_.assign(volumes_.size(), -1);
  for (std::size_t s = 0; s < boundary_.size(); ++s) surface_index_[boundary_[s].node] = static_cast<int>(s);

  edge_weights_.resize(num_edges());
  for (int e = 0; e < num_edges(); ++e) edge_weights_[e] = edges_[e].weight;
  surface_edge_weights_.resize(num_surface_edges());
  for (int e = 0; e < num_surface_edges(); ++e) surface_edge_weights_[e] = surface_edges_[e].weight;
}

double Mesh::normal_spacing() const noexcept { return spec_.geometry == Geometry::interval ? hx_ : hy_; }

double Mesh::x(int node) const noexcept {
  return spec_.geometry == Geometry::interval ? node * hx_ : (node % spec_.nx) * hx_;
}

double Mesh::y(int node) const noexcept {
  return spec_.geometry == Geometry::interval ? 0.0 : (node / spec_.nx) * hy_;
}

std::pair<double, double> Mesh::edge_midpoint(int e) const noexcept {
  const Edge& edge = edges_[e];
  if (edge.axis == 0) return {x(edge.tail) + 0.5 * edge.length, y(edge.tail)};
  return {x(edge.tail), y(edge.tail) + 0.5 * edge.length};
}

Field Mesh::h_mass() const {
  Field m = volumes_;
  for (int s = 0; s < num_surface_nodes(); ++s) m[boundary_[s].node] += areas_[s];
  return m;
}

namespace {

[[noreturn]] void shape_fail(std::string_view what, std::string_view kind, Eigen::Index got, int want) {
  std::ostringstream msg;
  msg << what << ": expected " << kind << " field of size " << want << ", got " << got;
  throw ShapeError(msg.str());
}

}  // namespace

void Mesh::check_nodal(const Field& u, std::string_view what) const {
  if (u.size() != num_nodes()) shape_fail(what, "nodal", u.size(), num_nodes());
}

void Mesh::check_edge(const Field& p, std::string_view what) const {
  if (p.size() != num_edges()) shape_fail(what, "edge", p.size(), num_edges());
}

void Mesh::check_surface(const Field& u, std::string_view what) const {
  if (u.size() != num_surface_nodes()) shape_fail(what, "surface", u.size(), num_surface_nodes());
}

Mesh build_mesh(const MeshSpec& spec) { return Mesh(spec); }

Field apply_gradient(const Mesh& mesh, const Field& u) {
  mesh.check_nodal(u, "apply_gradient");
  const auto edges = mesh.edges();
  Field g(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) g[e] = (u[edges[e].head] - u[edges[e].tail]) / edges[e].length;
  return g;
}

Field apply_divergence(const Mesh& mesh, const Field& p) {
  mesh.check_edge(p, "apply_divergence");
  Field d = Field::Zero(mesh.num_nodes());
  const auto edges = mesh.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const double flux = edges[e].weight * p[e] / edges[e].length;
    d[edges[e].tail] += flux;
    d[edges[e].head] -= flux;
  }
  return d.cwiseQuotient(mesh.volumes());
}

Field apply_surface_gradient(const Mesh& mesh, const Field& u_gamma) {
  mesh.check_surface(u_gamma, "apply_surface_gradient");
  const auto edges = mesh.surface_edges();
  Field g(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e)
    g[e] = (u_gamma[edges[e].head] - u_gamma[edges[e].tail]) / edges[e].length;
  return g;
}

Field apply_surface_divergence(const Mesh& mesh, const Field& p_gamma) {
  if (p_gamma.size() != mesh.num_surface_edges()) throw ShapeError("apply_surface_divergence: size mismatch");
  Field d = Field::Zero(mesh.num_surface_nodes());
  const auto edges = mesh.surface_edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const double flux = edges[e].weight * p_gamma[e] / edges[e].length;
    d[edges[e].tail] += flux;
    d[edges[e].head] -= flux;
  }
  return d.cwiseQuotient(mesh.surface_areas());
}

Field restrict_to_surface(const Mesh& mesh, const Field& u) {
  mesh.check_nodal(u, "restrict_to_surface");
  Field s(mesh.num_surface_nodes());
  for (int k = 0; k < s.size(); ++k) s[k] = u[mesh.boundary_nodes()[k].node];
  return s;
}

Field trace_interior(const Mesh& mesh, const Field& u) {
  mesh.check_nodal(u, "trace_interior");
  Field s(mesh.num_surface_nodes());
  for (int k = 0; k < s.size(); ++k) s[k] = u[mesh.boundary_nodes()[k].interior_neighbor];
  return s;
}

Field normal_component(const Mesh& mesh, const Field& p) {
  mesh.check_edge(p, "normal_component");
  Field s(mesh.num_surface_nodes());
  for (int k = 0; k < s.size(); ++k) {
    const BoundaryNode& b = mesh.boundary_nodes()[k];
    s[k] = b.outward_sign * p[b.normal_edge];
  }
  return s;
}

Field surface_flux(const Mesh& mesh, const Field& p) {
  const Field div = apply_divergence(mesh, p);
  Field s(mesh.num_surface_nodes());
  for (int k = 0; k < s.size(); ++k) {
    const int node = mesh.boundary_nodes()[k].node;
    s[k] = -div[node] * mesh.volumes()[node] / mesh.surface_areas()[k];
  }
  return s;
}

void write_field_csv(std::ostream& out, const Mesh& mesh, const Field& u) {
  mesh.check_nodal(u, "write_field_csv");
  const bool strip = mesh.geometry() == Geometry::periodic_strip;
  out << (strip ? "x,y,value\n" : "x,value\n");
  const auto old_precision = out.precision(17);
  for (int i = 0; i < mesh.num_nodes(); ++i) {
    out << mesh.x(i) << ',';
    if (strip) out << mesh.y(i) << ',';
    out << u[i] << '\n';
  }
  out.precision(old_precision);
}

Field read_field_csv(std::istream& in, const Mesh& mesh) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidParameter("field csv: empty input");
  Field u(mesh.num_nodes());
  int count = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (count >= mesh.num_nodes()) throw ShapeError("field csv: more rows than mesh nodes");
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) throw InvalidParameter("field csv: malformed row '" + line + "'");
    u[count++] = std::stod(line.substr(comma + 1));
  }
  if (count != mesh.num_nodes()) throw ShapeError("field csv: fewer rows than mesh nodes");
  return u;
}

}  // namespace kwc
