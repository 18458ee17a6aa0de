#ifndef KWC_MESH_HPP
#define KWC_MESH_HPP

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace kwc {

/// Nodal, edge, or surface values. Which one is meant follows from context
/// and is checked against the mesh on every operator application.
using Field = Eigen::VectorXd;

enum class Geometry { interval, periodic_strip };

std::string_view to_string(Geometry g);
Geometry geometry_from_string(std::string_view name);

struct MeshSpec {
  Geometry geometry = Geometry::periodic_strip;
  int nx = 64;
  int ny = 32;  // ignored for the interval
  double lx = 1.0;
  double ly = 1.0;

  bool operator==(const MeshSpec&) const = default;
};

/// Directed edge of the node graph. The discrete gradient on the edge is
/// (u[head] - u[tail]) / length; `weight` is the quadrature measure of the
/// edge's dual cell, so sum_e weight * g_e^2 approximates the Dirichlet integral.
struct Edge {
  int tail;
  int head;
  double length;
  double weight;
  int axis;  // 0 = x, 1 = y
};

/// A node of the bulk grid that also carries a surface unknown.
struct BoundaryNode {
  int node;
  int interior_neighbor;  // first node inside along the inward normal
  int normal_edge;        // edge joining node and interior_neighbor
  double outward_sign;    // +1 if normal_edge points outward, -1 otherwise
  int component;          // connected component of Gamma (0 or 1)
};

/**
 * Node-centered uniform grid on an interval or on a strip that is periodic
 * in x. The surface Gamma is made of the boundary nodes: the two end points
 * of the interval, or the two rows y = 0 and y = ly of the strip, each a
 * periodic circle. Surface unknowns are identified with those boundary rows.
 *
 * Node volumes are trapezoid weights, so boundary rows carry half a cell.
 * Surface fields are indexed in the order of boundary_nodes().
 */
class Mesh {
 public:
  explicit Mesh(const MeshSpec& spec);

  const MeshSpec& spec() const noexcept { return spec_; }
  Geometry geometry() const noexcept { return spec_.geometry; }

  int num_nodes() const noexcept { return static_cast<int>(volumes_.size()); }
  int num_edges() const noexcept { return static_cast<int>(edges_.size()); }
  int num_surface_nodes() const noexcept { return static_cast<int>(boundary_.size()); }
  int num_surface_edges() const noexcept { return static_cast<int>(surface_edges_.size()); }

  double hx() const noexcept { return hx_; }
  double hy() const noexcept { return hy_; }
  /// Grid spacing normal to Gamma.
  double normal_spacing() const noexcept;

  std::span<const Edge> edges() const noexcept { return edges_; }
  /// Edges of the surface graph; tail/head index surface nodes.
  std::span<const Edge> surface_edges() const noexcept { return surface_edges_; }
  std::span<const BoundaryNode> boundary_nodes() const noexcept { return boundary_; }

  const Field& volumes() const noexcept { return volumes_; }
  const Field& surface_areas() const noexcept { return areas_; }
  const Field& edge_weights() const noexcept { return edge_weights_; }
  const Field& surface_edge_weights() const noexcept { return surface_edge_weights_; }

  /// Surface index of a node, or -1 for interior nodes.
  int surface_index(int node) const noexcept { return surface_index_[node]; }
  bool is_boundary(int node) const noexcept { return surface_index_[node] >= 0; }

  double x(int node) const noexcept;
  double y(int node) const noexcept;
  /// Midpoint of an edge, taking the periodic seam into account.
  std::pair<double, double> edge_midpoint(int e) const noexcept;

  /// Lumped mass of H = L2(Omega) x L2(Gamma) under the identification:
  /// node volume plus, on boundary nodes, the surface area.
  Field h_mass() const;

  void check_nodal(const Field& u, std::string_view what) const;
  void check_edge(const Field& p, std::string_view what) const;
  void check_surface(const Field& u, std::string_view what) const;

 private:
  MeshSpec spec_;
  double hx_ = 0.0;
  double hy_ = 0.0;
  std::vector<Edge> edges_;
  std::vector<Edge> surface_edges_;
  std::vector<BoundaryNode> boundary_;
  std::vector<int> surface_index_;
  Field volumes_;
  Field areas_;
  Field edge_weights_;
  Field surface_edge_weights_;
};

Mesh build_mesh(const MeshSpec& spec);

/// Forward differences on every edge.
Field apply_gradient(const Mesh& mesh, const Field& u);

/// Negative adjoint of apply_gradient in the volume/edge-weight inner
/// products: <grad u, p>_w = -<u, div p>_vol for every u and p.
Field apply_divergence(const Mesh& mesh, const Field& p);

/// Periodic differences along each boundary circle; empty for the interval.
Field apply_surface_gradient(const Mesh& mesh, const Field& u_gamma);

/// Negative adjoint of apply_surface_gradient in the area/surface-weight
/// inner products.
Field apply_surface_divergence(const Mesh& mesh, const Field& p_gamma);

/// Boundary-row values of a nodal field (the surface component u|_Gamma).
Field restrict_to_surface(const Mesh& mesh, const Field& u);

/// One-sided interior trace: the value at the first interior node next to
/// each boundary node.
Field trace_interior(const Mesh& mesh, const Field& u);

/// Outward normal component of an edge field at each boundary node, read off
/// the boundary-normal edge.
Field normal_component(const Mesh& mesh, const Field& p);

/// Boundary part of the summation-by-parts identity:
///   <grad u, p>_w = -sum_{interior} u div(p) vol + sum_Gamma u flux area.
Field surface_flux(const Mesh& mesh, const Field& p);

/// Snapshot as CSV, header `x,y,value` (`x,value` on the interval), row-major.
void write_field_csv(std::ostream& out, const Mesh& mesh, const Field& u);
Field read_field_csv(std::istream& in, const Mesh& mesh);

}  // namespace kwc

#endif  // KWC_MESH_HPP
