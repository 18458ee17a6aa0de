#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "kwc/error.hpp"
#include "kwc/mesh.hpp"

namespace {

using kwc::Field;
using kwc::Geometry;
using kwc::Mesh;
using kwc::MeshSpec;

Mesh interval(int nx, double lx = 1.0) { return kwc::build_mesh({Geometry::interval, nx, 0, lx, 1.0}); }
Mesh strip(int nx, int ny, double lx = 1.0, double ly = 1.0) {
  return kwc::build_mesh({Geometry::periodic_strip, nx, ny, lx, ly});
}

Field random_field(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Field f(n);
  for (int i = 0; i < n; ++i) f[i] = u(rng);
  return f;
}

TEST(BuildMesh, Interval) {
  const Mesh m = interval(8);
  EXPECT_EQ(m.num_nodes(), 8);
  EXPECT_DOUBLE_EQ(m.hx(), 1.0 / 7.0);
  ASSERT_EQ(m.num_surface_nodes(), 2);
  EXPECT_EQ(m.boundary_nodes()[0].node, 0);
  EXPECT_EQ(m.boundary_nodes()[1].node, 7);
  EXPECT_NE(m.boundary_nodes()[0].component, m.boundary_nodes()[1].component);
  EXPECT_EQ(m.num_surface_edges(), 0);
}

TEST(BuildMesh, Strip) {
  const Mesh m = strip(4, 3);
  EXPECT_EQ(m.num_nodes(), 12);
  EXPECT_EQ(m.num_surface_nodes(), 8);
  int bottom = 0;
  for (const auto& b : m.boundary_nodes()) {
    EXPECT_TRUE(m.y(b.node) == 0.0 || m.y(b.node) == 1.0);
    bottom += b.component == 0;
  }
  EXPECT_EQ(bottom, 4);
}

TEST(BuildMesh, RejectsDegenerateSpecs) {
  EXPECT_THROW(strip(4, 2), kwc::InvalidParameter);
  EXPECT_THROW(interval(1), kwc::InvalidParameter);
  EXPECT_THROW(strip(4, 4, -1.0), kwc::InvalidParameter);
  EXPECT_THROW(strip(4, 4, 1.0, 0.0), kwc::InvalidParameter);
}

TEST(BuildMesh, WeightsArePositive) {
  for (const Mesh& m : {interval(5), strip(6, 4)}) {
    EXPECT_GT(m.volumes().minCoeff(), 0.0);
    EXPECT_GT(m.surface_areas().minCoeff(), 0.0);
    EXPECT_GT(m.edge_weights().minCoeff(), 0.0);
  }
}

TEST(Gradient, ConstantsHaveZeroGradient) {
  for (const Mesh& m : {interval(6), strip(5, 4)}) {
    const Field c = Field::Constant(m.num_nodes(), 2.5);
    EXPECT_EQ(kwc::apply_gradient(m, c).cwiseAbs().maxCoeff(), 0.0);
    const Field cs = Field::Constant(m.num_surface_nodes(), -1.0);
    const Field gs = kwc::apply_surface_gradient(m, cs);
    if (gs.size() > 0) EXPECT_EQ(gs.cwiseAbs().maxCoeff(), 0.0);
  }
  EXPECT_EQ(kwc::apply_surface_gradient(interval(6), Field::Ones(2)).size(), 0);
}

TEST(Gradient, SawtoothAcrossSeam) {
  const Mesh m = strip(4, 3);
  Field u(m.num_nodes());
  for (int i = 0; i < m.num_nodes(); ++i) u[i] = m.x(i);
  const Field g = kwc::apply_gradient(m, u);
  int seam = 0;
  for (int e = 0; e < m.num_edges(); ++e) {
    const auto& edge = m.edges()[e];
    if (edge.axis == 1) {
      EXPECT_NEAR(g[e], 0.0, 1e-14);
    } else if (m.x(edge.head) < m.x(edge.tail)) {
      EXPECT_NEAR(g[e], -3.0, 1e-12);
      ++seam;
    } else {
      EXPECT_NEAR(g[e], 1.0, 1e-12);
    }
  }
  EXPECT_EQ(seam, 3);
}

TEST(Gradient, LinearInY) {
  const Mesh m = strip(4, 5);
  Field u(m.num_nodes());
  for (int i = 0; i < m.num_nodes(); ++i) u[i] = m.y(i);
  const Field g = kwc::apply_gradient(m, u);
  for (int e = 0; e < m.num_edges(); ++e) EXPECT_NEAR(g[e], m.edges()[e].axis == 1 ? 1.0 : 0.0, 1e-12);
}

TEST(Gradient, ShapeMismatch) {
  const Mesh m = interval(5);
  EXPECT_THROW(kwc::apply_gradient(m, Field::Zero(4)), kwc::ShapeError);
  EXPECT_THROW(kwc::apply_divergence(m, Field::Zero(7)), kwc::ShapeError);
  EXPECT_THROW(kwc::trace_interior(m, Field::Zero(3)), kwc::ShapeError);
}

TEST(Trace, Examples) {
  const Mesh m = interval(4);
  const Field u = (Field(4) << 0, 1, 2, 3).finished();
  const Field t = kwc::trace_interior(m, u);
  EXPECT_EQ(t[0], 1.0);
  EXPECT_EQ(t[1], 2.0);
  const Field c = kwc::trace_interior(m, Field::Constant(4, 3.0));
  EXPECT_EQ(c.minCoeff(), 3.0);
  EXPECT_EQ(c.maxCoeff(), 3.0);

  const Mesh s = strip(6, 5);
  Field y(s.num_nodes());
  for (int i = 0; i < s.num_nodes(); ++i) y[i] = s.y(i);
  const Field ty = kwc::trace_interior(s, y);
  for (int k = 0; k < s.num_surface_nodes(); ++k) {
    const double expected = s.boundary_nodes()[k].component == 0 ? 0.25 : 0.75;
    EXPECT_NEAR(ty[k], expected, 1e-14);
  }
}

TEST(SummationByParts, RandomFieldsBothGeometries) {
  std::mt19937_64 rng(2024);
  for (const Mesh& m : {interval(9), interval(2), strip(7, 5), strip(16, 8, 2.0, 0.5)}) {
    for (int trial = 0; trial < 100; ++trial) {
      const Field u = random_field(rng, m.num_nodes());
      const Field p = random_field(rng, m.num_edges());
      const double lhs = (kwc::apply_gradient(m, u).cwiseProduct(p).cwiseProduct(m.edge_weights())).sum();
      const Field div = kwc::apply_divergence(m, p);
      const double adjoint = -(u.cwiseProduct(div).cwiseProduct(m.volumes())).sum();
      const double scale = (kwc::apply_gradient(m, u).cwiseProduct(p).cwiseProduct(m.edge_weights()))
                               .cwiseAbs()
                               .sum();
      EXPECT_LE(std::abs(lhs - adjoint), 1e-12 * scale);

      // Split into interior divergence and boundary flux.
      const Field flux = kwc::surface_flux(m, p);
      double split = 0.0;
      for (int i = 0; i < m.num_nodes(); ++i)
        if (!m.is_boundary(i)) split -= u[i] * div[i] * m.volumes()[i];
      const Field ub = kwc::restrict_to_surface(m, u);
      split += (ub.cwiseProduct(flux).cwiseProduct(m.surface_areas())).sum();
      EXPECT_LE(std::abs(lhs - split), 1e-12 * scale);

      if (m.num_surface_edges() > 0) {
        const Field us = random_field(rng, m.num_surface_nodes());
        const Field ps = random_field(rng, m.num_surface_edges());
        const Field gs = kwc::apply_surface_gradient(m, us);
        const double slhs = gs.cwiseProduct(ps).cwiseProduct(m.surface_edge_weights()).sum();
        const double srhs =
            -(us.cwiseProduct(kwc::apply_surface_divergence(m, ps)).cwiseProduct(m.surface_areas())).sum();
        const double sscale = gs.cwiseProduct(ps).cwiseProduct(m.surface_edge_weights()).cwiseAbs().sum();
        EXPECT_LE(std::abs(slhs - srhs), 1e-12 * sscale);
      }
    }
  }
}

TEST(Quadrature, IntegratesConstantsExactly) {
  EXPECT_NEAR(interval(9, 2.5).volumes().sum(), 2.5, 1e-12);
  EXPECT_NEAR(strip(64, 32).volumes().sum(), 1.0, 1e-12);
  EXPECT_NEAR(strip(10, 7, 2.0, 3.0).volumes().sum(), 6.0, 1e-12);
  // Gamma of the strip is two circles of length lx.
  EXPECT_NEAR(strip(10, 7, 2.0, 3.0).surface_areas().sum(), 4.0, 1e-12);
  // Dirichlet energy of a linear function is exact.
  const Mesh m = strip(12, 9, 1.0, 2.0);
  Field u(m.num_nodes());
  for (int i = 0; i < m.num_nodes(); ++i) u[i] = 3.0 * m.y(i);
  const Field g = kwc::apply_gradient(m, u);
  EXPECT_NEAR(g.cwiseProduct(g).cwiseProduct(m.edge_weights()).sum(), 9.0 * 2.0, 1e-12);
}

TEST(FieldCsv, RoundTrip) {
  std::mt19937_64 rng(3);
  for (const Mesh& m : {interval(6), strip(5, 4)}) {
    const Field u = random_field(rng, m.num_nodes());
    std::stringstream s;
    kwc::write_field_csv(s, m, u);
    const std::string header = s.str().substr(0, s.str().find('\n'));
    EXPECT_EQ(header, m.geometry() == Geometry::interval ? "x,value" : "x,y,value");
    const Field back = kwc::read_field_csv(s, m);
    EXPECT_EQ((back - u).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(GeometryNames, RoundTrip) {
  for (Geometry g : {Geometry::interval, Geometry::periodic_strip})
    EXPECT_EQ(kwc::geometry_from_string(kwc::to_string(g)), g);
  EXPECT_THROW(kwc::geometry_from_string("torus"), kwc::InvalidParameter);
}

}  // namespace
