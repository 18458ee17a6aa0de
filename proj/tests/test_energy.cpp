#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "kwc/energy.hpp"
#include "kwc/error.hpp"

namespace {

using kwc::EnergyMode;
using kwc::Field;
using kwc::FieldPair;
using kwc::Geometry;
using kwc::Mesh;
using kwc::ModelParams;

Mesh two_node_interval() { return kwc::build_mesh({Geometry::interval, 2, 0, 1.0, 1.0}); }

Field random_field(std::mt19937_64& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Field f(n);
  for (int i = 0; i < n; ++i) f[i] = u(rng);
  return f;
}

TEST(PhiDelta, ConstantThetaIsZero) {
  const Mesh m = kwc::build_mesh({Geometry::periodic_strip, 8, 5, 1.0, 1.0});
  const FieldPair theta(Field::Constant(m.num_nodes(), 0.3));
  EXPECT_EQ(kwc::eval_phi_delta(m, 0.05, Field::Ones(m.num_nodes()), theta, 0.05), 0.0);
}

TEST(PhiDelta, HandEvaluatedTwoNodeInterval) {
  const Mesh m = two_node_interval();
  const FieldPair theta((Field(2) << 0.0, 4.0).finished());
  EXPECT_NEAR(kwc::eval_phi_delta(m, 3.0, Field::Ones(2), theta, 0.05), 74.0, 1e-12);
}

TEST(PhiDelta, LinearInWeight) {
  std::mt19937_64 rng(5);
  const Mesh m = kwc::build_mesh({Geometry::periodic_strip, 6, 4, 1.0, 1.0});
  const Field beta = random_field(rng, m.num_nodes(), 0.1, 1.0);
  const FieldPair theta(random_field(rng, m.num_nodes(), 0.0, 1.0));
  const double delta = 0.1;
  const double once = kwc::eval_phi_delta(m, delta, beta, theta, 0.05);
  const double twice = kwc::eval_phi_delta(m, delta, 2.0 * beta, theta, 0.05);
  const Field g = kwc::apply_gradient(m, theta.bulk);
  const Field be = kwc::edge_average(m, beta);
  double length = 0.0;
  for (int e = 0; e < m.num_edges(); ++e) length += be[e] * kwc::f_delta(delta, g[e]) * m.edge_weights()[e];
  EXPECT_NEAR(twice - once, length, 1e-12 * (1.0 + length));
}

TEST(PhiDelta, Errors) {
  const Mesh m = two_node_interval();
  const FieldPair theta((Field(2) << 0.0, 1.0).finished());
  EXPECT_THROW(kwc::eval_phi_delta(m, 0.0, Field::Ones(2), theta, 0.05), kwc::InvalidParameter);
  EXPECT_THROW(kwc::eval_phi_delta(m, 0.1, (Field(2) << 1.0, 0.0).finished(), theta, 0.05),
               kwc::InvalidParameter);
  const FieldPair detached((Field(2) << 0.0, 1.0).finished(), (Field(2) << 0.5, 1.0).finished());
  EXPECT_EQ(kwc::eval_phi_delta(m, 0.1, Field::Ones(2), detached, 0.05), std::numeric_limits<double>::infinity());
}

TEST(PhiDelta, ConvexAlongRandomSegments) {
  std::mt19937_64 rng(17);
  const Mesh m = kwc::build_mesh({Geometry::periodic_strip, 8, 5, 1.0, 1.0});
  for (int k = 0; k < 100; ++k) {
    const Field beta = random_field(rng, m.num_nodes(), 0.1, 1.0);
    const Field a = random_field(rng, m.num_nodes(), -1.0, 1.0);
    const Field b = random_field(rng, m.num_nodes(), -1.0, 1.0);
    const double fa = kwc::eval_phi_delta(m, 0.05, beta, FieldPair(a), 0.05);
    const double fb = kwc::eval_phi_delta(m, 0.05, beta, FieldPair(b), 0.05);
    const double fm = kwc::eval_phi_delta(m, 0.05, beta, FieldPair(Field(0.5 * (a + b))), 0.05);
    EXPECT_LE(fm, 0.5 * (fa + fb) + 1e-12);
  }
}

TEST(WeightedTv, HandEvaluated) {
  const Mesh m = two_node_interval();
  const Field u = (Field(2) << 0.0, 1.0).finished();
  EXPECT_EQ(kwc::eval_weighted_tv(m, Field::Constant(2, 1.0), Field::Constant(2, 0.2), Field::Constant(2, 0.2)),
            0.0);
  EXPECT_NEAR(kwc::eval_weighted_tv(m, Field::Ones(2), u, u), 1.0, 1e-14);
  EXPECT_NEAR(kwc::eval_weighted_tv(m, Field::Ones(2), u, (Field(2) << 0.5, 1.0).finished()), 1.5, 1e-14);
  EXPECT_THROW(kwc::eval_weighted_tv(m, (Field(2) << -1.0, 1.0).finished(), u, u), kwc::InvalidParameter);
}

TEST(FreeEnergy, GroundStateIsZero) {
  ModelParams p;
  p.grid = {Geometry::periodic_strip, 8, 5, 1.0, 1.0};
  const Mesh m = kwc::build_mesh(p.grid);
  const FieldPair eta(Field::Ones(m.num_nodes()));
  const FieldPair theta(Field::Constant(m.num_nodes(), 0.7));
  for (EnergyMode mode : {EnergyMode::relaxed, EnergyMode::singular}) {
    EXPECT_EQ(kwc::eval_free_energy(m, p, eta, theta, mode).total, 0.0);
  }
}

TEST(FreeEnergy, ComponentsNonnegativeAndAdditive) {
  std::mt19937_64 rng(23);
  ModelParams p;
  p.grid = {Geometry::periodic_strip, 10, 6, 1.0, 1.0};
  const Mesh m = kwc::build_mesh(p.grid);
  for (int k = 0; k < 50; ++k) {
    const FieldPair eta(random_field(rng, m.num_nodes(), 0.0, 1.0));
    const FieldPair theta(random_field(rng, m.num_nodes(), 0.0, 1.0));
    for (EnergyMode mode : {EnergyMode::relaxed, EnergyMode::singular}) {
      const auto e = kwc::eval_free_energy(m, p, eta, theta, mode);
      for (double c : {e.eta_bulk_dirichlet, e.eta_surface_dirichlet, e.potential_g, e.weighted_length,
                       e.theta_surface_dirichlet})
        EXPECT_GE(c, 0.0);
      const double sum = e.eta_bulk_dirichlet + e.eta_surface_dirichlet + e.potential_g + e.weighted_length +
                         e.theta_surface_dirichlet;
      EXPECT_NEAR(e.total, sum, 1e-13 * (1.0 + sum));
      EXPECT_EQ(e.mode, mode);
    }
  }
}

TEST(FreeEnergy, RelaxedVersusSingularWithinSandwich) {
  std::mt19937_64 rng(29);
  ModelParams p;
  p.grid = {Geometry::periodic_strip, 12, 6, 1.0, 1.0};
  const Mesh m = kwc::build_mesh(p.grid);
  for (double delta : {0.2, 0.05, 0.01}) {
    p.delta = delta;
    const FieldPair eta(random_field(rng, m.num_nodes(), 0.0, 1.0));
    const FieldPair theta(random_field(rng, m.num_nodes(), 0.0, 1.0));
    const double relaxed = kwc::eval_free_energy(m, p, eta, theta, EnergyMode::relaxed).total;
    const double singular = kwc::eval_free_energy(m, p, eta, theta, EnergyMode::singular).total;
    const Field beta = kwc::edge_average(m, kwc::apply_function(p.alpha, eta.bulk));
    const Field g = kwc::apply_gradient(m, theta.bulk);
    double bound = 0.0;
    for (int e = 0; e < m.num_edges(); ++e)
      bound += (delta * beta[e] + 0.5 * delta * delta * g[e] * g[e]) * m.edge_weights()[e];
    EXPECT_LE(std::abs(relaxed - singular), bound);
  }
}

TEST(FreeEnergy, SharpTwoGrainLength) {
  ModelParams p;  // 64 x 32 periodic strip
  const Mesh m = kwc::build_mesh(p.grid);
  Field theta(m.num_nodes());
  for (int i = 0; i < m.num_nodes(); ++i) {
    const double x = m.x(i);
    theta[i] = (x >= 0.25 && x < 0.75) ? p.r1 : p.r0;
  }
  const auto e = kwc::eval_free_energy(m, p, FieldPair(Field::Ones(m.num_nodes())), FieldPair(theta),
                                       EnergyMode::singular);
  // Two straight vertical interfaces across the periodic strip.
  const double expected = 2.0 * p.alpha.value(1.0) * std::abs(p.r1 - p.r0) * p.grid.ly;
  EXPECT_NEAR(e.weighted_length, expected, 1e-12);
}

TEST(FreeEnergy, SingularModeCountsBoundaryMismatch) {
  ModelParams p;
  p.grid = {Geometry::interval, 4, 0, 1.0, 1.0};
  const Mesh m = kwc::build_mesh(p.grid);
  const FieldPair eta(Field::Ones(4));
  const Field flat = Field::Constant(4, 0.5);
  const FieldPair detached(flat, (Field(2) << 0.2, 0.5).finished());
  const auto e = kwc::eval_free_energy(m, p, eta, detached, EnergyMode::singular);
  EXPECT_NEAR(e.weighted_length, p.alpha.value(1.0) * 0.3 * m.surface_areas()[0], 1e-14);
}

TEST(EnergyCsv, HeaderAndRow) {
  EXPECT_EQ(kwc::energy_csv_header(), "step,t,total,eta_bulk,eta_surf,potential,weighted_len,theta_surf,mode");
  kwc::EnergyBreakdown e;
  e.total = 1.5;
  std::ostringstream s;
  kwc::write_energy_csv_row(s, 3, 0.03, e);
  EXPECT_EQ(s.str(), "3,0.029999999999999999,1.5,0,0,0,0,0,relaxed");
}

}  // namespace
