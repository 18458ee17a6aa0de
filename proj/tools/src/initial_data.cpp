#include "kwc/cli/initial_data.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace kwc::cli {

namespace {

double smoothstep(double z) {
  if (z <= 0.0) return 0.0;
  if (z >= 1.0) return 1.0;
  return z * z * (3.0 - 2.0 * z);
}

std::vector<double> interfaces(const Mesh& mesh) {
  const double lx = mesh.spec().lx;
  if (mesh.geometry() == Geometry::interval) return {0.5 * lx};
  return {0.25 * lx, 0.75 * lx};
}

/// Fraction of the r1 grain at x for interfaces of width `width` (0 = sharp).
double grain_fraction(const Mesh& mesh, double x, double width) {
  const auto cuts = interfaces(mesh);
  auto rise = [width](double z) { return width > 0.0 ? smoothstep(z / width + 0.5) : (z >= 0.0 ? 1.0 : 0.0); };
  if (cuts.size() == 1) return rise(x - cuts[0]);
  return rise(x - cuts[0]) - rise(x - cuts[1]);
}

double distance_to_interface(const Mesh& mesh, double x) {
  const double lx = mesh.spec().lx;
  const bool periodic = mesh.geometry() == Geometry::periodic_strip;
  double d = std::numeric_limits<double>::infinity();
  for (double c : interfaces(mesh)) {
    double dx = std::abs(x - c);
    if (periodic) dx = std::min(dx, lx - dx);
    d = std::min(d, dx);
  }
  return d;
}

State make_state(Field eta, Field theta) { return State{FieldPair(std::move(eta)), FieldPair(std::move(theta)), 0, 0.0}; }

}  // namespace

State two_grain_state(const Mesh& mesh, const ModelParams& p) {
  const int n = mesh.num_nodes();
  const double h = mesh.hx();
  Field eta(n), theta(n);
  for (int i = 0; i < n; ++i) {
    const double x = mesh.x(i);
    theta[i] = std::lerp(p.r0, p.r1, grain_fraction(mesh, x, 4.0 * h));
    const double d = distance_to_interface(mesh, x);
    eta[i] = 1.0 - 0.8 * std::exp(-d * d / (2.0 * (2.0 * h) * (2.0 * h)));
  }
  return make_state(std::move(eta), std::move(theta));
}

State sharp_two_grain_state(const Mesh& mesh, const ModelParams& p) {
  const int n = mesh.num_nodes();
  Field theta(n);
  for (int i = 0; i < n; ++i) theta[i] = std::lerp(p.r0, p.r1, grain_fraction(mesh, mesh.x(i), 0.0));
  return make_state(Field::Ones(n), std::move(theta));
}

State ground_state(const Mesh& mesh, const ModelParams& p) {
  return make_state(Field::Ones(mesh.num_nodes()), Field::Constant(mesh.num_nodes(), p.r0));
}

State random_state(const Mesh& mesh, const ModelParams& p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = mesh.num_nodes();
  Field eta(n), theta(n);
  for (int i = 0; i < n; ++i) {
    eta[i] = unit(rng);
    theta[i] = std::lerp(p.r0, p.r1, unit(rng));
  }
  return make_state(std::move(eta), std::move(theta));
}

}  // namespace kwc::cli
