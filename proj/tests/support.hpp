#ifndef KWC_TESTS_SUPPORT_HPP
#define KWC_TESTS_SUPPORT_HPP

#include <random>

#include "kwc/mesh.hpp"
#include "kwc/model.hpp"
#include "kwc/scheme.hpp"

namespace kwc::testing {

inline Field uniform_field(std::mt19937_64& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Field f(n);
  for (int i = 0; i < n; ++i) f[i] = u(rng);
  return f;
}

inline ModelParams params_on(const MeshSpec& grid) {
  ModelParams p;
  p.grid = grid;
  return p;
}

inline MeshSpec interval_spec(int nx) { return {Geometry::interval, nx, 0, 1.0, 1.0}; }
inline MeshSpec strip_spec(int nx, int ny) { return {Geometry::periodic_strip, nx, ny, 1.0, 1.0}; }

inline State random_state(const Mesh& mesh, const ModelParams& p, std::mt19937_64& rng) {
  State s;
  s.eta = FieldPair(uniform_field(rng, mesh.num_nodes(), 0.0, 1.0));
  s.theta = FieldPair(uniform_field(rng, mesh.num_nodes(), p.r0, p.r1));
  return s;
}

}  // namespace kwc::testing

#endif  // KWC_TESTS_SUPPORT_HPP
