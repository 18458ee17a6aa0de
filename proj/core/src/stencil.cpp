#include "detail/stencil.hpp"

#include "kwc/error.hpp"

namespace kwc::detail {

EdgeStencil::EdgeStencil(const Mesh& mesh) {
  const int n = mesh.num_nodes();
  std::vector<Eigen::Triplet<double>> pattern;
  pattern.reserve(n + 4 * (mesh.num_edges() + mesh.num_surface_edges()));
  for (int i = 0; i < n; ++i) pattern.emplace_back(i, i, 0.0);
  auto add_pair = [&](int a, int b) {
    pattern.emplace_back(a, b, 0.0);
    pattern.emplace_back(b, a, 0.0);
  };
  for (const Edge& e : mesh.edges()) add_pair(e.tail, e.head);
  const auto boundary = mesh.boundary_nodes();
  for (const Edge& e : mesh.surface_edges()) add_pair(boundary[e.tail].node, boundary[e.head].node);

  matrix_.resize(n, n);
  matrix_.setFromTriplets(pattern.begin(), pattern.end());
  matrix_.makeCompressed();

  auto slot = [&](int row, int col) {
    // Column-major storage: find row inside column col.
    const int* inner = matrix_.innerIndexPtr();
    const int begin = matrix_.outerIndexPtr()[col];
    const int end = matrix_.outerIndexPtr()[col + 1];
    for (int k = begin; k < end; ++k)
      if (inner[k] == row) return k;
    throw Error("EdgeStencil: pattern lookup failed");
  };
  diag_slot_.resize(n);
  for (int i = 0; i < n; ++i) diag_slot_[i] = slot(i, i);
  for (const Edge& e : mesh.edges())
    edge_slots_.push_back({slot(e.tail, e.tail), slot(e.head, e.head), slot(e.tail, e.head), slot(e.head, e.tail)});
  for (const Edge& e : mesh.surface_edges()) {
    const int a = boundary[e.tail].node;
    const int b = boundary[e.head].node;
    surface_slots_.push_back({slot(a, a), slot(b, b), slot(a, b), slot(b, a)});
  }
}

const SparseMatrix& EdgeStencil::assemble(const Field& diagonal, const Field& edge_coeff,
                                          const Field& surface_coeff) {
  double* v = matrix_.valuePtr();
  std::fill(v, v + matrix_.nonZeros(), 0.0);
  for (std::size_t i = 0; i < diag_slot_.size(); ++i) v[diag_slot_[i]] += diagonal[i];
  auto scatter = [v](const std::vector<Slots>& slots, const Field& c) {
    for (std::size_t e = 0; e < slots.size(); ++e) {
      v[slots[e].tt] += c[e];
      v[slots[e].hh] += c[e];
      v[slots[e].th] -= c[e];
      v[slots[e].ht] -= c[e];
    }
  };
  scatter(edge_slots_, edge_coeff);
  scatter(surface_slots_, surface_coeff);
  return matrix_;
}

SpdSolver::SpdSolver(LinearSolver kind, double cg_tol) : kind_(kind), cg_tol_(cg_tol) {
  cg_.setTolerance(cg_tol_);
}

long SpdSolver::solve(const SparseMatrix& a, const Field& b, Field& x) {
  if (kind_ == LinearSolver::direct) {
    if (!analyzed_) {
      ldlt_.analyzePattern(a);
      analyzed_ = true;
    }
    ldlt_.factorize(a);
    if (ldlt_.info() != Eigen::Success) throw Error("sparse LDL^T factorization failed");
    x = ldlt_.solve(b);
    return 0;
  }
  cg_.setMaxIterations(std::max<Eigen::Index>(100, 10 * a.rows()));
  cg_.compute(a);
  x = cg_.solveWithGuess(b, x);
  return static_cast<long>(cg_.iterations());
}

}  // namespace kwc::detail
