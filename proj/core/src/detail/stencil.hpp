#ifndef KWC_DETAIL_STENCIL_HPP
#define KWC_DETAIL_STENCIL_HPP

#include <memory>
#include <vector>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "kwc/mesh.hpp"
#include "kwc/scheme.hpp"

namespace kwc::detail {

using SparseMatrix = Eigen::SparseMatrix<double>;

/**
 * Symmetric matrices of the form
 *   diag(d) + sum_e c_e (1_tail - 1_head)(1_tail - 1_head)^T
 *           + sum_s c_s (same, surface edges mapped to their nodes)
 * on a fixed sparsity pattern. Refilling only rewrites the value array.
 */
class EdgeStencil {
 public:
  explicit EdgeStencil(const Mesh& mesh);

  const SparseMatrix& assemble(const Field& diagonal, const Field& edge_coeff, const Field& surface_coeff);
  const SparseMatrix& matrix() const noexcept { return matrix_; }

 private:
  struct Slots {
    int tt, hh, th, ht;
  };
  SparseMatrix matrix_;
  std::vector<int> diag_slot_;
  std::vector<Slots> edge_slots_;
  std::vector<Slots> surface_slots_;
};

/// SPD solve by diagonally preconditioned CG or sparse LDL^T.
class SpdSolver {
 public:
  SpdSolver(LinearSolver kind, double cg_tol);

  /// Solves A x = b starting from x; returns the CG iteration count (0 for
  /// the direct method).
  long solve(const SparseMatrix& a, const Field& b, Field& x);

 private:
  LinearSolver kind_;
  double cg_tol_;
  bool analyzed_ = false;
  Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg_;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
};

}  // namespace kwc::detail

#endif  // KWC_DETAIL_STENCIL_HPP
