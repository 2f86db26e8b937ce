#pragma once

// Dense linear-algebra building blocks shared by identification and
// synthesis: discrete Lyapunov/Stein solves, a stabilizing DARE solver
// (structured doubling with fixed-point fallback and Newton refinement),
// and small utilities on top of Eigen.

#include <Eigen/Dense>
#include <optional>

namespace wec::lin {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double spectral_radius(const MatrixXd& a);

// Smallest eigenvalue of the symmetric part of a (real) square matrix.
double min_sym_eig(const MatrixXd& a);

// Hermitian-part minimum eigenvalue of a complex square matrix.
double min_herm_eig(const Eigen::MatrixXcd& a);

// Stabilizing solution of P = A' P A + Q for Schur A (Q symmetric PSD in the
// intended uses; any symmetric Q is accepted).  Solved by Kronecker
// vectorization; throws if A is not Schur.  Residual <= 1e-9 * (1 + |P|).
MatrixXd solve_dlyap(const MatrixXd& a, const MatrixXd& q);

// Stabilizing solution X of the discrete algebraic Riccati equation
//   X = A'XA + Q - (A'XB + S)(R + B'XB)^{-1}(B'XA + S'),
// together with the gain K = (R + B'XB)^{-1}(B'XA + S') so that A - BK is
// Schur.  Primary path is the structure-preserving doubling algorithm on the
// cross-eliminated form; if doubling stalls the solver falls back to the
// Riccati difference iteration (valid here because the plants are open-loop
// stable), and in both cases polishes with Newton steps (each one a Stein
// solve on the closed loop).
struct DareResult {
  MatrixXd x;
  MatrixXd k;
  double residual = 0.0;   // relative residual of the equation
  bool converged = false;
};
DareResult solve_dare(const MatrixXd& a, const MatrixXd& b, const MatrixXd& q,
                      const MatrixXd& r, const MatrixXd& s,
                      int max_doubling = 120, double tol = 1e-13);

// Orthonormal rows spanning the left null space of m (u such that u*m = 0),
// with a fixed sign convention (largest-magnitude entry of each row made
// positive).  Rows = m.rows() - rank.
MatrixXd left_null_basis(const MatrixXd& m, double rel_tol = 1e-12);

// Orthonormal columns spanning the (right) null space of m.
MatrixXd right_null_basis(const MatrixXd& m, double rel_tol = 1e-12);

// Orthonormal rows spanning the observable subspace of (a, c): the row space
// of the observability matrix.
MatrixXd observable_rows(const MatrixXd& a, const MatrixXd& c,
                         double rel_tol = 1e-10);

// Symmetric square root factor L with L L' = s for symmetric PSD s (small
// negative eigenvalues are clamped to zero).
MatrixXd psd_sqrt(const MatrixXd& s, double clamp_tol = 1e-12);

}  // namespace wec::lin
