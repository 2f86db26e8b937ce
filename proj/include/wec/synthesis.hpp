#pragma once

// Offline controller synthesis: the KYP Riccati solution that turns average
// power maximization into a positive-semidefinite tracking cost, the
// realization of the internal dynamics that remain when the PTO stroke is
// pinned (displacement treated as an input), and the final-value penalty
// that over-bounds the infinite post-horizon cost of holding the stroke.

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "wec/lin.hpp"
#include "wec/ssid.hpp"

namespace wec::synthesis {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;
using lin::solve_dlyap;
using ssid::DiscretePlant;

struct RiccatiSolution {
  MatrixXd w;      // n x n, symmetric PSD
  MatrixXd m;      // n_p x n_p, symmetric PD
  MatrixXd f;      // n_p x n feedback gain
  double p_bar;    // stationary power offset trace(B_w' W B_w S_w)
  double residual; // relative residual of the Riccati equation
};

// Stabilizing solution of W = A'WA + F'MF with
//   M = R + (D_uq + D_uq')/2 - B_u' W B_u,
//   F = -M^{-1} ((1/2) C_q - B_u' W A).
// R is the quadratic transmission-loss weight, symmetric positive definite.
RiccatiSolution solve_kyp_riccati(const DiscretePlant& plant, const MatrixXd& r);

struct StallRealization {
  MatrixXd bu_perp;  // (n - n_p) x n, orthonormal rows, bu_perp * B_u = 0
  MatrixXd cd_perp;  // n x (n - n_p), orthonormal cols, C_d * cd_perp = 0
  MatrixXd a_s;      // pinned-stroke dynamics, Schur
  MatrixXd b_ws;
  MatrixXd b_ds;
  MatrixXd c_s;
  MatrixXd d_ws;
  MatrixXd d_ds;

  int n_s() const { return int(a_s.rows()); }
};

StallRealization build_stall(const DiscretePlant& plant);

// Final-value penalty J_f(x) = |x|_Qf^2 + sum_i w_i * t_i(x), where t_i is a
// polygonal gauge of the i-th modal coordinate zeta_i = (Pi^{-1} bu_perp x)_i
// of the pinned-stroke dynamics.  The gauge directions are chosen densely
// enough that both the over-bound on the post-horizon cost and the one-step
// decrement inequality hold exactly (not just in the complex-modulus limit).
struct TerminalPenalty {
  MatrixXd q_f;        // n x n symmetric PSD
  MatrixXd q_f_rows;   // factor rows: q_f = q_f_rows' q_f_rows (n_s x n)
  MatrixXd z_lyap;     // n_s x n_s
  MatrixXd x_lyap;     // n_s x n_s
  MatrixXcd pi;        // eigenvector matrix of A_s
  VectorXcd lambda;    // eigenvalues of A_s
  double pi_cond = 1.0;

  // Complex-modulus (tight) bound data: weights applied to |zeta_i|.
  VectorXd g_modal;        // nonnegative, one per modal coordinate
  MatrixXcd c_f;           // diag(g_modal) * Pi^{-1} * bu_perp

  // Polygonal representation used inside the QP: one group of direction
  // rows per retained mode (real eigenvalue or conjugate-pair
  // representative), sharing a single epigraph variable.
  MatrixXd gauge_rows;             // stacked direction rows acting on x
  std::vector<int> group_sizes;    // rows per group
  VectorXd group_weights;          // w_i >= 0 per group
  double mu = 0.0;
  VectorXd v_d;

  double quad(const VectorXd& x) const { return x.dot(q_f * x); }
  // Polygonal penalty (what the optimizer minimizes).
  double eval(const VectorXd& x) const;
  // Complex-modulus penalty (the modal bound it tightens to).
  double eval_modal(const VectorXd& x) const;
};

TerminalPenalty build_terminal_penalty(const DiscretePlant& plant,
                                       const RiccatiSolution& ricc,
                                       const StallRealization& stall,
                                       double mu, const VectorXd& v_d,
                                       const VectorXd& u_max);

// Stage cost J(x, u, b) = |u - Fx|_M^2 + v_d'|u| + mu * u_max' b.
double stage_cost(const RiccatiSolution& ricc, double mu, const VectorXd& v_d,
                  const VectorXd& u_max, const VectorXd& x, const VectorXd& u,
                  const VectorXd& b);

// Randomized check of the final-value penalty: on states with the stroke
// pinned, (i) the truncated post-horizon cost never exceeds J_f and (ii) the
// one-step decrement holds.
struct TerminalPenaltyReport {
  int samples = 0;
  int bound_failures = 0;
  int decrement_failures = 0;
  double worst_bound_margin = 0.0;      // min of J_f + tol - rho_N
  double worst_decrement_margin = 0.0;  // min of J_f(x) + tol - J_f(x+) - J
  bool passed = false;
};

TerminalPenaltyReport verify_terminal_penalty(
    const DiscretePlant& plant, const RiccatiSolution& ricc,
    const StallRealization& stall, const TerminalPenalty& tp,
    const VectorXd& u_max, int samples, unsigned seed,
    int truncation_steps = 5000, double bound_tol = 1e-6,
    double decrement_tol = 1e-9);

// Post-horizon trajectory cost truncated at N steps, starting from a state
// with C_d x = 0, under the stroke-holding input.
double truncated_stall_cost(const DiscretePlant& plant,
                            const RiccatiSolution& ricc,
                            const StallRealization& stall, double mu,
                            const VectorXd& v_d, const VectorXd& u_max,
                            const VectorXd& x, int steps);

}  // namespace wec::synthesis
