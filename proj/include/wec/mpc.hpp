#pragma once

// Receding-horizon controller.  Each step solves a condensed convex QP over
// the hypothetical input and slack sequences: stage cost |u - Fx|_M^2 +
// v_d'|u| + mu u_max' b, terminal penalty J_f, force constraints softened by
// b, displacement constraints on conditional means, and a terminal
// zero-stroke equality.  The QP matrices depend only on the synthesis
// artifacts, so the KKT factorization is built once and reused every step.

#include <Eigen/Dense>
#include <memory>
#include <optional>

#include "wec/qp.hpp"
#include "wec/ssid.hpp"
#include "wec/synthesis.hpp"

namespace wec::mpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using ssid::DiscretePlant;
using synthesis::RiccatiSolution;
using synthesis::StallRealization;
using synthesis::TerminalPenalty;

struct MpcConfig {
  int horizon = 120;       // steps
  double mu = 10.0;        // slack penalty scale
  VectorXd u_max;          // force ratings (MN), elementwise positive
  VectorXd d_max;          // stroke limits (m), elementwise positive
  VectorXd v_d;            // linear loss weights
  MatrixXd r_loss;         // quadratic loss weights
  bool warm_start = true;
  bool fallback = true;    // stroke-holding input on solver failure
  qp::QpSettings qp;       // per-step solver settings

  void validate(int n_p) const;
};

struct HorizonSolution {
  MatrixXd u;       // (h+1) x n_p
  MatrixXd b;       // (h+1) x n_p
  MatrixXd x;       // (h+2) x n, predicted states x_k..x_{k+h+1}
  double gamma = 0.0;
  qp::QpStatus status = qp::QpStatus::max_iter;
  int iterations = 0;
};

struct StepDiagnostics {
  double gamma = 0.0;
  int qp_iterations = 0;
  bool fallback_used = false;
};

class MpcController {
 public:
  MpcController(DiscretePlant plant, RiccatiSolution ricc,
                StallRealization stall, TerminalPenalty tp, MpcConfig cfg);
  ~MpcController();
  MpcController(MpcController&&) noexcept;

  void reset(const VectorXd& x0);

  // Advance one step: absorb the newest measurement (none at k = 0), solve
  // the horizon problem at the updated state estimate, return u_k.
  VectorXd step(const std::optional<VectorXd>& y_prev);

  const VectorXd& state() const;
  int step_index() const;
  const StepDiagnostics& diagnostics() const;
  int fallback_count() const;

  // Solve the horizon problem at an arbitrary state without touching the
  // controller state (analysis/test hook).
  HorizonSolution solve_at(const VectorXd& x_k);

  const DiscretePlant& plant() const;
  const RiccatiSolution& riccati() const;
  const MpcConfig& config() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Standalone builder for the horizon QP at a given state (the controller
// uses the same construction with cached matrices).
qp::QuadraticProgram build_horizon_qp(const DiscretePlant& plant,
                                      const RiccatiSolution& ricc,
                                      const TerminalPenalty& tp,
                                      const MpcConfig& cfg,
                                      const VectorXd& x_k,
                                      double* constant_term = nullptr);

// Always-feasible stroke-holding input -(1/T) D_uq^{-1} C_d A x.
VectorXd stall_input(const DiscretePlant& plant, const VectorXd& x);

}  // namespace wec::mpc
