#pragma once

// Stochastic closed-loop simulation and evaluation: innovations sampling,
// power accounting, the stationary-power identity check, the anticausal
// full-information baseline, Monte Carlo ensembles with Student-t confidence
// intervals, and the empirical state-energy bound.

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "wec/mpc.hpp"
#include "wec/ssid.hpp"
#include "wec/synthesis.hpp"

namespace wec::sim {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using ssid::DiscretePlant;
using synthesis::RiccatiSolution;

// Deterministic Gaussian sampler (Box-Muller over std::mt19937_64, whose
// output sequence is pinned by the standard); identical seeds give identical
// sequences on every platform.
class GaussianSampler {
 public:
  explicit GaussianSampler(unsigned long long seed) : rng_(seed) {}
  double operator()();

 private:
  std::mt19937_64 rng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// length x (n_p + 1) i.i.d. innovations with covariance s_w.
MatrixXd sample_innovations(const MatrixXd& s_w, int length,
                            unsigned long long seed);

// Per-step loop interface: reset with the initial state, then return u_k
// given the newest measurement (absent at k = 0).
class LoopController {
 public:
  virtual ~LoopController() = default;
  virtual void reset(const VectorXd& x0) = 0;
  virtual VectorXd step(const std::optional<VectorXd>& y_prev) = 0;
  virtual mpc::StepDiagnostics diagnostics() const { return {}; }
};

// Wraps an MpcController (owned elsewhere).
class MpcLoop final : public LoopController {
 public:
  explicit MpcLoop(mpc::MpcController& ctrl) : ctrl_(ctrl) {}
  void reset(const VectorXd& x0) override { ctrl_.reset(x0); }
  VectorXd step(const std::optional<VectorXd>& y_prev) override {
    return ctrl_.step(y_prev);
  }
  mpc::StepDiagnostics diagnostics() const override {
    return ctrl_.diagnostics();
  }

 private:
  mpc::MpcController& ctrl_;
};

// Static output feedback u = K x_hat through the innovations filter.
class LinearLoop final : public LoopController {
 public:
  LinearLoop(const DiscretePlant& plant, MatrixXd gain);
  void reset(const VectorXd& x0) override;
  VectorXd step(const std::optional<VectorXd>& y_prev) override;

 private:
  const DiscretePlant& plant_;
  MatrixXd k_;
  VectorXd x_, u_prev_;
  int step_index_ = 0;
};

struct LossModel {
  MatrixXd r_loss;  // n_p x n_p
  VectorXd v_d;     // n_p
};

struct SimResult {
  MatrixXd d, u, b, q;   // L x n_p trajectories
  VectorXd a, p;         // L
  MatrixXd w;            // (L+1) x (n_p+1) innovations actually used
  VectorXd gamma;        // horizon objective per step (NaN for non-MPC)
  VectorXd x_norm2;      // |x_k|^2 per step
  std::vector<int> qp_iterations;
  std::vector<char> fallback;
  double p_avg = 0.0;
  double force_violation_rate = 0.0;
  double stroke_violation_rate = 0.0;
  unsigned long long seed = 0;
  // Stationary-identity bookkeeping (filled when a Riccati solution is given)
  VectorXd aux;               // per-step |u - F x|_M^2 + v_d'|u|
  double aux_avg = 0.0;
  double w_quad_delta = 0.0;  // |x_L|_W^2 - |x_0|_W^2
  double x0_norm1 = 0.0;
  double x0_norm2sq = 0.0;
  int steps = 0;
};

SimResult run_closed_loop(const DiscretePlant& plant, LoopController& ctrl,
                          const MatrixXd& w, const VectorXd& x0,
                          const VectorXd& u_max, const VectorXd& d_max,
                          const LossModel& loss,
                          const RiccatiSolution* ricc = nullptr);

// Stationary power identity: time-averaged power against
// p_bar - avg(|u-Fx|_M^2 + v_d'|u|) - endpoint correction, with a batch-means
// Monte Carlo error estimate.
struct PowerIdentityReport {
  double time_avg_power = 0.0;
  double predicted = 0.0;
  double discrepancy_rel = 0.0;  // relative to the identity scale
  double batch_stderr = 0.0;     // batch-means standard error of the gap
  bool mean_square_stable = true;
};
PowerIdentityReport verify_power_identity(const DiscretePlant& plant,
                                          const RiccatiSolution& ricc,
                                          LoopController& ctrl,
                                          const MatrixXd& w,
                                          const VectorXd& x0,
                                          const VectorXd& u_max,
                                          const VectorXd& d_max,
                                          const LossModel& loss);

// Full-information trajectory optimization over the whole record: minimizes
// the stationary-equivalent cost sum_k J(x_k, u_k, b_k) subject to the known
// innovations, realized displacement bounds, and a terminal zero-stroke
// condition.  The KKT factorization depends only on the plant and length, so
// one solver serves a whole ensemble.
class AnticausalSolver {
 public:
  AnticausalSolver(const DiscretePlant& plant, const RiccatiSolution& ricc,
                   const VectorXd& u_max, const VectorXd& d_max,
                   const LossModel& loss, double mu, int length);
  ~AnticausalSolver();
  AnticausalSolver(AnticausalSolver&&) noexcept;

  // w must have length+1 rows.
  SimResult solve(const MatrixXd& w, const VectorXd& x0,
                  double tol = 1e-7, int max_iter = 20000) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct EnsembleStats {
  double mean_p_avg = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int n_runs = 0;
  int run_length = 0;
  VectorXd per_run;
};

// Student-t distribution helpers (used for the confidence intervals).
double student_t_cdf(double t, double dof);
double student_t_quantile(double p, double dof);

// Runs `runner` for run indices 0..n_runs-1 (each with its own seed derived
// from base_seed) across up to n_threads workers and aggregates the mean
// with a two-sided Student-t confidence interval.
EnsembleStats ensemble(const std::function<double(int, unsigned long long)>& runner,
                       int n_runs, double confidence,
                       unsigned long long base_seed, int n_threads);

// Empirical fit of |x|_{2tau}^2 <= a1 |x0|_1 + a2 |x0|_2^2 + a3 |w|_{1tau}
// + a4 |w|_{2tau}^2 over many trials, plus the running mean-square trend.
struct StabilityBoundReport {
  Eigen::Vector4d alpha = Eigen::Vector4d::Zero();
  int violations = 0;          // after the final inflation (must be zero)
  double inflation = 1.0;      // factor applied on top of the least squares
  double trend_flatness = 0.0; // max relative drift over the final decade
  VectorXd running_mean_square;  // trial-averaged (1/(1+tau)) |x|_{2tau}^2
};
StabilityBoundReport verify_state_energy_bound(
    const std::function<SimResult(int, unsigned long long)>& trial_runner,
    int trials, unsigned long long base_seed, int n_threads);

}  // namespace wec::sim
