#pragma once

// Fit a finite-dimensional discrete-time innovations model to the aliased
// frequency data, preserving discrete positive-realness of the force-to-
// velocity channel, and run the online innovations recursion.
//
// Structure of the fitted model: a deterministic subsystem (u -> d, strictly
// proper) and a disturbance subsystem (w -> [d; a]) in block-diagonal form,
//   x+ = A x + B_u u + B_w w,   y = C_y x + w,   cov(w) = S_w,
// with [D_wd; D_wa] = I the innovations feedthrough partition.

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "wec/discretize.hpp"

namespace wec::ssid {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;
using discretize::DiscreteFrequencyData;

struct DiscretePlant {
  MatrixXd a;     // n x n, Schur
  MatrixXd b_u;   // n x n_p
  MatrixXd b_w;   // n x (n_p + 1), steady-state Kalman gain
  MatrixXd c_d;   // n_p x n
  MatrixXd c_a;   // 1 x n
  MatrixXd s_w;   // (n_p + 1) x (n_p + 1), innovations covariance
  double t_samp = 0.0;

  int n() const { return int(a.rows()); }
  int n_p() const { return int(b_u.cols()); }

  MatrixXd c_y() const;    // [c_d; c_a]
  MatrixXd d_wd() const;   // [I 0] partition of the identity feedthrough
  MatrixXd d_wa() const;   // [0 1] partition
  MatrixXd c_q() const;    // (1/T) c_d (A - I)
  MatrixXd d_uq() const;   // (1/T) c_d b_u
  MatrixXd d_wq0() const;  // (1/T) (c_d b_w - d_wd)
  MatrixXd d_wq1() const;  // (1/T) d_wd

  // Transfer evaluations at z = e^{j omega_d}.
  MatrixXcd huq_at(double omega_d) const;
  MatrixXcd hud_at(double omega_d) const;
  // Fitted joint PSD of [d; a]: (I + C_y (zI-A)^{-1} B_w) S_w (...)^H.
  MatrixXcd sigma_at(double omega_d) const;
};

struct FitOptions {
  int order_u = 4;        // deterministic subsystem state count
  int order_w = 4;        // disturbance subsystem state count
  int vf_iterations = 30;
  double pole_cap = 0.9995;       // modulus cap on fitted poles
  int max_lag = 1024;             // covariance lags kept from the grid
  double pr_margin = 1e-10;       // grid positive-real margin target
  double pr_floor_rel = 2e-6;     // strict passivity floor off Omega = 0,
                                  // relative to the response scale
  bool prefer_era = true;         // covariance-Hankel fit for the w block,
                                  // with rational LS as the alternative
};

DiscretePlant fit_plant(const DiscreteFrequencyData& dfd, const FitOptions& opt);
DiscretePlant fit_plant(const DiscreteFrequencyData& dfd, int order);

struct ValidationThresholds {
  double max_spectral_radius = 1.0 - 1e-12;
  double min_pr_eig = -1e-9;
  double min_d_uq_sym_eig = 0.0;   // must be strictly positive
  double min_hud1_sym_eig = 0.0;   // must be strictly positive
  double max_fit_error_huq = 0.01;
  double max_fit_error_sigma = 0.35;
};

struct ValidationReport {
  double spectral_radius_a = 0.0;
  double min_pr_eig = 0.0;        // min over grid of lambda_min(Herm Huq)
  double d_uq_sym_min_eig = 0.0;
  double hud1_sym_min_eig = 0.0;
  double fit_error_huq = 0.0;     // relative sup-norm error on the grid
  double fit_error_sigma = 0.0;   // energy-weighted relative error
  bool passed = false;
};

ValidationReport validate_plant(const DiscretePlant& plant,
                                const DiscreteFrequencyData& dfd,
                                const ValidationThresholds& tol = {});

// One step of the innovations recursion: w_k = y_k - C_y x_k,
// x_{k+1} = A x_k + B_u u_k + B_w w_k.
struct InnovationsStep {
  VectorXd w;
  VectorXd x_next;
};
InnovationsStep innovations_step(const DiscretePlant& plant, const VectorXd& x,
                                 const VectorXd& u, const VectorXd& y);

// Exposed for tests: covariance sequence of the joint PSD samples
// (inverse Fourier sum over the uniform grid), lags 0..max_lag-1.
std::vector<MatrixXd> psd_covariances(const DiscreteFrequencyData& dfd,
                                      int max_lag);

// Exposed for tests: minimal stabilizing solution of the spectral
// factorization Riccati
//   P = A P A' + (G - A P C')(R0 - C P C')^{-1} (G - A P C')',
// returning the Kalman gain K = (G - A P C')(R0 - C P C')^{-1} and the
// innovations covariance S_w = R0 - C P C'.
struct FactorizationResult {
  MatrixXd p;
  MatrixXd k;
  MatrixXd s_w;
};
FactorizationResult canonical_factorization(const MatrixXd& a,
                                            const MatrixXd& g,
                                            const MatrixXd& c,
                                            const MatrixXd& r0);

}  // namespace wec::ssid
