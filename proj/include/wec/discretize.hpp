#pragma once

// Energy-preserving zero-order-hold discretization.  The discrete-time
// force-to-velocity response H_uq and the discrete joint PSD Sigma_yf are
// aliased sinc^2-weighted sums of the continuous-frequency data; the sample
// average of the PTO velocity over a hold interval is what enters the power
// balance, which is exactly what the sinc^2 weights encode.

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "wec/spectra.hpp"

namespace wec::discretize {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using spectra::PlantFrequencyResponse;

// H_uq(e^{jW}) = sum_l Zuv(j w_l) sinc^2(w_l T / 2),  w_l = W/T + 2 pi l / T,
// truncated at |l| <= l_max with the constant-tail correction
// Zuv_inf * (1 - sum of retained sinc^2 weights).
MatrixXcd alias_huq(const PlantFrequencyResponse& fr, double t_samp,
                    double omega_d, int l_max);

// Sigma_yf(W) = sum_l (1/T) sinc^2(w_l T / 2) S_yf(w_l) with
// S_yf = [zafd; 1] Sa [zafd; 1]^H.
MatrixXcd alias_sigma(const PlantFrequencyResponse& fr, double t_samp,
                      double omega_d, int l_max);

struct DiscreteFrequencyData {
  VectorXd omega_grid;              // in (-pi, pi], uniform, containing 0
  std::vector<MatrixXcd> huq;       // n_p x n_p per point
  std::vector<MatrixXcd> hud;       // n_p x n_p per point
  std::vector<MatrixXcd> sigma_yf;  // (n_p+1) x (n_p+1) Hermitian per point
  double t_samp = 0.0;
  int l_max = 0;

  int n_p() const { return huq.empty() ? 0 : int(huq.front().rows()); }
  int zero_index() const;  // index of omega = 0 in the grid
};

// Hud(W) = T Huq(W) / (e^{jW} - 1) away from 0; at W = 0 the aliased Zud
// expansion collapses to Zud(0).  The continuous data is needed for that
// limit, so it is passed alongside the Huq samples.
std::vector<MatrixXcd> derive_hud(const std::vector<MatrixXcd>& huq,
                                  const VectorXd& omega_grid, double t_samp,
                                  const PlantFrequencyResponse& fr);

// Full grid build: Omega grid of n_omega uniform points in (-pi, pi].
DiscreteFrequencyData build_discrete_data(const PlantFrequencyResponse& fr,
                                          double t_samp, int n_omega,
                                          int l_max);

}  // namespace wec::discretize
