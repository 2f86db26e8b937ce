#pragma once

// Shared test helpers: random passive mechanical plants discretized exactly
// under zero-order hold, random innovations models, and frequency-data
// tables sampled from a known model (for generate-then-fit round trips).

#include <Eigen/Dense>
#include <random>
#include <unsupported/Eigen/MatrixFunctions>

#include "wec/discretize.hpp"
#include "wec/lin.hpp"
#include "wec/ssid.hpp"

namespace testsupport {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd randn(int r, int c, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  MatrixXd m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = g(rng);
  return m;
}

inline MatrixXd random_spd(int n, std::mt19937_64& rng, double ridge = 0.5) {
  const MatrixXd b = randn(n, n, rng);
  return b * b.transpose() + ridge * MatrixXd::Identity(n, n);
}

// Exact ZOH sampling of a passive mass-damper-spring network with a
// collocated force input/displacement output pair.  The resulting
// (A, B_u, C_d) has a positive-real force-to-velocity map by construction.
// n_dof degrees of freedom -> state dimension 2 n_dof.
inline wec::ssid::DiscretePlant random_passive_plant(int n_dof, double t_samp,
                                                     std::mt19937_64& rng) {
  const MatrixXd m = random_spd(n_dof, rng, 1.0);
  const MatrixXd k = random_spd(n_dof, rng, 1.0);
  MatrixXd c = random_spd(n_dof, rng, 0.05);
  c *= 0.2;  // light damping
  const MatrixXd b_f = randn(n_dof, 1, rng);

  const int n = 2 * n_dof;
  MatrixXd ac = MatrixXd::Zero(n, n);
  ac.topRightCorner(n_dof, n_dof).setIdentity();
  ac.bottomLeftCorner(n_dof, n_dof) = -m.llt().solve(k);
  ac.bottomRightCorner(n_dof, n_dof) = -m.llt().solve(c);
  MatrixXd bc = MatrixXd::Zero(n, 1);
  bc.bottomRows(n_dof) = m.llt().solve(b_f);

  MatrixXd big = MatrixXd::Zero(n + 1, n + 1);
  big.topLeftCorner(n, n) = ac * t_samp;
  big.topRightCorner(n, 1) = bc * t_samp;
  const MatrixXd e = big.exp();

  wec::ssid::DiscretePlant plant;
  plant.t_samp = t_samp;
  plant.a = e.topLeftCorner(n, n);
  plant.b_u = e.topRightCorner(n, 1);
  plant.c_d = MatrixXd::Zero(1, n);
  plant.c_d.leftCols(n_dof) = b_f.transpose();
  plant.c_a = MatrixXd::Zero(1, n);
  plant.b_w = MatrixXd::Zero(n, 2);
  plant.s_w = MatrixXd::Zero(2, 2);
  return plant;
}

// Random stable innovations disturbance model appended to a plant:
// x_w+ = A_w x_w + K w,  [d; a] += C_w x_w + w.
inline void attach_disturbance(wec::ssid::DiscretePlant& plant, int n_w,
                               std::mt19937_64& rng, double radius = 0.85) {
  const int n0 = plant.n();
  const int ny = plant.n_p() + 1;
  MatrixXd aw = randn(n_w, n_w, rng);
  aw *= radius / wec::lin::spectral_radius(aw);
  const MatrixXd kw = 0.3 * randn(n_w, ny, rng);
  const MatrixXd cw = randn(ny, n_w, rng);

  const int n = n0 + n_w;
  MatrixXd a = MatrixXd::Zero(n, n);
  a.topLeftCorner(n0, n0) = plant.a;
  a.bottomRightCorner(n_w, n_w) = aw;
  MatrixXd bu = MatrixXd::Zero(n, plant.n_p());
  bu.topRows(n0) = plant.b_u;
  MatrixXd bw = MatrixXd::Zero(n, ny);
  bw.bottomRows(n_w) = kw;
  MatrixXd cd = MatrixXd::Zero(plant.n_p(), n);
  cd.leftCols(n0) = plant.c_d;
  cd.rightCols(n_w) = cw.topRows(plant.n_p());
  MatrixXd ca = MatrixXd::Zero(1, n);
  ca.leftCols(n0) = plant.c_a;
  ca.rightCols(n_w) = cw.bottomRows(1);

  plant.a = a;
  plant.b_u = bu;
  plant.b_w = bw;
  plant.c_d = cd;
  plant.c_a = ca;
  plant.s_w = random_spd(ny, rng, 0.3);
}

// Frequency-data table sampled from a known model (exact transfer values,
// not aliased sums) for generate-then-fit round trips.
inline wec::discretize::DiscreteFrequencyData sample_model(
    const wec::ssid::DiscretePlant& plant, int n_omega) {
  wec::discretize::DiscreteFrequencyData dfd;
  dfd.t_samp = plant.t_samp;
  dfd.l_max = 0;
  dfd.omega_grid.resize(n_omega);
  const double pi = 3.14159265358979323846;
  const double step = 2.0 * pi / n_omega;
  for (int i = 0; i < n_omega; ++i) {
    dfd.omega_grid[i] = -pi + step * (i + 1);
    if (i + 1 == n_omega / 2) dfd.omega_grid[i] = 0.0;
  }
  dfd.huq.resize(n_omega);
  dfd.hud.resize(n_omega);
  dfd.sigma_yf.resize(n_omega);
  for (int i = 0; i < n_omega; ++i) {
    dfd.huq[i] = plant.huq_at(dfd.omega_grid[i]);
    dfd.hud[i] = plant.hud_at(dfd.omega_grid[i]);
    dfd.sigma_yf[i] = plant.sigma_at(dfd.omega_grid[i]);
  }
  return dfd;
}

}  // namespace testsupport
