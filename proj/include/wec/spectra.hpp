#pragma once

// Continuous-frequency plant and sea-state models: Pierson-Moskowitz wave
// spectrum, a 2-DOF buoy + tuned-vibration-absorber surrogate plant, and the
// joint disturbance spectrum sampled on a frequency grid.
//
// Unit system throughout the library: force MN, length m, time s, mass
// MN*s^2/m (= 1e6 kg). Power is then MN*m/s (MW).

#include <Eigen/Dense>
#include <complex>
#include <functional>
#include <vector>

namespace wec::spectra {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

// One-parameter ocean wave power spectral density, two-sided convention:
// variance = (1/2pi) * integral of S_a over all omega = (Hs/4)^2.
struct WaveSpectrum {
  double hs;       // significant wave height (m)
  double tp;       // peak period (s)
  double omega_p;  // peak frequency (rad/s)
  double c_a;      // spectral scale (m^2*s), fixed by the variance condition

  WaveSpectrum(double hs_, double tp_);
};

// S_a(omega); symmetric in omega, zero at omega = 0.
double pm_spectrum_eval(const WaveSpectrum& spec, double omega);

// Heaving cylindrical buoy with an embedded tuned vibration absorber.  The
// PTO acts between the buoy and the absorber mass; the PTO stroke is the
// relative displacement.  Masses in MN*s^2/m, stiffnesses MN/m, damping
// MN*s/m, g_e in MN per metre of free-surface elevation.
struct BuoySurrogateParams {
  double m_b = 0.100;      // buoy mass
  double m_t = 0.025;      // absorber mass
  double m_a = 0.025;      // constant added mass (heave)
  double k_h = 0.095;      // hydrostatic stiffness
  double k_t = 0.019;      // absorber spring
  double c_t = 3.50e-4;    // absorber dashpot
  double c_r0 = 2.83e-3;   // radiation damping bump scale
  double omega_r = 1.0;    // radiation bump corner (rad/s)
  double g_e = 0.60;       // excitation gain scale
  double draft = 2.0;      // exponential depth rolloff of the excitation (m)
  double d_a = 0.0;        // up-wave measurement distance (m)
  double gravity = 9.81;   // m/s^2

  // c_r(omega) = c_r0 * w^2 / (w^4 + omega_r^4): nonnegative, L-inf bounded,
  // vanishing at 0 and infinity.
  double radiation_damping(double omega) const;

  void validate() const;  // throws std::invalid_argument on bad parameters
};

// Frequency response data of the plant sampled on a one-sided grid
// (omega >= 0, grid[0] == 0).  Negative frequencies follow by conjugate
// symmetry.  n_p = number of PTOs (1 for the surrogate).
struct PlantFrequencyResponse {
  VectorXd grid;                 // strictly increasing, starts at 0
  std::vector<MatrixXcd> zuv;    // force -> velocity, n_p x n_p per point
  std::vector<MatrixXcd> zud;    // force -> displacement
  std::vector<VectorXcd> zafd;   // elevation at measurement point -> d_f
  MatrixXd zuv_inf;              // real high-frequency limit of zuv
  VectorXd sa;                   // elevation spectrum on the grid

  int n_p() const { return zuv.empty() ? 0 : int(zuv.front().rows()); }

  // Evaluate by linear interpolation inside the grid, with conjugate
  // symmetry for omega < 0 and the constant tail beyond the grid.
  MatrixXcd zuv_at(double omega) const;
  MatrixXcd zud_at(double omega) const;
  VectorXcd zafd_at(double omega) const;
  double sa_at(double omega) const;  // zero beyond the grid
};

// Uniform grid on [0, omega_max] with n points (omega_max included).
VectorXd make_grid(double omega_max, int n);

// Default analysis grid: n_core uniform points resolving the wave band
// [0, 16 pi / tp], extended geometrically so the first aliased bands of the
// sampled model are covered (up to (2 l_cover + 1) pi / t_samp).
VectorXd make_default_grid(double tp, double t_samp, int n_core = 4096,
                           int n_tail = 1024, int l_cover = 40);

// Evaluate the 2-DOF surrogate transfer matrices and the sea spectrum on the
// given grid.  Throws if the grid does not start at 0 or parameters are
// invalid.
PlantFrequencyResponse build_surrogate(const BuoySurrogateParams& params,
                                       const WaveSpectrum& sea,
                                       const VectorXd& grid);

// Joint spectrum of [d_f; a] at one grid point: [zafd; 1] Sa [zafd; 1]^H.
MatrixXcd joint_spectrum(const PlantFrequencyResponse& fr, int index);

// Modal summary of the surrogate used by parameter validation.
struct ModalInfo {
  double damped_period;  // of the fundamental mode (s)
  double damping_ratio;  // fraction of critical
};
ModalInfo fundamental_mode(const BuoySurrogateParams& params);

}  // namespace wec::spectra
