#include "wec/discretize.hpp"

#include <cmath>
#include <stdexcept>

namespace wec::discretize {

namespace {
constexpr double kPi = 3.14159265358979323846;
using Cplx = std::complex<double>;

double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(x) / x; }

void check_args(const PlantFrequencyResponse& fr, double t_samp,
                double omega_d, int l_max) {
  if (t_samp <= 0.0) throw std::invalid_argument("alias: T must be positive");
  if (l_max < 1) throw std::invalid_argument("alias: l_max must be >= 1");
  if (std::abs(omega_d) > kPi + 1e-12)
    throw std::invalid_argument("alias: |Omega| must be <= pi");
  if (fr.grid.size() < 2 || fr.grid[0] != 0.0)
    throw std::invalid_argument("alias: frequency grid must start at 0");
}
}  // namespace

MatrixXcd alias_huq(const PlantFrequencyResponse& fr, double t_samp,
                    double omega_d, int l_max) {
  check_args(fr, t_samp, omega_d, l_max);
  const int np = fr.n_p();
  MatrixXcd acc = MatrixXcd::Zero(np, np);
  double weight_sum = 0.0;
  for (int l = -l_max; l <= l_max; ++l) {
    const double wl = omega_d / t_samp + 2.0 * kPi * l / t_samp;
    const double s = sinc(wl * t_samp / 2.0);
    const double w2 = s * s;
    if (w2 < 1e-28) continue;  // sin(pi l) roundoff at Omega = 0
    acc += fr.zuv_at(wl) * w2;
    weight_sum += w2;
  }
  // The sinc^2 weights sum to one over all aliases; the remainder carries the
  // (real) high-frequency limit.
  acc += fr.zuv_inf.cast<Cplx>() * (1.0 - weight_sum);
  return acc;
}

MatrixXcd alias_sigma(const PlantFrequencyResponse& fr, double t_samp,
                      double omega_d, int l_max) {
  check_args(fr, t_samp, omega_d, l_max);
  const int np = fr.n_p();
  MatrixXcd acc = MatrixXcd::Zero(np + 1, np + 1);
  for (int l = -l_max; l <= l_max; ++l) {
    const double wl = omega_d / t_samp + 2.0 * kPi * l / t_samp;
    const double s = sinc(wl * t_samp / 2.0);
    const double w2 = s * s / t_samp;
    if (w2 < 1e-28) continue;
    const double sa = fr.sa_at(wl);
    if (sa == 0.0) continue;
    const Eigen::VectorXcd z = fr.zafd_at(wl);
    Eigen::VectorXcd v(np + 1);
    v.head(np) = z;
    v(np) = 1.0;
    acc += (w2 * sa) * (v * v.adjoint());
  }
  return 0.5 * (acc + acc.adjoint());
}

std::vector<MatrixXcd> derive_hud(const std::vector<MatrixXcd>& huq,
                                  const VectorXd& omega_grid, double t_samp,
                                  const PlantFrequencyResponse& fr) {
  if (huq.size() != size_t(omega_grid.size()))
    throw std::invalid_argument("derive_hud: grid size mismatch");
  std::vector<MatrixXcd> hud(huq.size());
  for (int i = 0; i < omega_grid.size(); ++i) {
    const double w = omega_grid[i];
    if (w == 0.0) {
      // Huq(1) must vanish for an energy-preserving model; the Omega->0
      // limit of T*Huq/(e^{jW}-1) is the DC compliance Zud(0).
      if (huq[i].norm() > 1e-6 * (1.0 + huq[i].norm()))
        throw std::runtime_error(
            "derive_hud: Huq(1) != 0 - upstream model is not energy-preserving");
      hud[i] = fr.zud_at(0.0);
    } else {
      const Cplx den = std::polar(1.0, w) - 1.0;
      hud[i] = (t_samp / den) * huq[i];
    }
  }
  return hud;
}

int DiscreteFrequencyData::zero_index() const {
  for (int i = 0; i < omega_grid.size(); ++i)
    if (omega_grid[i] == 0.0) return i;
  throw std::runtime_error("DiscreteFrequencyData: grid has no zero");
}

DiscreteFrequencyData build_discrete_data(const PlantFrequencyResponse& fr,
                                          double t_samp, int n_omega,
                                          int l_max) {
  if (n_omega < 4 || n_omega % 2 != 0)
    throw std::invalid_argument("build_discrete_data: n_omega must be even");
  DiscreteFrequencyData dfd;
  dfd.t_samp = t_samp;
  dfd.l_max = l_max;
  dfd.omega_grid.resize(n_omega);
  const double step = 2.0 * kPi / n_omega;
  for (int i = 0; i < n_omega; ++i) {
    dfd.omega_grid[i] = -kPi + step * (i + 1);
    if (i + 1 == n_omega / 2) dfd.omega_grid[i] = 0.0;  // exact zero
  }
  dfd.huq.resize(n_omega);
  dfd.sigma_yf.resize(n_omega);
  for (int i = 0; i < n_omega; ++i) {
    dfd.huq[i] = alias_huq(fr, t_samp, dfd.omega_grid[i], l_max);
    dfd.sigma_yf[i] = alias_sigma(fr, t_samp, dfd.omega_grid[i], l_max);
  }
  dfd.hud = derive_hud(dfd.huq, dfd.omega_grid, t_samp, fr);
  return dfd;
}

}  // namespace wec::discretize
