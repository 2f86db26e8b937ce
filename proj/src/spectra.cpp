#include "wec/spectra.hpp"

#include <cmath>
#include <stdexcept>

namespace wec::spectra {

namespace {
constexpr double kPi = 3.14159265358979323846;
using Cplx = std::complex<double>;

// Interpolation helper: piecewise-linear on the one-sided grid, constant
// beyond the last point.
template <typename F>
auto interp_one_sided(const VectorXd& grid, double w, F value_at,
                      const decltype(value_at(0))& tail) {
  if (w >= grid[grid.size() - 1]) return tail;
  int lo = 0, hi = int(grid.size()) - 1;
  while (hi - lo > 1) {
    int mid = (lo + hi) / 2;
    (grid[mid] <= w ? lo : hi) = mid;
  }
  const double t = (w - grid[lo]) / (grid[hi] - grid[lo]);
  return decltype(value_at(0))((1.0 - t) * value_at(lo) + t * value_at(hi));
}
}  // namespace

WaveSpectrum::WaveSpectrum(double hs_, double tp_) : hs(hs_), tp(tp_) {
  if (hs <= 0.0 || tp <= 0.0)
    throw std::invalid_argument("WaveSpectrum: Hs and Tp must be positive");
  omega_p = 2.0 * kPi / tp;
  // Closed form of the variance condition: the spectral shape integrates to
  // 2*c_a*omega_p/5 over the real line, so (1/2pi)*that = (Hs/4)^2 gives
  c_a = 5.0 * kPi * hs * hs / (16.0 * omega_p);
}

double pm_spectrum_eval(const WaveSpectrum& spec, double omega) {
  if (omega == 0.0) return 0.0;
  const double r = spec.omega_p / std::abs(omega);
  const double r2 = r * r;
  return spec.c_a * r2 * r2 * r * std::exp(-1.25 * r2 * r2);
}

double BuoySurrogateParams::radiation_damping(double omega) const {
  const double w2 = omega * omega;
  const double o4 = omega_r * omega_r * omega_r * omega_r;
  return c_r0 * w2 / (w2 * w2 + o4);
}

void BuoySurrogateParams::validate() const {
  if (m_b <= 0 || m_t <= 0 || m_a < 0 || k_h <= 0 || k_t <= 0)
    throw std::invalid_argument("surrogate: masses and stiffnesses must be positive");
  if (c_t < 0 || c_r0 < 0 || omega_r <= 0)
    throw std::invalid_argument("surrogate: damping parameters must be nonnegative");
  if (g_e <= 0 || draft < 0 || d_a < 0 || gravity <= 0)
    throw std::invalid_argument("surrogate: excitation parameters invalid");
}

namespace {

// Dynamic stiffness D(w) = K - w^2 M + j w C(w) of the 2-DOF system,
// states [buoy heave; absorber displacement].
Eigen::Matrix2cd dynamic_stiffness(const BuoySurrogateParams& p, double w) {
  Eigen::Matrix2d M, K, C;
  M << p.m_b + p.m_a, 0.0, 0.0, p.m_t;
  K << p.k_h + p.k_t, -p.k_t, -p.k_t, p.k_t;
  const double cr = p.radiation_damping(w);
  C << cr + p.c_t, -p.c_t, -p.c_t, p.c_t;
  return K - w * w * M + Cplx(0.0, w) * C;
}

}  // namespace

PlantFrequencyResponse build_surrogate(const BuoySurrogateParams& params,
                                       const WaveSpectrum& sea,
                                       const VectorXd& grid) {
  params.validate();
  if (grid.size() < 2 || grid[0] != 0.0)
    throw std::invalid_argument("build_surrogate: grid must start at omega = 0");
  for (int i = 1; i < grid.size(); ++i)
    if (grid[i] <= grid[i - 1])
      throw std::invalid_argument("build_surrogate: grid must be strictly increasing");

  PlantFrequencyResponse fr;
  fr.grid = grid;
  const int n = int(grid.size());
  fr.zuv.resize(n);
  fr.zud.resize(n);
  fr.zafd.resize(n);
  fr.sa.resize(n);
  fr.zuv_inf = MatrixXd::Zero(1, 1);  // mobility of a mass-terminated system

  // PTO force enters as an equal-and-opposite pair; the stroke is the
  // collocated relative displacement, so the pair vector serves both.
  Eigen::Vector2d b_pto(1.0, -1.0);
  Eigen::Vector2d e_wave(1.0, 0.0);

  for (int i = 0; i < n; ++i) {
    const double w = grid[i];
    const Eigen::Matrix2cd D = dynamic_stiffness(params, w);
    const Eigen::PartialPivLU<Eigen::Matrix2cd> lu(D);
    const Eigen::Vector2cd col_u = lu.solve(b_pto.cast<Cplx>());
    const Eigen::Vector2cd col_f = lu.solve(e_wave.cast<Cplx>());

    MatrixXcd zud(1, 1), zuv(1, 1);
    zud(0, 0) = b_pto(0) * col_u(0) + b_pto(1) * col_u(1);
    zuv(0, 0) = Cplx(0.0, w) * zud(0, 0);
    fr.zud[i] = zud;
    fr.zuv[i] = zuv;

    // Excitation: depth rolloff and dispersive phase delay, deep-water
    // kappa = w^2 / g, measurement a distance d_a up-wave.
    const double kappa = w * w / params.gravity;
    const Cplx gain = params.g_e * std::exp(-kappa * params.draft) *
                      std::exp(Cplx(0.0, -kappa * params.d_a));
    VectorXcd zafd(1);
    zafd(0) = gain * (b_pto(0) * col_f(0) + b_pto(1) * col_f(1));
    fr.zafd[i] = zafd;

    fr.sa[i] = pm_spectrum_eval(sea, w);
  }
  return fr;
}

MatrixXcd PlantFrequencyResponse::zuv_at(double omega) const {
  const double w = std::abs(omega);
  MatrixXcd v = interp_one_sided(
      grid, w, [&](int i) { return zuv[i]; }, MatrixXcd(zuv_inf.cast<Cplx>()));
  return omega < 0 ? v.conjugate() : v;
}

MatrixXcd PlantFrequencyResponse::zud_at(double omega) const {
  const double w = std::abs(omega);
  const MatrixXcd tail = MatrixXcd::Zero(zud.front().rows(), zud.front().cols());
  MatrixXcd v = interp_one_sided(grid, w, [&](int i) { return zud[i]; }, tail);
  return omega < 0 ? v.conjugate() : v;
}

VectorXcd PlantFrequencyResponse::zafd_at(double omega) const {
  const double w = std::abs(omega);
  const VectorXcd tail = VectorXcd::Zero(zafd.front().size());
  VectorXcd v = interp_one_sided(grid, w, [&](int i) { return zafd[i]; }, tail);
  return omega < 0 ? v.conjugate() : v;
}

double PlantFrequencyResponse::sa_at(double omega) const {
  const double w = std::abs(omega);
  return interp_one_sided(grid, w, [&](int i) { return sa[i]; }, 0.0);
}

VectorXd make_grid(double omega_max, int n) {
  return VectorXd::LinSpaced(n, 0.0, omega_max);
}

VectorXd make_default_grid(double tp, double t_samp, int n_core, int n_tail,
                           int l_cover) {
  const double core_max = 16.0 * kPi / tp;
  const double tail_max = (2.0 * l_cover + 1.0) * kPi / t_samp;
  if (tail_max <= core_max) return make_grid(core_max, n_core);
  VectorXd grid(n_core + n_tail);
  grid.head(n_core) = VectorXd::LinSpaced(n_core, 0.0, core_max);
  const double ratio = std::pow(tail_max / core_max, 1.0 / n_tail);
  double w = core_max;
  for (int i = 0; i < n_tail; ++i) {
    w *= ratio;
    grid(n_core + i) = w;
  }
  return grid;
}

MatrixXcd joint_spectrum(const PlantFrequencyResponse& fr, int index) {
  const VectorXcd& z = fr.zafd[index];
  const int m = int(z.size()) + 1;
  VectorXcd v(m);
  v.head(m - 1) = z;
  v(m - 1) = 1.0;
  return fr.sa[index] * (v * v.adjoint());
}

ModalInfo fundamental_mode(const BuoySurrogateParams& p) {
  Eigen::Matrix2d M, K;
  M << p.m_b + p.m_a, 0.0, 0.0, p.m_t;
  K << p.k_h + p.k_t, -p.k_t, -p.k_t, p.k_t;

  // Undamped fundamental frequency first, to evaluate c_r there.
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::Matrix2d> ges(K, M);
  const double w1 = std::sqrt(ges.eigenvalues()(0));

  Eigen::Matrix2d C;
  const double cr = p.radiation_damping(w1);
  C << cr + p.c_t, -p.c_t, -p.c_t, p.c_t;

  Eigen::Matrix4d A = Eigen::Matrix4d::Zero();
  A.topRightCorner<2, 2>() = Eigen::Matrix2d::Identity();
  A.bottomLeftCorner<2, 2>() = -M.inverse() * K;
  A.bottomRightCorner<2, 2>() = -M.inverse() * C;
  const Eigen::Vector4cd ev = A.eigenvalues();

  ModalInfo info{0.0, 0.0};
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 4; ++i) {
    if (ev(i).imag() <= 0) continue;
    const double wn = std::abs(ev(i));
    if (wn < best) {
      best = wn;
      info.damped_period = 2.0 * kPi / ev(i).imag();
      info.damping_ratio = -ev(i).real() / wn;
    }
  }
  return info;
}

}  // namespace wec::spectra
