#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "wec/spectra.hpp"

using namespace wec;
using Eigen::VectorXd;

namespace {
constexpr double kPi = 3.14159265358979323846;

// Quadrature oracle for the spectrum variance, independent of the closed
// form used inside WaveSpectrum.
double variance_by_quadrature(const spectra::WaveSpectrum& ws) {
  const int n = 400000;
  const double hi = 40.0 * ws.omega_p;
  const double dw = hi / n;
  double acc = 0.0;
  for (int i = 1; i <= n; ++i) {
    const double w = (i - 0.5) * dw;
    acc += spectra::pm_spectrum_eval(ws, w);
  }
  return 2.0 * acc * dw / (2.0 * kPi);
}
}  // namespace

TEST_CASE("pm spectrum: decay, symmetry, zero at origin") {
  spectra::WaveSpectrum ws(1.0, 9.0);
  CHECK(spectra::pm_spectrum_eval(ws, 0.0) == 0.0);
  CHECK(spectra::pm_spectrum_eval(ws, 1e3) < 1e-10);
  CHECK(spectra::pm_spectrum_eval(ws, 0.7) ==
        doctest::Approx(spectra::pm_spectrum_eval(ws, -0.7)));
}

TEST_CASE("pm spectrum: variance matches (Hs/4)^2 for a range of Hs") {
  for (double hs : {0.25, 0.5, 1.0, 2.0, 3.0}) {
    spectra::WaveSpectrum ws(hs, 9.0);
    const double var = variance_by_quadrature(ws);
    const double target = (hs / 4.0) * (hs / 4.0);
    CHECK(std::abs(var - target) < 1e-3 * target);
  }
}

TEST_CASE("pm spectrum: peak value fixed by the variance condition") {
  // Oracle-calibrated scale: c_a = 5 pi Hs^2 / (16 omega_p); at omega_p the
  // density is c_a * exp(-5/4).
  spectra::WaveSpectrum ws(1.0, 9.0);
  const double expected = ws.c_a * std::exp(-1.25);
  CHECK(spectra::pm_spectrum_eval(ws, ws.omega_p) == doctest::Approx(expected));
  CHECK(ws.c_a == doctest::Approx(5.0 * kPi / (16.0 * ws.omega_p)));
}

TEST_CASE("surrogate: default parameters hit the designed fundamental mode") {
  spectra::BuoySurrogateParams p;
  const auto mode = spectra::fundamental_mode(p);
  CHECK(mode.damped_period > 8.5);
  CHECK(mode.damped_period < 9.5);
  CHECK(mode.damping_ratio > 0.004);
  CHECK(mode.damping_ratio < 0.006);
}

TEST_CASE("surrogate: frequency response structure") {
  spectra::BuoySurrogateParams p;
  spectra::WaveSpectrum ws(1.0, 9.0);
  const VectorXd grid = spectra::make_default_grid(ws.tp, 0.5, 2048, 512);
  const auto fr = spectra::build_surrogate(p, ws, grid);

  SUBCASE("zuv vanishes at omega = 0") { CHECK(fr.zuv[0].norm() == 0.0); }

  SUBCASE("zuv = j omega zud at every grid point") {
    for (int i = 0; i < grid.size(); i += 37) {
      const auto lhs = fr.zuv[i];
      const auto rhs = std::complex<double>(0.0, grid[i]) * fr.zud[i];
      CHECK((lhs - rhs).norm() <= 1e-14 * (1.0 + lhs.norm()));
    }
  }

  SUBCASE("hermitian part of zuv is PSD everywhere") {
    for (int i = 0; i < grid.size(); ++i) {
      const double e =
          (fr.zuv[i] + fr.zuv[i].adjoint()).real().eigenvalues().real().minCoeff();
      CHECK(e >= -1e-12);
    }
  }

  SUBCASE("no measurement offset means no phase delay") {
    spectra::BuoySurrogateParams p0 = p;
    p0.d_a = 0.0;
    const auto fr0 = spectra::build_surrogate(p0, ws, grid);
    spectra::BuoySurrogateParams p1 = p;
    p1.d_a = 50.0;
    const auto fr1 = spectra::build_surrogate(p1, ws, grid);
    for (int i = 1; i < grid.size(); i += 97) {
      if (grid[i] > 3.0) continue;  // excitation has rolled off to zero
      CHECK(std::abs(std::abs(fr1.zafd[i](0)) - std::abs(fr0.zafd[i](0))) <=
            1e-12 * std::abs(fr0.zafd[i](0)));
      CHECK(std::abs(fr1.zafd[i](0) - fr0.zafd[i](0)) > 0.0);
    }
  }

  SUBCASE("joint spectrum is rank-1 PSD with S_a in the corner") {
    for (int i = 1; i < grid.size(); i += 113) {
      const auto s = spectra::joint_spectrum(fr, i);
      CHECK(std::abs(s(1, 1).real() - fr.sa[i]) <= 1e-14 * (1.0 + fr.sa[i]));
      CHECK(std::abs(s(1, 1).imag()) <= 1e-16);
      // hermitian
      CHECK((s - s.adjoint()).norm() <= 1e-14 * (1.0 + s.norm()));
      // rank <= 1: determinant of the 2x2 vanishes
      CHECK(std::abs((s(0, 0) * s(1, 1) - s(0, 1) * s(1, 0))) <=
            1e-12 * (1.0 + s.norm() * s.norm()));
      CHECK(s.trace().real() >= 0.0);
    }
  }

  SUBCASE("zero sea spectrum gives zero joint spectrum") {
    spectra::PlantFrequencyResponse frz = fr;
    frz.sa.setZero();
    CHECK(spectra::joint_spectrum(frz, 100).norm() == 0.0);
  }
}

TEST_CASE("surrogate: rejects bad grids and parameters") {
  spectra::BuoySurrogateParams p;
  spectra::WaveSpectrum ws(1.0, 9.0);
  VectorXd bad(3);
  bad << 0.1, 0.2, 0.3;  // missing zero
  CHECK_THROWS(spectra::build_surrogate(p, ws, bad));
  spectra::BuoySurrogateParams neg = p;
  neg.m_b = -1.0;
  CHECK_THROWS(spectra::build_surrogate(neg, ws, spectra::make_grid(5.0, 64)));
}
