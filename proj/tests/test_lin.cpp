#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "wec/lin.hpp"

using namespace wec;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {
MatrixXd random_schur(int n, std::mt19937_64& rng, double radius = 0.9) {
  std::normal_distribution<double> g(0.0, 1.0);
  MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = g(rng);
  const double r = lin::spectral_radius(a);
  return a * (radius / r);
}

MatrixXd random_psd(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  MatrixXd b(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) b(i, j) = g(rng);
  return b * b.transpose();
}
}  // namespace

TEST_CASE("dlyap: zero forcing gives zero") {
  std::mt19937_64 rng(7);
  const MatrixXd a = random_schur(5, rng);
  CHECK(lin::solve_dlyap(a, MatrixXd::Zero(5, 5)).norm() == 0.0);
}

TEST_CASE("dlyap: scalar closed form q/(1-a^2)") {
  MatrixXd a(1, 1), q(1, 1);
  a << 0.5;
  q << 1.0;
  CHECK(lin::solve_dlyap(a, q)(0, 0) == doctest::Approx(4.0 / 3.0));
}

TEST_CASE("dlyap: matches truncated series oracle on random instances") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 5; ++trial) {
    const MatrixXd a = random_schur(5, rng, 0.8);
    const MatrixXd q = random_psd(5, rng);
    const MatrixXd p = lin::solve_dlyap(a, q);

    MatrixXd series = MatrixXd::Zero(5, 5);
    MatrixXd ak = MatrixXd::Identity(5, 5);
    for (int k = 0; k < 400; ++k) {
      series += ak.transpose() * q * ak;
      ak = a * ak;
    }
    CHECK((p - series).norm() <= 1e-8 * (1.0 + series.norm()));
  }
}

TEST_CASE("dlyap: rejects non-Schur maps") {
  MatrixXd a(2, 2);
  a << 1.1, 0.0, 0.0, 0.2;
  CHECK_THROWS(lin::solve_dlyap(a, MatrixXd::Identity(2, 2)));
}

TEST_CASE("dare: scalar fixed-point oracle") {
  // x = a^2 x + q - (a x b + s)^2/(r + b^2 x), solved by iteration.
  const double a = 0.5, b = 1.0, q = 0.7, r = 1.0, s = 0.2;
  double x = 0.0;
  for (int i = 0; i < 10000; ++i)
    x = a * x * a + q - (a * x * b + s) * (a * x * b + s) / (r + b * x * b);
  MatrixXd am(1, 1), bm(1, 1), qm(1, 1), rm(1, 1), sm(1, 1);
  am << a;
  bm << b;
  qm << q;
  rm << r;
  sm << s;
  const auto res = lin::solve_dare(am, bm, qm, rm, sm);
  CHECK(res.converged);
  CHECK(res.x(0, 0) == doctest::Approx(x).epsilon(1e-10));
}

TEST_CASE("dare: random stable systems satisfy the equation and stabilize") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 8; ++trial) {
    const int n = 4 + trial % 3;
    const MatrixXd a = random_schur(n, rng, 0.95);
    MatrixXd b(n, 2);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < 2; ++j) b(i, j) = g(rng);
    const MatrixXd q = random_psd(n, rng);
    const MatrixXd r = random_psd(2, rng) + 2.0 * MatrixXd::Identity(2, 2);
    MatrixXd s = MatrixXd::Zero(n, 2);
    const auto res = lin::solve_dare(a, b, q, r, s);
    CHECK(res.converged);
    CHECK(res.residual <= 1e-9);
    CHECK(lin::spectral_radius(a - b * res.k) < 1.0);
    // PSD solution for PSD weights
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(res.x, Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues().minCoeff() >= -1e-9 * (1.0 + res.x.norm()));
  }
}

TEST_CASE("null bases: orthogonality, determinism, sign convention") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 1.0);
  MatrixXd b(6, 2);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 2; ++j) b(i, j) = g(rng);
  const MatrixXd perp = lin::left_null_basis(b);
  CHECK(perp.rows() == 4);
  CHECK((perp * b).norm() <= 1e-12);
  CHECK((perp * perp.transpose() - MatrixXd::Identity(4, 4)).norm() <= 1e-12);
  const MatrixXd perp2 = lin::left_null_basis(b);
  CHECK((perp - perp2).norm() == 0.0);
  for (int i = 0; i < perp.rows(); ++i) {
    int j;
    perp.row(i).cwiseAbs().maxCoeff(&j);
    CHECK(perp(i, j) > 0.0);
  }
}

TEST_CASE("observable rows: detects unobservable block") {
  MatrixXd a = MatrixXd::Zero(3, 3);
  a << 0.5, 0.0, 0.0, 0.0, 0.3, 0.0, 0.0, 0.0, 0.2;
  MatrixXd c(1, 3);
  c << 1.0, 1.0, 0.0;  // third state unobservable
  const MatrixXd e = lin::observable_rows(a, c);
  CHECK(e.rows() == 2);
  // rows annihilate nothing in the observable plane and kill e3 direction
  VectorXd e3 = VectorXd::Zero(3);
  e3(2) = 1.0;
  CHECK((e * e3).norm() <= 1e-12);
}

TEST_CASE("psd sqrt: reproduces the matrix") {
  std::mt19937_64 rng(5);
  const MatrixXd s = random_psd(4, rng);
  const MatrixXd l = lin::psd_sqrt(s);
  CHECK((l * l.transpose() - s).norm() <= 1e-10 * (1.0 + s.norm()));
}
