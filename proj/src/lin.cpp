#include "wec/lin.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

namespace wec::lin {

double spectral_radius(const MatrixXd& a) {
  if (a.rows() == 0) return 0.0;
  return a.eigenvalues().cwiseAbs().maxCoeff();
}

double min_sym_eig(const MatrixXd& a) {
  if (a.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (a + a.transpose()),
                                             Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double min_herm_eig(const Eigen::MatrixXcd& a) {
  if (a.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (a + a.adjoint()),
                                                     Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

MatrixXd solve_dlyap(const MatrixXd& a, const MatrixXd& q) {
  const int n = int(a.rows());
  if (n == 0) return MatrixXd(0, 0);
  if (a.rows() != a.cols() || q.rows() != n || q.cols() != n)
    throw std::invalid_argument("solve_dlyap: dimension mismatch");
  if (spectral_radius(a) >= 1.0)
    throw std::invalid_argument("solve_dlyap: map is not Schur");

  // vec(P - A'PA) = (I - A' (x) A') vec(P) = vec(Q), column-major vec.
  const MatrixXd at = a.transpose();
  MatrixXd big = MatrixXd::Identity(n * n, n * n);
  for (int cb = 0; cb < n; ++cb)      // block column
    for (int rb = 0; rb < n; ++rb)    // block row
      big.block(rb * n, cb * n, n, n) -= a(cb, rb) * at;

  Eigen::VectorXd vq(n * n);
  for (int c = 0; c < n; ++c) vq.segment(c * n, n) = q.col(c);
  Eigen::VectorXd vp = big.partialPivLu().solve(vq);
  MatrixXd p(n, n);
  for (int c = 0; c < n; ++c) p.col(c) = vp.segment(c * n, n);
  p = 0.5 * (p + p.transpose());

  const double res = (p - a.transpose() * p * a - q).norm();
  if (!(res <= 1e-9 * (1.0 + p.norm())))
    throw std::runtime_error("solve_dlyap: residual too large");
  return p;
}

namespace {

double dare_residual(const MatrixXd& a, const MatrixXd& b, const MatrixXd& q,
                     const MatrixXd& r, const MatrixXd& s, const MatrixXd& x) {
  const MatrixXd m = r + b.transpose() * x * b;
  const MatrixXd g = a.transpose() * x * b + s;
  const MatrixXd res =
      a.transpose() * x * a + q - g * m.ldlt().solve(g.transpose()) - x;
  return res.norm() / (1.0 + x.norm());
}

// One Newton (Kleinman) step: with gain K fixed, solve the Stein equation
// for the closed loop A - BK.
std::optional<MatrixXd> newton_step(const MatrixXd& a, const MatrixXd& b,
                                    const MatrixXd& q, const MatrixXd& r,
                                    const MatrixXd& s, const MatrixXd& k) {
  const MatrixXd acl = a - b * k;
  if (spectral_radius(acl) >= 1.0) return std::nullopt;
  const MatrixXd qk = q + k.transpose() * r * k - s * k -
                      k.transpose() * s.transpose();
  try {
    return solve_dlyap(acl, 0.5 * (qk + qk.transpose()));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

MatrixXd gain_from(const MatrixXd& a, const MatrixXd& b, const MatrixXd& r,
                   const MatrixXd& s, const MatrixXd& x) {
  const MatrixXd m = r + b.transpose() * x * b;
  return m.ldlt().solve(b.transpose() * x * a + s.transpose());
}

}  // namespace

DareResult solve_dare(const MatrixXd& a, const MatrixXd& b, const MatrixXd& q,
                      const MatrixXd& r, const MatrixXd& s, int max_doubling,
                      double tol) {
  const int n = int(a.rows());
  DareResult out;
  if (n == 0) {
    out.x = MatrixXd(0, 0);
    out.k = MatrixXd(b.cols(), 0);
    out.converged = true;
    return out;
  }

  // Eliminate the cross term: Abar = A - B R^{-1} S', Qbar = Q - S R^{-1} S'.
  const Eigen::LDLT<MatrixXd> rldl(r);
  const MatrixXd rinv_st = rldl.solve(s.transpose());
  const MatrixXd abar = a - b * rinv_st;
  MatrixXd qbar = q - s * rinv_st;
  qbar = 0.5 * (qbar + qbar.transpose());

  // Structure-preserving doubling on (Ak, Gk, Hk).
  MatrixXd ak = abar;
  MatrixXd gk = b * rldl.solve(b.transpose());
  MatrixXd hk = qbar;
  bool ok = false;
  for (int it = 0; it < max_doubling; ++it) {
    const MatrixXd w = MatrixXd::Identity(n, n) + gk * hk;
    const Eigen::PartialPivLU<MatrixXd> wlu(w);
    // Guard: doubling can break down for indefinite Qbar.
    const double rcond_proxy = wlu.matrixLU().diagonal().cwiseAbs().minCoeff();
    if (!std::isfinite(rcond_proxy) || rcond_proxy < 1e-14) break;
    const MatrixXd v1 = wlu.solve(ak);
    const MatrixXd v2 = wlu.solve(gk.transpose()).transpose();
    const MatrixXd hnext = hk + ak.transpose() * hk * v1;
    const MatrixXd gnext = gk + ak * v2 * ak.transpose();
    const MatrixXd anext = ak * v1;
    const double step = (hnext - hk).norm() / (1.0 + hnext.norm());
    ak = anext;
    gk = gnext;
    hk = 0.5 * (hnext + hnext.transpose());
    if (!hk.allFinite()) break;
    if (step < 1e-15) {
      ok = true;
      break;
    }
  }

  // A candidate is acceptable only if it is the stabilizing solution with a
  // positive-definite inner term.
  auto acceptable = [&](const MatrixXd& x) {
    if (!x.allFinite()) return false;
    if (min_sym_eig(r + b.transpose() * x * b) <= 0.0) return false;
    const MatrixXd k = gain_from(a, b, r, s, x);
    if (spectral_radius(a - b * k) >= 1.0) return false;
    return dare_residual(a, b, q, r, s, x) < 1e-5;
  };

  MatrixXd x;
  bool have = ok && acceptable(hk);
  if (have) {
    x = hk;
  } else {
    // Fixed-point Riccati difference iteration from X = 0.  Converges to the
    // stabilizing solution for open-loop-stable A, which holds for every
    // plant this library builds.
    if (spectral_radius(a) >= 1.0)
      throw std::runtime_error("solve_dare: doubling failed and A not Schur");
    x = MatrixXd::Zero(n, n);
    for (int it = 0; it < 500000; ++it) {
      const MatrixXd m = r + b.transpose() * x * b;
      if (min_sym_eig(m) <= 0.0)
        throw std::runtime_error("solve_dare: inner term lost definiteness");
      const MatrixXd g = a.transpose() * x * b + s;
      MatrixXd xn = a.transpose() * x * a + q - g * m.ldlt().solve(g.transpose());
      xn = 0.5 * (xn + xn.transpose());
      const double step = (xn - x).norm() / (1.0 + xn.norm());
      x = xn;
      if (step < 1e-11) break;
    }
  }

  // Newton refinement.
  MatrixXd k = gain_from(a, b, r, s, x);
  double res = dare_residual(a, b, q, r, s, x);
  for (int it = 0; it < 40 && res > tol; ++it) {
    auto xn = newton_step(a, b, q, r, s, k);
    if (!xn) break;
    const double rn = dare_residual(a, b, q, r, s, *xn);
    if (!(rn < res)) break;
    x = *xn;
    k = gain_from(a, b, r, s, x);
    res = rn;
  }

  out.x = 0.5 * (x + x.transpose());
  out.k = k;
  out.residual = res;
  out.converged = res <= 1e-8 && spectral_radius(a - b * k) < 1.0 &&
                  min_sym_eig(r + b.transpose() * out.x * b) > 0.0;
  return out;
}

MatrixXd left_null_basis(const MatrixXd& m, double rel_tol) {
  Eigen::JacobiSVD<MatrixXd> svd(m, Eigen::ComputeFullU);
  const auto& sv = svd.singularValues();
  const double thresh = sv.size() ? sv(0) * rel_tol : 0.0;
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > thresh) ++rank;
  MatrixXd basis = svd.matrixU().rightCols(m.rows() - rank).transpose();
  for (int i = 0; i < basis.rows(); ++i) {
    int j;
    basis.row(i).cwiseAbs().maxCoeff(&j);
    if (basis(i, j) < 0) basis.row(i) = -basis.row(i);
  }
  return basis;
}

MatrixXd right_null_basis(const MatrixXd& m, double rel_tol) {
  return left_null_basis(m.transpose(), rel_tol).transpose();
}

MatrixXd observable_rows(const MatrixXd& a, const MatrixXd& c, double rel_tol) {
  const int n = int(a.rows());
  MatrixXd obs(c.rows() * n, n);
  MatrixXd ca = c;
  for (int i = 0; i < n; ++i) {
    obs.middleRows(i * c.rows(), c.rows()) = ca;
    ca = ca * a;
  }
  Eigen::JacobiSVD<MatrixXd> svd(obs, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double thresh = sv.size() ? sv(0) * rel_tol : 0.0;
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv(i) > thresh) ++rank;
  return svd.matrixV().leftCols(rank).transpose();
}

MatrixXd psd_sqrt(const MatrixXd& s, double clamp_tol) {
  if (s.rows() == 0) return s;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (s + s.transpose()));
  VectorXd lam = es.eigenvalues();
  const double floor_val = -clamp_tol * std::max(1.0, lam.cwiseAbs().maxCoeff());
  for (int i = 0; i < lam.size(); ++i) {
    if (lam(i) < floor_val)
      throw std::invalid_argument("psd_sqrt: matrix is indefinite");
    lam(i) = std::sqrt(std::max(lam(i), 0.0));
  }
  return es.eigenvectors() * lam.asDiagonal();
}

}  // namespace wec::lin
