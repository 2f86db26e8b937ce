#include "wec/ssid.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "wec/lin.hpp"

namespace wec::ssid {

namespace {
constexpr double kPi = 3.14159265358979323846;
using Cplx = std::complex<double>;

MatrixXcd transfer_at(const MatrixXd& a, const MatrixXd& b, const MatrixXd& c,
                      double omega_d) {
  const int n = int(a.rows());
  if (n == 0) return MatrixXcd::Zero(c.rows(), b.cols());
  MatrixXcd zi = std::polar(1.0, omega_d) * MatrixXcd::Identity(n, n) -
                 a.cast<Cplx>();
  return c.cast<Cplx>() * zi.partialPivLu().solve(b.cast<Cplx>());
}

// --- shared-pole rational least squares (vector-fitting iteration) --------

struct PoleSet {
  std::vector<double> re;   // real poles
  std::vector<Cplx> pairs;  // one representative per conjugate pair, imag > 0

  int basis_size() const { return int(re.size()) + 2 * int(pairs.size()); }
};

// Real-coefficient partial-fraction basis evaluated at z.
VectorXcd basis_at(const PoleSet& ps, Cplx z) {
  VectorXcd phi(ps.basis_size());
  int k = 0;
  for (double p : ps.re) phi(k++) = 1.0 / (z - p);
  for (Cplx p : ps.pairs) {
    const Cplx a = 1.0 / (z - p);
    const Cplx b = 1.0 / (z - std::conj(p));
    phi(k++) = a + b;
    phi(k++) = Cplx(0.0, 1.0) * (a - b);
  }
  return phi;
}

PoleSet initial_poles(int count, double theta_lo, double theta_hi) {
  PoleSet ps;
  int pairs = count / 2;
  if (count % 2 == 1) ps.re.push_back(0.5);
  for (int i = 0; i < pairs; ++i) {
    const double th = pairs == 1
                          ? 0.5 * (theta_lo + theta_hi)
                          : theta_lo + (theta_hi - theta_lo) * i / (pairs - 1.0);
    ps.pairs.push_back(std::polar(0.92, std::max(th, 1e-3)));
  }
  return ps;
}

void cap_modulus(Cplx& p, double cap) {
  const double m = std::abs(p);
  if (m > cap) p *= cap / m;
}

// Relocated poles = zeros of the sigma function 1 + ct' * basis.
PoleSet relocate(const PoleSet& ps, const VectorXd& ct, double cap) {
  const int nb = ps.basis_size();
  MatrixXd a = MatrixXd::Zero(nb, nb);
  VectorXd b = VectorXd::Zero(nb);
  VectorXd c(nb);
  int k = 0;
  for (double p : ps.re) {
    a(k, k) = p;
    b(k) = 1.0;
    c(k) = ct(k);
    ++k;
  }
  for (Cplx p : ps.pairs) {
    a(k, k) = p.real();
    a(k, k + 1) = p.imag();
    a(k + 1, k) = -p.imag();
    a(k + 1, k + 1) = p.real();
    b(k) = 1.0;
    c(k) = 2.0 * ct(k);
    c(k + 1) = 2.0 * ct(k + 1);
    k += 2;
  }
  const MatrixXd m = a - b * c.transpose();
  Eigen::EigenSolver<MatrixXd> es(m);
  PoleSet out;
  std::vector<Cplx> eigs;
  for (int i = 0; i < nb; ++i) eigs.push_back(es.eigenvalues()(i));
  std::sort(eigs.begin(), eigs.end(), [](Cplx x, Cplx y) {
    if (x.real() != y.real()) return x.real() < y.real();
    return x.imag() < y.imag();
  });
  for (Cplx z : eigs) {
    if (std::abs(z.imag()) < 1e-10 * (1.0 + std::abs(z.real()))) {
      double p = z.real();
      if (std::abs(p) > 1.0) p = 1.0 / p;  // reflect into the disk
      p = std::clamp(p, -cap, cap);
      out.re.push_back(p);
    } else if (z.imag() > 0) {
      Cplx p = z;
      const double m2 = std::norm(p);
      if (m2 > 1.0) p = std::conj(p) / m2;  // conjugate-reciprocal reflection
      p = Cplx(p.real(), std::abs(p.imag()));
      cap_modulus(p, cap);
      out.pairs.push_back(p);
    }
  }
  return out;
}

// Data for one fit: grid points z_i with row weights, and the stacked entry
// values H_e(z_i) for n_e matrix entries.
struct FitData {
  std::vector<Cplx> z;
  std::vector<double> weight;
  std::vector<VectorXcd> values;  // per grid point, length n_e
  int n_e = 0;
};

// Residue-only least squares with fixed poles; returns per-basis residue
// coefficients (n_b x n_e) and the fit residual.
MatrixXd residue_ls(const FitData& fd, const PoleSet& ps, double* residual) {
  const int nb = ps.basis_size();
  const int ng = int(fd.z.size());
  MatrixXd phi_r(2 * ng, nb);
  for (int i = 0; i < ng; ++i) {
    const VectorXcd phi = basis_at(ps, fd.z[i]) * fd.weight[i];
    phi_r.row(i) = phi.real().transpose();
    phi_r.row(ng + i) = phi.imag().transpose();
  }
  const Eigen::ColPivHouseholderQR<MatrixXd> qr(phi_r);
  MatrixXd res(nb, fd.n_e);
  double err2 = 0.0, ref2 = 0.0;
  for (int e = 0; e < fd.n_e; ++e) {
    VectorXd rhs(2 * ng);
    for (int i = 0; i < ng; ++i) {
      const Cplx v = fd.values[i](e) * fd.weight[i];
      rhs(i) = v.real();
      rhs(ng + i) = v.imag();
    }
    res.col(e) = qr.solve(rhs);
    err2 += (phi_r * res.col(e) - rhs).squaredNorm();
    ref2 += rhs.squaredNorm();
  }
  if (residual) *residual = std::sqrt(err2 / std::max(ref2, 1e-300));
  return res;
}

// One vector-fitting pass: joint residue/sigma least squares, then pole
// relocation from the sigma coefficients.
PoleSet vf_pass(const FitData& fd, const PoleSet& ps, double cap) {
  const int nb = ps.basis_size();
  const int ng = int(fd.z.size());
  const int ne = fd.n_e;
  const int cols = ne * nb + nb;
  MatrixXd m = MatrixXd::Zero(2 * ng * ne, cols);
  VectorXd rhs(2 * ng * ne);
  for (int i = 0; i < ng; ++i) {
    const VectorXcd phi = basis_at(ps, fd.z[i]);
    for (int e = 0; e < ne; ++e) {
      const Cplx h = fd.values[i](e);
      const int r0 = 2 * (i * ne + e);
      for (int b = 0; b < nb; ++b) {
        const Cplx a = phi(b) * fd.weight[i];
        m(r0, e * nb + b) = a.real();
        m(r0 + 1, e * nb + b) = a.imag();
        const Cplx s = -h * phi(b) * fd.weight[i];
        m(r0, ne * nb + b) = s.real();
        m(r0 + 1, ne * nb + b) = s.imag();
      }
      const Cplx v = h * fd.weight[i];
      rhs(r0) = v.real();
      rhs(r0 + 1) = v.imag();
    }
  }
  const VectorXd sol = m.householderQr().solve(rhs);
  const VectorXd ct = sol.tail(nb);
  return relocate(ps, ct, cap);
}

struct RationalFit {
  PoleSet poles;
  MatrixXd residues;  // n_b x n_e
  double rel_error = 1.0;
};

RationalFit vector_fit(const FitData& fd, int n_basis, int iterations,
                       double cap, double theta_lo, double theta_hi) {
  PoleSet ps = initial_poles(n_basis, theta_lo, theta_hi);
  RationalFit best;
  best.rel_error = std::numeric_limits<double>::infinity();
  for (int it = 0; it < iterations; ++it) {
    ps = vf_pass(fd, ps, cap);
    double err = 0.0;
    const MatrixXd res = residue_ls(fd, ps, &err);
    if (err < best.rel_error) {
      best.poles = ps;
      best.residues = res;
      best.rel_error = err;
    }
    if (err < 1e-12) break;
  }
  if (!std::isfinite(best.rel_error))
    throw std::runtime_error("fit_plant: rational fit did not converge");
  return best;
}

// Gilbert-style real realization of sum_b R_b phi_b(z) with inputs expanded
// column-wise: order = basis_size * n_u.
struct Realization {
  MatrixXd a, b, c;
};

Realization realize(const PoleSet& ps, const MatrixXd& residues, int n_y,
                    int n_u) {
  const int nb = ps.basis_size();
  const int n = nb * n_u;
  Realization r;
  r.a = MatrixXd::Zero(n, n);
  r.b = MatrixXd::Zero(n, n_u);
  r.c = MatrixXd::Zero(n_y, n);
  int s = 0;
  int bidx = 0;
  auto entry = [&](int b, int row, int col) {
    return residues(b, row * n_u + col);  // residues stored row-major entries
  };
  for (double p : ps.re) {
    for (int u = 0; u < n_u; ++u) {
      r.a(s, s) = p;
      r.b(s, u) = 1.0;
      for (int y = 0; y < n_y; ++y) r.c(y, s) = entry(bidx, y, u);
      ++s;
    }
    ++bidx;
  }
  for (Cplx p : ps.pairs) {
    for (int u = 0; u < n_u; ++u) {
      r.a(s, s) = p.real();
      r.a(s, s + 1) = p.imag();
      r.a(s + 1, s) = -p.imag();
      r.a(s + 1, s + 1) = p.real();
      r.b(s, u) = 1.0;
      for (int y = 0; y < n_y; ++y) {
        r.c(y, s) = 2.0 * entry(bidx, y, u);
        r.c(y, s + 1) = 2.0 * entry(bidx + 1, y, u);
      }
      s += 2;
    }
    bidx += 2;
  }
  return r;
}

// --- covariance-based (Hankel) realization of the disturbance block -------

Realization era_realize(const std::vector<MatrixXd>& cov, int order,
                        double cap) {
  const int ny = int(cov.front().rows());
  const int max_use = int(cov.size()) - 2;
  // The Hankel window bounds the slowest resolvable decay, so keep it deep.
  const int q = std::max(2, std::min(600, max_use / 2));
  MatrixXd h0(q * ny, q * ny), h1(q * ny, q * ny);
  for (int i = 0; i < q; ++i)
    for (int j = 0; j < q; ++j) {
      h0.block(i * ny, j * ny, ny, ny) = cov[i + j + 1];
      h1.block(i * ny, j * ny, ny, ny) = cov[i + j + 2];
    }
  Eigen::JacobiSVD<MatrixXd> svd(h0, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const int r = std::min<int>(order, int(svd.singularValues().size()));
  const VectorXd sv = svd.singularValues().head(r);
  const MatrixXd u1 = svd.matrixU().leftCols(r);
  const MatrixXd v1 = svd.matrixV().leftCols(r);
  const VectorXd si = sv.cwiseSqrt().cwiseInverse();
  const VectorXd sq = sv.cwiseSqrt();

  Realization out;
  out.a = si.asDiagonal() * (u1.transpose() * h1 * v1) * si.asDiagonal();
  out.c = (u1 * sq.asDiagonal()).topRows(ny);
  out.b = (sq.asDiagonal() * v1.transpose()).leftCols(ny);

  // Clamp pole moduli inside the disk (Hankel realizations of noisy or
  // truncated covariances can land marginally outside).
  Eigen::EigenSolver<MatrixXd> es(out.a);
  Eigen::VectorXcd lam = es.eigenvalues();
  bool adjust = false;
  for (int i = 0; i < lam.size(); ++i)
    if (std::abs(lam(i)) > cap) adjust = true;
  if (adjust) {
    for (int i = 0; i < lam.size(); ++i) {
      const double m = std::abs(lam(i));
      if (m > cap) lam(i) *= cap / m;
    }
    const Eigen::MatrixXcd v = es.eigenvectors();
    out.a = (v * lam.asDiagonal() * v.inverse()).real();
  }
  return out;
}

// --- assembly helpers ------------------------------------------------------

struct HalfGrid {
  std::vector<int> idx;       // indices into the dfd grid with omega >= 0
  std::vector<Cplx> z;
  std::vector<double> omega;
};

HalfGrid half_grid(const DiscreteFrequencyData& dfd) {
  HalfGrid hg;
  for (int i = 0; i < dfd.omega_grid.size(); ++i) {
    if (dfd.omega_grid[i] < 0.0) continue;
    hg.idx.push_back(i);
    hg.omega.push_back(dfd.omega_grid[i]);
    hg.z.push_back(std::polar(1.0, dfd.omega_grid[i]));
  }
  return hg;
}

}  // namespace

MatrixXd DiscretePlant::c_y() const {
  MatrixXd cy(c_d.rows() + 1, n());
  cy << c_d, c_a;
  return cy;
}

MatrixXd DiscretePlant::d_wd() const {
  MatrixXd d = MatrixXd::Zero(n_p(), n_p() + 1);
  d.leftCols(n_p()).setIdentity();
  return d;
}

MatrixXd DiscretePlant::d_wa() const {
  MatrixXd d = MatrixXd::Zero(1, n_p() + 1);
  d(0, n_p()) = 1.0;
  return d;
}

MatrixXd DiscretePlant::c_q() const {
  return (c_d * (a - MatrixXd::Identity(n(), n()))) / t_samp;
}

MatrixXd DiscretePlant::d_uq() const { return c_d * b_u / t_samp; }

MatrixXd DiscretePlant::d_wq0() const { return (c_d * b_w - d_wd()) / t_samp; }

MatrixXd DiscretePlant::d_wq1() const { return d_wd() / t_samp; }

MatrixXcd DiscretePlant::huq_at(double omega_d) const {
  return d_uq().cast<Cplx>() + transfer_at(a, b_u, c_q(), omega_d);
}

MatrixXcd DiscretePlant::hud_at(double omega_d) const {
  return transfer_at(a, b_u, c_d, omega_d);
}

MatrixXcd DiscretePlant::sigma_at(double omega_d) const {
  const int ny = n_p() + 1;
  MatrixXcd hw = MatrixXcd::Identity(ny, ny) + transfer_at(a, b_w, c_y(), omega_d);
  return hw * s_w.cast<Cplx>() * hw.adjoint();
}

std::vector<MatrixXd> psd_covariances(const DiscreteFrequencyData& dfd,
                                      int max_lag) {
  const int ng = int(dfd.omega_grid.size());
  const int ny = int(dfd.sigma_yf.front().rows());
  std::vector<MatrixXcd> acc(max_lag, MatrixXcd::Zero(ny, ny));
  for (int i = 0; i < ng; ++i) {
    const Cplx step = std::polar(1.0, dfd.omega_grid[i]);
    Cplx phase = 1.0;
    for (int m = 0; m < max_lag; ++m) {
      acc[m] += dfd.sigma_yf[i] * phase;
      phase *= step;
    }
  }
  std::vector<MatrixXd> cov(max_lag);
  for (int m = 0; m < max_lag; ++m) cov[m] = (acc[m] / double(ng)).real();
  return cov;
}

FactorizationResult canonical_factorization(const MatrixXd& a,
                                            const MatrixXd& g,
                                            const MatrixXd& c,
                                            const MatrixXd& r0) {
  // The minimal solution of the spectral-factorization Riccati is the
  // stabilizing solution of a transposed standard DARE with X = -P.
  const int ny = int(c.rows());
  const MatrixXd q0 = MatrixXd::Zero(a.rows(), a.rows());
  const lin::DareResult dr =
      lin::solve_dare(a.transpose(), c.transpose(), q0, r0, g);
  FactorizationResult out;
  out.p = -dr.x;
  out.p = 0.5 * (out.p + out.p.transpose());
  out.s_w = r0 - c * out.p * c.transpose();
  out.s_w = 0.5 * (out.s_w + out.s_w.transpose());
  out.k = dr.k.transpose();
  if (lin::min_sym_eig(out.s_w) <= 0.0)
    throw std::runtime_error(
        "canonical_factorization: innovations covariance not positive");
  if (lin::spectral_radius(a - out.k * c) >= 1.0)
    throw std::runtime_error("canonical_factorization: filter not stable");
  return out;
}

namespace {

// Positive-real enforcement: shift the symmetric part of D_uq upward by
// adjusting B_u, choosing the adjustment to have minimal frequency-response
// footprint away from the feedthrough.  The target profile is strictly
// positive away from Omega = 0 (where H_uq is pinned at zero): the Hermitian
// part must clear floor_eps * sin^2(Omega/2) everywhere on the grid, which
// keeps the pinned-stroke dynamics strictly inside the unit circle.
void project_positive_real(Realization& ru, double t_samp,
                           const HalfGrid& hg, double target_margin,
                           double floor_rel) {
  const int n = int(ru.a.rows());
  const int np = int(ru.c.rows());

  double h_scale = 0.0;
  {
    const MatrixXd cq0 = ru.c * (ru.a - MatrixXd::Identity(n, n)) / t_samp;
    const MatrixXd duq0 = ru.c * ru.b / t_samp;
    for (size_t i = 0; i < hg.omega.size(); i += 8)
      h_scale = std::max(
          h_scale,
          (duq0.cast<Cplx>() + transfer_at(ru.a, ru.b, cq0, hg.omega[i]))
              .norm());
  }
  const double floor_eps = floor_rel * std::max(h_scale, 1e-12);

  // Largest violation of the floor profile (positive value = deficit).
  auto grid_deficit = [&](double* worst_omega) {
    double worst = -std::numeric_limits<double>::infinity();
    const MatrixXd cq = ru.c * (ru.a - MatrixXd::Identity(n, n)) / t_samp;
    const MatrixXd duq = ru.c * ru.b / t_samp;
    for (size_t i = 0; i < hg.omega.size(); ++i) {
      if (hg.omega[i] == 0.0) continue;
      const MatrixXcd h =
          duq.cast<Cplx>() + transfer_at(ru.a, ru.b, cq, hg.omega[i]);
      const double s = std::sin(0.5 * hg.omega[i]);
      const double need = std::max(floor_eps * s * s, target_margin);
      const double def = need - lin::min_herm_eig(h);
      if (def > worst) {
        worst = def;
        if (worst_omega) *worst_omega = hg.omega[i];
      }
    }
    return worst;
  };

  // Quadratic form that measures the off-feedthrough footprint of a B shift.
  MatrixXd footprint = MatrixXd::Zero(n, n);
  for (size_t i = 0; i < hg.omega.size(); i += 4) {
    const MatrixXcd zi =
        std::polar(1.0, hg.omega[i]) * MatrixXcd::Identity(n, n) -
        ru.a.cast<Cplx>();
    const MatrixXcd w = ru.c.cast<Cplx>() * zi.inverse();
    footprint += (w.adjoint() * w).real();
  }
  footprint += 1e-8 * MatrixXd::Identity(n, n);

  double worst = 0.0;
  for (int iter = 0; iter < 60; ++iter) {
    const double deficit = grid_deficit(&worst);
    if (deficit <= 0.0) return;
    const double shift = deficit * 1.10 + 1e-14;
    // min db' * footprint * db  s.t.  C db = T * (shift/2) * I, per column.
    const Eigen::LDLT<MatrixXd> fp(footprint);
    const MatrixXd cfi = ru.c * fp.solve(ru.c.transpose());  // np x np
    const MatrixXd rhs = t_samp * (shift / 2.0) * MatrixXd::Identity(np, np);
    const MatrixXd lam = cfi.ldlt().solve(rhs);
    ru.b += fp.solve(ru.c.transpose()) * lam;
  }
  throw std::runtime_error(
      "fit_plant: positive-real projection failed near omega = " +
      std::to_string(worst));
}

}  // namespace

DiscretePlant fit_plant(const DiscreteFrequencyData& dfd, int order) {
  FitOptions opt;
  opt.order_u = std::max(2, order / 2);
  opt.order_w = order - opt.order_u;
  return fit_plant(dfd, opt);
}

DiscretePlant fit_plant(const DiscreteFrequencyData& dfd,
                        const FitOptions& opt) {
  if (opt.order_u < 2) throw std::invalid_argument("fit_plant: order_u >= 2 required");
  const int np = dfd.n_p();
  const int ny = np + 1;
  const double t = dfd.t_samp;
  const HalfGrid hg = half_grid(dfd);
  const int ng = int(hg.idx.size());

  // ---- deterministic u -> d subsystem: fit Hud with Huq-weighted rows ----
  FitData fu;
  fu.n_e = np * np;
  fu.z = hg.z;
  fu.weight.resize(ng);
  fu.values.resize(ng);
  double peak = 0.0;
  for (int i = 0; i < ng; ++i) {
    const double w = std::max(std::abs(std::polar(1.0, hg.omega[i]) - 1.0), 0.15) / t;
    fu.weight[i] = w;
    VectorXcd v(fu.n_e);
    const MatrixXcd& hud = dfd.hud[hg.idx[i]];
    for (int r = 0; r < np; ++r)
      for (int c = 0; c < np; ++c) v(r * np + c) = hud(r, c);
    fu.values[i] = v;
    peak = std::max(peak, dfd.huq[hg.idx[i]].norm());
  }
  // Concentrate initial poles where the response carries energy.
  double theta_hi = 0.0;
  for (int i = 0; i < ng; ++i)
    if (dfd.huq[hg.idx[i]].norm() > 0.05 * peak)
      theta_hi = std::max(theta_hi, hg.omega[i]);
  theta_hi = std::min(std::max(theta_hi, 0.2), kPi * 0.9);

  const int nb_u = std::max(2, opt.order_u / std::max(1, np));
  const RationalFit fit_u = vector_fit(fu, nb_u, opt.vf_iterations,
                                       opt.pole_cap, 0.02, theta_hi);
  Realization ru = realize(fit_u.poles, fit_u.residues, np, np);
  project_positive_real(ru, t, hg, opt.pr_margin, opt.pr_floor_rel);

  // ---- disturbance subsystem from the joint PSD --------------------------
  double sig_scale = 0.0;
  for (const auto& s : dfd.sigma_yf) sig_scale = std::max(sig_scale, s.norm());

  Realization rw;
  MatrixXd s_w = MatrixXd::Zero(ny, ny);
  MatrixXd k_gain = MatrixXd::Zero(0, ny);
  int nw = 0;
  if (sig_scale > 1e-14 && opt.order_w > 0) {
    const int max_lag = std::min<int>(opt.max_lag, int(dfd.omega_grid.size()) / 2);
    const std::vector<MatrixXd> cov = psd_covariances(dfd, max_lag);
    MatrixXd r0 = 0.5 * (cov[0] + cov[0].transpose());
    r0 += 1e-12 * r0.norm() * MatrixXd::Identity(ny, ny);

    // Half-spectrum samples for the rational route: Phi(z) = R0/2 + sum_m
    // R_m z^-m, so Sigma = Phi + Phi^H on the circle.
    FitData fw;
    fw.n_e = ny * ny;
    fw.z = hg.z;
    fw.weight.assign(ng, 1.0);
    fw.values.resize(ng);
    for (int i = 0; i < ng; ++i) {
      MatrixXcd phi = MatrixXcd::Zero(ny, ny);
      const Cplx step = std::polar(1.0, -hg.omega[i]);
      Cplx phase = 1.0;
      for (int m = 1; m < max_lag; ++m) {
        phase *= step;
        phi += cov[m].cast<Cplx>() * phase;
      }
      VectorXcd v(fw.n_e);
      for (int r = 0; r < ny; ++r)
        for (int c = 0; c < ny; ++c) v(r * ny + c) = phi(r, c);
      fw.values[i] = v;
    }

    auto sigma_error = [&](const Realization& r) {
      // Energy-weighted relative error of the implied PSD before the
      // innovations step: Sigma_fit = R0 + C(zI-A)^{-1}G + (...)^H.
      double num = 0.0, den = 0.0;
      for (int i = 0; i < ng; ++i) {
        const MatrixXcd half = transfer_at(r.a, r.b, r.c, hg.omega[i]);
        const MatrixXcd sig = r0.cast<Cplx>() + half + half.adjoint();
        num += (sig - dfd.sigma_yf[hg.idx[i]]).norm();
        den += dfd.sigma_yf[hg.idx[i]].norm();
      }
      return num / std::max(den, 1e-300);
    };

    // Rational least-squares route and covariance-Hankel route; keep the
    // better fit.
    Realization cand_vf, cand_era;
    double err_vf = std::numeric_limits<double>::infinity();
    double err_era = std::numeric_limits<double>::infinity();
    const int nb_w = std::max(2, opt.order_w / ny);
    try {
      const RationalFit fit_w =
          vector_fit(fw, nb_w, opt.vf_iterations, opt.pole_cap, 0.02, theta_hi);
      cand_vf = realize(fit_w.poles, fit_w.residues, ny, ny);
      err_vf = sigma_error(cand_vf);
    } catch (const std::exception&) {
    }
    try {
      cand_era = era_realize(cov, opt.order_w, opt.pole_cap);
      err_era = sigma_error(cand_era);
    } catch (const std::exception&) {
    }
    if (!std::isfinite(err_vf) && !std::isfinite(err_era))
      throw std::runtime_error("fit_plant: disturbance fit failed");
    const bool use_era =
        opt.prefer_era ? (err_era <= err_vf * 1.25) : (err_era < err_vf);
    Realization chosen = use_era ? cand_era : cand_vf;

    // The rational fit is not exactly positive on the circle where the true
    // spectrum vanishes; lift it with the smallest white floor that restores
    // positivity before factorizing.
    double dip = std::numeric_limits<double>::infinity();
    for (int i = 0; i < ng; ++i) {
      const MatrixXcd half = transfer_at(chosen.a, chosen.b, chosen.c, hg.omega[i]);
      dip = std::min(dip,
                     lin::min_herm_eig(r0.cast<Cplx>() + half + half.adjoint()));
    }
    const double floor_target = 1e-9 * std::max(r0.norm(), 1e-12);
    if (dip < floor_target)
      r0 += (floor_target - dip) * MatrixXd::Identity(ny, ny);

    FactorizationResult fac;
    bool factored = false;
    for (int attempt = 0; attempt < 6 && !factored; ++attempt) {
      try {
        fac = canonical_factorization(chosen.a, chosen.b, chosen.c, r0);
        factored = true;
      } catch (const std::exception&) {
        r0 += (1e-6 * std::pow(10.0, attempt) * r0.norm()) *
              MatrixXd::Identity(ny, ny);
      }
    }
    if (!factored)
      throw std::runtime_error("fit_plant: spectral factorization failed");
    rw = chosen;
    s_w = fac.s_w;
    k_gain = fac.k;
    nw = int(rw.a.rows());
  }

  // ---- assemble the block-diagonal innovations model ----------------------
  const int nu_states = int(ru.a.rows());
  const int n = nu_states + nw;
  DiscretePlant plant;
  plant.t_samp = t;
  plant.a = MatrixXd::Zero(n, n);
  plant.a.topLeftCorner(nu_states, nu_states) = ru.a;
  plant.b_u = MatrixXd::Zero(n, np);
  plant.b_u.topRows(nu_states) = ru.b;
  plant.b_w = MatrixXd::Zero(n, ny);
  plant.c_d = MatrixXd::Zero(np, n);
  plant.c_d.leftCols(nu_states) = ru.c;
  plant.c_a = MatrixXd::Zero(1, n);
  plant.s_w = s_w;
  if (nw > 0) {
    plant.a.bottomRightCorner(nw, nw) = rw.a;
    plant.b_w.bottomRows(nw) = k_gain;
    plant.c_d.rightCols(nw) = rw.c.topRows(np);
    plant.c_a.rightCols(nw) = rw.c.bottomRows(1);
  }
  return plant;
}

ValidationReport validate_plant(const DiscretePlant& plant,
                                const DiscreteFrequencyData& dfd,
                                const ValidationThresholds& tol) {
  ValidationReport rep;
  rep.spectral_radius_a = lin::spectral_radius(plant.a);
  rep.d_uq_sym_min_eig = lin::min_sym_eig(plant.d_uq() + plant.d_uq().transpose());
  const MatrixXd hud1 =
      plant.c_d * (MatrixXd::Identity(plant.n(), plant.n()) - plant.a)
                      .partialPivLu()
                      .solve(plant.b_u);
  rep.hud1_sym_min_eig = lin::min_sym_eig(hud1 + hud1.transpose());

  double pr = std::numeric_limits<double>::infinity();
  double err_huq = 0.0, ref_huq = 0.0;
  double err_sig = 0.0, ref_sig = 0.0;
  for (int i = 0; i < dfd.omega_grid.size(); ++i) {
    if (dfd.omega_grid[i] < 0.0) continue;
    const MatrixXcd h = plant.huq_at(dfd.omega_grid[i]);
    pr = std::min(pr, lin::min_herm_eig(h));
    err_huq = std::max(err_huq, (h - dfd.huq[i]).norm());
    ref_huq = std::max(ref_huq, dfd.huq[i].norm());
    const MatrixXcd s = plant.sigma_at(dfd.omega_grid[i]);
    err_sig += (s - dfd.sigma_yf[i]).norm();
    ref_sig += dfd.sigma_yf[i].norm();
  }
  rep.min_pr_eig = pr;
  rep.fit_error_huq = err_huq / std::max(ref_huq, 1e-300);
  rep.fit_error_sigma = ref_sig > 1e-300 ? err_sig / ref_sig : 0.0;

  rep.passed = rep.spectral_radius_a <= tol.max_spectral_radius &&
               rep.min_pr_eig >= tol.min_pr_eig &&
               rep.d_uq_sym_min_eig > tol.min_d_uq_sym_eig &&
               rep.hud1_sym_min_eig > tol.min_hud1_sym_eig &&
               rep.fit_error_huq <= tol.max_fit_error_huq &&
               rep.fit_error_sigma <= tol.max_fit_error_sigma;
  return rep;
}

InnovationsStep innovations_step(const DiscretePlant& plant, const VectorXd& x,
                                 const VectorXd& u, const VectorXd& y) {
  InnovationsStep out;
  out.w = y - plant.c_y() * x;
  out.x_next = plant.a * x + plant.b_u * u + plant.b_w * out.w;
  return out;
}

}  // namespace wec::ssid
