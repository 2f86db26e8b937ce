#include "wec/synthesis.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace wec::synthesis {

namespace {
constexpr double kPi = 3.14159265358979323846;
using Cplx = std::complex<double>;
}  // namespace

RiccatiSolution solve_kyp_riccati(const DiscretePlant& plant,
                                  const MatrixXd& r) {
  const int n = plant.n();
  const int np = plant.n_p();
  if (r.rows() != np || r.cols() != np)
    throw std::invalid_argument("solve_kyp_riccati: R dimension mismatch");
  if ((r - r.transpose()).norm() > 1e-12 * (1.0 + r.norm()) ||
      lin::min_sym_eig(r + r.transpose()) <= 0.0)
    throw std::invalid_argument("solve_kyp_riccati: R must be symmetric PD");

  const MatrixXd duq = plant.d_uq();
  const MatrixXd cq = plant.c_q();
  const MatrixXd rtil = r + 0.5 * (duq + duq.transpose());

  // W solves the doubled/cross-term DARE after the sign change X = -W.
  const lin::DareResult dr = lin::solve_dare(
      plant.a, plant.b_u, MatrixXd::Zero(n, n), rtil, 0.5 * cq.transpose());
  if (!dr.converged)
    throw std::runtime_error("solve_kyp_riccati: DARE solver did not converge");

  RiccatiSolution sol;
  sol.w = -dr.x;
  sol.w = 0.5 * (sol.w + sol.w.transpose());
  sol.m = rtil - plant.b_u.transpose() * sol.w * plant.b_u;
  sol.m = 0.5 * (sol.m + sol.m.transpose());
  sol.f = -dr.k;

  if (lin::min_sym_eig(sol.m) <= 0.0)
    throw std::runtime_error(
        "solve_kyp_riccati: M is not positive definite (non-PR plant?)");
  if (lin::min_sym_eig(sol.w) < -1e-8 * (1.0 + sol.w.norm()))
    throw std::runtime_error("solve_kyp_riccati: W is indefinite");
  if (lin::spectral_radius(plant.a + plant.b_u * sol.f) >= 1.0)
    throw std::runtime_error("solve_kyp_riccati: closed loop not Schur");

  const MatrixXd res =
      sol.w - plant.a.transpose() * sol.w * plant.a -
      sol.f.transpose() * sol.m * sol.f;
  sol.residual = res.norm() / (1.0 + sol.w.norm());
  sol.p_bar =
      (plant.b_w.transpose() * sol.w * plant.b_w * plant.s_w).trace();
  return sol;
}

StallRealization build_stall(const DiscretePlant& plant) {
  const int n = plant.n();
  const int np = plant.n_p();
  const MatrixXd duq = plant.d_uq();
  if (std::abs(duq.determinant()) < 1e-14)
    throw std::runtime_error("build_stall: D_uq is singular");

  StallRealization st;
  st.bu_perp = lin::left_null_basis(plant.b_u);
  st.cd_perp = lin::right_null_basis(plant.c_d);
  if (st.bu_perp.rows() != n - np || st.cd_perp.cols() != n - np)
    throw std::runtime_error("build_stall: unexpected null-space dimensions");

  MatrixXd stack(n, n);
  stack.topRows(np) = plant.c_d;
  stack.bottomRows(n - np) = st.bu_perp;
  const Eigen::FullPivLU<MatrixXd> lu(stack);
  if (!lu.isInvertible())
    throw std::runtime_error(
        "build_stall: [C_d; B_u_perp] singular - inconsistent with C_d B_u = T D_uq");

  const MatrixXd bc = st.bu_perp * st.cd_perp;  // (n-np) x (n-np)
  st.c_s = st.cd_perp * bc.partialPivLu().solve(
                            MatrixXd::Identity(n - np, n - np));
  st.d_ds = plant.b_u * duq.partialPivLu().solve(
                            MatrixXd::Identity(np, np)) /
            plant.t_samp;
  st.d_ws = -st.d_ds * plant.d_wd();
  st.b_ds = st.bu_perp * plant.a * st.d_ds;
  st.b_ws = st.bu_perp * plant.b_w - st.b_ds * plant.d_wd();
  st.a_s = st.bu_perp * plant.a * st.c_s;

  const MatrixXd chk = st.bu_perp * st.c_s;
  if ((chk - MatrixXd::Identity(n - np, n - np)).norm() > 1e-9 * (n - np))
    throw std::runtime_error("build_stall: coordinate-change identity failed");
  return st;
}

double TerminalPenalty::eval(const VectorXd& x) const {
  double acc = quad(x);
  int row = 0;
  for (size_t g = 0; g < group_sizes.size(); ++g) {
    double t = -std::numeric_limits<double>::infinity();
    for (int r = 0; r < group_sizes[g]; ++r, ++row)
      t = std::max(t, gauge_rows.row(row).dot(x));
    acc += group_weights(g) * t;
  }
  return acc;
}

double TerminalPenalty::eval_modal(const VectorXd& x) const {
  double acc = quad(x);
  if (c_f.rows() > 0) acc += (c_f * x.cast<Cplx>()).cwiseAbs().sum();
  return acc;
}

TerminalPenalty build_terminal_penalty(const DiscretePlant& plant,
                                       const RiccatiSolution& ricc,
                                       const StallRealization& stall,
                                       double mu, const VectorXd& v_d,
                                       const VectorXd& u_max) {
  if (mu <= 0.0) throw std::invalid_argument("terminal penalty: mu must be > 0");
  const int n = plant.n();
  const int ns = stall.n_s();
  TerminalPenalty tp;
  tp.mu = mu;
  tp.v_d = v_d;

  if (ns == 0) {
    tp.q_f = MatrixXd::Zero(n, n);
    tp.q_f_rows = MatrixXd(0, n);
    tp.g_modal = VectorXd(0);
    tp.c_f = MatrixXcd(0, n);
    tp.gauge_rows = MatrixXd(0, n);
    tp.group_weights = VectorXd(0);
    return tp;
  }

  const MatrixXd duq_inv =
      plant.d_uq().partialPivLu().solve(MatrixXd::Identity(plant.n_p(), plant.n_p()));
  const MatrixXd cq = plant.c_q();
  const MatrixXd feed = ricc.f + duq_inv * cq;  // u deviation from Fx when stalled

  tp.z_lyap = lin::solve_dlyap(
      stall.a_s, stall.c_s.transpose() * feed.transpose() * ricc.m * feed * stall.c_s);
  const MatrixXd ustall_map = duq_inv * cq * stall.c_s;  // u per zeta
  tp.x_lyap = lin::solve_dlyap(stall.a_s, ustall_map.transpose() * ustall_map);
  tp.q_f = stall.bu_perp.transpose() * (tp.z_lyap + 0.25 * mu * tp.x_lyap) *
           stall.bu_perp;
  tp.q_f = 0.5 * (tp.q_f + tp.q_f.transpose());
  tp.q_f_rows =
      lin::psd_sqrt(tp.z_lyap + 0.25 * mu * tp.x_lyap).transpose() *
      stall.bu_perp;

  Eigen::EigenSolver<MatrixXd> es(stall.a_s);
  tp.pi = es.eigenvectors();
  tp.lambda = es.eigenvalues();
  {
    Eigen::JacobiSVD<MatrixXcd> svd(tp.pi);
    tp.pi_cond = svd.singularValues()(0) /
                 svd.singularValues()(svd.singularValues().size() - 1);
  }
  if (!(tp.pi_cond < 1e6))
    throw std::runtime_error(
        "build_terminal_penalty: pinned-stroke dynamics near-defective "
        "(eigenvector condition number >= 1e6)");
  const double lam_max = tp.lambda.cwiseAbs().maxCoeff();
  if (lam_max >= 1.0 - 1e-9)
    throw std::runtime_error(
        "build_terminal_penalty: modal contraction factors reach 1");

  const MatrixXcd pinv_bperp =
      tp.pi.partialPivLu().solve(stall.bu_perp.cast<Cplx>());
  const MatrixXcd m_mod =
      (duq_inv * cq * stall.c_s).cast<Cplx>() * tp.pi;  // n_p x n_s
  const VectorXd m_bar = m_mod.cwiseAbs().transpose() * v_d;  // n_s

  tp.g_modal.resize(ns);
  for (int i = 0; i < ns; ++i)
    tp.g_modal(i) = m_bar(i) / (1.0 - std::abs(tp.lambda(i)));
  tp.c_f = tp.g_modal.asDiagonal() * pinv_bperp;

  // Polygonal gauges: one group per real eigenvalue or conjugate pair.
  std::vector<MatrixXd> rows;
  std::vector<int> sizes;
  std::vector<double> weights;
  int total_rows = 0;
  for (int i = 0; i < ns; ++i) {
    const Cplx lam = tp.lambda(i);
    const double im_tol = 1e-12 * (1.0 + std::abs(lam));
    if (lam.imag() < -im_tol) continue;  // conjugate handled by its partner
    const bool is_real = std::abs(lam.imag()) <= im_tol;
    const double mult = is_real ? 1.0 : 2.0;
    const double mod = std::abs(lam);

    int m_dirs = 2;
    if (!is_real) {
      m_dirs = 0;
      for (int m = 8; m <= 512; m *= 2) {
        const double sec = 1.0 / std::cos(kPi / m);
        if (sec * mod <= 1.0 - 0.25 * (1.0 - mod)) {
          m_dirs = m;
          break;
        }
      }
      if (m_dirs == 0)
        throw std::runtime_error(
            "build_terminal_penalty: mode too lightly damped for a "
            "polygonal gauge");
    }
    const double sec = is_real ? 1.0 : 1.0 / std::cos(kPi / m_dirs);
    const double cosm = 1.0 / sec;
    const double w = mult * m_bar(i) / (cosm * (1.0 - sec * mod));
    if (w == 0.0) continue;  // no diode-loss weight on this mode

    const VectorXcd v = pinv_bperp.row(i).transpose();
    MatrixXd dir_rows(m_dirs, n);
    for (int k = 0; k < m_dirs; ++k) {
      const double th = 2.0 * kPi * k / m_dirs;
      dir_rows.row(k) = (std::cos(th) * v.real() + std::sin(th) * v.imag())
                            .transpose();
    }
    rows.push_back(dir_rows);
    sizes.push_back(m_dirs);
    weights.push_back(w);
    total_rows += m_dirs;
  }

  tp.gauge_rows = MatrixXd(total_rows, n);
  int at = 0;
  for (const auto& blk : rows) {
    tp.gauge_rows.middleRows(at, int(blk.rows())) = blk;
    at += int(blk.rows());
  }
  tp.group_sizes = sizes;
  tp.group_weights =
      Eigen::Map<const VectorXd>(weights.data(), long(weights.size()));
  return tp;
}

double stage_cost(const RiccatiSolution& ricc, double mu, const VectorXd& v_d,
                  const VectorXd& u_max, const VectorXd& x, const VectorXd& u,
                  const VectorXd& b) {
  const VectorXd xi = u - ricc.f * x;
  return xi.dot(ricc.m * xi) + v_d.dot(u.cwiseAbs()) + mu * u_max.dot(b);
}

double truncated_stall_cost(const DiscretePlant& plant,
                            const RiccatiSolution& ricc,
                            const StallRealization& stall, double mu,
                            const VectorXd& v_d, const VectorXd& u_max,
                            const VectorXd& x, int steps) {
  const MatrixXd duq_inv = plant.d_uq().partialPivLu().solve(
      MatrixXd::Identity(plant.n_p(), plant.n_p()));
  const MatrixXd cq = plant.c_q();
  VectorXd zeta = stall.bu_perp * x;
  double acc = 0.0;
  for (int m = 0; m < steps; ++m) {
    const VectorXd xm = stall.c_s * zeta;
    const VectorXd um = -duq_inv * cq * xm;
    const VectorXd bm = (um.cwiseAbs() - u_max).cwiseMax(0.0);
    acc += stage_cost(ricc, mu, v_d, u_max, xm, um, bm);
    zeta = stall.a_s * zeta;
  }
  return acc;
}

TerminalPenaltyReport verify_terminal_penalty(
    const DiscretePlant& plant, const RiccatiSolution& ricc,
    const StallRealization& stall, const TerminalPenalty& tp,
    const VectorXd& u_max, int samples, unsigned seed, int truncation_steps,
    double bound_tol, double decrement_tol) {
  TerminalPenaltyReport rep;
  rep.samples = samples;
  rep.worst_bound_margin = std::numeric_limits<double>::infinity();
  rep.worst_decrement_margin = std::numeric_limits<double>::infinity();

  const MatrixXd duq_inv = plant.d_uq().partialPivLu().solve(
      MatrixXd::Identity(plant.n_p(), plant.n_p()));
  const MatrixXd cq = plant.c_q();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int ns = stall.n_s();

  for (int s = 0; s < samples; ++s) {
    // Stroke-pinned states: x = C_s zeta, which is where the penalty is used
    // (the terminal equality constraint enforces C_d x = 0).
    VectorXd zeta(ns);
    for (int i = 0; i < ns; ++i) zeta(i) = gauss(rng);
    const double scale = std::pow(10.0, (s % 7) - 3);  // sweep magnitudes
    const VectorXd x = scale * (stall.c_s * zeta);

    const double jf = tp.eval(x);
    const double rho_n = truncated_stall_cost(plant, ricc, stall, tp.mu,
                                              tp.v_d, u_max, x, truncation_steps);
    const double bound_margin = jf + bound_tol * (1.0 + jf) - rho_n;
    rep.worst_bound_margin = std::min(rep.worst_bound_margin, bound_margin);
    if (bound_margin < 0.0) ++rep.bound_failures;

    const VectorXd u = -duq_inv * cq * x;
    const VectorXd b = (u.cwiseAbs() - u_max).cwiseMax(0.0);
    const VectorXd x_next = stall.c_s * (stall.a_s * (stall.bu_perp * x));
    const double dec_margin =
        jf + decrement_tol * (1.0 + jf) - tp.eval(x_next) -
        stage_cost(ricc, tp.mu, tp.v_d, u_max, x, u, b);
    rep.worst_decrement_margin = std::min(rep.worst_decrement_margin, dec_margin);
    if (dec_margin < 0.0) ++rep.decrement_failures;
  }
  rep.passed = rep.bound_failures == 0 && rep.decrement_failures == 0;
  return rep;
}

}  // namespace wec::synthesis
