#include "wec/qp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace wec::qp {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

void QuadraticProgram::validate() const {
  const int m = num_vars();
  if (h.cols() != m) throw std::invalid_argument("qp: H must be square");
  if (f.size() != m) throw std::invalid_argument("qp: f size mismatch");
  if ((h - h.transpose()).cwiseAbs().maxCoeff() >
      1e-10 * (1.0 + h.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("qp: H must be symmetric");
  if (a_eq.rows() != b_eq.size() || (a_eq.rows() > 0 && a_eq.cols() != m))
    throw std::invalid_argument("qp: equality block shape mismatch");
  if (a_in.rows() != b_in.size() || (a_in.rows() > 0 && a_in.cols() != m))
    throw std::invalid_argument("qp: inequality block shape mismatch");
  if (a_eq.rows() > m) throw std::invalid_argument("qp: more equalities than variables");
  if (m <= 600) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(h, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10 * (1.0 + h.norm()))
      throw std::invalid_argument("qp: H is indefinite");
    if (a_eq.rows() > 0) {
      Eigen::ColPivHouseholderQR<MatrixXd> qr(a_eq.transpose());
      if (qr.rank() < a_eq.rows())
        throw std::invalid_argument("qp: A_eq is row-rank deficient");
    }
  }
}

void QuadraticProgram::add_l1_epigraph(const MatrixXd& m_sel,
                                       const VectorXd& weights) {
  if (weights.minCoeff() < 0.0)
    throw std::invalid_argument("add_l1_epigraph: negative weights");
  const int r = int(m_sel.rows());
  if (weights.size() != r)
    throw std::invalid_argument("add_l1_epigraph: weight count mismatch");
  const int m = num_vars();
  if (m_sel.cols() != m)
    throw std::invalid_argument("add_l1_epigraph: selector width mismatch");

  MatrixXd h2 = MatrixXd::Zero(m + r, m + r);
  h2.topLeftCorner(m, m) = h;
  h = std::move(h2);
  VectorXd f2(m + r);
  f2 << f, weights;
  f = std::move(f2);

  const int i0 = int(a_in.rows());
  MatrixXd ain2 = MatrixXd::Zero(i0 + 2 * r, m + r);
  VectorXd bin2 = VectorXd::Zero(i0 + 2 * r);
  ain2.topLeftCorner(i0, m) = a_in;
  bin2.head(i0) = b_in;
  ain2.block(i0, 0, r, m) = m_sel;
  ain2.block(i0 + r, 0, r, m) = -m_sel;
  ain2.block(i0, m, r, r) = -MatrixXd::Identity(r, r);
  ain2.block(i0 + r, m, r, r) = -MatrixXd::Identity(r, r);
  a_in = std::move(ain2);
  b_in = std::move(bin2);
  if (a_eq.rows() > 0) {
    MatrixXd aeq2 = MatrixXd::Zero(a_eq.rows(), m + r);
    aeq2.leftCols(m) = a_eq;
    a_eq = std::move(aeq2);
  } else {
    a_eq = MatrixXd(0, m + r);
  }
  for (int i = 0; i < r; ++i) var_names.push_back("l1_aux_" + std::to_string(i));
}

void QuadraticProgram::add_max_epigraph(const MatrixXd& m_rows,
                                        const std::vector<int>& group_sizes,
                                        const VectorXd& weights) {
  const int g = int(group_sizes.size());
  if (weights.size() != g)
    throw std::invalid_argument("add_max_epigraph: weight count mismatch");
  if (weights.size() > 0 && weights.minCoeff() < 0.0)
    throw std::invalid_argument("add_max_epigraph: negative weights");
  int total = 0;
  for (int s : group_sizes) total += s;
  if (total != m_rows.rows())
    throw std::invalid_argument("add_max_epigraph: group sizes mismatch");
  const int m = num_vars();
  if (m_rows.cols() != m)
    throw std::invalid_argument("add_max_epigraph: row width mismatch");

  MatrixXd h2 = MatrixXd::Zero(m + g, m + g);
  h2.topLeftCorner(m, m) = h;
  h = std::move(h2);
  VectorXd f2(m + g);
  f2 << f, weights;
  f = std::move(f2);

  const int i0 = int(a_in.rows());
  MatrixXd ain2 = MatrixXd::Zero(i0 + total, m + g);
  VectorXd bin2 = VectorXd::Zero(i0 + total);
  ain2.topLeftCorner(i0, m) = a_in;
  bin2.head(i0) = b_in;
  int row = i0, grp = 0;
  int offset = 0;
  for (int s : group_sizes) {
    for (int r = 0; r < s; ++r, ++row) {
      ain2.block(row, 0, 1, m) = m_rows.row(offset + r);
      ain2(row, m + grp) = -1.0;
    }
    offset += s;
    ++grp;
  }
  a_in = std::move(ain2);
  b_in = std::move(bin2);
  if (a_eq.rows() > 0) {
    MatrixXd aeq2 = MatrixXd::Zero(a_eq.rows(), m + g);
    aeq2.leftCols(m) = a_eq;
    a_eq = std::move(aeq2);
  } else {
    a_eq = MatrixXd(0, m + g);
  }
  for (int i = 0; i < g; ++i) var_names.push_back("max_aux_" + std::to_string(i));
}

void QuadraticProgram::dump(std::ostream& os) const {
  auto put = [&os](const char* name, const MatrixXd& m) {
    os << "%% " << name << " " << m.rows() << " " << m.cols() << "\n";
    for (int i = 0; i < m.rows(); ++i)
      for (int j = 0; j < m.cols(); ++j)
        if (m(i, j) != 0.0) os << i + 1 << " " << j + 1 << " " << m(i, j) << "\n";
  };
  put("H", h);
  put("f", f);
  put("A_eq", a_eq);
  put("b_eq", b_eq);
  put("A_in", a_in);
  put("b_in", b_in);
}

// ---------------------------------------------------------------------------

struct QpSolver::Impl {
  QuadraticProgram qp;
  QpSettings st;

  int m = 0, ne = 0, ni = 0, nc = 0;

  // Scaling: z_orig = D z_scaled, rows scaled by E, cost by c.
  VectorXd d_scale, e_scale;
  double c_scale = 1.0;

  MatrixXd hs, cs;          // scaled H and stacked constraint matrix
  VectorXd fs, lo, up;      // scaled vectors and row bounds
  VectorXd rho_vec;

  Eigen::LLT<MatrixXd> llt;
  double rho = 0.1;
  bool factored = false;

  // iterates (scaled)
  VectorXd z, s, y;

  void setup();
  void factor();
  void run(QpSolution& sol);
  void polish(QpSolution& sol);
  void extract(QpSolution& sol) const;
};

QpSolver::QpSolver(QuadraticProgram qp, QpSettings settings)
    : impl_(std::make_unique<Impl>()) {
  qp.validate();
  impl_->qp = std::move(qp);
  impl_->st = settings;
  impl_->setup();
}

QpSolver::~QpSolver() = default;
QpSolver::QpSolver(QpSolver&&) noexcept = default;
QpSolver& QpSolver::operator=(QpSolver&&) noexcept = default;

const QuadraticProgram& QpSolver::problem() const { return impl_->qp; }
QpSettings& QpSolver::settings() { return impl_->st; }

void QpSolver::Impl::setup() {
  m = qp.num_vars();
  ne = int(qp.a_eq.rows());
  ni = int(qp.a_in.rows());
  nc = ne + ni;

  MatrixXd c(nc, m);
  if (ne > 0) c.topRows(ne) = qp.a_eq;
  if (ni > 0) c.bottomRows(ni) = qp.a_in;

  // Ruiz equilibration on [[H, C'], [C, 0]].
  d_scale = VectorXd::Ones(m);
  e_scale = VectorXd::Ones(nc);
  c_scale = 1.0;
  hs = qp.h;
  cs = c;
  for (int pass = 0; pass < (st.scaling ? 10 : 0); ++pass) {
    VectorXd dcol(m), erow(nc);
    for (int j = 0; j < m; ++j) {
      double n1 = hs.col(j).cwiseAbs().maxCoeff();
      double n2 = nc > 0 ? cs.col(j).cwiseAbs().maxCoeff() : 0.0;
      dcol(j) = std::sqrt(std::max(1e-8, std::max(n1, n2)));
    }
    for (int i = 0; i < nc; ++i)
      erow(i) = std::sqrt(std::max(1e-8, cs.row(i).cwiseAbs().maxCoeff()));
    for (int j = 0; j < m; ++j) {
      hs.col(j) /= dcol(j);
      hs.row(j) /= dcol(j);
      if (nc > 0) cs.col(j) /= dcol(j);
      d_scale(j) /= dcol(j);
    }
    for (int i = 0; i < nc; ++i) {
      cs.row(i) /= erow(i);
      e_scale(i) /= erow(i);
    }
    // cost scaling (on the running scaled cost, so gamma settles at 1)
    double hnorm = 0.0;
    for (int j = 0; j < m; ++j) hnorm += hs.col(j).cwiseAbs().maxCoeff();
    hnorm = hnorm / std::max(1, m);
    const double fnorm =
        c_scale * (d_scale.asDiagonal() * qp.f).cwiseAbs().maxCoeff();
    double gamma = 1.0 / std::max(1e-8, std::max(hnorm, fnorm));
    hs *= gamma;
    c_scale *= gamma;
  }

  fs = c_scale * (d_scale.asDiagonal() * qp.f);
  lo.resize(nc);
  up.resize(nc);
  for (int i = 0; i < ne; ++i) {
    lo(i) = up(i) = e_scale(i) * qp.b_eq(i);
  }
  for (int i = 0; i < ni; ++i) {
    lo(ne + i) = -kInf;
    up(ne + i) = e_scale(ne + i) * qp.b_in(i);
  }

  rho = st.rho;
  z = VectorXd::Zero(m);
  s = VectorXd::Zero(nc);
  y = VectorXd::Zero(nc);
  factored = false;
}

void QpSolver::Impl::factor() {
  rho_vec = VectorXd::Constant(nc, rho);
  rho_vec.head(ne).setConstant(rho * 1e3);  // stiffer on equality rows
  MatrixXd kkt = hs + st.sigma * MatrixXd::Identity(m, m);
  if (nc > 0) kkt.noalias() += cs.transpose() * rho_vec.asDiagonal() * cs;
  llt.compute(kkt);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("qp: KKT factorization failed");
  factored = true;
}

void QpSolver::update_vectors(const VectorXd& f, const VectorXd& b_eq,
                              const VectorXd& b_in) {
  Impl& im = *impl_;
  if (f.size() != im.m || b_eq.size() != im.ne || b_in.size() != im.ni)
    throw std::invalid_argument("qp: update_vectors size mismatch");
  im.qp.f = f;
  im.qp.b_eq = b_eq;
  im.qp.b_in = b_in;
  im.fs = im.c_scale * (im.d_scale.asDiagonal() * f);
  for (int i = 0; i < im.ne; ++i) im.lo(i) = im.up(i) = im.e_scale(i) * b_eq(i);
  for (int i = 0; i < im.ni; ++i) im.up(im.ne + i) = im.e_scale(im.ne + i) * b_in(i);
}

void QpSolver::Impl::extract(QpSolution& sol) const {
  sol.z = d_scale.asDiagonal() * z;
  VectorXd yu = e_scale.asDiagonal() * y / c_scale;
  sol.lambda_eq = yu.head(ne);
  sol.lambda_in = yu.tail(ni).cwiseMax(0.0);
  sol.objective = 0.5 * sol.z.dot(qp.h * sol.z) + qp.f.dot(sol.z);
}

void QpSolver::Impl::run(QpSolution& sol) {
  if (!factored) factor();

  VectorXd ztil(m), cz(nc), w(nc);
  int it = 0;
  double rp = kInf, rd = kInf, eps_p = 0.0, eps_d = 0.0;
  VectorXd y_prev_check = y;

  for (it = 1; it <= st.max_iter; ++it) {
    VectorXd rhs = st.sigma * z - fs;
    if (nc > 0)
      rhs.noalias() += cs.transpose() * (rho_vec.cwiseProduct(s) - y);
    ztil = llt.solve(rhs);
    const VectorXd z_new = st.alpha * ztil + (1.0 - st.alpha) * z;
    if (nc > 0) {
      cz.noalias() = cs * ztil;
      w = st.alpha * cz + (1.0 - st.alpha) * s + y.cwiseQuotient(rho_vec);
      const VectorXd s_new = w.cwiseMax(lo).cwiseMin(up);
      y += rho_vec.cwiseProduct(st.alpha * cz + (1.0 - st.alpha) * s - s_new);
      s = s_new;
    }
    z = z_new;

    if (it % st.check_every == 0 || it == st.max_iter) {
      // Residuals in unscaled quantities.
      const VectorXd zu = d_scale.asDiagonal() * z;
      const VectorXd yu = e_scale.asDiagonal() * y / c_scale;
      VectorXd czu(nc), su(nc);
      double rp_scale = 1.0, rd_scale = 1.0;
      if (nc > 0) {
        czu.head(ne) = qp.a_eq * zu;
        czu.tail(ni) = qp.a_in * zu;
        su = e_scale.cwiseInverse().asDiagonal() * s;
        rp = (czu - su).cwiseAbs().maxCoeff();
        rp_scale = std::max({czu.cwiseAbs().maxCoeff(), su.cwiseAbs().maxCoeff(), 1e-30});
      } else {
        rp = 0.0;
      }
      VectorXd dual = qp.h * zu + qp.f;
      if (nc > 0)
        dual.noalias() += qp.a_eq.transpose() * yu.head(ne) +
                          qp.a_in.transpose() * yu.tail(ni);
      rd = dual.cwiseAbs().maxCoeff();
      rd_scale = std::max({(qp.h * zu).cwiseAbs().maxCoeff(),
                           qp.f.cwiseAbs().maxCoeff(), 1e-30});
      eps_p = st.tol_abs + st.tol_rel * rp_scale;
      eps_d = st.tol_abs + st.tol_rel * rd_scale;
      if (rp <= eps_p && rd <= eps_d) {
        sol.status = QpStatus::optimal;
        break;
      }

      // Primal infeasibility certificate.
      if (nc > 0) {
        const VectorXd dy = y - y_prev_check;
        const double dy_norm = dy.cwiseAbs().maxCoeff();
        if (dy_norm > 1e-12) {
          const VectorXd dyu = (e_scale.asDiagonal() * dy) / c_scale;
          const double aty = (qp.a_eq.transpose() * dyu.head(ne) +
                              qp.a_in.transpose() * dyu.tail(ni))
                                 .cwiseAbs()
                                 .maxCoeff();
          bool lower_ok = true;
          double support = 0.0;
          for (int i = 0; i < ne; ++i) support += qp.b_eq(i) * dyu(i);
          for (int i = 0; i < ni; ++i) {
            const double v = dyu(ne + i);
            if (v < -1e-12 * dy_norm) lower_ok = false;
            support += qp.b_in(i) * std::max(v, 0.0);
          }
          const double dyu_norm = dyu.cwiseAbs().maxCoeff();
          if (lower_ok && aty <= 1e-8 * dyu_norm && support < -1e-8 * dyu_norm) {
            sol.status = QpStatus::primal_infeasible;
            break;
          }
        }
        y_prev_check = y;
      }

      // Adaptive penalty.
      if (st.adaptive_rho && it % (st.check_every * 8) == 0 && nc > 0) {
        const double num = rp / std::max(rp_scale, 1e-30);
        const double den = rd / std::max(rd_scale, 1e-30);
        double ratio = std::sqrt(num / std::max(den, 1e-30));
        ratio = std::min(1e3, std::max(1e-3, ratio));
        if (ratio > 5.0 || ratio < 0.2) {
          rho = std::min(1e6, std::max(1e-6, rho * ratio));
          factor();
        }
      }
    }
  }
  sol.iterations = std::min(it, st.max_iter);
  sol.primal_res = rp;
  sol.dual_res = rd;
  if (sol.status != QpStatus::optimal && sol.status != QpStatus::primal_infeasible)
    sol.status = QpStatus::max_iter;
}

void QpSolver::Impl::polish(QpSolution& sol) {
  // Guess the active set from the converged iterate and re-solve the
  // equality-constrained problem exactly.
  const VectorXd zu = sol.z;
  const VectorXd slack = qp.b_in - qp.a_in * zu;
  std::vector<int> act;
  for (int i = 0; i < ni; ++i)
    if (slack(i) < 1e-7 * (1.0 + std::abs(qp.b_in(i))) || sol.lambda_in(i) > 1e-7)
      act.push_back(i);
  const int na = int(act.size());
  const int rows = ne + na;
  if (rows > m) return;

  MatrixXd kkt = MatrixXd::Zero(m + rows, m + rows);
  kkt.topLeftCorner(m, m) = qp.h + 1e-11 * MatrixXd::Identity(m, m);
  VectorXd rhs(m + rows);
  rhs.head(m) = -qp.f;
  if (ne > 0) {
    kkt.block(m, 0, ne, m) = qp.a_eq;
    kkt.block(0, m, m, ne) = qp.a_eq.transpose();
    rhs.segment(m, ne) = qp.b_eq;
  }
  for (int r = 0; r < na; ++r) {
    kkt.block(m + ne + r, 0, 1, m) = qp.a_in.row(act[r]);
    kkt.block(0, m + ne + r, m, 1) = qp.a_in.row(act[r]).transpose();
    rhs(m + ne + r) = qp.b_in(act[r]);
  }
  kkt.bottomRightCorner(rows, rows) -= 1e-11 * MatrixXd::Identity(rows, rows);
  const VectorXd sol_kkt = kkt.partialPivLu().solve(rhs);
  const VectorXd z_pol = sol_kkt.head(m);
  VectorXd lam_in = VectorXd::Zero(ni);
  for (int r = 0; r < na; ++r) lam_in(act[r]) = sol_kkt(m + ne + r);

  // Accept only if it is feasible, dual-feasible, and tightens the residuals.
  if (ni > 0 && (qp.a_in * z_pol - qp.b_in).maxCoeff() > 1e-8) return;
  if (na > 0 && lam_in.minCoeff() < -1e-8) return;
  VectorXd dual = qp.h * z_pol + qp.f;
  if (ne > 0) dual.noalias() += qp.a_eq.transpose() * sol_kkt.segment(m, ne);
  if (ni > 0) dual.noalias() += qp.a_in.transpose() * lam_in;
  double rp_pol = 0.0;
  if (ne > 0) rp_pol = (qp.a_eq * z_pol - qp.b_eq).cwiseAbs().maxCoeff();
  const double rd_pol = dual.cwiseAbs().maxCoeff();
  if (rd_pol <= std::max(sol.dual_res, 1e-10) &&
      rp_pol <= std::max(sol.primal_res, 1e-10)) {
    sol.z = z_pol;
    sol.lambda_eq = sol_kkt.segment(m, ne);
    sol.lambda_in = lam_in.cwiseMax(0.0);
    sol.primal_res = rp_pol;
    sol.dual_res = rd_pol;
    sol.objective = 0.5 * z_pol.dot(qp.h * z_pol) + qp.f.dot(z_pol);
  }
}

QpSolution QpSolver::solve(const QpSolution* warm) {
  Impl& im = *impl_;
  if (warm && warm->z.size() == im.m) {
    im.z = im.d_scale.cwiseInverse().asDiagonal() * warm->z;
    if (im.nc > 0) {
      VectorXd yw(im.nc);
      yw << warm->lambda_eq, warm->lambda_in;
      im.y = im.c_scale * (im.e_scale.cwiseInverse().asDiagonal() * yw);
      im.s = (im.cs * im.z).cwiseMax(im.lo).cwiseMin(im.up);
    }
  } else {
    im.z.setZero();
    im.s.setZero();
    im.y.setZero();
  }
  QpSolution sol;
  im.run(sol);
  im.extract(sol);
  if (im.st.polish && sol.status == QpStatus::optimal) im.polish(sol);
  return sol;
}

QpSolution solve(const QuadraticProgram& qp, const QpSolution* warm,
                 QpSettings settings) {
  QpSolver solver(qp, settings);
  return solver.solve(warm);
}

}  // namespace wec::qp
