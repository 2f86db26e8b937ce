#include "wec/mpc.hpp"

#include <cmath>
#include <stdexcept>

namespace wec::mpc {

void MpcConfig::validate(int n_p) const {
  if (horizon < 1) throw std::invalid_argument("mpc: horizon must be >= 1");
  if (mu <= 0.0) throw std::invalid_argument("mpc: mu must be positive");
  if (u_max.size() != n_p || d_max.size() != n_p || v_d.size() != n_p)
    throw std::invalid_argument("mpc: vector parameter size mismatch");
  if (u_max.minCoeff() <= 0.0 || d_max.minCoeff() <= 0.0)
    throw std::invalid_argument("mpc: limits must be positive");
  if (v_d.minCoeff() < 0.0)
    throw std::invalid_argument("mpc: v_d must be nonnegative");
  if (r_loss.rows() != n_p || r_loss.cols() != n_p)
    throw std::invalid_argument("mpc: R dimension mismatch");
}

VectorXd stall_input(const DiscretePlant& plant, const VectorXd& x) {
  return -plant.d_uq().partialPivLu().solve(plant.c_d * (plant.a * x)) /
         plant.t_samp;
}

namespace {

// Condensed horizon matrices shared by every step.  The terminal quadratic
// enters through auxiliary coordinates r = q_f_rows * x_{h+1} coupled by
// equality rows, keeping the Hessian's conditioning set by the stage cost
// alone (the penalty rows are equilibrated like any other constraint).
struct HorizonData {
  int h = 0, n = 0, np = 0, n_groups = 0, n_gauge_rows = 0, nr = 0;
  int nu = 0;   // (h+1) np, size of each of the U/S/B blocks
  int nz = 0;   // total decision size

  MatrixXd su;        // (h+1)np x (h+1)np : U -> stacked xi
  MatrixXd f_phi;     // (h+1)np x n      : x_k -> stacked F x_m
  MatrixXd g_last;    // n x (h+1)np      : U -> x_{h+1}
  MatrixXd a_last;    // n x n            : x_k -> x_{h+1}
  MatrixXd g_disp;    // h*np x (h+1)np   : U -> stacked C_d x_m, m=1..h
  MatrixXd a_disp;    // h*np x n         : x_k -> same
  MatrixXd m_tilde;   // (h+1)np x (h+1)np block-diagonal M

  MatrixXd h_uu;      // quadratic block on U (factor 2 included)
  MatrixXd f_u_mat;   // f_u = f_u_mat * x_k
  MatrixXd const_mat; // const(x_k) = x_k' const_mat x_k

  qp::QuadraticProgram qp;  // template with x_k-independent entries
  MatrixXd eq_rhs_mat;      // b_eq = -eq_rhs_mat * x_k
  MatrixXd disp_rhs_mat;    // stacked +-C_d A^m
  VectorXd disp_rhs_base;   // stacked d_max
  MatrixXd gauge_rhs_mat;   // gauge_rows * A^{h+1}
  int row_disp0 = 0, row_gauge0 = 0;
};

HorizonData build_horizon_data(const DiscretePlant& plant,
                               const RiccatiSolution& ricc,
                               const TerminalPenalty& tp,
                               const MpcConfig& cfg) {
  HorizonData hd;
  const int h = cfg.horizon;
  const int n = plant.n();
  const int np = plant.n_p();
  hd.h = h;
  hd.n = n;
  hd.np = np;
  hd.nu = (h + 1) * np;
  hd.n_groups = int(tp.group_sizes.size());
  hd.n_gauge_rows = int(tp.gauge_rows.rows());
  hd.nr = int(tp.q_f_rows.rows());
  hd.nz = 3 * hd.nu + hd.n_groups + hd.nr;

  // Powers of A and the input-response blocks.
  std::vector<MatrixXd> apow(h + 2);
  apow[0] = MatrixXd::Identity(n, n);
  for (int m = 1; m <= h + 1; ++m) apow[m] = plant.a * apow[m - 1];
  std::vector<MatrixXd> aib(h + 1);  // A^i B_u
  aib[0] = plant.b_u;
  for (int i = 1; i <= h; ++i) aib[i] = plant.a * aib[i - 1];

  hd.f_phi.resize(hd.nu, n);
  for (int m = 0; m <= h; ++m)
    hd.f_phi.middleRows(m * np, np) = ricc.f * apow[m];

  // su = I - F G_head: G_head block (m, j) = A^{m-1-j} B_u for j < m.
  hd.su = MatrixXd::Identity(hd.nu, hd.nu);
  for (int m = 1; m <= h; ++m)
    for (int j = 0; j < m; ++j)
      hd.su.block(m * np, j * np, np, np) -= ricc.f * aib[m - 1 - j];

  hd.g_last.resize(n, hd.nu);
  for (int j = 0; j <= h; ++j)
    hd.g_last.middleCols(j * np, np) = aib[h - j];
  hd.a_last = apow[h + 1];

  hd.g_disp = MatrixXd::Zero(h * np, hd.nu);
  hd.a_disp.resize(h * np, n);
  for (int m = 1; m <= h; ++m) {
    hd.a_disp.middleRows((m - 1) * np, np) = plant.c_d * apow[m];
    for (int j = 0; j < m; ++j)
      hd.g_disp.block((m - 1) * np, j * np, np, np) =
          plant.c_d * aib[m - 1 - j];
  }

  hd.m_tilde = MatrixXd::Zero(hd.nu, hd.nu);
  for (int m = 0; m <= h; ++m)
    hd.m_tilde.block(m * np, m * np, np, np) = ricc.m;

  hd.h_uu = 2.0 * (hd.su.transpose() * hd.m_tilde * hd.su);
  hd.f_u_mat = -2.0 * (hd.su.transpose() * hd.m_tilde * hd.f_phi);
  hd.const_mat = hd.f_phi.transpose() * hd.m_tilde * hd.f_phi;

  // Assemble the QP template: z = [U; S; B; T; R].
  qp::QuadraticProgram& p = hd.qp;
  const int nu = hd.nu, nz = hd.nz, nr = hd.nr;
  p.h = MatrixXd::Zero(nz, nz);
  p.h.topLeftCorner(nu, nu) = hd.h_uu;
  p.h.bottomRightCorner(nr, nr) = 2.0 * MatrixXd::Identity(nr, nr);
  p.f = VectorXd::Zero(nz);
  for (int m = 0; m <= h; ++m) {
    p.f.segment(nu + m * np, np) = cfg.v_d;
    p.f.segment(2 * nu + m * np, np) = cfg.mu * cfg.u_max;
  }
  p.f.segment(3 * nu, hd.n_groups) = tp.group_weights;

  p.a_eq = MatrixXd::Zero(np + nr, nz);
  p.a_eq.block(0, 0, np, nu) = plant.c_d * hd.g_last;
  p.a_eq.block(np, 0, nr, nu) = tp.q_f_rows * hd.g_last;
  p.a_eq.bottomRightCorner(nr, nr) = -MatrixXd::Identity(nr, nr);
  p.b_eq = VectorXd::Zero(np + nr);
  hd.eq_rhs_mat.resize(np + nr, n);
  hd.eq_rhs_mat.topRows(np) = plant.c_d * hd.a_last;
  hd.eq_rhs_mat.bottomRows(nr) = tp.q_f_rows * hd.a_last;

  const int n_rows = 2 * nu   // +-u <= s
                     + nu     // s - b <= u_max
                     + nu     // -b <= 0
                     + 2 * h * np  // displacement
                     + hd.n_gauge_rows;
  p.a_in = MatrixXd::Zero(n_rows, nz);
  p.b_in = VectorXd::Zero(n_rows);
  int r0 = 0;
  // u - s <= 0 ; -u - s <= 0
  p.a_in.block(r0, 0, nu, nu).setIdentity();
  p.a_in.block(r0, nu, nu, nu) = -MatrixXd::Identity(nu, nu);
  r0 += nu;
  p.a_in.block(r0, 0, nu, nu) = -MatrixXd::Identity(nu, nu);
  p.a_in.block(r0, nu, nu, nu) = -MatrixXd::Identity(nu, nu);
  r0 += nu;
  // s - b <= u_max
  p.a_in.block(r0, nu, nu, nu).setIdentity();
  p.a_in.block(r0, 2 * nu, nu, nu) = -MatrixXd::Identity(nu, nu);
  for (int m = 0; m <= h; ++m) p.b_in.segment(r0 + m * np, np) = cfg.u_max;
  r0 += nu;
  // -b <= 0
  p.a_in.block(r0, 2 * nu, nu, nu) = -MatrixXd::Identity(nu, nu);
  r0 += nu;
  // displacement rows: +(C_d x_m) <= d_max then -(C_d x_m) <= d_max
  hd.row_disp0 = r0;
  p.a_in.block(r0, 0, h * np, nu) = hd.g_disp;
  p.a_in.block(r0 + h * np, 0, h * np, nu) = -hd.g_disp;
  hd.disp_rhs_base.resize(2 * h * np);
  for (int m = 0; m < h; ++m) {
    hd.disp_rhs_base.segment(m * np, np) = cfg.d_max;
    hd.disp_rhs_base.segment((h + m) * np, np) = cfg.d_max;
  }
  hd.disp_rhs_mat.resize(2 * h * np, n);
  hd.disp_rhs_mat.topRows(h * np) = hd.a_disp;
  hd.disp_rhs_mat.bottomRows(h * np) = -hd.a_disp;
  r0 += 2 * h * np;
  // terminal gauge rows: (gauge_row G_last) U - t_g <= -(gauge_row A^{h+1}) x
  hd.row_gauge0 = r0;
  if (hd.n_gauge_rows > 0) {
    p.a_in.block(r0, 0, hd.n_gauge_rows, nu) = tp.gauge_rows * hd.g_last;
    int row = r0;
    for (int g = 0; g < hd.n_groups; ++g)
      for (int k = 0; k < tp.group_sizes[size_t(g)]; ++k, ++row)
        p.a_in(row, 3 * nu + g) = -1.0;
    hd.gauge_rhs_mat = tp.gauge_rows * hd.a_last;
  } else {
    hd.gauge_rhs_mat.resize(0, n);
  }
  return hd;
}

void update_rhs(const HorizonData& hd, const VectorXd& x_k, VectorXd& f,
                VectorXd& b_eq, VectorXd& b_in) {
  f = hd.qp.f;
  f.head(hd.nu) = hd.f_u_mat * x_k;
  b_eq = -hd.eq_rhs_mat * x_k;
  b_in = hd.qp.b_in;
  b_in.segment(hd.row_disp0, 2 * hd.h * hd.np) =
      hd.disp_rhs_base - hd.disp_rhs_mat * x_k;
  if (hd.n_gauge_rows > 0)
    b_in.segment(hd.row_gauge0, hd.n_gauge_rows) = -hd.gauge_rhs_mat * x_k;
}

}  // namespace

struct MpcController::Impl {
  DiscretePlant plant;
  RiccatiSolution ricc;
  StallRealization stall;
  TerminalPenalty tp;
  MpcConfig cfg;
  HorizonData hd;
  std::unique_ptr<qp::QpSolver> solver;

  VectorXd x;
  VectorXd u_prev;
  int step_index = 0;
  StepDiagnostics diag;
  int fallbacks = 0;
  qp::QpSolution warm;
  bool have_warm = false;

  MatrixXd duq_inv_cq;  // for the warm-start tail input

  HorizonSolution extract(const qp::QpSolution& sol, const VectorXd& x_k) const;
  void shift_warm(const qp::QpSolution& sol, const VectorXd& x_term);
};

MpcController::MpcController(DiscretePlant plant, RiccatiSolution ricc,
                             StallRealization stall, TerminalPenalty tp,
                             MpcConfig cfg)
    : impl_(std::make_unique<Impl>()) {
  cfg.validate(plant.n_p());
  impl_->plant = std::move(plant);
  impl_->ricc = std::move(ricc);
  impl_->stall = std::move(stall);
  impl_->tp = std::move(tp);
  impl_->cfg = std::move(cfg);
  impl_->hd = build_horizon_data(impl_->plant, impl_->ricc, impl_->tp,
                                 impl_->cfg);
  impl_->solver =
      std::make_unique<qp::QpSolver>(impl_->hd.qp, impl_->cfg.qp);
  impl_->duq_inv_cq = impl_->plant.d_uq().partialPivLu().solve(
      impl_->plant.c_q());
  impl_->x = VectorXd::Zero(impl_->plant.n());
  impl_->u_prev = VectorXd::Zero(impl_->plant.n_p());
}

MpcController::~MpcController() = default;
MpcController::MpcController(MpcController&&) noexcept = default;

void MpcController::reset(const VectorXd& x0) {
  impl_->x = x0;
  impl_->u_prev = VectorXd::Zero(impl_->plant.n_p());
  impl_->step_index = 0;
  impl_->fallbacks = 0;
  impl_->have_warm = false;
  impl_->diag = {};
}

const VectorXd& MpcController::state() const { return impl_->x; }
int MpcController::step_index() const { return impl_->step_index; }
const StepDiagnostics& MpcController::diagnostics() const { return impl_->diag; }
int MpcController::fallback_count() const { return impl_->fallbacks; }
const DiscretePlant& MpcController::plant() const { return impl_->plant; }
const RiccatiSolution& MpcController::riccati() const { return impl_->ricc; }
const MpcConfig& MpcController::config() const { return impl_->cfg; }

HorizonSolution MpcController::Impl::extract(const qp::QpSolution& sol,
                                             const VectorXd& x_k) const {
  HorizonSolution hs;
  const int h = hd.h, np = hd.np;
  hs.u.resize(h + 1, np);
  hs.b.resize(h + 1, np);
  for (int m = 0; m <= h; ++m) {
    hs.u.row(m) = sol.z.segment(m * np, np).transpose();
    hs.b.row(m) = sol.z.segment(2 * hd.nu + m * np, np).transpose();
  }
  hs.x.resize(h + 2, hd.n);
  VectorXd xm = x_k;
  for (int m = 0; m <= h + 1; ++m) {
    hs.x.row(m) = xm.transpose();
    if (m <= h)
      xm = plant.a * xm + plant.b_u * hs.u.row(m).transpose();
  }
  hs.gamma = sol.objective + x_k.dot(hd.const_mat * x_k);
  hs.status = sol.status;
  hs.iterations = sol.iterations;
  return hs;
}

void MpcController::Impl::shift_warm(const qp::QpSolution& sol,
                                     const VectorXd& x_term) {
  warm = sol;
  const int np = hd.np, nu = hd.nu;
  auto shift_block = [&](int offset) {
    for (int m = 0; m < hd.h; ++m)
      warm.z.segment(offset + m * np, np) =
          sol.z.segment(offset + (m + 1) * np, np);
  };
  shift_block(0);
  shift_block(nu);
  shift_block(2 * nu);
  // Tail entries continue the stroke-holding trajectory from the previous
  // terminal state.
  const VectorXd x_tail = stall.c_s * (stall.a_s * (stall.bu_perp * x_term));
  const VectorXd u_tail = -duq_inv_cq * x_tail;
  warm.z.segment(hd.h * np, np) = u_tail;
  warm.z.segment(nu + hd.h * np, np) = u_tail.cwiseAbs();
  warm.z.segment(2 * nu + hd.h * np, np) =
      (u_tail.cwiseAbs() - cfg.u_max).cwiseMax(0.0);
  have_warm = true;
}

HorizonSolution MpcController::solve_at(const VectorXd& x_k) {
  Impl& im = *impl_;
  VectorXd f, beq, bin;
  update_rhs(im.hd, x_k, f, beq, bin);
  im.solver->update_vectors(f, beq, bin);
  const qp::QpSolution sol =
      im.solver->solve(im.cfg.warm_start && im.have_warm ? &im.warm : nullptr);
  return im.extract(sol, x_k);
}

VectorXd MpcController::step(const std::optional<VectorXd>& y_prev) {
  Impl& im = *impl_;
  if (y_prev) {
    const auto r = ssid::innovations_step(im.plant, im.x, im.u_prev, *y_prev);
    im.x = r.x_next;
  } else if (im.step_index > 0) {
    throw std::runtime_error("mpc: missing measurement after the first step");
  }

  VectorXd f, beq, bin;
  update_rhs(im.hd, im.x, f, beq, bin);
  im.solver->update_vectors(f, beq, bin);
  const qp::QpSolution sol =
      im.solver->solve(im.cfg.warm_start && im.have_warm ? &im.warm : nullptr);

  VectorXd u;
  if (sol.status == qp::QpStatus::optimal) {
    u = sol.z.head(im.plant.n_p());
    const HorizonSolution hs = im.extract(sol, im.x);
    im.diag.gamma = hs.gamma;
    im.diag.qp_iterations = sol.iterations;
    im.diag.fallback_used = false;
    if (im.cfg.warm_start)
      im.shift_warm(sol, hs.x.row(im.hd.h + 1).transpose());
  } else if (im.cfg.fallback) {
    u = stall_input(im.plant, im.x);
    im.diag.gamma = std::numeric_limits<double>::quiet_NaN();
    im.diag.qp_iterations = sol.iterations;
    im.diag.fallback_used = true;
    ++im.fallbacks;
    im.have_warm = false;
  } else {
    throw std::runtime_error("mpc: horizon QP failed and fallback disabled");
  }

  im.u_prev = u;
  ++im.step_index;
  return u;
}

qp::QuadraticProgram build_horizon_qp(const DiscretePlant& plant,
                                      const RiccatiSolution& ricc,
                                      const TerminalPenalty& tp,
                                      const MpcConfig& cfg,
                                      const VectorXd& x_k,
                                      double* constant_term) {
  cfg.validate(plant.n_p());
  HorizonData hd = build_horizon_data(plant, ricc, tp, cfg);
  VectorXd f, beq, bin;
  update_rhs(hd, x_k, f, beq, bin);
  hd.qp.f = f;
  hd.qp.b_eq = beq;
  hd.qp.b_in = bin;
  if (constant_term) *constant_term = x_k.dot(hd.const_mat * x_k);
  return hd.qp;
}

}  // namespace wec::mpc
