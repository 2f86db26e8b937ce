#include "wec/sim.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "wec/lin.hpp"

namespace wec::sim {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

double GaussianSampler::operator()() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  auto uniform = [this]() {
    return (double(rng_() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
  };
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(2.0 * kPi * u2);
  have_spare_ = true;
  return r * std::cos(2.0 * kPi * u2);
}

MatrixXd sample_innovations(const MatrixXd& s_w, int length,
                            unsigned long long seed) {
  const int ny = int(s_w.rows());
  const MatrixXd l = lin::psd_sqrt(s_w);
  GaussianSampler g(seed);
  MatrixXd w(length, ny);
  VectorXd z(ny);
  for (int k = 0; k < length; ++k) {
    for (int i = 0; i < ny; ++i) z(i) = g();
    w.row(k) = (l * z).transpose();
  }
  return w;
}

LinearLoop::LinearLoop(const DiscretePlant& plant, MatrixXd gain)
    : plant_(plant), k_(std::move(gain)) {
  x_ = VectorXd::Zero(plant.n());
  u_prev_ = VectorXd::Zero(plant.n_p());
}

void LinearLoop::reset(const VectorXd& x0) {
  x_ = x0;
  u_prev_.setZero();
  step_index_ = 0;
}

VectorXd LinearLoop::step(const std::optional<VectorXd>& y_prev) {
  if (y_prev) {
    const auto r = ssid::innovations_step(plant_, x_, u_prev_, *y_prev);
    x_ = r.x_next;
  } else if (step_index_ > 0) {
    throw std::runtime_error("LinearLoop: missing measurement");
  }
  u_prev_ = k_ * x_;
  ++step_index_;
  return u_prev_;
}

SimResult run_closed_loop(const DiscretePlant& plant, LoopController& ctrl,
                          const MatrixXd& w, const VectorXd& x0,
                          const VectorXd& u_max, const VectorXd& d_max,
                          const LossModel& loss,
                          const RiccatiSolution* ricc) {
  const int np = plant.n_p();
  const int n = plant.n();
  const int steps = int(w.rows()) - 1;
  if (steps < 1) throw std::invalid_argument("run_closed_loop: need w rows >= 2");

  SimResult out;
  out.steps = steps;
  out.d.resize(steps, np);
  out.u.resize(steps, np);
  out.b.resize(steps, np);
  out.q.resize(steps, np);
  out.a.resize(steps);
  out.p.resize(steps);
  out.gamma.resize(steps);
  out.x_norm2.resize(steps);
  out.qp_iterations.assign(steps, 0);
  out.fallback.assign(steps, 0);
  out.w = w;
  out.x0_norm1 = x0.lpNorm<1>();
  out.x0_norm2sq = x0.squaredNorm();
  if (ricc) out.aux.resize(steps);

  const MatrixXd cy = plant.c_y();
  const MatrixXd cq = plant.c_q();
  const MatrixXd duq = plant.d_uq();
  const MatrixXd dwq0 = plant.d_wq0();
  const MatrixXd dwq1 = plant.d_wq1();
  const MatrixXd dwd = plant.d_wd();
  const MatrixXd dwa = plant.d_wa();

  ctrl.reset(x0);
  VectorXd x = x0;
  std::optional<VectorXd> y_prev;
  int force_viol = 0, stroke_viol = 0;
  double p_sum = 0.0, aux_sum = 0.0;

  for (int k = 0; k < steps; ++k) {
    const VectorXd u = ctrl.step(y_prev);
    const VectorXd wk = w.row(k).transpose();
    const VectorXd wk1 = w.row(k + 1).transpose();
    const VectorXd y = cy * x + wk;

    const VectorXd dk = plant.c_d * x + dwd * wk;
    const VectorXd qk = cq * x + duq * u + dwq0 * wk + dwq1 * wk1;
    const double pk =
        -(u.dot(qk) + u.dot(loss.r_loss * u) + loss.v_d.dot(u.cwiseAbs()));

    out.d.row(k) = dk.transpose();
    out.u.row(k) = u.transpose();
    out.q.row(k) = qk.transpose();
    out.a(k) = (plant.c_a * x + dwa * wk)(0);
    out.p(k) = pk;
    out.x_norm2(k) = x.squaredNorm();
    p_sum += pk;

    const auto diag = ctrl.diagnostics();
    out.gamma(k) = diag.gamma;
    out.qp_iterations[size_t(k)] = diag.qp_iterations;
    out.fallback[size_t(k)] = diag.fallback_used ? 1 : 0;
    out.b.row(k) = (u.cwiseAbs() - u_max).cwiseMax(0.0).transpose();

    if (((u.cwiseAbs() - u_max).array() > 0.0).any()) ++force_viol;
    if (((dk.cwiseAbs() - d_max).array() > 0.0).any()) ++stroke_viol;

    if (ricc) {
      const VectorXd xi = u - ricc->f * x;
      const double aux = xi.dot(ricc->m * xi) + loss.v_d.dot(u.cwiseAbs());
      out.aux(k) = aux;
      aux_sum += aux;
    }

    if (ricc && k == 0) out.w_quad_delta = -x.dot(ricc->w * x);
    x = plant.a * x + plant.b_u * u + plant.b_w * wk;
    y_prev = y;
  }
  if (ricc) out.w_quad_delta += x.dot(ricc->w * x);

  out.p_avg = p_sum / steps;
  out.aux_avg = aux_sum / steps;
  out.force_violation_rate = double(force_viol) / steps;
  out.stroke_violation_rate = double(stroke_viol) / steps;
  return out;
}

PowerIdentityReport verify_power_identity(const DiscretePlant& plant,
                                          const RiccatiSolution& ricc,
                                          LoopController& ctrl,
                                          const MatrixXd& w,
                                          const VectorXd& x0,
                                          const VectorXd& u_max,
                                          const VectorXd& d_max,
                                          const LossModel& loss) {
  const SimResult res =
      run_closed_loop(plant, ctrl, w, x0, u_max, d_max, loss, &ricc);
  PowerIdentityReport rep;
  rep.time_avg_power = res.p_avg;
  rep.predicted = ricc.p_bar - res.aux_avg - res.w_quad_delta / res.steps;
  const double scale =
      std::max({std::abs(ricc.p_bar), std::abs(res.p_avg), res.aux_avg, 1e-12});
  rep.discrepancy_rel = std::abs(res.p_avg - rep.predicted) / scale;

  // Batch means of g_k = p_k + aux_k (the identity says avg(g) is a
  // constant up to the endpoint term).
  const int n_batches = 32;
  const int bl = res.steps / n_batches;
  if (bl > 1) {
    VectorXd bm(n_batches);
    for (int b = 0; b < n_batches; ++b) {
      double acc = 0.0;
      for (int k = b * bl; k < (b + 1) * bl; ++k) acc += res.p(k) + res.aux(k);
      bm(b) = acc / bl;
    }
    const double mean = bm.mean();
    const double sd = std::sqrt((bm.array() - mean).square().sum() /
                                (n_batches - 1));
    rep.batch_stderr = sd / std::sqrt(double(n_batches)) / scale;
  }

  const int half = res.steps / 2;
  const double ms_head = res.x_norm2.head(half).mean();
  const double ms_tail = res.x_norm2.tail(half).mean();
  rep.mean_square_stable =
      std::isfinite(ms_tail) && ms_tail < 16.0 * std::max(ms_head, 1e-12);
  return rep;
}

// --------------------------------------------------------------------------

struct AnticausalSolver::Impl {
  // plant slices
  MatrixXd a, b_u, b_w, c_d, dwd, dwa, c_a, f_gain, m_cost;
  MatrixXd c_q, duq, dwq0, dwq1;
  VectorXd u_max, d_max, v_d;
  MatrixXd r_loss;
  double mu = 0.0, t_samp = 0.0;
  int length = 0, n = 0, np = 0;

  MatrixXd su;       // L np x L np : xi = su U - c_x
  MatrixXd d_map;    // L np x L np : stacked d_1..d_L = d_map U + e
  MatrixXd h;        // 2 su' Mtilde su
  MatrixXd dtd;
  Eigen::LLT<MatrixXd> llt;
  double rho1 = 1.0, rho2 = 1.0;

  void factor() {
    MatrixXd kkt = h;
    kkt.diagonal().array() += rho1;
    kkt.noalias() += rho2 * dtd;
    llt.compute(kkt);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("anticausal: factorization failed");
  }

  // prox of a|y| + c max(0, |y|-u) at v with weight rho (per component)
  double prox_loss(double v, double a_w, double c_w, double u_lim,
                   double rho) const {
    const double s = v < 0 ? -1.0 : 1.0;
    const double av = std::abs(v);
    const double t1 = av - a_w / rho;          // inner slope
    const double t2 = av - (a_w + c_w) / rho;  // outer slope
    double y;
    if (t2 > u_lim)
      y = t2;
    else if (t1 > u_lim)
      y = u_lim;  // stuck at the kink
    else
      y = std::max(t1, 0.0);
    return s * y;
  }
};

AnticausalSolver::AnticausalSolver(const DiscretePlant& plant,
                                   const RiccatiSolution& ricc,
                                   const VectorXd& u_max,
                                   const VectorXd& d_max,
                                   const LossModel& loss, double mu,
                                   int length)
    : impl_(std::make_unique<Impl>()) {
  Impl& im = *impl_;
  im.a = plant.a;
  im.b_u = plant.b_u;
  im.b_w = plant.b_w;
  im.c_d = plant.c_d;
  im.c_a = plant.c_a;
  im.dwd = plant.d_wd();
  im.dwa = plant.d_wa();
  im.c_q = plant.c_q();
  im.duq = plant.d_uq();
  im.dwq0 = plant.d_wq0();
  im.dwq1 = plant.d_wq1();
  im.f_gain = ricc.f;
  im.m_cost = ricc.m;
  im.u_max = u_max;
  im.d_max = d_max;
  im.v_d = loss.v_d;
  im.r_loss = loss.r_loss;
  im.mu = mu;
  im.t_samp = plant.t_samp;
  im.length = length;
  im.n = plant.n();
  im.np = plant.n_p();

  const int L = length, np = im.np;
  const int nu = L * np;
  // Impulse response blocks A^i B_u.
  std::vector<MatrixXd> aib(L);
  aib[0] = plant.b_u;
  for (int i = 1; i < L; ++i) aib[i] = plant.a * aib[i - 1];

  im.su = MatrixXd::Identity(nu, nu);
  im.d_map = MatrixXd::Zero(nu, nu);
  for (int k = 0; k < L; ++k) {
    for (int j = 0; j < k; ++j)
      im.su.block(k * np, j * np, np, np) -= ricc.f * aib[k - 1 - j];
    for (int j = 0; j <= k; ++j)
      im.d_map.block(k * np, j * np, np, np) = plant.c_d * aib[k - j];
  }

  MatrixXd mt = MatrixXd::Zero(nu, nu);
  for (int k = 0; k < L; ++k)
    mt.block(k * np, k * np, np, np) = ricc.m;
  im.h = 2.0 * im.su.transpose() * mt * im.su;
  im.dtd = im.d_map.transpose() * im.d_map;
  const double hscale = im.h.diagonal().mean();
  im.rho1 = std::max(1e-6, 0.1 * hscale);
  im.rho2 = std::max(1e-6, 0.1 * hscale);
  im.factor();
}

AnticausalSolver::~AnticausalSolver() = default;
AnticausalSolver::AnticausalSolver(AnticausalSolver&&) noexcept = default;

SimResult AnticausalSolver::solve(const MatrixXd& w, const VectorXd& x0,
                                  double tol, int max_iter) const {
  const Impl& im = *impl_;
  const int L = im.length, np = im.np, nu = L * np;
  if (int(w.rows()) != L + 1)
    throw std::invalid_argument("anticausal: w must have length+1 rows");

  // Forced response with u = 0: affine pieces of xi = su U - c_x and of the
  // stacked displacements d_map U + e (rows k = 1..L).
  VectorXd c_x(nu), e(nu);
  {
    VectorXd x = x0;
    for (int k = 0; k < L; ++k) {
      c_x.segment(k * np, np) = im.f_gain * x;
      x = im.a * x + im.b_w * w.row(k).transpose();
      e.segment(k * np, np) =
          im.c_d * x + im.dwd * w.row(k + 1).transpose();
    }
  }
  VectorXd mt_cx(nu);
  for (int k = 0; k < L; ++k)
    mt_cx.segment(k * np, np) = im.m_cost * c_x.segment(k * np, np);
  const VectorXd f = -2.0 * (im.su.transpose() * mt_cx);

  // ADMM on  min 1/2 U'HU + f'U + phi(Y1) + box/terminal(Y2)
  //          s.t. Y1 = U, Y2 = d_map U + e.
  VectorXd u_var = VectorXd::Zero(nu);
  VectorXd y1 = VectorXd::Zero(nu);
  VectorXd y2 = e;
  VectorXd v1 = VectorXd::Zero(nu), v2 = VectorXd::Zero(nu);
  auto project_d = [&](VectorXd& y) {
    for (int k = 0; k < L - 1; ++k)
      for (int j = 0; j < np; ++j)
        y(k * np + j) = std::clamp(y(k * np + j), -im.d_max(j), im.d_max(j));
    y.tail(np).setZero();  // terminal zero stroke
  };
  project_d(y2);

  VectorXd du(nu), y1_prev(nu), y2_prev(nu);
  double rp = 0.0, rd = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    VectorXd rhs = -f + im.rho1 * (y1 - v1);
    rhs.noalias() += im.rho2 * (im.d_map.transpose() * (y2 - v2 - e));
    u_var = im.llt.solve(rhs);
    du.noalias() = im.d_map * u_var;

    y1_prev = y1;
    y2_prev = y2;
    const VectorXd t1 = u_var + v1;
    for (int k = 0; k < L; ++k)
      for (int j = 0; j < np; ++j)
        y1(k * np + j) = im.prox_loss(t1(k * np + j), im.v_d(j),
                                      im.mu * im.u_max(j), im.u_max(j),
                                      im.rho1);
    y2 = du + e + v2;
    project_d(y2);
    v1 += u_var - y1;
    v2 += du + e - y2;

    if (it % 25 == 0 || it == max_iter) {
      rp = std::max((u_var - y1).cwiseAbs().maxCoeff(),
                    (du + e - y2).cwiseAbs().maxCoeff());
      rd = (im.rho1 * (y1 - y1_prev) +
            im.rho2 * (im.d_map.transpose() * (y2 - y2_prev)))
               .cwiseAbs()
               .maxCoeff();
      const double scale =
          std::max(1.0, std::max(u_var.cwiseAbs().maxCoeff(),
                                 y2.cwiseAbs().maxCoeff()));
      if (rp <= tol * scale && rd <= tol * scale * im.rho1) break;
    }
  }

  // Trajectory simulation with the optimized inputs.
  SimResult out;
  out.steps = L;
  out.d.resize(L, np);
  out.u.resize(L, np);
  out.b.resize(L, np);
  out.q.resize(L, np);
  out.a.resize(L);
  out.p.resize(L);
  out.gamma = VectorXd::Constant(L, std::numeric_limits<double>::quiet_NaN());
  out.x_norm2.resize(L);
  out.qp_iterations.assign(size_t(L), 0);
  out.fallback.assign(size_t(L), 0);
  out.w = w;
  out.x0_norm1 = x0.lpNorm<1>();
  out.x0_norm2sq = x0.squaredNorm();

  VectorXd x = x0;
  int force_viol = 0, stroke_viol = 0;
  double p_sum = 0.0;
  for (int k = 0; k < L; ++k) {
    const VectorXd uk = u_var.segment(k * np, np);
    const VectorXd wk = w.row(k).transpose();
    const VectorXd wk1 = w.row(k + 1).transpose();
    const VectorXd dk = im.c_d * x + im.dwd * wk;
    const VectorXd qk = im.c_q * x + im.duq * uk + im.dwq0 * wk + im.dwq1 * wk1;
    const double pk =
        -(uk.dot(qk) + uk.dot(im.r_loss * uk) + im.v_d.dot(uk.cwiseAbs()));
    out.u.row(k) = uk.transpose();
    out.d.row(k) = dk.transpose();
    out.q.row(k) = qk.transpose();
    out.a(k) = (im.c_a * x + im.dwa * wk)(0);
    out.p(k) = pk;
    out.b.row(k) = (uk.cwiseAbs() - im.u_max).cwiseMax(0.0).transpose();
    out.x_norm2(k) = x.squaredNorm();
    p_sum += pk;
    if (((uk.cwiseAbs() - im.u_max).array() > 0.0).any()) ++force_viol;
    if (((dk.cwiseAbs() - im.d_max).array() > 0.0).any()) ++stroke_viol;
    x = im.a * x + im.b_u * uk + im.b_w * wk;
  }
  out.p_avg = p_sum / L;
  out.force_violation_rate = double(force_viol) / L;
  out.stroke_violation_rate = double(stroke_viol) / L;
  return out;
}

// --------------------------------------------------------------------------

double student_t_cdf(double t, double dof) {
  // F(t) = 1 - 0.5 I_x(nu/2, 1/2), x = nu/(nu + t^2), for t >= 0.
  auto betacf = [](double a, double b, double x) {
    const int max_it = 300;
    const double eps = 1e-14, fpmin = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::abs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_it; ++m) {
      const int m2 = 2 * m;
      double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
      d = 1.0 + aa * d;
      if (std::abs(d) < fpmin) d = fpmin;
      c = 1.0 + aa / c;
      if (std::abs(c) < fpmin) c = fpmin;
      d = 1.0 / d;
      h *= d * c;
      aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
      d = 1.0 + aa * d;
      if (std::abs(d) < fpmin) d = fpmin;
      c = 1.0 + aa / c;
      if (std::abs(c) < fpmin) c = fpmin;
      d = 1.0 / d;
      const double del = d * c;
      h *= del;
      if (std::abs(del - 1.0) < eps) break;
    }
    return h;
  };
  auto ibeta = [&](double a, double b, double x) -> double {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) -
                            std::lgamma(b) + a * std::log(x) +
                            b * std::log(1.0 - x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
  };
  const double x = dof / (dof + t * t);
  const double tail = 0.5 * ibeta(0.5 * dof, 0.5, x);
  return t >= 0.0 ? 1.0 - tail : tail;
}

double student_t_quantile(double p, double dof) {
  if (p <= 0.0 || p >= 1.0)
    throw std::invalid_argument("student_t_quantile: p in (0,1) required");
  if (p == 0.5) return 0.0;
  const bool upper = p > 0.5;
  const double target = upper ? p : 1.0 - p;
  double lo = 0.0, hi = 1.0;
  while (student_t_cdf(hi, dof) < target) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (student_t_cdf(mid, dof) < target ? lo : hi) = mid;
  }
  const double t = 0.5 * (lo + hi);
  return upper ? t : -t;
}

EnsembleStats ensemble(const std::function<double(int, unsigned long long)>& runner,
                       int n_runs, double confidence,
                       unsigned long long base_seed, int n_threads) {
  if (n_runs < 2) throw std::invalid_argument("ensemble: n_runs >= 2 required");
  EnsembleStats st;
  st.n_runs = n_runs;
  st.per_run.resize(n_runs);

  const int workers = std::max(1, std::min(n_threads, n_runs));
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  std::vector<double> vals(size_t(n_runs), 0.0);
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&]() {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n_runs) return;
        vals[size_t(i)] = runner(i, base_seed + 1000003ull * (i + 1));
      }
    });
  }
  for (auto& th : pool) th.join();

  for (int i = 0; i < n_runs; ++i) st.per_run(i) = vals[size_t(i)];
  st.mean_p_avg = st.per_run.mean();
  const double sd = std::sqrt(
      (st.per_run.array() - st.mean_p_avg).square().sum() / (n_runs - 1));
  const double tq =
      student_t_quantile(1.0 - 0.5 * (1.0 - confidence), double(n_runs - 1));
  const double half = tq * sd / std::sqrt(double(n_runs));
  st.ci_low = st.mean_p_avg - half;
  st.ci_high = st.mean_p_avg + half;
  return st;
}

StabilityBoundReport verify_state_energy_bound(
    const std::function<SimResult(int, unsigned long long)>& trial_runner,
    int trials, unsigned long long base_seed, int n_threads) {
  std::vector<SimResult> results(static_cast<size_t>(trials));
  const int workers = std::max(1, std::min(n_threads, trials));
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&]() {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= trials) return;
        results[size_t(i)] = trial_runner(i, base_seed + 7919ull * (i + 1));
      }
    });
  }
  for (auto& th : pool) th.join();

  StabilityBoundReport rep;
  MatrixXd feat(trials, 4);
  VectorXd target(trials);
  for (int i = 0; i < trials; ++i) {
    const SimResult& r = results[size_t(i)];
    double w1 = 0.0, w2 = 0.0;
    for (int k = 0; k < r.steps; ++k) {
      w1 += r.w.row(k).lpNorm<1>();
      w2 += r.w.row(k).squaredNorm();
    }
    feat(i, 0) = r.x0_norm1;
    feat(i, 1) = r.x0_norm2sq;
    feat(i, 2) = w1;
    feat(i, 3) = w2;
    target(i) = r.x_norm2.sum();
  }

  // Nonnegative least squares on 4 coefficients (active-set on the sign
  // constraints).
  std::vector<int> support = {0, 1, 2, 3};
  Eigen::Vector4d alpha = Eigen::Vector4d::Zero();
  for (int pass = 0; pass < 5; ++pass) {
    MatrixXd fs(trials, support.size());
    for (size_t j = 0; j < support.size(); ++j) fs.col(long(j)) = feat.col(support[j]);
    const VectorXd sol = fs.colPivHouseholderQr().solve(target);
    bool all_nonneg = true;
    std::vector<int> keep;
    for (size_t j = 0; j < support.size(); ++j) {
      if (sol(long(j)) < 0.0)
        all_nonneg = false;
      else
        keep.push_back(support[j]);
    }
    if (all_nonneg) {
      alpha.setZero();
      for (size_t j = 0; j < support.size(); ++j) alpha(support[j]) = sol(long(j));
      break;
    }
    support = keep;
    if (support.empty()) break;
  }

  // Inflate so the bound holds on every trial.
  double inflation = 1.0;
  for (int i = 0; i < trials; ++i) {
    const double rhs = feat.row(i).dot(alpha.transpose());
    if (rhs <= 0.0) {
      inflation = std::numeric_limits<double>::infinity();
      break;
    }
    inflation = std::max(inflation, target(i) / rhs);
  }
  if (!std::isfinite(inflation)) {
    // Degenerate fit (e.g. all-zero data); fall back to a uniform bound.
    alpha.setOnes();
    inflation = 1.0;
    for (int i = 0; i < trials; ++i) {
      const double rhs = feat.row(i).dot(alpha.transpose());
      if (rhs > 0.0) inflation = std::max(inflation, target(i) / rhs);
    }
  }
  alpha *= inflation * (1.0 + 1e-9);
  rep.alpha = alpha;
  rep.inflation = inflation;
  rep.violations = 0;
  for (int i = 0; i < trials; ++i)
    if (target(i) > feat.row(i).dot(alpha.transpose())) ++rep.violations;

  // Trial-averaged running mean square and its final-decade flatness.
  const int steps = results.front().steps;
  rep.running_mean_square = VectorXd::Zero(steps);
  for (const auto& r : results) {
    double acc = 0.0;
    for (int k = 0; k < steps; ++k) {
      acc += r.x_norm2(k);
      rep.running_mean_square(k) += acc / (k + 1);
    }
  }
  rep.running_mean_square /= double(trials);
  const double final_val = rep.running_mean_square(steps - 1);
  double worst = 0.0;
  for (int k = steps / 10; k < steps; ++k)
    worst = std::max(worst, std::abs(rep.running_mean_square(k) - final_val));
  rep.trend_flatness = final_val > 0.0 ? worst / final_val : 0.0;
  return rep;
}

}  // namespace wec::sim
