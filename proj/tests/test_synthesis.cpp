#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "support.hpp"
#include "wec/lin.hpp"
#include "wec/spectra.hpp"
#include "wec/synthesis.hpp"

using namespace wec;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {
constexpr double kPi = 3.14159265358979323846;

struct Artifacts {
  ssid::DiscretePlant plant;
  synthesis::RiccatiSolution ricc;
  synthesis::StallRealization stall;
  synthesis::TerminalPenalty tp;
  VectorXd u_max, v_d;
  MatrixXd r_loss;
  double mu = 10.0;
};

const Artifacts& surrogate_artifacts() {
  static const Artifacts art = [] {
    spectra::BuoySurrogateParams p;
    spectra::WaveSpectrum ws(1.0, 9.0);
    const auto fr = spectra::build_surrogate(
        p, ws, spectra::make_default_grid(9.0, 0.5));
    const auto dfd = discretize::build_discrete_data(fr, 0.5, 2048, 256);
    Artifacts a;
    a.plant = ssid::fit_plant(dfd, 8);
    a.r_loss = 1e-3 * MatrixXd::Identity(1, 1);
    a.v_d = 1e-3 * VectorXd::Ones(1);
    a.u_max = 0.5 * VectorXd::Ones(1);
    a.ricc = synthesis::solve_kyp_riccati(a.plant, a.r_loss);
    a.stall = synthesis::build_stall(a.plant);
    a.tp = synthesis::build_terminal_penalty(a.plant, a.ricc, a.stall, a.mu,
                                             a.v_d, a.u_max);
    return a;
  }();
  return art;
}
}  // namespace

TEST_CASE("riccati: zero cross weight gives the zero solution") {
  std::mt19937_64 rng(1);
  const int n = 5;
  MatrixXd a = testsupport::randn(n, n, rng);
  a *= 0.8 / lin::spectral_radius(a);
  const MatrixXd b = testsupport::randn(n, 1, rng);
  const MatrixXd rtil = 2.0 * MatrixXd::Identity(1, 1);
  const auto res = lin::solve_dare(a, b, MatrixXd::Zero(n, n), rtil,
                                   MatrixXd::Zero(n, 1));
  CHECK(res.converged);
  CHECK(res.x.norm() <= 1e-12);
  CHECK(res.k.norm() <= 1e-12);
}

TEST_CASE("riccati: scalar case matches the closed-form fixed point") {
  // a = 0.5, b = 1, c_q = 1, Rtilde = 1 collapse to W = 1/4, M = 3/4,
  // F = -1/2 (one-step fixed point of the defining equations).
  ssid::DiscretePlant plant;
  plant.t_samp = 1.0;
  plant.a = 0.5 * MatrixXd::Identity(1, 1);
  plant.b_u = MatrixXd::Identity(1, 1);
  // c_q = c_d (a - I) / T = 1  ->  c_d = 1/(a-1) = -2.
  plant.c_d = -2.0 * MatrixXd::Identity(1, 1);
  plant.c_a = MatrixXd::Zero(1, 1);
  plant.b_w = MatrixXd::Zero(1, 2);
  plant.s_w = MatrixXd::Zero(2, 2);
  CHECK(plant.c_q()(0, 0) == doctest::Approx(1.0));
  const double duq = plant.d_uq()(0, 0);  // -2
  // Rtilde = R + (duq + duq)/2 = 1  ->  R = 1 + 2 = 3.
  const MatrixXd r = (1.0 - duq) * MatrixXd::Identity(1, 1);
  const auto sol = synthesis::solve_kyp_riccati(plant, r);
  CHECK(sol.w(0, 0) == doctest::Approx(0.25).epsilon(1e-10));
  CHECK(sol.m(0, 0) == doctest::Approx(0.75).epsilon(1e-10));
  CHECK(sol.f(0, 0) == doctest::Approx(-0.5).epsilon(1e-10));
  CHECK(sol.residual <= 1e-10);
}

TEST_CASE("riccati: surrogate synthesis satisfies every invariant") {
  const auto& art = surrogate_artifacts();
  const auto& plant = art.plant;
  const auto& sol = art.ricc;

  CHECK(sol.residual <= 1e-8);
  CHECK(lin::min_sym_eig(sol.m) > 0.0);
  CHECK(lin::min_sym_eig(sol.w) >= -1e-10 * (1.0 + sol.w.norm()));
  CHECK(lin::spectral_radius(plant.a + plant.b_u * sol.f) < 1.0);
  CHECK(sol.p_bar >= 0.0);

  // E W E' > 0 on the subspace observable from c_q.
  const MatrixXd e = lin::observable_rows(plant.a, plant.c_q());
  const MatrixXd ewe = e * sol.w * e.transpose();
  CHECK(lin::min_sym_eig(ewe) > 0.0);

  // M = Rtilde - B'WB explicitly.
  const MatrixXd duq = plant.d_uq();
  const MatrixXd m_expl = art.r_loss + 0.5 * (duq + duq.transpose()) -
                          plant.b_u.transpose() * sol.w * plant.b_u;
  CHECK((sol.m - m_expl).norm() <= 1e-10 * (1.0 + sol.m.norm()));

  // p_bar = trace(B_w' W B_w S_w).
  const double pb =
      (plant.b_w.transpose() * sol.w * plant.b_w * plant.s_w).trace();
  CHECK(sol.p_bar == doctest::Approx(pb));
}

TEST_CASE("stall realization: identities and stability") {
  const auto& art = surrogate_artifacts();
  const auto& plant = art.plant;
  const auto& st = art.stall;
  const int n = plant.n();
  const int ns = st.n_s();

  CHECK((st.bu_perp * plant.b_u).norm() <= 1e-10);
  CHECK((plant.c_d * st.cd_perp).norm() <= 1e-10);
  CHECK((st.bu_perp * st.c_s - MatrixXd::Identity(ns, ns)).norm() <= 1e-10);
  CHECK((plant.c_d * st.d_ds - MatrixXd::Identity(1, 1)).norm() <= 1e-10);
  CHECK((plant.c_d * st.c_s).norm() <= 1e-10);
  CHECK((st.bu_perp * st.d_ds).norm() <= 1e-10);
  CHECK(lin::spectral_radius(st.a_s) < 1.0);

  // [C_d; B_u_perp]^{-1} = [D_ds  C_s] block identity.
  MatrixXd stack(n, n);
  stack.topRows(1) = plant.c_d;
  stack.bottomRows(ns) = st.bu_perp;
  MatrixXd inv(n, n);
  inv.leftCols(1) = st.d_ds;
  inv.rightCols(ns) = st.c_s;
  CHECK((stack * inv - MatrixXd::Identity(n, n)).norm() <= 1e-9);
}

TEST_CASE("stall realization: random passive plants") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    auto plant = testsupport::random_passive_plant(2 + int(rng() % 2), 0.4, rng);
    const auto st = synthesis::build_stall(plant);
    const int ns = st.n_s();
    CHECK(lin::spectral_radius(st.a_s) < 1.0);
    CHECK((st.bu_perp * st.c_s - MatrixXd::Identity(ns, ns)).norm() <= 1e-12 * ns);
  }
}

TEST_CASE("stall realization: no internal states when n = n_p") {
  ssid::DiscretePlant plant;
  plant.t_samp = 1.0;
  plant.a = 0.5 * MatrixXd::Identity(1, 1);
  plant.b_u = MatrixXd::Identity(1, 1);
  plant.c_d = MatrixXd::Identity(1, 1);
  plant.c_a = MatrixXd::Zero(1, 1);
  plant.b_w = MatrixXd::Zero(1, 2);
  plant.s_w = MatrixXd::Zero(2, 2);
  const auto st = synthesis::build_stall(plant);
  CHECK(st.n_s() == 0);
  const auto ricc = synthesis::solve_kyp_riccati(
      plant, (1.0 - plant.d_uq()(0, 0) + 1.0) * MatrixXd::Identity(1, 1));
  const auto tp = synthesis::build_terminal_penalty(
      plant, ricc, st, 10.0, VectorXd::Ones(1), VectorXd::Ones(1));
  CHECK(tp.q_f.norm() == 0.0);
  CHECK(tp.c_f.rows() == 0);
  CHECK(tp.eval(VectorXd::Ones(1)) == 0.0);
}

TEST_CASE("terminal penalty: lyapunov residuals and structure") {
  const auto& art = surrogate_artifacts();
  const auto& st = art.stall;
  const auto& tp = art.tp;
  const auto& plant = art.plant;
  const int ns = st.n_s();

  const MatrixXd duq_inv = plant.d_uq().inverse();
  const MatrixXd feed = art.ricc.f + duq_inv * plant.c_q();
  const MatrixXd qz = st.c_s.transpose() * feed.transpose() * art.ricc.m *
                      feed * st.c_s;
  CHECK((tp.z_lyap - st.a_s.transpose() * tp.z_lyap * st.a_s - qz).norm() <=
        1e-9 * (1.0 + tp.z_lyap.norm()));
  const MatrixXd um = duq_inv * plant.c_q() * st.c_s;
  const MatrixXd qx = um.transpose() * um;
  CHECK((tp.x_lyap - st.a_s.transpose() * tp.x_lyap * st.a_s - qx).norm() <=
        1e-9 * (1.0 + tp.x_lyap.norm()));

  const MatrixXd qf_expl = st.bu_perp.transpose() *
                           (tp.z_lyap + 0.25 * art.mu * tp.x_lyap) *
                           st.bu_perp;
  CHECK((tp.q_f - qf_expl).norm() <= 1e-12 * (1.0 + tp.q_f.norm()));
  CHECK(lin::min_sym_eig(tp.q_f) >= -1e-10 * (1.0 + tp.q_f.norm()));
  CHECK(tp.pi_cond < 1e6);
  CHECK(tp.lambda.cwiseAbs().maxCoeff() < 1.0);
  CHECK(tp.g_modal.minCoeff() >= 0.0);
  CHECK(tp.c_f.rows() == ns);
}

TEST_CASE("terminal penalty: vanishing diode weight removes the gauge part") {
  const auto& art = surrogate_artifacts();
  const auto tp0 = synthesis::build_terminal_penalty(
      art.plant, art.ricc, art.stall, 1e-9, VectorXd::Zero(1), art.u_max);
  CHECK(tp0.g_modal.norm() == 0.0);
  CHECK(tp0.group_weights.size() == 0);
  const MatrixXd qz = art.stall.bu_perp.transpose() * tp0.z_lyap *
                      art.stall.bu_perp;
  CHECK((tp0.q_f - qz).norm() <= 1e-7 * (1.0 + qz.norm()));
  std::mt19937_64 rng(2);
  const VectorXd x = testsupport::randn(art.plant.n(), 1, rng);
  CHECK(tp0.eval(x) == doctest::Approx(x.dot(tp0.q_f * x)));
}

TEST_CASE("terminal penalty: truncated tail cost is over-bounded, with the "
          "modal bound sandwiched between") {
  const auto& art = surrogate_artifacts();
  std::mt19937_64 rng(33);
  const int ns = art.stall.n_s();
  for (int s = 0; s < 30; ++s) {
    VectorXd zeta = testsupport::randn(ns, 1, rng);
    const double scale = std::pow(10.0, (s % 7) - 3);
    const VectorXd x = scale * (art.stall.c_s * zeta);
    const double rho_n = synthesis::truncated_stall_cost(
        art.plant, art.ricc, art.stall, art.mu, art.v_d, art.u_max, x, 5000);
    const double jf_modal = art.tp.eval_modal(x);
    const double jf_poly = art.tp.eval(x);
    CHECK(rho_n <= jf_modal * (1.0 + 1e-9) + 1e-12);
    CHECK(jf_modal <= jf_poly * (1.0 + 1e-9) + 1e-12);
  }
}

TEST_CASE("terminal penalty: randomized bound and decrement verification") {
  const auto& art = surrogate_artifacts();
  const auto rep = synthesis::verify_terminal_penalty(
      art.plant, art.ricc, art.stall, art.tp, art.u_max, 100, 1234, 5000);
  INFO("bound margin ", rep.worst_bound_margin, " decrement margin ",
       rep.worst_decrement_margin);
  CHECK(rep.bound_failures == 0);
  CHECK(rep.decrement_failures == 0);
  CHECK(rep.passed);
}

TEST_CASE("terminal penalty: zero state is an exact fixed point") {
  const auto& art = surrogate_artifacts();
  const VectorXd x0 = VectorXd::Zero(art.plant.n());
  CHECK(art.tp.eval(x0) == 0.0);
  CHECK(synthesis::truncated_stall_cost(art.plant, art.ricc, art.stall,
                                        art.mu, art.v_d, art.u_max, x0,
                                        100) == 0.0);
}

TEST_CASE("stall realization: rejects a singular feedthrough") {
  const auto& art = surrogate_artifacts();
  auto plant = art.plant;
  plant.b_u.setZero();  // D_uq = C_d B_u / T becomes singular
  CHECK_THROWS(synthesis::build_stall(plant));
}
