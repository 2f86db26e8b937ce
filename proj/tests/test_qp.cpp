#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "wec/qp.hpp"

using namespace wec;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Exhaustive active-set oracle for small dense QPs.  Enumerates every
// candidate active set of the inequalities, solves the KKT system, and keeps
// the best feasible dual-nonnegative point.  H may be singular on auxiliary
// coordinates; inconsistent subsets are skipped.
double active_set_oracle(const qp::QuadraticProgram& p, VectorXd* zbest = nullptr) {
  const int m = p.num_vars();
  const int ne = int(p.a_eq.rows());
  const int ni = int(p.a_in.rows());
  REQUIRE(ni <= 16);
  double best = std::numeric_limits<double>::infinity();
  for (long mask = 0; mask < (1L << ni); ++mask) {
    std::vector<int> act;
    for (int i = 0; i < ni; ++i)
      if (mask & (1L << i)) act.push_back(i);
    const int na = int(act.size());
    if (ne + na > m) continue;
    MatrixXd kkt = MatrixXd::Zero(m + ne + na, m + ne + na);
    kkt.topLeftCorner(m, m) = p.h;
    VectorXd rhs(m + ne + na);
    rhs.head(m) = -p.f;
    if (ne > 0) {
      kkt.block(m, 0, ne, m) = p.a_eq;
      kkt.block(0, m, m, ne) = p.a_eq.transpose();
      rhs.segment(m, ne) = p.b_eq;
    }
    for (int r = 0; r < na; ++r) {
      kkt.block(m + ne + r, 0, 1, m) = p.a_in.row(act[r]);
      kkt.block(0, m + ne + r, m, 1) = p.a_in.row(act[r]).transpose();
      rhs(m + ne + r) = p.b_in(act[r]);
    }
    Eigen::FullPivLU<MatrixXd> lu(kkt);
    if (!lu.isInjective()) continue;
    const VectorXd sol = lu.solve(rhs);
    const VectorXd z = sol.head(m);
    bool ok = true;
    if (ni > 0 && (p.a_in * z - p.b_in).maxCoeff() > 1e-9) ok = false;
    for (int r = 0; r < na && ok; ++r)
      if (sol(m + ne + r) < -1e-9) ok = false;
    if (!ok) continue;
    const double obj = 0.5 * z.dot(p.h * z) + p.f.dot(z);
    if (obj < best) {
      best = obj;
      if (zbest) *zbest = z;
    }
  }
  return best;
}

qp::QuadraticProgram random_qp(std::mt19937_64& rng, int m, int ni, int ne,
                               bool with_l1) {
  std::normal_distribution<double> g(0.0, 1.0);
  auto randn = [&](int r, int c) {
    MatrixXd a(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) a(i, j) = g(rng);
    return a;
  };
  qp::QuadraticProgram p;
  const MatrixXd b = randn(m, m);
  p.h = b * b.transpose() + 0.5 * MatrixXd::Identity(m, m);
  p.f = randn(m, 1);
  // Anchor all constraints around a strictly feasible point.
  const VectorXd z0 = 0.3 * randn(m, 1);
  p.a_eq = randn(ne, m);
  p.b_eq = p.a_eq * z0;
  p.a_in = randn(ni, m);
  p.b_in = p.a_in * z0 + randn(ni, 1).cwiseAbs() + VectorXd::Constant(ni, 0.5);
  if (p.a_eq.rows() == 0) p.a_eq.resize(0, m);
  if (p.a_in.rows() == 0) p.a_in.resize(0, m);
  if (with_l1) {
    const MatrixXd sel = randn(2, m);
    VectorXd w(2);
    w << std::abs(g(rng)) + 0.1, std::abs(g(rng)) + 0.1;
    p.add_l1_epigraph(sel, w);
  }
  return p;
}

}  // namespace

TEST_CASE("unconstrained: H = I, f = 0 gives z = 0") {
  qp::QuadraticProgram p;
  p.h = MatrixXd::Identity(4, 4);
  p.f = VectorXd::Zero(4);
  p.a_eq.resize(0, 4);
  p.b_eq.resize(0);
  p.a_in.resize(0, 4);
  p.b_in.resize(0);
  const auto sol = qp::solve(p);
  CHECK(sol.status == qp::QpStatus::optimal);
  CHECK(sol.z.norm() <= 1e-6);
}

TEST_CASE("hand KKT: min 1/2 z^2 - z s.t. z <= 0") {
  qp::QuadraticProgram p;
  p.h = MatrixXd::Identity(1, 1);
  p.f = -VectorXd::Ones(1);
  p.a_eq.resize(0, 1);
  p.b_eq.resize(0);
  p.a_in = MatrixXd::Identity(1, 1);
  p.b_in = VectorXd::Zero(1);
  qp::QpSettings st;
  st.polish = true;
  const auto sol = qp::solve(p, nullptr, st);
  CHECK(sol.status == qp::QpStatus::optimal);
  CHECK(std::abs(sol.z(0)) <= 1e-7);
  CHECK(sol.lambda_in(0) == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("l1 epigraph: scalar min |z| s.t. z >= 1") {
  qp::QuadraticProgram p;
  p.h = MatrixXd::Zero(1, 1);
  p.f = VectorXd::Zero(1);
  p.a_eq.resize(0, 1);
  p.b_eq.resize(0);
  p.a_in = -MatrixXd::Identity(1, 1);
  p.b_in = -VectorXd::Ones(1);
  p.add_l1_epigraph(MatrixXd::Identity(1, 1), VectorXd::Ones(1));
  qp::QpSettings st;
  st.polish = true;
  const auto sol = qp::solve(p, nullptr, st);
  CHECK(sol.status == qp::QpStatus::optimal);
  CHECK(sol.z(0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(sol.z(1) == doctest::Approx(1.0).epsilon(1e-6));  // t = |z|
  CHECK(sol.objective == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("l1 epigraph: zero weights leave the objective unchanged") {
  std::mt19937_64 rng(1);
  auto p = random_qp(rng, 4, 3, 0, false);
  const double ref = active_set_oracle(p);
  p.add_l1_epigraph(MatrixXd::Identity(4, 4).topRows(2), VectorXd::Zero(2));
  qp::QpSettings st;
  st.polish = true;
  const auto sol = qp::solve(p, nullptr, st);
  CHECK(sol.status == qp::QpStatus::optimal);
  CHECK(sol.objective == doctest::Approx(ref).epsilon(1e-6));
}

TEST_CASE("batch: 200 random strictly convex QPs match the active-set oracle") {
  std::mt19937_64 rng(2024);
  qp::QpSettings st;
  st.tol_abs = 1e-9;
  st.tol_rel = 1e-9;
  st.polish = true;
  int worst_iters = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int m = 2 + int(rng() % 6);
    const int ni = 2 + int(rng() % 7);
    const int ne = int(rng() % std::min(2, m - 1));
    auto p = random_qp(rng, m, ni, ne, trial % 2 == 1);
    const double ref = active_set_oracle(p);
    REQUIRE(std::isfinite(ref));
    const auto sol = qp::solve(p, nullptr, st);
    REQUIRE(sol.status == qp::QpStatus::optimal);
    CHECK(std::abs(sol.objective - ref) <= 1e-6 * (1.0 + std::abs(ref)));
    worst_iters = std::max(worst_iters, sol.iterations);

    // KKT residuals of the returned solution
    VectorXd dual = p.h * sol.z + p.f;
    if (p.a_eq.rows() > 0) dual += p.a_eq.transpose() * sol.lambda_eq;
    if (p.a_in.rows() > 0) dual += p.a_in.transpose() * sol.lambda_in;
    CHECK(dual.cwiseAbs().maxCoeff() <= 10.0 * 1e-6);
    if (p.a_in.rows() > 0) {
      const VectorXd slack = p.b_in - p.a_in * sol.z;
      CHECK(slack.minCoeff() >= -10.0 * 1e-6);
      CHECK(std::abs(sol.lambda_in.dot(slack)) <= 1e-4);
      CHECK(sol.lambda_in.minCoeff() >= 0.0);
    }
  }
  CHECK(worst_iters <= 20000);
}

TEST_CASE("5-var LP with l1 term matches vertex-enumeration oracle") {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 5;
    qp::QuadraticProgram p;
    p.h = MatrixXd::Zero(m, m);
    p.f = VectorXd::Zero(m);
    for (int i = 0; i < m; ++i) p.f(i) = g(rng);
    MatrixXd a(4, m);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < m; ++j) a(i, j) = g(rng);
    p.a_in = MatrixXd(4 + 2 * m, m);
    p.a_in.topRows(4) = a;
    p.a_in.middleRows(4, m) = MatrixXd::Identity(m, m);
    p.a_in.bottomRows(m) = -MatrixXd::Identity(m, m);
    p.b_in = VectorXd(4 + 2 * m);
    for (int i = 0; i < 4; ++i) p.b_in(i) = std::abs(g(rng)) + 0.3;
    p.b_in.segment(4, m).setConstant(2.0);
    p.b_in.tail(m).setConstant(2.0);
    p.a_eq.resize(0, m);
    p.b_eq.resize(0);
    MatrixXd sel(1, m);
    for (int j = 0; j < m; ++j) sel(0, j) = g(rng);
    p.add_l1_epigraph(sel, VectorXd::Ones(1));

    // Vertex enumeration on the epigraph form (LP: optimum at a vertex).
    const int mv = p.num_vars();
    const int ni = int(p.a_in.rows());
    double ref = std::numeric_limits<double>::infinity();
    std::vector<int> idx(ni);
    for (int i = 0; i < ni; ++i) idx[i] = i;
    std::vector<int> comb(mv);
    std::function<void(int, int)> rec = [&](int start, int k) {
      if (k == mv) {
        MatrixXd basis(mv, mv);
        VectorXd rhs(mv);
        for (int r = 0; r < mv; ++r) {
          basis.row(r) = p.a_in.row(comb[r]);
          rhs(r) = p.b_in(comb[r]);
        }
        Eigen::FullPivLU<MatrixXd> lu(basis);
        if (!lu.isInvertible()) return;
        const VectorXd z = lu.solve(rhs);
        if ((p.a_in * z - p.b_in).maxCoeff() > 1e-9) return;
        ref = std::min(ref, p.f.dot(z));
        return;
      }
      for (int i = start; i <= ni - (mv - k); ++i) {
        comb[k] = i;
        rec(i + 1, k + 1);
      }
    };
    rec(0, 0);
    REQUIRE(std::isfinite(ref));

    qp::QpSettings st;
    st.tol_abs = 1e-10;
    st.tol_rel = 1e-10;
    st.polish = true;
    const auto sol = qp::solve(p, nullptr, st);
    REQUIRE(sol.status == qp::QpStatus::optimal);
    CHECK(std::abs(sol.objective - ref) <= 1e-8 * (1.0 + std::abs(ref)));
  }
}

TEST_CASE("warm start cuts iterations on a perturbed re-solve") {
  std::mt19937_64 rng(9);
  auto p = random_qp(rng, 20, 12, 2, false);
  qp::QpSettings st;
  st.adaptive_rho = false;
  qp::QpSolver solver(p, st);
  const auto cold = solver.solve();
  REQUIRE(cold.status == qp::QpStatus::optimal);

  VectorXd f2 = p.f;
  f2 += 1e-3 * VectorXd::Random(f2.size());
  solver.update_vectors(f2, p.b_eq, p.b_in);
  const auto cold2 = solver.solve();
  const auto warm = solver.solve(&cold);
  REQUIRE(warm.status == qp::QpStatus::optimal);
  CHECK(warm.iterations <= cold2.iterations / 2);
}

TEST_CASE("infeasible equalities are detected") {
  qp::QuadraticProgram p;
  p.h = MatrixXd::Identity(2, 2);
  p.f = VectorXd::Zero(2);
  p.a_eq = MatrixXd(1, 2);
  p.a_eq << 1.0, 0.0;
  p.b_eq = VectorXd::Constant(1, 1.0);
  p.a_in = MatrixXd(1, 2);
  p.a_in << 1.0, 0.0;
  p.b_in = VectorXd::Constant(1, -1.0);  // x0 <= -1 contradicts x0 = 1
  const auto sol = qp::solve(p);
  CHECK(sol.status == qp::QpStatus::primal_infeasible);
}

TEST_CASE("validate rejects broken problems") {
  qp::QuadraticProgram p;
  p.h = MatrixXd::Identity(2, 2);
  p.h(0, 1) = 0.5;  // asymmetric
  p.f = VectorXd::Zero(2);
  p.a_eq.resize(0, 2);
  p.b_eq.resize(0);
  p.a_in.resize(0, 2);
  p.b_in.resize(0);
  CHECK_THROWS(p.validate());
}
