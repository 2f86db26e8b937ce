#pragma once

// Dense convex quadratic programming:
//   minimize 1/2 z'Hz + f'z   s.t.  A_eq z = b_eq,  A_in z <= b_in
// solved by operator splitting (ADMM) with Ruiz equilibration, an adaptive
// penalty, optional active-set polish, and warm starting.  The KKT-system
// factorization depends only on the matrices, so a solver instance can be
// re-solved cheaply after updating just the vectors.

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

namespace wec::qp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct QuadraticProgram {
  MatrixXd h;    // m x m, symmetric PSD
  VectorXd f;    // m
  MatrixXd a_eq;  // e x m
  VectorXd b_eq;  // e
  MatrixXd a_in;  // i x m
  VectorXd b_in;  // i
  std::vector<std::string> var_names;  // optional diagnostic labels

  int num_vars() const { return int(h.rows()); }
  void validate() const;  // throws on inconsistent shapes / indefinite H

  // Append r auxiliary variables t with constraints +-(m_sel z) <= t and
  // cost weights't.  At any optimum with positive weight, t = |m_sel z|
  // componentwise.  weights must be nonnegative.
  void add_l1_epigraph(const MatrixXd& m_sel, const VectorXd& weights);

  // Append one auxiliary variable per group with rows (m_rows z) <= t_g for
  // every row r in group g, and cost weights't.  Encodes weighted sums of
  // polyhedral gauges max_r (m_rows z)_r.
  void add_max_epigraph(const MatrixXd& m_rows,
                        const std::vector<int>& group_sizes,
                        const VectorXd& weights);

  // Plain-text dump (matrix-market flavoured) for offline debugging.
  void dump(std::ostream& os) const;
};

enum class QpStatus { optimal, max_iter, primal_infeasible };

struct QpSolution {
  VectorXd z;
  VectorXd lambda_eq;
  VectorXd lambda_in;
  QpStatus status = QpStatus::max_iter;
  int iterations = 0;
  double primal_res = 0.0;
  double dual_res = 0.0;
  double objective = 0.0;
};

struct QpSettings {
  double tol_abs = 1e-6;
  double tol_rel = 1e-6;
  int max_iter = 20000;
  double sigma = 1e-6;     // proximal regularization
  double rho = 0.1;        // initial penalty
  double alpha = 1.6;      // over-relaxation
  bool adaptive_rho = true;
  bool scaling = true;     // Ruiz equilibration of the problem data
  bool polish = false;     // active-set refinement after convergence
  int check_every = 25;
};

class QpSolver {
 public:
  explicit QpSolver(QuadraticProgram qp, QpSettings settings = {});
  ~QpSolver();
  QpSolver(QpSolver&&) noexcept;
  QpSolver& operator=(QpSolver&&) noexcept;

  // Replace the cost/constraint vectors; the cached factorization survives.
  void update_vectors(const VectorXd& f, const VectorXd& b_eq,
                      const VectorXd& b_in);

  QpSolution solve(const QpSolution* warm = nullptr);

  const QuadraticProgram& problem() const;
  QpSettings& settings();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// One-shot convenience wrapper.
QpSolution solve(const QuadraticProgram& qp, const QpSolution* warm = nullptr,
                 QpSettings settings = {});

}  // namespace wec::qp
