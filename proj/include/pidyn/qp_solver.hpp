#pragma once

#include <vector>

#include "pidyn/types.hpp"

namespace pidyn {

/// minimise 0.5 x'Hx + g'x  subject to  A x <= b, with H positive definite.
struct QuadraticProgram {
  MatrixXd H;
  VectorXd g;
  MatrixXd A;
  VectorXd b;

  int variables() const { return static_cast<int>(H.rows()); }
  int constraints() const { return static_cast<int>(A.rows()); }
  double objective(const VectorXd& x) const { return 0.5 * x.dot(H * x) + g.dot(x); }
};

struct QPResult {
  VectorXd x;
  VectorXd multipliers;        // one per row of A, zero for inactive rows
  std::vector<int> active_set; // indices into the rows of A
  double objective = 0.0;
  int iterations = 0;
  bool warm_started = false;
};

struct KKTResiduals {
  double stationarity = 0.0;     // ||H x + g + A' nu||_inf
  double primal = 0.0;           // max(0, max(A x - b))
  double dual = 0.0;             // max(0, max(-nu))
  double complementarity = 0.0;  // max |nu_i (A x - b)_i|
};

KKTResiduals kkt_residuals(const QuadraticProgram& qp, const QPResult& result);

/// Dense dual active-set solver (Goldfarb-Idnani) for small strictly convex
/// QPs. Keeps the last optimal active set; on the next call that set is
/// tried first and accepted if its equality-constrained solution is primal
/// and dual feasible.
class ActiveSetQPSolver {
 public:
  explicit ActiveSetQPSolver(int max_iterations = 500, double tolerance = 1e-11)
      : max_iterations_(max_iterations), tolerance_(tolerance) {}

  /// Throws InfeasibleQPError or MaxIterationError.
  QPResult solve(const QuadraticProgram& qp);

  void reset() { warm_active_set_.clear(); }
  const std::vector<int>& warm_active_set() const { return warm_active_set_; }

 private:
  bool try_warm_start(const QuadraticProgram& qp, const Eigen::LLT<MatrixXd>& chol,
                      QPResult& out) const;

  int max_iterations_;
  double tolerance_;
  std::vector<int> warm_active_set_;
};

}  // namespace pidyn
