#include "pidyn/qp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace pidyn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

MatrixXd active_normals(const QuadraticProgram& qp, const std::vector<int>& active) {
  MatrixXd n(qp.variables(), static_cast<Eigen::Index>(active.size()));
  for (std::size_t i = 0; i < active.size(); ++i) n.col(i) = qp.A.row(active[i]).transpose();
  return n;
}

}  // namespace

KKTResiduals kkt_residuals(const QuadraticProgram& qp, const QPResult& result) {
  KKTResiduals r;
  const VectorXd grad = qp.H * result.x + qp.g + qp.A.transpose() * result.multipliers;
  r.stationarity = grad.size() ? grad.cwiseAbs().maxCoeff() : 0.0;
  if (qp.constraints() > 0) {
    const VectorXd slack = qp.A * result.x - qp.b;
    r.primal = std::max(0.0, slack.maxCoeff());
    r.dual = std::max(0.0, (-result.multipliers).maxCoeff());
    r.complementarity = result.multipliers.cwiseProduct(slack).cwiseAbs().maxCoeff();
  }
  return r;
}

bool ActiveSetQPSolver::try_warm_start(const QuadraticProgram& qp,
                                       const Eigen::LLT<MatrixXd>& chol,
                                       QPResult& out) const {
  if (warm_active_set_.empty()) return false;
  for (int j : warm_active_set_) {
    if (j < 0 || j >= qp.constraints()) return false;
  }
  const MatrixXd n = active_normals(qp, warm_active_set_);
  const MatrixXd hinv_n = chol.solve(n);
  const VectorXd hinv_g = chol.solve(qp.g);
  // H x + g + N nu = 0, N' x = b_active
  const MatrixXd schur = n.transpose() * hinv_n;
  Eigen::LDLT<MatrixXd> ldlt(schur);
  if (ldlt.info() != Eigen::Success) return false;
  const VectorXd d = ldlt.vectorD();
  if (d.minCoeff() <= 1e-12 * std::max(1.0, d.cwiseAbs().maxCoeff())) return false;
  VectorXd b_active(warm_active_set_.size());
  for (std::size_t i = 0; i < warm_active_set_.size(); ++i) b_active[i] = qp.b[warm_active_set_[i]];
  const VectorXd nu = -ldlt.solve(b_active + n.transpose() * hinv_g);
  if (nu.size() && nu.minCoeff() < -tolerance_) return false;
  const VectorXd x = -hinv_g - hinv_n * nu;
  const VectorXd slack = qp.A * x - qp.b;
  const double scale = 1.0 + qp.b.cwiseAbs().maxCoeff();
  if (slack.size() && slack.maxCoeff() > tolerance_ * scale) return false;

  out.x = x;
  out.multipliers = VectorXd::Zero(qp.constraints());
  for (std::size_t i = 0; i < warm_active_set_.size(); ++i) {
    out.multipliers[warm_active_set_[i]] = std::max(0.0, nu[i]);
  }
  out.active_set = warm_active_set_;
  out.iterations = 0;
  out.warm_started = true;
  return true;
}

QPResult ActiveSetQPSolver::solve(const QuadraticProgram& qp) {
  const int n = qp.variables();
  const int m = qp.constraints();
  if (qp.H.cols() != n || qp.g.size() != n || qp.A.cols() != n || qp.b.size() != m) {
    throw DimensionError("QP dimensions are inconsistent");
  }
  const Eigen::LLT<MatrixXd> chol(qp.H);
  if (chol.info() != Eigen::Success) throw Error("QP Hessian is not positive definite");

  QPResult out;
  if (try_warm_start(qp, chol, out)) {
    out.objective = qp.objective(out.x);
    return out;
  }

  const MatrixXd h_inv = chol.solve(MatrixXd::Identity(n, n));
  const double scale = 1.0 + (m ? qp.b.cwiseAbs().maxCoeff() : 0.0);
  VectorXd x = -h_inv * qp.g;
  std::vector<int> active;
  std::vector<double> nu;

  int iterations = 0;
  while (true) {
    // Most violated inactive constraint.
    int p = -1;
    double worst = tolerance_ * scale;
    for (int j = 0; j < m; ++j) {
      if (std::find(active.begin(), active.end(), j) != active.end()) continue;
      const double v = qp.A.row(j).dot(x) - qp.b[j];
      if (v > worst) {
        worst = v;
        p = j;
      }
    }
    if (p < 0) break;

    double nu_p = 0.0;
    while (true) {
      if (++iterations > max_iterations_) {
        throw MaxIterationError(fmt::format("QP exceeded {} iterations", max_iterations_));
      }
      const VectorXd a_p = qp.A.row(p).transpose();
      VectorXd z;
      VectorXd r;
      if (active.empty()) {
        z = -h_inv * a_p;
      } else {
        const MatrixXd nmat = active_normals(qp, active);
        const MatrixXd hinv_n = h_inv * nmat;
        const MatrixXd schur = nmat.transpose() * hinv_n;
        r = schur.ldlt().solve(hinv_n.transpose() * a_p);
        z = -(h_inv * a_p - hinv_n * r);
      }

      // Dual step limit from active multipliers that would go negative.
      double t1 = kInf;
      int drop = -1;
      for (std::size_t i = 0; i < active.size(); ++i) {
        if (r[i] > 1e-14) {
          const double t = nu[i] / r[i];
          if (t < t1) {
            t1 = t;
            drop = static_cast<int>(i);
          }
        }
      }
      // Primal step that makes constraint p active.
      const double curvature = -a_p.dot(z);
      const double violation = a_p.dot(x) - qp.b[p];
      double t2 = kInf;
      if (curvature > 1e-14 * std::max(1.0, a_p.squaredNorm())) t2 = violation / curvature;

      if (t1 == kInf && t2 == kInf) {
        throw InfeasibleQPError(
            fmt::format("QP infeasible: constraint {} cannot be satisfied", p));
      }
      if (t2 == kInf) {
        for (std::size_t i = 0; i < active.size(); ++i) nu[i] -= t1 * r[i];
        nu_p += t1;
        active.erase(active.begin() + drop);
        nu.erase(nu.begin() + drop);
        continue;
      }
      const double t = std::min(t1, t2);
      x += t * z;
      for (std::size_t i = 0; i < active.size(); ++i) nu[i] -= t * r[i];
      nu_p += t;
      if (t2 <= t1) {
        active.push_back(p);
        nu.push_back(nu_p);
        break;
      }
      active.erase(active.begin() + drop);
      nu.erase(nu.begin() + drop);
    }
  }

  out.x = x;
  out.multipliers = VectorXd::Zero(m);
  for (std::size_t i = 0; i < active.size(); ++i) out.multipliers[active[i]] = std::max(0.0, nu[i]);
  std::vector<int> sorted = active;
  std::sort(sorted.begin(), sorted.end());
  out.active_set = sorted;
  out.iterations = iterations;
  out.objective = qp.objective(x);
  warm_active_set_ = sorted;
  return out;
}

}  // namespace pidyn
