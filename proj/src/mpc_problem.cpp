#include "cdal/mpc_problem.hpp"

#include <cmath>

namespace cdal {

namespace {

void check_vector(const Eigen::VectorXd& v, int size, const std::string& name) {
  if (v.size() != size) {
    raise(ErrorCode::LengthMismatch, name + " has size " + std::to_string(v.size()) +
                                         ", expected " + std::to_string(size));
  }
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v(i))) raise(ErrorCode::NonFiniteEntry, name + "[" + std::to_string(i) + "]");
  }
}

void check_bounds(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, const std::string& name) {
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    if (lo(i) > hi(i)) {
      raise(ErrorCode::BoundOrderViolation,
            name + " bounds reversed at component " + std::to_string(i));
    }
  }
}

void check_point_dims(const MpcProblem& p, const PrimalPoint& z) {
  const int T = p.horizon;
  if (z.y.rows() != p.model.n_y || z.y.cols() != T || z.u.rows() != p.model.n_u ||
      z.u.cols() != T || z.du.rows() != p.model.n_u || z.du.cols() != T) {
    raise(ErrorCode::DimensionMismatch, "primal point does not match the problem dimensions");
  }
}

}  // namespace

MpcProblem problem_validate(MpcProblem p) {
  if (p.horizon < 1) raise(ErrorCode::LengthMismatch, "horizon must be at least 1");
  p.model = arx_validate(std::move(p.model));
  check_history(p.model, p.history);

  const int n_y = p.model.n_y;
  const int n_u = p.model.n_u;
  check_vector(p.w_y, n_y, "W_y");
  check_vector(p.w_du, n_u, "W_du");
  if ((p.w_y.array() < 0.0).any()) raise(ErrorCode::NegativeWeight, "W_y has a negative entry");
  if ((p.w_du.array() < 0.0).any()) raise(ErrorCode::NegativeWeight, "W_du has a negative entry");

  check_vector(p.y_min, n_y, "y_min");
  check_vector(p.y_max, n_y, "y_max");
  check_vector(p.u_min, n_u, "u_min");
  check_vector(p.u_max, n_u, "u_max");
  check_vector(p.du_min, n_u, "du_min");
  check_vector(p.du_max, n_u, "du_max");
  check_bounds(p.y_min, p.y_max, "output");
  check_bounds(p.u_min, p.u_max, "input");
  check_bounds(p.du_min, p.du_max, "increment");

  if (p.refs.rows() != n_y || p.refs.cols() != p.horizon) {
    raise(ErrorCode::LengthMismatch, "refs is " + std::to_string(p.refs.rows()) + "x" +
                                         std::to_string(p.refs.cols()) + ", expected " +
                                         std::to_string(n_y) + "x" + std::to_string(p.horizon));
  }
  if (!p.refs.allFinite()) raise(ErrorCode::NonFiniteEntry, "refs");
  return p;
}

PrimalPoint zero_primal(const MpcProblem& p) {
  PrimalPoint z;
  z.y = Eigen::MatrixXd::Zero(p.model.n_y, p.horizon);
  z.u = Eigen::MatrixXd::Zero(p.model.n_u, p.horizon);
  z.du = Eigen::MatrixXd::Zero(p.model.n_u, p.horizon);
  return z;
}

DualPoint zero_dual(const MpcProblem& p) {
  DualPoint d;
  d.lam = Eigen::MatrixXd::Zero(p.model.n_y, p.horizon);
  d.gam = Eigen::MatrixXd::Zero(p.model.n_u, p.horizon);
  return d;
}

Eigen::VectorXd y_at(const MpcProblem& p, const PrimalPoint& z, int t) {
  if (t >= 1) return z.y.col(t - 1);
  return p.history.past_y.at(std::size_t(-t));
}

Eigen::VectorXd u_at(const MpcProblem& p, const PrimalPoint& z, int t) {
  if (t >= 0) return z.u.col(t);
  return p.history.past_u.at(std::size_t(-t - 1));
}

Residuals residuals(const MpcProblem& p, const PrimalPoint& z) {
  check_point_dims(p, z);
  const int T = p.horizon;
  Residuals res;
  res.arx.resize(p.model.n_y, T);
  res.inc.resize(p.model.n_u, T);
  for (int t = 1; t <= T; ++t) {
    Eigen::VectorXd r = -y_at(p, z, t);
    for (int i = 1; i <= p.model.n_a; ++i) r.noalias() += p.model.A[i - 1] * y_at(p, z, t - i);
    for (int i = 1; i <= p.model.n_b; ++i) r.noalias() += p.model.B[i - 1] * u_at(p, z, t - i);
    res.arx.col(t - 1) = r;
    res.inc.col(t - 1) = u_at(p, z, t - 2) + z.du.col(t - 1) - u_at(p, z, t - 1);
  }
  return res;
}

double tracking_cost(const MpcProblem& p, const PrimalPoint& z) {
  check_point_dims(p, z);
  double cost = 0.0;
  for (int t = 0; t < p.horizon; ++t) {
    const Eigen::VectorXd dy = z.y.col(t) - p.refs.col(t);
    cost += 0.5 * dy.dot(p.w_y.asDiagonal() * dy);
    cost += 0.5 * z.du.col(t).dot(p.w_du.asDiagonal() * z.du.col(t));
  }
  return cost;
}

double al_objective(const MpcProblem& p, const PrimalPoint& z, const DualPoint& duals,
                    double rho) {
  if (!(rho > 0.0)) raise(ErrorCode::NonPositiveRho, "rho must be positive");
  const Residuals res = residuals(p, z);
  // Duals are scaled, so the linear terms carry a rho factor; dividing the
  // whole expression by rho recovers the inner subproblem objective.
  double value = tracking_cost(p, z);
  value += rho * (duals.lam.cwiseProduct(res.arx).sum() + duals.gam.cwiseProduct(res.inc).sum());
  value += 0.5 * rho * (res.arx.squaredNorm() + res.inc.squaredNorm());
  return value;
}

}  // namespace cdal
