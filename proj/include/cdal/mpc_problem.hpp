#pragma once

#include <Eigen/Dense>

#include "cdal/arx_model.hpp"

namespace cdal {

/// Finite-horizon tracking problem over an ARX model:
///   min 1/2 sum_t ||y_t - r_t||^2_{W_y} + ||du_{t-1}||^2_{W_du}
///   s.t. ARX dynamics, du_t = u_t - u_{t-1}, and box constraints on
///        outputs, inputs, and input increments.
/// Weights are diagonal and stored as vectors.
struct MpcProblem {
  int horizon = 0;          // T
  Eigen::VectorXd w_y;      // n_y, entrywise >= 0
  Eigen::VectorXd w_du;     // n_u, entrywise >= 0
  Eigen::VectorXd y_min, y_max;
  Eigen::VectorXd u_min, u_max;
  Eigen::VectorXd du_min, du_max;
  Eigen::MatrixXd refs;     // n_y x T, column t-1 is r_t
  ArxModel model;
  ArxHistory history;
};

MpcProblem problem_validate(MpcProblem problem);

/// Decision variables, one column per stage:
///   y: n_y x T holds y_1..y_T
///   u: n_u x T holds u_0..u_{T-1}
///   du: n_u x T holds du_0..du_{T-1}
struct PrimalPoint {
  Eigen::MatrixXd y, u, du;
};

PrimalPoint zero_primal(const MpcProblem& problem);

/// Multipliers of the two equality families, one column per stage t=1..T.
struct DualPoint {
  Eigen::MatrixXd lam;  // n_y x T, ARX dynamics rows
  Eigen::MatrixXd gam;  // n_u x T, input-increment rows
};

DualPoint zero_dual(const MpcProblem& problem);

/// Equality residuals at z, one column per stage t=1..T:
///   arx column t-1:  sum_i A(i) y_{t-i} + sum_i B(i) u_{t-i} - y_t
///   inc column t-1:  u_{t-2} + du_{t-1} - u_{t-1}
/// Indices at or below zero read from problem.history.
struct Residuals {
  Eigen::MatrixXd arx;  // n_y x T
  Eigen::MatrixXd inc;  // n_u x T
};

Residuals residuals(const MpcProblem& problem, const PrimalPoint& z);

/// Tracking cost of z (the quadratic objective alone).
double tracking_cost(const MpcProblem& problem, const PrimalPoint& z);

/// Augmented Lagrangian value with scaled duals:
///   tracking_cost + rho * (lam . res_arx + gam . res_inc)
///                 + rho/2 * (||res_arx||^2 + ||res_inc||^2)
/// Dividing by rho gives the objective the coordinate passes minimize.
double al_objective(const MpcProblem& problem, const PrimalPoint& z,
                    const DualPoint& duals, double rho);

/// Stage-indexed access used throughout the solver. t follows the problem
/// convention: y_at accepts 1-n_a..T, u_at accepts -n_b..T-1.
Eigen::VectorXd y_at(const MpcProblem& problem, const PrimalPoint& z, int t);
Eigen::VectorXd u_at(const MpcProblem& problem, const PrimalPoint& z, int t);

}  // namespace cdal
