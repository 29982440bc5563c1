#pragma once

#include <Eigen/Dense>
#include <string>

#include "cdal/mpc_problem.hpp"

namespace cdal {

/// Explicit QP equivalent of an MpcProblem, in the stage-interleaved variable
/// order z = [y_1' u_0' du_0' | y_2' u_1' du_1' | ...], n_z = T(n_y + 2 n_u):
///   min 1/2 z'diag(H)z + h'z + constant   s.t.  E z = b,  lo <= z <= hi
/// E stacks the T*n_y ARX rows first, then the T*n_u increment rows; b
/// absorbs all history terms. `constant` keeps the reference term explicit so
/// objective values match the tracking cost exactly.
struct SparseQp {
  Eigen::VectorXd H;  // diagonal of the Hessian
  Eigen::VectorXd h;
  double constant = 0.0;
  Eigen::MatrixXd E;
  Eigen::VectorXd b;
  Eigen::VectorXd lo, hi;

  int n_y = 0, n_u = 0, horizon = 0;
};

SparseQp build_sparse_qp(const MpcProblem& problem);

double qp_objective(const SparseQp& qp, const Eigen::VectorXd& z);

/// Flatten / restore a PrimalPoint to and from the QP variable order.
Eigen::VectorXd pack_primal(const PrimalPoint& z);
PrimalPoint unpack_primal(const Eigen::VectorXd& z, int n_y, int n_u, int horizon);

/// Row rank of E (debug utility for the constraint-qualification assumption).
int equality_rank(const SparseQp& qp);

/// Ignores the bounds and solves the equality-constrained QP through its KKT
/// system by direct elimination. Throws RankDeficient when the system is
/// singular (e.g. duplicated equality rows).
Eigen::VectorXd kkt_equality_solve(const SparseQp& qp);

struct ReferenceSolveInfo {
  long iterations = 0;
  bool polished = false;
};

/// Operator-splitting solve of the box-constrained QP (alternating a
/// factorized equality-constrained step with a box projection), run until the
/// primal and dual residuals are at most tol, then polished by one exact
/// solve on the detected active set. Deterministic.
Eigen::VectorXd reference_solve(const SparseQp& qp, double tol,
                                ReferenceSolveInfo* info = nullptr,
                                long max_iterations = 200000);

/// Ground truth for tiny problems: enumerates every {lower, upper, free}
/// assignment of the variables, solves each equality-constrained subproblem
/// on the free set, and returns the feasible candidate of least objective.
/// Throws TooLarge above 3^12 assignments.
Eigen::VectorXd brute_force_active_set(const SparseQp& qp);

/// Sparse-triplet JSON dump for external inspection.
std::string qp_to_triplet_json(const SparseQp& qp);

}  // namespace cdal
