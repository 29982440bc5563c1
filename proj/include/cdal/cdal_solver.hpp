#pragma once

#include <Eigen/Dense>
#include <optional>

#include "cdal/mpc_problem.hpp"

namespace cdal {

/// Solver settings. Tolerances follow the stopping rules of the outer
/// (dual) and inner (coordinate-descent) loops; eps_out bounds the squared
/// norm of the dual step, eps_in the squared coordinate movement of one pass.
struct SolverConfig {
  double rho = 1.0;
  int max_outer = 5000;       // N_out
  int max_inner = 200;        // N_in
  double eps_out = 1e-6;
  double eps_in = 1e-6;
  bool use_coupled = true;
  bool use_acceleration = true;
  bool accelerate_gamma = true;
  bool include_gamma_in_stop = false;
};

void config_validate(const SolverConfig& cfg);

/// Per-stage diagonals of the three block Hessians, with cached reciprocals.
///   y_diag  col t-1: w_y/rho + 1 + sum_{k<=min(n_a,T-t)} ||A(k) col i||^2
///   u_diag  col t-1: 2 + sum_{k<=min(n_b,T-t+1)} ||B(k) col i||^2 for t<T,
///                    and 1 + ||B(1) col i||^2 at t=T
///   du_diag:         w_du/rho + 1 (stage independent)
struct DiagonalCache {
  Eigen::MatrixXd y_diag, u_diag;
  Eigen::VectorXd du_diag;
  Eigen::MatrixXd y_inv, u_inv;
  Eigen::VectorXd du_inv;
};

DiagonalCache precompute_diagonals(const MpcProblem& problem, double rho);

/// Linear coefficients of the three block subproblems at stage t: the
/// gradient of the (1/rho-scaled) AL objective restricted to a block is
/// (block Hessian) * block + offset, with everything else held at z.
struct BlockOffsets {
  Eigen::VectorXd y_off;   // block y_t
  Eigen::VectorXd u_off;   // block u_{t-1}
  Eigen::VectorXd du_off;  // block du_{t-1}
};

BlockOffsets compute_offsets(const MpcProblem& problem, const PrimalPoint& z,
                             const DualPoint& duals, double rho, int t);

/// One forward sweep of exact coordinate minimization for
/// min 1/2 s'Ms + d's over [lo, hi]: each coordinate is clamped at
/// s_i - (M row i . s + d_i) / M_ii and later coordinates see the update.
/// sigma accumulates the squared coordinate movement.
void ccd_block(const Eigen::MatrixXd& M, const Eigen::VectorXd& d,
               Eigen::Ref<Eigen::VectorXd> s, const Eigen::VectorXd& lo,
               const Eigen::VectorXd& hi, double& sigma);

/// Mutable solver state. The working duals satisfy, at every point between
/// coordinate updates of a coupled pass,
///   lam_work = lam_hat + res_arx(z),  gam_work = gam_hat + res_inc(z).
struct SolverState {
  PrimalPoint z;
  Eigen::MatrixXd lam, gam;            // dual iterates (lam_hat + residual at the latest primal)
  Eigen::MatrixXd lam_prev, gam_prev;  // previous outer iteration, for the momentum step
  Eigen::MatrixXd lam_hat, gam_hat;    // extrapolated duals (fixed per subproblem)
  Eigen::MatrixXd lam_work, gam_work;  // working duals of the coupled pass
  double alpha = 1.0;                  // acceleration scalar
  double sigma = 0.0;                  // squared movement of the last pass
  long outer_iters = 0;
  long inner_passes = 0;
};

/// State whose subproblem duals are `duals` and whose working duals are
/// synchronized with z. Used by tests and by solve().
SolverState make_state(const MpcProblem& problem, const PrimalPoint& z,
                       const DualPoint& duals);

/// Full pass over all 3T blocks in stage order (y_t, u_{t-1}, du_{t-1}),
/// recomputing block offsets from scratch before each block. Resets
/// state.sigma. Does not touch any duals.
void cd_pass_naive(const MpcProblem& problem, SolverState& state, double rho);

/// Same visiting order and identical iterates, but each coordinate update of
/// size delta also shifts every working dual whose residual contains that
/// coordinate, so no offset is ever rebuilt. Resets state.sigma.
void cd_pass_coupled(const MpcProblem& problem, SolverState& state,
                     const DiagonalCache& cache, double rho);

/// lam = lam_hat + res_arx(z), gam = gam_hat + res_inc(z); the working duals
/// are re-synchronized to these values (the coupled pass maintains them from
/// here on).
void dual_update(const MpcProblem& problem, SolverState& state);

double next_alpha(double alpha);

/// Nesterov extrapolation of the dual iterates:
///   lam_hat = lam + (alpha_k - 1)/alpha_{k+1} * (lam - lam_prev)
/// and the same for gam when accelerate_gamma is set.
void accelerate(SolverState& state, bool accelerate_gamma);

enum class SolveStatus { Converged, MaxIterations };

struct SolveReport {
  PrimalPoint solution;
  DualPoint duals;
  long outer_iters = 0;
  long total_inner_passes = 0;
  double outer_residual = 0.0;  // final squared dual step; NaN if no iteration ran
  SolveStatus status = SolveStatus::MaxIterations;
};

/// Warm start used when none is supplied: the ARX response to holding
/// u_{-1}, with zero increments and zero duals, clamped into the boxes.
PrimalPoint default_warm_start(const MpcProblem& problem);

/// Outer loop: per iteration, re-synchronize the working duals, run inner
/// coordinate-descent passes until the pass movement falls below eps_in,
/// read off the new dual iterate (the working duals track it for free), and
/// stop once the squared dual step ||lam - lam_hat||^2 is at most eps_out;
/// otherwise extrapolate the duals and continue. A warm primal slightly
/// outside the boxes (up to 1e-9) is clamped; farther out raises
/// InfeasibleWarmStart.
SolveReport solve(const MpcProblem& problem, const SolverConfig& cfg,
                  const std::optional<PrimalPoint>& warm_z = std::nullopt,
                  const std::optional<DualPoint>& warm_duals = std::nullopt);

}  // namespace cdal
