#include "cdal/cdal_solver.hpp"

#include <cmath>
#include <limits>

namespace cdal {

namespace {

double clamp(double v, double lo, double hi) { return std::max(lo, std::min(hi, v)); }

// sum_{i != skip_a} A(i) y_{s-i} + sum_{i != skip_b} B(i) u_{s-i}
// (skip = 0 keeps every lag). This is the ARX residual of stage s without
// its -y_s term and without the lag owned by the block being updated.
Eigen::VectorXd lagged_sum(const MpcProblem& p, const PrimalPoint& z, int s, int skip_a,
                           int skip_b) {
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(p.model.n_y);
  for (int i = 1; i <= p.model.n_a; ++i) {
    if (i == skip_a) continue;
    acc.noalias() += p.model.A[i - 1] * y_at(p, z, s - i);
  }
  for (int i = 1; i <= p.model.n_b; ++i) {
    if (i == skip_b) continue;
    acc.noalias() += p.model.B[i - 1] * u_at(p, z, s - i);
  }
  return acc;
}

// Linear coefficient of the y_t subproblem. Together with the block Hessian
// w_y/rho + I + sum_k A(k)'A(k) it reproduces the gradient of the scaled AL
// objective restricted to y_t: the backward part couples through the stage-t
// dynamics row, the forward part through the rows of stages t+1..t+n_a where
// y_t appears with coefficient A(k).
Eigen::VectorXd y_offset(const MpcProblem& p, const PrimalPoint& z, const DualPoint& d,
                         double rho, int t) {
  Eigen::VectorXd off =
      -(p.w_y.array() / rho * p.refs.col(t - 1).array()).matrix() - d.lam.col(t - 1) -
      lagged_sum(p, z, t, 0, 0);
  const int fwd = std::min(p.model.n_a, p.horizon - t);
  for (int k = 1; k <= fwd; ++k) {
    const Eigen::VectorXd coupled =
        d.lam.col(t + k - 1) + lagged_sum(p, z, t + k, k, 0) - y_at(p, z, t + k);
    off.noalias() += p.model.A[k - 1].transpose() * coupled;
  }
  return off;
}

// Linear coefficient of the u_{t-1} subproblem. u_{t-1} sits in the stage-t
// increment row with coefficient -I, in the stage-(t+1) increment row with +I
// (absent at t = T), and in the dynamics rows of stages t-1+k with
// coefficient B(k).
Eigen::VectorXd u_offset(const MpcProblem& p, const PrimalPoint& z, const DualPoint& d,
                         double rho, int t) {
  (void)rho;
  Eigen::VectorXd off = -(d.gam.col(t - 1) + u_at(p, z, t - 2) + z.du.col(t - 1));
  if (t < p.horizon) {
    off += d.gam.col(t) + z.du.col(t) - z.u.col(t);
  }
  const int fwd = (t < p.horizon) ? std::min(p.model.n_b, p.horizon - t + 1) : 1;
  for (int k = 1; k <= fwd; ++k) {
    const int s = t - 1 + k;
    const Eigen::VectorXd coupled = d.lam.col(s - 1) + lagged_sum(p, z, s, 0, k) - y_at(p, z, s);
    off.noalias() += p.model.B[k - 1].transpose() * coupled;
  }
  return off;
}

// Linear coefficient of the du_{t-1} subproblem (stage-t increment row only).
Eigen::VectorXd du_offset(const MpcProblem& p, const PrimalPoint& z, const DualPoint& d,
                          double rho, int t) {
  (void)rho;
  return d.gam.col(t - 1) + u_at(p, z, t - 2) - u_at(p, z, t - 1);
}

Eigen::MatrixXd y_hessian(const MpcProblem& p, double rho, int t) {
  const int n_y = p.model.n_y;
  Eigen::MatrixXd M = (p.w_y / rho).asDiagonal();
  M += Eigen::MatrixXd::Identity(n_y, n_y);
  const int fwd = std::min(p.model.n_a, p.horizon - t);
  for (int k = 1; k <= fwd; ++k) M.noalias() += p.model.A[k - 1].transpose() * p.model.A[k - 1];
  return M;
}

Eigen::MatrixXd u_hessian(const MpcProblem& p, int t) {
  const int n_u = p.model.n_u;
  if (t == p.horizon) {
    return Eigen::MatrixXd::Identity(n_u, n_u) +
           p.model.B[0].transpose() * p.model.B[0];
  }
  Eigen::MatrixXd M = 2.0 * Eigen::MatrixXd::Identity(n_u, n_u);
  const int fwd = std::min(p.model.n_b, p.horizon - t + 1);
  for (int k = 1; k <= fwd; ++k) M.noalias() += p.model.B[k - 1].transpose() * p.model.B[k - 1];
  return M;
}

Eigen::MatrixXd du_hessian(const MpcProblem& p, double rho) {
  Eigen::MatrixXd M = (p.w_du / rho).asDiagonal();
  M += Eigen::MatrixXd::Identity(p.model.n_u, p.model.n_u);
  return M;
}

PrimalPoint clamp_warm_start(const MpcProblem& p, PrimalPoint z) {
  constexpr double tol = 1e-9;
  const auto clamp_matrix = [](Eigen::MatrixXd& m, const Eigen::VectorXd& lo,
                               const Eigen::VectorXd& hi, const char* name) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        double& v = m(r, c);
        if (!std::isfinite(v) || v < lo(r) - tol || v > hi(r) + tol) {
          raise(ErrorCode::InfeasibleWarmStart,
                std::string(name) + " column " + std::to_string(c) + " component " +
                    std::to_string(r) + " is outside its box");
        }
        v = clamp(v, lo(r), hi(r));
      }
    }
  };
  clamp_matrix(z.y, p.y_min, p.y_max, "warm y");
  clamp_matrix(z.u, p.u_min, p.u_max, "warm u");
  clamp_matrix(z.du, p.du_min, p.du_max, "warm du");
  return z;
}

}  // namespace

void config_validate(const SolverConfig& cfg) {
  if (!(cfg.rho > 0.0)) raise(ErrorCode::NonPositiveRho, "rho must be positive");
  if (cfg.max_outer < 0) raise(ErrorCode::InvalidConfig, "N_out must be nonnegative");
  if (cfg.max_inner < 1) raise(ErrorCode::InvalidConfig, "N_in must be at least 1");
  if (!(cfg.eps_out >= 0.0) || !(cfg.eps_in >= 0.0)) {
    raise(ErrorCode::InvalidConfig, "tolerances must be nonnegative");
  }
}

DiagonalCache precompute_diagonals(const MpcProblem& p, double rho) {
  if (!(rho > 0.0)) raise(ErrorCode::NonPositiveRho, "rho must be positive");
  const int T = p.horizon;
  const int n_y = p.model.n_y;
  const int n_u = p.model.n_u;

  DiagonalCache cache;
  cache.y_diag.resize(n_y, T);
  cache.u_diag.resize(n_u, T);
  cache.du_diag = (p.w_du / rho).array() + 1.0;

  for (int t = 1; t <= T; ++t) {
    for (int i = 0; i < n_y; ++i) {
      double v = p.w_y(i) / rho + 1.0;
      const int fwd = std::min(p.model.n_a, T - t);
      for (int k = 1; k <= fwd; ++k) v += p.model.A[k - 1].col(i).squaredNorm();
      cache.y_diag(i, t - 1) = v;
    }
    for (int i = 0; i < n_u; ++i) {
      double v;
      if (t == T) {
        v = 1.0 + p.model.B[0].col(i).squaredNorm();
      } else {
        v = 2.0;
        const int fwd = std::min(p.model.n_b, T - t + 1);
        for (int k = 1; k <= fwd; ++k) v += p.model.B[k - 1].col(i).squaredNorm();
      }
      cache.u_diag(i, t - 1) = v;
    }
  }
  if (!(cache.y_diag.minCoeff() > 0.0) || !(cache.u_diag.minCoeff() > 0.0) ||
      !(cache.du_diag.minCoeff() > 0.0)) {
    raise(ErrorCode::ZeroDiagonal, "a cached diagonal is not strictly positive");
  }
  cache.y_inv = cache.y_diag.cwiseInverse();
  cache.u_inv = cache.u_diag.cwiseInverse();
  cache.du_inv = cache.du_diag.cwiseInverse();
  return cache;
}

BlockOffsets compute_offsets(const MpcProblem& p, const PrimalPoint& z, const DualPoint& d,
                             double rho, int t) {
  if (t < 1 || t > p.horizon) {
    raise(ErrorCode::IndexOutOfRange, "stage " + std::to_string(t) + " outside 1.." +
                                          std::to_string(p.horizon));
  }
  if (!(rho > 0.0)) raise(ErrorCode::NonPositiveRho, "rho must be positive");
  BlockOffsets off;
  off.y_off = y_offset(p, z, d, rho, t);
  off.u_off = u_offset(p, z, d, rho, t);
  off.du_off = du_offset(p, z, d, rho, t);
  return off;
}

void ccd_block(const Eigen::MatrixXd& M, const Eigen::VectorXd& d,
               Eigen::Ref<Eigen::VectorXd> s, const Eigen::VectorXd& lo,
               const Eigen::VectorXd& hi, double& sigma) {
  const Eigen::Index n = s.size();
  if (M.rows() != n || M.cols() != n || d.size() != n || lo.size() != n || hi.size() != n) {
    raise(ErrorCode::DimensionMismatch, "block dimensions disagree");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const double diag = M(i, i);
    if (!(diag > 0.0)) raise(ErrorCode::ZeroDiagonal, "block Hessian diagonal not positive");
    const double grad = M.row(i).dot(s) + d(i);
    const double updated = clamp(s(i) - grad / diag, lo(i), hi(i));
    const double delta = updated - s(i);
    sigma += delta * delta;
    s(i) = updated;
  }
}

SolverState make_state(const MpcProblem& p, const PrimalPoint& z, const DualPoint& duals) {
  SolverState st;
  st.z = z;
  st.lam = duals.lam;
  st.gam = duals.gam;
  st.lam_prev = duals.lam;
  st.gam_prev = duals.gam;
  st.lam_hat = duals.lam;
  st.gam_hat = duals.gam;
  const Residuals res = residuals(p, z);
  st.lam_work = st.lam_hat + res.arx;
  st.gam_work = st.gam_hat + res.inc;
  return st;
}

void cd_pass_naive(const MpcProblem& p, SolverState& state, double rho) {
  const DualPoint hat{state.lam_hat, state.gam_hat};
  const Eigen::MatrixXd M_du = du_hessian(p, rho);
  double sigma = 0.0;
  for (int t = 1; t <= p.horizon; ++t) {
    ccd_block(y_hessian(p, rho, t), y_offset(p, state.z, hat, rho, t), state.z.y.col(t - 1),
              p.y_min, p.y_max, sigma);
    ccd_block(u_hessian(p, t), u_offset(p, state.z, hat, rho, t), state.z.u.col(t - 1),
              p.u_min, p.u_max, sigma);
    ccd_block(M_du, du_offset(p, state.z, hat, rho, t), state.z.du.col(t - 1), p.du_min,
              p.du_max, sigma);
  }
  state.sigma = sigma;
  state.inner_passes += 1;
}

void cd_pass_coupled(const MpcProblem& p, SolverState& state, const DiagonalCache& cache,
                     double rho) {
  const int T = p.horizon;
  const int n_y = p.model.n_y;
  const int n_u = p.model.n_u;
  const auto& A = p.model.A;
  const auto& B = p.model.B;
  Eigen::MatrixXd& Y = state.z.y;
  Eigen::MatrixXd& U = state.z.u;
  Eigen::MatrixXd& DU = state.z.du;
  Eigen::MatrixXd& lw = state.lam_work;
  Eigen::MatrixXd& gw = state.gam_work;

  double sigma = 0.0;
  for (int t = 1; t <= T; ++t) {
    // y_t block: the gradient splits into the tracking term and pure dual
    // sums, because the working duals already carry every residual.
    const int ja = std::min(p.model.n_a, T - t);
    for (int i = 0; i < n_y; ++i) {
      double s = -lw(i, t - 1);
      for (int k = 1; k <= ja; ++k) s += A[k - 1].col(i).dot(lw.col(t + k - 1));
      const double grad = p.w_y(i) / rho * (Y(i, t - 1) - p.refs(i, t - 1)) + s;
      const double updated = clamp(Y(i, t - 1) - grad * cache.y_inv(i, t - 1), p.y_min(i),
                                   p.y_max(i));
      const double delta = updated - Y(i, t - 1);
      if (delta != 0.0) {
        sigma += delta * delta;
        Y(i, t - 1) = updated;
        lw(i, t - 1) -= delta;  // y_t enters its own dynamics row with -I
        for (int k = 1; k <= ja; ++k) lw.col(t + k - 1) += delta * A[k - 1].col(i);
      }
    }

    // u_{t-1} block: stage-t increment row (-I), stage-(t+1) increment row
    // (+I, absent at t = T), dynamics rows t-1+k through B(k).
    const int jb = (t < T) ? std::min(p.model.n_b, T - t + 1) : 1;
    for (int i = 0; i < n_u; ++i) {
      double s = -gw(i, t - 1);
      if (t < T) s += gw(i, t);
      for (int k = 1; k <= jb; ++k) s += B[k - 1].col(i).dot(lw.col(t + k - 2));
      const double updated = clamp(U(i, t - 1) - s * cache.u_inv(i, t - 1), p.u_min(i),
                                   p.u_max(i));
      const double delta = updated - U(i, t - 1);
      if (delta != 0.0) {
        sigma += delta * delta;
        U(i, t - 1) = updated;
        gw(i, t - 1) -= delta;
        if (t < T) gw(i, t) += delta;
        for (int k = 1; k <= jb; ++k) lw.col(t + k - 2) += delta * B[k - 1].col(i);
      }
    }

    // du_{t-1} block: stage-t increment row only (+I).
    for (int i = 0; i < n_u; ++i) {
      const double grad = p.w_du(i) / rho * DU(i, t - 1) + gw(i, t - 1);
      const double updated = clamp(DU(i, t - 1) - grad * cache.du_inv(i), p.du_min(i),
                                   p.du_max(i));
      const double delta = updated - DU(i, t - 1);
      if (delta != 0.0) {
        sigma += delta * delta;
        DU(i, t - 1) = updated;
        gw(i, t - 1) += delta;
      }
    }
  }
  state.sigma = sigma;
  state.inner_passes += 1;
}

void dual_update(const MpcProblem& p, SolverState& state) {
  const Residuals res = residuals(p, state.z);
  state.lam = state.lam_hat + res.arx;
  state.gam = state.gam_hat + res.inc;
  state.lam_work = state.lam;
  state.gam_work = state.gam;
}

double next_alpha(double alpha) { return 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * alpha * alpha)); }

void accelerate(SolverState& state, bool accelerate_gamma) {
  const double alpha_next = next_alpha(state.alpha);
  const double coef = (state.alpha - 1.0) / alpha_next;
  state.lam_hat = state.lam + coef * (state.lam - state.lam_prev);
  if (accelerate_gamma) {
    state.gam_hat = state.gam + coef * (state.gam - state.gam_prev);
  } else {
    state.gam_hat = state.gam;
  }
  state.alpha = alpha_next;
}

PrimalPoint default_warm_start(const MpcProblem& p) {
  PrimalPoint z = zero_primal(p);
  const Eigen::VectorXd u_hold = p.history.past_u.front();
  ArxHistory window = p.history;
  for (int t = 0; t < p.horizon; ++t) {
    const Eigen::VectorXd y = arx_next(p.model, window, u_hold);
    window.push(u_hold, y);
    z.y.col(t) = y;
    z.u.col(t) = u_hold;
  }
  for (int t = 0; t < p.horizon; ++t) {
    z.y.col(t) = z.y.col(t).cwiseMax(p.y_min).cwiseMin(p.y_max);
    z.u.col(t) = z.u.col(t).cwiseMax(p.u_min).cwiseMin(p.u_max);
    z.du.col(t) = z.du.col(t).cwiseMax(p.du_min).cwiseMin(p.du_max);
  }
  return z;
}

SolveReport solve(const MpcProblem& p, const SolverConfig& cfg,
                  const std::optional<PrimalPoint>& warm_z,
                  const std::optional<DualPoint>& warm_duals) {
  config_validate(cfg);
  const PrimalPoint z0 = warm_z ? clamp_warm_start(p, *warm_z) : default_warm_start(p);
  const DualPoint d0 = warm_duals ? *warm_duals : zero_dual(p);
  if (d0.lam.rows() != p.model.n_y || d0.lam.cols() != p.horizon ||
      d0.gam.rows() != p.model.n_u || d0.gam.cols() != p.horizon) {
    raise(ErrorCode::DimensionMismatch, "warm duals do not match the problem dimensions");
  }

  SolverState st = make_state(p, z0, d0);
  const DiagonalCache cache = precompute_diagonals(p, cfg.rho);

  double outer_residual = std::numeric_limits<double>::quiet_NaN();
  SolveStatus status = SolveStatus::MaxIterations;

  for (int k = 1; k <= cfg.max_outer; ++k) {
    st.lam_prev = st.lam;
    st.gam_prev = st.gam;
    // Re-synchronize the working duals with the extrapolated ones; the
    // coordinate passes keep them equal to lam_hat + residual from here on.
    dual_update(p, st);
    st.outer_iters = k;
    for (int k_in = 1; k_in <= cfg.max_inner; ++k_in) {
      if (cfg.use_coupled) {
        cd_pass_coupled(p, st, cache, cfg.rho);
      } else {
        cd_pass_naive(p, st, cfg.rho);
      }
      if (st.sigma <= cfg.eps_in) break;
    }
    // The dual iterate of step k is the working value at the new primal,
    // lam_hat + res(z^k). The coupled pass maintains it; the naive pass
    // recomputes it from fresh residuals.
    if (cfg.use_coupled) {
      st.lam = st.lam_work;
      st.gam = st.gam_work;
    } else {
      dual_update(p, st);
    }
    outer_residual = (st.lam - st.lam_hat).squaredNorm();
    if (cfg.include_gamma_in_stop) outer_residual += (st.gam - st.gam_hat).squaredNorm();
    if (outer_residual <= cfg.eps_out) {
      status = SolveStatus::Converged;
      break;
    }
    if (cfg.use_acceleration) {
      accelerate(st, cfg.accelerate_gamma);
    } else {
      st.lam_hat = st.lam;
      st.gam_hat = st.gam;
    }
  }

  SolveReport report;
  report.solution = st.z;
  report.duals = DualPoint{st.lam, st.gam};
  report.outer_iters = st.outer_iters;
  report.total_inner_passes = st.inner_passes;
  report.outer_residual = outer_residual;
  report.status = status;
  return report;
}

}  // namespace cdal
