#include "cdal/qp_reference.hpp"

#include <cmath>
#include <sstream>

namespace cdal {

namespace {

constexpr double kFeasTol = 1e-9;

int stride(const SparseQp& qp) { return qp.n_y + 2 * qp.n_u; }

// Solves min 1/2 z_F' H_F z_F + h_F' z_F  s.t.  E_F z_F = rhs by splitting
// z_F into a particular solution plus a kernel component. Returns false when
// the equality system is inconsistent or the reduced problem has no finite
// minimizer candidate.
bool solve_equality_subproblem(const Eigen::MatrixXd& E_F, const Eigen::VectorXd& rhs,
                               const Eigen::VectorXd& H_F, const Eigen::VectorXd& h_F,
                               Eigen::VectorXd* out) {
  if (E_F.cols() == 0) {
    *out = Eigen::VectorXd(0);
    return rhs.size() == 0 || rhs.lpNorm<Eigen::Infinity>() <= 1e-8;
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(E_F);
  const Eigen::VectorXd particular = cod.solve(rhs);
  if ((E_F * particular - rhs).lpNorm<Eigen::Infinity>() > 1e-8) return false;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(E_F);
  const Eigen::MatrixXd kernel = lu.kernel();
  if (lu.dimensionOfKernel() == 0) {
    *out = particular;
    return true;
  }
  const Eigen::MatrixXd reduced_h = kernel.transpose() * H_F.asDiagonal() * kernel;
  const Eigen::VectorXd reduced_g =
      -kernel.transpose() * (H_F.cwiseProduct(particular) + h_F);
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> rcod(reduced_h);
  const Eigen::VectorXd xi = rcod.solve(reduced_g);
  if ((reduced_h * xi - reduced_g).lpNorm<Eigen::Infinity>() > 1e-7) return false;
  *out = particular + kernel * xi;
  return true;
}

}  // namespace

SparseQp build_sparse_qp(const MpcProblem& p) {
  (void)problem_validate(p);
  const int T = p.horizon;
  const int n_y = p.model.n_y;
  const int n_u = p.model.n_u;
  const int n_z = T * (n_y + 2 * n_u);
  const int m = T * (n_y + n_u);

  SparseQp qp;
  qp.n_y = n_y;
  qp.n_u = n_u;
  qp.horizon = T;
  qp.H = Eigen::VectorXd::Zero(n_z);
  qp.h = Eigen::VectorXd::Zero(n_z);
  qp.E = Eigen::MatrixXd::Zero(m, n_z);
  qp.b = Eigen::VectorXd::Zero(m);
  qp.lo.resize(n_z);
  qp.hi.resize(n_z);

  const auto iy = [&](int t) { return (t - 1) * (n_y + 2 * n_u); };
  const auto iu = [&](int t) { return iy(t) + n_y; };       // block u_{t-1}
  const auto idu = [&](int t) { return iy(t) + n_y + n_u; };  // block du_{t-1}

  for (int t = 1; t <= T; ++t) {
    qp.H.segment(iy(t), n_y) = p.w_y;
    qp.H.segment(idu(t), n_u) = p.w_du;
    qp.h.segment(iy(t), n_y) = -(p.w_y.cwiseProduct(p.refs.col(t - 1)));
    qp.constant += 0.5 * p.refs.col(t - 1).dot(p.w_y.cwiseProduct(p.refs.col(t - 1)));
    qp.lo.segment(iy(t), n_y) = p.y_min;
    qp.hi.segment(iy(t), n_y) = p.y_max;
    qp.lo.segment(iu(t), n_u) = p.u_min;
    qp.hi.segment(iu(t), n_u) = p.u_max;
    qp.lo.segment(idu(t), n_u) = p.du_min;
    qp.hi.segment(idu(t), n_u) = p.du_max;
  }

  // Dynamics rows: sum_i A(i) y_{t-i} + sum_i B(i) u_{t-i} - y_t = 0 with
  // history terms moved to b.
  for (int t = 1; t <= T; ++t) {
    const int row = (t - 1) * n_y;
    qp.E.block(row, iy(t), n_y, n_y) = -Eigen::MatrixXd::Identity(n_y, n_y);
    for (int i = 1; i <= p.model.n_a; ++i) {
      const int tau = t - i;
      if (tau >= 1) {
        qp.E.block(row, iy(tau), n_y, n_y) += p.model.A[i - 1];
      } else {
        qp.b.segment(row, n_y) -= p.model.A[i - 1] * p.history.past_y[std::size_t(-tau)];
      }
    }
    for (int i = 1; i <= p.model.n_b; ++i) {
      const int tau = t - i;  // index of u_tau
      if (tau >= 0) {
        qp.E.block(row, iu(tau + 1), n_y, n_u) += p.model.B[i - 1];
      } else {
        qp.b.segment(row, n_y) -= p.model.B[i - 1] * p.history.past_u[std::size_t(-tau - 1)];
      }
    }
  }

  // Increment rows: u_{t-2} + du_{t-1} - u_{t-1} = 0, with u_{-1} in b.
  for (int t = 1; t <= T; ++t) {
    const int row = T * n_y + (t - 1) * n_u;
    qp.E.block(row, idu(t), n_u, n_u) = Eigen::MatrixXd::Identity(n_u, n_u);
    qp.E.block(row, iu(t), n_u, n_u) -= Eigen::MatrixXd::Identity(n_u, n_u);
    if (t >= 2) {
      qp.E.block(row, iu(t - 1), n_u, n_u) += Eigen::MatrixXd::Identity(n_u, n_u);
    } else {
      qp.b.segment(row, n_u) = -p.history.past_u[0];
    }
  }
  return qp;
}

double qp_objective(const SparseQp& qp, const Eigen::VectorXd& z) {
  return 0.5 * z.dot(qp.H.cwiseProduct(z)) + qp.h.dot(z) + qp.constant;
}

Eigen::VectorXd pack_primal(const PrimalPoint& z) {
  const int T = int(z.y.cols());
  const int n_y = int(z.y.rows());
  const int n_u = int(z.u.rows());
  Eigen::VectorXd out(T * (n_y + 2 * n_u));
  for (int t = 0; t < T; ++t) {
    const int base = t * (n_y + 2 * n_u);
    out.segment(base, n_y) = z.y.col(t);
    out.segment(base + n_y, n_u) = z.u.col(t);
    out.segment(base + n_y + n_u, n_u) = z.du.col(t);
  }
  return out;
}

PrimalPoint unpack_primal(const Eigen::VectorXd& z, int n_y, int n_u, int horizon) {
  if (z.size() != horizon * (n_y + 2 * n_u)) {
    raise(ErrorCode::DimensionMismatch, "flat vector does not match the stage layout");
  }
  PrimalPoint out;
  out.y.resize(n_y, horizon);
  out.u.resize(n_u, horizon);
  out.du.resize(n_u, horizon);
  for (int t = 0; t < horizon; ++t) {
    const int base = t * (n_y + 2 * n_u);
    out.y.col(t) = z.segment(base, n_y);
    out.u.col(t) = z.segment(base + n_y, n_u);
    out.du.col(t) = z.segment(base + n_y + n_u, n_u);
  }
  return out;
}

int equality_rank(const SparseQp& qp) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(qp.E);
  return int(lu.rank());
}

Eigen::VectorXd kkt_equality_solve(const SparseQp& qp) {
  const int n = int(qp.H.size());
  const int m = int(qp.E.rows());
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + m, n + m);
  kkt.topLeftCorner(n, n) = qp.H.asDiagonal();
  kkt.topRightCorner(n, m) = qp.E.transpose();
  kkt.bottomLeftCorner(m, n) = qp.E;
  Eigen::VectorXd rhs(n + m);
  rhs.head(n) = -qp.h;
  rhs.tail(m) = qp.b;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
  if (!lu.isInvertible()) {
    raise(ErrorCode::RankDeficient, "KKT system is singular (rank-deficient constraints?)");
  }
  return lu.solve(rhs).head(n);
}

Eigen::VectorXd reference_solve(const SparseQp& qp, double tol, ReferenceSolveInfo* info,
                                long max_iterations) {
  if (!(tol > 0.0)) raise(ErrorCode::InvalidConfig, "tolerance must be positive");
  const int n = int(qp.H.size());
  const int m = int(qp.E.rows());
  const double penalty = 1.0;

  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + m, n + m);
  kkt.topLeftCorner(n, n) = (qp.H.array() + penalty).matrix().asDiagonal();
  kkt.topRightCorner(n, m) = qp.E.transpose();
  kkt.bottomLeftCorner(m, n) = qp.E;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
  if (!lu.isInvertible()) {
    raise(ErrorCode::RankDeficient, "splitting system is singular");
  }

  Eigen::VectorXd v = Eigen::VectorXd::Zero(n).cwiseMax(qp.lo).cwiseMin(qp.hi);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd rhs(n + m);
  rhs.tail(m) = qp.b;
  Eigen::VectorXd x(n);

  bool converged = false;
  long iter = 0;
  for (; iter < max_iterations; ++iter) {
    rhs.head(n) = -qp.h + penalty * (v - w);
    x = lu.solve(rhs).head(n);
    const Eigen::VectorXd v_new = (x + w).cwiseMax(qp.lo).cwiseMin(qp.hi);
    const double r_prim = (x - v_new).lpNorm<Eigen::Infinity>();
    const double r_dual = penalty * (v_new - v).lpNorm<Eigen::Infinity>();
    w += x - v_new;
    v = v_new;
    if (r_prim <= tol && r_dual <= tol) {
      converged = true;
      ++iter;
      break;
    }
  }
  if (!converged) {
    raise(ErrorCode::MaxIterationsExceeded,
          "splitting method did not reach tol=" + std::to_string(tol));
  }
  if (info) {
    info->iterations = iter;
    info->polished = false;
  }

  // Polish: re-solve exactly on the active set detected from v. The
  // multiplier signs certify the polished point; on failure the splitting
  // iterate is returned unchanged.
  const double act_tol = std::max(10.0 * tol, 1e-9);
  std::vector<int> free_idx;
  Eigen::VectorXd z = v;
  for (int i = 0; i < n; ++i) {
    if (v(i) <= qp.lo(i) + act_tol) {
      z(i) = qp.lo(i);
    } else if (v(i) >= qp.hi(i) - act_tol) {
      z(i) = qp.hi(i);
    } else {
      free_idx.push_back(i);
    }
  }
  const int nf = int(free_idx.size());
  Eigen::MatrixXd E_F(m, nf);
  Eigen::VectorXd H_F(nf), h_F(nf);
  Eigen::VectorXd rhs_eq = qp.b;
  for (int j = 0; j < nf; ++j) {
    E_F.col(j) = qp.E.col(free_idx[j]);
    H_F(j) = qp.H(free_idx[j]);
    h_F(j) = qp.h(free_idx[j]);
  }
  for (int i = 0; i < n; ++i) {
    bool is_free = false;
    for (int j : free_idx) {
      if (j == i) { is_free = true; break; }
    }
    if (!is_free) rhs_eq -= qp.E.col(i) * z(i);
  }
  Eigen::VectorXd z_F;
  if (solve_equality_subproblem(E_F, rhs_eq, H_F, h_F, &z_F)) {
    Eigen::VectorXd polished = z;
    bool ok = true;
    for (int j = 0; j < nf; ++j) {
      if (z_F(j) < qp.lo(free_idx[j]) - kFeasTol || z_F(j) > qp.hi(free_idx[j]) + kFeasTol) {
        ok = false;
        break;
      }
      polished(free_idx[j]) = std::max(qp.lo(free_idx[j]), std::min(qp.hi(free_idx[j]), z_F(j)));
    }
    if (ok) {
      // Multiplier of the equality rows from least squares, then check the
      // bound-multiplier signs.
      Eigen::VectorXd grad = qp.H.cwiseProduct(polished) + qp.h;
      Eigen::VectorXd grad_free(nf);
      for (int j = 0; j < nf; ++j) grad_free(j) = grad(free_idx[j]);
      const Eigen::VectorXd nu =
          E_F.transpose().colPivHouseholderQr().solve(-grad_free);
      const Eigen::VectorXd full_grad = grad + qp.E.transpose() * nu;
      for (int i = 0; i < n && ok; ++i) {
        if (polished(i) <= qp.lo(i) + kFeasTol && polished(i) >= qp.hi(i) - kFeasTol) continue;
        if (polished(i) <= qp.lo(i) + kFeasTol) {
          ok = full_grad(i) >= -1e-6;
        } else if (polished(i) >= qp.hi(i) - kFeasTol) {
          ok = full_grad(i) <= 1e-6;
        } else {
          ok = std::abs(full_grad(i)) <= 1e-6;
        }
      }
      if (ok) {
        if (info) info->polished = true;
        return polished;
      }
    }
  }
  return v;
}

Eigen::VectorXd brute_force_active_set(const SparseQp& qp) {
  const int n = int(qp.H.size());
  if (n > 12) {
    raise(ErrorCode::TooLarge, "enumeration over 3^" + std::to_string(n) + " bound states");
  }
  const int m = int(qp.E.rows());

  long total = 1;
  for (int i = 0; i < n; ++i) total *= 3;

  Eigen::VectorXd best;
  double best_obj = std::numeric_limits<double>::infinity();
  std::vector<int> state(n);

  for (long code = 0; code < total; ++code) {
    long c = code;
    for (int i = 0; i < n; ++i) {
      state[i] = int(c % 3);  // 0 free, 1 at lower, 2 at upper
      c /= 3;
    }
    std::vector<int> free_idx;
    Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
      if (state[i] == 0) {
        free_idx.push_back(i);
      } else {
        z(i) = state[i] == 1 ? qp.lo(i) : qp.hi(i);
      }
    }
    const int nf = int(free_idx.size());
    Eigen::MatrixXd E_F(m, nf);
    Eigen::VectorXd H_F(nf), h_F(nf);
    for (int j = 0; j < nf; ++j) {
      E_F.col(j) = qp.E.col(free_idx[j]);
      H_F(j) = qp.H(free_idx[j]);
      h_F(j) = qp.h(free_idx[j]);
    }
    Eigen::VectorXd rhs = qp.b;
    for (int i = 0; i < n; ++i) {
      if (state[i] != 0) rhs -= qp.E.col(i) * z(i);
    }
    Eigen::VectorXd z_F;
    if (!solve_equality_subproblem(E_F, rhs, H_F, h_F, &z_F)) continue;
    bool feasible = true;
    for (int j = 0; j < nf; ++j) {
      if (z_F(j) < qp.lo(free_idx[j]) - kFeasTol || z_F(j) > qp.hi(free_idx[j]) + kFeasTol) {
        feasible = false;
        break;
      }
      z(free_idx[j]) = z_F(j);
    }
    if (!feasible) continue;
    if ((qp.E * z - qp.b).lpNorm<Eigen::Infinity>() > 1e-7) continue;
    const double obj = qp_objective(qp, z);
    if (obj < best_obj) {
      best_obj = obj;
      best = z;
    }
  }
  if (best.size() == 0) {
    raise(ErrorCode::RankDeficient, "no feasible bound assignment; the QP may be infeasible");
  }
  return best;
}

std::string qp_to_triplet_json(const SparseQp& qp) {
  std::ostringstream os;
  os.precision(17);
  os << "{\"n\":" << qp.H.size() << ",\"m\":" << qp.E.rows() << ",\"H_diag\":[";
  for (int i = 0; i < qp.H.size(); ++i) os << (i ? "," : "") << qp.H(i);
  os << "],\"h\":[";
  for (int i = 0; i < qp.h.size(); ++i) os << (i ? "," : "") << qp.h(i);
  os << "],\"constant\":" << qp.constant << ",\"E\":[";
  bool first = true;
  for (int r = 0; r < qp.E.rows(); ++r) {
    for (int c = 0; c < qp.E.cols(); ++c) {
      if (qp.E(r, c) != 0.0) {
        os << (first ? "" : ",") << "[" << r << "," << c << "," << qp.E(r, c) << "]";
        first = false;
      }
    }
  }
  os << "],\"b\":[";
  for (int i = 0; i < qp.b.size(); ++i) os << (i ? "," : "") << qp.b(i);
  os << "],\"lo\":[";
  for (int i = 0; i < qp.lo.size(); ++i) os << (i ? "," : "") << qp.lo(i);
  os << "],\"hi\":[";
  for (int i = 0; i < qp.hi.size(); ++i) os << (i ? "," : "") << qp.hi(i);
  os << "]}";
  return os.str();
}

}  // namespace cdal
