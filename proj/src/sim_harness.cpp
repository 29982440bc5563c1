#include "cdal/sim_harness.hpp"

#include <chrono>
#include <cmath>
#include <random>

namespace cdal {

namespace {

double uniform01(std::mt19937_64& gen) { return double(gen() >> 11) * 0x1.0p-53; }

struct PlantDims {
  int n_y, n_u, n_a, n_b;
};

PlantDims plant_dims(const PlantSpec& plant) {
  if (const auto* fixed = std::get_if<ArxModel>(&plant)) {
    return {fixed->n_y, fixed->n_u, fixed->n_a, fixed->n_b};
  }
  if (const auto* tv = std::get_if<TimeVaryingArxSpec>(&plant)) {
    return {tv->base.n_y, tv->base.n_u, tv->base.n_a, tv->base.n_b};
  }
  const auto& lpv = std::get<LpvArxSpec>(plant);
  return {lpv.n_y, lpv.n_u, lpv.n_a, lpv.n_b};
}

MpcProblem make_stage_problem(const Scenario& sc, const ArxModel& model,
                              const ArxHistory& history, const Eigen::VectorXd& ref) {
  MpcProblem p;
  p.horizon = sc.mpc.horizon;
  p.w_y = sc.mpc.w_y;
  p.w_du = sc.mpc.w_du;
  p.y_min = sc.mpc.y_min;
  p.y_max = sc.mpc.y_max;
  p.u_min = sc.mpc.u_min;
  p.u_max = sc.mpc.u_max;
  p.du_min = sc.mpc.du_min;
  p.du_max = sc.mpc.du_max;
  p.refs = ref.replicate(1, sc.mpc.horizon);
  p.model = model;
  p.history = history;
  return p;
}

bool inside_box(const Eigen::VectorXd& v, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                double tol) {
  return (v.array() >= lo.array() - tol).all() && (v.array() <= hi.array() + tol).all();
}

double elapsed_ms(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
      .count();
}

}  // namespace

void scenario_validate(const Scenario& sc) {
  if (sc.steps < 1) raise(ErrorCode::InvalidConfig, "steps must be at least 1");
  if (sc.ref_hold < 1) raise(ErrorCode::InvalidConfig, "ref_hold must be at least 1");
  if (sc.ref_hi < sc.ref_lo) raise(ErrorCode::EmptyRange, "reference range is empty");
  config_validate(sc.solver);

  if (const auto* fixed = std::get_if<ArxModel>(&sc.plant)) {
    arx_validate(*fixed);
  } else if (const auto* tv = std::get_if<TimeVaryingArxSpec>(&sc.plant)) {
    arx_validate(tv->base);
    if (tv->base.n_y != 2 || tv->base.n_u != 2) {
      raise(ErrorCode::UnsupportedShape, "time-varying plant requires n_y = n_u = 2");
    }
  } else {
    lpv_validate(std::get<LpvArxSpec>(sc.plant));
  }

  // The per-step problems reuse these fields, so check them once against the
  // plant dimensions through a throwaway stage problem.
  const PlantDims dims = plant_dims(sc.plant);
  ArxModel probe;
  probe.n_y = dims.n_y;
  probe.n_u = dims.n_u;
  probe.n_a = dims.n_a;
  probe.n_b = dims.n_b;
  probe.A.assign(dims.n_a, Eigen::MatrixXd::Zero(dims.n_y, dims.n_y));
  probe.B.assign(dims.n_b, Eigen::MatrixXd::Zero(dims.n_y, dims.n_u));
  ArxHistory h = zero_history(probe);
  (void)problem_validate(
      make_stage_problem(sc, probe, h, Eigen::VectorXd::Zero(dims.n_y)));
}

Eigen::MatrixXd generate_references(int n_y, int steps, int ref_hold, std::uint64_t seed,
                                    double lo, double hi) {
  if (n_y < 1 || steps < 1 || ref_hold < 1) {
    raise(ErrorCode::InvalidConfig, "n_y, steps, ref_hold must be at least 1");
  }
  if (hi < lo) raise(ErrorCode::EmptyRange, "reference range is empty");
  std::mt19937_64 gen(seed);
  Eigen::MatrixXd refs(n_y, steps);
  Eigen::VectorXd current(n_y);
  for (int s = 0; s < steps; ++s) {
    if (s % ref_hold == 0) {
      for (int i = 0; i < n_y; ++i) current(i) = lo + (hi - lo) * uniform01(gen);
    }
    refs.col(s) = current;
  }
  return refs;
}

void warm_start_shift(PrimalPoint& z, DualPoint& duals) {
  const auto shift = [](Eigen::MatrixXd& m) {
    for (Eigen::Index c = 0; c + 1 < m.cols(); ++c) m.col(c) = m.col(c + 1);
    // the last column keeps its value, duplicating the final stage
  };
  shift(z.y);
  shift(z.u);
  shift(z.du);
  shift(duals.lam);
  shift(duals.gam);
}

TimingStats timing_stats(const ClosedLoopLog& log) {
  if (log.records.empty()) raise(ErrorCode::EmptyLog, "log has no records");
  TimingStats stats;
  double total = 0.0, total_construct = 0.0;
  for (const auto& rec : log.records) {
    total += rec.solve_time_ms;
    total_construct += rec.construct_time_ms;
    stats.max_ms = std::max(stats.max_ms, rec.solve_time_ms);
  }
  stats.avg_ms = total / double(log.records.size());
  stats.construction_avg_ms = total_construct / double(log.records.size());
  return stats;
}

ArxModel plant_model_at(const Scenario& sc, int step, const ArxHistory& history) {
  if (const auto* fixed = std::get_if<ArxModel>(&sc.plant)) return *fixed;
  if (const auto* tv = std::get_if<TimeVaryingArxSpec>(&sc.plant)) {
    return tv_arx_at(*tv, double(step));
  }
  const auto& lpv = std::get<LpvArxSpec>(sc.plant);
  return lpv_arx_at(lpv, lpv_scheduling_vector(lpv, history));
}

ClosedLoopLog run_closed_loop(const Scenario& sc, LoopSolver which) {
  scenario_validate(sc);
  const PlantDims dims = plant_dims(sc.plant);
  const Eigen::MatrixXd refs =
      generate_references(dims.n_y, sc.steps, sc.ref_hold, sc.seed, sc.ref_lo, sc.ref_hi);

  ArxHistory history;
  history.past_y.assign(dims.n_a, Eigen::VectorXd::Zero(dims.n_y));
  history.past_u.assign(dims.n_b, Eigen::VectorXd::Zero(dims.n_u));

  std::optional<PrimalPoint> warm;
  std::optional<DualPoint> warm_duals;

  ClosedLoopLog log;
  log.records.reserve(sc.steps);
  constexpr double tol = 1e-9;

  for (int s = 0; s < sc.steps; ++s) {
    const ArxModel model = plant_model_at(sc, s, history);
    StepRecord rec;
    rec.t = s;
    rec.y = history.past_y.front();
    rec.r = refs.col(s);

    const MpcProblem problem = make_stage_problem(sc, model, history, refs.col(s));
    if (which == LoopSolver::CoordinateAl) {
      const auto start = std::chrono::steady_clock::now();
      const SolveReport report = solve(problem, sc.solver, warm, warm_duals);
      rec.solve_time_ms = elapsed_ms(start);
      rec.outer_iters = report.outer_iters;
      rec.inner_passes = report.total_inner_passes;
      rec.converged = report.status == SolveStatus::Converged;
      rec.u = report.solution.u.col(0);
      rec.du = report.solution.du.col(0);
      PrimalPoint next_warm = report.solution;
      DualPoint next_duals = report.duals;
      warm_start_shift(next_warm, next_duals);
      warm = std::move(next_warm);
      warm_duals = std::move(next_duals);
    } else {
      const auto build_start = std::chrono::steady_clock::now();
      const SparseQp qp = build_sparse_qp(problem);
      rec.construct_time_ms = elapsed_ms(build_start);
      const auto start = std::chrono::steady_clock::now();
      ReferenceSolveInfo info;
      const Eigen::VectorXd z = reference_solve(qp, 1e-6, &info);
      rec.solve_time_ms = elapsed_ms(start);
      rec.inner_passes = info.iterations;
      rec.converged = true;
      const PrimalPoint sol = unpack_primal(z, dims.n_y, dims.n_u, sc.mpc.horizon);
      rec.u = sol.u.col(0);
      rec.du = sol.du.col(0);
    }

    if (!rec.converged) ++log.nonconverged_count;
    if (!inside_box(rec.y, sc.mpc.y_min, sc.mpc.y_max, tol) ||
        !inside_box(rec.u, sc.mpc.u_min, sc.mpc.u_max, tol) ||
        !inside_box(rec.du, sc.mpc.du_min, sc.mpc.du_max, tol)) {
      ++log.violation_count;
    }

    const Eigen::VectorXd y_next = arx_next(model, history, rec.u);
    history.push(rec.u, y_next);
    log.records.push_back(std::move(rec));
  }
  return log;
}

CompareResult compare_closed_loop(const Scenario& sc, bool self_compare) {
  scenario_validate(sc);
  const PlantDims dims = plant_dims(sc.plant);
  const Eigen::MatrixXd refs =
      generate_references(dims.n_y, sc.steps, sc.ref_hold, sc.seed, sc.ref_lo, sc.ref_hi);

  ArxHistory history;
  history.past_y.assign(dims.n_a, Eigen::VectorXd::Zero(dims.n_y));
  history.past_u.assign(dims.n_b, Eigen::VectorXd::Zero(dims.n_u));

  std::optional<PrimalPoint> warm;
  std::optional<DualPoint> warm_duals;

  CompareResult result;
  result.steps = sc.steps;
  double cdal_total = 0.0, construct_total = 0.0, oracle_total = 0.0;

  for (int s = 0; s < sc.steps; ++s) {
    const ArxModel model = plant_model_at(sc, s, history);
    const MpcProblem problem = make_stage_problem(sc, model, history, refs.col(s));

    const auto cdal_start = std::chrono::steady_clock::now();
    const SolveReport report = solve(problem, sc.solver, warm, warm_duals);
    cdal_total += elapsed_ms(cdal_start);

    Eigen::VectorXd other_u;
    if (self_compare) {
      const SolveReport again = solve(problem, sc.solver, warm, warm_duals);
      other_u = again.solution.u.col(0);
    } else {
      const auto build_start = std::chrono::steady_clock::now();
      const SparseQp qp = build_sparse_qp(problem);
      construct_total += elapsed_ms(build_start);
      const auto oracle_start = std::chrono::steady_clock::now();
      const Eigen::VectorXd z = reference_solve(qp, 1e-6);
      oracle_total += elapsed_ms(oracle_start);
      other_u = unpack_primal(z, dims.n_y, dims.n_u, sc.mpc.horizon).u.col(0);
    }
    result.max_input_deviation =
        std::max(result.max_input_deviation,
                 (report.solution.u.col(0) - other_u).lpNorm<Eigen::Infinity>());

    const Eigen::VectorXd u0 = report.solution.u.col(0);
    const Eigen::VectorXd y_next = arx_next(model, history, u0);
    history.push(u0, y_next);

    PrimalPoint next_warm = report.solution;
    DualPoint next_duals = report.duals;
    warm_start_shift(next_warm, next_duals);
    warm = std::move(next_warm);
    warm_duals = std::move(next_duals);
  }
  result.cdal_solve_avg_ms = cdal_total / double(sc.steps);
  result.oracle_construct_avg_ms = construct_total / double(sc.steps);
  result.oracle_solve_avg_ms = oracle_total / double(sc.steps);
  return result;
}

bool setpoint_reachable(const ArxModel& model, const MpcTemplate& mpc, const Eigen::VectorXd& r,
                        double margin) {
  Eigen::MatrixXd sum_a = Eigen::MatrixXd::Zero(model.n_y, model.n_y);
  for (const auto& a : model.A) sum_a += a;
  Eigen::MatrixXd sum_b = Eigen::MatrixXd::Zero(model.n_y, model.n_u);
  for (const auto& b : model.B) sum_b += b;

  const Eigen::VectorXd rhs = (Eigen::MatrixXd::Identity(model.n_y, model.n_y) - sum_a) * r;
  const Eigen::VectorXd u_ss = sum_b.colPivHouseholderQr().solve(rhs);
  if ((sum_b * u_ss - rhs).lpNorm<Eigen::Infinity>() > 1e-6 * std::max(1.0, rhs.norm())) {
    return false;
  }
  return inside_box(r, (mpc.y_min.array() + margin).matrix(), (mpc.y_max.array() - margin).matrix(), 0.0) &&
         inside_box(u_ss, (mpc.u_min.array() + margin).matrix(), (mpc.u_max.array() - margin).matrix(), 0.0);
}

}  // namespace cdal
