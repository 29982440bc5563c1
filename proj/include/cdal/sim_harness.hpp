#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "cdal/cdal_solver.hpp"
#include "cdal/qp_reference.hpp"

namespace cdal {

/// MPC settings that stay fixed over a closed-loop run; the per-step problem
/// adds the current model, history, and references.
struct MpcTemplate {
  int horizon = 10;
  Eigen::VectorXd w_y, w_du;
  Eigen::VectorXd y_min, y_max, u_min, u_max, du_min, du_max;
};

using PlantSpec = std::variant<ArxModel, TimeVaryingArxSpec, LpvArxSpec>;

struct Scenario {
  PlantSpec plant;
  MpcTemplate mpc;
  int steps = 200;
  int ref_hold = 20;
  std::uint64_t seed = 0;
  double ref_lo = -0.8;
  double ref_hi = 0.8;
  SolverConfig solver;
};

void scenario_validate(const Scenario& scenario);

/// Piecewise-constant reference sequence (n_y x steps): a fresh uniform draw
/// in [lo, hi) per component every ref_hold steps. Deterministic per seed.
Eigen::MatrixXd generate_references(int n_y, int steps, int ref_hold,
                                    std::uint64_t seed, double lo, double hi);

/// Shift a solution one stage for reuse at the next step: drop the first
/// column, duplicate the last. Applied to primal and duals alike.
void warm_start_shift(PrimalPoint& z, DualPoint& duals);

struct StepRecord {
  int t = 0;
  Eigen::VectorXd y, u, du, r;
  long outer_iters = 0;
  long inner_passes = 0;
  double solve_time_ms = 0.0;
  double construct_time_ms = 0.0;  // oracle-driven runs only
  bool converged = true;
};

struct ClosedLoopLog {
  std::vector<StepRecord> records;
  int violation_count = 0;
  int nonconverged_count = 0;
};

struct TimingStats {
  double avg_ms = 0.0;
  double max_ms = 0.0;
  double construction_avg_ms = 0.0;
};

TimingStats timing_stats(const ClosedLoopLog& log);

/// Model the generator yields for the step from `step` to step+1; the
/// controller freezes it over its whole horizon.
ArxModel plant_model_at(const Scenario& scenario, int step, const ArxHistory& history);

enum class LoopSolver { CoordinateAl, QpOracle };

/// Receding-horizon loop: at each step read the current model, build the
/// stage problem from the realized history, solve, apply the first input,
/// and advance the plant with the same model (no noise, no mismatch).
/// A non-converged solve is flagged and the loop continues on its iterate.
ClosedLoopLog run_closed_loop(const Scenario& scenario,
                              LoopSolver solver = LoopSolver::CoordinateAl);

struct CompareResult {
  int steps = 0;
  double max_input_deviation = 0.0;
  double cdal_solve_avg_ms = 0.0;
  double oracle_construct_avg_ms = 0.0;
  double oracle_solve_avg_ms = 0.0;
};

/// Runs the closed loop on the coordinate solver while re-solving every
/// stage problem with the QP oracle, and reports the worst deviation of the
/// applied input along with the timing split. self_compare replaces the
/// oracle by a second identical solve (deviation must be zero).
CompareResult compare_closed_loop(const Scenario& scenario, bool self_compare = false);

/// Steady-state admissibility of a setpoint under `model`: a holdable input
/// u_ss with (I - sum A(i)) r = (sum B(i)) u_ss must exist at least `margin`
/// inside the input box, with r at least `margin` inside the output box.
bool setpoint_reachable(const ArxModel& model, const MpcTemplate& mpc,
                        const Eigen::VectorXd& r, double margin = 0.02);

}  // namespace cdal
