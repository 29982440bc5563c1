#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cdal/mpc_problem.hpp"
#include "test_util.hpp"

using namespace cdal;

namespace {

// The standard benchmark settings: unit output weights, 0.1 increment
// weights, all boxes [-1, 1].
MpcProblem benchmark_problem(int horizon) {
  MpcProblem p;
  p.horizon = horizon;
  p.model = test::nominal_tv_base();
  p.w_y = Eigen::VectorXd::Ones(2);
  p.w_du = Eigen::VectorXd::Constant(2, 0.1);
  p.y_min = Eigen::VectorXd::Constant(2, -1.0);
  p.y_max = Eigen::VectorXd::Constant(2, 1.0);
  p.u_min = p.y_min;
  p.u_max = p.y_max;
  p.du_min = p.y_min;
  p.du_max = p.y_max;
  p.refs = Eigen::MatrixXd::Zero(2, horizon);
  p.history = zero_history(p.model);
  return p;
}

}  // namespace

TEST_CASE("problem_validate") {
  SUBCASE("benchmark settings are valid") {
    CHECK_NOTHROW((void)problem_validate(benchmark_problem(10)));
  }

  SUBCASE("reversed bounds are rejected") {
    MpcProblem p = benchmark_problem(10);
    p.y_min = Eigen::VectorXd::Ones(2);
    p.y_max = -Eigen::VectorXd::Ones(2);
    try {
      (void)problem_validate(p);
      FAIL("expected BoundOrderViolation");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::BoundOrderViolation);
    }
  }

  SUBCASE("short reference list is rejected") {
    MpcProblem p = benchmark_problem(10);
    p.refs = Eigen::MatrixXd::Zero(2, 9);
    try {
      (void)problem_validate(p);
      FAIL("expected LengthMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::LengthMismatch);
    }
  }

  SUBCASE("negative weights are rejected") {
    MpcProblem p = benchmark_problem(10);
    p.w_du(1) = -0.1;
    try {
      (void)problem_validate(p);
      FAIL("expected NegativeWeight");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NegativeWeight);
    }
  }
}

TEST_CASE("residuals") {
  SUBCASE("forward-simulated points have zero residuals") {
    std::mt19937_64 gen(101);
    for (int trial = 0; trial < 10; ++trial) {
      const MpcProblem p = test::random_problem(gen, 2, 2, 3, 2, 8);
      const PrimalPoint z = test::simulated_point(gen, p);
      const Residuals res = residuals(p, z);
      CHECK(res.arx.lpNorm<Eigen::Infinity>() < 1e-14);
      CHECK(res.inc.lpNorm<Eigen::Infinity>() < 1e-14);
    }
  }

  SUBCASE("zero history and inputs against unit outputs") {
    MpcProblem p = benchmark_problem(5);
    p.refs = Eigen::MatrixXd::Ones(2, 5);
    PrimalPoint z = zero_primal(p);
    z.y = Eigen::MatrixXd::Ones(2, 5);
    const Residuals res = residuals(p, z);
    for (int t = 1; t <= 5; ++t) {
      Eigen::VectorXd expected = -Eigen::VectorXd::Ones(2);
      for (int i = 1; i <= p.model.n_a; ++i) {
        if (t - i >= 1) expected += p.model.A[i - 1] * Eigen::VectorXd::Ones(2);
      }
      CHECK((res.arx.col(t - 1) - expected).lpNorm<Eigen::Infinity>() < 1e-14);
      CHECK(res.inc.col(t - 1).norm() == 0.0);
    }
  }

  SUBCASE("perturbing one output touches exactly the coupled stages") {
    std::mt19937_64 gen(55);
    const MpcProblem p = test::random_problem(gen, 2, 2, 3, 3, 8);
    const PrimalPoint z = test::random_feasible_point(gen, p);
    PrimalPoint z2 = z;
    const double eps = 0.25;
    z2.y(0, 2) += eps;  // y_3, first component
    const Residuals before = residuals(p, z);
    const Residuals after = residuals(p, z2);
    for (int t = 1; t <= 8; ++t) {
      const Eigen::VectorXd diff = after.arx.col(t - 1) - before.arx.col(t - 1);
      if (t == 3) {
        Eigen::VectorXd expected = Eigen::VectorXd::Zero(2);
        expected(0) = -eps;
        CHECK((diff - expected).lpNorm<Eigen::Infinity>() < 1e-12);
      } else if (t > 3 && t - 3 <= p.model.n_a) {
        const Eigen::VectorXd expected = p.model.A[t - 4].col(0) * eps;
        CHECK((diff - expected).lpNorm<Eigen::Infinity>() < 1e-12);
      } else {
        CHECK(diff.lpNorm<Eigen::Infinity>() < 1e-15);
      }
      CHECK((after.inc.col(t - 1) - before.inc.col(t - 1)).norm() == 0.0);
    }
  }

  SUBCASE("residuals vanish only for dynamically consistent points") {
    std::mt19937_64 gen(77);
    const MpcProblem p = test::random_problem(gen, 1, 2, 2, 2, 5);
    PrimalPoint z = test::simulated_point(gen, p);
    z.u(0, 2) += 1e-3;
    const Residuals res = residuals(p, z);
    const double total = res.arx.lpNorm<Eigen::Infinity>() + res.inc.lpNorm<Eigen::Infinity>();
    CHECK(total > 1e-5);
  }
}

TEST_CASE("al_objective") {
  SUBCASE("feasible point on its references with zero increments costs nothing") {
    std::mt19937_64 gen(7);
    MpcProblem p = test::random_problem(gen, 2, 2, 2, 2, 6);
    PrimalPoint z = zero_primal(p);
    Eigen::VectorXd u_prev = p.history.past_u.front();
    ArxHistory window = p.history;
    for (int t = 0; t < p.horizon; ++t) {
      z.u.col(t) = u_prev;
      z.y.col(t) = arx_next(p.model, window, u_prev);
      window.push(u_prev, z.y.col(t));
    }
    p.refs = z.y;
    CHECK(al_objective(p, z, zero_dual(p), 1.0) == doctest::Approx(0.0).epsilon(1e-12));
  }

  SUBCASE("penalty grows with rho on infeasible points") {
    std::mt19937_64 gen(8);
    const MpcProblem p = test::random_problem(gen, 2, 2, 2, 2, 6);
    const PrimalPoint z = test::random_feasible_point(gen, p);
    const DualPoint d = zero_dual(p);
    const Residuals res = residuals(p, z);
    REQUIRE(res.arx.norm() > 1e-6);
    const double v1 = al_objective(p, z, d, 1.0);
    const double v2 = al_objective(p, z, d, 2.0);
    CHECK(v2 > v1);
    const double expected =
        tracking_cost(p, z) + 0.5 * (res.arx.squaredNorm() + res.inc.squaredNorm());
    CHECK(v1 == doctest::Approx(expected).epsilon(1e-12));
  }

  SUBCASE("nonpositive rho raises") {
    const MpcProblem p = benchmark_problem(3);
    try {
      (void)al_objective(p, zero_primal(p), zero_dual(p), 0.0);
      FAIL("expected NonPositiveRho");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NonPositiveRho);
    }
  }

  SUBCASE("midpoint convexity in z") {
    std::mt19937_64 gen(12);
    for (int trial = 0; trial < 20; ++trial) {
      const MpcProblem p = test::random_problem(gen, 2, 1, 2, 3, 5);
      const DualPoint d = test::random_dual(gen, p);
      const PrimalPoint a = test::random_feasible_point(gen, p);
      const PrimalPoint b = test::random_feasible_point(gen, p);
      PrimalPoint mid = a;
      mid.y = 0.5 * (a.y + b.y);
      mid.u = 0.5 * (a.u + b.u);
      mid.du = 0.5 * (a.du + b.du);
      const double rho = test::uniform(gen, 0.5, 3.0);
      const double lhs = al_objective(p, mid, d, rho);
      const double rhs = 0.5 * (al_objective(p, a, d, rho) + al_objective(p, b, d, rho));
      CHECK(lhs <= rhs + 1e-9);
    }
  }
}
