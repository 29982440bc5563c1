#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cdal/arx_model.hpp"
#include "test_util.hpp"

using namespace cdal;

TEST_CASE("arx_validate accepts the nominal lag-4 instance") {
  const ArxModel m = arx_validate(test::nominal_tv_base());
  CHECK(m.n_a == 4);
  CHECK(m.A[0](0, 0) == doctest::Approx(0.9));
}

TEST_CASE("arx_validate rejects shape and finiteness violations") {
  ArxModel bad = test::nominal_tv_base();
  bad.A[0] = Eigen::MatrixXd::Zero(2, 3);
  CHECK_THROWS_WITH_AS(arx_validate(bad), doctest::Contains("A(1)"), Error);
  try {
    arx_validate(bad);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }

  ArxModel nan_model = test::nominal_tv_base();
  nan_model.B[1](0, 1) = std::nan("");
  try {
    arx_validate(nan_model);
    FAIL("expected NonFiniteEntry");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteEntry);
  }
}

TEST_CASE("arx_step basic evaluations") {
  const ArxModel m = test::nominal_tv_base();

  SUBCASE("zero window gives zero output") {
    std::vector<Eigen::VectorXd> ys(4, Eigen::VectorXd::Zero(2));
    std::vector<Eigen::VectorXd> us(4, Eigen::VectorXd::Zero(2));
    CHECK(arx_step(m, ys, us).norm() == 0.0);
  }

  SUBCASE("identity single-lag model reproduces the last output") {
    ArxModel id;
    id.n_y = 2;
    id.n_u = 2;
    id.n_a = 1;
    id.n_b = 1;
    id.A = {Eigen::MatrixXd::Identity(2, 2)};
    id.B = {Eigen::MatrixXd::Zero(2, 2)};
    Eigen::VectorXd y1(2);
    y1 << 0.3, -0.2;
    const Eigen::VectorXd out = arx_step(id, {y1}, {Eigen::VectorXd::Zero(2)});
    CHECK(out(0) == doctest::Approx(0.3));
    CHECK(out(1) == doctest::Approx(-0.2));
  }

  SUBCASE("unit input picks up the first column of B(1)") {
    std::vector<Eigen::VectorXd> ys(4, Eigen::VectorXd::Zero(2));
    std::vector<Eigen::VectorXd> us(4, Eigen::VectorXd::Zero(2));
    us[0] = Eigen::VectorXd::Zero(2);
    us[0](0) = 1.0;
    const Eigen::VectorXd out = arx_step(m, ys, us);
    CHECK(out(0) == doctest::Approx(1.0));
    CHECK(out(1) == doctest::Approx(0.5));
  }

  SUBCASE("window length mismatch is rejected") {
    std::vector<Eigen::VectorXd> ys(3, Eigen::VectorXd::Zero(2));
    std::vector<Eigen::VectorXd> us(4, Eigen::VectorXd::Zero(2));
    CHECK_THROWS_AS((void)arx_step(m, ys, us), Error);
  }
}

TEST_CASE("arx_step is linear in the window") {
  std::mt19937_64 gen(61);
  const ArxModel m = test::random_model(gen, 2, 3, 3, 2);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Eigen::VectorXd> y1, y2, u1, u2, yc, uc;
    const double a = test::uniform(gen, -2.0, 2.0);
    const double b = test::uniform(gen, -2.0, 2.0);
    for (int i = 0; i < m.n_a; ++i) {
      y1.push_back(test::random_vector(gen, m.n_y, 1.0));
      y2.push_back(test::random_vector(gen, m.n_y, 1.0));
      yc.push_back(a * y1.back() + b * y2.back());
    }
    for (int i = 0; i < m.n_b; ++i) {
      u1.push_back(test::random_vector(gen, m.n_u, 1.0));
      u2.push_back(test::random_vector(gen, m.n_u, 1.0));
      uc.push_back(a * u1.back() + b * u2.back());
    }
    const Eigen::VectorXd lhs = arx_step(m, yc, uc);
    const Eigen::VectorXd rhs = a * arx_step(m, y1, u1) + b * arx_step(m, y2, u2);
    CHECK((lhs - rhs).lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("tv_arx_at evaluates the drifting coefficients") {
  TimeVaryingArxSpec spec;
  spec.base = test::nominal_tv_base();

  SUBCASE("t = 0 swaps in the antidiagonal perturbation") {
    const ArxModel m0 = tv_arx_at(spec, 0.0);
    CHECK(m0.A[0](0, 0) == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(m0.A[0](0, 1) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(m0.A[0](1, 0) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(m0.A[0](1, 1) == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(m0.B[0](0, 1) == doctest::Approx(0.6).epsilon(1e-15));
  }

  SUBCASE("zero gain reproduces the base at every step") {
    TimeVaryingArxSpec frozen = spec;
    frozen.perturbation_gain = 0.0;
    for (int t : {0, 3, 17, 100}) {
      const ArxModel m = tv_arx_at(frozen, double(t));
      for (int i = 0; i < 4; ++i) {
        CHECK((m.A[i] - spec.base.A[i]).lpNorm<Eigen::Infinity>() == 0.0);
        CHECK((m.B[i] - spec.base.B[i]).lpNorm<Eigen::Infinity>() == 0.0);
      }
    }
  }

  SUBCASE("sine argument at a multiple of pi zeroes the diagonal drift") {
    const double t = 5.0 * M_PI * spec.period_divisor;
    const ArxModel m = tv_arx_at(spec, t);
    CHECK(std::abs(m.A[0](0, 0) - 0.9) < 1e-12);
    CHECK(std::abs(m.A[0](1, 1) - 0.9) < 1e-12);
  }

  SUBCASE("direct recomputation matches entrywise") {
    for (int t : {1, 7, 42}) {
      const ArxModel m = tv_arx_at(spec, double(t));
      const ArxModel again = tv_arx_at(spec, double(t));
      const double s = std::sin(t / spec.period_divisor);
      const double c = std::cos(t / spec.period_divisor);
      Eigen::MatrixXd pert(2, 2);
      pert << s, c, c, s;
      for (int i = 0; i < 4; ++i) {
        // bit-identical across calls, and equal to the recomputed formula up
        // to one rounding of the add
        CHECK((m.A[i] - again.A[i]).lpNorm<Eigen::Infinity>() == 0.0);
        CHECK((m.A[i] - spec.base.A[i] - 0.1 * pert).lpNorm<Eigen::Infinity>() < 1e-15);
        CHECK((m.B[i] - spec.base.B[i] - 0.1 * pert).lpNorm<Eigen::Infinity>() < 1e-15);
      }
    }
  }

  SUBCASE("non 2x2 shapes are rejected") {
    std::mt19937_64 gen(5);
    TimeVaryingArxSpec bad;
    bad.base = test::random_model(gen, 1, 2, 2, 2);
    try {
      (void)tv_arx_at(bad, 0.0);
      FAIL("expected UnsupportedShape");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::UnsupportedShape);
    }
  }
}

TEST_CASE("relu_net_eval") {
  SUBCASE("zero weights propagate the output bias") {
    ReluNetwork net;
    net.layers.resize(3);
    net.layers[0] = {Eigen::MatrixXd::Zero(4, 3), Eigen::VectorXd::Zero(4)};
    net.layers[1] = {Eigen::MatrixXd::Zero(4, 4), Eigen::VectorXd::Zero(4)};
    Eigen::VectorXd b3(2);
    b3 << 1.5, -2.5;
    net.layers[2] = {Eigen::MatrixXd::Zero(2, 4), b3};
    const Eigen::VectorXd out = relu_net_eval(net, Eigen::VectorXd::Ones(3));
    CHECK(out(0) == 1.5);
    CHECK(out(1) == -2.5);
  }

  SUBCASE("hidden layer clips negatives") {
    ReluNetwork net;
    net.layers.resize(2);
    net.layers[0] = {Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2)};
    net.layers[1] = {Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2)};
    Eigen::VectorXd w(2);
    w << -1.0, 2.0;
    const Eigen::VectorXd out = relu_net_eval(net, w);
    CHECK(out(0) == 0.0);
    CHECK(out(1) == 2.0);
  }

  SUBCASE("deterministic on repeated evaluation") {
    std::mt19937_64 gen(9);
    ReluNetwork net;
    net.layers.resize(3);
    net.layers[0] = {test::random_matrix(gen, 66, 22, 0.1), test::random_vector(gen, 66, 0.1)};
    net.layers[1] = {test::random_matrix(gen, 66, 66, 0.1), test::random_vector(gen, 66, 0.1)};
    net.layers[2] = {test::random_matrix(gen, 24, 66, 0.1), test::random_vector(gen, 24, 0.1)};
    const Eigen::VectorXd w = test::random_vector(gen, 22, 1.0);
    CHECK((relu_net_eval(net, w) - relu_net_eval(net, w)).norm() == 0.0);
  }

  SUBCASE("input size mismatch raises") {
    ReluNetwork net;
    net.layers.push_back({Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2)});
    CHECK_THROWS_AS((void)relu_net_eval(net, Eigen::VectorXd::Zero(3)), Error);
  }
}

TEST_CASE("relu networks are piecewise affine") {
  // Within one activation pattern, finite differences along a fixed direction
  // are constant.
  std::mt19937_64 gen(23);
  ReluNetwork net;
  net.layers.resize(3);
  net.layers[0] = {test::random_matrix(gen, 12, 6, 0.3), test::random_vector(gen, 12, 0.3)};
  net.layers[1] = {test::random_matrix(gen, 12, 12, 0.3), test::random_vector(gen, 12, 0.3)};
  net.layers[2] = {test::random_matrix(gen, 4, 12, 0.3), test::random_vector(gen, 4, 0.3)};
  const Eigen::VectorXd w0 = test::random_vector(gen, 6, 0.5);
  const Eigen::VectorXd dir = test::random_vector(gen, 6, 1.0);
  const double h = 1e-7;  // small enough to stay in one affine region
  const Eigen::VectorXd d1 = relu_net_eval(net, w0 + h * dir) - relu_net_eval(net, w0);
  const Eigen::VectorXd d2 =
      relu_net_eval(net, w0 + 2.0 * h * dir) - relu_net_eval(net, w0 + h * dir);
  CHECK((d1 - d2).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("lpv_arx_at") {
  const ArxModel base = test::nominal_tv_base();

  SUBCASE("zero-weight nets reproduce the packed constant model") {
    const LpvArxSpec spec = [&] {
      LpvArxSpec s = make_random_lpv_spec(base, 8, 3);
      for (auto& net : s.nets) {
        net.layers[0].W.setZero();
        net.layers[0].b.setZero();
        net.layers[1].W.setZero();
        net.layers[1].b.setZero();
        net.layers[2].W.setZero();
      }
      return s;
    }();
    std::mt19937_64 gen(17);
    const Eigen::VectorXd w = test::random_vector(gen, spec.scheduling_dim(), 1.0);
    const ArxModel m = lpv_arx_at(spec, w);
    for (int i = 0; i < base.n_a; ++i)
      CHECK((m.A[i] - base.A[i]).lpNorm<Eigen::Infinity>() == 0.0);
    for (int i = 0; i < base.n_b; ++i)
      CHECK((m.B[i] - base.B[i]).lpNorm<Eigen::Infinity>() == 0.0);
  }

  SUBCASE("fully zero nets give the zero model and zero steps") {
    LpvArxSpec s = make_random_lpv_spec(base, 8, 3);
    for (auto& net : s.nets)
      for (auto& layer : net.layers) {
        layer.W.setZero();
        layer.b.setZero();
      }
    const ArxModel m = lpv_arx_at(s, Eigen::VectorXd::Ones(s.scheduling_dim()));
    std::vector<Eigen::VectorXd> ys(4, Eigen::VectorXd::Ones(2));
    std::vector<Eigen::VectorXd> us(4, Eigen::VectorXd::Ones(2));
    CHECK(arx_step(m, ys, us).norm() == 0.0);
  }

  SUBCASE("coefficient rows agree with the direct product form") {
    // Model from w applied to a stacked window x equals [N_1(w)'; N_2(w)'] x.
    std::mt19937_64 gen(29);
    const LpvArxSpec spec = make_random_lpv_spec(base, 12, 7);
    for (int trial = 0; trial < 10; ++trial) {
      const Eigen::VectorXd w = test::random_vector(gen, spec.scheduling_dim(), 0.7);
      const Eigen::VectorXd x = test::random_vector(gen, spec.coeff_dim(), 0.7);
      const ArxModel m = lpv_arx_at(spec, w);
      std::vector<Eigen::VectorXd> ys, us;
      for (int i = 0; i < spec.n_a; ++i) ys.push_back(x.segment(i * spec.n_y, spec.n_y));
      for (int i = 0; i < spec.n_b; ++i)
        us.push_back(x.segment(spec.n_y * spec.n_a + i * spec.n_u, spec.n_u));
      const Eigen::VectorXd via_model = arx_step(m, ys, us);
      Eigen::VectorXd direct(spec.n_y);
      for (int r = 0; r < spec.n_y; ++r) direct(r) = relu_net_eval(spec.nets[r], w).dot(x);
      CHECK((via_model - direct).lpNorm<Eigen::Infinity>() < 1e-12);
    }
  }

  SUBCASE("affine in w within a fixed activation region") {
    std::mt19937_64 gen(31);
    const LpvArxSpec spec = make_random_lpv_spec(base, 12, 11);
    const Eigen::VectorXd w0 = test::random_vector(gen, spec.scheduling_dim(), 0.4);
    const Eigen::VectorXd dir = test::random_vector(gen, spec.scheduling_dim(), 1.0);
    const double h = 1e-7;
    const ArxModel m0 = lpv_arx_at(spec, w0);
    const ArxModel m1 = lpv_arx_at(spec, w0 + h * dir);
    const ArxModel m2 = lpv_arx_at(spec, (w0 + 2.0 * h * dir).eval());
    for (int i = 0; i < spec.n_a; ++i) {
      const Eigen::MatrixXd d1 = m1.A[i] - m0.A[i];
      const Eigen::MatrixXd d2 = m2.A[i] - m1.A[i];
      CHECK((d1 - d2).lpNorm<Eigen::Infinity>() < 1e-8);
    }
  }
}

TEST_CASE("history push keeps newest-first order") {
  ArxModel m = test::nominal_tv_base();
  ArxHistory h = zero_history(m);
  Eigen::VectorXd u(2), y(2);
  u << 1.0, 2.0;
  y << 3.0, 4.0;
  h.push(u, y);
  CHECK(h.past_y[0](0) == 3.0);
  CHECK(h.past_u[0](1) == 2.0);
  CHECK(h.past_y.size() == 4);
  CHECK(h.past_u.size() == 4);
  CHECK(h.past_y[1].norm() == 0.0);
}
