#include "cdal/arx_model.hpp"

#include <cmath>
#include <random>

namespace cdal {

namespace {

void check_finite(const Eigen::MatrixXd& m, const std::string& name) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      if (!std::isfinite(m(r, c))) {
        raise(ErrorCode::NonFiniteEntry,
              name + " entry (" + std::to_string(r) + "," + std::to_string(c) + ")");
      }
    }
  }
}

void check_shape(const Eigen::MatrixXd& m, int rows, int cols, const std::string& name) {
  if (m.rows() != rows || m.cols() != cols) {
    raise(ErrorCode::DimensionMismatch,
          name + " is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
              ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
  }
}

// Uniform double in [0, 1) from the standardized mt19937_64 stream, so
// generated instances are reproducible across platforms.
double uniform01(std::mt19937_64& gen) {
  return double(gen() >> 11) * 0x1.0p-53;
}

}  // namespace

ArxModel arx_validate(ArxModel model) {
  if (model.n_y < 1 || model.n_u < 1 || model.n_a < 1 || model.n_b < 1) {
    raise(ErrorCode::DimensionMismatch, "n_y, n_u, n_a, n_b must all be at least 1");
  }
  if (int(model.A.size()) != model.n_a) {
    raise(ErrorCode::DimensionMismatch, "A holds " + std::to_string(model.A.size()) +
                                            " matrices, expected n_a=" + std::to_string(model.n_a));
  }
  if (int(model.B.size()) != model.n_b) {
    raise(ErrorCode::DimensionMismatch, "B holds " + std::to_string(model.B.size()) +
                                            " matrices, expected n_b=" + std::to_string(model.n_b));
  }
  for (int i = 0; i < model.n_a; ++i) {
    const std::string name = "A(" + std::to_string(i + 1) + ")";
    check_shape(model.A[i], model.n_y, model.n_y, name);
    check_finite(model.A[i], name);
  }
  for (int i = 0; i < model.n_b; ++i) {
    const std::string name = "B(" + std::to_string(i + 1) + ")";
    check_shape(model.B[i], model.n_y, model.n_u, name);
    check_finite(model.B[i], name);
  }
  return model;
}

void ArxHistory::push(const Eigen::VectorXd& u_now, const Eigen::VectorXd& y_next) {
  past_y.insert(past_y.begin(), y_next);
  past_y.pop_back();
  past_u.insert(past_u.begin(), u_now);
  past_u.pop_back();
}

ArxHistory zero_history(const ArxModel& model) {
  ArxHistory h;
  h.past_y.assign(model.n_a, Eigen::VectorXd::Zero(model.n_y));
  h.past_u.assign(model.n_b, Eigen::VectorXd::Zero(model.n_u));
  return h;
}

void check_history(const ArxModel& model, const ArxHistory& history) {
  if (int(history.past_y.size()) != model.n_a) {
    raise(ErrorCode::LengthMismatch, "history holds " + std::to_string(history.past_y.size()) +
                                         " outputs, expected n_a=" + std::to_string(model.n_a));
  }
  if (int(history.past_u.size()) != model.n_b) {
    raise(ErrorCode::LengthMismatch, "history holds " + std::to_string(history.past_u.size()) +
                                         " inputs, expected n_b=" + std::to_string(model.n_b));
  }
  for (const auto& y : history.past_y) {
    if (y.size() != model.n_y) raise(ErrorCode::DimensionMismatch, "history output size");
    check_finite(y, "history output");
  }
  for (const auto& u : history.past_u) {
    if (u.size() != model.n_u) raise(ErrorCode::DimensionMismatch, "history input size");
    check_finite(u, "history input");
  }
}

Eigen::VectorXd arx_step(const ArxModel& model,
                         const std::vector<Eigen::VectorXd>& recent_y,
                         const std::vector<Eigen::VectorXd>& recent_u) {
  if (int(recent_y.size()) != model.n_a || int(recent_u.size()) != model.n_b) {
    raise(ErrorCode::DimensionMismatch, "window lengths must equal n_a and n_b");
  }
  Eigen::VectorXd y = Eigen::VectorXd::Zero(model.n_y);
  for (int i = 0; i < model.n_a; ++i) {
    if (recent_y[i].size() != model.n_y) raise(ErrorCode::DimensionMismatch, "window output size");
    y.noalias() += model.A[i] * recent_y[i];
  }
  for (int i = 0; i < model.n_b; ++i) {
    if (recent_u[i].size() != model.n_u) raise(ErrorCode::DimensionMismatch, "window input size");
    y.noalias() += model.B[i] * recent_u[i];
  }
  return y;
}

Eigen::VectorXd arx_next(const ArxModel& model, const ArxHistory& history,
                         const Eigen::VectorXd& u_now) {
  std::vector<Eigen::VectorXd> window_u;
  window_u.reserve(model.n_b);
  window_u.push_back(u_now);
  for (int i = 0; i + 1 < model.n_b; ++i) window_u.push_back(history.past_u[i]);
  return arx_step(model, history.past_y, window_u);
}

ArxModel tv_arx_at(const TimeVaryingArxSpec& spec, double t) {
  if (spec.base.n_y != 2 || spec.base.n_u != 2) {
    raise(ErrorCode::UnsupportedShape, "time-varying generator is defined for n_y = n_u = 2");
  }
  const double arg = t / spec.period_divisor;
  Eigen::Matrix2d m;
  m << std::sin(arg), std::cos(arg), std::cos(arg), std::sin(arg);
  ArxModel out = spec.base;
  for (auto& a : out.A) a += spec.perturbation_gain * m;
  for (auto& b : out.B) b += spec.perturbation_gain * m;
  return out;
}

ReluNetwork relu_net_validate(ReluNetwork net) {
  if (net.layers.empty()) raise(ErrorCode::DimensionMismatch, "network has no layers");
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    if (layer.W.rows() != layer.b.size()) {
      raise(ErrorCode::DimensionMismatch,
            "layer " + std::to_string(l + 1) + ": W has " + std::to_string(layer.W.rows()) +
                " rows but b has " + std::to_string(layer.b.size()));
    }
    if (l > 0 && net.layers[l - 1].W.rows() != layer.W.cols()) {
      raise(ErrorCode::DimensionMismatch,
            "layer " + std::to_string(l + 1) + " expects input of size " +
                std::to_string(layer.W.cols()) + ", previous layer outputs " +
                std::to_string(net.layers[l - 1].W.rows()));
    }
    check_finite(layer.W, "layer W");
    check_finite(layer.b, "layer b");
  }
  return net;
}

Eigen::VectorXd relu_net_eval(const ReluNetwork& net, const Eigen::VectorXd& w) {
  if (net.layers.empty()) raise(ErrorCode::DimensionMismatch, "network has no layers");
  if (w.size() != net.input_dim()) {
    raise(ErrorCode::DimensionMismatch, "scheduling vector has size " + std::to_string(w.size()) +
                                            ", expected " + std::to_string(net.input_dim()));
  }
  Eigen::VectorXd v = w;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    v = net.layers[l].W * v + net.layers[l].b;
    if (l + 1 < net.layers.size()) v = v.cwiseMax(0.0);
  }
  return v;
}

LpvArxSpec lpv_validate(LpvArxSpec spec) {
  if (spec.n_y < 1 || spec.n_u < 1 || spec.n_a < 1 || spec.n_b < 1) {
    raise(ErrorCode::DimensionMismatch, "n_y, n_u, n_a, n_b must all be at least 1");
  }
  if (int(spec.nets.size()) != spec.n_y) {
    raise(ErrorCode::DimensionMismatch, "expected one network per output row");
  }
  for (int r = 0; r < spec.n_y; ++r) {
    const auto& net = spec.nets[r];
    if (net.input_dim() != spec.scheduling_dim()) {
      raise(ErrorCode::DimensionMismatch,
            "network " + std::to_string(r + 1) + " input dim " + std::to_string(net.input_dim()) +
                ", expected " + std::to_string(spec.scheduling_dim()));
    }
    if (net.output_dim() != spec.coeff_dim()) {
      raise(ErrorCode::DimensionMismatch,
            "network " + std::to_string(r + 1) + " output dim " + std::to_string(net.output_dim()) +
                ", expected " + std::to_string(spec.coeff_dim()));
    }
  }
  return spec;
}

ArxModel lpv_arx_at(const LpvArxSpec& spec, const Eigen::VectorXd& w) {
  ArxModel model;
  model.n_y = spec.n_y;
  model.n_u = spec.n_u;
  model.n_a = spec.n_a;
  model.n_b = spec.n_b;
  model.A.assign(spec.n_a, Eigen::MatrixXd::Zero(spec.n_y, spec.n_y));
  model.B.assign(spec.n_b, Eigen::MatrixXd::Zero(spec.n_y, spec.n_u));
  for (int r = 0; r < spec.n_y; ++r) {
    const Eigen::VectorXd row = relu_net_eval(spec.nets[r], w);
    int k = 0;
    for (int i = 0; i < spec.n_a; ++i)
      for (int c = 0; c < spec.n_y; ++c) model.A[i](r, c) = row(k++);
    for (int i = 0; i < spec.n_b; ++i)
      for (int c = 0; c < spec.n_u; ++c) model.B[i](r, c) = row(k++);
  }
  return model;
}

Eigen::VectorXd lpv_scheduling_vector(const LpvArxSpec& spec, const ArxHistory& history) {
  if (int(history.past_y.size()) != spec.n_a || int(history.past_u.size()) != spec.n_b) {
    raise(ErrorCode::LengthMismatch, "history window does not match the LPV model order");
  }
  Eigen::VectorXd w(spec.scheduling_dim());
  int k = 0;
  for (int i = 0; i < spec.n_a; ++i) {
    w.segment(k, spec.n_y) = history.past_y[i];
    k += spec.n_y;
  }
  for (int i = 1; i < spec.n_b; ++i) {  // skip the newest input
    w.segment(k, spec.n_u) = history.past_u[i];
    k += spec.n_u;
  }
  return w;
}

LpvArxSpec make_random_lpv_spec(const ArxModel& base, int hidden, std::uint64_t seed) {
  arx_validate(base);
  LpvArxSpec spec;
  spec.n_y = base.n_y;
  spec.n_u = base.n_u;
  spec.n_a = base.n_a;
  spec.n_b = base.n_b;

  std::mt19937_64 gen(seed);
  const auto fill = [&gen](Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = 0.1 * uniform01(gen);
  };
  const auto fill_vec = [&gen](Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = 0.1 * uniform01(gen);
  };

  const int in = spec.scheduling_dim();
  const int out = spec.coeff_dim();
  for (int r = 0; r < spec.n_y; ++r) {
    ReluNetwork net;
    net.layers.resize(3);
    net.layers[0].W.resize(hidden, in);
    net.layers[0].b.resize(hidden);
    net.layers[1].W.resize(hidden, hidden);
    net.layers[1].b.resize(hidden);
    net.layers[2].W.resize(out, hidden);
    net.layers[2].b.resize(out);
    fill(net.layers[0].W);
    fill_vec(net.layers[0].b);
    fill(net.layers[1].W);
    fill_vec(net.layers[1].b);
    fill(net.layers[2].W);
    // Output bias packs row r of the stacked nominal coefficients, matching
    // the unpacking order of lpv_arx_at.
    int k = 0;
    for (int i = 0; i < spec.n_a; ++i)
      for (int c = 0; c < spec.n_y; ++c) net.layers[2].b(k++) = base.A[i](r, c);
    for (int i = 0; i < spec.n_b; ++i)
      for (int c = 0; c < spec.n_u; ++c) net.layers[2].b(k++) = base.B[i](r, c);
    spec.nets.push_back(std::move(net));
  }
  return lpv_validate(std::move(spec));
}

}  // namespace cdal
