#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "cdal/errors.hpp"

namespace cdal {

/// MIMO ARX model: y_t = sum_i A(i) y_{t-i} + sum_i B(i) u_{t-i}.
/// A holds n_a matrices of size n_y x n_y, B holds n_b matrices of size
/// n_y x n_u; lag 1 comes first in both lists.
struct ArxModel {
  int n_y = 0;
  int n_u = 0;
  int n_a = 0;
  int n_b = 0;
  std::vector<Eigen::MatrixXd> A;
  std::vector<Eigen::MatrixXd> B;
};

/// Checks shapes and finiteness; returns the model unchanged on success.
/// Throws DimensionMismatch or NonFiniteEntry.
ArxModel arx_validate(ArxModel model);

/// Most recent signals, newest first:
///   past_y = [y_0, y_{-1}, ..., y_{1-n_a}]   (n_a vectors of size n_y)
///   past_u = [u_{-1}, u_{-2}, ..., u_{-n_b}] (n_b vectors of size n_u)
/// The window keeps n_b inputs so the same type serves both the plant
/// recursion and the MPC problem (which also needs u_{-1} for the first
/// input-increment equality).
struct ArxHistory {
  std::vector<Eigen::VectorXd> past_y;
  std::vector<Eigen::VectorXd> past_u;

  /// Shift the window one step: u_now is the input just applied, y_next the
  /// output it produced.
  void push(const Eigen::VectorXd& u_now, const Eigen::VectorXd& y_next);
};

ArxHistory zero_history(const ArxModel& model);
void check_history(const ArxModel& model, const ArxHistory& history);

/// One ARX recursion step. recent_y[k] = y_{t-1-k} (n_a entries) and
/// recent_u[k] = u_{t-1-k} (n_b entries); returns y_t.
Eigen::VectorXd arx_step(const ArxModel& model,
                         const std::vector<Eigen::VectorXd>& recent_y,
                         const std::vector<Eigen::VectorXd>& recent_u);

/// Convenience: output following `history` when input u_now is applied.
Eigen::VectorXd arx_next(const ArxModel& model, const ArxHistory& history,
                         const Eigen::VectorXd& u_now);

/// Two-input two-output model whose coefficients drift sinusoidally:
/// A(i) at time t is base.A(i) + gain * M(t), same for B(i), with
/// M(t) = [[sin(t/d), cos(t/d)], [cos(t/d), sin(t/d)]].
struct TimeVaryingArxSpec {
  ArxModel base;
  double perturbation_gain = 0.1;
  double period_divisor = 10.0;
};

ArxModel tv_arx_at(const TimeVaryingArxSpec& spec, double t);

/// Feedforward network with ReLU hidden layers and an affine output layer.
struct ReluNetwork {
  struct Layer {
    Eigen::MatrixXd W;
    Eigen::VectorXd b;
  };
  std::vector<Layer> layers;

  int input_dim() const { return layers.empty() ? 0 : int(layers.front().W.cols()); }
  int output_dim() const { return layers.empty() ? 0 : int(layers.back().W.rows()); }
};

ReluNetwork relu_net_validate(ReluNetwork net);

/// v_0 = w; v_l = max(0, W_l v_{l-1} + b_l) for all but the last layer;
/// the last layer is affine.
Eigen::VectorXd relu_net_eval(const ReluNetwork& net, const Eigen::VectorXd& w);

/// Coefficient maps for a parameter-varying ARX model: one network per output
/// row. Each net maps the scheduling vector
///   w = [y_{t-1}; ...; y_{t-n_a}; u_{t-2}; ...; u_{t-n_b}]
/// (dimension n_y*n_a + n_u*(n_b-1)) to row r of the stacked coefficient
/// matrix [A(1) ... A(n_a) B(1) ... B(n_b)] (dimension n_y*n_a + n_u*n_b).
/// w omits u_{t-1}, so the one-step map stays affine in the current input.
struct LpvArxSpec {
  std::vector<ReluNetwork> nets;
  int n_y = 0;
  int n_u = 0;
  int n_a = 0;
  int n_b = 0;

  int scheduling_dim() const { return n_y * n_a + n_u * (n_b - 1); }
  int coeff_dim() const { return n_y * n_a + n_u * n_b; }
};

LpvArxSpec lpv_validate(LpvArxSpec spec);

/// Evaluates all row networks at w and unpacks the rows into an ArxModel.
ArxModel lpv_arx_at(const LpvArxSpec& spec, const Eigen::VectorXd& w);

/// Scheduling vector from a history window (all past outputs, then the past
/// inputs except the newest one).
Eigen::VectorXd lpv_scheduling_vector(const LpvArxSpec& spec, const ArxHistory& history);

/// Builds the row networks for an LPV instance: the output-layer bias of row r
/// packs row r of base's stacked coefficients, every other parameter is drawn
/// uniformly from [0, 0.1) with the given seed. hidden is the width of the two
/// ReLU layers.
LpvArxSpec make_random_lpv_spec(const ArxModel& base, int hidden, std::uint64_t seed);

}  // namespace cdal
