#include "cdal/json_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace cdal {

namespace {

using nlohmann::json;

[[noreturn]] void parse_fail(const std::string& where, const std::string& what) {
  raise(ErrorCode::ParseError, where + ": " + what);
}

const json& field(const json& j, const std::string& key, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end()) parse_fail(where, "missing field '" + key + "'");
  return *it;
}

double get_double(const json& j, const std::string& key, const std::string& where) {
  const json& f = field(j, key, where);
  if (!f.is_number()) parse_fail(where + "." + key, "expected a number");
  return f.get<double>();
}

double get_double_or(const json& j, const std::string& key, double fallback) {
  const auto it = j.find(key);
  return it == j.end() ? fallback : it->get<double>();
}

int get_int(const json& j, const std::string& key, const std::string& where) {
  const json& f = field(j, key, where);
  if (!f.is_number_integer()) parse_fail(where + "." + key, "expected an integer");
  return f.get<int>();
}

bool get_bool_or(const json& j, const std::string& key, bool fallback) {
  const auto it = j.find(key);
  return it == j.end() ? fallback : it->get<bool>();
}

Eigen::VectorXd get_vector(const json& j, const std::string& key, const std::string& where) {
  const json& f = field(j, key, where);
  if (!f.is_array()) parse_fail(where + "." + key, "expected an array");
  Eigen::VectorXd v(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!f[i].is_number()) parse_fail(where + "." + key, "expected numbers");
    v(Eigen::Index(i)) = f[i].get<double>();
  }
  return v;
}

Eigen::MatrixXd matrix_from_flat(const json& flat, int rows, int cols, const std::string& where) {
  if (!flat.is_array() || int(flat.size()) != rows * cols) {
    parse_fail(where, "expected " + std::to_string(rows * cols) + " row-major entries");
  }
  Eigen::MatrixXd m(rows, cols);
  int k = 0;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = flat[k++].get<double>();
  return m;
}

json matrix_to_flat(const Eigen::MatrixXd& m) {
  json flat = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
  return flat;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json columns_to_json(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index c = 0; c < m.cols(); ++c) a.push_back(vector_to_json(m.col(c)));
  return a;
}

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

json model_to_json(const ArxModel& model) {
  json j;
  j["n_y"] = model.n_y;
  j["n_u"] = model.n_u;
  j["n_a"] = model.n_a;
  j["n_b"] = model.n_b;
  json a = json::array(), b = json::array();
  for (const auto& m : model.A) a.push_back(matrix_to_flat(m));
  for (const auto& m : model.B) b.push_back(matrix_to_flat(m));
  j["A"] = a;
  j["B"] = b;
  return j;
}

ArxModel model_from_json(const json& j, const std::string& where) {
  ArxModel model;
  model.n_y = get_int(j, "n_y", where);
  model.n_u = get_int(j, "n_u", where);
  model.n_a = get_int(j, "n_a", where);
  model.n_b = get_int(j, "n_b", where);
  const json& a = field(j, "A", where);
  const json& b = field(j, "B", where);
  if (!a.is_array() || !b.is_array()) parse_fail(where, "A and B must be arrays of matrices");
  for (std::size_t i = 0; i < a.size(); ++i) {
    model.A.push_back(matrix_from_flat(a[i], model.n_y, model.n_y,
                                       where + ".A[" + std::to_string(i) + "]"));
  }
  for (std::size_t i = 0; i < b.size(); ++i) {
    model.B.push_back(matrix_from_flat(b[i], model.n_y, model.n_u,
                                       where + ".B[" + std::to_string(i) + "]"));
  }
  return arx_validate(std::move(model));
}

json network_to_json(const ReluNetwork& net) {
  json layers = json::array();
  for (const auto& layer : net.layers) {
    layers.push_back({{"W", matrix_to_flat(layer.W)}, {"b", vector_to_json(layer.b)}});
  }
  return {{"layers", layers}};
}

ReluNetwork network_from_json(const json& j, const std::string& where) {
  const json& layers = field(j, "layers", where);
  if (!layers.is_array() || layers.empty()) parse_fail(where, "layers must be a nonempty array");
  ReluNetwork net;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string here = where + ".layers[" + std::to_string(l) + "]";
    const Eigen::VectorXd b = get_vector(layers[l], "b", here);
    const json& w = field(layers[l], "W", here);
    const int rows = int(b.size());
    if (rows == 0 || !w.is_array() || int(w.size()) % rows != 0) {
      parse_fail(here, "W length must be a multiple of len(b)");
    }
    const int cols = int(w.size()) / rows;
    net.layers.push_back({matrix_from_flat(w, rows, cols, here + ".W"), b});
  }
  return relu_net_validate(std::move(net));
}

json history_to_json(const ArxHistory& history) {
  json y = json::array(), u = json::array();
  for (const auto& v : history.past_y) y.push_back(vector_to_json(v));
  for (const auto& v : history.past_u) u.push_back(vector_to_json(v));
  return {{"past_y", y}, {"past_u", u}};
}

ArxHistory history_from_json(const json& j, const std::string& where) {
  const json& y = field(j, "past_y", where);
  const json& u = field(j, "past_u", where);
  if (!y.is_array() || !u.is_array()) parse_fail(where, "past_y and past_u must be arrays");
  ArxHistory history;
  for (std::size_t i = 0; i < y.size(); ++i) {
    Eigen::VectorXd v(y[i].size());
    for (std::size_t k = 0; k < y[i].size(); ++k) v(Eigen::Index(k)) = y[i][k].get<double>();
    history.past_y.push_back(std::move(v));
  }
  for (std::size_t i = 0; i < u.size(); ++i) {
    Eigen::VectorXd v(u[i].size());
    for (std::size_t k = 0; k < u[i].size(); ++k) v(Eigen::Index(k)) = u[i][k].get<double>();
    history.past_u.push_back(std::move(v));
  }
  return history;
}

json problem_to_json(const MpcProblem& p) {
  json j;
  j["T"] = p.horizon;
  j["W_y"] = vector_to_json(p.w_y);
  j["W_du"] = vector_to_json(p.w_du);
  j["y_min"] = vector_to_json(p.y_min);
  j["y_max"] = vector_to_json(p.y_max);
  j["u_min"] = vector_to_json(p.u_min);
  j["u_max"] = vector_to_json(p.u_max);
  j["du_min"] = vector_to_json(p.du_min);
  j["du_max"] = vector_to_json(p.du_max);
  j["refs"] = columns_to_json(p.refs);
  j["model"] = model_to_json(p.model);
  j["history"] = history_to_json(p.history);
  return j;
}

MpcProblem problem_from_json(const json& j) {
  const std::string where = "problem";
  MpcProblem p;
  p.horizon = get_int(j, "T", where);
  p.w_y = get_vector(j, "W_y", where);
  p.w_du = get_vector(j, "W_du", where);
  p.y_min = get_vector(j, "y_min", where);
  p.y_max = get_vector(j, "y_max", where);
  p.u_min = get_vector(j, "u_min", where);
  p.u_max = get_vector(j, "u_max", where);
  p.du_min = get_vector(j, "du_min", where);
  p.du_max = get_vector(j, "du_max", where);
  p.model = model_from_json(field(j, "model", where), where + ".model");
  p.history = history_from_json(field(j, "history", where), where + ".history");

  const json& refs = field(j, "refs", where);
  if (!refs.is_array() || int(refs.size()) != p.horizon) {
    parse_fail(where + ".refs", "expected T reference vectors");
  }
  p.refs.resize(p.model.n_y, p.horizon);
  for (int t = 0; t < p.horizon; ++t) {
    if (!refs[t].is_array() || int(refs[t].size()) != p.model.n_y) {
      parse_fail(where + ".refs[" + std::to_string(t) + "]", "expected n_y numbers");
    }
    for (int i = 0; i < p.model.n_y; ++i) p.refs(i, t) = refs[t][i].get<double>();
  }
  return problem_validate(std::move(p));
}

json solver_config_to_json(const SolverConfig& cfg) {
  json j;
  j["rho"] = cfg.rho;
  j["N_out"] = cfg.max_outer;
  j["N_in"] = cfg.max_inner;
  j["eps_out"] = cfg.eps_out;
  j["eps_in"] = cfg.eps_in;
  j["use_coupled"] = cfg.use_coupled;
  j["use_acceleration"] = cfg.use_acceleration;
  j["accelerate_gamma"] = cfg.accelerate_gamma;
  j["include_gamma_in_stop"] = cfg.include_gamma_in_stop;
  return j;
}

SolverConfig solver_config_from_json(const json& j) {
  SolverConfig cfg;
  cfg.rho = get_double_or(j, "rho", cfg.rho);
  if (j.contains("N_out")) cfg.max_outer = get_int(j, "N_out", "solver");
  if (j.contains("N_in")) cfg.max_inner = get_int(j, "N_in", "solver");
  cfg.eps_out = get_double_or(j, "eps_out", cfg.eps_out);
  cfg.eps_in = get_double_or(j, "eps_in", cfg.eps_in);
  cfg.use_coupled = get_bool_or(j, "use_coupled", cfg.use_coupled);
  cfg.use_acceleration = get_bool_or(j, "use_acceleration", cfg.use_acceleration);
  cfg.accelerate_gamma = get_bool_or(j, "accelerate_gamma", cfg.accelerate_gamma);
  cfg.include_gamma_in_stop = get_bool_or(j, "include_gamma_in_stop", cfg.include_gamma_in_stop);
  config_validate(cfg);
  return cfg;
}

json scenario_to_json(const Scenario& sc) {
  json plant;
  if (const auto* fixed = std::get_if<ArxModel>(&sc.plant)) {
    plant = {{"type", "fixed"}, {"model", model_to_json(*fixed)}};
  } else if (const auto* tv = std::get_if<TimeVaryingArxSpec>(&sc.plant)) {
    plant = {{"type", "time_varying"},
             {"base", model_to_json(tv->base)},
             {"perturbation_gain", tv->perturbation_gain},
             {"period_divisor", tv->period_divisor}};
  } else {
    const auto& lpv = std::get<LpvArxSpec>(sc.plant);
    json nets = json::array();
    for (const auto& net : lpv.nets) nets.push_back(network_to_json(net));
    plant = {{"type", "lpv"},
             {"n_y", lpv.n_y},
             {"n_u", lpv.n_u},
             {"n_a", lpv.n_a},
             {"n_b", lpv.n_b},
             {"nets", nets}};
  }
  json mpc;
  mpc["T"] = sc.mpc.horizon;
  mpc["W_y"] = vector_to_json(sc.mpc.w_y);
  mpc["W_du"] = vector_to_json(sc.mpc.w_du);
  mpc["y_min"] = vector_to_json(sc.mpc.y_min);
  mpc["y_max"] = vector_to_json(sc.mpc.y_max);
  mpc["u_min"] = vector_to_json(sc.mpc.u_min);
  mpc["u_max"] = vector_to_json(sc.mpc.u_max);
  mpc["du_min"] = vector_to_json(sc.mpc.du_min);
  mpc["du_max"] = vector_to_json(sc.mpc.du_max);
  return {{"plant", plant},        {"mpc", mpc},
          {"steps", sc.steps},     {"ref_hold", sc.ref_hold},
          {"seed", sc.seed},       {"ref_range", json::array({sc.ref_lo, sc.ref_hi})},
          {"solver", solver_config_to_json(sc.solver)}};
}

Scenario scenario_from_json(const json& j) {
  const std::string where = "scenario";
  Scenario sc;

  const json& plant = field(j, "plant", where);
  const std::string type = field(plant, "type", where + ".plant").get<std::string>();
  if (type == "fixed") {
    sc.plant = model_from_json(field(plant, "model", where + ".plant"), where + ".plant.model");
  } else if (type == "time_varying") {
    TimeVaryingArxSpec tv;
    tv.base = model_from_json(field(plant, "base", where + ".plant"), where + ".plant.base");
    tv.perturbation_gain = get_double_or(plant, "perturbation_gain", 0.1);
    tv.period_divisor = get_double_or(plant, "period_divisor", 10.0);
    sc.plant = std::move(tv);
  } else if (type == "lpv") {
    if (plant.contains("nets")) {
      LpvArxSpec lpv;
      lpv.n_y = get_int(plant, "n_y", where + ".plant");
      lpv.n_u = get_int(plant, "n_u", where + ".plant");
      lpv.n_a = get_int(plant, "n_a", where + ".plant");
      lpv.n_b = get_int(plant, "n_b", where + ".plant");
      const json& nets = field(plant, "nets", where + ".plant");
      for (std::size_t r = 0; r < nets.size(); ++r) {
        lpv.nets.push_back(network_from_json(nets[r], where + ".plant.nets[" +
                                                          std::to_string(r) + "]"));
      }
      sc.plant = lpv_validate(std::move(lpv));
    } else {
      // generated form: coefficient maps built from a base model and a seed
      const ArxModel base =
          model_from_json(field(plant, "base", where + ".plant"), where + ".plant.base");
      const int hidden = plant.contains("hidden") ? get_int(plant, "hidden", where) : 66;
      const auto seed = std::uint64_t(plant.contains("net_seed")
                                          ? plant["net_seed"].get<std::int64_t>()
                                          : 0);
      sc.plant = make_random_lpv_spec(base, hidden, seed);
    }
  } else {
    parse_fail(where + ".plant.type", "expected fixed, time_varying, or lpv");
  }

  const json& mpc = field(j, "mpc", where);
  sc.mpc.horizon = get_int(mpc, "T", where + ".mpc");
  sc.mpc.w_y = get_vector(mpc, "W_y", where + ".mpc");
  sc.mpc.w_du = get_vector(mpc, "W_du", where + ".mpc");
  sc.mpc.y_min = get_vector(mpc, "y_min", where + ".mpc");
  sc.mpc.y_max = get_vector(mpc, "y_max", where + ".mpc");
  sc.mpc.u_min = get_vector(mpc, "u_min", where + ".mpc");
  sc.mpc.u_max = get_vector(mpc, "u_max", where + ".mpc");
  sc.mpc.du_min = get_vector(mpc, "du_min", where + ".mpc");
  sc.mpc.du_max = get_vector(mpc, "du_max", where + ".mpc");

  sc.steps = get_int(j, "steps", where);
  sc.ref_hold = get_int(j, "ref_hold", where);
  if (j.contains("seed")) sc.seed = std::uint64_t(j["seed"].get<std::int64_t>());
  if (j.contains("ref_range")) {
    const json& rr = j["ref_range"];
    if (!rr.is_array() || rr.size() != 2) parse_fail(where + ".ref_range", "expected [lo, hi]");
    sc.ref_lo = rr[0].get<double>();
    sc.ref_hi = rr[1].get<double>();
  }
  if (j.contains("solver")) sc.solver = solver_config_from_json(j["solver"]);
  scenario_validate(sc);
  return sc;
}

json primal_to_json(const PrimalPoint& z) {
  return {{"Y", columns_to_json(z.y)}, {"U", columns_to_json(z.u)}, {"dU", columns_to_json(z.du)}};
}

json dual_to_json(const DualPoint& duals) {
  return {{"Lambda", columns_to_json(duals.lam)}, {"Gamma", columns_to_json(duals.gam)}};
}

json report_to_json(const SolveReport& report) {
  json j;
  j["solution"] = primal_to_json(report.solution);
  j["duals"] = dual_to_json(report.duals);
  j["outer_iters"] = report.outer_iters;
  j["total_inner_passes"] = report.total_inner_passes;
  if (std::isfinite(report.outer_residual)) {
    j["outer_residual"] = report.outer_residual;
  } else {
    j["outer_residual"] = nullptr;
  }
  j["status"] = report.status == SolveStatus::Converged ? "Converged" : "MaxIterations";
  return j;
}

std::string log_to_csv(const ClosedLoopLog& log) {
  std::ostringstream os;
  if (log.records.empty()) return "";
  const int n_y = int(log.records.front().y.size());
  const int n_u = int(log.records.front().u.size());
  os << "t";
  for (int i = 1; i <= n_y; ++i) os << ",y_" << i;
  for (int i = 1; i <= n_u; ++i) os << ",u_" << i;
  for (int i = 1; i <= n_u; ++i) os << ",du_" << i;
  for (int i = 1; i <= n_y; ++i) os << ",r_" << i;
  os << ",iters,time_ms\n";
  for (const auto& rec : log.records) {
    os << rec.t;
    for (int i = 0; i < n_y; ++i) os << "," << fmt17(rec.y(i));
    for (int i = 0; i < n_u; ++i) os << "," << fmt17(rec.u(i));
    for (int i = 0; i < n_u; ++i) os << "," << fmt17(rec.du(i));
    for (int i = 0; i < n_y; ++i) os << "," << fmt17(rec.r(i));
    os << "," << rec.outer_iters << "," << fmt17(rec.solve_time_ms) << "\n";
  }
  return os.str();
}

json log_summary_json(const ClosedLoopLog& log) {
  const TimingStats stats = timing_stats(log);
  long outer = 0, inner = 0;
  for (const auto& rec : log.records) {
    outer += rec.outer_iters;
    inner += rec.inner_passes;
  }
  json j;
  j["steps"] = log.records.size();
  j["avg_ms"] = stats.avg_ms;
  j["max_ms"] = stats.max_ms;
  if (stats.construction_avg_ms > 0.0) j["construction_avg_ms"] = stats.construction_avg_ms;
  j["violation_count"] = log.violation_count;
  j["nonconverged_count"] = log.nonconverged_count;
  j["total_outer_iters"] = outer;
  j["total_inner_passes"] = inner;
  return j;
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::ParseError, path + ": cannot open file");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    raise(ErrorCode::ParseError, path + ": " + e.what());
  }
}

void save_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) raise(ErrorCode::ParseError, path + ": cannot open for writing");
  out << text;
}

}  // namespace cdal
