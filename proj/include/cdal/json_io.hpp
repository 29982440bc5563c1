#pragma once

#include <string>

#include <json.hpp>

#include "cdal/sim_harness.hpp"

namespace cdal {

// JSON formats (matrices are row-major flat arrays, lag index 1 first):
//   model:    {"n_y","n_u","n_a","n_b","A":[[...],...],"B":[[...],...]}
//   network:  {"layers":[{"W":[...],"b":[...]},...]}   rows(W) = len(b)
//   history:  {"past_y":[[...],...],"past_u":[[...],...]}   newest first
//   problem:  {"T","W_y","W_du","y_min","y_max","u_min","u_max",
//              "du_min","du_max","refs":[[...] x T],"model","history"}
//   solver:   {"rho","N_out","N_in","eps_out","eps_in","use_coupled",
//              "use_acceleration","accelerate_gamma"}
//   scenario: {"plant":{"type":"fixed"|"time_varying"|"lpv",...},"mpc",
//              "steps","ref_hold","seed","ref_range":[lo,hi],"solver"}

nlohmann::json model_to_json(const ArxModel& model);
ArxModel model_from_json(const nlohmann::json& j, const std::string& where = "model");

nlohmann::json network_to_json(const ReluNetwork& net);
ReluNetwork network_from_json(const nlohmann::json& j, const std::string& where = "network");

nlohmann::json history_to_json(const ArxHistory& history);
ArxHistory history_from_json(const nlohmann::json& j, const std::string& where = "history");

nlohmann::json problem_to_json(const MpcProblem& problem);
MpcProblem problem_from_json(const nlohmann::json& j);

nlohmann::json solver_config_to_json(const SolverConfig& cfg);
SolverConfig solver_config_from_json(const nlohmann::json& j);

nlohmann::json scenario_to_json(const Scenario& scenario);
Scenario scenario_from_json(const nlohmann::json& j);

nlohmann::json primal_to_json(const PrimalPoint& z);
nlohmann::json dual_to_json(const DualPoint& duals);
nlohmann::json report_to_json(const SolveReport& report);

/// trajectory CSV: t, y_1.., u_1.., du_1.., r_1.., iters, time_ms with
/// floats at 17 significant digits.
std::string log_to_csv(const ClosedLoopLog& log);
nlohmann::json log_summary_json(const ClosedLoopLog& log);

/// Parses a file, mapping parse failures to Error{ParseError} with the file
/// name and position in the message.
nlohmann::json load_json_file(const std::string& path);
void save_text_file(const std::string& path, const std::string& text);

}  // namespace cdal
