#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "gevlab/config.hpp"
#include "gevlab/errors.hpp"
#include "gevlab/parallel.hpp"
#include "gevlab/resolvent.hpp"

namespace gev {

struct Artifact {
  std::string name;
  std::string content;
};

struct RunReport {
  std::string command;
  std::string config_hash;
  nlohmann::json results = nlohmann::json::object();  // pure function of the config
  nlohmann::json timings = nlohmann::json::object();  // stage -> seconds
  std::vector<Artifact> artifacts;
  int status = 0;  // 0, or 3 when a sweep's failure fraction is over its threshold

  // {schema, command, config_hash, results}
  nlohmann::json results_document() const;
  // {config_hash, timings, environment}
  nlohmann::json timing_document(int workers) const;
};

nlohmann::json environment_fingerprint(int workers);

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"op-info", "green",   "ldt-scan", "msa-verify", "localize", "branch",
                                              "measure", "duality", "poisson",  "calibrate",  "bench"};
  return names;
}

// every parallel loop inside goes through `map`
RunReport run_command(const std::string& name, const ExperimentConfig& cfg, const Mapper& map = serial_map);

// runs `command` at every value of the sweep grid, points spread over `workers`, each point serial inside.
// Failed points are recorded; status 3 when the failure fraction exceeds tolerances.sweep_failure_fraction.
RunReport run_sweep(const ExperimentConfig& cfg, const std::string& command, const std::string& axis, int workers);

// results.json, timings.json and every artifact; CSV and SVG files carry the config hash in a comment
void write_report(const RunReport& r, const std::string& dir, int workers);

nlohmann::json error_payload(const Error& e);
inline int exit_status(const Error& e) { return e.numerical() ? 3 : 2; }

// -- reference instances shared by calibrate and the acceptance suite --

struct AnnulusInstance {
  AssembledOperator op;
  AnnulusSetup setup;
};

// d=1, N=128, M0=16: seeded theta, E picked so that exactly one site is close to resonance;
// that site is moved to the origin and a radius 1 core put around it
AnnulusInstance annulus_instance(const OperatorSpec& spec, uint64_t seed, size_t index);

// gating hypotheses hold and the conclusion was evaluated
bool annulus_nonresonant(const AnnulusInstance& inst);

}  // namespace gev
