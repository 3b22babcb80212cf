#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "gevlab/ldt.hpp"
#include "gevlab/operator.hpp"

namespace gev {

inline constexpr const char* kConfigSchema = "gevlab.config/1";
inline constexpr const char* kResultsSchema = "gevlab.results/1";
inline constexpr const char* kLockSchema = "gevlab.lock/1";

// every key of the default config is required, with the same JSON type; unknown keys are rejected
nlohmann::json default_config();

class ExperimentConfig {
 public:
  // Validation on a missing, mistyped or unknown field
  explicit ExperimentConfig(nlohmann::json j);
  static ExperimentConfig load(const std::string& path);

  const nlohmann::json& json() const { return j_; }
  const nlohmann::json& command(const std::string& name) const { return j_.at("commands").at(name); }
  const nlohmann::json& calibration() const { return j_.at("calibration"); }
  const nlohmann::json& tolerances() const { return j_.at("tolerances"); }
  std::string hash() const;  // sha256 of the compact dump

  OperatorSpec spec() const;
  ScaleSchedule schedule() const;
  ScanGrid theta_grid() const;
  int workers() const { return j_.at("workers").get<int>(); }
  std::string output_dir() const { return j_.at("output_dir").get<std::string>(); }

  // sweep axes write into the json: theta -> model.phase[0], lambda -> model.lambda,
  // omega_t -> model.omega[0], E -> every command's energy
  ExperimentConfig with_axis(const std::string& axis, double value) const;

 private:
  nlohmann::json j_;
};

std::string sha256_hex(const std::string& data);

}  // namespace gev
