#include "gevlab/config.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "gevlab/errors.hpp"

namespace gev {

using Json = nlohmann::json;

Json default_config() {
  const double gamma = 0.7;
  const ScaleSchedule sch = ScaleSchedule::desk(1, gamma);
  Json j;
  j["schema"] = kConfigSchema;
  j["output_dir"] = "out";
  j["workers"] = 8;
  j["model"] = {
      {"family", "dual"},
      {"dim", 1},
      {"lambda", 1e-3},
      {"rho", 1.0},
      {"gamma", gamma},
      {"radius", 1024},
      {"potential", {{"kind", "two_cos"}, {"coefficients", Json::array()}}},
      {"omega", default_frequency(1).coords},
      {"phase", {0.3}},
  };
  j["schedule"] = {{"N1", sch.N1}, {"N2", sch.N2}, {"N", sch.N}, {"c1", sch.c1}, {"c3", sch.c3}, {"c4", sch.c4}};
  j["grids"] = {
      {"theta", {{"points", 10000}, {"sections", 64}, {"seed", 1}}},
      {"energy", {{"count", 16}}},
      {"y", {{"points", 4096}}},
  };
  j["tolerances"] = {
      {"ldt_ceiling", 50.0},
      {"resonance_floor", 1e-4},
      {"block_tol", 1e-14},
      {"block_max_iter", 500},
      {"bench_error", 1e-8},
      {"poisson_resonance_condition", 1e12},
      {"poisson_floor", 1e-8},
      {"sweep_failure_fraction", 0.0},
      {"branch_measure_floor", 3.5},
  };
  j["calibration"] = {
      {"c_res2", 1.0},
      {"c5", 0.0},
      {"C1", 0.0},
      {"rate_floor", 0.1},
      {"localization_factor", 0.9},
      {"continuity_factor", 10.0},
      {"seed", 101},
  };
  j["commands"] = {
      {"op-info", {{"N", 32}}},
      {"green", {{"N", 16}, {"energy", 0.5}, {"epsilon", 0.0}}},
      {"ldt-scan", {{"scales", {8, 32}}, {"energies", Json::array()}}},
      {"msa-verify", {{"draws", 200}, {"seed", 11}, {"energy_mode", "draw"}, {"energy", 0.5}}},
      {"localize", {{"N", 64}, {"thetas", 32}}},
      {"branch", {{"N", 32}, {"samples", 512}, {"rounds", 2}, {"factor", 1}, {"J", 0}, {"big", 0}}},
      {"measure", {{"N", 32}, {"phases", 512}, {"samples", 512}, {"rounds", 0}}},
      {"duality", {{"N_direct", 256}, {"N_dual", 256}, {"phases_direct", 32}, {"phases_dual", 32}, {"seed", 3}}},
      {"poisson",
       {{"big", 64},
        {"sub", 32},
        {"margin", 8},
        {"count", 20},
        {"seed", 5},
        {"energy", 0.5},
        {"delyon_scales", {16, 32, 64}},
        {"delyon_gamma", 1.0}}},
      {"calibrate", {{"annulus_configs", 50}, {"localize_thetas", 16}, {"ldt_points", 4096}, {"branch_lambda", 0.01}, {"annulus_gamma", 1.0}}},
      {"bench", {{"sizes", {64, 128, 256, 512}}, {"M", 16}, {"energy", 0.5}}},
  };
  j["sweep"] = {{"axis", "none"}, {"command", "op-info"}, {"values", Json::array()}};
  return j;
}

namespace {

const char* type_name(const Json& v) {
  if (v.is_number()) return "number";
  return v.type_name();
}

// same keys, same types; numbers match numbers
void check_shape(const Json& want, const Json& got, const std::string& path) {
  if (want.is_object()) {
    if (!got.is_object()) throw Error(ErrorCode::Validation, "config field " + path + " must be an object");
    for (const auto& [k, v] : want.items()) {
      if (!got.contains(k)) throw Error(ErrorCode::Validation, "config field " + path + "." + k + " is missing");
      check_shape(v, got.at(k), path + "." + k);
    }
    for (const auto& [k, v] : got.items())
      if (!want.contains(k)) throw Error(ErrorCode::Validation, "unknown config field " + path + "." + k);
    return;
  }
  if (std::string(type_name(want)) != type_name(got))
    throw Error(ErrorCode::Validation, "config field " + path + " must be " + type_name(want));
}

template <class T>
T get(const Json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Validation, std::string("config field ") + key + ": " + e.what());
  }
}

}  // namespace

ExperimentConfig::ExperimentConfig(Json j) : j_(std::move(j)) {
  if (!j_.is_object() || !j_.contains("schema") || j_["schema"] != kConfigSchema)
    throw Error(ErrorCode::Validation, std::string("config schema must be ") + kConfigSchema);
  check_shape(default_config(), j_, "$");
  if (workers() < 1) throw Error(ErrorCode::Validation, "workers must be >= 1");
  spec().validate();
  schedule().validate();
  const std::string axis = j_["sweep"]["axis"];
  if (axis != "none" && axis != "theta" && axis != "E" && axis != "lambda" && axis != "omega_t")
    throw Error(ErrorCode::Validation, "sweep axis must be none, theta, E, lambda or omega_t");
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Validation, "cannot read config " + path);
  try {
    return ExperimentConfig(Json::parse(in));
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::Validation, std::string("config parse error: ") + e.what());
  }
}

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string ExperimentConfig::hash() const { return sha256_hex(j_.dump()); }

OperatorSpec ExperimentConfig::spec() const {
  const Json& m = j_.at("model");
  const int d = get<int>(m, "dim");
  if (d < 1 || d > kMaxDim) throw Error(ErrorCode::Validation, "model.dim out of range");
  const std::string family = get<std::string>(m, "family");
  if (family != "dual" && family != "direct") throw Error(ErrorCode::Validation, "model.family must be dual or direct");
  OperatorSpec s;
  s.family = family == "dual" ? Family::Dual : Family::Direct;
  s.lambda = get<double>(m, "lambda");
  s.v = GevreySymbol::canonical(get<double>(m, "rho"), get<double>(m, "gamma"), d, get<int>(m, "radius"));
  const auto omega = get<std::vector<double>>(m, "omega");
  if (static_cast<int>(omega.size()) != d) throw Error(ErrorCode::Validation, "model.omega length differs from dim");
  s.omega = make_frequency(omega, 8);
  const auto phase = get<std::vector<double>>(m, "phase");
  if (static_cast<int>(phase.size()) != d) throw Error(ErrorCode::Validation, "model.phase length differs from dim");
  s.phase = TorusPoint(phase);
  const Json& p = m.at("potential");
  const std::string kind = get<std::string>(p, "kind");
  const int pdim = s.family == Family::Dual ? d : 1;
  if (kind == "two_cos") {
    s.analytic = AnalyticPotential::two_cos(pdim);
  } else if (kind == "table") {
    std::map<Site, std::complex<double>> c;
    for (const Json& e : p.at("coefficients")) {
      const auto k = get<std::vector<int>>(e, "k");
      if (static_cast<int>(k.size()) != pdim) throw Error(ErrorCode::Validation, "potential index length differs");
      c[make_site(k)] = {get<double>(e, "re"), get<double>(e, "im")};
    }
    s.analytic = AnalyticPotential::from_coeffs(pdim, c);
  } else {
    throw Error(ErrorCode::Validation, "model.potential.kind must be two_cos or table");
  }
  s.validate();
  return s;
}

ScaleSchedule ExperimentConfig::schedule() const {
  const Json& c = j_.at("schedule");
  ScaleSchedule s;
  s.gamma = get<double>(j_.at("model"), "gamma");
  s.N1 = get<int>(c, "N1");
  s.N2 = get<int>(c, "N2");
  s.N = get<int>(c, "N");
  s.c1 = get<double>(c, "c1");
  s.c3 = get<double>(c, "c3");
  s.c4 = get<double>(c, "c4");
  const double r = terminal_rate(get<double>(j_.at("model"), "rho"), s.gamma);
  s.rho_bar_per_scale = {r, r, r};
  return s;
}

ScanGrid ExperimentConfig::theta_grid() const {
  const Json& t = j_.at("grids").at("theta");
  ScanGrid g;
  g.line_points = get<int>(t, "points");
  g.sections = get<int>(t, "sections");
  g.seed = get<uint64_t>(t, "seed");
  return g;
}

ExperimentConfig ExperimentConfig::with_axis(const std::string& axis, double value) const {
  Json j = j_;
  if (axis == "theta") {
    j["model"]["phase"][0] = value;
  } else if (axis == "lambda") {
    j["model"]["lambda"] = value;
  } else if (axis == "omega_t") {
    j["model"]["omega"][0] = value;
  } else if (axis == "E") {
    for (auto& [name, c] : j["commands"].items()) {
      if (c.contains("energy")) c["energy"] = value;
      if (c.contains("energy_mode")) c["energy_mode"] = "fixed";
      if (c.contains("energies")) c["energies"] = Json::array({value});
    }
  } else {
    throw Error(ErrorCode::Validation, "unknown sweep axis " + axis);
  }
  return ExperimentConfig(std::move(j));
}

}  // namespace gev
