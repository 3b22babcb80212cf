#include "gevlab/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <optional>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "gevlab/duality.hpp"
#include "gevlab/ldt.hpp"
#include "gevlab/spectral.hpp"

namespace gev {

using nlohmann::json;

namespace {

class Stopwatch {
 public:
  explicit Stopwatch(json& sink) : sink_(sink) {}
  void lap(const std::string& stage) {
    const auto now = std::chrono::steady_clock::now();
    sink_[stage] = std::chrono::duration<double>(now - t_).count();
    t_ = now;
  }

 private:
  json& sink_;
  std::chrono::steady_clock::time_point t_ = std::chrono::steady_clock::now();
};

template <class T>
T param(const json& c, const char* key) {
  try {
    return c.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Validation, std::string("command parameter ") + key + ": " + e.what());
  }
}

double tol(const ExperimentConfig& cfg, const char* key) { return param<double>(cfg.tolerances(), key); }
double cal(const ExperimentConfig& cfg, const char* key) { return param<double>(cfg.calibration(), key); }

TorusPoint phase_at(const OperatorSpec& s, double theta0) {
  std::vector<double> c = s.phase.coords;
  c[0] = theta0;
  return TorusPoint(c);
}

AssembledOperator assemble_box(const OperatorSpec& s, int N, const TorusPoint& phase) {
  if (s.family == Family::Dual) return assemble_dual(s, Region::cube(s.dim(), N), phase);
  return assemble_direct(s, N, phase);
}

std::string csv_text(const std::string& hash, const std::string& body) { return "# config_hash=" + hash + "\n" + body; }

json intervals_json(const Intervals& iv) {
  json a = json::array();
  for (auto [l, h] : iv) a.push_back({l, h});
  return a;
}

json spectrum_json(const SpectrumEstimate& e) {
  return {{"provenance", e.provenance},
          {"measure", e.measure},
          {"budget", e.budget},
          {"resolution", e.resolution},
          {"intervals", intervals_json(e.intervals)}};
}

json ledger_json(const RefineLedger& l) {
  return {{"N", l.N},
          {"N1", l.N1},
          {"before", l.before},
          {"after", l.after},
          {"loss", l.loss},
          {"allowed", l.allowed},
          {"grid_resolution", l.grid_resolution},
          {"empty_windows", l.empty_windows},
          {"holds", l.holds()}};
}

json branch_set_json(const BranchSet& b) {
  size_t mass = 0;
  for (const auto& d : b.dropped) mass += d.reason.rfind("mass", 0) == 0;
  double worst = 0;
  for (const auto& br : b.branches) worst = std::max(worst, br.max_residual);
  return {{"N", b.N},
          {"step", b.step},
          {"branches", b.branches.size()},
          {"longest", b.longest()},
          {"image_measure", b.image_measure()},
          {"dropped", b.dropped.size()},
          {"dropped_mass", mass},
          {"max_residual", worst},
          {"mass_floor", b.mass_floor},
          {"tolerance", b.tolerance}};
}

BranchOptions branch_options(const ExperimentConfig& cfg, const json& c) {
  BranchOptions o;
  o.continuity_factor = cal(cfg, "continuity_factor");
  o.J = param<int>(c, "J");
  o.big = param<int>(c, "big");
  return o;
}

// extraction at N, then `rounds` refinements N -> 2N -> 4N ...
struct BranchRun {
  std::vector<BranchSet> sets;
  std::vector<RefineLedger> ledgers;
};

BranchRun branch_rounds(const OperatorSpec& s, int N, int samples, int rounds, int factor, const BranchOptions& o,
                        const Mapper& map) {
  BranchRun r;
  r.sets.push_back(branch_extract(s, N, theta_samples(samples), 1.0 / samples, o, map));
  for (int k = 1; k <= rounds; ++k) {
    RefineResult rr = branch_refine(s, r.sets.back(), r.sets.back().N * 2, factor, o, map);
    r.ledgers.push_back(rr.ledger);
    r.sets.push_back(std::move(rr.set));
  }
  return r;
}

// -- commands --

void cmd_op_info(const ExperimentConfig& cfg, RunReport& rep, Stopwatch& sw) {
  const OperatorSpec s = cfg.spec();
  const int N = param<int>(cfg.command("op-info"), "N");
  const AssembledOperator op = assemble_box(s, N, s.phase);
  sw.lap("assemble");
  const auto [lo, hi] = numerical_range(s);
  const GevreyReport g = verify_gevrey(s.v);
  rep.results = {{"family", s.family == Family::Dual ? "dual" : "direct"},
                 {"dim", s.dim()},
                 {"N", N},
                 {"matrix_dimension", op.size()},
                 {"hermiticity_residual", hermiticity_residual(op.matrix)},
                 {"tail_bound", op.tail_bound},
                 {"symbol_l1", symbol_l1(s.v)},
                 {"hopping_norm_bound", hopping_norm_bound(s)},
                 {"numerical_range", {lo, hi}},
                 {"gevrey_pass", g.pass},
                 {"gevrey_worst_ratio", g.worst_ratio},
                 {"omega_log_quality", s.omega.diophantine_log_quality}};
}

void cmd_green(const ExperimentConfig& cfg, RunReport& rep, Stopwatch& sw) {
  const OperatorSpec s = cfg.spec();
  const json& c = cfg.command("green");
  const int N = param<int>(c, "N");
  const AssembledOperator op = assemble_box(s, N, s.phase);
  const GreenEvaluation g = green(op, param<double>(c, "energy"), param<double>(c, "epsilon"));
  sw.lap("green");
  const BoundCertificate b = check_ldt_bounds(g, terminal_rate(s.v.rho, s.v.gamma), tol(cfg, "ldt_ceiling"));
  rep.results = {{"N", N},
                 {"energy", g.energy},
                 {"epsilon", g.epsilon},
                 {"size", g.size()},
                 {"norm", g.op_norm},
                 {"condition", g.condition_estimate},
                 {"residual", g.residual},
                 {"fit_rate", b.fit.rho_bar_fit},
                 {"fit_r2", b.fit.r_squared},
                 {"norm_bound", b.norm_bound},
                 {"decay_rate", b.decay_rate},
                 {"pass_norm", b.pass_norm},
                 {"pass_decay", b.pass_decay},
                 {"unresolved", b.unresolved}};
  std::ostringstream os;
  write_green_csv(os, g);
  rep.artifacts.push_back({"green.csv", os.str()});
}

void cmd_ldt_scan(const ExperimentConfig& cfg, RunReport& rep, Stopwatch& sw, const Mapper& map) {
  const OperatorSpec s = cfg.spec();
  const ScaleSchedule sch = cfg.schedule();
  const json& c = cfg.command("ldt-scan");
  auto energies = param<std::vector<double>>(c, "energies");
  if (energies.empty()) energies = energy_grid(s, param<int>(cfg.json().at("grids").at("energy"), "count"));
  const ScanGrid grid = cfg.theta_grid();
  const double rho_bar = terminal_rate(s.v.rho, s.v.gamma);
  LdtScanOptions opt;
  opt.ceiling = tol(cfg, "ldt_ceiling");
  json scales = json::array();
  std::ostringstream csv;
  csv << "scale,energy,failing_fraction,sup_section_measure,target\n";
  csv.precision(17);
  for (int N : param<std::vector<int>>(c, "scales")) {
    const auto est = ldt_scan(s, sch, N, energies, grid, rho_bar, map, opt);
    sw.lap("scan_N" + std::to_string(N));
    double mean = 0, worst = 0;
    json per = json::array();
    for (const auto& e : est) {
      mean += e.failing_fraction / est.size();
      worst = std::max(worst, e.failing_fraction);
      per.push_back({{"energy", e.energy}, {"failing_fraction", e.failing_fraction},
                     {"sup_section_measure", e.sup_section_measure()}});
      csv << N << ',' << e.energy << ',' << e.failing_fraction << ',' << e.sup_section_measure() << ',' << e.target
          << '\n';
    }
    scales.push_back({{"N", N},
                      {"target", est.empty() ? 0.0 : est[0].target},
                      {"mean_failing_fraction", mean},
                      {"max_failing_fraction", worst},
                      {"points", est.empty() ? 0 : est[0].points},
                      {"energies", per}});
  }
  rep.results = {{"rho_bar", rho_bar}, {"scales", scales}};
  rep.artifacts.push_back({"ldt_scan.csv", csv.str()});
}

json msa_record(const MultiscaleTrace& t) {
  return {{"M", t.M},
          {"core_radius", t.core_radius},
          {"certified_norm", t.certified_norm},
          {"formula_norm", t.formula_norm},
          {"direct_norm", t.direct_norm},
          {"decay_asserted", t.decay.evaluated},
          {"decay_holds", t.decay.conclusion_holds},
          {"sound", t.sound()}};
}

void cmd_msa_verify(const ExperimentConfig& cfg, RunReport& rep, Stopwatch& sw, const Mapper& map) {
  const OperatorSpec s = cfg.spec();
  const ScaleSchedule sch = cfg.schedule();
  const json& c = cfg.command("msa-verify");
  const int draws = param<int>(c, "draws");
  const bool fixed = param<std::string>(c, "energy_mode") == "fixed";
  const auto [lo, hi] = numerical_range(s);
  std::mt19937_64 rng(param<uint64_t>(c, "seed"));
  std::uniform_real_distribution<double> u(0, 1);
  // draws are generated serially so they do not depend on the worker count
  std::vector<std::pair<double, double>> pts(draws);
  for (auto& p : pts) {
    p.first = u(rng);
    p.second = fixed ? param<double>(c, "energy") : lo + (hi - lo) * u(rng);
  }
  MultiscaleOptions opt;
  opt.c_res2 = cal(cfg, "c_res2");
  std::vector<json> out(pts.size());
  map(pts.size(), [&](size_t i) {
    json r = {{"theta", pts[i].first}, {"energy", pts[i].second}};
    try {
      const MultiscaleTrace t = multiscale_verify(s, sch, pts[i].second, phase_at(s, pts[i].first), opt);
      r["status"] = "good";
      r.update(msa_record(t));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoGoodAnnulus) throw;
      r["status"] = "no_good_annulus";
    }
    out[i] = std::move(r);
  });
  sw.lap("verify");
  size_t good = 0, unsound = 0, asserted = 0;
  for (const auto& r : out) {
    if (r["status"] != "good") continue;
    ++good;
    unsound += !r["sound"].get<bool>();
    asserted += r["decay_asserted"].get<bool>();
  }
  rep.results = {{"draws", draws}, {"good", good}, {"decay_asserted", asserted}, {"unsound", unsound},
                 {"records", out}};
}

void cmd_localize(const ExperimentConfig& cfg, RunReport& rep, Stopwatch& sw, const Mapper& map) {
  const OperatorSpec s = cfg.spec();
  const json& c = cfg.command("localize");
  const int N = param<int>(c, "N"), count = param<int>(c, "thetas");
  const double gamma = s.v.gamma;
  const double ceiling = tol(cfg, "ldt_ceiling"), floor = cal(cfg, "rate_floor");
  const double threshold = cal(cfg, "localization_factor") * terminal_rate(s.v.rho, gamma);
  std::mt19937_64 rng(cfg.theta_grid().seed);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> thetas(count);
  for (double& t : thetas) t = u(rng);

  struct Row {
    std::vector<LocalizationProfile> profiles;
    std::vector<long> index;
    Eigen::VectorXd first;
    SiteSet sites;
  };
  std::vector<Row> rows(thetas.size());
  map(thetas.size(), [&](size_t i) {
    const AssembledOperator op = assemble_box(s, N, phase_at(s, thetas[i]));
    const EigenSystem es = eigensystem(op);
    const long n = static_cast<long>(es.size());
    Row& r = rows[i];
    for (long k = n / 3; k < 2 * n / 3; ++k) {
      r.profiles.push_back(localization_profile(es.vectors.col(k), es.sites, N, gamma, ceiling, floor));
      r.index.push_back(k);
    }
    if (i == 0 && n > 0) {
      r.first = es.vectors.col(n / 2);
      r.sites = es.sites;
    }
  });
  sw.lap("profiles");
  size_t states = 0, passing = 0, extended = 0;
  double min_rate = 1e300;
  std::ostringstream csv;
  csv << "theta,eig_index,center,rate,r2,extended_flag\n";
  csv.precision(17);
  for (size_t i = 0; i < rows.size(); ++i) {
    for (size_t k = 0; k < rows[i].profiles.size(); ++k) {
      const auto& p = rows[i].profiles[k];
      ++states;
      passing += p.rate >= threshold;
      extended += p.extended;
      min_rate = std::min(min_rate, p.rate);
      csv << thetas[i] << ',' << rows[i].index[k] << ',' << site_string(p.center, s.dim()) << ',' << p.rate << ','
          << p.r_squared << ',' << (p.extended ? 1 : 0) << '\n';
    }
  }
  rep.results = {{"N", N},
                 {"thetas", count},
                 {"states", states},
                 {"passing", passing},
                 {"fraction", states ? double(passing) / states : 0.0},
                 {"threshold", threshold},
                 {"terminal_rate", terminal_rate(s.v.rho, gamma)},
                 {"min_rate", states ? min_rate : 0.0},
                 {"extended", extended}};
  rep.artifacts.push_back({"profiles.csv", csv.str()});
  if (!rows.empty() && rows[0].first.size()) {
    const long mid = static_cast<long>(rows[0].profiles.size()) / 2;
    std::ostringstream svg;
    write_profile_svg(svg, rows[0].first, rows[0].sites, rows[0].profiles[mid], gamma);
    rep.artifacts.push_back({"profile.svg", svg.str()});
  }
}

void cmd_branch(const ExperimentConfig& cfg, RunReport& rep, Stopwatch& sw, const Mapper& map) {
  const OperatorSpec s = cfg.spec();
  const json& c = cfg.command("branch");
  const BranchRun r = branch_rounds(s, param<int>(c, "N"), param<int>(c, "samples"), param<int>(c, "rounds"),
                                    param<int>(c, "factor"), branch_options(cfg, c), map);
  sw.lap("branches");
  json sets = json::array(), ledgers = json::array();
  for (const auto& b : r.sets) {
    sets.push_back(branch_set_json(b));
    std::ostringstream csv;
    write_branch_csv(csv, b);
    rep.artifacts.push_back({"branches_N" + std::to_string(b.N) + ".csv", csv.str()});
  }
  for (const auto& l : r.ledgers) ledgers.push_back(ledger_json(l));
  std::ostringstream svg;
  write_branch_svg(svg, r.sets.back());
  rep.artifacts.push_back({"branches.svg", svg.str()});
  rep.results = {{"rounds", sets}, {"ledgers", ledgers}};
}

void cmd_measure(const ExperimentConfig& cfg, RunReport& rep, Stopwatch& sw, const Mapper& map) {
  const OperatorSpec s = cfg.spec();
  const json& c = cfg.command("measure");
  const json& bc = cfg.command("branch");
  const int N = param<int>(c, "N");
  const BranchRun r = branch_rounds(s, N, param<int>(c, "samples"), param<int>(c, "rounds"), 1,
                                    branch_options(cfg, bc), map);
  const SpectrumEstimate b = spectrum_from_branches(r.sets.back());
  sw.lap("branch");
  DirectSweep d;
  d.N = N;
  d.phases = param<int>(c, "phases");
  d.seed = cfg.theta_grid().seed;
  const SpectrumEstimate e = spectrum_direct(s, d, map);
  sw.lap("direct");
  const double floor = tol(cfg, "branch_measure_floor");
  rep.results = {{"branch", spectrum_json(b)},
                 {"direct", spectrum_json(e)},
                 {"hausdorff", hausdorff_distance(b.intervals, e.intervals)},
                 {"branch_within_direct", b.measure <= e.measure + b.budget + e.resolution},
                 {"measure_floor", floor},
                 {"branch_above_floor", b.measure >= floor}};
  rep.artifacts.push_back({"spectrum.json", json{{"config_hash", rep.config_hash}, {"estimates", rep.results}}.dump(2)});
}

void cmd_duality(const ExperimentConfig& cfg, RunReport& rep, Stopwatch& sw, const Mapper& map) {
  const OperatorSpec s = cfg.spec();
  const json& c = cfg.command("duality");
  const uint64_t seed = param<uint64_t>(c, "seed");
  const DirectSweep a{param<int>(c, "N_direct"), param<int>(c, "phases_direct"), seed, 0.0};
  const DirectSweep b{param<int>(c, "N_dual"), param<int>(c, "phases_dual"), seed, 0.0};
  const OperatorSpec partner = aubry_dual_map(s);
  const bool roundtrip = aubry_dual_map(partner) == s;
  // Parseval on a seeded random psi of the DIRECT box size
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<double> psi(2 * a.N + 1);
  for (double& x : psi) x = g(rng);
  const double parseval = parseval_residual(psi, 2 * a.N + 1);
  sw.lap("transforms");
  const DualityComparison cmp = duality_compare(s, a, b, map);
  sw.lap("spectra");
  rep.results = {{"roundtrip", roundtrip},
                 {"parseval_residual", parseval},
                 {"direct", spectrum_json(cmp.direct)},
                 {"dual", spectrum_json(cmp.dual)},
                 {"hausdorff", cmp.hausdorff},
                 {"budget", cmp.budget}};
}

void cmd_poisson(const ExperimentConfig& cfg, RunReport& rep, Stopwatch& sw) {
  const OperatorSpec s = cfg.spec();
  const json& c = cfg.command("poisson");
  const int big = param<int>(c, "big");
  const PoissonSample ps =
      poisson_sample(s, s.phase, big, param<int>(c, "sub"), param<int>(c, "margin"), param<size_t>(c, "count"),
                     param<uint64_t>(c, "seed"), tol(cfg, "poisson_resonance_condition"));
  sw.lap("poisson");
  const double floor = tol(cfg, "poisson_floor");
  json checks = json::array();
  size_t passing = 0;
  double worst = 0;
  for (const auto& p : ps.checks) {
    const bool ok = p.residual <= floor + p.budget;
    passing += ok;
    worst = std::max(worst, p.residual);
    checks.push_back({{"energy", p.energy},
                      {"center", site_vector(p.center, s.dim())},
                      {"residual", p.residual},
                      {"eigen_residual", p.eigen_residual},
                      {"g_norm", p.g_norm},
                      {"budget", p.budget},
                      {"pass", ok}});
  }

  // Delyon chain on an eigenvector of the same box at the configured gamma
  OperatorSpec sd = s;
  sd.v = GevreySymbol::canonical(s.v.rho, param<double>(c, "delyon_gamma"), s.dim(), s.v.truncation_radius);
  const AssembledOperator B = assemble_dual(sd, Region::cube(s.dim(), big), s.phase);
  const EigenSystem es = eigensystem(B);
  Eigen::Index k = 0;
  (es.values.array() - param<double>(c, "energy")).abs().minCoeff(&k);
  const DelyonReport dr = delyon_bound(sd, s.phase, es.values[k], param<std::vector<int>>(c, "delyon_scales"),
                                       es.sites, es.vectors.col(k).cwiseAbs());
  sw.lap("delyon");
  json scales = json::array();
  for (const auto& x : dr.scales)
    scales.push_back({{"N", x.N}, {"bound", x.bound}, {"ldt_good", x.ldt_good}, {"op_norm", x.op_norm}});
  rep.results = {{"checks", checks},
                 {"passing", passing},
                 {"resonant", ps.resonant},
                 {"rejected", ps.rejected},
                 {"worst_residual", worst},
                 {"delyon",
                  {{"gamma", sd.v.gamma},
                   {"energy", es.values[k]},
                   {"C", dr.C},
                   {"rho_bar", dr.rho_bar},
                   {"scales", scales},
                   {"strictly_decreasing", dr.strictly_decreasing()}}}};
}

void cmd_bench(const ExperimentConfig& cfg, RunReport& rep, Stopwatch& sw) {
  const OperatorSpec s = cfg.spec();
  const json& c = cfg.command("bench");
  const int M = param<int>(c, "M");
  const double E = param<double>(c, "energy");
  const double limit = tol(cfg, "bench_error");
  json rows = json::array();
  json table = json::array();
  double crossover = 0;
  for (int N : param<std::vector<int>>(c, "sizes")) {
    const AssembledOperator op = assemble_box(s, N, s.phase);
    auto t0 = std::chrono::steady_clock::now();
    const GreenEvaluation g = green(op, E);
    auto t1 = std::chrono::steady_clock::now();
    json row = {{"N", N}, {"size", op.size()}};
    double t_block = 0;
    try {
      BlockGreens blocks(op, E);
      const BlockSolveResult r =
          block_resolvent_solve(op, pave_region(op.sites, M, M), blocks, tol(cfg, "block_tol"),
                                param<int>(cfg.tolerances(), "block_max_iter"));
      t_block = std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();
      const double err = (r.G - g.re).cwiseAbs().maxCoeff();
      row["status"] = "ok";
      row["error"] = err;
      row["error_bound"] = r.error_bound;
      row["iterations"] = r.iterations;
      row["contraction"] = r.contraction;
      row["within_tolerance"] = err <= limit;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Diverged) throw;
      row["status"] = "diverged";
    }
    const double t_direct = std::chrono::duration<double>(t1 - t0).count();
    table.push_back({{"N", N}, {"direct_seconds", t_direct}, {"block_seconds", t_block}});
    if (crossover == 0 && t_block > 0 && t_block < t_direct) crossover = N;
    rows.push_back(row);
    sw.lap("N" + std::to_string(N));
  }
  rep.results = {{"M", M}, {"energy", E}, {"tolerance", limit}, {"sizes", rows}};
  rep.timings["table"] = table;
  rep.timings["crossover_N"] = crossover;
}

// -- calibrate --

json calibrate(const ExperimentConfig& cfg, json& detail, Stopwatch& sw, const Mapper& map) {
  const OperatorSpec s = cfg.spec();
  const json& cc = cfg.command("calibrate");
  const uint64_t seed = param<uint64_t>(cfg.calibration(), "seed");
  const double gamma = s.v.gamma, rho_bar = terminal_rate(s.v.rho, gamma);
  json lock;

  // LDT failing fractions on a grid offset from the acceptance grid
  {
    const json& c = cfg.command("ldt-scan");
    ScanGrid grid = cfg.theta_grid();
    grid.line_points = param<int>(cc, "ldt_points");
    grid.seed = seed;
    const auto energies = energy_grid(s, param<int>(cfg.json().at("grids").at("energy"), "count"));
    LdtScanOptions opt;
    opt.ceiling = tol(cfg, "ldt_ceiling");
    json fr = json::object();
    for (int N : param<std::vector<int>>(c, "scales")) {
      double mean = 0;
      for (const auto& e : ldt_scan(s, cfg.schedule(), N, energies, grid, rho_bar, map, opt))
        mean += e.failing_fraction / energies.size();
      // one binomial standard error of the grid estimate on top
      const double se = std::sqrt(std::max(mean * (1 - mean), 0.0) / grid.line_points);
      fr[std::to_string(N)] = {{"measured", mean}, {"threshold", mean + 3 * se}};
    }
    lock["ldt_failing_fraction"] = fr;
    sw.lap("ldt");
  }

  // localization factor: 10th percentile of rate / terminal rate on separate thetas
  {
    const json& c = cfg.command("localize");
    const int N = param<int>(c, "N"), count = param<int>(cc, "localize_thetas");
    std::mt19937_64 rng(seed + 1);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<double> thetas(count);
    for (double& t : thetas) t = u(rng);
    std::vector<std::vector<double>> rates(count);
    map(thetas.size(), [&](size_t i) {
      const AssembledOperator op = assemble_box(s, N, phase_at(s, thetas[i]));
      const EigenSystem es = eigensystem(op);
      const long n = static_cast<long>(es.size());
      for (long k = n / 3; k < 2 * n / 3; ++k)
        rates[i].push_back(localization_profile(es.vectors.col(k), es.sites, N, gamma, tol(cfg, "ldt_ceiling"),
                                                cal(cfg, "rate_floor"))
                               .rate /
                           rho_bar);
    });
    std::vector<double> all;
    for (const auto& r : rates) all.insert(all.end(), r.begin(), r.end());
    std::sort(all.begin(), all.end());
    const double p10 = all.empty() ? 0.0 : all[all.size() / 10];
    lock["localization_factor"] = std::min(cal(cfg, "localization_factor"), p10);
    detail["localization_p10_ratio"] = p10;
    detail["localization_states"] = all.size();
    sw.lap("localization");
  }

  // C_res2: smallest constant for which every non-resonant reference annulus holds
  {
    const int want = param<int>(cc, "annulus_configs");
    const double ag = param<double>(cc, "annulus_gamma");
    OperatorSpec sa = s;
    sa.v = GevreySymbol::canonical(s.v.rho, ag, s.dim(), s.v.truncation_radius);
    const double arho = terminal_rate(s.v.rho, ag);
    std::vector<AnnulusInstance> inst;
    size_t tried = 0;
    const size_t batch = 64;
    while (static_cast<int>(inst.size()) < want && tried < 64 * batch) {
      std::vector<std::optional<AnnulusInstance>> got(batch);
      map(batch, [&](size_t i) {
        AnnulusInstance a = annulus_instance(sa, seed + 2, tried + i);
        if (annulus_nonresonant(a)) got[i] = std::move(a);
      });
      for (auto& g : got)
        if (g && static_cast<int>(inst.size()) < want) inst.push_back(std::move(*g));
      tried += batch;
    }
    if (static_cast<int>(inst.size()) < want)
      throw Error(ErrorCode::Infeasible, "calibrate: too few non-resonant annulus configurations");
    auto all_hold = [&](double C) {
      std::vector<uint8_t> ok(inst.size());
      map(inst.size(), [&](size_t i) {
        AnnulusSetup a = inst[i].setup;
        a.c_res2 = C;
        ok[i] = annulus_decay_evaluate(inst[i].op, a).conclusion_holds;
      });
      return std::all_of(ok.begin(), ok.end(), [](uint8_t x) { return x != 0; });
    };
    double lo = 0, hi = 2 * arho * std::pow(16.0, ag / 2);
    if (!all_hold(hi)) throw Error(ErrorCode::Infeasible, "calibrate: annulus decay fails even at rate <= 0");
    if (all_hold(0.0)) {
      hi = 0;
    } else {
      for (int it = 0; it < 30; ++it) {
        const double mid = 0.5 * (lo + hi);
        (all_hold(mid) ? hi : lo) = mid;
      }
    }
    lock["c_res2"] = hi;
    detail["annulus_gamma"] = ag;
    detail["annulus_tried"] = tried;
    detail["annulus_used"] = inst.size();
    sw.lap("annulus");
  }

  // C1 and c5 from a branch run at lambda = 0.01
  {
    OperatorSpec sb = s;
    sb.lambda = param<double>(cc, "branch_lambda");
    const json& c = cfg.command("branch");
    const int N = param<int>(c, "N");
    BranchOptions o = branch_options(cfg, c);
    const BranchSet b = branch_extract(sb, N, theta_samples(param<int>(c, "samples")),
                                       1.0 / param<int>(c, "samples"), o, map);
    const double longest = b.longest();
    lock["C1"] = longest > 0 ? std::max(0.0, -std::log(longest) / std::log(double(N))) : 0.0;
    double worst = 0;
    for (const auto& br : b.branches) worst = std::max(worst, br.max_residual);
    lock["residual_threshold"] = worst;
    const double c1 = cfg.schedule().c1;
    lock["c5"] = worst > 0 ? -std::log(worst) / std::pow(std::log(double(N)), gamma / c1) : 0.0;
    detail["branch_longest"] = longest;
    sw.lap("branch");
  }

  // duality tolerance: the measured distance at half the truncation, on an independent phase seed
  {
    const json& c = cfg.command("duality");
    const DirectSweep a{param<int>(c, "N_direct") / 2, param<int>(c, "phases_direct"), seed + 3, 0.0};
    const DirectSweep b{param<int>(c, "N_dual") / 2, param<int>(c, "phases_dual"), seed + 3, 0.0};
    const DualityComparison cmp = duality_compare(s, a, b, map);
    lock["duality_tolerance"] = cmp.hausdorff;
    detail["duality_reference_N"] = a.N;
    sw.lap("duality");
  }
  return lock;
}

void cmd_calibrate(const ExperimentConfig& cfg, RunReport& rep, Stopwatch& sw, const Mapper& map) {
  json detail;
  const json lock = calibrate(cfg, detail, sw, map);
  json doc = {{"schema", kLockSchema}, {"config_hash", rep.config_hash}, {"constants", lock}, {"detail", detail}};
  rep.results = doc;
  rep.artifacts.push_back({"calibration.lock.json", doc.dump(2) + "\n"});
}

}  // namespace

json RunReport::results_document() const {
  return {{"schema", kResultsSchema}, {"command", command}, {"config_hash", config_hash}, {"results", results}};
}

json environment_fingerprint(int workers) {
  json e = {{"workers", workers}, {"hardware_threads", std::thread::hardware_concurrency()}};
#if defined(__clang__)
  e["compiler"] = std::string("clang ") + __clang_version__;
#elif defined(__GNUC__)
  e["compiler"] = std::string("gcc ") + __VERSION__;
#endif
  e["cxx"] = __cplusplus;
  e["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  return e;
}

json RunReport::timing_document(int workers) const {
  return {{"config_hash", config_hash}, {"command", command}, {"timings", timings},
          {"environment", environment_fingerprint(workers)}};
}

RunReport run_command(const std::string& name, const ExperimentConfig& cfg, const Mapper& map) {
  RunReport rep;
  rep.command = name;
  rep.config_hash = cfg.hash();
  Stopwatch sw(rep.timings);
  const auto t0 = std::chrono::steady_clock::now();
  if (name == "op-info") {
    cmd_op_info(cfg, rep, sw);
  } else if (name == "green") {
    cmd_green(cfg, rep, sw);
  } else if (name == "ldt-scan") {
    cmd_ldt_scan(cfg, rep, sw, map);
  } else if (name == "msa-verify") {
    cmd_msa_verify(cfg, rep, sw, map);
  } else if (name == "localize") {
    cmd_localize(cfg, rep, sw, map);
  } else if (name == "branch") {
    cmd_branch(cfg, rep, sw, map);
  } else if (name == "measure") {
    cmd_measure(cfg, rep, sw, map);
  } else if (name == "duality") {
    cmd_duality(cfg, rep, sw, map);
  } else if (name == "poisson") {
    cmd_poisson(cfg, rep, sw);
  } else if (name == "calibrate") {
    cmd_calibrate(cfg, rep, sw, map);
  } else if (name == "bench") {
    cmd_bench(cfg, rep, sw);
  } else {
    throw Error(ErrorCode::Validation, "unknown command " + name);
  }
  rep.timings["wall"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

RunReport run_sweep(const ExperimentConfig& cfg, const std::string& command, const std::string& axis, int workers) {
  const auto values = cfg.json().at("sweep").at("values").get<std::vector<double>>();
  if (values.empty()) throw Error(ErrorCode::Validation, "sweep grid is empty");
  if (axis != "theta" && axis != "E" && axis != "lambda" && axis != "omega_t")
    throw Error(ErrorCode::Validation, "sweep axis must be theta, E, lambda or omega_t");
  if (std::find(command_names().begin(), command_names().end(), command) == command_names().end())
    throw Error(ErrorCode::Validation, "unknown command " + command);
  // every point is validated before any work starts
  std::vector<ExperimentConfig> cfgs;
  for (double v : values) cfgs.push_back(cfg.with_axis(axis, v));

  RunReport rep;
  rep.command = "sweep";
  rep.config_hash = cfg.hash();
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<json> points(values.size());
  std::vector<std::vector<Artifact>> arts(values.size());
  thread_mapper(workers)(values.size(), [&](size_t i) {
    json p = {{"index", i}, {"value", values[i]}};
    try {
      RunReport r = run_command(command, cfgs[i], serial_map);
      p["ok"] = true;
      p["results"] = std::move(r.results);
      arts[i] = std::move(r.artifacts);
    } catch (const Error& e) {
      p["ok"] = false;
      p["error"] = error_payload(e);
    }
    points[i] = std::move(p);
  });
  // reduction in grid order
  size_t failures = 0;
  json list = json::array();
  for (size_t i = 0; i < points.size(); ++i) {
    failures += !points[i]["ok"].get<bool>();
    list.push_back(std::move(points[i]));
    for (auto& a : arts[i]) rep.artifacts.push_back({"point" + std::to_string(i) + "_" + a.name, std::move(a.content)});
  }
  const double fraction = double(failures) / values.size();
  const double limit = tol(cfg, "sweep_failure_fraction");
  rep.results = {{"axis", axis},
                 {"command", command},
                 {"points", list},
                 {"failures", failures},
                 {"failure_fraction", fraction},
                 {"failure_threshold", limit}};
  if (fraction > limit) rep.status = 3;
  rep.timings["wall"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

void write_report(const RunReport& r, const std::string& dir, int workers) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto put = [&](const std::string& name, const std::string& text) {
    std::ofstream f(fs::path(dir) / name, std::ios::binary);
    if (!f) throw Error(ErrorCode::Validation, "cannot write " + (fs::path(dir) / name).string());
    f << text;
  };
  put("results.json", r.results_document().dump(2) + "\n");
  put("timings.json", r.timing_document(workers).dump(2) + "\n");
  for (const auto& a : r.artifacts) {
    const std::string ext = fs::path(a.name).extension().string();
    if (ext == ".csv")
      put(a.name, csv_text(r.config_hash, a.content));
    else if (ext == ".svg")
      put(a.name, "<!-- config_hash=" + r.config_hash + " -->\n" + a.content);
    else
      put(a.name, a.content);
  }
}

json error_payload(const Error& e) {
  return {{"error", error_name(e.code())}, {"message", e.what()}, {"exit_status", exit_status(e)}};
}

AnnulusInstance annulus_instance(const OperatorSpec& spec, uint64_t seed, size_t index) {
  const int N = 128;
  std::mt19937_64 rng(seed * 1000003 + index);
  std::uniform_real_distribution<double> u(0, 1);
  const double theta = u(rng), lo = -1.5 + 2 * u(rng);
  OperatorSpec s = spec;
  s.phase = phase_at(spec, theta);
  const AssembledOperator op0 = assemble_dual(s, Region::cube(1, N), s.phase);
  // E on a grid over [lo, lo + 1] maximizing the second smallest diagonal gap: one resonant site, the rest far
  const Eigen::VectorXd diag = op0.matrix.diagonal();
  double E = lo, best = -1;
  for (int k = 0; k <= 400; ++k) {
    const double e = lo + k / 400.0;
    double g1 = 1e300, g2 = 1e300;
    for (Eigen::Index i = 0; i < diag.size(); ++i) {
      const double g = std::abs(diag[i] - e);
      if (g < g1) {
        g2 = g1;
        g1 = g;
      } else if (g < g2) {
        g2 = g;
      }
    }
    if (g2 > best) {
      best = g2;
      E = e;
    }
  }
  Eigen::Index k = 0;
  (diag.array() - E).abs().minCoeff(&k);
  s.phase = shift_orbit(s.phase, s.omega, op0.sites[k], ShiftMode::Componentwise);
  AnnulusInstance a{assemble_dual(s, Region::cube(1, N), s.phase), {}};
  a.setup.core = region_points(Region::cube(1, 1));
  a.setup.M0 = 16;
  a.setup.M_max = 32;
  a.setup.crude_norm = Resolvent(a.op).norm_at(E);
  a.setup.rho_bar = terminal_rate(spec.v.rho, spec.v.gamma);
  a.setup.rho = spec.v.rho;
  a.setup.energy = E;
  return a;
}

bool annulus_nonresonant(const AnnulusInstance& inst) {
  const AnnulusCertificate c = annulus_decay_evaluate(inst.op, inst.setup);
  return c.gating_ok() && c.evaluated;
}

}  // namespace gev
