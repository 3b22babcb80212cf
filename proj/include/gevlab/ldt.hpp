#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gevlab/greens.hpp"
#include "gevlab/parallel.hpp"
#include "gevlab/resolvent.hpp"

namespace gev {

struct ScaleSchedule {
  double gamma = 1.0;
  double c1 = 0.05;
  double c3 = 0.0667, c4 = 0.0833;
  int N1 = 8, N2 = 32, N = 64;
  std::vector<double> rho_bar_per_scale;  // pass/fail rate at N1, N2, N

  // (8, 32, 64) at d=1, (4, 8, 16) at d>=2; c1 = 0.05 gamma, c3 = gamma/15, c4 = gamma/12
  static ScaleSchedule desk(int d, double gamma, double rho = 1.0);
  // N1 < N2 <= N and 0 < c1 < c3 < c4 < gamma/10
  void validate() const;
  // e^{-N^{c1}}
  double target(int scale) const;
};

// theta samples: at d=1 one line of line_points; at d>=2, for every coordinate j,
// `sections` seeded sections theta_j^neg each carrying a line of line_points
struct ScanGrid {
  int line_points = 4096;
  int sections = 64;
  uint64_t seed = 1;

  double step() const { return 1.0 / line_points; }
};

struct GridPoint {
  TorusPoint theta;
  int coordinate = 0;  // scanned coordinate j
  int section = 0;
};

std::vector<GridPoint> grid_points(const ScanGrid& grid, int d);

struct ScanRecord {
  size_t point = 0;
  double energy = 0.0;
  std::string shape_id;
  bool pass_norm = false, pass_decay = false;
  double op_norm = 0.0;
  double worst_pair_rate = 0.0;  // smallest -log|G|/|n-n'|^gamma over resolved pairs
};

struct BadSetEstimate {
  int scale = 0;
  double energy = 0.0;
  std::vector<double> omega;
  ScanGrid grid;
  int dim = 1;
  size_t points = 0, failing = 0;
  double failing_fraction = 0.0;
  // per coordinate: max over sections of the failing fraction along the line
  std::vector<double> section_measures;
  double target = 0.0;  // e^{-N^{c1}}
  double rho_bar = 0.0;
  double mean_fit_rate = 0.0;  // mean fitted rate over evaluated shapes, logged only
  std::vector<uint8_t> indicator;  // per grid point, 1 = fails

  double sup_section_measure() const;
};

// -- initial step --

struct InitialBadSet {
  AnalyticPotential f;
  FrequencyVector omega;
  int N = 0;
  double energy = 0.0, delta = 0.0;

  // min_{|n| <= N} |f(theta + n w) - E| < delta
  bool contains(const TorusPoint& theta) const;
};

struct InitialStepReport {
  InitialBadSet set;
  BadSetEstimate estimate;
  double lambda_threshold = 0.0;  // delta / (2 (2N+1)^d)
  bool threshold_holds = false;
  size_t verified = 0;
  size_t norm_violations = 0, entry_violations = 0, unresolved = 0;
  double worst_norm_ratio = 0.0;   // ||G|| / (2/delta)
  double worst_entry_ratio = 0.0;  // |G(n,n')| / (2/delta e^{-rho|n-n'|^gamma})
};

double initial_lambda_threshold(double delta, int N, int d);

// indicator of X_N on the grid, then ||G_Q|| and entry bounds at `verify_count` seeded
// theta outside X_N for every elementary shape Q of size N
InitialStepReport initial_bad_set(const OperatorSpec& spec, int N, double delta, double E, const ScanGrid& grid,
                                  size_t verify_count = 0, uint64_t seed = 1);

// -- LDT scan --

struct LdtScanOptions {
  bool keep_records = false;
  double ceiling = 50.0;
};

// midpoints of `count` equal cells of the numerical range
std::vector<double> energy_grid(const OperatorSpec& spec, int count);

// every grid theta, every shape of size N, every energy; theta fails at E if any shape fails
std::vector<BadSetEstimate> ldt_scan(const OperatorSpec& spec, const ScaleSchedule& sch, int N,
                                     const std::vector<double>& energies, const ScanGrid& grid, double rho_bar,
                                     const Mapper& map = serial_map, const LdtScanOptions& opt = {},
                                     std::vector<ScanRecord>* records = nullptr);

// -- Cartan-type window scan --

// max(2 e^{-10 rho N1^gamma}, floor)
double resonance_window(double rho, double gamma, int N1, double floor = 1e-4);

struct ResonanceScan {
  double delta1 = 0.0;
  double lo = 0.0, hi = 0.0;  // window [theta_j - delta1/2, theta_j + delta1/2]
  double threshold = 0.0;     // ||G|| >= threshold counts as resonant
  double measure = 0.0;
  double target = 0.0;  // e^{-Ntilde^{gamma/3}}
  double grid_step = 0.0;
  size_t points = 0, hits = 0;

  bool pass() const { return measure <= target + grid_step; }
};

ResonanceScan resonance_measure_scan(const OperatorSpec& spec, const Region& lambda, const TorusPoint& theta, int j,
                                     double delta1, double E, double threshold, int points = 4096);

// -- multiscale certification --

struct MultiscaleOptions {
  double rho_bar = 0.0;  // 0 means the terminal rate
  double c_res2 = 1.0;
  bool cross_check = true;
  int M_max = 0;  // 0 means max(10 N^{c4}, N)
};

struct AnnulusAttempt {
  int M = 0;
  bool all_good = false;
  bool paveable = false;
  std::string note;
};

struct MultiscaleTrace {
  TorusPoint theta;
  double energy = 0.0;
  int N1 = 0, N = 0;
  int M = 0, core_radius = 0;
  size_t annulus_points = 0;
  size_t sites_checked = 0, sites_bad = 0;
  std::vector<AnnulusAttempt> attempts;

  PavingCertificate box;      // all of [-M, M]^d
  PavingCertificate annulus;  // Lambda \ Lambda-bar
  AnnulusCertificate decay;
  std::string decay_note;

  double certified_norm = 0.0;  // Schur bound of the box certificate
  double formula_norm = 0.0;
  double direct_norm = 0.0;
  double slack = 0.0;  // certified / direct

  bool norm_sound() const { return !(direct_norm > certified_norm) && !(direct_norm > formula_norm); }
  bool decay_sound() const { return !decay.evaluated || decay.conclusion_holds; }
  bool sound() const { return norm_sound() && decay_sound(); }
};

// throws NoGoodAnnulus when no M admits an all-good, paveable annulus
MultiscaleTrace multiscale_verify(const OperatorSpec& spec, const ScaleSchedule& sch, double E,
                                  const TorusPoint& theta, const MultiscaleOptions& opt = {});

}  // namespace gev
