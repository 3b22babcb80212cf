#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "gevlab/operator.hpp"
#include "gevlab/parallel.hpp"

namespace gev {

struct EigenSystem {
  SiteSet sites;
  int scale = 0;
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // columns
  double op_norm = 0.0;
  double residual = 0.0;       // max_s ||H phi_s - lam_s phi_s||
  double orthonormality = 0.0;  // ||V^T V - I||_max

  size_t size() const { return static_cast<size_t>(values.size()); }
};

// Singular when the solver fails, Diverged when the residual invariants do not hold
EigenSystem eigensystem(const AssembledOperator& op);

struct LocalizationProfile {
  Site center{};
  double peak = 0.0;
  double rate = 0.0;  // fit of log(peak/env(r)) = rate r^gamma through the origin
  double r_squared = 0.0;
  double worst_rate = 0.0;
  size_t pairs = 0, unresolved = 0;
  bool capped = false;    // no resolved site in the fit range, rate set to the ceiling
  bool extended = false;  // rate below floor
};

// one point per separation r >= N/10 using the tail envelope env(r) = max_{|n-c| >= r} |phi(n)|;
// envelope values below 64 eps sqrt(n) peak are unresolved
LocalizationProfile localization_profile(const Eigen::VectorXd& v, const SiteSet& sites, int N, double gamma,
                                         double ceiling = 50.0, double floor = 0.1);

// -- quasimodes --

struct QuasimodeResidual {
  int J = 0, big = 0;
  double core_mass = 0.0;  // ||R_[-J,J] phi||
  double box = 0.0;        // ||(H_big - lam) psi||
  double tail = 0.0;       // bound on the rows outside the big box
  double truncation = 0.0;  // hopping beyond the symbol radius, when 2 big exceeds it
  double certified = 0.0;   // sqrt(box^2 + tail^2) + truncation
};

// psi = R_[-J,J] phi / ||.||, zero padded into [-big, big]^d; DUAL specs only
QuasimodeResidual quasimode_residual(const OperatorSpec& spec, const TorusPoint& theta, const SiteSet& sites,
                                     const Eigen::VectorXd& phi, double lam, int J, int big);

// -- branches --

struct BranchSample {
  double theta = 0.0;  // coordinate 0 of the phase, the others fixed by spec.phase
  double energy = 0.0;
  long index = 0;  // s*
  double mass = 0.0;
  double residual = 0.0;  // certified quasimode residual
};

struct EigenBranch {
  double lo = 0.0, hi = 0.0;  // theta interval, each sample owns one grid cell
  std::vector<BranchSample> samples;
  double e_min = 0.0, e_max = 0.0;
  double max_residual = 0.0;

  double length() const { return hi - lo; }
};

struct BranchOptions {
  double continuity_factor = 10.0;
  int J = 0;    // 0 means N/2
  int big = 0;  // 0 means 3N
  bool residuals = true;
};

struct DroppedSample {
  double theta = 0.0;
  std::string reason;
};

struct BranchSet {
  int N = 0;
  double step = 0.0;
  double tolerance = 0.0;  // continuity tolerance on |E(theta_k+1) - E(theta_k)|
  double mass_floor = 0.0;  // (2N+1)^{-d/2}
  std::vector<EigenBranch> branches;
  std::vector<DroppedSample> dropped;

  double image_measure() const;
  double longest() const;
};

// midpoints of `count` cells of [0, 1)
std::vector<double> theta_samples(int count);

BranchSet branch_extract(const OperatorSpec& spec, int N, const std::vector<double>& thetas, double step,
                         const BranchOptions& opt = {}, const Mapper& map = serial_map);

struct RefineLedger {
  int N = 0, N1 = 0;
  double before = 0.0, after = 0.0;
  double loss = 0.0;
  double allowed = 0.0;  // 1/N1 + 2 grid resolution
  double grid_resolution = 0.0;  // parent theta step times ||f'||
  size_t empty_windows = 0;

  bool holds() const { return loss <= allowed; }
};

struct RefineResult {
  BranchSet set;
  RefineLedger ledger;
};

// every parent cell split into `factor` samples, s* picked by overlap with the parent quasimode
// inside the window |lam_s - E| <= (2N1+1)^{d/2} ||(H_N1 - E) xi||
RefineResult branch_refine(const OperatorSpec& spec, const BranchSet& parent, int N1, int factor = 1,
                           const BranchOptions& opt = {}, const Mapper& map = serial_map);

// -- spectrum estimates --

using Intervals = std::vector<std::pair<double, double>>;

// sorted, overlapping or touching intervals merged
Intervals normalize_intervals(Intervals iv);
double intervals_measure(const Intervals& iv);
double hausdorff_distance(const Intervals& a, const Intervals& b);

struct SpectrumEstimate {
  Intervals intervals;
  double measure = 0.0;
  std::string provenance;  // "branch" or "direct"
  double budget = 0.0;
  double resolution = 0.0;
};

SpectrumEstimate spectrum_from_branches(const BranchSet& set);

struct DirectSweep {
  int N = 0;
  int phases = 64;
  uint64_t seed = 1;
  double tolerance = 0.0;  // 0 means ||h'|| max(1/phases, 1/(2N+1))
};

// eigenvalues of the Dirichlet truncation over a phase grid, clustered at the tolerance
SpectrumEstimate spectrum_direct(const OperatorSpec& spec, const DirectSweep& sweep, const Mapper& map = serial_map);

// -- Poisson identity and Delyon chain --

struct PoissonCheck {
  double energy = 0.0;
  Site center{};
  double residual = 0.0;  // max_n |xi_n + lam sum G(n,n') v(n'-n'') xi_n''|
  double eigen_residual = 0.0;
  double g_norm = 0.0;
  double budget = 0.0;  // ||G|| ||(H - E) xi||, plus the symbol truncation when the box outgrows it
};

// big: an assembled DUAL box; sub must lie strictly inside it
PoissonCheck poisson_residual_check(const AssembledOperator& big, const Eigen::VectorXd& xi, double E,
                                    const Region& sub);

struct PoissonSample {
  std::vector<PoissonCheck> checks;
  size_t resonant = 0, rejected = 0;
};

// interior eigenpairs: centre at least `margin` from the big box's edge and outside sub;
// pairs with cond(H_sub - E) above max_condition are skipped as resonant
PoissonSample poisson_sample(const OperatorSpec& spec, const TorusPoint& theta, int big, int sub, int margin,
                             size_t count, uint64_t seed, double max_condition = 1e12);

struct DelyonScale {
  int N = 0;
  double bound = 0.0;
  bool ldt_good = false;
  double op_norm = 0.0;
};

struct DelyonReport {
  double C = 0.0;  // max |xi_n| / max(1, |n|)^d
  double rho_bar = 0.0;
  std::vector<DelyonScale> scales;

  bool strictly_decreasing() const;
};

DelyonReport delyon_bound(const OperatorSpec& spec, const TorusPoint& theta, double E, const std::vector<int>& scales,
                          const SiteSet& sites, const Eigen::VectorXd& xi_abs);

// -- exports --

void write_branch_csv(std::ostream& os, const BranchSet& set);
void write_profile_csv(std::ostream& os, const std::vector<LocalizationProfile>& profiles, int dim);
void write_branch_svg(std::ostream& os, const BranchSet& set);
void write_profile_svg(std::ostream& os, const Eigen::VectorXd& v, const SiteSet& sites,
                       const LocalizationProfile& p, double gamma);

}  // namespace gev
