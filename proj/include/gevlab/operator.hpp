#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>

#include "gevlab/lattice.hpp"
#include "gevlab/qp_model.hpp"

namespace gev {

enum class Family { Dual, Direct };

// DUAL:   lam T_v + f(theta + n w) on Z^d  (v = Gevrey hopping, analytic = f)
// DIRECT: T_g + lam v(x + l w) on Z        (analytic = g, v = Gevrey potential)
struct OperatorSpec {
  Family family = Family::Dual;
  double lambda = 0.0;
  GevreySymbol v;
  AnalyticPotential analytic;
  FrequencyVector omega;
  TorusPoint phase;

  int dim() const { return omega.dim(); }
  void validate() const;
  bool operator==(const OperatorSpec&) const = default;
};

// d=1 default model: f = g = 2cos 2 pi theta, canonical v, w = frac(sqrt 2)
OperatorSpec default_dual_spec(double lambda, double gamma, double rho = 1.0, int radius = 1024);

struct AssembledOperator {
  OperatorSpec spec;
  SiteSet sites;            // DIRECT uses 1-d sites l in [-N, N]
  std::optional<Region> region;
  int scale = 0;            // N used by the LDT thresholds
  TorusPoint phase;         // phase actually used
  Eigen::MatrixXd matrix;
  double tail_bound = 0.0;  // lam * sum_{|n|>R} e^{-rho|n|^gamma}

  size_t size() const { return sites.size(); }
};

using OperatorPtr = std::shared_ptr<const AssembledOperator>;

AssembledOperator assemble_dual(const OperatorSpec& spec, const Region& region,
                                const std::optional<TorusPoint>& theta = std::nullopt);
AssembledOperator assemble_dual(const OperatorSpec& spec, const SiteSet& sites, int scale,
                                const std::optional<TorusPoint>& theta = std::nullopt);
AssembledOperator assemble_direct(const OperatorSpec& spec, int N,
                                  const std::optional<TorusPoint>& x = std::nullopt);
// R_S H R_S as its own operator
AssembledOperator restrict_to(const AssembledOperator& op, const SiteSet& sub, int scale);

// Toeplitz hopping entry for sites m, n (includes lam for DUAL)
double hopping_entry(const OperatorSpec& spec, const Site& m, const Site& n);
// ||lam T_v|| bound used for the numerical range
double hopping_norm_bound(const OperatorSpec& spec);
// [min f - lam||T_v||, max f + lam||T_v||]
std::pair<double, double> numerical_range(const OperatorSpec& spec);

double hermiticity_residual(const Eigen::MatrixXd& m);

}  // namespace gev
