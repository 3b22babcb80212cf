#pragma once

#include <Eigen/Dense>
#include <complex>
#include <iosfwd>
#include <memory>

#include "gevlab/operator.hpp"

namespace gev {

struct GreenEvaluation {
  SiteSet sites;
  int scale = 0;
  double gamma = 1.0;
  double energy = 0.0;
  double epsilon = 0.0;
  Eigen::MatrixXd re;
  Eigen::MatrixXd im;  // empty when epsilon == 0
  double op_norm = 0.0;
  double condition_estimate = 0.0;
  double residual = 0.0;  // ||(H - E + i eps) G - I||_max after refinement

  size_t size() const { return static_cast<size_t>(re.rows()); }
  std::complex<double> operator()(size_t i, size_t j) const {
    return {re(i, j), im.size() ? im(i, j) : 0.0};
  }
  double abs(size_t i, size_t j) const { return std::abs((*this)(i, j)); }
  Eigen::MatrixXd abs_matrix() const;
  // entries below this are rounding noise of the computed inverse and cannot refute a bound
  double resolution() const;
};

// H = V diag(mu) V^T computed once, then evaluated at many energies
class Resolvent {
 public:
  explicit Resolvent(const AssembledOperator& op);
  Resolvent(const Eigen::MatrixXd& h, SiteSet sites, int scale, double gamma);

  // throws Singular when cond > 1e14 or the residual check fails
  GreenEvaluation at(double E, double eps = 0.0) const;
  // 1 / min |mu - E + i eps|, no matrix formed
  double norm_at(double E, double eps = 0.0) const;
  double condition_at(double E, double eps = 0.0) const;

  const Eigen::VectorXd& eigenvalues() const { return data_->mu; }
  const Eigen::MatrixXd& eigenvectors() const { return data_->v; }
  const Eigen::MatrixXd& matrix() const { return data_->h; }
  const SiteSet& sites() const { return data_->sites; }
  int scale() const { return data_->scale; }
  double gamma() const { return data_->gamma; }

  static constexpr double kMaxCondition = 1e14;
  static constexpr double kResidualTol = 1e-10;

 private:
  struct Data {
    Eigen::MatrixXd h, v;
    Eigen::VectorXd mu;
    SiteSet sites;
    int scale = 0;
    double gamma = 1.0;
  };
  std::shared_ptr<const Data> data_;
};

GreenEvaluation green(const AssembledOperator& op, double E, double eps = 0.0);

// (1 - 5^-gamma) rho / 2
double terminal_rate(double rho, double gamma);
// e^{N^{gamma/2}}
double ldt_norm_threshold(int N, double gamma);
// pairs used by the decay bound: 0 < |n - n'| and 10|n - n'| >= N
inline bool in_decay_range(int sep, int N) { return sep > 0 && 10 * sep >= N; }

struct DecayFit {
  double gamma = 1.0;
  double rho_bar_fit = 0.0;
  double r_squared = 0.0;
  double min_rate = 0.0;
  size_t pairs = 0;
  size_t unresolved = 0;
  Site worst_m{}, worst_n{};
};

// rate of -log|G(n,n')| against |n-n'|^gamma, through the origin, over pairs with |G| > floor;
// rates capped at ceiling
DecayFit fit_decay(const Eigen::MatrixXd& abs_g, const SiteSet& sites, int N, double gamma,
                   double ceiling = 50.0, double floor = 0.0);
DecayFit fit_decay(const GreenEvaluation& g, double ceiling = 50.0);

struct BoundCertificate {
  int scale = 0;
  double gamma = 1.0;
  double norm_bound = 0.0;
  double decay_rate = 0.0;
  double op_norm = 0.0;
  bool pass_norm = false;
  bool pass_decay = false;
  size_t decay_violations = 0;
  size_t unresolved = 0;  // pairs below the numerical resolution
  double resolution = 0.0;
  // worst pair by log|G| + rate |n-n'|^gamma, positive means violated
  double worst_excess = -1e300;
  Site worst_m{}, worst_n{};
  double worst_value = 0.0;
  DecayFit fit;

  bool pass() const { return pass_norm && pass_decay; }
};

BoundCertificate check_ldt_bounds(const GreenEvaluation& g, double rho_bar, double ceiling = 50.0);

// rows: site_m, site_n, value, |m-n|, log_abs
void write_green_csv(std::ostream& os, const GreenEvaluation& g);

}  // namespace gev
