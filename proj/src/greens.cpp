#include "gevlab/greens.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <ostream>

#include "gevlab/errors.hpp"

namespace gev {

Eigen::MatrixXd GreenEvaluation::abs_matrix() const {
  if (im.size() == 0) return re.cwiseAbs();
  return (re.array().square() + im.array().square()).sqrt().matrix();
}

double GreenEvaluation::resolution() const {
  const double rn = std::sqrt(static_cast<double>(size()));
  return std::max(1.0, op_norm) * rn * (16.0 * std::numeric_limits<double>::epsilon() + residual);
}

Resolvent::Resolvent(const AssembledOperator& op)
    : Resolvent(op.matrix, op.sites, op.scale, op.spec.v.gamma) {}

Resolvent::Resolvent(const Eigen::MatrixXd& h, SiteSet sites, int scale, double gamma) {
  auto d = std::make_shared<Data>();
  d->h = h;
  d->sites = std::move(sites);
  d->scale = scale;
  d->gamma = gamma;
  if (h.rows() > 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    if (es.info() != Eigen::Success) throw Error(ErrorCode::Singular, "eigensolver did not converge");
    d->mu = es.eigenvalues();
    d->v = es.eigenvectors();
  }
  data_ = std::move(d);
}

double Resolvent::norm_at(double E, double eps) const {
  double lo = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < data_->mu.size(); ++k) lo = std::min(lo, std::hypot(data_->mu[k] - E, eps));
  return lo > 0 ? 1.0 / lo : std::numeric_limits<double>::infinity();
}

double Resolvent::condition_at(double E, double eps) const {
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (Eigen::Index k = 0; k < data_->mu.size(); ++k) {
    const double a = std::hypot(data_->mu[k] - E, eps);
    lo = std::min(lo, a);
    hi = std::max(hi, a);
  }
  return lo > 0 ? hi / lo : std::numeric_limits<double>::infinity();
}

namespace {

// max modulus of (H - E + i eps) G - I, written into rre / rim
double residual(const Eigen::MatrixXd& h, double E, double eps, const Eigen::MatrixXd& gre,
                const Eigen::MatrixXd& gim, Eigen::MatrixXd& rre, Eigen::MatrixXd& rim) {
  const Eigen::Index n = h.rows();
  rre.noalias() = h * gre;
  rre -= E * gre;
  rre.diagonal().array() -= 1.0;
  if (eps != 0.0) {
    rre -= eps * gim;
    rim.noalias() = h * gim;
    rim -= E * gim;
    rim += eps * gre;
    return (rre.array().square() + rim.array().square()).sqrt().maxCoeff();
  }
  rim.resize(0, 0);
  return n ? rre.cwiseAbs().maxCoeff() : 0.0;
}

}  // namespace

GreenEvaluation Resolvent::at(double E, double eps) const {
  if (!(eps >= 0)) throw Error(ErrorCode::Validation, "epsilon must be >= 0");
  const Data& d = *data_;
  GreenEvaluation g;
  g.sites = d.sites;
  g.scale = d.scale;
  g.gamma = d.gamma;
  g.energy = E;
  g.epsilon = eps;
  const Eigen::Index n = d.mu.size();
  if (n == 0) return g;
  g.condition_estimate = condition_at(E, eps);
  g.op_norm = norm_at(E, eps);
  if (!(g.condition_estimate <= kMaxCondition))
    throw Error(ErrorCode::Singular, "E is an eigenvalue at solver resolution (cond " +
                                         std::to_string(g.condition_estimate) + ")");
  // 1/(mu - E + i eps) = (mu - E - i eps) / |.|^2
  Eigen::VectorXd wre(n), wim(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double a = d.mu[k] - E, m2 = a * a + eps * eps;
    wre[k] = a / m2;
    wim[k] = -eps / m2;
  }
  g.re.noalias() = d.v * wre.asDiagonal() * d.v.transpose();
  if (eps != 0.0) g.im.noalias() = d.v * wim.asDiagonal() * d.v.transpose();

  const double tol = kResidualTol * std::max(1.0, g.op_norm);
  Eigen::MatrixXd rre, rim;
  g.residual = residual(d.h, E, eps, g.re, g.im, rre, rim);
  for (int step = 0; step < 3 && g.residual > tol; ++step) {
    // Newton step G <- G - G R
    if (eps != 0.0) {
      Eigen::MatrixXd nre = g.re - (g.re * rre - g.im * rim);
      Eigen::MatrixXd nim = g.im - (g.re * rim + g.im * rre);
      g.re = std::move(nre);
      g.im = std::move(nim);
    } else {
      g.re -= g.re * rre;
    }
    g.residual = residual(d.h, E, eps, g.re, g.im, rre, rim);
  }
  if (!(g.residual <= tol))
    throw Error(ErrorCode::Singular, "inverse residual " + std::to_string(g.residual) + " above tolerance");
  return g;
}

GreenEvaluation green(const AssembledOperator& op, double E, double eps) { return Resolvent(op).at(E, eps); }

double terminal_rate(double rho, double gamma) { return (1.0 - std::pow(5.0, -gamma)) * rho / 2.0; }

double ldt_norm_threshold(int N, double gamma) { return std::exp(std::pow(static_cast<double>(N), gamma / 2.0)); }

DecayFit fit_decay(const Eigen::MatrixXd& abs_g, const SiteSet& sites, int N, double gamma, double ceiling,
                   double floor) {
  DecayFit fit;
  fit.gamma = gamma;
  fit.min_rate = ceiling;
  double sxx = 0, sxy = 0, syy = 0;
  const size_t n = sites.size();
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      const int sep = sup_dist(sites[i], sites[j]);
      if (!in_decay_range(sep, N)) continue;
      const double x = std::pow(static_cast<double>(sep), gamma);
      const double a = abs_g(i, j);
      if (a <= floor && floor > 0) {
        ++fit.unresolved;
        continue;
      }
      double y = a > 0 ? -std::log(a) : ceiling * x;
      y = std::min(y, ceiling * x);
      if (y / x < fit.min_rate || fit.pairs == 0) {
        fit.min_rate = y / x;
        fit.worst_m = sites[i];
        fit.worst_n = sites[j];
      }
      sxx += x * x;
      sxy += x * y;
      syy += y * y;
      ++fit.pairs;
    }
  }
  if (fit.pairs == 0) {
    fit.rho_bar_fit = ceiling;
    fit.r_squared = 1.0;
    return fit;
  }
  fit.rho_bar_fit = sxy / sxx;
  // uncentered R^2 for a through-origin fit
  const double sse = syy - fit.rho_bar_fit * sxy;
  fit.r_squared = syy > 0 ? 1.0 - std::max(0.0, sse) / syy : 1.0;
  // a weighted mean of rates is never below the smallest one; guard rounding
  fit.min_rate = std::min(fit.min_rate, fit.rho_bar_fit);
  return fit;
}

DecayFit fit_decay(const GreenEvaluation& g, double ceiling) {
  return fit_decay(g.abs_matrix(), g.sites, g.scale, g.gamma, ceiling, g.resolution());
}

BoundCertificate check_ldt_bounds(const GreenEvaluation& g, double rho_bar, double ceiling) {
  BoundCertificate c;
  c.scale = g.scale;
  c.gamma = g.gamma;
  c.norm_bound = ldt_norm_threshold(g.scale, g.gamma);
  c.decay_rate = rho_bar;
  c.op_norm = g.op_norm;
  c.pass_norm = g.op_norm <= c.norm_bound;
  c.resolution = g.resolution();
  const Eigen::MatrixXd a = g.abs_matrix();
  const size_t n = g.size();
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      const int sep = sup_dist(g.sites[i], g.sites[j]);
      if (!in_decay_range(sep, g.scale)) continue;
      const double x = std::pow(static_cast<double>(sep), g.gamma);
      if (a(i, j) <= c.resolution) {
        ++c.unresolved;
        continue;
      }
      const double excess = std::log(a(i, j)) + rho_bar * x;
      if (a(i, j) > std::exp(-rho_bar * x)) ++c.decay_violations;
      if (excess > c.worst_excess) {
        c.worst_excess = excess;
        c.worst_m = g.sites[i];
        c.worst_n = g.sites[j];
        c.worst_value = a(i, j);
      }
    }
  }
  c.pass_decay = c.decay_violations == 0;
  c.fit = fit_decay(a, g.sites, g.scale, g.gamma, ceiling, c.resolution);
  return c;
}

void write_green_csv(std::ostream& os, const GreenEvaluation& g) {
  const int d = g.sites.dim();
  os << "site_m,site_n,value,sep,log_abs\n";
  os.precision(17);
  for (size_t i = 0; i < g.size(); ++i) {
    for (size_t j = 0; j < g.size(); ++j) {
      const double a = g.abs(i, j);
      os << site_string(g.sites[i], d) << ',' << site_string(g.sites[j], d) << ',' << g.re(i, j) << ','
         << sup_dist(g.sites[i], g.sites[j]) << ',' << (a > 0 ? std::log(a) : -INFINITY) << '\n';
    }
  }
}

}  // namespace gev
