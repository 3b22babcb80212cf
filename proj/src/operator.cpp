#include "gevlab/operator.hpp"

#include <cmath>

#include "gevlab/errors.hpp"

namespace gev {

void OperatorSpec::validate() const {
  if (!(lambda >= 0)) throw Error(ErrorCode::Validation, "lambda must be >= 0");
  const int d = omega.dim();
  if (d < 1) throw Error(ErrorCode::Validation, "omega missing");
  if (v.dim != d) throw Error(ErrorCode::DimensionMismatch, "symbol dim differs from omega dim");
  if (phase.dim() != d) throw Error(ErrorCode::DimensionMismatch, "phase dim differs from omega dim");
  if (family == Family::Dual) {
    if (analytic.dim != d) throw Error(ErrorCode::DimensionMismatch, "potential dim differs from omega dim");
  } else {
    if (analytic.dim != 1) throw Error(ErrorCode::DimensionMismatch, "DIRECT hopping g must be 1-d");
    for (const auto& [k, c] : analytic.coeffs)
      if (c.imag() != 0.0) throw Error(ErrorCode::Validation, "DIRECT hopping g needs real even coefficients");
  }
}

OperatorSpec default_dual_spec(double lambda, double gamma, double rho, int radius) {
  OperatorSpec s;
  s.family = Family::Dual;
  s.lambda = lambda;
  s.v = GevreySymbol::canonical(rho, gamma, 1, radius);
  s.analytic = AnalyticPotential::two_cos(1);
  s.omega = default_frequency(1);
  s.phase = TorusPoint({0.0});
  return s;
}

double hopping_entry(const OperatorSpec& spec, const Site& m, const Site& n) {
  if (spec.family == Family::Dual) return spec.lambda * symbol_coefficient(spec.v, m - n);
  auto it = spec.analytic.coeffs.find(m - n);
  return it == spec.analytic.coeffs.end() ? 0.0 : it->second.real();
}

double hopping_norm_bound(const OperatorSpec& spec) {
  if (spec.family == Family::Dual) return spec.lambda * symbol_l1(spec.v);
  double s = 0.0;
  for (const auto& kv : spec.analytic.coeffs) s += std::abs(kv.second);
  return s;
}

std::pair<double, double> numerical_range(const OperatorSpec& spec) {
  const double h = hopping_norm_bound(spec);
  if (spec.family == Family::Dual)
    return {potential_min_bound(spec.analytic) - h, potential_max_bound(spec.analytic) + h};
  const double vb = spec.lambda * symbol_l1(spec.v);
  return {-h - vb, h + vb};
}

namespace {

// hopping table indexed by sup-norm for the canonical rule
struct HoppingTable {
  const OperatorSpec& spec;
  std::vector<double> radial;
  explicit HoppingTable(const OperatorSpec& s, int max_sep) : spec(s) {
    if (s.family == Family::Dual && s.v.rule == SymbolRule::Canonical) {
      radial.resize(max_sep + 1);
      for (int k = 0; k <= max_sep; ++k)
        radial[k] = k > s.v.truncation_radius ? 0.0 : s.lambda * canonical_coefficient(s.v.rho, s.v.gamma, k);
    }
  }
  double operator()(const Site& m, const Site& n) const {
    if (!radial.empty()) return radial[sup_dist(m, n)];
    return hopping_entry(spec, m, n);
  }
};

}  // namespace

AssembledOperator assemble_dual(const OperatorSpec& spec, const SiteSet& sites, int scale,
                                const std::optional<TorusPoint>& theta) {
  if (spec.family != Family::Dual) throw Error(ErrorCode::Validation, "assemble_dual needs a DUAL spec");
  spec.validate();
  if (sites.dim() != spec.dim()) throw Error(ErrorCode::DimensionMismatch, "region dim differs from spec dim");
  AssembledOperator op;
  op.spec = spec;
  op.sites = sites;
  op.scale = scale;
  op.phase = theta ? *theta : spec.phase;
  if (op.phase.dim() != spec.dim()) throw Error(ErrorCode::DimensionMismatch, "theta dim differs from spec dim");
  const size_t n = sites.size();
  op.matrix.resize(n, n);
  HoppingTable hop(spec, diam(sites));
  const OrbitEvaluator f(spec.analytic, spec.omega, ShiftMode::Componentwise);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < i; ++j) {
      const double h = hop(sites[i], sites[j]);
      op.matrix(i, j) = h;
      op.matrix(j, i) = h;
    }
    op.matrix(i, i) = hop(sites[i], sites[i]) + f.at(op.phase, sites[i]);
  }
  op.tail_bound = spec.lambda * truncation_tail_bound(spec.v, spec.v.truncation_radius);
  return op;
}

AssembledOperator assemble_dual(const OperatorSpec& spec, const Region& region,
                                const std::optional<TorusPoint>& theta) {
  AssembledOperator op = assemble_dual(spec, region_points(region), region.size, theta);
  op.region = region;
  return op;
}

AssembledOperator assemble_direct(const OperatorSpec& spec, int N, const std::optional<TorusPoint>& x) {
  if (spec.family != Family::Direct) throw Error(ErrorCode::Validation, "assemble_direct needs a DIRECT spec");
  spec.validate();
  if (N < 0) throw Error(ErrorCode::Validation, "interval size must be >= 0");
  AssembledOperator op;
  op.spec = spec;
  op.region = Region::cube(1, N);
  op.sites = region_points(*op.region);
  op.scale = N;
  op.phase = x ? *x : spec.phase;
  if (op.phase.dim() != spec.dim()) throw Error(ErrorCode::DimensionMismatch, "x dim differs from spec dim");
  const size_t n = op.sites.size();
  op.matrix.setZero(n, n);
  for (const auto& [k, c] : spec.analytic.coeffs) {
    for (size_t i = 0; i < n; ++i) {
      const long j = static_cast<long>(i) - k[0];
      if (j >= 0 && j < static_cast<long>(n)) op.matrix(i, j) += c.real();
    }
  }
  // v(x + l w) with the componentwise orbit, as a trig polynomial of radius R
  const AnalyticPotential vpoly = AnalyticPotential::from_symbol(spec.v);
  const OrbitEvaluator v(vpoly, spec.omega, ShiftMode::Componentwise);
  for (size_t i = 0; i < n; ++i) {
    Site l{};
    for (int t = 0; t < spec.dim(); ++t) l[t] = op.sites[i][0];
    op.matrix(i, i) += spec.lambda * v.at(op.phase, l);
  }
  op.tail_bound = spec.lambda * truncation_tail_bound(spec.v, spec.v.truncation_radius);
  return op;
}

AssembledOperator restrict_to(const AssembledOperator& op, const SiteSet& sub, int scale) {
  AssembledOperator r;
  r.spec = op.spec;
  r.sites = sub;
  r.scale = scale;
  r.phase = op.phase;
  r.tail_bound = op.tail_bound;
  std::vector<long> idx;
  for (const Site& s : sub.points()) {
    const long i = op.sites.index_of(s);
    if (i < 0) throw Error(ErrorCode::Validation, "restrict_to: site outside the operator's region");
    idx.push_back(i);
  }
  const size_t n = idx.size();
  r.matrix.resize(n, n);
  for (size_t a = 0; a < n; ++a)
    for (size_t b = 0; b < n; ++b) r.matrix(a, b) = op.matrix(idx[a], idx[b]);
  return r;
}

double hermiticity_residual(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

}  // namespace gev
