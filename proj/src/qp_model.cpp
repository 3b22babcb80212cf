#include "gevlab/qp_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "gevlab/errors.hpp"

namespace gev {

const char* error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::Validation: return "VALIDATION";
    case ErrorCode::DimensionMismatch: return "DIMENSION_MISMATCH";
    case ErrorCode::CorruptCoefficients: return "CORRUPT_COEFFICIENTS";
    case ErrorCode::Infeasible: return "INFEASIBLE";
    case ErrorCode::NotDualizable: return "NOT_DUALIZABLE";
    case ErrorCode::Singular: return "SINGULAR";
    case ErrorCode::Diverged: return "DIVERGED";
    case ErrorCode::UncoveredPoint: return "UNCOVERED_POINT";
    case ErrorCode::HypothesisViolated: return "HYPOTHESIS_VIOLATED";
    case ErrorCode::NoGoodAnnulus: return "NO_GOOD_ANNULUS";
  }
  return "UNKNOWN";
}

bool Error::numerical() const {
  switch (code_) {
    case ErrorCode::Singular:
    case ErrorCode::Diverged:
    case ErrorCode::UncoveredPoint:
    case ErrorCode::HypothesisViolated:
    case ErrorCode::NoGoodAnnulus:
      return true;
    default:
      return false;
  }
}

Site make_site(const std::vector<int>& v) {
  if (v.size() > static_cast<size_t>(kMaxDim))
    throw Error(ErrorCode::DimensionMismatch, "site dimension exceeds " + std::to_string(kMaxDim));
  Site s{};
  for (size_t i = 0; i < v.size(); ++i) s[i] = v[i];
  return s;
}

std::vector<int> site_vector(const Site& s, int dim) { return {s.begin(), s.begin() + dim}; }

std::string site_string(const Site& s, int dim) {
  std::ostringstream os;
  for (int i = 0; i < dim; ++i) os << (i ? " " : "") << s[i];
  return os.str();
}

double wrap01(double x) {
  double r = x - std::floor(x);
  if (r >= 1.0) r = 0.0;  // x slightly below an integer
  return r;
}

TorusPoint::TorusPoint(std::vector<double> c) : coords(std::move(c)) {
  for (double& x : coords) x = wrap01(x);
}

static double dist_to_int(double x) { return std::abs(x - std::round(x)); }

FrequencyVector make_frequency(const std::vector<double>& coords, int range) {
  const int d = static_cast<int>(coords.size());
  if (d < 1 || d > kMaxDim) throw Error(ErrorCode::Validation, "frequency dimension out of range");
  FrequencyVector w;
  for (double x : coords) w.coords.push_back(wrap01(x));
  if (range <= 0) range = d == 1 ? 256 : (d == 2 ? 48 : (d == 3 ? 12 : 6));
  w.quality_range = range;
  double worst = 0.0;
  Site n{};
  // odometer over [-range, range]^d
  for (int i = 0; i < d; ++i) n[i] = -range;
  while (true) {
    const int s = sup_norm(n);
    if (s > 0) {
      double dot = 0.0;
      for (int i = 0; i < d; ++i) dot += n[i] * w.coords[i];
      const double dd = dist_to_int(dot);
      if (dd == 0.0)
        throw Error(ErrorCode::Validation, "frequency is rationally dependent at n=(" +
                                               site_string(n, d) + ")");
      if (s >= 2) worst = std::max(worst, -std::log(dd) / std::log(static_cast<double>(s)));
    }
    int i = 0;
    while (i < d && ++n[i] > range) n[i++] = -range;
    if (i == d) break;
  }
  w.diophantine_log_quality = worst;
  return w;
}

FrequencyVector default_frequency(int d) {
  static const int primes[kMaxDim] = {2, 3, 5, 7};
  if (d < 1 || d > kMaxDim) throw Error(ErrorCode::Validation, "dimension out of range");
  std::vector<double> c;
  for (int i = 0; i < d; ++i) {
    const double r = std::sqrt(static_cast<double>(primes[i]));
    c.push_back(r - std::floor(r));
  }
  return make_frequency(c);
}

TorusPoint shift_orbit(const TorusPoint& theta, const FrequencyVector& omega, const Site& n,
                       ShiftMode mode) {
  const int d = omega.dim();
  if (mode == ShiftMode::Componentwise) {
    if (theta.dim() != d) throw Error(ErrorCode::DimensionMismatch, "shift_orbit: theta/omega dims");
    std::vector<double> c(d);
    for (int i = 0; i < d; ++i) c[i] = theta.coords[i] + n[i] * omega.coords[i];
    return TorusPoint(c);
  }
  if (theta.dim() != 1) throw Error(ErrorCode::DimensionMismatch, "shift_orbit: INNER needs 1-d x");
  double x = theta.coords[0];
  for (int i = 0; i < d; ++i) x += n[i] * omega.coords[i];
  return TorusPoint({x});
}

double canonical_coefficient(double rho, double gamma, int sup) {
  return std::exp(-rho * std::pow(static_cast<double>(sup), gamma));
}

static void check_symbol_params(double rho, double gamma, int dim, int radius) {
  if (!(rho > 0)) throw Error(ErrorCode::Validation, "symbol rho must be positive");
  if (!(gamma > 0 && gamma <= 1)) throw Error(ErrorCode::Validation, "symbol gamma must be in (0,1]");
  if (dim < 1 || dim > kMaxDim) throw Error(ErrorCode::Validation, "symbol dim out of range");
  if (radius < 0) throw Error(ErrorCode::Validation, "symbol radius must be nonnegative");
}

GevreySymbol GevreySymbol::canonical(double rho, double gamma, int dim, int radius) {
  check_symbol_params(rho, gamma, dim, radius);
  GevreySymbol s;
  s.rho = rho;
  s.gamma = gamma;
  s.dim = dim;
  s.truncation_radius = radius;
  s.rule = SymbolRule::Canonical;
  return s;
}

GevreySymbol GevreySymbol::from_table(double rho, double gamma, int dim, int radius,
                                      std::map<Site, double> table) {
  check_symbol_params(rho, gamma, dim, radius);
  for (const auto& [n, v] : table) {
    for (int i = dim; i < kMaxDim; ++i)
      if (n[i] != 0) throw Error(ErrorCode::DimensionMismatch, "table index beyond symbol dim");
    if (sup_norm(n) > radius) throw Error(ErrorCode::Validation, "table index beyond radius");
    auto it = table.find(-n);
    const double mirror = it == table.end() ? 0.0 : it->second;
    if (mirror != v) throw Error(ErrorCode::Validation, "symbol table is not even in n");
  }
  GevreySymbol s;
  s.rho = rho;
  s.gamma = gamma;
  s.dim = dim;
  s.truncation_radius = radius;
  s.rule = SymbolRule::Table;
  s.table = std::move(table);
  return s;
}

double symbol_coefficient(const GevreySymbol& s, const Site& n) {
  const int k = sup_norm(n);
  if (k > s.truncation_radius) return 0.0;
  if (s.rule == SymbolRule::Canonical) return canonical_coefficient(s.rho, s.gamma, k);
  auto it = s.table.find(n);
  return it == s.table.end() ? 0.0 : it->second;
}

GevreyReport verify_gevrey(const GevreySymbol& s) {
  GevreyReport r;
  if (s.rule == SymbolRule::Canonical) {
    // equality case by definition
    r.pass = true;
    r.worst_ratio = 1.0;
    return r;
  }
  bool first = true;
  for (const auto& [n, v] : s.table) {
    const double ratio = std::abs(v) * std::exp(s.rho * std::pow(sup_norm(n), s.gamma));
    if (first || ratio > r.worst_ratio) {
      r.worst_ratio = ratio;
      r.worst_n = n;
      first = false;
    }
  }
  r.pass = r.worst_ratio <= 1.0 + 1e-12;
  return r;
}

double shell_count(int dim, int k) {
  if (k == 0) return 1.0;
  return std::pow(2.0 * k + 1, dim) - std::pow(2.0 * k - 1, dim);
}

double gevrey_tail(double rho, double gamma, int dim, int R) {
  // terms c(k) e^{-rho k^gamma} peak near k* = ((dim-1)/(rho gamma))^{1/gamma}
  const double kpeak = dim > 1 ? std::pow((dim - 1) / (rho * gamma), 1.0 / gamma) : 0.0;
  double sum = 0.0;
  for (long k = static_cast<long>(R) + 1;; ++k) {
    const double e = -rho * std::pow(static_cast<double>(k), gamma);
    const double term = shell_count(dim, static_cast<int>(std::min<long>(k, 1L << 30))) * std::exp(e);
    sum += term;
    if (term < 1e-18 && k > kpeak) break;
    if (k - R > 100000000L) break;
  }
  return sum;
}

double truncation_tail_bound(const GevreySymbol& s, int R) {
  if (R < 0) throw Error(ErrorCode::Validation, "tail radius must be >= 0");
  return gevrey_tail(s.rho, s.gamma, s.dim, R);
}

double gevrey_envelope_sum(double rho, double gamma, int dim) { return 1.0 + gevrey_tail(rho, gamma, dim, 0); }

double symbol_l1(const GevreySymbol& s) {
  if (s.rule == SymbolRule::Table) {
    double sum = 0.0;
    for (const auto& kv : s.table) sum += std::abs(kv.second);
    return sum;
  }
  double sum = 0.0;
  for (int k = 0; k <= s.truncation_radius; ++k) {
    const double term = shell_count(s.dim, k) * canonical_coefficient(s.rho, s.gamma, k);
    sum += term;
    if (term < 1e-18 && k > 4) break;
  }
  return sum;
}

AnalyticPotential AnalyticPotential::from_coeffs(int dim,
                                                 std::map<Site, std::complex<double>> coeffs) {
  if (dim < 1 || dim > kMaxDim) throw Error(ErrorCode::Validation, "potential dim out of range");
  for (const auto& [k, c] : coeffs) {
    for (int i = dim; i < kMaxDim; ++i)
      if (k[i] != 0) throw Error(ErrorCode::DimensionMismatch, "fourier index beyond potential dim");
    auto it = coeffs.find(-k);
    const std::complex<double> mirror = it == coeffs.end() ? 0.0 : it->second;
    if (std::abs(mirror - std::conj(c)) > 1e-14 * std::max(1.0, std::abs(c)))
      throw Error(ErrorCode::CorruptCoefficients, "potential is not real-valued: f_{-k} != conj(f_k)");
  }
  AnalyticPotential f;
  f.dim = dim;
  for (auto& [k, c] : coeffs)
    if (c != 0.0) f.coeffs.emplace(k, c);
  return f;
}

AnalyticPotential AnalyticPotential::two_cos(int dim) {
  Site k{};
  for (int i = 0; i < dim; ++i) k[i] = 1;
  return from_coeffs(dim, {{k, 1.0}, {-k, 1.0}});
}

AnalyticPotential AnalyticPotential::from_symbol(const GevreySymbol& s) {
  std::map<Site, std::complex<double>> c;
  const int R = s.truncation_radius;
  if (s.rule == SymbolRule::Table) {
    for (const auto& [n, v] : s.table) c[n] = v;
  } else {
    Site n{};
    for (int i = 0; i < s.dim; ++i) n[i] = -R;
    while (true) {
      c[n] = canonical_coefficient(s.rho, s.gamma, sup_norm(n));
      int i = 0;
      while (i < s.dim && ++n[i] > R) n[i++] = -R;
      if (i == s.dim) break;
    }
  }
  return from_coeffs(s.dim, std::move(c));
}

double evaluate_potential(const AnalyticPotential& f, const TorusPoint& theta) {
  if (theta.dim() != f.dim) throw Error(ErrorCode::DimensionMismatch, "evaluate_potential: dims");
  std::complex<double> sum = 0.0;
  double scale = 0.0;
  for (const auto& [k, c] : f.coeffs) {
    double phase = 0.0;
    for (int i = 0; i < f.dim; ++i) phase += k[i] * theta.coords[i];
    sum += c * std::polar(1.0, 2.0 * std::numbers::pi * phase);
    scale += std::abs(c);
  }
  if (std::abs(sum.imag()) > 1e-12 * std::max(1.0, scale))
    throw Error(ErrorCode::CorruptCoefficients, "potential has an imaginary residue");
  return sum.real();
}

double derivative_bound(const AnalyticPotential& f, int j) {
  double s = 0.0;
  for (const auto& [k, c] : f.coeffs) s += 2.0 * std::numbers::pi * std::abs(k[j]) * std::abs(c);
  return s;
}

static std::pair<double, double> mean_and_rest(const AnalyticPotential& f) {
  double c0 = 0.0, rest = 0.0;
  for (const auto& [k, c] : f.coeffs) {
    if (sup_norm(k) == 0)
      c0 = c.real();
    else
      rest += std::abs(c);
  }
  return {c0, rest};
}

double potential_min_bound(const AnalyticPotential& f) {
  auto [c0, rest] = mean_and_rest(f);
  return c0 - rest;
}

double potential_max_bound(const AnalyticPotential& f) {
  auto [c0, rest] = mean_and_rest(f);
  return c0 + rest;
}

OrbitEvaluator::OrbitEvaluator(const AnalyticPotential& f, const FrequencyVector& omega,
                               ShiftMode mode)
    : omega_(omega.coords), mode_(mode), dim_(f.dim) {
  for (const auto& [k, c] : f.coeffs) {
    k_.push_back(k);
    c_.push_back(c);
  }
}

double OrbitEvaluator::at(const TorusPoint& theta, const Site& n) const {
  double sum = 0.0;
  for (size_t t = 0; t < k_.size(); ++t) {
    double phase = 0.0;
    if (mode_ == ShiftMode::Componentwise) {
      for (int i = 0; i < dim_; ++i) phase += k_[t][i] * (theta.coords[i] + n[i] * omega_[i]);
    } else {
      // f is 1-d here, argument x + n.w
      double x = theta.coords[0];
      for (size_t i = 0; i < omega_.size(); ++i) x += n[i] * omega_[i];
      phase = k_[t][0] * x;
    }
    phase -= std::floor(phase);
    const double a = 2.0 * std::numbers::pi * phase;
    sum += c_[t].real() * std::cos(a) - c_[t].imag() * std::sin(a);
  }
  return sum;
}

NondegeneracyReport nondegeneracy_check(const AnalyticPotential& f, int line_samples,
                                        int section_samples, double floor) {
  if (line_samples < 8 || section_samples < 8)
    throw Error(ErrorCode::Validation, "nondegeneracy_check needs >= 8 samples");
  NondegeneracyReport r;
  r.floor = floor;
  const int d = f.dim;
  // Kronecker sequence for the transverse coordinates
  const double alpha[kMaxDim] = {0.7548776662466927, 0.5698402909980532, 0.6180339887498949,
                                 0.4142135623730951};
  const int sections = d == 1 ? 1 : section_samples;
  double overall = std::numeric_limits<double>::infinity();
  for (int j = 0; j < d; ++j) {
    double worst = std::numeric_limits<double>::infinity();
    for (int s = 0; s < sections; ++s) {
      std::vector<double> th(d);
      for (int i = 0; i < d; ++i) th[i] = wrap01((s + 0.5) * alpha[i]);
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (int t = 0; t < line_samples; ++t) {
        th[j] = static_cast<double>(t) / line_samples;
        const double v = evaluate_potential(f, TorusPoint(th));
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      worst = std::min(worst, hi - lo);
    }
    r.per_coordinate.push_back(worst);
    overall = std::min(overall, worst);
  }
  r.min_oscillation = overall;
  r.nondegenerate = overall > floor;
  return r;
}

}  // namespace gev
