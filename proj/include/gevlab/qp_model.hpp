#pragma once

#include <complex>
#include <map>
#include <vector>

#include "gevlab/site.hpp"

namespace gev {

double wrap01(double x);

struct TorusPoint {
  std::vector<double> coords;

  TorusPoint() = default;
  explicit TorusPoint(std::vector<double> c);  // wraps every coordinate
  int dim() const { return static_cast<int>(coords.size()); }
  double operator[](int i) const { return coords[i]; }
  bool operator==(const TorusPoint&) const = default;
};

struct FrequencyVector {
  std::vector<double> coords;
  double diophantine_log_quality = 0.0;  // worst -log||n.w|| / log|n| over 0<|n|<=quality_range
  int quality_range = 0;

  int dim() const { return static_cast<int>(coords.size()); }
  bool operator==(const FrequencyVector& o) const { return coords == o.coords; }
};

// throws Validation if n.w is an integer for some 0<|n|<=range
FrequencyVector make_frequency(const std::vector<double>& coords, int range = 0);
// frac(sqrt(p_i)) for the first d primes
FrequencyVector default_frequency(int d);

enum class ShiftMode { Componentwise, Inner };

TorusPoint shift_orbit(const TorusPoint& theta, const FrequencyVector& omega, const Site& n,
                       ShiftMode mode);

enum class SymbolRule { Canonical, Table };

struct GevreySymbol {
  double rho = 1.0;
  double gamma = 1.0;
  SymbolRule rule = SymbolRule::Canonical;
  int dim = 1;
  int truncation_radius = 16;
  std::map<Site, double> table;

  static GevreySymbol canonical(double rho, double gamma, int dim, int radius);
  // validates v_{-n} = v_n and |n| <= radius
  static GevreySymbol from_table(double rho, double gamma, int dim, int radius,
                                 std::map<Site, double> table);
  bool operator==(const GevreySymbol&) const = default;
};

double symbol_coefficient(const GevreySymbol& s, const Site& n);
// coefficient as a function of |n| only, valid for the canonical rule
double canonical_coefficient(double rho, double gamma, int sup);

struct GevreyReport {
  bool pass = true;
  Site worst_n{};
  double worst_ratio = 0.0;
};

GevreyReport verify_gevrey(const GevreySymbol& s);

// number of n in Z^d with |n| = k
double shell_count(int dim, int k);
// sum_{|n|>R} e^{-rho|n|^gamma}
double gevrey_tail(double rho, double gamma, int dim, int R);
double truncation_tail_bound(const GevreySymbol& s, int R);
// sum over all of Z^d of e^{-rho|n|^gamma}, bounds ||T_v|| by Schur's test
double gevrey_envelope_sum(double rho, double gamma, int dim);
// sum_{|n|<=R} |v_n|, exact Schur bound of the truncated Toeplitz part
double symbol_l1(const GevreySymbol& s);

struct AnalyticPotential {
  int dim = 1;
  std::map<Site, std::complex<double>> coeffs;

  // validates f_{-k} = conj(f_k)
  static AnalyticPotential from_coeffs(int dim, std::map<Site, std::complex<double>> coeffs);
  // 2cos(2 pi (theta_1 + ... + theta_d)), which is 2cos 2 pi theta at d=1
  static AnalyticPotential two_cos(int dim);
  // trigonometric polynomial with the symbol's coefficients up to its radius
  static AnalyticPotential from_symbol(const GevreySymbol& s);
  bool operator==(const AnalyticPotential&) const = default;
};

double evaluate_potential(const AnalyticPotential& f, const TorusPoint& theta);
// sum_k 2 pi |k_j| |f_k|, a bound on sup |d f / d theta_j|
double derivative_bound(const AnalyticPotential& f, int j);
double potential_min_bound(const AnalyticPotential& f);  // f_0 - sum_{k!=0}|f_k|
double potential_max_bound(const AnalyticPotential& f);

// fast evaluation of f at theta + n w for many n
class OrbitEvaluator {
 public:
  OrbitEvaluator(const AnalyticPotential& f, const FrequencyVector& omega, ShiftMode mode);
  double at(const TorusPoint& theta, const Site& n) const;

 private:
  std::vector<Site> k_;
  std::vector<std::complex<double>> c_;
  std::vector<double> omega_;
  ShiftMode mode_;
  int dim_;
};

struct NondegeneracyReport {
  double min_oscillation = 0.0;
  std::vector<double> per_coordinate;  // min over sections for each j
  double floor = 1e-3;
  bool nondegenerate = false;
};

NondegeneracyReport nondegeneracy_check(const AnalyticPotential& f, int line_samples,
                                        int section_samples, double floor = 1e-3);

}  // namespace gev
