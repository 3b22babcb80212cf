#include "gevlab/duality.hpp"

#include <cmath>
#include <numbers>

#include "gevlab/errors.hpp"

namespace gev {

OperatorSpec aubry_dual_map(const OperatorSpec& spec) {
  spec.validate();
  const int d = spec.dim();
  OperatorSpec out = spec;
  std::map<Site, std::complex<double>> c;
  if (spec.family == Family::Dual) {
    for (const auto& [k, a] : spec.analytic.coeffs) {
      for (int i = 1; i < d; ++i)
        if (k[i] != k[0]) throw Error(ErrorCode::NotDualizable, "f has a Fourier mode off the diagonal");
      if (a.imag() != 0.0) throw Error(ErrorCode::NotDualizable, "f has a complex diagonal coefficient");
      Site m{};
      m[0] = k[0];
      c[m] = a;
    }
    out.family = Family::Direct;
    out.analytic = AnalyticPotential::from_coeffs(1, c);
  } else {
    for (const auto& [k, a] : spec.analytic.coeffs) {
      Site m{};
      for (int i = 0; i < d; ++i) m[i] = k[0];
      c[m] = a;
    }
    out.family = Family::Dual;
    out.analytic = AnalyticPotential::from_coeffs(d, c);
  }
  return out;
}

namespace {

constexpr double kTwoPi = 2 * std::numbers::pi;

int half_width(size_t n) {
  if (n % 2 == 0) throw Error(ErrorCode::Validation, "psi must have odd length 2N+1");
  return static_cast<int>(n / 2);
}

}  // namespace

std::complex<double> fourier_eval(const std::vector<double>& psi, double theta) {
  const int N = half_width(psi.size());
  std::complex<double> s = 0.0;
  for (int l = -N; l <= N; ++l) s += psi[l + N] * std::polar(1.0, kTwoPi * l * theta);
  return s;
}

std::vector<std::complex<double>> fourier_samples(const std::vector<double>& psi, int P) {
  const int N = half_width(psi.size());
  if (P < 2 * N + 1) throw Error(ErrorCode::Validation, "need P >= 2N+1 samples");
  std::vector<std::complex<double>> F(P);
  // phases taken mod P keep the argument small and the sum exact to rounding
  for (int j = 0; j < P; ++j) {
    std::complex<double> s = 0.0;
    for (int l = -N; l <= N; ++l) {
      const long r = ((static_cast<long>(l) * j) % P + P) % P;
      s += psi[l + N] * std::polar(1.0, kTwoPi * r / P);
    }
    F[j] = s;
  }
  return F;
}

std::vector<double> inverse_fourier_samples(const std::vector<std::complex<double>>& F, int N) {
  const int P = static_cast<int>(F.size());
  if (P < 2 * N + 1) throw Error(ErrorCode::Validation, "need P >= 2N+1 samples");
  std::vector<double> psi(2 * N + 1);
  for (int l = -N; l <= N; ++l) {
    std::complex<double> s = 0.0;
    for (int j = 0; j < P; ++j) {
      const long r = ((static_cast<long>(l) * j) % P + P) % P;
      s += F[j] * std::polar(1.0, -kTwoPi * r / P);
    }
    psi[l + N] = s.real() / P;
  }
  return psi;
}

double parseval_residual(const std::vector<double>& psi, int P) {
  const auto F = fourier_samples(psi, P);
  double f2 = 0.0, p2 = 0.0;
  for (const auto& z : F) f2 += std::norm(z);
  for (double x : psi) p2 += x * x;
  return std::abs(std::sqrt(f2 / P) - std::sqrt(p2));
}

std::vector<std::complex<double>> dual_vector(const std::vector<double>& psi, const TorusPoint& x,
                                              const FrequencyVector& omega, double theta, const SiteSet& sites) {
  const int d = omega.dim();
  if (x.dim() != d || sites.dim() != d) throw Error(ErrorCode::DimensionMismatch, "x, omega and sites differ in dim");
  std::vector<std::complex<double>> xi(sites.size());
  for (size_t i = 0; i < sites.size(); ++i) {
    double nx = 0.0, nw = 0.0;
    for (int t = 0; t < d; ++t) {
      nx += sites[i][t] * x[t];
      nw += sites[i][t] * omega.coords[t];
    }
    xi[i] = std::polar(1.0, kTwoPi * wrap01(nx)) * fourier_eval(psi, wrap01(theta + nw));
  }
  return xi;
}

DualityComparison duality_compare(const OperatorSpec& spec, const DirectSweep& direct, const DirectSweep& dual,
                                  const Mapper& map) {
  const OperatorSpec other = aubry_dual_map(spec);
  const OperatorSpec& d_spec = spec.family == Family::Direct ? spec : other;
  const OperatorSpec& h_spec = spec.family == Family::Dual ? spec : other;
  DualityComparison c;
  c.direct = spectrum_direct(d_spec, direct, map);
  c.dual = spectrum_direct(h_spec, dual, map);
  c.hausdorff = hausdorff_distance(c.direct.intervals, c.dual.intervals);
  c.budget = c.direct.budget + c.dual.budget + c.direct.resolution + c.dual.resolution;
  return c;
}

}  // namespace gev
