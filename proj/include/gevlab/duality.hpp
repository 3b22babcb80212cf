#pragma once

#include <complex>
#include <vector>

#include "gevlab/spectral.hpp"

namespace gev {

// DUAL lam T_v + f(theta + n w), f(theta) = g(theta_1 + ... + theta_d)  <->  DIRECT T_g + lam v(x + l w).
// lam, v, w and the phase carry over unchanged, so dual(dual(s)) == s.
// NotDualizable when f has a mode off the diagonal (m, ..., m) or a complex diagonal coefficient.
OperatorSpec aubry_dual_map(const OperatorSpec& spec);

// F(theta) = sum_{|l| <= N} psi_l e^{2 pi i l theta}, psi indexed l = -N..N
std::complex<double> fourier_eval(const std::vector<double>& psi, double theta);
// F at theta_j = j/P, P >= 2N+1
std::vector<std::complex<double>> fourier_samples(const std::vector<double>& psi, int P);
// psi back from P >= 2N+1 samples
std::vector<double> inverse_fourier_samples(const std::vector<std::complex<double>>& F, int N);
// | ||F||_{L2, P points} - ||psi|| |
double parseval_residual(const std::vector<double>& psi, int P);

// xi_n = e^{2 pi i n.x} F(theta + n.w) for n in `sites`
std::vector<std::complex<double>> dual_vector(const std::vector<double>& psi, const TorusPoint& x,
                                              const FrequencyVector& omega, double theta, const SiteSet& sites);

struct DualityComparison {
  SpectrumEstimate direct, dual;
  double hausdorff = 0.0;
  double budget = 0.0;  // both truncation budgets plus both resolutions
};

// spectrum_direct for the DIRECT operator and for its DUAL partner; `spec` may be either family
DualityComparison duality_compare(const OperatorSpec& spec, const DirectSweep& direct, const DirectSweep& dual,
                                  const Mapper& map = serial_map);

}  // namespace gev
