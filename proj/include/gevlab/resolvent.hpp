#pragma once

#include <map>
#include <string>
#include <vector>

#include "gevlab/greens.hpp"

namespace gev {

struct IdentityResidual {
  double absolute = 0.0;
  double relative = 0.0;  // absolute / max(1, ||G_Lambda|| ||G_Lambda1||)
};

// G_L(m,n) = G_1(m,n) chi_1(n) - sum G_1(m,n') H(n',n'') G_L(n'',n), m in Lambda1, n in Lambda
IdentityResidual resolvent_identity_residual(const AssembledOperator& op, const SiteSet& part1, double E,
                                             double eps = 0.0);

struct RegionLess {
  bool operator()(const Region& a, const Region& b) const;
};

// Green's functions of sub-blocks R_W H R_W at one energy, cached per block
class BlockGreens {
 public:
  BlockGreens(const AssembledOperator& op, double E) : op_(&op), energy_(E) {}
  const GreenEvaluation& get(const Region& w);  // propagates Singular
  double energy() const { return energy_; }

 private:
  const AssembledOperator* op_;
  double energy_;
  std::map<Region, GreenEvaluation, RegionLess> cache_;
};

struct BlockSolveResult {
  Eigen::MatrixXd G;
  double contraction = 0.0;  // q = max row sum of |L|
  double b_norm = 0.0;       // ||B||_inf
  double error_bound = 0.0;  // sup-norm bound on G - G_approx
  double residual = 0.0;     // ||(H - E) G_approx - I||_max
  int iterations = 0;
};

// X <- B + L X from the block form of the resolvent identity; Diverged when q > 1/2
BlockSolveResult block_resolvent_solve(const AssembledOperator& op, const Cover& cover, BlockGreens& blocks,
                                       double tol = 1e-14, int max_iter = 500);

struct PerturbationReport {
  double inv_a_norm = 0.0, inv_b_norm = 0.0;
  bool hyp_norm = false, hyp_decay = false, hyp_perturbation = false;
  bool conc_norm = false, conc_entry = false;
  double worst_perturbation_ratio = 0.0;  // max |B-A| / allowed
  bool hypotheses() const { return hyp_norm && hyp_decay && hyp_perturbation; }
  // conclusions are only asserted when every hypothesis holds
  bool asserted() const { return hypotheses(); }
  bool conclusions() const { return conc_norm && conc_entry; }
};

PerturbationReport perturbation_lemma_check(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                            const SiteSet& sites, double rho_bar, int N, double gamma);

// block acceptance for the paving lemma: ||G_W|| <= 2e^{m^{gamma/2}} and
// |G_W(n,n')| <= 2e^{-rho_bar|n-n'|^gamma} for 10|n-n'| >= m
bool paving_block_verified(const GreenEvaluation& gw, int m, double rho_bar);

struct PavingCertificate {
  int M = 0, M1 = 0;
  size_t blocks = 0;
  double contraction = 0.0;
  double formula_bound = 0.0;  // 4 (2 M1 + 1)^d e^{M1^{gamma/2}}
  double schur_bound = 0.0;    // ||B||_inf / (1 - q)
  bool cross_checked = false;
  double direct_norm = 0.0;
  double slack = 0.0;  // formula_bound / direct_norm
  Cover cover;
};

// certificate from an existing cover; HypothesisViolated when q > 1/2
PavingCertificate paving_certify(const AssembledOperator& op, const Cover& cover, BlockGreens& blocks, int M,
                                 int M1, bool cross_check);
// paves op.sites with verified blocks of size M..M1; UncoveredPoint if some site has none
PavingCertificate paving_norm_certify(const AssembledOperator& op, int M, int M1, double E, double rho_bar,
                                      bool cross_check = false);

struct Hypothesis {
  std::string name;
  bool holds = false;
  bool gating = true;
  double value = 0.0, threshold = 0.0;
};

struct AnnulusSetup {
  SiteSet core;
  int M0 = 16;
  int M_max = 0;            // 0 means N
  double crude_norm = 0.0;  // supplied bound on ||G_Lambda||
  double c_res2 = 1.0;
  double rho_bar = 0.4;
  double rho = 1.0;
  double energy = 0.0;
};

struct AnnulusCertificate {
  std::vector<Hypothesis> hypotheses;
  double rate = 0.0;  // rho_bar - C / M0^{gamma/2}
  bool evaluated = false;
  bool conclusion_holds = false;
  size_t pairs = 0, violations = 0, unresolved = 0;
  double worst_excess = -1e300;
  Site worst_m{}, worst_n{};
  double direct_norm = 0.0;
  Cover shell_cover;

  bool gating_ok() const;
  std::string failed() const;  // names of failed gating hypotheses
};

double annulus_rate(double rho_bar, double c_res2, int M0, double gamma);

// evaluates hypotheses and, when the gating ones hold, the decay conclusion on the direct G_Lambda
AnnulusCertificate annulus_decay_evaluate(const AssembledOperator& op, const AnnulusSetup& s);
// same, throwing HypothesisViolated on a failed gating hypothesis
AnnulusCertificate annulus_decay_certify(const AssembledOperator& op, const AnnulusSetup& s);

}  // namespace gev
