#include "gevlab/resolvent.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <tuple>

#include "gevlab/errors.hpp"

namespace gev {

namespace {

Eigen::MatrixXcd as_complex(const GreenEvaluation& g) {
  Eigen::MatrixXcd m(g.size(), g.size());
  m.real() = g.re;
  if (g.im.size()) m.imag() = g.im;
  else m.imag().setZero();
  return m;
}

std::vector<long> indices_in(const SiteSet& big, const SiteSet& sub) {
  std::vector<long> idx;
  idx.reserve(sub.size());
  for (const Site& s : sub.points()) {
    const long i = big.index_of(s);
    if (i < 0) throw Error(ErrorCode::Validation, "site " + site_string(s, big.dim()) + " outside the region");
    idx.push_back(i);
  }
  return idx;
}

}  // namespace

IdentityResidual resolvent_identity_residual(const AssembledOperator& op, const SiteSet& part1, double E,
                                             double eps) {
  IdentityResidual out;
  if (part1.empty()) return out;
  const SiteSet part2 = set_difference(op.sites, part1);
  const std::vector<long> i1 = indices_in(op.sites, part1), i2 = indices_in(op.sites, part2);
  const GreenEvaluation gl = green(op, E, eps);
  const GreenEvaluation g1 = green(restrict_to(op, part1, op.scale), E, eps);
  const Eigen::MatrixXcd GL = as_complex(gl), G1 = as_complex(g1);
  const long n = static_cast<long>(op.size()), n1 = static_cast<long>(i1.size()), n2 = static_cast<long>(i2.size());

  // right side, column order of Lambda
  Eigen::MatrixXcd rhs = Eigen::MatrixXcd::Zero(n1, n);
  for (long b = 0; b < n1; ++b) rhs.col(i1[b]) = G1.col(b);
  if (n2 > 0) {
    Eigen::MatrixXd coupling(n1, n2);
    for (long a = 0; a < n1; ++a)
      for (long c = 0; c < n2; ++c) coupling(a, c) = op.matrix(i1[a], i2[c]);
    Eigen::MatrixXcd g2rows(n2, n);
    for (long c = 0; c < n2; ++c) g2rows.row(c) = GL.row(i2[c]);
    rhs -= G1 * coupling.cast<std::complex<double>>() * g2rows;
  }
  for (long a = 0; a < n1; ++a)
    for (long j = 0; j < n; ++j) out.absolute = std::max(out.absolute, std::abs(GL(i1[a], j) - rhs(a, j)));
  out.relative = out.absolute / std::max(1.0, gl.op_norm * g1.op_norm);
  return out;
}

bool RegionLess::operator()(const Region& a, const Region& b) const {
  return std::tie(a.dim, a.size, a.center, a.shape.corner_removed, a.shape.signs) <
         std::tie(b.dim, b.size, b.center, b.shape.corner_removed, b.shape.signs);
}

const GreenEvaluation& BlockGreens::get(const Region& w) {
  auto it = cache_.find(w);
  if (it != cache_.end()) return it->second;
  const AssembledOperator sub = restrict_to(*op_, region_points(w), w.size);
  return cache_.emplace(w, Resolvent(sub).at(energy_)).first->second;
}

namespace {

// B(m,.) = G_W(m,.) on W(m); L(m,n'') = -sum_{n' in W} G_W(m,n') H(n',n'') for n'' outside W(m)
void block_system(const AssembledOperator& op, const Cover& cover, BlockGreens& blocks, Eigen::MatrixXd& B,
                  Eigen::MatrixXd& L) {
  const long n = static_cast<long>(op.size());
  if (cover.assignment.size() != op.size()) throw Error(ErrorCode::Validation, "cover does not match the region");
  B.setZero(n, n);
  L.setZero(n, n);
  std::vector<std::vector<long>> block_idx(cover.blocks.size());
  for (long i = 0; i < n; ++i) {
    const int b = cover.assignment[i];
    if (b < 0) throw Error(ErrorCode::UncoveredPoint, "site " + site_string(op.sites[i], op.sites.dim()) + " uncovered");
    const Region& w = cover.blocks[b];
    const GreenEvaluation& gw = blocks.get(w);
    if (block_idx[b].empty()) block_idx[b] = indices_in(op.sites, gw.sites);
    const std::vector<long>& idx = block_idx[b];
    const long r = gw.sites.index_of(op.sites[i]);
    if (r < 0) throw Error(ErrorCode::Validation, "cover block does not contain its site");
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
    for (size_t k = 0; k < idx.size(); ++k) {
      B(i, idx[k]) = gw.re(r, k);
      row.noalias() -= gw.re(r, k) * op.matrix.row(idx[k]);
    }
    for (long c : idx) row[c] = 0.0;
    L.row(i) = row;
  }
}

double inf_norm(const Eigen::MatrixXd& m) { return m.rows() ? m.cwiseAbs().rowwise().sum().maxCoeff() : 0.0; }

}  // namespace

BlockSolveResult block_resolvent_solve(const AssembledOperator& op, const Cover& cover, BlockGreens& blocks,
                                       double tol, int max_iter) {
  BlockSolveResult res;
  Eigen::MatrixXd B, L;
  block_system(op, cover, blocks, B, L);
  res.contraction = inf_norm(L);
  res.b_norm = inf_norm(B);
  if (res.contraction > 0.5)
    throw Error(ErrorCode::Diverged, "block iteration contraction " + std::to_string(res.contraction) + " > 1/2");
  const double q = res.contraction;
  Eigen::MatrixXd X = B;
  double step = 0.0;
  for (res.iterations = 1; res.iterations <= max_iter; ++res.iterations) {
    Eigen::MatrixXd next = B;
    next.noalias() += L * X;
    step = inf_norm(next - X);
    X = std::move(next);
    // a-posteriori contraction bound on the remaining error
    res.error_bound = q / (1.0 - q) * step;
    if (res.error_bound <= tol * std::max(1.0, res.b_norm)) break;
  }
  res.iterations = std::min(res.iterations, max_iter);
  Eigen::MatrixXd r = op.matrix * X - blocks.energy() * X;
  r.diagonal().array() -= 1.0;
  res.residual = r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
  res.G = std::move(X);
  return res;
}

PerturbationReport perturbation_lemma_check(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                            const SiteSet& sites, double rho_bar, int N, double gamma) {
  if (A.rows() != B.rows() || A.cols() != B.cols() || A.rows() != static_cast<long>(sites.size()))
    throw Error(ErrorCode::DimensionMismatch, "perturbation check: A, B and sites differ in size");
  PerturbationReport rep;
  const Resolvent ra(A, sites, N, gamma), rb(B, sites, N, gamma);
  rep.inv_a_norm = ra.norm_at(0.0);
  rep.inv_b_norm = rb.norm_at(0.0);
  if (!std::isfinite(rep.inv_a_norm) || !std::isfinite(rep.inv_b_norm))
    throw Error(ErrorCode::Singular, "perturbation check: singular matrix");
  const GreenEvaluation ia = ra.at(0.0), ib = rb.at(0.0);
  rep.hyp_norm = rep.inv_a_norm <= ldt_norm_threshold(N, gamma);
  rep.hyp_decay = true;
  rep.conc_entry = true;
  const double base = 3.0 * rho_bar * std::pow(static_cast<double>(N), gamma);
  const size_t n = sites.size();
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) {
      const int sep = sup_dist(sites[i], sites[j]);
      const double x = std::pow(static_cast<double>(sep), gamma);
      const double allowed = std::exp(-base - rho_bar * x);
      rep.worst_perturbation_ratio = std::max(rep.worst_perturbation_ratio, std::abs(B(i, j) - A(i, j)) / allowed);
      if (in_decay_range(sep, N) && std::abs(ia.re(i, j)) > std::max(std::exp(-rho_bar * x), ia.resolution()))
        rep.hyp_decay = false;
      if (std::abs(ib.re(i, j)) > std::abs(ia.re(i, j)) + std::exp(-rho_bar * x) + ib.resolution() + ia.resolution())
        rep.conc_entry = false;
    }
  }
  rep.hyp_perturbation = rep.worst_perturbation_ratio <= 1.0;
  rep.conc_norm = rep.inv_b_norm <= 2.0 * rep.inv_a_norm;
  return rep;
}

bool paving_block_verified(const GreenEvaluation& gw, int m, double rho_bar) {
  const double floor = gw.resolution();
  if (gw.op_norm > 2.0 * std::exp(std::pow(static_cast<double>(m), gw.gamma / 2.0))) return false;
  for (size_t i = 0; i < gw.size(); ++i) {
    for (size_t j = i + 1; j < gw.size(); ++j) {
      const int sep = sup_dist(gw.sites[i], gw.sites[j]);
      if (!in_decay_range(sep, m)) continue;
      if (gw.abs(i, j) > std::max(2.0 * std::exp(-rho_bar * std::pow(static_cast<double>(sep), gw.gamma)), floor))
        return false;
    }
  }
  return true;
}

PavingCertificate paving_certify(const AssembledOperator& op, const Cover& cover, BlockGreens& blocks, int M,
                                 int M1, bool cross_check) {
  PavingCertificate c;
  c.M = M;
  c.M1 = M1;
  c.blocks = cover.blocks.size();
  c.cover = cover;
  Eigen::MatrixXd B, L;
  block_system(op, cover, blocks, B, L);
  c.contraction = inf_norm(L);
  if (c.contraction > 0.5)
    throw Error(ErrorCode::HypothesisViolated,
                "paving contraction " + std::to_string(c.contraction) + " > 1/2 (large-M0 hypothesis)");
  const double gamma = op.spec.v.gamma;
  c.formula_bound = 4.0 * std::pow(2.0 * M1 + 1.0, op.sites.dim()) * std::exp(std::pow(double(M1), gamma / 2.0));
  // G symmetric, so ||G|| <= ||G||_inf <= ||B||_inf / (1 - q); small inflation covers rounding
  c.schur_bound = inf_norm(B) / (1.0 - c.contraction) * (1.0 + 1e-10);
  if (cross_check) {
    c.cross_checked = true;
    c.direct_norm = Resolvent(op).norm_at(blocks.energy());
    c.slack = c.formula_bound / c.direct_norm;
  }
  return c;
}

PavingCertificate paving_norm_certify(const AssembledOperator& op, int M, int M1, double E, double rho_bar,
                                      bool cross_check) {
  BlockGreens blocks(op, E);
  auto accept = [&](const Region& w) {
    try {
      return paving_block_verified(blocks.get(w), w.size, rho_bar);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::Singular) return false;
      throw;
    }
  };
  Cover cover;
  try {
    cover = pave_region(op.sites, M, M1, accept);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Infeasible) throw;
    throw Error(ErrorCode::UncoveredPoint, e.what());
  }
  return paving_certify(op, cover, blocks, M, M1, cross_check);
}

bool AnnulusCertificate::gating_ok() const {
  for (const auto& h : hypotheses)
    if (h.gating && !h.holds) return false;
  return true;
}

std::string AnnulusCertificate::failed() const {
  std::string s;
  for (const auto& h : hypotheses)
    if (h.gating && !h.holds) s += (s.empty() ? "" : ", ") + h.name;
  return s;
}

double annulus_rate(double rho_bar, double c_res2, int M0, double gamma) {
  return rho_bar - c_res2 / std::pow(static_cast<double>(M0), gamma / 2.0);
}

AnnulusCertificate annulus_decay_evaluate(const AssembledOperator& op, const AnnulusSetup& s) {
  AnnulusCertificate cert;
  const int N = op.scale, d = op.sites.dim();
  const double gamma = op.spec.v.gamma, Nd = static_cast<double>(N);
  const int M_max = s.M_max > 0 ? s.M_max : N;
  auto add = [&](std::string name, bool gating, double value, double threshold, bool holds) {
    cert.hypotheses.push_back({std::move(name), holds, gating, value, threshold});
  };
  const double diam_cap = std::pow(Nd, gamma / (3.0 * d));
  add("core_diameter", true, diam(s.core), diam_cap, diam(s.core) <= diam_cap);
  const double m0_floor = std::pow(std::log(Nd), 2.0 / gamma);
  add("M0_log_floor", false, s.M0, m0_floor, s.M0 >= m0_floor);
  const double lo = (1.0 - std::pow(5.0, -gamma)) / 10.0, hi = (1.0 - std::pow(5.0, -gamma)) * s.rho;
  add("rho_bar_range", true, s.rho_bar, hi, s.rho_bar >= lo && s.rho_bar <= hi);
  const double norm_cap = ldt_norm_threshold(N, gamma);
  add("crude_norm", true, s.crude_norm, norm_cap, s.crude_norm <= norm_cap);

  const Resolvent full(op);
  cert.direct_norm = full.norm_at(s.energy);
  add("direct_norm", true, cert.direct_norm, norm_cap, cert.direct_norm <= norm_cap);

  // shells: blocks W inside Lambda \ core with ||G_W|| <= e^{M^{gamma/2}} and decay at rho_bar
  const SiteSet shell = set_difference(op.sites, s.core);
  BlockGreens blocks(op, s.energy);
  auto accept = [&](const Region& w) {
    try {
      const GreenEvaluation& gw = blocks.get(w);
      if (gw.op_norm > ldt_norm_threshold(w.size, gamma)) return false;
      for (size_t i = 0; i < gw.size(); ++i)
        for (size_t j = i + 1; j < gw.size(); ++j) {
          const int sep = sup_dist(gw.sites[i], gw.sites[j]);
          if (in_decay_range(sep, w.size) &&
              gw.abs(i, j) > std::max(std::exp(-s.rho_bar * std::pow(double(sep), gamma)), gw.resolution()))
            return false;
        }
      return true;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::Singular) return false;
      throw;
    }
  };
  // points closer than M0/2 to the core cannot be deep inside a block avoiding it (always so at d=1);
  // they only need to lie in some verified shell block
  std::vector<Site> deep, collar;
  for (const Site& p : shell.points()) (2 * dist(p, s.core) >= s.M0 || s.core.empty() ? deep : collar).push_back(p);
  const SiteSet targets(d, deep);
  bool covered = true;
  try {
    cert.shell_cover = pave_region(shell, s.M0, M_max, accept, &targets);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Infeasible) throw;
    covered = false;
  }
  const size_t loose = collar.size();
  for (const Site& p : collar) {
    if (!covered) break;
    const long i = shell.index_of(p);
    bool inside = false;
    for (size_t b = 0; b < cert.shell_cover.blocks.size() && !inside; ++b)
      if (cert.shell_cover.blocks[b].contains(p)) {
        inside = true;
        cert.shell_cover.assignment[i] = static_cast<int>(b);
      }
    if (!inside) covered = false;
  }
  add("shell_coverage", true, covered ? 1.0 : 0.0, 1.0, covered);
  add("collar_distance", false, static_cast<double>(loose), 0.0, loose == 0);
  int largest = 0;
  for (const Region& w : cert.shell_cover.blocks) largest = std::max(largest, w.size);
  const double m_cap = std::pow(Nd, gamma / 3.0);
  add("block_size_cap", false, largest, m_cap, largest <= m_cap);

  cert.rate = annulus_rate(s.rho_bar, s.c_res2, s.M0, gamma);
  if (!cert.gating_ok()) return cert;

  cert.evaluated = true;
  const GreenEvaluation g = full.at(s.energy);
  const double floor = g.resolution();
  for (size_t i = 0; i < g.size(); ++i) {
    for (size_t j = i + 1; j < g.size(); ++j) {
      const int sep = sup_dist(g.sites[i], g.sites[j]);
      if (!in_decay_range(sep, N)) continue;
      ++cert.pairs;
      const double a = g.abs(i, j), x = std::pow(double(sep), gamma);
      if (a <= floor) {
        ++cert.unresolved;
        continue;
      }
      const double excess = std::log(a) + cert.rate * x;
      if (excess > 0) ++cert.violations;
      if (excess > cert.worst_excess) {
        cert.worst_excess = excess;
        cert.worst_m = g.sites[i];
        cert.worst_n = g.sites[j];
      }
    }
  }
  cert.conclusion_holds = cert.violations == 0;
  return cert;
}

AnnulusCertificate annulus_decay_certify(const AssembledOperator& op, const AnnulusSetup& s) {
  AnnulusCertificate c = annulus_decay_evaluate(op, s);
  if (!c.gating_ok()) throw Error(ErrorCode::HypothesisViolated, "annulus hypotheses violated: " + c.failed());
  return c;
}

}  // namespace gev
