#include "gevlab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>

#include "gevlab/errors.hpp"
#include "gevlab/greens.hpp"

namespace gev {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

double envelope(const GevreySymbol& v, int sep) { return canonical_coefficient(v.rho, v.gamma, sep); }

TorusPoint phase_with(const OperatorSpec& spec, double theta0) {
  std::vector<double> c = spec.phase.coords;
  c[0] = theta0;
  return TorusPoint(c);
}

long origin_index(const SiteSet& sites) { return sites.index_of(Site{}); }

}  // namespace

EigenSystem eigensystem(const AssembledOperator& op) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(op.matrix);
  if (es.info() != Eigen::Success)
    throw Error(ErrorCode::Singular, "eigensolver failed on a " + std::to_string(op.size()) + "-site operator");
  EigenSystem e;
  e.sites = op.sites;
  e.scale = op.scale;
  e.values = es.eigenvalues();
  e.vectors = es.eigenvectors();
  e.op_norm = e.values.size() ? e.values.cwiseAbs().maxCoeff() : 0.0;
  if (e.values.size()) {
    const Eigen::MatrixXd r = op.matrix * e.vectors - e.vectors * e.values.asDiagonal();
    e.residual = r.colwise().norm().maxCoeff();
    const Eigen::MatrixXd gram = e.vectors.transpose() * e.vectors - Eigen::MatrixXd::Identity(e.size(), e.size());
    e.orthonormality = gram.cwiseAbs().maxCoeff();
  }
  const double tol = 1e-10 * std::max(e.op_norm, std::numeric_limits<double>::min());
  if (e.residual > tol || e.orthonormality > 1e-10)
    throw Error(ErrorCode::Diverged, "eigensystem residual " + std::to_string(e.residual) + ", gram deviation " +
                                         std::to_string(e.orthonormality) + ", norm " + std::to_string(e.op_norm));
  return e;
}

LocalizationProfile localization_profile(const Eigen::VectorXd& v, const SiteSet& sites, int N, double gamma,
                                         double ceiling, double floor) {
  if (static_cast<size_t>(v.size()) != sites.size())
    throw Error(ErrorCode::DimensionMismatch, "eigenvector length differs from site count");
  LocalizationProfile p;
  if (v.size() == 0) return p;
  Eigen::Index c = 0;
  p.peak = v.cwiseAbs().maxCoeff(&c);
  p.center = sites[c];
  const double noise = 64.0 * kEps * std::sqrt(static_cast<double>(v.size())) * p.peak;
  // tail envelope env(r) = max_{|n-c| >= r} |phi(n)|, so nodes of oscillating states do not read as decay
  std::vector<double> shell_max;
  for (size_t i = 0; i < sites.size(); ++i) {
    const size_t sep = static_cast<size_t>(sup_dist(sites[i], p.center));
    if (shell_max.size() <= sep) shell_max.resize(sep + 1, 0.0);
    shell_max[sep] = std::max(shell_max[sep], std::abs(v[i]));
  }
  for (size_t r = shell_max.size(); r-- > 1;)
    if (r + 1 < shell_max.size()) shell_max[r] = std::max(shell_max[r], shell_max[r + 1]);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  std::vector<std::pair<double, double>> xy;
  p.worst_rate = ceiling;
  for (size_t r = 1; r < shell_max.size(); ++r) {
    if (!in_decay_range(static_cast<int>(r), N)) continue;
    const double x = std::pow(static_cast<double>(r), gamma);
    const double a = shell_max[r];
    // below the noise level only log(peak/noise) is known, a lower bound on the decay
    double y = a > noise ? std::log(p.peak / a) : std::log(p.peak / noise);
    if (a <= noise) ++p.unresolved;
    y = std::min(y, ceiling * x);
    xy.emplace_back(x, y);
    p.worst_rate = std::min(p.worst_rate, y / x);
  }
  p.pairs = xy.size();
  if (xy.empty() || p.unresolved == p.pairs) {
    p.capped = true;
    p.rate = ceiling;
    p.worst_rate = ceiling;
    p.r_squared = 1.0;
    return p;
  }
  for (auto [x, y] : xy) {
    sxy += x * y;
    sxx += x * x;
    syy += y * y;
  }
  p.rate = sxy / sxx;
  double sse = 0.0;
  for (auto [x, y] : xy) sse += (y - p.rate * x) * (y - p.rate * x);
  p.r_squared = syy > 0 ? 1.0 - sse / syy : 1.0;
  p.extended = p.rate < floor;
  return p;
}

QuasimodeResidual quasimode_residual(const OperatorSpec& spec, const TorusPoint& theta, const SiteSet& sites,
                                     const Eigen::VectorXd& phi, double lam, int J, int big) {
  if (spec.family != Family::Dual) throw Error(ErrorCode::Validation, "quasimode_residual needs a DUAL spec");
  int box = 0;
  for (const Site& s : sites.points()) box = std::max(box, sup_norm(s));
  if (J < 0 || J >= box) throw Error(ErrorCode::Validation, "J must be smaller than the eigenvector box");
  if (big <= box) throw Error(ErrorCode::Validation, "big region must strictly contain the eigenvector box");
  const int d = spec.dim();
  QuasimodeResidual q;
  q.J = J;
  q.big = big;

  std::vector<Site> core_sites;
  std::vector<double> core_vals;
  for (size_t i = 0; i < sites.size(); ++i) {
    if (sup_norm(sites[i]) <= J) {
      core_sites.push_back(sites[i]);
      core_vals.push_back(phi[i]);
    }
  }
  double mass = 0.0;
  for (double x : core_vals) mass += x * x;
  q.core_mass = std::sqrt(mass);
  if (!(q.core_mass > 0)) throw Error(ErrorCode::Validation, "eigenvector vanishes on [-J, J]^d");
  for (double& x : core_vals) x /= q.core_mass;

  const AssembledOperator H = assemble_dual(spec, Region::cube(d, big), theta);
  Eigen::VectorXd psi = Eigen::VectorXd::Zero(H.size());
  for (size_t i = 0; i < core_sites.size(); ++i) psi[H.sites.index_of(core_sites[i])] = core_vals[i];
  q.box = (H.matrix * psi - lam * psi).norm();

  // rows m outside the big box: |(H psi)_m| <= lam sum_n e^{-rho|m-n|^gamma} |psi_n|
  const int outer = 2 * big;
  double tail2 = 0.0;
  const SiteSet shell = region_points(Region::cube(d, outer));
  for (const Site& m : shell.points()) {
    if (sup_norm(m) <= big) continue;
    double b = 0.0;
    for (size_t i = 0; i < core_sites.size(); ++i) b += envelope(spec.v, sup_dist(m, core_sites[i])) * std::abs(core_vals[i]);
    tail2 += b * b;
  }
  double l1 = 0.0;
  for (double x : core_vals) l1 += std::abs(x);
  // beyond `outer`, b_m <= ||psi||_1 e^{-rho(|m|-J)^gamma}
  double rest = 0.0;
  for (long k = outer + 1;; ++k) {
    const double e = envelope(spec.v, static_cast<int>(k - J));
    const double term = shell_count(d, static_cast<int>(k)) * e * e;
    rest += term;
    if (term < 1e-300 || (term < 1e-20 * rest && k > outer + 1000)) break;
    if (k - outer > 100000000L) break;
  }
  tail2 += l1 * l1 * rest;
  q.tail = spec.lambda * std::sqrt(tail2);
  if (2 * big > spec.v.truncation_radius)
    q.truncation = spec.lambda * truncation_tail_bound(spec.v, spec.v.truncation_radius);
  q.certified = std::sqrt(q.box * q.box + q.tail * q.tail) + q.truncation;
  return q;
}

// -- branches --

std::vector<double> theta_samples(int count) {
  if (count < 1) throw Error(ErrorCode::Validation, "theta sample count must be >= 1");
  std::vector<double> t(count);
  for (int i = 0; i < count; ++i) t[i] = (i + 0.5) / count;
  return t;
}

double BranchSet::image_measure() const {
  Intervals iv;
  for (const auto& b : branches) iv.emplace_back(b.e_min, b.e_max);
  return intervals_measure(normalize_intervals(iv));
}

double BranchSet::longest() const {
  double l = 0.0;
  for (const auto& b : branches) l = std::max(l, b.length());
  return l;
}

namespace {

struct Pick {
  bool ok = false;
  std::string reason;
  BranchSample sample;
  Eigen::VectorXd phi;
  SiteSet sites;
};

// s* = argmax |<e_0, phi_s>| with the mass and closeness checks
Pick pick_by_mass(const OperatorSpec& spec, int N, double theta0) {
  const int d = spec.dim();
  const TorusPoint ph = phase_with(spec, theta0);
  const AssembledOperator op = assemble_dual(spec, Region::cube(d, N), ph);
  const EigenSystem es = eigensystem(op);
  const long i0 = origin_index(op.sites);
  Eigen::Index s = 0;
  const double mass = es.vectors.row(i0).cwiseAbs().maxCoeff(&s);
  Pick p;
  p.sample.theta = theta0;
  p.sample.energy = es.values[s];
  p.sample.index = s;
  p.sample.mass = mass;
  p.phi = es.vectors.col(s);
  p.sites = op.sites;
  const double n = static_cast<double>(op.size());
  const double f = evaluate_potential(spec.analytic, ph);
  const double close = std::pow(n, 0.5) * spec.lambda * symbol_l1(spec.v);
  if (mass < std::pow(n, -0.5)) {
    p.reason = "mass below (2N+1)^{-d/2}";
  } else if (std::abs(p.sample.energy - f) > close + 1e-12 * std::max(1.0, std::abs(f))) {
    p.reason = "closeness |E - f| violated";
  } else {
    p.ok = true;
  }
  return p;
}

double theta_lipschitz(const OperatorSpec& spec) { return derivative_bound(spec.analytic, 0); }

void close_branch(EigenBranch& b, double step) {
  b.lo = b.samples.front().theta - step / 2;
  b.hi = b.samples.back().theta + step / 2;
  b.e_min = b.e_max = b.samples.front().energy;
  b.max_residual = 0.0;
  for (const auto& s : b.samples) {
    b.e_min = std::min(b.e_min, s.energy);
    b.e_max = std::max(b.e_max, s.energy);
    b.max_residual = std::max(b.max_residual, s.residual);
  }
}

// sequential chaining over theta order; nullopt entries break the chain
void chain(std::vector<EigenBranch>& out, const std::vector<std::optional<BranchSample>>& samples, double tol,
           double step) {
  EigenBranch cur;
  auto flush = [&] {
    if (!cur.samples.empty()) {
      close_branch(cur, step);
      out.push_back(std::move(cur));
    }
    cur = EigenBranch{};
  };
  for (const auto& s : samples) {
    if (!s) {
      flush();
      continue;
    }
    if (!cur.samples.empty() && std::abs(s->energy - cur.samples.back().energy) > tol) flush();
    cur.samples.push_back(*s);
  }
  flush();
}

void check_dual(const OperatorSpec& spec) {
  if (spec.family != Family::Dual) throw Error(ErrorCode::Validation, "branches need a DUAL spec");
  spec.validate();
}

}  // namespace

BranchSet branch_extract(const OperatorSpec& spec, int N, const std::vector<double>& thetas, double step,
                         const BranchOptions& opt, const Mapper& map) {
  check_dual(spec);
  if (N < 1) throw Error(ErrorCode::Validation, "branch scale must be >= 1");
  if (thetas.empty()) throw Error(ErrorCode::Validation, "empty theta sample list");
  if (!std::is_sorted(thetas.begin(), thetas.end())) throw Error(ErrorCode::Validation, "theta samples must be sorted");
  const int d = spec.dim();
  BranchSet set;
  set.N = N;
  set.step = step;
  set.tolerance = opt.continuity_factor * step * theta_lipschitz(spec);
  set.mass_floor = std::pow(2.0 * N + 1, -0.5 * d);
  const int J = opt.J > 0 ? opt.J : N / 2;
  const int big = opt.big > 0 ? opt.big : 3 * N;

  std::vector<Pick> picks(thetas.size());
  map(thetas.size(), [&](size_t i) {
    Pick p = pick_by_mass(spec, N, thetas[i]);
    if (p.ok && opt.residuals)
      p.sample.residual =
          quasimode_residual(spec, phase_with(spec, thetas[i]), p.sites, p.phi, p.sample.energy, J, big).certified;
    p.phi.resize(0);
    picks[i] = std::move(p);
  });
  std::vector<std::optional<BranchSample>> samples;
  for (const auto& p : picks) {
    if (p.ok) {
      samples.emplace_back(p.sample);
    } else {
      samples.emplace_back(std::nullopt);
      set.dropped.push_back({p.sample.theta, p.reason});
    }
  }
  chain(set.branches, samples, set.tolerance, step);
  return set;
}

RefineResult branch_refine(const OperatorSpec& spec, const BranchSet& parent, int N1, int factor,
                           const BranchOptions& opt, const Mapper& map) {
  check_dual(spec);
  if (N1 < parent.N) throw Error(ErrorCode::Validation, "N1 must be >= the parent scale");
  if (factor < 1) throw Error(ErrorCode::Validation, "resample factor must be >= 1");
  const int d = spec.dim();
  const int N = parent.N;
  const double step = parent.step / factor;
  RefineResult out;
  BranchSet& set = out.set;
  set.N = N1;
  set.step = step;
  set.tolerance = opt.continuity_factor * step * theta_lipschitz(spec);
  set.mass_floor = std::pow(2.0 * N1 + 1, -0.5 * d);
  const int J = opt.J > 0 ? opt.J : N1 / 2;
  const int big = opt.big > 0 ? opt.big : 3 * N1;

  struct Item {
    size_t branch;
    double theta;
  };
  std::vector<Item> items;
  for (size_t b = 0; b < parent.branches.size(); ++b) {
    for (const auto& s : parent.branches[b].samples) {
      if (factor == 1) {
        items.push_back({b, s.theta});
        continue;
      }
      for (int j = 0; j < factor; ++j) items.push_back({b, s.theta - parent.step / 2 + (j + 0.5) * step});
    }
  }

  struct Result {
    std::optional<BranchSample> sample;
    std::string reason;
  };
  std::vector<Result> res(items.size());
  const Region child = Region::cube(d, N1);
  map(items.size(), [&](size_t i) {
    const double th = items[i].theta;
    Pick p = pick_by_mass(spec, N, th);
    if (!p.ok) {
      res[i].reason = "parent: " + p.reason;
      return;
    }
    const TorusPoint ph = phase_with(spec, th);
    const AssembledOperator op = assemble_dual(spec, child, ph);
    Eigen::VectorXd xi = Eigen::VectorXd::Zero(op.size());
    for (size_t k = 0; k < p.sites.size(); ++k) xi[op.sites.index_of(p.sites[k])] = p.phi[k];
    const double E = p.sample.energy;
    const double r = (op.matrix * xi - E * xi).norm();
    const double window = std::pow(static_cast<double>(op.size()), 0.5) * r + 1e-12 * std::max(1.0, std::abs(E));
    const EigenSystem es = eigensystem(op);
    long best = -1;
    double overlap = -1.0;
    for (long s = 0; s < static_cast<long>(es.size()); ++s) {
      if (std::abs(es.values[s] - E) > window) continue;
      const double o = std::abs(xi.dot(es.vectors.col(s)));
      if (o > overlap) {
        overlap = o;
        best = s;
      }
    }
    if (best < 0) {
      res[i].reason = "empty closeness window";
      return;
    }
    BranchSample bs;
    bs.theta = th;
    bs.energy = es.values[best];
    bs.index = best;
    bs.mass = overlap;
    if (opt.residuals)
      bs.residual = quasimode_residual(spec, ph, op.sites, es.vectors.col(best), bs.energy, J, big).certified;
    res[i].sample = bs;
  });

  // chain within each parent branch, in theta order
  size_t i = 0;
  while (i < items.size()) {
    const size_t b = items[i].branch;
    std::vector<std::optional<BranchSample>> run;
    for (; i < items.size() && items[i].branch == b; ++i) {
      run.push_back(res[i].sample);
      if (!res[i].sample) {
        set.dropped.push_back({items[i].theta, res[i].reason});
        if (res[i].reason == "empty closeness window") ++out.ledger.empty_windows;
      }
    }
    chain(set.branches, run, set.tolerance, step);
  }

  RefineLedger& L = out.ledger;
  L.N = N;
  L.N1 = N1;
  L.before = parent.image_measure();
  L.after = set.image_measure();
  L.loss = L.before - L.after;
  L.grid_resolution = parent.step * theta_lipschitz(spec);
  L.allowed = 1.0 / N1 + 2.0 * L.grid_resolution;
  return out;
}

// -- spectrum estimates --

Intervals normalize_intervals(Intervals iv) {
  for (auto& [a, b] : iv)
    if (a > b) std::swap(a, b);
  std::sort(iv.begin(), iv.end());
  Intervals out;
  for (const auto& x : iv) {
    if (!out.empty() && x.first <= out.back().second)
      out.back().second = std::max(out.back().second, x.second);
    else
      out.push_back(x);
  }
  return out;
}

double intervals_measure(const Intervals& iv) {
  double m = 0.0;
  for (const auto& [a, b] : iv) m += b - a;
  return m;
}

namespace {

double dist_to(double x, const Intervals& b) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& [lo, hi] : b) {
    if (x >= lo && x <= hi) return 0.0;
    best = std::min(best, x < lo ? lo - x : x - hi);
  }
  return best;
}

// sup over a of dist(., b); the max sits at an endpoint of a or at a gap midpoint of b
double directed(const Intervals& a, const Intervals& b) {
  double h = 0.0;
  for (const auto& [lo, hi] : a) {
    h = std::max({h, dist_to(lo, b), dist_to(hi, b)});
    for (size_t k = 0; k + 1 < b.size(); ++k) {
      const double mid = 0.5 * (b[k].second + b[k + 1].first);
      if (mid >= lo && mid <= hi) h = std::max(h, dist_to(mid, b));
    }
  }
  return h;
}

}  // namespace

double hausdorff_distance(const Intervals& a, const Intervals& b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::Validation, "Hausdorff distance of an empty set");
  const Intervals na = normalize_intervals(a), nb = normalize_intervals(b);
  return std::max(directed(na, nb), directed(nb, na));
}

SpectrumEstimate spectrum_from_branches(const BranchSet& set) {
  SpectrumEstimate s;
  s.provenance = "branch";
  Intervals iv;
  for (const auto& b : set.branches) {
    iv.emplace_back(b.e_min - b.max_residual, b.e_max + b.max_residual);
    s.budget += 2 * b.max_residual;
  }
  s.intervals = normalize_intervals(iv);
  s.measure = intervals_measure(s.intervals);
  s.resolution = set.tolerance;
  return s;
}

SpectrumEstimate spectrum_direct(const OperatorSpec& spec, const DirectSweep& sw, const Mapper& map) {
  spec.validate();
  if (sw.N < 0) throw Error(ErrorCode::Validation, "direct sweep N must be >= 0");
  if (sw.phases < 1) throw Error(ErrorCode::Validation, "direct sweep needs at least one phase");
  const int d = spec.dim();
  std::vector<TorusPoint> phases;
  if (d == 1) {
    for (double t : theta_samples(sw.phases)) phases.emplace_back(std::vector<double>{t});
  } else {
    std::mt19937_64 rng(sw.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < sw.phases; ++i) {
      std::vector<double> c(d);
      for (double& x : c) x = u(rng);
      phases.emplace_back(c);
    }
  }
  std::vector<Eigen::VectorXd> vals(phases.size());
  double tail = 0.0;
  map(phases.size(), [&](size_t i) {
    const AssembledOperator op = spec.family == Family::Dual ? assemble_dual(spec, Region::cube(d, sw.N), phases[i])
                                                             : assemble_direct(spec, sw.N, phases[i]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(op.matrix, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw Error(ErrorCode::Singular, "eigensolver failed in the direct sweep");
    vals[i] = es.eigenvalues();
    if (i == 0) tail = op.tail_bound;
  });
  std::vector<double> all;
  for (const auto& v : vals) all.insert(all.end(), v.data(), v.data() + v.size());
  std::sort(all.begin(), all.end());

  double lip = 0.0;
  for (int j = 0; j < spec.analytic.dim; ++j) lip = std::max(lip, derivative_bound(spec.analytic, j));
  SpectrumEstimate s;
  s.provenance = "direct";
  s.resolution = sw.tolerance > 0 ? sw.tolerance : lip * std::max(1.0 / sw.phases, 1.0 / (2.0 * sw.N + 1));
  s.budget = tail;
  for (double x : all) {
    if (!s.intervals.empty() && x - s.intervals.back().second <= s.resolution)
      s.intervals.back().second = x;
    else
      s.intervals.emplace_back(x, x);
  }
  s.measure = intervals_measure(s.intervals);
  return s;
}

// -- Poisson identity and Delyon chain --

namespace {

PoissonCheck poisson_with(const AssembledOperator& big, const Eigen::VectorXd& xi, double E, const SiteSet& sub,
                          const Resolvent& res) {
  PoissonCheck c;
  c.energy = E;
  Eigen::Index ic = 0;
  xi.cwiseAbs().maxCoeff(&ic);
  c.center = big.sites[ic];
  c.eigen_residual = (big.matrix * xi - E * xi).norm();
  if (c.eigen_residual > 1e-10 * std::max(1.0, big.matrix.cwiseAbs().rowwise().sum().maxCoeff()))
    throw Error(ErrorCode::Validation, "eigenpair residual exceeds 1e-10");
  const GreenEvaluation g = res.at(E);
  c.g_norm = g.op_norm;
  std::vector<long> in, out;
  for (size_t i = 0; i < big.size(); ++i) (sub.contains(big.sites[i]) ? in : out).push_back(static_cast<long>(i));
  Eigen::VectorXd w = Eigen::VectorXd::Zero(in.size());
  for (size_t a = 0; a < in.size(); ++a)
    for (long j : out) w[a] += big.matrix(in[a], j) * xi[j];
  const Eigen::VectorXd rhs = -(g.re * w);
  for (size_t a = 0; a < in.size(); ++a) c.residual = std::max(c.residual, std::abs(xi[in[a]] - rhs[a]));
  // ||G|| ||(H - E) xi|| carries the eigenpair error into the identity
  c.budget = c.g_norm * c.eigen_residual;
  int extent = 0;
  for (const Site& s : big.sites.points()) extent = std::max(extent, sup_norm(s));
  if (big.spec.family == Family::Dual && 2 * extent > big.spec.v.truncation_radius)
    c.budget += big.spec.lambda * c.g_norm * truncation_tail_bound(big.spec.v, big.spec.v.truncation_radius);
  return c;
}

}  // namespace

PoissonCheck poisson_residual_check(const AssembledOperator& big, const Eigen::VectorXd& xi, double E,
                                    const Region& sub) {
  const SiteSet s = region_points(sub);
  for (const Site& p : s.points())
    if (!big.sites.contains(p)) throw Error(ErrorCode::Validation, "sub-box not inside the big box");
  if (s.size() >= big.size()) throw Error(ErrorCode::Validation, "sub-box must be strictly inside the big box");
  const AssembledOperator op = restrict_to(big, s, sub.size);
  return poisson_with(big, xi, E, s, Resolvent(op));
}

PoissonSample poisson_sample(const OperatorSpec& spec, const TorusPoint& theta, int big, int sub, int margin,
                             size_t count, uint64_t seed, double max_condition) {
  if (!(sub < big - margin)) throw Error(ErrorCode::Validation, "need sub < big - margin");
  const int d = spec.dim();
  const AssembledOperator B = assemble_dual(spec, Region::cube(d, big), theta);
  const EigenSystem es = eigensystem(B);
  const Region L = Region::cube(d, sub);
  const SiteSet ls = region_points(L);
  const Resolvent res(restrict_to(B, ls, sub));
  std::vector<long> order(es.size());
  std::iota(order.begin(), order.end(), 0L);
  std::mt19937_64 rng(seed);
  for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  PoissonSample out;
  for (long s : order) {
    if (out.checks.size() >= count) break;
    Eigen::Index ic = 0;
    es.vectors.col(s).cwiseAbs().maxCoeff(&ic);
    const int c = sup_norm(B.sites[ic]);
    if (c > big - margin || c <= sub) {
      ++out.rejected;
      continue;
    }
    if (res.condition_at(es.values[s]) > max_condition) {
      ++out.resonant;
      continue;
    }
    out.checks.push_back(poisson_with(B, es.vectors.col(s), es.values[s], ls, res));
  }
  return out;
}

bool DelyonReport::strictly_decreasing() const {
  for (size_t i = 1; i < scales.size(); ++i)
    if (!(scales[i].bound < scales[i - 1].bound)) return false;
  return !scales.empty();
}

DelyonReport delyon_bound(const OperatorSpec& spec, const TorusPoint& theta, double E, const std::vector<int>& scales,
                          const SiteSet& sites, const Eigen::VectorXd& xi_abs) {
  if (spec.family != Family::Dual) throw Error(ErrorCode::Validation, "delyon_bound needs a DUAL spec");
  if (static_cast<size_t>(xi_abs.size()) != sites.size() || sites.empty())
    throw Error(ErrorCode::Validation, "xi samples missing or mismatched");
  const int d = spec.dim();
  const double rho = spec.v.rho, gamma = spec.v.gamma;
  DelyonReport rep;
  rep.rho_bar = (1.0 - std::pow(5.0, -gamma)) * rho;
  for (size_t i = 0; i < sites.size(); ++i)
    rep.C = std::max(rep.C, std::abs(xi_abs[i]) / std::pow(std::max(1, sup_norm(sites[i])), d));
  for (int N : scales) {
    if (N < 1) throw Error(ErrorCode::Validation, "Delyon scales must be >= 1");
    DelyonScale sc;
    sc.N = N;
    const double lift = 0.5 * rep.rho_bar * std::pow(N / 10.0, gamma) + std::pow(N, gamma / 2);
    // inner(j) bounds sum_{|n'|>N} e^{-rho|n-n'|^gamma} |n'|^d for |n| = j
    auto inner = [&](int n) {
      double s = 0.0;
      if (d == 1) {
        // exact at d=1: both half-lines
        for (long k = N + 1;; ++k) {
          const double t = (std::exp(-rho * std::pow(double(k - n), gamma)) +
                            std::exp(-rho * std::pow(double(k + n), gamma))) * double(k);
          s += t;
          if (t < 1e-20 * s && k > N + 50) break;
        }
        return s;
      }
      for (long k = N + 1;; ++k) {
        const double t = shell_count(d, int(k)) * std::pow(double(k), d) * std::exp(-rho * std::pow(double(k - n), gamma));
        s += t;
        if (t < 1e-20 * s && k > N + 50) break;
      }
      return s;
    };
    double total = 0.0;
    if (d == 1) {
      for (int n = -N; n <= N; ++n)
        total += std::exp(-0.5 * rep.rho_bar * std::pow(std::abs(n), gamma) + lift) * inner(n);
    } else {
      for (int j = 0; j <= N; ++j)
        total += shell_count(d, j) * std::exp(-0.5 * rep.rho_bar * std::pow(j, gamma) + lift) * inner(j);
    }
    sc.bound = rep.C * total;
    const AssembledOperator op = assemble_dual(spec, Region::cube(d, N), theta);
    try {
      const BoundCertificate cert = check_ldt_bounds(green(op, E), terminal_rate(rho, gamma));
      sc.ldt_good = cert.pass();
      sc.op_norm = cert.op_norm;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Singular) throw;
      sc.ldt_good = false;
      sc.op_norm = std::numeric_limits<double>::infinity();
    }
    rep.scales.push_back(sc);
  }
  return rep;
}

// -- exports --

void write_branch_csv(std::ostream& os, const BranchSet& set) {
  os << "theta,E,mass,residual,branch_id\n";
  os.precision(17);
  for (size_t b = 0; b < set.branches.size(); ++b)
    for (const auto& s : set.branches[b].samples)
      os << s.theta << ',' << s.energy << ',' << s.mass << ',' << s.residual << ',' << b << '\n';
}

void write_profile_csv(std::ostream& os, const std::vector<LocalizationProfile>& profiles, int dim) {
  os << "eig_index,center,rate,r2,extended_flag\n";
  os.precision(17);
  for (size_t i = 0; i < profiles.size(); ++i) {
    const auto& p = profiles[i];
    os << i << ',' << site_string(p.center, dim) << ',' << p.rate << ',' << p.r_squared << ',' << (p.extended ? 1 : 0)
       << '\n';
  }
}

namespace {

struct Frame {
  double x0, x1, y0, y1;
  double W = 640, H = 400, pad = 40;
  double px(double x) const { return pad + (x - x0) / (x1 - x0 > 0 ? x1 - x0 : 1) * (W - 2 * pad); }
  double py(double y) const { return H - pad - (y - y0) / (y1 - y0 > 0 ? y1 - y0 : 1) * (H - 2 * pad); }
};

void svg_open(std::ostream& os, const Frame& f, const std::string& xl, const std::string& yl) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.W << "\" height=\"" << f.H << "\">\n";
  os << "<rect x=\"" << f.pad << "\" y=\"" << f.pad << "\" width=\"" << f.W - 2 * f.pad << "\" height=\""
     << f.H - 2 * f.pad << "\" fill=\"none\" stroke=\"black\"/>\n";
  os << "<text x=\"" << f.W / 2 << "\" y=\"" << f.H - 8 << "\" font-size=\"12\">" << xl << "</text>\n";
  os << "<text x=\"4\" y=\"" << f.pad - 8 << "\" font-size=\"12\">" << yl << "</text>\n";
}

}  // namespace

void write_branch_svg(std::ostream& os, const BranchSet& set) {
  Frame f{0.0, 1.0, -1.0, 1.0};
  bool first = true;
  for (const auto& b : set.branches) {
    if (first) f.y0 = b.e_min, f.y1 = b.e_max, first = false;
    f.y0 = std::min(f.y0, b.e_min);
    f.y1 = std::max(f.y1, b.e_max);
  }
  os.precision(6);
  svg_open(os, f, "theta", "E(theta)");
  for (const auto& b : set.branches) {
    os << "<polyline fill=\"none\" stroke=\"steelblue\" points=\"";
    for (const auto& s : b.samples) os << f.px(s.theta) << ',' << f.py(s.energy) << ' ';
    os << "\"/>\n";
  }
  os << "</svg>\n";
}

void write_profile_svg(std::ostream& os, const Eigen::VectorXd& v, const SiteSet& sites, const LocalizationProfile& p,
                       double gamma) {
  std::vector<std::pair<double, double>> pts;
  for (size_t i = 0; i < sites.size(); ++i) {
    if (v[i] == 0.0) continue;
    pts.emplace_back(std::pow(sup_dist(sites[i], p.center), gamma), std::log(std::abs(v[i])));
  }
  Frame f{0.0, 1.0, -1.0, 0.0};
  for (auto [x, y] : pts) {
    f.x1 = std::max(f.x1, x);
    f.y0 = std::min(f.y0, y);
    f.y1 = std::max(f.y1, y);
  }
  os.precision(6);
  svg_open(os, f, "|n - center|^gamma", "log|phi(n)|");
  for (auto [x, y] : pts) os << "<circle r=\"2\" cx=\"" << f.px(x) << "\" cy=\"" << f.py(y) << "\"/>\n";
  if (!p.capped && p.peak > 0) {
    const double y0 = std::log(p.peak);
    os << "<line stroke=\"firebrick\" x1=\"" << f.px(0) << "\" y1=\"" << f.py(y0) << "\" x2=\"" << f.px(f.x1)
       << "\" y2=\"" << f.py(std::max(f.y0, y0 - p.rate * f.x1)) << "\"/>\n";
  }
  os << "</svg>\n";
}

}  // namespace gev
