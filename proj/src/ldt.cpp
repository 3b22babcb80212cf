#include "gevlab/ldt.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <optional>
#include <random>

#include "gevlab/errors.hpp"

namespace gev {

ScaleSchedule ScaleSchedule::desk(int d, double gamma, double rho) {
  ScaleSchedule s;
  s.gamma = gamma;
  s.c1 = 0.05 * gamma;
  // c1 < c3 < c4 < gamma/10, splitting (c1, gamma/10) in thirds
  s.c3 = gamma / 15.0;
  s.c4 = gamma / 12.0;
  if (d == 1) {
    s.N1 = 8, s.N2 = 32, s.N = 64;
  } else {
    s.N1 = 4, s.N2 = 8, s.N = 16;
  }
  s.rho_bar_per_scale.assign(3, terminal_rate(rho, gamma));
  return s;
}

void ScaleSchedule::validate() const {
  if (!(gamma > 0 && gamma <= 1)) throw Error(ErrorCode::Validation, "schedule: gamma must lie in (0,1]");
  if (!(N1 >= 1 && N1 < N2 && N2 <= N)) throw Error(ErrorCode::Validation, "schedule: need N1 < N2 <= N");
  if (!(c1 > 0 && c1 < c3 && c3 < c4 && c4 < gamma / 10))
    throw Error(ErrorCode::Validation, "schedule: need 0 < c1 < c3 < c4 < gamma/10");
  for (double r : rho_bar_per_scale)
    if (!(r > 0)) throw Error(ErrorCode::Validation, "schedule: rates must be positive");
}

double ScaleSchedule::target(int scale) const { return std::exp(-std::pow(static_cast<double>(scale), c1)); }

std::vector<GridPoint> grid_points(const ScanGrid& grid, int d) {
  if (grid.line_points < 1) throw Error(ErrorCode::Validation, "grid needs at least one point per line");
  if (d < 1 || d > kMaxDim) throw Error(ErrorCode::Validation, "grid dimension out of range");
  std::vector<GridPoint> out;
  const double h = grid.step();
  if (d == 1) {
    out.reserve(grid.line_points);
    for (int i = 0; i < grid.line_points; ++i) out.push_back({TorusPoint({(i + 0.5) * h}), 0, 0});
    return out;
  }
  if (grid.sections < 1) throw Error(ErrorCode::Validation, "grid needs at least one section");
  std::mt19937_64 rng(grid.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  out.reserve(size_t(d) * grid.sections * grid.line_points);
  for (int j = 0; j < d; ++j) {
    for (int s = 0; s < grid.sections; ++s) {
      std::vector<double> base(d);
      for (int c = 0; c < d; ++c) base[c] = c == j ? 0.0 : u(rng);
      for (int i = 0; i < grid.line_points; ++i) {
        base[j] = (i + 0.5) * h;
        out.push_back({TorusPoint(base), j, s});
      }
    }
  }
  return out;
}

double BadSetEstimate::sup_section_measure() const {
  double m = 0.0;
  for (double v : section_measures) m = std::max(m, v);
  return m;
}

namespace {

Region shaped(const RegionShape& shape, int N, const Site& center, int d) {
  Region r;
  r.shape = shape;
  r.size = N;
  r.center = center;
  r.dim = d;
  return r;
}

void summarize(BadSetEstimate& b, const std::vector<GridPoint>& pts) {
  b.points = pts.size();
  b.failing = 0;
  std::map<std::pair<int, int>, std::pair<size_t, size_t>> lines;
  for (size_t i = 0; i < pts.size(); ++i) {
    auto& l = lines[{pts[i].coordinate, pts[i].section}];
    ++l.second;
    if (b.indicator[i]) {
      ++b.failing;
      ++l.first;
    }
  }
  b.failing_fraction = b.points ? double(b.failing) / double(b.points) : 0.0;
  b.section_measures.assign(b.dim, 0.0);
  for (const auto& [key, l] : lines)
    b.section_measures[key.first] = std::max(b.section_measures[key.first], double(l.first) / double(l.second));
}

}  // namespace

// -- initial step --

bool InitialBadSet::contains(const TorusPoint& theta) const {
  const OrbitEvaluator ev(f, omega, ShiftMode::Componentwise);
  for (const Site& n : region_points(Region::cube(omega.dim(), N)).points())
    if (std::abs(ev.at(theta, n) - energy) < delta) return true;
  return false;
}

double initial_lambda_threshold(double delta, int N, int d) {
  return delta / (2.0 * std::pow(2.0 * N + 1.0, d));
}

InitialStepReport initial_bad_set(const OperatorSpec& spec, int N, double delta, double E, const ScanGrid& grid,
                                  size_t verify_count, uint64_t seed) {
  if (!(delta > 0)) throw Error(ErrorCode::Validation, "initial step: delta must be > 0");
  if (N < 0) throw Error(ErrorCode::Validation, "initial step: N must be >= 0");
  spec.validate();
  if (spec.family != Family::Dual) throw Error(ErrorCode::Validation, "initial step needs a DUAL operator");
  const int d = spec.dim();
  InitialStepReport rep;
  rep.set = {spec.analytic, spec.omega, N, E, delta};
  rep.lambda_threshold = initial_lambda_threshold(delta, N, d);
  rep.threshold_holds = std::abs(spec.lambda) <= rep.lambda_threshold;

  const std::vector<GridPoint> pts = grid_points(grid, d);
  BadSetEstimate& b = rep.estimate;
  b.scale = N;
  b.energy = E;
  b.omega = spec.omega.coords;
  b.grid = grid;
  b.dim = d;
  b.indicator.resize(pts.size());
  const OrbitEvaluator ev(spec.analytic, spec.omega, ShiftMode::Componentwise);
  const SiteSet orbit = region_points(Region::cube(d, N));
  for (size_t i = 0; i < pts.size(); ++i) {
    bool in = false;
    for (const Site& n : orbit.points())
      if (std::abs(ev.at(pts[i].theta, n) - E) < delta) {
        in = true;
        break;
      }
    b.indicator[i] = in;
  }
  summarize(b, pts);

  if (verify_count == 0) return rep;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double nb = 2.0 / delta, rho = spec.v.rho, gamma = spec.v.gamma;
  const std::vector<RegionShape> shapes = enumerate_shapes(d);
  const size_t max_tries = 1000 * verify_count;
  for (size_t t = 0; t < max_tries && rep.verified < verify_count; ++t) {
    std::vector<double> c(d);
    for (double& x : c) x = u(rng);
    const TorusPoint theta(c);
    bool in = false;
    for (const Site& n : orbit.points())
      if (std::abs(ev.at(theta, n) - E) < delta) {
        in = true;
        break;
      }
    if (in) continue;
    ++rep.verified;
    for (const RegionShape& sh : shapes) {
      const AssembledOperator op = assemble_dual(spec, shaped(sh, N, Site{}, d), theta);
      GreenEvaluation g;
      try {
        g = green(op, E);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::Singular) throw;
        ++rep.norm_violations;
        rep.worst_norm_ratio = std::numeric_limits<double>::infinity();
        continue;
      }
      rep.worst_norm_ratio = std::max(rep.worst_norm_ratio, g.op_norm / nb);
      if (g.op_norm > nb) ++rep.norm_violations;
      const double floor = g.resolution();
      for (size_t i = 0; i < g.size(); ++i) {
        for (size_t j = i; j < g.size(); ++j) {
          const double bound = nb * std::exp(-rho * std::pow(double(sup_dist(g.sites[i], g.sites[j])), gamma));
          const double a = g.abs(i, j);
          if (a <= floor) {
            ++rep.unresolved;
            continue;
          }
          rep.worst_entry_ratio = std::max(rep.worst_entry_ratio, a / bound);
          if (a > bound) ++rep.entry_violations;
        }
      }
    }
  }
  return rep;
}

// -- LDT scan --

std::vector<double> energy_grid(const OperatorSpec& spec, int count) {
  if (count < 1) throw Error(ErrorCode::Validation, "energy grid needs at least one point");
  const auto [lo, hi] = numerical_range(spec);
  std::vector<double> e(count);
  for (int i = 0; i < count; ++i) e[i] = lo + (i + 0.5) * (hi - lo) / count;
  return e;
}

std::vector<BadSetEstimate> ldt_scan(const OperatorSpec& spec, const ScaleSchedule& sch, int N,
                                     const std::vector<double>& energies, const ScanGrid& grid, double rho_bar,
                                     const Mapper& map, const LdtScanOptions& opt, std::vector<ScanRecord>* records) {
  spec.validate();
  if (spec.family != Family::Dual) throw Error(ErrorCode::Validation, "ldt_scan needs a DUAL operator");
  if (grid.line_points < 1000) throw Error(ErrorCode::Validation, "ldt_scan needs >= 1000 points per line");
  if (N < 1) throw Error(ErrorCode::Validation, "ldt_scan: N must be >= 1");
  const int d = spec.dim();
  const std::vector<GridPoint> pts = grid_points(grid, d);
  const std::vector<RegionShape> shapes = enumerate_shapes(d);
  const size_t ne = energies.size();
  const bool keep = opt.keep_records && records;
  const double norm_cap = ldt_norm_threshold(N, spec.v.gamma);

  struct Slot {
    std::vector<uint8_t> fail;
    std::vector<double> fit_sum;
    std::vector<size_t> fit_count;
    std::vector<ScanRecord> recs;
  };
  std::vector<Slot> slots(pts.size());
  map(pts.size(), [&](size_t p) {
    Slot& s = slots[p];
    s.fail.assign(ne, 0);
    s.fit_sum.assign(ne, 0.0);
    s.fit_count.assign(ne, 0);
    for (const RegionShape& sh : shapes) {
      const AssembledOperator op = assemble_dual(spec, shaped(sh, N, Site{}, d), pts[p].theta);
      const Resolvent r(op);
      for (size_t e = 0; e < ne; ++e) {
        if (s.fail[e] && !keep) continue;
        ScanRecord rec;
        rec.point = p;
        rec.energy = energies[e];
        rec.shape_id = sh.id();
        rec.op_norm = r.norm_at(energies[e]);
        if (!keep && !(rec.op_norm <= norm_cap)) {
          s.fail[e] = 1;
          continue;
        }
        try {
          const BoundCertificate c = check_ldt_bounds(r.at(energies[e]), rho_bar, opt.ceiling);
          rec.pass_norm = c.pass_norm;
          rec.pass_decay = c.pass_decay;
          rec.worst_pair_rate = c.fit.min_rate;
          s.fit_sum[e] += c.fit.rho_bar_fit;
          ++s.fit_count[e];
        } catch (const Error& err) {
          if (err.code() != ErrorCode::Singular) throw;
          rec.op_norm = std::numeric_limits<double>::infinity();
        }
        if (!(rec.pass_norm && rec.pass_decay)) s.fail[e] = 1;
        if (keep) s.recs.push_back(std::move(rec));
      }
    }
  });

  std::vector<BadSetEstimate> out(ne);
  for (size_t e = 0; e < ne; ++e) {
    BadSetEstimate& b = out[e];
    b.scale = N;
    b.energy = energies[e];
    b.omega = spec.omega.coords;
    b.grid = grid;
    b.dim = d;
    b.target = sch.target(N);
    b.rho_bar = rho_bar;
    b.indicator.resize(pts.size());
    double fs = 0.0;
    size_t fc = 0;
    for (size_t p = 0; p < pts.size(); ++p) {
      b.indicator[p] = slots[p].fail[e];
      fs += slots[p].fit_sum[e];
      fc += slots[p].fit_count[e];
    }
    b.mean_fit_rate = fc ? fs / double(fc) : 0.0;
    summarize(b, pts);
  }
  if (keep)
    for (Slot& s : slots)
      for (ScanRecord& r : s.recs) records->push_back(std::move(r));
  return out;
}

// -- Cartan-type window scan --

double resonance_window(double rho, double gamma, int N1, double floor) {
  return std::max(2.0 * std::exp(-10.0 * rho * std::pow(static_cast<double>(N1), gamma)), floor);
}

ResonanceScan resonance_measure_scan(const OperatorSpec& spec, const Region& lambda, const TorusPoint& theta, int j,
                                     double delta1, double E, double threshold, int points) {
  spec.validate();
  if (spec.family != Family::Dual) throw Error(ErrorCode::Validation, "resonance scan needs a DUAL operator");
  if (j < 0 || j >= spec.dim() || theta.dim() != spec.dim())
    throw Error(ErrorCode::DimensionMismatch, "resonance scan: coordinate or theta dimension mismatch");
  if (!(delta1 >= 0) || points < 1 || !(threshold > 0))
    throw Error(ErrorCode::Validation, "resonance scan: need delta1 >= 0, threshold > 0 and points >= 1");
  ResonanceScan r;
  r.delta1 = delta1;
  r.lo = theta[j] - delta1 / 2;
  r.hi = theta[j] + delta1 / 2;
  r.threshold = threshold;
  r.target = std::exp(-std::pow(static_cast<double>(lambda.size), spec.v.gamma / 3.0));
  if (delta1 == 0.0) return r;
  r.points = points;
  r.grid_step = delta1 / points;
  std::vector<double> c = theta.coords;
  for (int i = 0; i < points; ++i) {
    c[j] = r.lo + (i + 0.5) * r.grid_step;
    const AssembledOperator op = assemble_dual(spec, lambda, TorusPoint(c));
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(op.matrix, Eigen::EigenvaluesOnly);
    const double gap = (es.eigenvalues().array() - E).abs().minCoeff();
    // ||G|| = 1 / gap >= threshold
    if (gap * threshold <= 1.0) ++r.hits;
  }
  r.measure = r.hits * r.grid_step;
  return r;
}

// -- multiscale certification --

MultiscaleTrace multiscale_verify(const OperatorSpec& spec, const ScaleSchedule& sch, double E,
                                  const TorusPoint& theta, const MultiscaleOptions& opt) {
  spec.validate();
  sch.validate();
  if (spec.family != Family::Dual) throw Error(ErrorCode::Validation, "multiscale_verify needs a DUAL operator");
  const int d = spec.dim(), N1 = sch.N1;
  const double gamma = spec.v.gamma;
  const double rho_bar = opt.rho_bar > 0 ? opt.rho_bar : terminal_rate(spec.v.rho, gamma);
  const int M_hi = opt.M_max > 0 ? opt.M_max
                                 : std::max(static_cast<int>(std::ceil(10.0 * std::pow(double(sch.N), sch.c4))), sch.N);
  const std::vector<RegionShape> shapes = enumerate_shapes(d);
  const double norm_cap = ldt_norm_threshold(N1, gamma);

  MultiscaleTrace tr;
  tr.theta = theta;
  tr.energy = E;
  tr.N1 = N1;
  tr.N = sch.N;

  // theta + k w outside X_{N1}: every shape of size N1 around k passes the LDT bounds
  std::map<Site, bool> good;
  auto is_good = [&](const Site& k) {
    auto it = good.find(k);
    if (it != good.end()) return it->second;
    bool ok = true;
    for (const RegionShape& sh : shapes) {
      const AssembledOperator op = assemble_dual(spec, shaped(sh, N1, k, d), theta);
      const Resolvent r(op);
      if (!(r.norm_at(E) <= norm_cap)) {
        ok = false;
        break;
      }
      try {
        if (!check_ldt_bounds(r.at(E), rho_bar).pass()) ok = false;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::Singular) throw;
        ok = false;
      }
      if (!ok) break;
    }
    ++tr.sites_checked;
    if (!ok) ++tr.sites_bad;
    return good.emplace(k, ok).first->second;
  };

  // smallest M whose annulus certificates hold and whose decay hypotheses are met; otherwise the
  // smallest M with norm certificates only
  std::optional<MultiscaleTrace> fallback;
  for (int M = 1; M <= M_hi; ++M) {
    AnnulusAttempt at;
    at.M = M;
    const int r = static_cast<int>(std::floor(std::pow(double(M), gamma / (10.0 * d))));
    const SiteSet box = region_points(Region::cube(d, M));
    std::vector<Site> ring, core;
    for (const Site& p : box.points()) (sup_norm(p) > r ? ring : core).push_back(p);
    if (ring.empty()) {
      at.note = "empty annulus";
      tr.attempts.push_back(at);
      continue;
    }
    at.all_good = true;
    for (const Site& k : ring)
      if (!is_good(k)) {
        at.all_good = false;
        at.note = "bad site " + site_string(k, d);
        break;
      }
    if (!at.all_good) {
      tr.attempts.push_back(at);
      continue;
    }
    const SiteSet annulus(d, ring), core_set(d, core);
    auto accept_ring = [&](const Region& w) { return annulus.contains(w.center) && is_good(w.center); };
    Cover ring_cover, box_cover;
    try {
      ring_cover = pave_region(annulus, N1, N1, accept_ring);
      // core points are covered by blocks centred in the annulus
      box_cover = pave_region(box, N1, N1, accept_ring);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Infeasible) throw;
      at.note = "not paveable by good blocks";
      tr.attempts.push_back(at);
      continue;
    }
    at.paveable = true;

    const AssembledOperator op = assemble_dual(spec, Region::cube(d, M), theta);
    const AssembledOperator op_ring = restrict_to(op, annulus, M);
    BlockGreens blocks(op, E), ring_blocks(op_ring, E);
    MultiscaleTrace cand = tr;
    try {
      cand.box = paving_certify(op, box_cover, blocks, N1, N1, opt.cross_check);
      cand.annulus = paving_certify(op_ring, ring_cover, ring_blocks, N1, N1, opt.cross_check);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::HypothesisViolated) throw;
      at.note = e.what();
      tr.attempts.push_back(at);
      continue;
    }
    cand.M = M;
    cand.core_radius = r;
    cand.annulus_points = ring.size();
    cand.certified_norm = cand.box.schur_bound;
    cand.formula_norm = cand.box.formula_bound;

    AnnulusSetup s;
    s.core = core_set;
    s.M0 = N1;
    s.M_max = N1;
    s.crude_norm = cand.certified_norm;
    s.c_res2 = opt.c_res2;
    s.rho_bar = rho_bar;
    s.rho = spec.v.rho;
    s.energy = E;
    cand.decay = annulus_decay_evaluate(op, s);
    cand.direct_norm = cand.decay.direct_norm;
    cand.slack = cand.direct_norm > 0 ? cand.certified_norm / cand.direct_norm : std::numeric_limits<double>::infinity();
    if (cand.decay.gating_ok()) {
      at.note = "certified";
      tr.attempts.push_back(at);
      cand.attempts = tr.attempts;
      cand.sites_checked = tr.sites_checked;
      cand.sites_bad = tr.sites_bad;
      return cand;
    }
    at.note = "decay not asserted: " + cand.decay.failed();
    tr.attempts.push_back(at);
    cand.decay_note = at.note;
    if (!fallback) fallback = std::move(cand);
  }
  if (fallback) {
    fallback->attempts = tr.attempts;
    fallback->sites_checked = tr.sites_checked;
    fallback->sites_bad = tr.sites_bad;
    return *fallback;
  }
  throw Error(ErrorCode::NoGoodAnnulus, "no good annulus for M <= " + std::to_string(M_hi) + " (" +
                                            std::to_string(tr.sites_bad) + " of " +
                                            std::to_string(tr.sites_checked) + " sites bad at scale " +
                                            std::to_string(N1) + ")");
}

}  // namespace gev
