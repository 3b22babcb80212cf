#include <doctest.h>

#include <algorithm>
#include <cfloat>
#include <cmath>

#include "gevlab/duality.hpp"
#include "gevlab/errors.hpp"
#include "gevlab/greens.hpp"
#include "gevlab/spectral.hpp"

using namespace gev;

namespace {

OperatorSpec free_direct(double gamma) { return aubry_dual_map(default_dual_spec(0.0, gamma)); }

// equal up to the solver's rescaling, a few ulps
bool ulps(double a, double b) { return std::abs(a - b) <= 4 * DBL_EPSILON * std::max(1.0, std::abs(b)); }

}  // namespace

TEST_CASE("eigensystem at lambda=0 is the sorted diagonal") {
  const OperatorSpec s = default_dual_spec(0.0, 0.7);
  const AssembledOperator op = assemble_dual(s, Region::cube(1, 12), TorusPoint({0.17}));
  const EigenSystem es = eigensystem(op);
  REQUIRE(es.size() == op.size());
  std::vector<double> diag(op.size());
  for (size_t i = 0; i < op.size(); ++i) diag[i] = op.matrix(i, i);
  std::sort(diag.begin(), diag.end());
  for (size_t i = 0; i < diag.size(); ++i) CHECK(ulps(es.values[i], diag[i]));
  CHECK(es.residual <= 1e-10 * es.op_norm);
  CHECK(es.orthonormality <= 1e-10);
}

TEST_CASE("free tridiagonal truncation has eigenvalues 2cos(pi k/42)") {
  const AssembledOperator op = assemble_direct(free_direct(0.7), 20);
  const EigenSystem es = eigensystem(op);
  REQUIRE(es.size() == 41);
  std::vector<double> want;
  for (int k = 1; k <= 41; ++k) want.push_back(2 * std::cos(M_PI * k / 42));
  std::sort(want.begin(), want.end());
  for (size_t i = 0; i < want.size(); ++i) CHECK(es.values[i] == doctest::Approx(want[i]).epsilon(1e-12));
}

TEST_CASE("eigensystem invariants on the default model") {
  const OperatorSpec s = default_dual_spec(0.05, 0.5);
  const EigenSystem es = eigensystem(assemble_dual(s, Region::cube(1, 40), TorusPoint({0.61})));
  CHECK(es.size() == 81);
  CHECK(es.residual <= 1e-10 * es.op_norm);
  CHECK(es.orthonormality <= 1e-10);
  for (size_t i = 1; i < es.size(); ++i) CHECK(es.values[i - 1] <= es.values[i]);
}

TEST_CASE("site delta is capped at the ceiling") {
  const OperatorSpec s = default_dual_spec(0.0, 0.7);
  const AssembledOperator op = assemble_dual(s, Region::cube(1, 20), TorusPoint({0.3}));
  const EigenSystem es = eigensystem(op);
  for (size_t k = 0; k < es.size(); ++k) {
    const LocalizationProfile p = localization_profile(es.vectors.col(k), es.sites, 20, 0.7, 50.0);
    CHECK(p.capped);
    CHECK(p.rate == 50.0);
    CHECK_FALSE(p.extended);
  }
}

TEST_CASE("free DIRECT eigenvectors are flagged extended") {
  const EigenSystem es = eigensystem(assemble_direct(free_direct(1.0), 20));
  for (size_t k = 0; k < es.size(); ++k) {
    const LocalizationProfile p = localization_profile(es.vectors.col(k), es.sites, 20, 1.0);
    CHECK(p.extended);
  }
}

TEST_CASE("profile centre attains the max and rates are nonnegative") {
  const OperatorSpec s = default_dual_spec(1e-3, 0.7);
  const EigenSystem es = eigensystem(assemble_dual(s, Region::cube(1, 32), TorusPoint({0.41})));
  size_t good = 0, mid = 0;
  const double target = 0.9 * terminal_rate(1.0, 0.7);
  for (size_t k = 0; k < es.size(); ++k) {
    const auto v = es.vectors.col(k);
    const LocalizationProfile p = localization_profile(v, es.sites, 32, 0.7);
    CHECK(std::abs(v[es.sites.index_of(p.center)]) == v.cwiseAbs().maxCoeff());
    CHECK((p.rate >= 0 || p.extended));
    if (k >= es.size() / 3 && k < 2 * es.size() / 3) {
      ++mid;
      good += p.rate >= target;
    }
  }
  CHECK(good >= 0.9 * mid);
}

TEST_CASE("quasimode residual vanishes at lambda=0") {
  const OperatorSpec s = default_dual_spec(0.0, 0.7);
  const AssembledOperator op = assemble_dual(s, Region::cube(1, 16), TorusPoint({0.2}));
  const EigenSystem es = eigensystem(op);
  const long i0 = op.sites.index_of(Site{});
  Eigen::Index k = 0;
  es.vectors.row(i0).cwiseAbs().maxCoeff(&k);
  const QuasimodeResidual q = quasimode_residual(s, TorusPoint({0.2}), op.sites, es.vectors.col(k), es.values[k], 5, 40);
  CHECK(q.certified == 0.0);
}

TEST_CASE("quasimode residual is nonincreasing in the big box") {
  const OperatorSpec s = default_dual_spec(1e-3, 0.7);
  const TorusPoint th({0.37});
  const AssembledOperator op = assemble_dual(s, Region::cube(1, 32), th);
  const EigenSystem es = eigensystem(op);
  const long i0 = op.sites.index_of(Site{});
  Eigen::Index k = 0;
  es.vectors.row(i0).cwiseAbs().maxCoeff(&k);
  double prev = 1e300;
  for (int big : {33, 40, 48, 64, 96, 128}) {
    const QuasimodeResidual q = quasimode_residual(s, th, op.sites, es.vectors.col(k), es.values[k], 16, big);
    CHECK(q.certified <= prev * (1 + 1e-12));
    CHECK(q.tail >= 0);
    prev = q.certified;
  }
  CHECK_THROWS_AS(quasimode_residual(s, th, op.sites, es.vectors.col(k), es.values[k], 32, 96), Error);
  CHECK_THROWS_AS(quasimode_residual(s, th, op.sites, es.vectors.col(k), es.values[k], 16, 32), Error);
}

TEST_CASE("lambda=0 branch is f itself") {
  const OperatorSpec s = default_dual_spec(0.0, 0.7);
  const auto th = theta_samples(128);
  const BranchSet b = branch_extract(s, 8, th, 1.0 / 128);
  REQUIRE(b.branches.size() == 1);
  const EigenBranch& br = b.branches[0];
  CHECK(br.lo == doctest::Approx(0.0));
  CHECK(br.hi == doctest::Approx(1.0));
  REQUIRE(br.samples.size() == 128);
  for (const auto& x : br.samples) {
    CHECK(ulps(x.energy, evaluate_potential(s.analytic, TorusPoint({x.theta}))));
    CHECK(x.mass == 1.0);
    CHECK(x.residual == 0.0);
  }
  CHECK(b.dropped.empty());
}

TEST_CASE("mass floor at N=32") { CHECK(std::pow(65.0, -0.5) == doctest::Approx(0.124).epsilon(1e-2)); }

TEST_CASE("branch selection never comes up empty at lambda=0.01") {
  const OperatorSpec s = default_dual_spec(0.01, 0.7);
  const BranchSet b = branch_extract(s, 16, theta_samples(128), 1.0 / 128, {}, thread_mapper(4));
  CHECK(b.dropped.empty());
  CHECK(b.mass_floor == doctest::Approx(std::pow(33.0, -0.5)));
  size_t n = 0;
  for (const auto& br : b.branches) {
    for (size_t i = 0; i < br.samples.size(); ++i) {
      CHECK(br.samples[i].mass >= b.mass_floor);
      if (i) CHECK(std::abs(br.samples[i].energy - br.samples[i - 1].energy) <= b.tolerance);
      ++n;
    }
    CHECK(br.e_min <= br.e_max);
  }
  CHECK(n == 128);
}

TEST_CASE("continuity breaks split branches") {
  OperatorSpec s = default_dual_spec(0.0, 0.7);
  BranchOptions o;
  o.continuity_factor = 0.5;  // below the slope of f almost everywhere
  const BranchSet b = branch_extract(s, 4, theta_samples(64), 1.0 / 64, o);
  CHECK(b.branches.size() > 1);
}

TEST_CASE("refinement at lambda=0 is exact") {
  const OperatorSpec s = default_dual_spec(0.0, 0.7);
  const BranchSet p = branch_extract(s, 4, theta_samples(64), 1.0 / 64);
  const RefineResult r = branch_refine(s, p, 8, 2);
  CHECK(r.ledger.loss <= 0.0);
  CHECK(r.ledger.empty_windows == 0);
  for (const auto& br : r.set.branches)
    for (const auto& x : br.samples) CHECK(ulps(x.energy, evaluate_potential(s.analytic, TorusPoint({x.theta}))));
}

TEST_CASE("refinement with N1=N and the same grid is the identity") {
  const OperatorSpec s = default_dual_spec(0.01, 0.7);
  const BranchSet p = branch_extract(s, 8, theta_samples(64), 1.0 / 64);
  const RefineResult r = branch_refine(s, p, 8, 1);
  REQUIRE(r.set.branches.size() == p.branches.size());
  for (size_t b = 0; b < p.branches.size(); ++b) {
    REQUIRE(r.set.branches[b].samples.size() == p.branches[b].samples.size());
    for (size_t i = 0; i < p.branches[b].samples.size(); ++i) {
      CHECK(r.set.branches[b].samples[i].energy == p.branches[b].samples[i].energy);
      CHECK(r.set.branches[b].samples[i].index == p.branches[b].samples[i].index);
    }
  }
  CHECK(r.ledger.loss == 0.0);
}

TEST_CASE("refinement ledger on the default model") {
  const OperatorSpec s = default_dual_spec(0.01, 0.7);
  const Mapper m = thread_mapper(4);
  const BranchSet p = branch_extract(s, 8, theta_samples(128), 1.0 / 128, {}, m);
  const RefineResult r = branch_refine(s, p, 16, 1, {}, m);
  CHECK(r.ledger.allowed == doctest::Approx(1.0 / 16 + 2 * 4 * M_PI / 128));
  CHECK(r.ledger.holds());
  CHECK(r.ledger.empty_windows == 0);
  for (const auto& br : r.set.branches)
    for (const auto& x : br.samples) CHECK(x.mass >= r.set.mass_floor);
}

TEST_CASE("interval unions") {
  const Intervals a = normalize_intervals({{2, 3}, {0, 1}, {0.5, 1.5}, {3, 4}});
  REQUIRE(a.size() == 2);
  CHECK(a[0] == std::pair<double, double>{0, 1.5});
  CHECK(a[1] == std::pair<double, double>{2, 4});
  CHECK(intervals_measure(a) == 3.5);
  // [0,1] vs [0,0.2] u [0.8,1]: the gap midpoint 0.5 is 0.3 away
  CHECK(hausdorff_distance({{0, 1}}, {{0, 0.2}, {0.8, 1}}) == doctest::Approx(0.3));
  CHECK(hausdorff_distance({{0, 1}}, {{0, 1}}) == 0.0);
  CHECK(hausdorff_distance({{0, 1}}, {{3, 4}}) == doctest::Approx(3.0));
}

TEST_CASE("lambda=0 spectrum measure is the range of f") {
  const OperatorSpec s = default_dual_spec(0.0, 0.7);
  const SpectrumEstimate d = spectrum_direct(s, {8, 256, 1, 0});
  REQUIRE(d.intervals.size() == 1);
  CHECK(std::abs(d.measure - 4.0) <= d.resolution);
  BranchOptions o;
  o.residuals = false;
  const BranchSet b = branch_extract(s, 8, theta_samples(4096), 1.0 / 4096, o);
  const SpectrumEstimate e = spectrum_from_branches(b);
  CHECK(std::abs(e.measure - 4.0) <= 4 * M_PI / 4096);
}

TEST_CASE("branch measure stays below the direct sweep plus its inflation") {
  const OperatorSpec s = default_dual_spec(0.01, 0.7);
  const Mapper m = thread_mapper(4);
  const SpectrumEstimate b = spectrum_from_branches(branch_extract(s, 8, theta_samples(128), 1.0 / 128, {}, m));
  const SpectrumEstimate d = spectrum_direct(s, {8, 128, 1, 0}, m);
  CHECK(b.provenance == "branch");
  CHECK(d.provenance == "direct");
  CHECK(b.measure <= d.measure + b.budget + d.resolution);
  for (size_t i = 1; i < d.intervals.size(); ++i) CHECK(d.intervals[i - 1].second < d.intervals[i].first);
}

TEST_CASE("Poisson identity at lambda=0") {
  const OperatorSpec s = default_dual_spec(0.0, 0.7);
  const AssembledOperator big = assemble_dual(s, Region::cube(1, 20), TorusPoint({0.3}));
  const EigenSystem es = eigensystem(big);
  size_t checked = 0;
  for (size_t k = 0; k < es.size(); ++k) {
    Eigen::Index c = 0;
    es.vectors.col(k).cwiseAbs().maxCoeff(&c);
    if (sup_norm(big.sites[c]) <= 8) continue;  // resonant with the sub-box
    const PoissonCheck p = poisson_residual_check(big, es.vectors.col(k), es.values[k], Region::cube(1, 8));
    CHECK(p.residual <= p.budget + 1e-300);
    ++checked;
  }
  CHECK(checked == 24);
}

TEST_CASE("Poisson identity on interior eigenpairs") {
  const OperatorSpec s = default_dual_spec(1e-3, 0.7);
  const PoissonSample ps = poisson_sample(s, TorusPoint({0.3}), 40, 16, 6, 10, 3);
  REQUIRE(ps.checks.size() == 10);
  for (const auto& c : ps.checks) {
    CHECK(c.residual <= 1e-8 + c.budget);
    CHECK(sup_norm(c.center) > 16);
    CHECK(sup_norm(c.center) <= 34);
  }
}

TEST_CASE("Poisson check propagates Singular") {
  const OperatorSpec s = default_dual_spec(0.0, 0.7);
  const AssembledOperator big = assemble_dual(s, Region::cube(1, 10), TorusPoint({0.3}));
  const EigenSystem es = eigensystem(big);
  // an eigenpair centred inside the sub-box makes H_sub - E singular
  for (size_t k = 0; k < es.size(); ++k) {
    Eigen::Index c = 0;
    es.vectors.col(k).cwiseAbs().maxCoeff(&c);
    if (sup_norm(big.sites[c]) != 0) continue;
    try {
      poisson_residual_check(big, es.vectors.col(k), es.values[k], Region::cube(1, 4));
      FAIL("expected Singular");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::Singular);
    }
  }
}

TEST_CASE("Delyon chain values") {
  // independent prototype of the double sum at C = 1
  const OperatorSpec s = default_dual_spec(1e-3, 1.0);
  const SiteSet one(1, {Site{}});
  Eigen::VectorXd x(1);
  x[0] = 1.0;
  const DelyonReport r = delyon_bound(s, TorusPoint({0.3}), 0.5, {16, 32, 64}, one, x);
  REQUIRE(r.scales.size() == 3);
  CHECK(r.C == 1.0);
  CHECK(r.scales[0].bound == doctest::Approx(7.8).epsilon(0.01));
  CHECK(r.scales[1].bound == doctest::Approx(0.25).epsilon(0.02));
  CHECK(r.scales[2].bound == doctest::Approx(5e-5).epsilon(0.01));
  CHECK(r.strictly_decreasing());
  const DelyonReport r7 = delyon_bound(default_dual_spec(1e-3, 0.7), TorusPoint({0.3}), 0.5, {16, 32, 64}, one, x);
  CHECK(r7.scales[0].bound == doctest::Approx(266).epsilon(0.01));
  CHECK(r7.scales[1].bound == doctest::Approx(290).epsilon(0.01));
  CHECK(r7.scales[2].bound == doctest::Approx(195).epsilon(0.01));
  CHECK_FALSE(r7.strictly_decreasing());
}

TEST_CASE("Delyon constant scales the bound") {
  const OperatorSpec s = default_dual_spec(1e-3, 1.0);
  const SiteSet pts(1, {make_site({0}), make_site({2}), make_site({-5})});
  Eigen::VectorXd x(3);
  x << 1.0, 0.5, 6.0;  // sorted order: -5, 0, 2
  const DelyonReport r = delyon_bound(s, TorusPoint({0.3}), 0.5, {16}, pts, x);
  CHECK(r.C == 3.0);
}
