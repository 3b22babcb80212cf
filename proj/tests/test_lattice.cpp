#include <doctest.h>

#include <cmath>
#include <random>

#include "gevlab/errors.hpp"
#include "gevlab/lattice.hpp"

using namespace gev;

TEST_CASE("shape counts are 3^d - 2d") {
  CHECK(enumerate_shapes(1).size() == 1);
  CHECK(enumerate_shapes(2).size() == 5);
  CHECK(enumerate_shapes(3).size() == 21);
  CHECK(enumerate_shapes(4).size() == 73);
  for (int d = 2; d <= 4; ++d)
    for (const auto& s : enumerate_shapes(d))
      if (s.corner_removed) CHECK(s.flagged() >= 2);
  CHECK(enumerate_shapes(2)[0].id() == "cube");
  CHECK_THROWS_AS(RegionShape::corner({Sign::Pos, Sign::None}), Error);
}

TEST_CASE("region points") {
  CHECK(region_points(Region::cube(2, 1)).size() == 9);
  Region r;
  r.shape = RegionShape::corner({Sign::Pos, Sign::Pos});
  r.size = 1;
  r.dim = 2;
  const SiteSet pts = region_points(r);
  CHECK(pts.size() == 8);
  CHECK_FALSE(pts.contains(make_site({1, 1})));
  // ordered lexicographically
  for (size_t i = 1; i < pts.size(); ++i) CHECK(pts[i - 1] < pts[i]);

  const Site m = make_site({3, -2});
  const SiteSet moved = region_points(r.translated(m));
  REQUIRE(moved.size() == pts.size());
  for (size_t i = 0; i < pts.size(); ++i) CHECK(moved[i] == pts[i] + m);
}

TEST_CASE("region counts match enumeration for every shape") {
  for (int d = 1; d <= 3; ++d)
    for (const auto& s : enumerate_shapes(d))
      for (int N = 1; N <= 3; ++N) {
        Region r;
        r.shape = s;
        r.size = N;
        r.dim = d;
        const long long c = r.count();
        CHECK(static_cast<long long>(region_points(r).size()) == c);
        const long long full = static_cast<long long>(std::pow(2 * N + 1, d));
        CHECK(c <= full);
        if (d <= 2) CHECK(c >= full - static_cast<long long>(std::pow(N, d)));
      }
}

TEST_CASE("diam and dist agree with brute force") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> k(-6, 6);
  for (int t = 0; t < 20; ++t) {
    std::vector<Site> v;
    for (int i = 0; i < 30; ++i) v.push_back(make_site({k(rng), k(rng)}));
    const SiteSet s(2, v);
    int brute = 0;
    for (const Site& a : s.points())
      for (const Site& b : s.points()) brute = std::max(brute, sup_dist(a, b));
    CHECK(diam(s) == brute);
    const Site p = make_site({k(rng), k(rng)});
    int bd = 1 << 30;
    for (const Site& a : s.points()) bd = std::min(bd, sup_dist(a, p));
    CHECK(dist(p, s) == bd);
  }
}

static void check_cover(const SiteSet& lambda, const Cover& c, int M, int M_max) {
  REQUIRE(c.assignment.size() == lambda.size());
  for (size_t i = 0; i < lambda.size(); ++i) {
    const Region& w = c.blocks[c.assignment[i]];
    CHECK(w.contains(lambda[i]));
    CHECK(w.size >= M);
    CHECK(w.size <= M_max);
    const SiteSet wp = region_points(w);
    for (const Site& p : wp.points()) CHECK(lambda.contains(p));
    const SiteSet rest = set_difference(lambda, wp);
    if (!rest.empty()) CHECK(2 * dist(lambda[i], rest) >= w.size);
  }
}

TEST_CASE("pave_region on an interval") {
  const SiteSet lambda = region_points(Region::cube(1, 8));
  const Cover c = pave_region(lambda, 4, 4);
  check_cover(lambda, c, 4, 4);
  CHECK(lambda.size() == 17);
  CHECK_THROWS_AS(pave_region(Region::cube(1, 2), 8, 8), Error);
  // deterministic
  const Cover c2 = pave_region(lambda, 4, 4);
  CHECK(c2.blocks == c.blocks);
  CHECK(c2.assignment == c.assignment);
}

TEST_CASE("pave_region on a square and an annulus") {
  const SiteSet sq = region_points(Region::cube(2, 6));
  check_cover(sq, pave_region(sq, 2, 3), 2, 3);

  const SiteSet ann = set_difference(region_points(Region::cube(1, 20)), region_points(Region::cube(1, 2)));
  check_cover(ann, pave_region(ann, 4, 8), 4, 8);
}

TEST_CASE("pave_region honors the acceptance predicate") {
  const SiteSet lambda = region_points(Region::cube(1, 16));
  // refuse every block containing the origin at size 3
  auto accept = [](const Region& w) { return w.size > 3 || !w.contains(Site{}); };
  const Cover c = pave_region(lambda, 3, 5, accept);
  check_cover(lambda, c, 3, 5);
  for (const auto& w : c.blocks)
    if (w.contains(Site{})) CHECK(w.size > 3);
  CHECK_THROWS_AS(pave_region(lambda, 3, 3, [](const Region&) { return false; }), Error);
}
