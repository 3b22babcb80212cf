#include "gevlab/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gevlab/errors.hpp"

namespace gev {

RegionShape RegionShape::cube(int dim) {
  RegionShape s;
  s.signs.assign(dim, Sign::None);
  return s;
}

RegionShape RegionShape::corner(std::vector<Sign> signs) {
  RegionShape s;
  s.corner_removed = true;
  s.signs = std::move(signs);
  if (s.flagged() < 2) throw Error(ErrorCode::Validation, "corner shape needs >= 2 signs");
  return s;
}

int RegionShape::flagged() const {
  int k = 0;
  for (Sign g : signs) k += g != Sign::None;
  return k;
}

std::string RegionShape::id() const {
  if (!corner_removed) return "cube";
  std::string s = "corner:";
  for (Sign g : signs) s += g == Sign::Pos ? '+' : (g == Sign::Neg ? '-' : '0');
  return s;
}

Region Region::cube(int dim, int N, Site center) {
  if (dim < 1 || dim > kMaxDim) throw Error(ErrorCode::Validation, "region dim out of range");
  if (N < 0) throw Error(ErrorCode::Validation, "region size must be >= 0");
  Region r;
  r.shape = RegionShape::cube(dim);
  r.size = N;
  r.center = center;
  r.dim = dim;
  return r;
}

bool Region::contains(const Site& p) const {
  const Site q = p - center;
  for (int i = 0; i < kMaxDim; ++i) {
    if (i < dim ? std::abs(q[i]) > size : q[i] != 0) return false;
  }
  if (!shape.corner_removed) return true;
  for (int i = 0; i < dim; ++i) {
    if (shape.signs[i] == Sign::Pos && !(q[i] > 0)) return true;
    if (shape.signs[i] == Sign::Neg && !(q[i] < 0)) return true;
  }
  return false;  // inside the removed corner
}

long long Region::count() const {
  long long side = 2LL * size + 1, total = 1;
  for (int i = 0; i < dim; ++i) total *= side;
  if (!shape.corner_removed) return total;
  long long removed = 1;
  for (int i = 0; i < dim; ++i) removed *= shape.signs[i] == Sign::None ? side : size;
  return total - removed;
}

Region Region::translated(const Site& m) const {
  Region r = *this;
  r.center = center + m;
  return r;
}

std::vector<RegionShape> enumerate_shapes(int d) {
  if (d < 1 || d > kMaxDim) throw Error(ErrorCode::Validation, "enumerate_shapes: bad dimension");
  std::vector<RegionShape> out{RegionShape::cube(d)};
  std::vector<int> code(d, 0);  // 0 None, 1 Neg, 2 Pos
  while (true) {
    int flagged = 0;
    for (int c : code) flagged += c != 0;
    if (flagged >= 2) {
      std::vector<Sign> s;
      for (int c : code) s.push_back(c == 0 ? Sign::None : (c == 1 ? Sign::Neg : Sign::Pos));
      out.push_back(RegionShape::corner(s));
    }
    int i = d - 1;
    while (i >= 0 && ++code[i] > 2) code[i--] = 0;
    if (i < 0) break;
  }
  return out;
}

SiteSet::SiteSet(int dim, std::vector<Site> sites) : dim_(dim), pts_(std::move(sites)) {
  std::sort(pts_.begin(), pts_.end());
  pts_.erase(std::unique(pts_.begin(), pts_.end()), pts_.end());
}

long SiteSet::index_of(const Site& s) const {
  auto it = std::lower_bound(pts_.begin(), pts_.end(), s);
  if (it == pts_.end() || *it != s) return -1;
  return static_cast<long>(it - pts_.begin());
}

SiteSet region_points(const Region& r) {
  if (r.count() > 1000000) throw Error(ErrorCode::Validation, "region too large to materialize");
  std::vector<Site> pts;
  pts.reserve(static_cast<size_t>(r.count()));
  Site q{};
  for (int i = 0; i < r.dim; ++i) q[i] = -r.size;
  while (true) {
    const Site p = q + r.center;
    if (r.contains(p)) pts.push_back(p);
    int i = r.dim - 1;
    while (i >= 0 && ++q[i] > r.size) q[i--] = -r.size;
    if (i < 0) break;
  }
  return SiteSet(r.dim, std::move(pts));
}

SiteSet set_difference(const SiteSet& a, const SiteSet& b) {
  std::vector<Site> out;
  std::set_difference(a.points().begin(), a.points().end(), b.points().begin(), b.points().end(),
                      std::back_inserter(out));
  return SiteSet(a.dim(), std::move(out));
}

SiteSet set_union(const SiteSet& a, const SiteSet& b) {
  std::vector<Site> out;
  std::set_union(a.points().begin(), a.points().end(), b.points().begin(), b.points().end(),
                 std::back_inserter(out));
  return SiteSet(a.dim(), std::move(out));
}

int diam(const SiteSet& s) {
  // the sup-norm diameter is the largest coordinate range
  if (s.empty()) return 0;
  int best = 0;
  for (int i = 0; i < s.dim(); ++i) {
    int lo = std::numeric_limits<int>::max(), hi = std::numeric_limits<int>::min();
    for (const Site& p : s.points()) {
      lo = std::min(lo, p[i]);
      hi = std::max(hi, p[i]);
    }
    best = std::max(best, hi - lo);
  }
  return best;
}

int dist(const Site& n, const SiteSet& s) {
  int best = std::numeric_limits<int>::max();
  for (const Site& p : s.points()) best = std::min(best, sup_dist(n, p));
  return best;
}

namespace {

bool block_inside(const Region& w, const SiteSet& lambda) {
  const SiteSet pts = region_points(w);
  for (const Site& p : pts.points())
    if (!lambda.contains(p)) return false;
  return true;
}

int dist_outside(const Site& n, const Region& w, const SiteSet& lambda) {
  int best = std::numeric_limits<int>::max();
  for (const Site& p : lambda.points())
    if (!w.contains(p)) best = std::min(best, sup_dist(n, p));
  return best;
}

// centers w with |w - n| <= M, nearest first, then lexicographic
std::vector<Site> candidate_centers(const Site& n, int dim, int M) {
  std::vector<Site> out;
  Site q{};
  for (int i = 0; i < dim; ++i) q[i] = -M;
  while (true) {
    out.push_back(n + q);
    int i = dim - 1;
    while (i >= 0 && ++q[i] > M) q[i--] = -M;
    if (i < 0) break;
  }
  std::stable_sort(out.begin(), out.end(), [&](const Site& a, const Site& b) {
    const int da = sup_dist(a, n), db = sup_dist(b, n);
    if (da != db) return da < db;
    int sa = 0, sb = 0;
    for (int i = 0; i < dim; ++i) {
      sa += std::abs(a[i] - n[i]);
      sb += std::abs(b[i] - n[i]);
    }
    if (sa != sb) return sa < sb;
    return a < b;
  });
  return out;
}

}  // namespace

Cover pave_region(const SiteSet& lambda, int M, int M_max, const BlockPredicate& accept,
                  const SiteSet* targets) {
  if (M < 1 || M_max < M) throw Error(ErrorCode::Validation, "pave_region: need 1 <= M <= M_max");
  if (diam(lambda) < 2 * M + 1)
    throw Error(ErrorCode::Infeasible, "pave_region: diam(Lambda) < 2M+1");
  const int d = lambda.dim();
  const auto shapes = enumerate_shapes(d);
  Cover cover;
  cover.assignment.assign(lambda.size(), -1);
  for (size_t idx = 0; idx < lambda.size(); ++idx) {
    const Site& n = lambda[idx];
    if (targets && !targets->contains(n)) continue;
    // reuse an existing block if it already satisfies the guarantee for n
    for (size_t b = 0; b < cover.blocks.size() && cover.assignment[idx] < 0; ++b) {
      const Region& w = cover.blocks[b];
      if (w.contains(n) && sup_dist(n, w.center) <= w.size / 2 &&
          2 * dist_outside(n, w, lambda) >= w.size)
        cover.assignment[idx] = static_cast<int>(b);
    }
    for (int m = M; m <= M_max && cover.assignment[idx] < 0; ++m) {
      for (const Site& w0 : candidate_centers(n, d, m)) {
        bool found = false;
        for (const RegionShape& sh : shapes) {
          Region w;
          w.shape = sh;
          w.size = m;
          w.center = w0;
          w.dim = d;
          if (!w.contains(n)) continue;
          if (!block_inside(w, lambda)) continue;
          if (2 * dist_outside(n, w, lambda) < m) continue;
          if (accept && !accept(w)) continue;
          cover.assignment[idx] = static_cast<int>(cover.blocks.size());
          cover.blocks.push_back(w);
          found = true;
          break;
        }
        if (found) break;
      }
    }
    if (cover.assignment[idx] < 0)
      throw Error(ErrorCode::Infeasible,
                  "pave_region: no admissible block for site (" + site_string(n, d) + ")");
  }
  return cover;
}

Cover pave_region(const Region& lambda, int M, int M_max, const BlockPredicate& accept) {
  return pave_region(region_points(lambda), M, M_max, accept);
}

}  // namespace gev
