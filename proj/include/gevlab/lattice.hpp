#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gevlab/site.hpp"

namespace gev {

enum class Sign { None, Neg, Pos };

struct RegionShape {
  bool corner_removed = false;
  std::vector<Sign> signs;  // one per coordinate, used when corner_removed

  static RegionShape cube(int dim);
  static RegionShape corner(std::vector<Sign> signs);  // >= 2 non-None entries
  std::string id() const;                               // "cube" or e.g. "corner:+0-"
  int flagged() const;
  bool operator==(const RegionShape&) const = default;
};

struct Region {
  RegionShape shape;
  int size = 0;  // N
  Site center{};
  int dim = 1;

  static Region cube(int dim, int N, Site center = {});
  bool contains(const Site& p) const;
  long long count() const;
  Region translated(const Site& m) const;
  bool operator==(const Region&) const = default;
};

// 3^d - 2d shapes: the full cube, then corner shapes in lexicographic sign order
std::vector<RegionShape> enumerate_shapes(int d);

// sorted set of lattice sites with a row index per site
class SiteSet {
 public:
  SiteSet() = default;
  SiteSet(int dim, std::vector<Site> sites);  // sorts and deduplicates

  int dim() const { return dim_; }
  size_t size() const { return pts_.size(); }
  bool empty() const { return pts_.empty(); }
  const Site& operator[](size_t i) const { return pts_[i]; }
  const std::vector<Site>& points() const { return pts_; }
  long index_of(const Site& s) const;  // -1 if absent
  bool contains(const Site& s) const { return index_of(s) >= 0; }
  bool operator==(const SiteSet&) const = default;

 private:
  int dim_ = 1;
  std::vector<Site> pts_;
};

SiteSet region_points(const Region& r);
SiteSet set_difference(const SiteSet& a, const SiteSet& b);
SiteSet set_union(const SiteSet& a, const SiteSet& b);

int diam(const SiteSet& s);
// +infinity (as a large int) for the empty set
int dist(const Site& n, const SiteSet& s);

struct Cover {
  std::vector<Region> blocks;
  std::vector<int> assignment;  // per point of the paved set, index into blocks (-1 if not a target)
};

using BlockPredicate = std::function<bool(const Region&)>;

// targets: points that need a block (default all of lambda)
Cover pave_region(const SiteSet& lambda, int M, int M_max, const BlockPredicate& accept = {},
                  const SiteSet* targets = nullptr);
Cover pave_region(const Region& lambda, int M, int M_max, const BlockPredicate& accept = {});

}  // namespace gev
