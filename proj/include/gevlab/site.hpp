#pragma once

#include <array>
#include <cstdlib>
#include <string>
#include <vector>

namespace gev {

constexpr int kMaxDim = 4;

// lattice point in Z^d, unused trailing coordinates are zero
using Site = std::array<int, kMaxDim>;

inline int sup_norm(const Site& n) {
  int m = 0;
  for (int v : n) m = std::max(m, std::abs(v));
  return m;
}

inline int sup_dist(const Site& a, const Site& b) {
  int m = 0;
  for (int i = 0; i < kMaxDim; ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline Site operator+(const Site& a, const Site& b) {
  Site r{};
  for (int i = 0; i < kMaxDim; ++i) r[i] = a[i] + b[i];
  return r;
}

inline Site operator-(const Site& a, const Site& b) {
  Site r{};
  for (int i = 0; i < kMaxDim; ++i) r[i] = a[i] - b[i];
  return r;
}

inline Site operator-(const Site& a) {
  Site r{};
  for (int i = 0; i < kMaxDim; ++i) r[i] = -a[i];
  return r;
}

Site make_site(const std::vector<int>& v);
std::vector<int> site_vector(const Site& s, int dim);
std::string site_string(const Site& s, int dim);

}  // namespace gev
