#pragma once

#include "hsflow/algebra.hpp"
#include "hsflow/field.hpp"

#include <cmath>
#include <cstdint>
#include <random>

namespace testing {

inline double uniform(std::mt19937_64& g, double lo = -1.0, double hi = 1.0) {
  return lo + (hi - lo) * static_cast<double>(g() >> 11) * 0x1.0p-53;
}

/// Standard triple plus a random perturbation of size eps.
inline hsflow::Triple2FormPoint random_triple(std::mt19937_64& g, double eps) {
  hsflow::Triple2FormPoint t = hsflow::standard_triple();
  for (auto& w : t.omega)
    for (double& c : w.c) c += eps * uniform(g);
  return t;
}

inline hsflow::Mat3 random_spd(std::mt19937_64& g, double spread = 0.5) {
  hsflow::Mat3 a;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) a(i, j) = (i == j ? 1.0 : 0.0) + spread * uniform(g);
  return a * a.transpose() + 0.1 * hsflow::Mat3::Identity();
}

inline hsflow::Mat4 random_metric(std::mt19937_64& g, double spread = 0.3) {
  hsflow::Mat4 a;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) a(i, j) = (i == j ? 1.0 : 0.0) + spread * uniform(g);
  return a * a.transpose() + 0.1 * hsflow::Mat4::Identity();
}

/// Lattice of the 2 pi torus with n points per axis.
inline hsflow::Lattice torus(int n) { return hsflow::Grid4{n, 2.0 * M_PI}.lattice(); }

inline std::array<double, 4> coords(const hsflow::Lattice& lat, std::size_t p) {
  const auto i = lat.unflatten(p);
  return {lat.coord(0, i[0]), lat.coord(1, i[1]), lat.coord(2, i[2]), lat.coord(3, i[3])};
}

}  // namespace testing
