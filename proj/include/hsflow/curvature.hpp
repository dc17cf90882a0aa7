#pragma once

// Riemannian curvature of a lattice metric by 4th-order finite differences.
//
// Index conventions: Gamma^c_ab at component c * 10 + sym4_index(a, b);
// R_abcd with Ric_bd = g^ac R_abcd; Riemann stored as the symmetric 6x6
// matrix over the increasing pairs (01, 02, 03, 12, 13, 23), upper triangle
// row-major (21 entries; the first Bianchi identity removes one more).

#include "hsflow/forms.hpp"
#include "hsflow/spd3.hpp"

#include <array>

namespace hsflow {

inline constexpr std::array<std::pair<int, int>, 6> kBivectorPairs{
    {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};

struct CurvatureBundle {
  Field christoffel;  // 40
  Field riemann;      // 21
  Field ricci;        // 10
  Field scalar;       // 1

  Christoffel christoffel_at(std::size_t p) const;
  Mat4 ricci_at(std::size_t p) const;
  /// R_abcd at a point, fully expanded, index ((a * 4 + b) * 4 + c) * 4 + d.
  std::array<double, 256> riemann_at(std::size_t p) const;
};

/// Christoffel symbols only.
Field christoffel_field(const Metric4Field& g);

/// Throws DegenerateMetric if g is not positive definite.
CurvatureBundle curvature_of(const Metric4Field& g);

struct CurvatureNorms {
  double sup_rm = 0.0;
  double int_rm2 = 0.0;
  double sup_ric = 0.0;
  double int_ric4 = 0.0;
};

CurvatureNorms curvature_norms(const CurvatureBundle& bundle, const Metric4Field& g, const Field& mu);

/// max |R_0123 + R_0231 + R_0312| over the lattice.
double bianchi_residual(const CurvatureBundle& bundle);

/// max |g^bd Ric_bd - R| over the lattice.
double trace_residual(const CurvatureBundle& bundle, const Metric4Field& g);

/// Laplace-Beltrami g^ab (d_a d_b f - Gamma^c_ab d_c f) from first and
/// second derivatives at a point.
double laplace_beltrami(const Mat4& ginv, const Christoffel& gamma, const std::array<double, 4>& df,
                        const std::array<double, 10>& d2f);

}  // namespace hsflow
