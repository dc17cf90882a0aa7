#pragma once

// Exterior calculus on lattice fields. A k-form field stores its components in
// the bases of algebra.hpp (1, 4, 6, 4 components for k = 0..3); several forms
// of the same degree may be stacked in one Field as consecutive blocks.

#include "hsflow/algebra.hpp"
#include "hsflow/field.hpp"

#include <array>

namespace hsflow {

constexpr int form_components(int degree) {
  constexpr int c[5] = {1, 4, 6, 4, 1};
  return c[degree];
}

/// Per-point metric with cached inverse and sqrt(det g).
struct Metric4Field {
  Field g;         // 10 components, packed sym4
  Field ginv;      // 10 components
  Field sqrt_det;  // 1 component

  /// Throws DegenerateMetric unless every point is positive definite.
  static Metric4Field from_metric(Field g);
  static Metric4Field flat(const Lattice& lattice);

  const Lattice& lattice() const { return g.lattice(); }
  Mat4 at(std::size_t p) const;
  Mat4 inverse_at(std::size_t p) const;
};

/// d on each stacked block of a degree-k field, k in {0, 1, 2}.
Field ext_d(const Derivatives& d, const Field& form, int degree);

/// d* = -*d* on each stacked 2-form block, the stars taken with respect to g.
Field codifferential_2(const Derivatives& d, const Metric4Field& g, const Field& w);

/// Pointwise star of stacked 2-form blocks.
Field hodge_star_2_field(const Metric4Field& g, const Field& w);

/// Integral of a scalar density (a 4-form coefficient) with the
/// lattice measure, summed in pairwise order.
double integrate(const Field& density, int component = 0);

/// Integral of one component weighted by a density field.
double integrate_weighted(const Field& f, int component, const Field& density);

/// Pairings of a 2-form block with the six coordinate 2-tori, in Form2 order.
std::array<double, 6> cohomology_pairings(const Field& w, int block = 0);

Form2 form2_at(const Field& w, int block, std::size_t p);
void set_form2(Field& w, int block, std::size_t p, const Form2& v);

}  // namespace hsflow
