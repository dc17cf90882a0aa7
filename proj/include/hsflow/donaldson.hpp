#pragma once

// Torsion-free hypersymplectic structures from a convex potential u on a box
// in R^3 with det Hess u = 1 and S = 1:
//   omega_i = dt ^ dx^i + 1/2 U^ij eps_jkl dx^k ^ dx^l,   U = (Hess u)^-1,
// on coordinates (t, x1, x2, x3). The t axis is a single periodic point, so
// every t-derivative vanishes.

#include "hsflow/field.hpp"

#include <array>
#include <span>
#include <vector>

namespace hsflow {

/// Even solution of (16/27)(w^2 w'' - 4 w w'^2) = 1, w(0) = w0, w'(0) = 0.
class WProfile {
 public:
  double w0() const { return w0_; }
  /// End of the integration interval: the detected blow-up or the request.
  double delta() const { return delta_; }
  bool blew_up() const { return blew_up_; }
  double tol() const { return tol_; }

  struct Node {
    double x, w, dw, d2w;
    double residual;  // det Hess u - 1 relative to the cancelling terms
  };
  /// Accepted integrator steps on [0, delta).
  const std::vector<Node>& nodes() const { return nodes_; }
  /// max of |(16/27)(w^2 w'' - 4 w w'^2) - 1| / max(1, (16/27)(w^2 |w''| + 4 w w'^2))
  /// over accepted nodes with x <= 0.9 delta, w'' taken from the derivative of
  /// the dense output of w'.
  double max_residual() const { return max_residual_; }

  /// (w, w', w'') at each x, |x| < delta. Negative x are integrated towards
  /// the left rather than mirrored.
  std::vector<std::array<double, 3>> sample(std::span<const double> xs) const;

 private:
  friend WProfile solve_w_ode(double, double, double);
  double w0_ = 1.0, delta_ = 0.0, tol_ = 1e-10;
  bool blew_up_ = false;
  std::vector<Node> nodes_;
  double max_residual_ = 0.0;
};

/// Throws DomainError for w0 <= 0 and DomainCollapse if convexity is lost
/// before the derivatives blow up.
WProfile solve_w_ode(double w0, double delta_request, double tol = 1e-10);

struct PotentialData {
  Lattice lattice;  // chart lattice, axis 0 is t
  Field hess;       // u_ij, 6 components (sym3 over x1..x3)
  Field third;      // u_ijk, 10 components, see third_index
  Field s;          // S, 1 component
};

/// Slot of u_ijk (i, j, k in 0..2) in PotentialData::third.
int third_index(int i, int j, int k);

struct ChartBox {
  std::array<double, 3> lo{};
  std::array<double, 3> hi{};
};

/// Box (-0.9 delta, 0.9 delta) x [0.5, 1] x [-0.25, 0.25].
ChartBox default_ansatz_box(double delta);
/// Lattice over the box with spacing about `h` (each axis gets an integer
/// number of cells; halving h halves every spacing).
Lattice chart_lattice(const ChartBox& box, int cells_per_half_unit);

/// u = |x|^2 / 2.
PotentialData quadratic_potential(const Lattice& chart);
/// u = r^(4/3) w(x1), r^2 = x2^2 + x3^2; third derivatives by FD4 of the
/// sampled Hessian.
PotentialData ansatz_potential(const WProfile& w, const Lattice& chart);

struct ChartTriple {
  Field omega;  // 18 components
  Field u_inv;  // U = (Hess u)^-1, 6 components
  double closedness = 0.0;  // max |d omega_i|
  double q_minus_u = 0.0;   // max |Q - U| / max(1, |U|) per point
  double det_hess_drift = 0.0;  // max |det Hess u - 1|
};

/// Throws NonIntegrableAlpha if S is not constant.
ChartTriple build_chart_triple(const PotentialData& pd);

struct TorsionFreeReport {
  double tau = 0.0;       // max |tau| over the report zone
  double laplacian = 0.0; // max |Laplacian Q|
  double ricci = 0.0;     // max |Ric - 1/4 <dQ x dQ>_Q|
  double scalar = 0.0;    // max |R - (1/4S) U U U u u|
  double max_scalar = 0.0;  // max R in the zone
  double sup_dQ2 = 0.0;
  double closedness = 0.0;  // over the zone
  double chart_closedness = 0.0;
  double q_minus_u = 0.0;
  double det_hess_drift = 0.0;
  double min_margin = 0.0;
  std::size_t zone_points = 0;
};

/// Residuals over the points of `zone` (physical coordinates x1..x3).
TorsionFreeReport verify_torsion_free(const PotentialData& pd, const ChartTriple& ct, const ChartBox& zone);

/// Inner box keeping the middle `keep` fraction of each side.
ChartBox shrink(const ChartBox& box, double keep);

struct DonaldsonStudyRow {
  int cells = 0;  // per half unit of length
  double h = 0.0; // x2 spacing
  TorsionFreeReport report;
};

struct DonaldsonStudy {
  double w0 = 1.0;
  double delta = 0.0;
  double ode_residual = 0.0;
  double keep = 0.5;
  TorsionFreeReport quadratic;  // u = |x|^2 / 2 on the same chart box
  std::vector<DonaldsonStudyRow> rows;
  // Observed orders from the two finest rows.
  double order_tau = 0.0, order_laplacian = 0.0, order_ricci = 0.0, order_scalar = 0.0;
};

/// Quadratic and ansatz charts at each refinement, residuals on the middle
/// `keep` fraction of the ansatz box.
DonaldsonStudy donaldson_study(double w0, const std::vector<int>& cells, double keep = 0.5);

double observed_order(double coarse, double fine, double h_coarse, double h_fine);

/// v_a(x) = 32a / (32 - a^2 x^2); DomainError unless 0 <= x < 4 sqrt(2) / a.
double calabi_comparison(double a, double x);
/// (v, v', v'') in closed form.
std::array<double, 3> calabi_derivatives(double a, double x);
/// v'' + 3 v' / x - v^3 / 4 for x > 0, 0 at x = 0 (v'(0) = 0 limit).
double calabi_ode_residual(double a, double x);
/// Blow-up point of the ODE v'' + 3v'/x = v^3/4, v(0) = a, located by
/// integrating the ODE for 1/v from the regular singular point.
double calabi_pole_numeric(double a);

}  // namespace hsflow
