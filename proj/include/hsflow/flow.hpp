#pragma once

// The hypersymplectic flow d omega / dt = d tau, tau_i = Q_ik d*(Q^kl omega_l).
//
// Field layouts: a triple is 18 components (three stacked 2-forms), a
// OneFormTriple 12 (three stacked 1-forms), an SPD3 field 6 (sym3 packing),
// first derivatives of Q 24 (component a * 6 + s), second derivatives 60
// (component sym4_index(a, b) * 6 + s).

#include "hsflow/forms.hpp"
#include "hsflow/spd3.hpp"

#include <limits>
#include <memory>

namespace hsflow {

using OneFormTriple = Field;

class FlowState {
 public:
  FlowState(const Lattice& lattice, Backend backend, Field omega, double t = 0.0);
  /// Same lattice and derivative backend as `like`, new data.
  FlowState(const FlowState& like, Field omega, double t);

  double t() const { return t_; }
  void set_t(double t) { t_ = t; }
  const Lattice& lattice() const { return omega_.lattice(); }
  Backend backend() const { return deriv_->backend(); }
  const Derivatives& derivatives() const { return *deriv_; }
  std::shared_ptr<const Derivatives> derivatives_ptr() const { return deriv_; }

  const Field& omega() const { return omega_; }
  /// Mutable access; marks every cache dirty.
  Field& omega_mut();
  bool dirty() const { return dirty_; }

  // Caches, refreshed on demand. Refreshing throws NotHypersymplectic with
  // the offending flat index when some point fails the Gram test.
  const Field& q() const;
  const Field& q_inv() const;
  const Field& mu() const;
  const Metric4Field& metric() const;
  const OneFormTriple& tau() const;
  /// Smallest eigenvalue of the Gram matrix with respect to e0123.
  double margin() const;
  std::size_t margin_index() const;

  Mat3 q_at(std::size_t p) const;
  Mat3 q_inv_at(std::size_t p) const;
  Triple2FormPoint triple_at(std::size_t p) const;

 private:
  void refresh() const;

  double t_;
  Field omega_;
  std::shared_ptr<const Derivatives> deriv_;

  mutable bool dirty_ = true;
  mutable bool tau_dirty_ = true;
  mutable Field q_, q_inv_, mu_;
  mutable Metric4Field metric_;
  mutable OneFormTriple tau_;
  mutable double margin_ = 0.0;
  mutable std::size_t margin_index_ = 0;
};

struct StepControl {
  double dt = 0.0;  // > 0 fixes the step; 0 selects it from the stability bound
  double safety = 0.2;
  double max_t2_dt = std::numeric_limits<double>::infinity();  // cap on sup|T|^2 * dt
  double margin_floor = 0.0;  // StabilityLoss when the margin drops to this
};

Mat3 sym3_at(const Field& f, int offset, std::size_t p);

OneFormTriple compute_torsion(const FlowState& state);
/// d tau, stacked as a triple.
Field time_derivative(const FlowState& state);

/// dt from the diffusive bound dt * sup(|T|^2 + |dQ|^2 + h^-2 |g^-1| tr Q) <= safety,
/// or ctl.dt when fixed.
double select_dt(const FlowState& state, const StepControl& ctl);

/// One classical RK4 step of size dt (may be negative for difference
/// quotients). Throws StabilityLoss on margin collapse.
FlowState rk4_step(const FlowState& state, double dt, const StepControl& ctl = {});
FlowState step(const FlowState& state, const StepControl& ctl);

/// First derivatives of Q in the state's backend (24 components).
Field q_gradient(const FlowState& state);
/// Second derivatives of Q (60 components).
Field q_hessian(const FlowState& state);

/// Pointwise |dQ|^2_Q.
Field dq_norm_sq_field(const FlowState& state, const Field& dq);
Field dq_norm_sq_field(const FlowState& state);

/// <tau_i, tau_j>_g as an SPD3-layout field.
Field tau_gram(const FlowState& state);
/// tr(Q^-1 <tau, tau>).
Field torsion_norm_sq(const FlowState& state);
/// Norm of the torsion 2-form of the G2-structure on M x T^3 in the tensor
/// convention, |T|^2 = T_ab T^ab = 1/2 tr(Q^-1 <tau, tau>). This is the
/// normalisation under which d mu / dt = 2/3 |T|^2 mu, R(g) = 1/4 |dQ|^2 - |T|^2
/// and |T|^2 <= 3/2 |dQ|^2 hold.
Field g2_torsion_norm_sq(const FlowState& state);

QJet q_jet_at(const FlowState& state, const Field& dq, const Field& d2q, std::size_t p);

/// Laplacian Q + <tau, tau> - 1/3 |T|^2 Q.
Field q_evolution_rhs(const FlowState& state, const Field& christoffels);
Field q_evolution_rhs(const FlowState& state);

/// -2 Ric + 1/2 <dQ x dQ>_Q + Q^ij tau_i x tau_j - 1/3 tr(Q^-1 <tau, tau>) g,
/// i.e. -2/3 |T|^2 g with the G2 norm.
Field metric_evolution_rhs(const FlowState& state, const Field& ricci);

/// Metric components of g as a Field (10 components), for difference quotients.
const Field& metric_components(const FlowState& state);

}  // namespace hsflow
