#include "hsflow/flow.hpp"

#include "hsflow/curvature.hpp"
#include "hsflow/errors.hpp"
#include "hsflow/parallel.hpp"

#include <cmath>
#include <sstream>

namespace hsflow {

FlowState::FlowState(const Lattice& lattice, Backend backend, Field omega, double t)
    : t_(t), omega_(std::move(omega)), deriv_(Derivatives::make(lattice, backend)) {
  if (omega_.components() != 18 || !(omega_.lattice() == lattice)) throw Error("flow state needs an 18-component triple");
}

FlowState::FlowState(const FlowState& like, Field omega, double t)
    : t_(t), omega_(std::move(omega)), deriv_(like.deriv_) {
  if (omega_.components() != 18 || !(omega_.lattice() == like.lattice()))
    throw Error("flow state needs an 18-component triple");
}

Field& FlowState::omega_mut() {
  dirty_ = true;
  tau_dirty_ = true;
  return omega_;
}

Triple2FormPoint FlowState::triple_at(std::size_t p) const {
  Triple2FormPoint t;
  for (int i = 0; i < 3; ++i) t.omega[i] = form2_at(omega_, i, p);
  return t;
}

Mat3 sym3_at(const Field& f, int offset, std::size_t p) {
  double v[6];
  for (int s = 0; s < 6; ++s) v[s] = f.at(offset + s, p);
  return unpack_sym3(v);
}

void FlowState::refresh() const {
  if (!dirty_) return;
  const Lattice& lat = lattice();
  const std::size_t n = lat.size();
  q_ = Field(lat, 6);
  q_inv_ = Field(lat, 6);
  mu_ = Field(lat, 1);
  Field g(lat, 10);
  std::vector<double> margins(n);
  std::vector<char> bad(n, 0);

  parallel_for(n, [&](std::size_t p) {
    const Triple2FormPoint tr = triple_at(p);
    Mat3 gram;
    for (int i = 0; i < 3; ++i)
      for (int j = i; j < 3; ++j) gram(i, j) = gram(j, i) = 0.5 * wedge(tr.omega[i], tr.omega[j]);
    Eigen::SelfAdjointEigenSolver<Mat3> es;
    es.computeDirect(gram, Eigen::EigenvaluesOnly);
    margins[p] = es.eigenvalues()(0);
    const double tol = 1e-12 * (1.0 + gram.cwiseAbs().rowwise().sum().maxCoeff());
    if (!std::isfinite(margins[p]) || !(min_cholesky_pivot<3>(gram) > tol)) {
      bad[p] = 1;
      return;
    }
    const double m = std::cbrt(gram.determinant());
    const Mat3 q = gram / m;
    const Mat3 qi = q.inverse();
    double v[10];
    pack_sym3(q, v);
    for (int s = 0; s < 6; ++s) q_.at(s, p) = v[s];
    pack_sym3(qi, v);
    for (int s = 0; s < 6; ++s) q_inv_.at(s, p) = v[s];
    mu_.at(0, p) = m;
    pack_sym4(metric_from_triple_unchecked(tr, m), v);
    for (int s = 0; s < 10; ++s) g.at(s, p) = v[s];
  });

  std::size_t imin = 0;
  for (std::size_t p = 1; p < n; ++p)
    if (margins[p] < margins[imin]) imin = p;
  margin_ = margins[imin];
  margin_index_ = imin;
  for (std::size_t p = 0; p < n; ++p) {
    if (bad[p]) {
      std::ostringstream os;
      os << "triple is not hypersymplectic at grid point " << p << " (margin " << margins[p] << ")";
      throw NotHypersymplectic(os.str(), p, margins[p]);
    }
  }
  metric_ = Metric4Field::from_metric(std::move(g));
  dirty_ = false;
}

const Field& FlowState::q() const {
  refresh();
  return q_;
}
const Field& FlowState::q_inv() const {
  refresh();
  return q_inv_;
}
const Field& FlowState::mu() const {
  refresh();
  return mu_;
}
const Metric4Field& FlowState::metric() const {
  refresh();
  return metric_;
}
double FlowState::margin() const {
  refresh();
  return margin_;
}
std::size_t FlowState::margin_index() const {
  refresh();
  return margin_index_;
}
Mat3 FlowState::q_at(std::size_t p) const { return sym3_at(q(), 0, p); }
Mat3 FlowState::q_inv_at(std::size_t p) const { return sym3_at(q_inv(), 0, p); }

const OneFormTriple& FlowState::tau() const {
  refresh();
  if (tau_dirty_) {
    tau_ = compute_torsion(*this);
    tau_dirty_ = false;
  }
  return tau_;
}

const Field& metric_components(const FlowState& state) { return state.metric().g; }

OneFormTriple compute_torsion(const FlowState& state) {
  const Lattice& lat = state.lattice();
  const Field& q = state.q();
  const Field& qi = state.q_inv();
  Field sigma(lat, 18);
  parallel_for(lat.size(), [&](std::size_t p) {
    const Mat3 qinv = sym3_at(qi, 0, p);
    for (int k = 0; k < 3; ++k)
      for (int s = 0; s < 6; ++s) {
        double v = 0.0;
        for (int l = 0; l < 3; ++l) v += qinv(k, l) * state.omega().at(6 * l + s, p);
        sigma.at(6 * k + s, p) = v;
      }
  });
  const Field ds = codifferential_2(state.derivatives(), state.metric(), sigma);
  OneFormTriple tau(lat, 12);
  parallel_for(lat.size(), [&](std::size_t p) {
    const Mat3 qm = sym3_at(q, 0, p);
    for (int i = 0; i < 3; ++i)
      for (int a = 0; a < 4; ++a) {
        double v = 0.0;
        for (int k = 0; k < 3; ++k) v += qm(i, k) * ds.at(4 * k + a, p);
        tau.at(4 * i + a, p) = v;
      }
  });
  return tau;
}

Field time_derivative(const FlowState& state) { return ext_d(state.derivatives(), state.tau(), 1); }

Field q_gradient(const FlowState& state) {
  const Field& q = state.q();
  Field out(state.lattice(), 24);
  std::vector<const double*> in(6);
  for (int s = 0; s < 6; ++s) in[s] = q.comp(s);
  std::vector<double*> o(24);
  std::vector<std::vector<DerivTerm>> terms(24);
  for (int a = 0; a < 4; ++a)
    for (int s = 0; s < 6; ++s) {
      o[a * 6 + s] = out.comp(a * 6 + s);
      terms[a * 6 + s] = {{s, a, 1.0}};
    }
  state.derivatives().first_order(in, terms, o);
  return out;
}

Field q_hessian(const FlowState& state) {
  const Field& q = state.q();
  Field out(state.lattice(), 60);
  for (int s = 0; s < 6; ++s) {
    std::array<double*, 10> o;
    for (int k = 0; k < 10; ++k) o[k] = out.comp(k * 6 + s);
    state.derivatives().hessian(q.comp(s), o);
  }
  return out;
}

QJet q_jet_at(const FlowState& state, const Field& dq, const Field& d2q, std::size_t p) {
  QJet j;
  j.q = state.q_at(p);
  for (int a = 0; a < 4; ++a) j.dq[a] = sym3_at(dq, a * 6, p);
  for (int k = 0; k < 10; ++k) j.d2q[k] = sym3_at(d2q, k * 6, p);
  j.g.mat = state.metric().at(p);
  return j;
}

Field dq_norm_sq_field(const FlowState& state, const Field& dq) {
  Field out(state.lattice(), 1);
  parallel_for(state.lattice().size(), [&](std::size_t p) {
    const Mat3 qi = state.q_inv_at(p);
    const Mat4 gi = state.metric().inverse_at(p);
    std::array<Mat3, 4> y;
    for (int a = 0; a < 4; ++a) y[a] = qi * sym3_at(dq, a * 6, p);
    double s = 0.0;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) s += gi(a, b) * (y[a] * y[b]).trace();
    out.at(0, p) = s;
  });
  return out;
}

Field dq_norm_sq_field(const FlowState& state) { return dq_norm_sq_field(state, q_gradient(state)); }

Field tau_gram(const FlowState& state) {
  const OneFormTriple& tau = state.tau();
  Field out(state.lattice(), 6);
  parallel_for(state.lattice().size(), [&](std::size_t p) {
    const Mat4 gi = state.metric().inverse_at(p);
    Eigen::Vector4d t[3];
    for (int i = 0; i < 3; ++i)
      for (int a = 0; a < 4; ++a) t[i](a) = tau.at(4 * i + a, p);
    for (int s = 0; s < 6; ++s) {
      const auto [i, j] = kSym3Pairs[s];
      out.at(s, p) = t[i].dot(gi * t[j]);
    }
  });
  return out;
}

Field torsion_norm_sq(const FlowState& state) {
  const Field tg = tau_gram(state);
  Field out(state.lattice(), 1);
  parallel_for(state.lattice().size(), [&](std::size_t p) {
    out.at(0, p) = std::max(0.0, (state.q_inv_at(p) * sym3_at(tg, 0, p)).trace());
  });
  return out;
}

Field g2_torsion_norm_sq(const FlowState& state) {
  Field out = torsion_norm_sq(state);
  out.scale(0.5);
  return out;
}

double select_dt(const FlowState& state, const StepControl& ctl) {
  if (ctl.dt > 0.0) return ctl.dt;
  if (!(ctl.safety > 0.0)) throw ConfigError("dt safety must be positive");
  const Field t2 = torsion_norm_sq(state);
  const Field dq2 = dq_norm_sq_field(state);
  const double h = state.lattice().min_spacing();
  std::vector<double> v(state.lattice().size());
  std::vector<double> t2v(v.size());
  const Metric4Field& g = state.metric();
  parallel_for(v.size(), [&](std::size_t p) {
    const double trq = state.q().at(0, p) + state.q().at(1, p) + state.q().at(2, p);
    // Largest absolute row sum bounds the top eigenvalue of g^-1.
    const double gnorm = g.inverse_at(p).cwiseAbs().rowwise().sum().maxCoeff();
    v[p] = t2.at(0, p) + dq2.at(0, p) + trq * gnorm / (h * h);
    t2v[p] = t2.at(0, p);
  });
  double dt = ctl.safety / max_of(v);
  const double supt2 = max_of(t2v);
  if (supt2 > 0.0) dt = std::min(dt, ctl.max_t2_dt / supt2);
  return dt;
}

namespace {

Field rhs_of(const FlowState& like, const Field& omega, double t) {
  try {
    FlowState s(like, omega, t);
    return time_derivative(s);
  } catch (const NotHypersymplectic& e) {
    throw StabilityLoss(std::string("stage state lost hypersymplecticity: ") + e.what(), t, e.margin());
  }
}

}  // namespace

FlowState rk4_step(const FlowState& state, double dt, const StepControl& ctl) {
  const double t = state.t();
  const Field& w = state.omega();
  const Field k1 = time_derivative(state);
  Field w2 = w;
  w2.axpy(0.5 * dt, k1);
  const Field k2 = rhs_of(state, w2, t + 0.5 * dt);
  Field w3 = w;
  w3.axpy(0.5 * dt, k2);
  const Field k3 = rhs_of(state, w3, t + 0.5 * dt);
  Field w4 = w;
  w4.axpy(dt, k3);
  const Field k4 = rhs_of(state, w4, t + dt);

  Field next = w;
  double* o = next.data().data();
  const double *a = k1.data().data(), *b = k2.data().data(), *c = k3.data().data(), *d = k4.data().data();
  const double s = dt / 6.0;
  parallel_for(next.data().size(), [&](std::size_t i) { o[i] += s * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]); });

  FlowState out(state, std::move(next), t + dt);
  double margin;
  try {
    margin = out.margin();
  } catch (const NotHypersymplectic& e) {
    throw StabilityLoss(std::string("step lost hypersymplecticity: ") + e.what(), t + dt, e.margin());
  }
  if (margin <= ctl.margin_floor) {
    std::ostringstream os;
    os << "hypersymplectic margin " << margin << " at t = " << t + dt << " fell to the floor " << ctl.margin_floor;
    throw StabilityLoss(os.str(), t + dt, margin);
  }
  return out;
}

FlowState step(const FlowState& state, const StepControl& ctl) { return rk4_step(state, select_dt(state, ctl), ctl); }

Field q_evolution_rhs(const FlowState& state, const Field& christoffels) {
  const Field dq = q_gradient(state);
  const Field d2q = q_hessian(state);
  const Field tg = tau_gram(state);
  Field out(state.lattice(), 6);
  parallel_for(state.lattice().size(), [&](std::size_t p) {
    const QJet jet = q_jet_at(state, dq, d2q, p);
    Christoffel gam;
    for (int i = 0; i < 40; ++i) gam[i] = christoffels.at(i, p);
    const Mat3 tt = sym3_at(tg, 0, p);
    const double t2 = (state.q_inv_at(p) * tt).trace();
    const Mat3 r = harmonic_laplacian(jet, gam) + tt - (t2 / 3.0) * jet.q;
    double v[6];
    pack_sym3(r, v);
    for (int s = 0; s < 6; ++s) out.at(s, p) = v[s];
  });
  return out;
}

Field q_evolution_rhs(const FlowState& state) {
  return q_evolution_rhs(state, christoffel_field(state.metric()));
}

Field metric_evolution_rhs(const FlowState& state, const Field& ricci) {
  const Field dq = q_gradient(state);
  const OneFormTriple& tau = state.tau();
  const Field tg = tau_gram(state);
  Field out(state.lattice(), 10);
  parallel_for(state.lattice().size(), [&](std::size_t p) {
    const Mat3 qi = state.q_inv_at(p);
    const Mat4 gm = state.metric().at(p);
    std::array<Mat3, 4> y;
    for (int a = 0; a < 4; ++a) y[a] = qi * sym3_at(dq, a * 6, p);
    Eigen::Vector4d t[3];
    for (int i = 0; i < 3; ++i)
      for (int a = 0; a < 4; ++a) t[i](a) = tau.at(4 * i + a, p);
    const double t2 = (qi * sym3_at(tg, 0, p)).trace();
    double ric[10];
    for (int s = 0; s < 10; ++s) ric[s] = ricci.at(s, p);
    const Mat4 rc = unpack_sym4(ric);
    Mat4 r = -2.0 * rc - (1.0 / 3.0) * t2 * gm;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) r(a, b) += 0.5 * (y[a] * y[b]).trace();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r += qi(i, j) * 0.5 * (t[i] * t[j].transpose() + t[j] * t[i].transpose());
    double v[10];
    pack_sym4(r, v);
    for (int s = 0; s < 10; ++s) out.at(s, p) = v[s];
  });
  return out;
}

}  // namespace hsflow
