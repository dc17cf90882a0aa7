#include "hsflow/diagnostics.hpp"

#include "hsflow/errors.hpp"
#include "hsflow/parallel.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace hsflow {

using nlohmann::ordered_json;

namespace {

// Per-point pieces of the tr Q heat operator for one state.
struct TrHeat {
  Field trq;       // tr Q
  Field lap_trq;   // Laplace-Beltrami tr Q
  Field t2_trq;    // |T|^2 tr Q (G2 norm)
  Field identity;  // right-hand side of the exact identity
};

TrHeat tr_heat_parts(const FlowState& s) {
  const Lattice& lat = s.lattice();
  const std::size_t n = lat.size();
  TrHeat h{Field(lat, 1), Field(lat, 1), Field(lat, 1), Field(lat, 1)};
  for (std::size_t p = 0; p < n; ++p) h.trq.at(0, p) = s.q().at(0, p) + s.q().at(1, p) + s.q().at(2, p);

  Field grad(lat, 4), hess(lat, 10);
  std::array<double*, 4> go;
  for (int a = 0; a < 4; ++a) go[a] = grad.comp(a);
  s.derivatives().gradient(h.trq.comp(0), go);
  std::array<double*, 10> ho;
  for (int k = 0; k < 10; ++k) ho[k] = hess.comp(k);
  s.derivatives().hessian(h.trq.comp(0), ho);
  const Field gam = christoffel_field(s.metric());
  const Field dq = q_gradient(s);
  const Field tg = tau_gram(s);

  parallel_for(n, [&](std::size_t p) {
    const Mat4 gi = s.metric().inverse_at(p);
    Christoffel c;
    for (int i = 0; i < 40; ++i) c[i] = gam.at(i, p);
    std::array<double, 4> df;
    std::array<double, 10> d2f;
    for (int a = 0; a < 4; ++a) df[a] = grad.at(a, p);
    for (int k = 0; k < 10; ++k) d2f[k] = hess.at(k, p);
    h.lap_trq.at(0, p) = laplace_beltrami(gi, c, df, d2f);

    const Mat3 qi = s.q_inv_at(p);
    const Mat3 tt = sym3_at(tg, 0, p);
    const double trace_t = (qi * tt).trace();
    const double trq = h.trq.at(0, p);
    h.t2_trq.at(0, p) = 0.5 * trace_t * trq;
    std::array<Mat3, 4> dqa;
    for (int a = 0; a < 4; ++a) dqa[a] = sym3_at(dq, a * 6, p);
    double grad_term = 0.0;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) grad_term += gi(a, b) * (dqa[a] * qi * dqa[b]).trace();
    h.identity.at(0, p) = -grad_term + tt.trace() - trace_t * trq / 3.0;
  });
  return h;
}

template <class F>
Field midpoint_combine(const FlowState& before, const FlowState& after, F&& f) {
  const double dt = after.t() - before.t();
  if (!(dt != 0.0)) throw Error("heat residual needs two states at different times");
  const TrHeat a = tr_heat_parts(before), b = tr_heat_parts(after);
  Field out(before.lattice(), 1);
  parallel_for(out.points(), [&](std::size_t p) {
    const double dtr = (b.trq.at(0, p) - a.trq.at(0, p)) / dt;
    const double heat = dtr - 0.5 * (a.lap_trq.at(0, p) + b.lap_trq.at(0, p));
    out.at(0, p) = f(heat, a, b, p);
  });
  return out;
}

double field_min(const Field& f) { return min_of(f.data()); }
double field_max(const Field& f) { return max_of(f.data()); }

}  // namespace

Field heat_tr_residual(const FlowState& before, const FlowState& after) {
  return midpoint_combine(before, after, [](double heat, const TrHeat& a, const TrHeat& b, std::size_t p) {
    return (5.0 / 3.0) * 0.5 * (a.t2_trq.at(0, p) + b.t2_trq.at(0, p)) - heat;
  });
}

Field heat_tr_identity_error(const FlowState& before, const FlowState& after) {
  return midpoint_combine(before, after, [](double heat, const TrHeat& a, const TrHeat& b, std::size_t p) {
    return heat - 0.5 * (a.identity.at(0, p) + b.identity.at(0, p));
  });
}

namespace {

struct BochnerOut {
  Field residual;
  Field hess_norm2;
};

BochnerOut bochner_impl(const Derivatives& d, const Metric4Field& g, const Field& q, const CurvatureBundle* bundle) {
  const Lattice& lat = q.lattice();
  const std::size_t n = lat.size();
  Field qinv(lat, 6);
  parallel_for(n, [&](std::size_t p) {
    double v[6];
    pack_sym3(spd_inverse(sym3_at(q, 0, p)), v);
    for (int s = 0; s < 6; ++s) qinv.at(s, p) = v[s];
  });

  Field dq(lat, 24), d2q(lat, 60);
  {
    std::vector<const double*> in(6);
    for (int s = 0; s < 6; ++s) in[s] = q.comp(s);
    std::vector<double*> o(24);
    std::vector<std::vector<DerivTerm>> terms(24);
    for (int a = 0; a < 4; ++a)
      for (int s = 0; s < 6; ++s) {
        o[a * 6 + s] = dq.comp(a * 6 + s);
        terms[a * 6 + s] = {{s, a, 1.0}};
      }
    d.first_order(in, terms, o);
    for (int s = 0; s < 6; ++s) {
      std::array<double*, 10> ho;
      for (int k = 0; k < 10; ++k) ho[k] = d2q.comp(k * 6 + s);
      d.hessian(q.comp(s), ho);
    }
  }

  auto gamma_at = [&](std::size_t p) {
    if (!bundle) return flat_christoffel();
    return bundle->christoffel_at(p);
  };

  Field lap(lat, 6), dq2(lat, 1), hess2(lat, 1);
  std::vector<std::array<Mat3, 10>> hess_store(n);
  parallel_for(n, [&](std::size_t p) {
    QJet jet;
    jet.q = sym3_at(q, 0, p);
    for (int a = 0; a < 4; ++a) jet.dq[a] = sym3_at(dq, a * 6, p);
    for (int k = 0; k < 10; ++k) jet.d2q[k] = sym3_at(d2q, k * 6, p);
    jet.g.mat = g.at(p);
    const Mat4 gi = g.inverse_at(p);
    const Mat3 qi = sym3_at(qinv, 0, p);
    const Christoffel gam = gamma_at(p);
    double v[6];
    pack_sym3(harmonic_laplacian(jet, gam), v);
    for (int s = 0; s < 6; ++s) lap.at(s, p) = v[s];
    std::array<Mat3, 4> y;
    for (int a = 0; a < 4; ++a) y[a] = qi * jet.dq[a];
    double s2 = 0.0;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) s2 += gi(a, b) * (y[a] * y[b]).trace();
    dq2.at(0, p) = s2;
    hess_store[p] = harmonic_hessian(jet, qi, gam);
    const auto& h = hess_store[p];
    double hn = 0.0;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        for (int c = 0; c < 4; ++c)
          for (int e = 0; e < 4; ++e)
            hn += gi(a, c) * gi(b, e) * (qi * h[sym4_index(a, b)] * qi * h[sym4_index(c, e)]).trace();
    hess2.at(0, p) = hn;
  });

  Field dlap(lat, 24), ddq2(lat, 4), hdq2(lat, 10);
  {
    std::vector<const double*> in(6);
    for (int s = 0; s < 6; ++s) in[s] = lap.comp(s);
    std::vector<double*> o(24);
    std::vector<std::vector<DerivTerm>> terms(24);
    for (int a = 0; a < 4; ++a)
      for (int s = 0; s < 6; ++s) {
        o[a * 6 + s] = dlap.comp(a * 6 + s);
        terms[a * 6 + s] = {{s, a, 1.0}};
      }
    d.first_order(in, terms, o);
    std::array<double*, 4> go;
    for (int a = 0; a < 4; ++a) go[a] = ddq2.comp(a);
    d.gradient(dq2.comp(0), go);
    std::array<double*, 10> ho;
    for (int k = 0; k < 10; ++k) ho[k] = hdq2.comp(k);
    d.hessian(dq2.comp(0), ho);
  }

  Field out(lat, 1);
  parallel_for(n, [&](std::size_t p) {
    const Mat4 gi = g.inverse_at(p);
    const Mat3 qi = sym3_at(qinv, 0, p);
    const Mat3 lq = sym3_at(lap, 0, p);
    const Christoffel gam = gamma_at(p);
    std::array<double, 4> df;
    std::array<double, 10> d2f;
    for (int a = 0; a < 4; ++a) df[a] = ddq2.at(a, p);
    for (int k = 0; k < 10; ++k) d2f[k] = hdq2.at(k, p);
    const double half_lap = 0.5 * laplace_beltrami(gi, gam, df, d2f);

    std::array<Mat3, 4> dqa;
    for (int a = 0; a < 4; ++a) dqa[a] = sym3_at(dq, a * 6, p);
    double cross = 0.0;
    for (int a = 0; a < 4; ++a) {
      const Mat3 nab = pullback_derivative(sym3_at(dlap, a * 6, p), lq, dqa[a], qi);
      for (int b = 0; b < 4; ++b) cross += gi(a, b) * (qi * nab * qi * dqa[b]).trace();
    }
    double ric_term = 0.0;
    if (bundle) {
      const Mat4 ricup = gi * bundle->ricci_at(p) * gi;
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) ric_term += ricup(a, b) * (qi * dqa[a] * qi * dqa[b]).trace();
    }
    out.at(0, p) = half_lap - hess2.at(0, p) - cross - ric_term;
  });
  return {std::move(out), std::move(hess2)};
}

}  // namespace

Field bochner_residual(const Derivatives& d, const Metric4Field& g, const Field& q, const CurvatureBundle* bundle) {
  return bochner_impl(d, g, q, bundle).residual;
}

RegionFlag max_principle_region(const FlowState& state) {
  double sup = -std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < state.lattice().size(); ++p)
    sup = std::max(sup, state.q().at(0, p) + state.q().at(1, p) + state.q().at(2, p));
  return {sup < kMaxPrincipleBound, sup, kMaxPrincipleBound - sup};
}

RegionFlag c0_criterion(const FlowState& state, double eps0) {
  if (!(eps0 > 0.0)) throw DomainError("eps0 must be positive");
  const Field dq2 = dq_norm_sq_field(state);
  double sup = -std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < state.lattice().size(); ++p)
    sup = std::max(sup, state.q().at(0, p) + state.q().at(1, p) + state.q().at(2, p) + dq2.at(0, p));
  return {sup <= 3.0 + eps0, sup, 3.0 + eps0 - sup};
}

DiagnosticsRecord record(const FlowState& state, const CurvatureBundle& bundle, const RecordOptions& opt) {
  const Lattice& lat = state.lattice();
  const std::size_t n = lat.size();
  DiagnosticsRecord r;
  r.t = state.t();

  const Field dq = q_gradient(state);
  const Field dq2 = dq_norm_sq_field(state, dq);
  const Field t2 = g2_torsion_norm_sq(state);
  const Field& mu = state.mu();

  std::vector<double> trq(n), lmin(n), lmax(n), detd(n), sd(n), t2w(n), t4w(n), wsum(n), excess(n), c0v(n);
  parallel_for(n, [&](std::size_t p) {
    const Mat3 q = state.q_at(p);
    Eigen::SelfAdjointEigenSolver<Mat3> es;
    es.computeDirect(q, Eigen::EigenvaluesOnly);
    trq[p] = q.trace();
    lmin[p] = 1.0 - es.eigenvalues()(0);
    lmax[p] = es.eigenvalues()(2) - 1.0;
    detd[p] = std::abs(q.determinant() - 1.0);
    const Triple2FormPoint tr = state.triple_at(p);
    const Mat4 gi = state.metric().inverse_at(p);
    const double sdet = state.metric().sqrt_det.at(0, p);
    double dev = 0.0, ws = 0.0;
    for (int i = 0; i < 3; ++i) {
      dev = std::max(dev, (hodge_star_2(gi, sdet, tr.omega[i]) - tr.omega[i]).max_abs());
      ws += wedge(tr.omega[i], tr.omega[i]);
    }
    sd[p] = dev;
    wsum[p] = ws / 6.0;
    const double tt = t2.at(0, p);
    t2w[p] = tt * mu.at(0, p);
    t4w[p] = tt * tt * mu.at(0, p);
    excess[p] = tt - 1.5 * dq2.at(0, p);
    c0v[p] = trq[p] + dq2.at(0, p);
  });

  r.sup_trQ = max_of(trq);
  r.inf_trQ = min_of(trq);
  r.sup_dQ2 = field_max(dq2);
  r.sup_T2 = field_max(t2);
  const double cv = lat.cell_volume();
  r.int_T2 = cv * pairwise_sum(t2w);
  r.int_T4 = cv * pairwise_sum(t4w);
  r.vol = integrate(mu);
  r.vol_bound_rhs = cv * pairwise_sum(wsum);
  for (int i = 0; i < 3; ++i) r.pairings[i] = cohomology_pairings(state.omega(), i);
  r.delta_lower = max_of(lmin);
  r.delta_upper = max_of(lmax);
  r.detQ_drift = max_of(detd);
  r.self_duality_residual = max_of(sd);
  r.hs_margin = state.margin();
  r.sup_trQ_plus_dQ2 = max_of(c0v);
  r.T2_bound_excess = max_of(excess);
  r.sup_dQ4_16 = r.sup_dQ2 * r.sup_dQ2 / 16.0;

  const CurvatureNorms cn = curvature_norms(bundle, state.metric(), mu);
  r.sup_Rm = cn.sup_rm;
  r.int_Rm2 = cn.int_rm2;
  r.sup_Ric = cn.sup_ric;
  r.int_Ric4 = cn.int_ric4;

  if (opt.bochner) {
    const BochnerOut b = bochner_impl(state.derivatives(), state.metric(), state.q(), &bundle);
    r.bochner_residual_min = field_min(b.residual);
    r.sup_hessQ2 = field_max(b.hess_norm2);
  }
  if (opt.previous) {
    const Field h = heat_tr_residual(*opt.previous, state);
    r.heat_tr_residual_min = field_min(h);
    r.heat_tr_residual_max = field_max(h);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Monitors

void RunMonitor::append(const DiagnosticsRecord& r, bool max_principle_holds, bool c0_holds) {
  if (!records_.empty()) {
    const DiagnosticsRecord& prev = records_.back();
    if (!(r.t > prev.t)) {
      std::ostringstream os;
      os << "record at t = " << r.t << " does not follow t = " << prev.t;
      throw OutOfOrder(os.str());
    }
    accumulated_ += 0.5 * (r.t - prev.t) * (r.sup_T2 + prev.sup_T2);
    const double tol = settings_.monotone_tol;
    auto log = [&](const std::string& what, double before, double after) {
      std::ostringstream os;
      os.precision(17);
      os << what << " at t = " << r.t << ": " << before << " -> " << after;
      violations_.push_back(os.str());
    };
    if (mp_active_ && r.sup_trQ > prev.sup_trQ + tol * (1.0 + prev.sup_trQ))
      log("sup tr Q increased inside the 2^(5/3) region", prev.sup_trQ, r.sup_trQ);
    if (c0_active_ && r.sup_trQ_plus_dQ2 > prev.sup_trQ_plus_dQ2 + tol * (1.0 + prev.sup_trQ_plus_dQ2))
      log("sup(tr Q + |dQ|^2) increased under the c0 criterion", prev.sup_trQ_plus_dQ2, r.sup_trQ_plus_dQ2);
    if (r.vol < prev.vol - tol * prev.vol) log("volume decreased", prev.vol, r.vol);
  }
  records_.push_back(r);
  mp_active_ = max_principle_holds;
  c0_active_ = c0_holds;
}

ordered_json RunMonitor::to_json() const {
  ordered_json j;
  j["eps0"] = settings_.eps0;
  j["monotone_tol"] = settings_.monotone_tol;
  j["invariant_tol"] = settings_.invariant_tol;
  j["accumulated"] = accumulated_;
  j["mp_active"] = mp_active_;
  j["c0_active"] = c0_active_;
  j["violations"] = violations_;
  ordered_json recs = ordered_json::array();
  for (const auto& r : records_) recs.push_back(record_to_json(r));
  j["records"] = recs;
  return j;
}

RunMonitor RunMonitor::from_json(const ordered_json& j) {
  RunMonitor m(MonitorSettings{j.at("eps0").get<double>(), j.at("monotone_tol").get<double>(),
                               j.at("invariant_tol").get<double>()});
  m.accumulated_ = j.at("accumulated").get<double>();
  m.mp_active_ = j.at("mp_active").get<bool>();
  m.c0_active_ = j.at("c0_active").get<bool>();
  m.violations_ = j.at("violations").get<std::vector<std::string>>();
  for (const auto& r : j.at("records")) m.records_.push_back(record_from_json(r));
  return m;
}

RunMonitor extension_monitor(RunMonitor run, const DiagnosticsRecord& rec, bool max_principle_holds, bool c0_holds) {
  run.append(rec, max_principle_holds, c0_holds);
  return run;
}

std::vector<std::array<double, 2>> gap_curve(const RunMonitor& run, double s) {
  std::vector<std::array<double, 2>> out;
  for (const auto& r : run.records())
    if (r.t < s) out.push_back({r.t, (s - r.t) * r.sup_T2});
  return out;
}

double extension_tail_fraction(const RunMonitor& run, double fraction) {
  const auto& rs = run.records();
  if (rs.size() < 2 || run.accumulated() <= 0.0) return 0.0;
  const double t0 = rs.front().t, t1 = rs.back().t;
  const double cut = t1 - fraction * (t1 - t0);
  double tail = 0.0;
  for (std::size_t i = 1; i < rs.size(); ++i) {
    if (rs[i].t <= cut) continue;
    const double a = std::max(rs[i - 1].t, cut);
    // Linear interpolation of sup|T|^2 on the partially covered interval.
    const double w = (a - rs[i - 1].t) / (rs[i].t - rs[i - 1].t);
    const double fa = rs[i - 1].sup_T2 + w * (rs[i].sup_T2 - rs[i - 1].sup_T2);
    tail += 0.5 * (rs[i].t - a) * (fa + rs[i].sup_T2);
  }
  return tail / run.accumulated();
}

TrendReport t_to_zero_trend(const RunMonitor& run) {
  const auto& rs = run.records();
  if (rs.size() < 50) throw InsufficientData("trend needs at least 50 records, have " + std::to_string(rs.size()));
  TrendReport tr;
  tr.samples = rs.size();
  tr.initial_value = rs.front().int_T2;
  tr.final_value = rs.back().int_T2;
  for (const auto& r : rs) tr.max_value = std::max(tr.max_value, r.int_T2);
  tr.final_over_max = tr.max_value > 0.0 ? tr.final_value / tr.max_value : 0.0;

  const std::size_t start = rs.size() / 2;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t m = 0;
  bool all_positive = true;
  for (std::size_t i = start; i < rs.size(); ++i) {
    if (!(rs[i].int_T2 > 0.0)) {
      all_positive = false;
      continue;
    }
    const double x = rs[i].t, y = std::log(rs[i].int_T2);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  if (m >= 2) {
    const double den = m * sxx - sx * sx;
    tr.slope = den != 0.0 ? (m * sxy - sx * sy) / den : 0.0;
  }
  tr.decreasing = (m >= 2 && tr.slope < 0.0 && tr.final_value < tr.initial_value) ||
                  (!all_positive && tr.final_value <= 0.0);

  for (std::size_t i = 1; i + 1 < rs.size(); ++i) {
    const double rate = (rs[i + 1].vol - rs[i - 1].vol) / (rs[i + 1].t - rs[i - 1].t);
    tr.volume_rate_error = std::max(tr.volume_rate_error, std::abs(rate - (2.0 / 3.0) * rs[i].int_T2));
  }
  return tr;
}

// ---------------------------------------------------------------------------
// Serialisation

namespace {

struct Column {
  std::string name;
  std::string description;
  std::function<double&(DiagnosticsRecord&)> ref;
};

const std::vector<Column>& columns() {
  static const std::vector<Column> cols = [] {
    std::vector<Column> c;
#define HS_COL(field, desc) c.push_back({#field, desc, [](DiagnosticsRecord& r) -> double& { return r.field; }})
    HS_COL(t, "flow time");
    HS_COL(sup_trQ, "sup over the grid of tr Q");
    HS_COL(inf_trQ, "inf over the grid of tr Q");
    HS_COL(sup_dQ2, "sup |dQ|^2_Q");
    HS_COL(sup_T2, "sup |T|^2 (G2 norm, 1/2 tr(Q^-1 <tau,tau>))");
    HS_COL(int_T2, "integral of |T|^2 mu");
    HS_COL(int_T4, "integral of |T|^4 mu");
    HS_COL(vol, "total volume, integral of mu");
    HS_COL(vol_bound_rhs, "1/6 integral of sum omega_i^2");
#undef HS_COL
    static const char* planes[6] = {"01", "02", "03", "23", "31", "12"};
    for (int i = 0; i < 3; ++i)
      for (int s = 0; s < 6; ++s)
        c.push_back({"pairing_w" + std::to_string(i + 1) + "_" + planes[s],
                     "pairing of omega_" + std::to_string(i + 1) + " with the coordinate torus " + planes[s],
                     [i, s](DiagnosticsRecord& r) -> double& { return r.pairings[i][s]; }});
#define HS_COL(field, desc) c.push_back({#field, desc, [](DiagnosticsRecord& r) -> double& { return r.field; }})
    HS_COL(delta_lower, "sup (1 - lambda_min(Q))");
    HS_COL(delta_upper, "sup (lambda_max(Q) - 1)");
    HS_COL(heat_tr_residual_min, "min of 5/3 |T|^2 tr Q - (d_t - Laplacian) tr Q (null when unavailable)");
    HS_COL(heat_tr_residual_max, "max of the same residual");
    HS_COL(bochner_residual_min, "min of -K_P from the Bochner formula (null when not computed)");
    HS_COL(sup_Rm, "sup |Rm|");
    HS_COL(int_Rm2, "integral of |Rm|^2 mu");
    HS_COL(sup_Ric, "sup |Ric|");
    HS_COL(int_Ric4, "integral of |Ric|^4 mu");
    HS_COL(detQ_drift, "max |det Q - 1|");
    HS_COL(self_duality_residual, "max |*omega_i - omega_i|");
    HS_COL(hs_margin, "min eigenvalue of the wedge Gram matrix against e0123");
    HS_COL(sup_trQ_plus_dQ2, "sup (tr Q + |dQ|^2_Q)");
    HS_COL(T2_bound_excess, "sup (|T|^2 - 3/2 |dQ|^2_Q)");
    HS_COL(sup_hessQ2, "sup |Hess Q|^2_Q, a known term of the |dQ|^2 heat inequality");
    HS_COL(sup_dQ4_16, "(sup |dQ|^2)^2 / 16, a known term of the |dQ|^2 heat inequality");
#undef HS_COL
    return c;
  }();
  return cols;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<std::string> record_columns() {
  std::vector<std::string> out;
  for (const auto& c : columns()) out.push_back(c.name);
  return out;
}

ordered_json record_to_json(const DiagnosticsRecord& r) {
  DiagnosticsRecord copy = r;
  ordered_json j = ordered_json::object();
  for (const auto& c : columns()) {
    const double v = c.ref(copy);
    if (std::isfinite(v))
      j[c.name] = v;
    else
      j[c.name] = nullptr;
  }
  return j;
}

DiagnosticsRecord record_from_json(const ordered_json& j) {
  DiagnosticsRecord r;
  for (const auto& c : columns()) {
    const auto& v = j.at(c.name);
    c.ref(r) = v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
  }
  return r;
}

std::string record_csv_header() {
  std::string s;
  for (const auto& c : columns()) {
    if (!s.empty()) s += ',';
    s += c.name;
  }
  return s;
}

std::string record_csv_row(const DiagnosticsRecord& r) {
  DiagnosticsRecord copy = r;
  std::string s;
  bool first = true;
  for (const auto& c : columns()) {
    if (!first) s += ',';
    first = false;
    s += format_double(c.ref(copy));
  }
  return s;
}

void write_csv_schema(const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write schema: " + path.string());
  os << "index,column,description\n";
  int i = 0;
  for (const auto& c : columns()) os << i++ << ',' << c.name << ",\"" << c.description << "\"\n";
}

}  // namespace hsflow
