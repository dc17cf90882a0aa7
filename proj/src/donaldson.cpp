#include "hsflow/donaldson.hpp"

#include "hsflow/curvature.hpp"
#include "hsflow/errors.hpp"
#include "hsflow/flow.hpp"
#include "hsflow/parallel.hpp"

#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hsflow {

namespace odeint = boost::numeric::odeint;

namespace {

using State2 = std::array<double, 2>;

double w_second(double w, double dw) { return 27.0 / (16.0 * w * w) + 4.0 * dw * dw / w; }

// Residual of det Hess u = 1 relative to the size of the two cancelling terms.
double det_residual(double w, double dw, double d2w) {
  const double a = w * w * d2w, b = 4.0 * w * dw * dw;
  return ((16.0 / 27.0) * (a - b) - 1.0) / std::max(1.0, (16.0 / 27.0) * (std::abs(a) + b));
}

struct WSystem {
  void operator()(const State2& s, State2& ds, double) const {
    ds[0] = s[1];
    ds[1] = w_second(s[0], s[1]);
  }
};

auto make_w_stepper(double tol) { return odeint::make_dense_output(tol, tol, odeint::runge_kutta_dopri5<State2>()); }

constexpr double kBlowUpSlope = 1e8;
constexpr double kChartFraction = 0.9;

}  // namespace

WProfile solve_w_ode(double w0, double delta_request, double tol) {
  if (!(w0 > 0.0) || !std::isfinite(w0)) throw DomainError("w0 must be positive");
  if (!(tol > 0.0)) throw DomainError("ODE tolerance must be positive");
  WProfile out;
  out.w0_ = w0;
  out.tol_ = tol;
  const double limit = delta_request > 0.0 ? delta_request : std::numeric_limits<double>::infinity();

  auto stepper = make_w_stepper(tol);
  State2 s{w0, 0.0};
  stepper.initialize(s, 0.0, 1e-3 * std::min(1.0, w0));
  out.nodes_.push_back({0.0, w0, 0.0, w_second(w0, 0.0), 0.0});
  const WSystem sys;

  while (true) {
    const auto [x0, x1] = stepper.do_step(sys);
    const State2& cur = stepper.current_state();
    if (!std::isfinite(cur[0]) || !std::isfinite(cur[1]) || cur[0] <= 0.0) {
      if (x0 < limit) throw DomainCollapse("convexity lost at x1 = " + std::to_string(x0));
      break;
    }
    const double x = std::min(x1, limit);
    State2 at = cur;
    if (x < x1) stepper.calc_state(x, at);

    // w'' from the interpolant of w' (backward 4th-order difference inside
    // the step), so the residual reflects the integration error.
    const double eta = 0.05 * (x - x0);
    State2 y1, y2, y3, y4;
    stepper.calc_state(x - eta, y1);
    stepper.calc_state(x - 2 * eta, y2);
    stepper.calc_state(x - 3 * eta, y3);
    stepper.calc_state(x - 4 * eta, y4);
    const double d2w_interp = (25.0 * at[1] - 48.0 * y1[1] + 36.0 * y2[1] - 16.0 * y3[1] + 3.0 * y4[1]) / (12.0 * eta);
    const double res = std::abs(det_residual(at[0], at[1], d2w_interp));

    out.nodes_.push_back({x, at[0], at[1], w_second(at[0], at[1]), res});
    if (std::abs(at[1]) > kBlowUpSlope * (1.0 + w0)) {
      out.delta_ = x;
      out.blew_up_ = true;
      break;
    }
    if (x >= limit) {
      out.delta_ = limit;
      break;
    }
    if (x1 - x0 < 1e-15 * std::max(1.0, x1)) {
      out.delta_ = x1;
      out.blew_up_ = true;
      break;
    }
  }
  for (const auto& n : out.nodes_)
    if (n.x <= kChartFraction * out.delta_) out.max_residual_ = std::max(out.max_residual_, n.residual);
  return out;
}

std::vector<std::array<double, 3>> WProfile::sample(std::span<const double> xs) const {
  std::vector<std::array<double, 3>> out(xs.size());
  for (const double sign : {1.0, -1.0}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (!(std::abs(xs[i]) < delta_)) throw DomainError("sample point outside (-delta, delta)");
      if (xs[i] == 0.0)
        out[i] = {w0_, 0.0, w_second(w0_, 0.0)};
      else if ((sign > 0) == (xs[i] > 0.0))
        idx.push_back(i);
    }
    if (idx.empty()) continue;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return std::abs(xs[a]) < std::abs(xs[b]); });
    std::vector<double> times{0.0};
    for (std::size_t i : idx)
      if (xs[i] != times.back()) times.push_back(xs[i]);
    State2 s{w0_, 0.0};
    std::vector<State2> states;
    odeint::integrate_times(make_w_stepper(tol_), WSystem{}, s, times.begin(), times.end(), sign * 1e-3,
                            [&](const State2& y, double) { states.push_back(y); });
    std::size_t k = 0;
    for (std::size_t i : idx) {
      while (times[k] != xs[i]) ++k;
      const State2& y = states[k];
      out[i] = {y[0], y[1], w_second(y[0], y[1])};
    }
  }
  return out;
}

int third_index(int i, int j, int k) {
  std::array<int, 3> v{i, j, k};
  std::sort(v.begin(), v.end());
  // Lexicographic order of sorted triples over {0, 1, 2}.
  static constexpr int table[3][3][3] = {
      {{0, 1, 2}, {-1, 3, 4}, {-1, -1, 5}},
      {{-1, -1, -1}, {-1, 6, 7}, {-1, -1, 8}},
      {{-1, -1, -1}, {-1, -1, -1}, {-1, -1, 9}}};
  return table[v[0]][v[1]][v[2]];
}

ChartBox default_ansatz_box(double delta) {
  return {{-kChartFraction * delta, 0.5, -0.25}, {kChartFraction * delta, 1.0, 0.25}};
}

ChartBox shrink(const ChartBox& box, double keep) {
  ChartBox out;
  for (int a = 0; a < 3; ++a) {
    const double mid = 0.5 * (box.lo[a] + box.hi[a]);
    const double half = 0.5 * keep * (box.hi[a] - box.lo[a]);
    out.lo[a] = mid - half;
    out.hi[a] = mid + half;
  }
  return out;
}

Lattice chart_lattice(const ChartBox& box, int cells_per_half_unit) {
  if (cells_per_half_unit < 5) throw ConfigError("chart needs at least 5 cells per half unit");
  Lattice lat;
  lat.periodic = {true, false, false, false};
  for (int a = 0; a < 3; ++a) {
    const double extent = box.hi[a] - box.lo[a];
    if (!(extent > 0.0)) throw ConfigError("chart box is empty");
    const int cells = cells_per_half_unit * static_cast<int>(std::ceil(extent / 0.5 - 1e-9));
    lat.n[a + 1] = cells + 1;
    lat.h[a + 1] = extent / cells;
    lat.origin[a + 1] = box.lo[a];
  }
  return lat;
}

namespace {

void third_from_hessian(PotentialData& pd) {
  const Lattice& lat = pd.lattice;
  pd.third = Field(lat, 10);
  Field counts(lat, 10);
  std::vector<double> buf(lat.size());
  for (int s = 0; s < 6; ++s) {
    const auto [i, j] = kSym3Pairs[s];
    for (int k = 0; k < 3; ++k) {
      fd4_first(lat, pd.hess.comp(s), k + 1, buf.data());
      const int t = third_index(i, j, k);
      double* dst = pd.third.comp(t);
      double* cnt = counts.comp(t);
      for (std::size_t p = 0; p < lat.size(); ++p) {
        dst[p] += buf[p];
        cnt[p] += 1.0;
      }
    }
  }
  for (int t = 0; t < 10; ++t)
    for (std::size_t p = 0; p < lat.size(); ++p) pd.third.at(t, p) /= counts.at(t, p);
}

double coord_x(const Lattice& lat, std::size_t p, int a) { return lat.coord(a + 1, lat.unflatten(p)[a + 1]); }

}  // namespace

PotentialData quadratic_potential(const Lattice& chart) {
  PotentialData pd;
  pd.lattice = chart;
  pd.hess = Field(chart, 6);
  for (int i = 0; i < 3; ++i) std::fill_n(pd.hess.comp(i), chart.size(), 1.0);
  pd.third = Field(chart, 10);
  pd.s = Field(chart, 1, 1.0);
  return pd;
}

PotentialData ansatz_potential(const WProfile& w, const Lattice& chart) {
  PotentialData pd;
  pd.lattice = chart;
  std::vector<double> xs(chart.n[1]);
  for (int i = 0; i < chart.n[1]; ++i) xs[i] = chart.coord(1, i);
  const auto ws = w.sample(xs);
  pd.hess = Field(chart, 6);
  pd.s = Field(chart, 1, 1.0);
  const auto spans_zero = [&](int a) { return chart.coord(a, 0) <= 0.0 && chart.coord(a, chart.n[a] - 1) >= 0.0; };
  if (spans_zero(2) && spans_zero(3)) throw DomainError("ansatz chart meets the axis r = 0");
  parallel_for(chart.size(), [&](std::size_t p) {
    const auto idx = chart.unflatten(p);
    const auto [wv, dw, d2w] = ws[idx[1]];
    const double y[2] = {chart.coord(2, idx[2]), chart.coord(3, idx[3])};
    const double r2 = y[0] * y[0] + y[1] * y[1];
    const double r = std::sqrt(r2);
    const double r43 = std::pow(r, 4.0 / 3.0);
    const double rm23 = r43 / r2;
    const double rm83 = rm23 / r2;
    Mat3 h;
    h(0, 0) = r43 * d2w;
    for (int k = 0; k < 2; ++k) h(0, k + 1) = h(k + 1, 0) = (4.0 / 3.0) * rm23 * y[k] * dw;
    for (int k = 0; k < 2; ++k)
      for (int l = 0; l < 2; ++l)
        h(k + 1, l + 1) = wv * (4.0 / 3.0) * ((k == l ? rm23 : 0.0) - (2.0 / 3.0) * rm83 * y[k] * y[l]);
    double v[6];
    pack_sym3(h, v);
    for (int s = 0; s < 6; ++s) pd.hess.at(s, p) = v[s];
  });
  third_from_hessian(pd);
  return pd;
}

ChartTriple build_chart_triple(const PotentialData& pd) {
  const Lattice& lat = pd.lattice;
  const double* s = pd.s.comp(0);
  const auto [smin, smax] = std::minmax_element(s, s + lat.size());
  if (*smax - *smin > 1e-14 * std::abs(*smax)) throw NonIntegrableAlpha("S is not constant on the chart");
  const double sv = *smin;
  if (!(sv > 0.0)) throw DomainError("S must be positive");

  ChartTriple ct;
  ct.omega = Field(lat, 18);
  ct.u_inv = Field(lat, 6);
  std::vector<double> det_drift(lat.size());
  std::vector<char> bad(lat.size(), 0);
  parallel_for(lat.size(), [&](std::size_t p) {
    double v[6];
    for (int k = 0; k < 6; ++k) v[k] = pd.hess.at(k, p);
    const Mat3 h = unpack_sym3(v);
    if (!(min_cholesky_pivot<3>(h) > 0.0)) {
      bad[p] = 1;
      return;
    }
    det_drift[p] = std::abs(h.determinant() - 1.0);
    const Mat3 u = h.llt().solve(Mat3::Identity());
    pack_sym3(u, v);
    for (int k = 0; k < 6; ++k) ct.u_inv.at(k, p) = v[k];
    // omega_i = dt ^ dx^i + S U_ij *dx^j, with *dx^1 = e23, *dx^2 = e31, *dx^3 = e12.
    for (int i = 0; i < 3; ++i) {
      Form2 f;
      f.c[i] = 1.0;
      for (int j = 0; j < 3; ++j) f.c[3 + j] = sv * u(i, j);
      set_form2(ct.omega, i, p, f);
    }
  });
  for (std::size_t p = 0; p < bad.size(); ++p)
    if (bad[p]) throw DomainError("Hess u is not positive definite at chart point " + std::to_string(p));
  ct.det_hess_drift = max_of(det_drift);

  const auto deriv = Derivatives::make(lat, Backend::FD4);
  ct.closedness = ext_d(*deriv, ct.omega, 2).max_abs();

  const FlowState st(lat, Backend::FD4, ct.omega);
  const Field& q = st.q();
  std::vector<double> diff(lat.size());
  parallel_for(lat.size(), [&](std::size_t p) {
    double m = 0.0, scale = 1.0;
    for (int k = 0; k < 6; ++k) {
      m = std::max(m, std::abs(q.at(k, p) - ct.u_inv.at(k, p)));
      scale = std::max(scale, std::abs(ct.u_inv.at(k, p)));
    }
    diff[p] = m / scale;
  });
  ct.q_minus_u = max_of(diff);
  return ct;
}

TorsionFreeReport verify_torsion_free(const PotentialData& pd, const ChartTriple& ct, const ChartBox& zone) {
  const Lattice& lat = pd.lattice;
  const FlowState st(lat, Backend::FD4, ct.omega);
  const Field& tau = st.tau();
  const Metric4Field& g = st.metric();
  const CurvatureBundle curv = curvature_of(g);
  const Field dq = q_gradient(st);
  const Field d2q = q_hessian(st);
  const Field domega = ext_d(st.derivatives(), ct.omega, 2);

  std::vector<std::size_t> pts;
  for (std::size_t p = 0; p < lat.size(); ++p) {
    bool in = true;
    for (int a = 0; a < 3; ++a) {
      const double x = coord_x(lat, p, a);
      in = in && x >= zone.lo[a] - 1e-12 && x <= zone.hi[a] + 1e-12;
    }
    if (in) pts.push_back(p);
  }
  if (pts.empty()) throw DomainError("report zone contains no chart points");

  const double sv = pd.s.at(0, 0);
  std::vector<double> r_tau(pts.size()), r_lap(pts.size()), r_ric(pts.size()), r_sc(pts.size()), sc(pts.size()),
      dq2(pts.size()), margin(pts.size()), closed(pts.size());
  parallel_for(pts.size(), [&](std::size_t k) {
    const std::size_t p = pts[k];
    double m = 0.0;
    for (int c = 0; c < 12; ++c) m = std::max(m, std::abs(tau.at(c, p)));
    r_tau[k] = m;
    m = 0.0;
    for (int c = 0; c < 12; ++c) m = std::max(m, std::abs(domega.at(c, p)));
    closed[k] = m;

    const QJet jet = q_jet_at(st, dq, d2q, p);
    const Mat3 lap = harmonic_laplacian(jet, curv.christoffel_at(p));
    r_lap[k] = lap.cwiseAbs().maxCoeff();

    const Mat4 ric = curv.ricci_at(p);
    const Mat4 target = 0.25 * dq_outer(jet);
    r_ric[k] = (ric - target).cwiseAbs().maxCoeff();
    dq2[k] = dq_norm_sq(jet);

    double uv[6];
    for (int s = 0; s < 6; ++s) uv[s] = ct.u_inv.at(s, p);
    const Mat3 u = unpack_sym3(uv);
    double oracle = 0.0;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        for (int c = 0; c < 3; ++c) {
          const double uabc = pd.third.at(third_index(a, b, c), p);
          double inner = 0.0;
          for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
              for (int l = 0; l < 3; ++l) inner += u(a, i) * u(b, j) * u(c, l) * pd.third.at(third_index(i, j, l), p);
          oracle += uabc * inner;
        }
    oracle /= 4.0 * sv;
    const double r = curv.scalar.at(0, p);
    sc[k] = r;
    r_sc[k] = std::abs(r - oracle);

    const Triple2FormPoint tr = st.triple_at(p);
    Mat3 gram;
    for (int i = 0; i < 3; ++i)
      for (int j = i; j < 3; ++j) gram(i, j) = gram(j, i) = 0.5 * wedge(tr.omega[i], tr.omega[j]);
    Eigen::SelfAdjointEigenSolver<Mat3> es;
    es.computeDirect(gram, Eigen::EigenvaluesOnly);
    margin[k] = es.eigenvalues()(0);
  });

  TorsionFreeReport rep;
  rep.tau = max_of(r_tau);
  rep.laplacian = max_of(r_lap);
  rep.ricci = max_of(r_ric);
  rep.scalar = max_of(r_sc);
  rep.max_scalar = max_of(sc);
  rep.sup_dQ2 = max_of(dq2);
  rep.min_margin = min_of(margin);
  rep.closedness = max_of(closed);
  rep.chart_closedness = ct.closedness;
  rep.q_minus_u = ct.q_minus_u;
  rep.det_hess_drift = ct.det_hess_drift;
  rep.zone_points = pts.size();
  return rep;
}

double observed_order(double coarse, double fine, double h_coarse, double h_fine) {
  return std::log(coarse / fine) / std::log(h_coarse / h_fine);
}

DonaldsonStudy donaldson_study(double w0, const std::vector<int>& cells, double keep) {
  if (cells.size() < 2) throw ConfigError("a refinement study needs at least two chart resolutions");
  if (!std::is_sorted(cells.begin(), cells.end())) throw ConfigError("chart resolutions must increase");
  if (!(keep > 0.0 && keep < 1.0)) throw ConfigError("report zone fraction must lie in (0, 1)");
  DonaldsonStudy st;
  st.w0 = w0;
  st.keep = keep;
  const WProfile w = solve_w_ode(w0, 0.0);
  st.delta = w.delta();
  st.ode_residual = w.max_residual();
  const ChartBox box = default_ansatz_box(w.delta());
  const ChartBox zone = shrink(box, keep);
  {
    const PotentialData pd = quadratic_potential(chart_lattice(box, cells.front()));
    st.quadratic = verify_torsion_free(pd, build_chart_triple(pd), zone);
  }
  for (int m : cells) {
    const Lattice lat = chart_lattice(box, m);
    const PotentialData pd = ansatz_potential(w, lat);
    st.rows.push_back({m, lat.h[2], verify_torsion_free(pd, build_chart_triple(pd), zone)});
  }
  const auto& c = st.rows[st.rows.size() - 2];
  const auto& f = st.rows.back();
  st.order_tau = observed_order(c.report.tau, f.report.tau, c.h, f.h);
  st.order_laplacian = observed_order(c.report.laplacian, f.report.laplacian, c.h, f.h);
  st.order_ricci = observed_order(c.report.ricci, f.report.ricci, c.h, f.h);
  st.order_scalar = observed_order(c.report.scalar, f.report.scalar, c.h, f.h);
  return st;
}

double calabi_comparison(double a, double x) {
  if (!(a > 0.0)) throw DomainError("Calabi parameter a must be positive");
  const double pole = 4.0 * std::numbers::sqrt2 / a;
  if (!(x >= 0.0 && x < pole)) throw DomainError("x outside [0, 4 sqrt(2) / a)");
  return 32.0 * a / (32.0 - a * a * x * x);
}

std::array<double, 3> calabi_derivatives(double a, double x) {
  const double v = calabi_comparison(a, x);
  const double d = 32.0 - a * a * x * x;
  const double a3 = a * a * a;
  return {v, 64.0 * a3 * x / (d * d), 64.0 * a3 / (d * d) + 256.0 * a3 * a * a * x * x / (d * d * d)};
}

double calabi_ode_residual(double a, double x) {
  const auto [v, dv, d2v] = calabi_derivatives(a, x);
  // v'/x has the limit v''(0) at the origin.
  const double damp = x > 0.0 ? 3.0 * dv / x : 3.0 * d2v;
  return d2v + damp - 0.25 * v * v * v;
}

double calabi_pole_numeric(double a) {
  if (!(a > 0.0)) throw DomainError("Calabi parameter a must be positive");
  // z = 1/v solves z z'' = 2 z'^2 - 1/4 - 3 z z' / x with z(0) = 1/a, z'(0) = 0
  // and z''(0) = -a/16 from the regular singular point.
  const auto rhs = [](const State2& s, State2& ds, double x) {
    ds[0] = s[1];
    ds[1] = (2.0 * s[1] * s[1] - 0.25) / s[0] - 3.0 * s[1] / x;
  };
  const double x0 = 1e-4 / a;
  State2 s{1.0 / a - a * x0 * x0 / 32.0, -a * x0 / 16.0};
  auto stepper = odeint::make_dense_output(1e-14, 1e-14, odeint::runge_kutta_dopri5<State2>());
  stepper.initialize(s, x0, 1e-3 / a);
  const double stop = 1e-2 / a;
  while (true) {
    const auto [xa, xb] = stepper.do_step(rhs);
    (void)xa;
    const State2& cur = stepper.current_state();
    if (!std::isfinite(cur[0])) throw DomainError("Calabi integration failed");
    if (cur[0] < stop) {
      State2 d;
      rhs(cur, d, xb);
      // Root of the local quadratic model z + z' h + z'' h^2 / 2.
      const double A = 0.5 * d[1], B = cur[1], C = cur[0];
      return xb + 2.0 * C / (-B + std::sqrt(B * B - 4.0 * A * C));
    }
  }
}

}  // namespace hsflow
