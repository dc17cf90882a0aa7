#include "hsflow/diagnostics.hpp"
#include "hsflow/errors.hpp"
#include "hsflow/runner.hpp"
#include "support.hpp"

#include <unsupported/Eigen/MatrixFunctions>
#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace hsflow;

namespace {

FlowState flat_state(int n) {
  const Lattice lat = testing::torus(n);
  Field w(lat, 18);
  for (std::size_t p = 0; p < lat.size(); ++p)
    for (int k = 0; k < 3; ++k) set_form2(w, k, p, standard_triple().omega[k]);
  return FlowState(lat, Backend::Spectral, std::move(w));
}

DiagnosticsRecord rec(double t, double t2, double vol = 1.0) {
  DiagnosticsRecord r;
  r.t = t;
  r.sup_T2 = t2;
  r.int_T2 = t2;
  r.vol = vol;
  return r;
}

}  // namespace

TEST_SUITE("diagnostics") {

TEST_CASE("record of the flat state") {
  const FlowState s = flat_state(8);
  const CurvatureBundle b = curvature_of(s.metric());
  RecordOptions opt;
  const FlowState n = rk4_step(s, 0.01);
  opt.previous = &s;
  const DiagnosticsRecord r = record(n, b, opt);
  const double vol = std::pow(2 * M_PI, 4);
  CHECK(r.sup_trQ == doctest::Approx(3.0));
  CHECK(r.sup_T2 == 0.0);
  CHECK(r.sup_dQ2 == 0.0);
  CHECK(r.vol == doctest::Approx(vol));
  CHECK(std::abs(r.vol - r.vol_bound_rhs) < 1e-10 * vol);
  CHECK(r.detQ_drift < 1e-15);
  CHECK(r.self_duality_residual < 1e-15);
  CHECK(r.hs_margin == doctest::Approx(1.0));
  CHECK(r.heat_tr_residual_min == 0.0);
  CHECK(r.bochner_residual_min == 0.0);
  CHECK(r.pairings[0][0] == doctest::Approx(4 * M_PI * M_PI));
}

TEST_CASE("volume bound and torsion bound on a perturbed state") {
  const Lattice lat = testing::torus(8);
  Field w = flat_state(8).omega();
  w.axpy(0.15, perturbation(lat, 2, 3, 3));
  const FlowState s(lat, Backend::Spectral, w);
  RecordOptions opt;
  opt.bochner = false;
  const DiagnosticsRecord r = record(s, curvature_of(s.metric()), opt);
  CHECK(r.vol < r.vol_bound_rhs);
  CHECK(r.T2_bound_excess <= 1e-12);
  CHECK(r.sup_T2 > 0.0);
  CHECK(std::isnan(r.bochner_residual_min));
  CHECK(r.delta_lower > 0.0);
  CHECK(r.delta_upper > 0.0);
}

TEST_CASE("Bochner residual equals the curvature term of P on a flat base") {
  // With a flat base, -K_P = -1/4 sum_ab tr([Y_a, Y_b]^2) with Y_a = Q^-1 d_a Q.
  const Lattice lat = testing::torus(16);
  Field q(lat, 6);
  for (std::size_t p = 0; p < lat.size(); ++p) {
    const auto x = testing::coords(lat, p);
    Mat3 s;
    s << 0.3 * std::sin(x[0] + x[2]), 0.2 * std::cos(x[1]), 0.1 * std::sin(x[3] - x[0]), 0, -0.2 * std::cos(x[0] - x[3]),
        0.25 * std::sin(x[1] + x[2]), 0, 0, 0.1 * std::cos(x[2]);
    s(1, 0) = s(0, 1);
    s(2, 0) = s(0, 2);
    s(2, 1) = s(1, 2);
    double v[6];
    pack_sym3(s.exp(), v);
    for (int k = 0; k < 6; ++k) q.at(k, p) = v[k];
  }
  const auto d = Derivatives::make(lat, Backend::Spectral);
  const Field res = bochner_residual(*d, Metric4Field::flat(lat), q, nullptr);
  Field dq(lat, 24);
  for (int a = 0; a < 4; ++a)
    for (int k = 0; k < 6; ++k) d->partial(q.comp(k), a, dq.comp(a * 6 + k));
  double err = 0.0, peak = 0.0;
  for (std::size_t p = 0; p < lat.size(); ++p) {
    const Mat3 qi = sym3_at(q, 0, p).inverse();
    std::array<Mat3, 4> y;
    for (int a = 0; a < 4; ++a) y[a] = qi * sym3_at(dq, a * 6, p);
    double o = 0.0;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) {
        const Mat3 c = y[a] * y[b] - y[b] * y[a];
        o -= 0.25 * (c * c).trace();
      }
    CHECK(o >= -1e-15);
    peak = std::max(peak, o);
    err = std::max(err, std::abs(o - res.at(0, p)));
  }
  CHECK(peak > 1e-2);
  CHECK(err < 1e-3 * peak);
}

TEST_CASE("region flags") {
  const FlowState s = flat_state(8);
  const RegionFlag mp = max_principle_region(s);
  CHECK(mp.holds);
  CHECK(mp.value == doctest::Approx(3.0));
  CHECK(mp.margin == doctest::Approx(kMaxPrincipleBound - 3.0));
  CHECK(c0_criterion(s, 0.05).holds);
  CHECK(c0_criterion(s, 0.05).value == doctest::Approx(3.0));
  CHECK_THROWS_AS(c0_criterion(s, -0.01), DomainError);
}

TEST_CASE("run monitor: accumulation, ordering, violations") {
  RunMonitor m;
  m.append(rec(0.0, 2.0), false, false);
  m.append(rec(1.0, 0.0), false, false);
  CHECK(m.accumulated() == doctest::Approx(1.0));
  CHECK_THROWS_AS(m.append(rec(1.0, 0.0), false, false), OutOfOrder);
  CHECK_THROWS_AS(extension_monitor(m, rec(0.5, 0.0)), OutOfOrder);
  const RunMonitor m2 = extension_monitor(m, rec(2.0, 0.0, 0.5));
  CHECK(m2.records().size() == 3u);
  CHECK(m2.violations().size() == 1u);
  CHECK(m.records().size() == 2u);
  // Max-principle monotonicity is enforced only while the region holds.
  RunMonitor mp;
  DiagnosticsRecord a = rec(0.0, 0.0), b = rec(1.0, 0.0);
  a.sup_trQ = 3.1;
  b.sup_trQ = 3.2;
  mp.append(a, true, false);
  mp.append(b, true, false);
  CHECK(mp.violations().size() == 1u);
  const RunMonitor back = RunMonitor::from_json(mp.to_json());
  CHECK(back.to_json().dump() == mp.to_json().dump());
}

TEST_CASE("gap curve and tail fraction") {
  RunMonitor m;
  for (int k = 0; k <= 10; ++k) m.append(rec(k, k < 5 ? 1.0 : 0.0), false, false);
  const auto g = gap_curve(m, 3.5);
  REQUIRE(g.size() == 4u);
  CHECK(g[1][1] == doctest::Approx(2.5));
  CHECK(m.accumulated() == doctest::Approx(4.5));
  CHECK(extension_tail_fraction(m, 0.1) == 0.0);
  CHECK(extension_tail_fraction(m, 0.6) == doctest::Approx(0.5 / 4.5));
}

TEST_CASE("trend needs 50 records and sees exponential decay") {
  RunMonitor m;
  for (int k = 0; k < 49; ++k) m.append(rec(0.1 * k, std::exp(-0.1 * k), 1.0 + 0.01 * k), false, false);
  CHECK_THROWS_AS(t_to_zero_trend(m), InsufficientData);
  m.append(rec(4.9, std::exp(-4.9), 1.49), false, false);
  const TrendReport tr = t_to_zero_trend(m);
  CHECK(tr.samples == 50u);
  CHECK(tr.decreasing);
  CHECK(tr.slope == doctest::Approx(-1.0));
  CHECK(tr.final_over_max == doctest::Approx(std::exp(-4.9)));
}

TEST_CASE("NDJSON and CSV share one column table") {
  DiagnosticsRecord r = rec(0.25, 1.0 / 3.0);
  r.pairings[2][5] = 7.5;
  const auto cols = record_columns();
  const auto j = record_to_json(r);
  const DiagnosticsRecord back = record_from_json(j);
  CHECK(record_to_json(back).dump() == j.dump());
  CHECK(back.pairings[2][5] == 7.5);
  CHECK(back.sup_T2 == r.sup_T2);
  CHECK(std::isnan(back.heat_tr_residual_min));
  const std::string header = record_csv_header();
  const std::string row = record_csv_row(r);
  CHECK(std::count(header.begin(), header.end(), ',') + 1 == static_cast<long>(cols.size()));
  CHECK(std::count(row.begin(), row.end(), ',') == std::count(header.begin(), header.end(), ','));
  CHECK(header.rfind("t,", 0) == 0);
  const auto path = std::filesystem::temp_directory_path() / "hsflow_schema.csv";
  write_csv_schema(path);
  std::ifstream is(path);
  std::string line;
  int lines = 0;
  while (std::getline(is, line)) ++lines;
  CHECK(lines == static_cast<int>(cols.size()) + 1);
}

}
