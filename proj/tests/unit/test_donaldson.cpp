#include "hsflow/donaldson.hpp"
#include "hsflow/errors.hpp"
#include "hsflow/flow.hpp"
#include "support.hpp"

#include <doctest.h>

#include <vector>

using namespace hsflow;

TEST_SUITE("donaldson") {

TEST_CASE("w profile: initial curvature, symmetry and the ODE") {
  const WProfile w = solve_w_ode(1.0, 10.0);
  CHECK(w.blew_up());
  CHECK(w.delta() > 0.5);
  CHECK(w.delta() < 1.0);
  CHECK(w.max_residual() < 1e-8);
  const std::vector<double> xs{0.0, 0.3, -0.3, 0.6, -0.6};
  const auto s = w.sample(xs);
  // w'' (0) = 27 / (16 w0^2).
  CHECK(s[0][0] == 1.0);
  CHECK(s[0][1] == 0.0);
  CHECK(s[0][2] == doctest::Approx(27.0 / 16.0));
  CHECK(s[1][0] == doctest::Approx(s[2][0]).epsilon(1e-9));
  CHECK(s[1][1] == doctest::Approx(-s[2][1]).epsilon(1e-9));
  CHECK(s[3][0] == doctest::Approx(s[4][0]).epsilon(1e-9));
  for (const auto& v : s) {
    CHECK(v[0] >= 1.0);
    CHECK((16.0 / 27.0) * (v[0] * v[0] * v[2] - 4 * v[0] * v[1] * v[1]) == doctest::Approx(1.0).epsilon(1e-8));
  }
  // Taylor check near the origin: w = 1 + (27/32) x^2 + O(x^4).
  const std::vector<double> tiny{1e-3};
  CHECK(w.sample(tiny)[0][0] == doctest::Approx(1.0 + 27.0 / 32.0 * 1e-6).epsilon(1e-11));
}

TEST_CASE("w profile scaling law and bad input") {
  // The ODE is invariant under w -> c w(x / c^(3/2)), so the blow-up point
  // scales by c^(3/2).
  const WProfile a = solve_w_ode(1.0, 10.0), b = solve_w_ode(4.0, 100.0);
  CHECK(b.delta() == doctest::Approx(8.0 * a.delta()).epsilon(1e-5));
  const WProfile c = solve_w_ode(1.0, 0.4);
  CHECK_FALSE(c.blew_up());
  CHECK(c.delta() == doctest::Approx(0.4));
  CHECK_THROWS_AS(solve_w_ode(0.0, 1.0), DomainError);
  CHECK_THROWS_AS(solve_w_ode(-1.0, 1.0), DomainError);
}

TEST_CASE("quadratic potential gives the flat hyperkaehler triple") {
  const ChartBox box{{-0.5, 0.5, -0.25}, {0.5, 1.0, 0.25}};
  const Lattice lat = chart_lattice(box, 8);
  CHECK(lat.n[0] == 1);
  CHECK_FALSE(lat.periodic[1]);
  const PotentialData pd = quadratic_potential(lat);
  const ChartTriple ct = build_chart_triple(pd);
  CHECK(ct.closedness < 1e-12);
  CHECK(ct.q_minus_u < 1e-12);
  CHECK(ct.det_hess_drift < 1e-14);
  const FlowState s(lat, Backend::FD4, ct.omega);
  CHECK((s.q_at(17) - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-14);
  const TorsionFreeReport r = verify_torsion_free(pd, ct, shrink(box, 0.5));
  CHECK(r.tau < 1e-9);
  CHECK(r.laplacian < 1e-9);
  CHECK(r.ricci < 1e-9);
  CHECK(r.scalar < 1e-9);
  CHECK(r.zone_points > 0u);
}

TEST_CASE("chart helpers") {
  const ChartBox b = default_ansatz_box(0.8);
  CHECK(b.lo[0] == doctest::Approx(-0.72));
  CHECK(b.hi[1] == 1.0);
  const ChartBox s = shrink(b, 0.5);
  CHECK(s.lo[0] == doctest::Approx(-0.36));
  CHECK(s.lo[1] == doctest::Approx(0.625));
  CHECK(third_index(0, 1, 2) == third_index(2, 0, 1));
  CHECK(third_index(1, 1, 0) == third_index(0, 1, 1));
  std::vector<int> seen;
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j)
      for (int k = j; k < 3; ++k) seen.push_back(third_index(i, j, k));
  std::sort(seen.begin(), seen.end());
  CHECK(std::unique(seen.begin(), seen.end()) == seen.end());
  CHECK(seen.back() == 9);
  CHECK_THROWS_AS(chart_lattice(b, 1), ConfigError);
  const Lattice l8 = chart_lattice(b, 8), l16 = chart_lattice(b, 16);
  for (int a = 1; a < 4; ++a) CHECK(l16.h[a] == doctest::Approx(0.5 * l8.h[a]));
}

TEST_CASE("non-constant S is rejected") {
  const ChartBox box{{-0.5, 0.5, -0.25}, {0.5, 1.0, 0.25}};
  PotentialData pd = quadratic_potential(chart_lattice(box, 6));
  pd.s.at(0, 3) = 1.01;
  CHECK_THROWS_AS(build_chart_triple(pd), NonIntegrableAlpha);
}

TEST_CASE("ansatz chart near the axis is out of domain") {
  const WProfile w = solve_w_ode(1.0, 10.0);
  const ChartBox box{{-0.3, -0.2, -0.2}, {0.3, 0.2, 0.2}};
  CHECK_THROWS_AS(ansatz_potential(w, chart_lattice(box, 6)), DomainError);
}

TEST_CASE("ansatz chart: non-hyperkaehler torsion-free witness") {
  const WProfile w = solve_w_ode(1.0, 10.0);
  const ChartBox box = default_ansatz_box(w.delta());
  const PotentialData pd = ansatz_potential(w, chart_lattice(box, 8));
  const ChartTriple ct = build_chart_triple(pd);
  CHECK(ct.q_minus_u < 1e-10);
  CHECK(ct.det_hess_drift < 1e-8);
  const TorsionFreeReport r = verify_torsion_free(pd, ct, shrink(box, 0.5));
  CHECK(r.max_scalar > 1.0);
  CHECK(r.min_margin > 0.0);
  CHECK(r.sup_dQ2 > 1.0);
  CHECK(r.tau < 0.1);
}

TEST_CASE("observed order") {
  CHECK(observed_order(16.0, 1.0, 0.2, 0.1) == doctest::Approx(4.0));
}

TEST_CASE("Calabi comparison function") {
  CHECK(calabi_comparison(2.0, 0.0) == 2.0);
  CHECK_THROWS_AS(calabi_comparison(4.0, std::sqrt(2.0)), DomainError);
  CHECK_THROWS_AS(calabi_comparison(1.0, -0.1), DomainError);
  for (double a : {0.5, 1.0, 3.0}) {
    for (double x : {0.0, 0.1, 0.7, 1.2}) {
      if (x >= 4 * std::sqrt(2.0) / a) continue;
      const auto d = calabi_derivatives(a, x);
      CHECK(d[0] == doctest::Approx(calabi_comparison(a, x)));
      const double scale = 1.0 + std::abs(d[2]) + d[0] * d[0] * d[0];
      CHECK(std::abs(calabi_ode_residual(a, x)) < 1e-13 * scale);
      // Finite-difference check of the closed-form derivative.
      if (x > 0.0) {
        const double h = 1e-6;
        const double fd = (calabi_comparison(a, x + h) - calabi_comparison(a, x - h)) / (2 * h);
        CHECK(fd == doctest::Approx(d[1]).epsilon(1e-7));
      }
    }
  }
  CHECK(calabi_pole_numeric(4.0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(calabi_pole_numeric(1.0) == doctest::Approx(4 * std::sqrt(2.0)).epsilon(1e-12));
}

}
