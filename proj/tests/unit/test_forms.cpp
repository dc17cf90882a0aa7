#include "hsflow/errors.hpp"
#include "hsflow/forms.hpp"
#include "hsflow/runner.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace hsflow;

TEST_SUITE("forms") {

TEST_CASE("d d = 0 on 0-forms and 1-forms") {
  const Lattice lat = testing::torus(12);
  std::mt19937_64 g(31);
  Field f(lat, 1), a(lat, 4);
  for (std::size_t p = 0; p < lat.size(); ++p) {
    const auto x = testing::coords(lat, p);
    f.at(0, p) = std::sin(x[0] - x[3]) * std::cos(2 * x[1] + x[2]);
    for (int c = 0; c < 4; ++c) a.at(c, p) = std::cos(x[c] + 2 * x[(c + 1) % 4]) * std::sin(x[(c + 2) % 4]);
  }
  for (Backend b : {Backend::Spectral, Backend::FD4}) {
    const auto d = Derivatives::make(lat, b);
    CHECK(ext_d(*d, ext_d(*d, f, 0), 1).max_abs() < 1e-12);
    CHECK(ext_d(*d, ext_d(*d, a, 1), 2).max_abs() < 1e-12);
  }
}

TEST_CASE("d of a 1-form matches the coordinate formula") {
  const Lattice lat = testing::torus(12);
  Field a(lat, 4);
  for (std::size_t p = 0; p < lat.size(); ++p) {
    const auto x = testing::coords(lat, p);
    a.at(1, p) = std::sin(x[0]);  // a = sin(x0) dx1, da = cos(x0) dx0 ^ dx1
    a.at(2, p) = std::cos(x[3]);  // + cos(x3) dx2, d = -sin(x3) dx3 ^ dx2 = sin(x3) dx2 ^ dx3
  }
  const auto d = Derivatives::make(lat, Backend::Spectral);
  const Field w = ext_d(*d, a, 1);
  double err = 0.0;
  for (std::size_t p = 0; p < lat.size(); ++p) {
    const auto x = testing::coords(lat, p);
    Form2 e;
    e.c[0] = std::cos(x[0]);
    e.c[3] = std::sin(x[3]);
    err = std::max(err, (form2_at(w, 0, p) - e).max_abs());
  }
  CHECK(err < 1e-12);
}

TEST_CASE("flat codifferential of f e01") {
  const Lattice lat = testing::torus(12);
  Field w(lat, 6);
  for (std::size_t p = 0; p < lat.size(); ++p) {
    const auto x = testing::coords(lat, p);
    w.at(0, p) = std::sin(x[0] + x[1]) + std::cos(2 * x[2]);
  }
  const auto d = Derivatives::make(lat, Backend::Spectral);
  const Field dw = codifferential_2(*d, Metric4Field::flat(lat), w);
  double err = 0.0;
  for (std::size_t p = 0; p < lat.size(); ++p) {
    const auto x = testing::coords(lat, p);
    const double c = std::cos(x[0] + x[1]);
    // (d* b)_b = -d^a b_ab
    err = std::max({err, std::abs(dw.at(0, p) - c), std::abs(dw.at(1, p) + c), std::abs(dw.at(2, p)),
                    std::abs(dw.at(3, p))});
  }
  CHECK(err < 1e-12);
}

TEST_CASE("codifferential is the adjoint of d for a curved metric") {
  // Integral of <d a, b> mu equals integral of <a, d* b> mu.
  const Lattice lat = testing::torus(12);
  Field gm(lat, 10), a(lat, 4), b(lat, 6);
  for (std::size_t p = 0; p < lat.size(); ++p) {
    const auto x = testing::coords(lat, p);
    Mat4 m = Mat4::Identity();
    m(0, 0) += 0.3 * std::sin(x[1]);
    m(1, 2) = m(2, 1) = 0.2 * std::cos(x[0] + x[3]);
    m(3, 3) += 0.25 * std::cos(x[2]);
    double v[10];
    pack_sym4(m, v);
    for (int s = 0; s < 10; ++s) gm.at(s, p) = v[s];
    for (int c = 0; c < 4; ++c) a.at(c, p) = std::sin(x[c] - x[(c + 1) % 4]);
    for (int s = 0; s < 6; ++s) b.at(s, p) = std::cos(x[s % 4] + (s + 1) * 0.5) * (1 + 0.5 * std::sin(x[(s + 2) % 4]));
  }
  const Metric4Field g = Metric4Field::from_metric(gm);
  const auto d = Derivatives::make(lat, Backend::FD4);
  const Field da = ext_d(*d, a, 1);
  const Field db = codifferential_2(*d, g, b);
  Field lhs(lat, 1), rhs(lat, 1);
  for (std::size_t p = 0; p < lat.size(); ++p) {
    const Mat4 gi = g.inverse_at(p);
    lhs.at(0, p) = inner_2(gi, form2_at(da, 0, p), form2_at(b, 0, p)) * g.sqrt_det.at(0, p);
    Eigen::Vector4d av, bv;
    for (int c = 0; c < 4; ++c) {
      av(c) = a.at(c, p);
      bv(c) = db.at(c, p);
    }
    rhs.at(0, p) = av.dot(gi * bv) * g.sqrt_det.at(0, p);
  }
  const double l = integrate(lhs), r = integrate(rhs);
  CHECK(std::abs(l) > 1e-2);
  CHECK(l == doctest::Approx(r).epsilon(1e-3));
}

TEST_CASE("degenerate metric fields are rejected") {
  const Lattice lat = testing::torus(8);
  Field gm(lat, 10);
  CHECK_THROWS_AS(Metric4Field::from_metric(gm), DegenerateMetric);
}

TEST_CASE("pairings: standard triple and exact perturbations") {
  const Lattice lat = testing::torus(12);
  Field w(lat, 18);
  for (std::size_t p = 0; p < lat.size(); ++p)
    for (int k = 0; k < 3; ++k) set_form2(w, k, p, standard_triple().omega[k]);
  const double area = lat.extent(0) * lat.extent(1);
  const auto p0 = cohomology_pairings(w, 0);
  CHECK(p0[0] == doctest::Approx(area));
  CHECK(p0[3] == doctest::Approx(area));
  CHECK(p0[1] == 0.0);
  Field pert = perturbation(lat, 2, 3, 7);
  w.axpy(0.1, pert);
  for (int k = 0; k < 3; ++k) {
    const auto pk = cohomology_pairings(w, k);
    for (int s = 0; s < 6; ++s) {
      const double expect = (s == k || s == k + 3) ? area : 0.0;
      CHECK(std::abs(pk[s] - expect) < 1e-12 * area);
    }
  }
  // The perturbation is exact: spectrally closed.
  const auto d = Derivatives::make(lat, Backend::Spectral);
  CHECK(ext_d(*d, pert, 2).max_abs() < 1e-12);
}

TEST_CASE("integrate uses the lattice measure") {
  const Lattice lat = testing::torus(8);
  const Field one(lat, 1, 1.0);
  CHECK(integrate(one) == doctest::Approx(std::pow(2 * M_PI, 4)));
  const Field two(lat, 1, 2.0);
  CHECK(integrate_weighted(two, 0, two) == doctest::Approx(4 * std::pow(2 * M_PI, 4)));
}

}
