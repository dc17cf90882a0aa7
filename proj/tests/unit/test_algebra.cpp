#include "hsflow/algebra.hpp"
#include "hsflow/errors.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace hsflow;

namespace {

// Levi-Civita symbol on four indices.
int levi4(int a, int b, int c, int d) {
  int p[4] = {a, b, c, d};
  int sign = 1;
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) {
      if (p[i] == p[j]) return 0;
      if (p[i] > p[j]) sign = -sign;
    }
  return sign;
}

// a ^ b coefficient of e0123 from the full antisymmetric matrices.
double wedge_oracle(const Form2& a, const Form2& b) {
  const Mat4 A = a.full(), B = b.full();
  double s = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k)
        for (int l = 0; l < 4; ++l) s += levi4(i, j, k, l) * A(i, j) * B(k, l);
  return s / 4.0;
}

// Hodge star from the definition (*w)_cd = 1/2 sqrt(g) eps_abcd w^ab.
Form2 star_oracle(const Mat4& g, const Form2& w) {
  const Mat4 gi = g.inverse();
  const Mat4 up = gi * w.full() * gi;
  const double sd = std::sqrt(g.determinant());
  Mat4 out = Mat4::Zero();
  for (int c = 0; c < 4; ++c)
    for (int d = 0; d < 4; ++d)
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) out(c, d) += 0.5 * sd * levi4(a, b, c, d) * up(a, b);
  return Form2::from_full(out);
}

}  // namespace

TEST_SUITE("algebra") {

TEST_CASE("wedge matches the Levi-Civita contraction") {
  std::mt19937_64 g(1);
  for (int k = 0; k < 50; ++k) {
    Form2 a, b;
    for (int s = 0; s < 6; ++s) {
      a.c[s] = testing::uniform(g);
      b.c[s] = testing::uniform(g);
    }
    CHECK(wedge(a, b) == doctest::Approx(wedge_oracle(a, b)).epsilon(1e-13));
  }
}

TEST_CASE("standard triple: Q = I, flat metric, self-dual") {
  const Triple2FormPoint t = standard_triple();
  const NormalizedVolume nv = normalize_volume(t);
  CHECK(nv.mu.m == doctest::Approx(1.0));
  CHECK((nv.q.mat - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-15);
  const Metric4 g = metric_from_triple(t);
  CHECK((g.mat - Mat4::Identity()).cwiseAbs().maxCoeff() < 1e-15);
  for (const auto& w : t.omega) CHECK((hodge_star_2(g, w) - w).max_abs() < 1e-15);
}

TEST_CASE("normalize_volume gives det Q = 1 and tr Q >= 3") {
  std::mt19937_64 g(2);
  for (int k = 0; k < 200; ++k) {
    const Triple2FormPoint t = testing::random_triple(g, 0.4);
    if (!is_hypersymplectic(t).ok) continue;
    const NormalizedVolume nv = normalize_volume(t);
    CHECK(std::abs(nv.q.mat.determinant() - 1.0) <= 1e-12);
    CHECK(nv.q.mat.trace() >= 3.0 - 1e-10);
    // Q(mu) = wedge Gram / (2 mu) at the normalised volume.
    const SPD3 q = wedge_gram(t, nv.mu);
    CHECK((q.mat - nv.q.mat).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("Q_ij equals half the induced inner product of omega_i and omega_j") {
  std::mt19937_64 g(3);
  int tested = 0;
  for (int k = 0; k < 100; ++k) {
    const Triple2FormPoint t = testing::random_triple(g, 0.5);
    if (!is_hypersymplectic(t).ok) continue;
    ++tested;
    const Metric4 gm = metric_from_triple(t);
    const NormalizedVolume nv = normalize_volume(t);
    const Mat4 gi = gm.mat.inverse();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        CHECK(0.5 * inner_2(gi, t.omega[i], t.omega[j]) == doctest::Approx(nv.q.mat(i, j)).epsilon(1e-10));
    // The induced volume form is mu.
    CHECK(std::sqrt(gm.mat.determinant()) == doctest::Approx(nv.mu.m).epsilon(1e-12));
  }
  CHECK(tested > 50);
}

TEST_CASE("each omega_i is self-dual for its induced metric") {
  std::mt19937_64 g(4);
  for (int k = 0; k < 100; ++k) {
    const Triple2FormPoint t = testing::random_triple(g, 0.5);
    if (!is_hypersymplectic(t).ok) continue;
    const Metric4 gm = metric_from_triple(t);
    for (const auto& w : t.omega) CHECK((hodge_star_2(gm, w) - w).max_abs() < 1e-12);
  }
}

TEST_CASE("hodge star matches the definition and is an involution") {
  std::mt19937_64 g(5);
  for (int k = 0; k < 50; ++k) {
    const Mat4 m = testing::random_metric(g);
    Form2 w;
    for (double& c : w.c) c = testing::uniform(g);
    const Form2 s = hodge_star_2(Metric4{m}, w);
    CHECK((s - star_oracle(m, w)).max_abs() < 1e-12);
    CHECK((hodge_star_2(Metric4{m}, s) - w).max_abs() < 1e-12);
    // Self-adjoint: <*a, b> = <a, *b>.
    Form2 b;
    for (double& c : b.c) c = testing::uniform(g);
    const Mat4 gi = m.inverse();
    CHECK(inner_2(gi, s, b) == doctest::Approx(inner_2(gi, w, hodge_star_2(Metric4{m}, b))).epsilon(1e-12));
  }
}

TEST_CASE("star of a 3-form: beta = *alpha maps back to alpha") {
  std::mt19937_64 g(6);
  for (int k = 0; k < 30; ++k) {
    const Mat4 m = testing::random_metric(g);
    const double sd = std::sqrt(m.determinant());
    // 3-form (*alpha)_{bcd} = sqrt(g) eps_abcd alpha^a, stored by omitted index.
    Eigen::Vector4d alpha;
    for (int a = 0; a < 4; ++a) alpha(a) = testing::uniform(g);
    const Eigen::Vector4d up = m.inverse() * alpha;
    std::array<double, 4> beta{};
    for (int o = 0; o < 4; ++o) {
      int t[3], n = 0;
      for (int a = 0; a < 4; ++a)
        if (a != o) t[n++] = a;
      double v = 0.0;
      for (int a = 0; a < 4; ++a) v += sd * levi4(a, t[0], t[1], t[2]) * up(a);
      beta[o] = v;
    }
    // ** = -1 on 1-forms in Riemannian dimension 4 (k(n-k) = 3 odd).
    const auto back = hodge_star_3(m, sd, beta);
    for (int a = 0; a < 4; ++a) CHECK(back[a] == doctest::Approx(-alpha(a)).epsilon(1e-12));
  }
}

TEST_CASE("parabolic scaling: Lambda omega keeps Q, scales mu by Lambda^2 and g by Lambda") {
  std::mt19937_64 g(7);
  for (int k = 0; k < 30; ++k) {
    const Triple2FormPoint t = testing::random_triple(g, 0.3);
    if (!is_hypersymplectic(t).ok) continue;
    const double lam = 0.5 + 2.0 * testing::uniform(g, 0.0, 1.0);
    Triple2FormPoint s = t;
    for (auto& w : s.omega) w = lam * w;
    const auto a = normalize_volume(t), b = normalize_volume(s);
    CHECK((a.q.mat - b.q.mat).cwiseAbs().maxCoeff() < 1e-13);
    CHECK(b.mu.m == doctest::Approx(lam * lam * a.mu.m).epsilon(1e-13));
    CHECK((metric_from_triple(s).mat - lam * metric_from_triple(t).mat).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("degenerate triples are rejected") {
  Triple2FormPoint t = standard_triple();
  t.omega[2] = t.omega[0];
  const auto chk = is_hypersymplectic(t);
  CHECK_FALSE(chk.ok);
  CHECK(chk.margin <= 1e-15);
  CHECK_THROWS_AS(normalize_volume(t), NotHypersymplectic);
  CHECK_THROWS_AS(metric_from_triple(t), NotHypersymplectic);
  // Anti-self-dual forms have negative wedge squares.
  Triple2FormPoint asd = standard_triple();
  for (auto& w : asd.omega)
    for (int s = 3; s < 6; ++s) w.c[s] = -w.c[s];
  CHECK_FALSE(is_hypersymplectic(asd).ok);
  CHECK(is_hypersymplectic(standard_triple()).margin == doctest::Approx(1.0));
}

TEST_CASE("seven-metric blocks and volume density") {
  std::mt19937_64 g(8);
  const Mat4 m = testing::random_metric(g);
  const Mat3 q = testing::random_spd(g);
  const Mat7 s = seven_metric(Metric4{m}, SPD3{q});
  CHECK((s.topLeftCorner<4, 4>() - m).cwiseAbs().maxCoeff() == 0.0);
  CHECK((s.bottomRightCorner<3, 3>() - q).cwiseAbs().maxCoeff() == 0.0);
  CHECK(s.topRightCorner<4, 3>().cwiseAbs().maxCoeff() == 0.0);
  CHECK(seven_volume_density(Metric4{m}, SPD3{q}) == doctest::Approx(std::sqrt(s.determinant())).epsilon(1e-12));
}

TEST_CASE("packed symmetric layouts round trip") {
  std::mt19937_64 g(9);
  const Mat3 q = testing::random_spd(g);
  double v[10];
  pack_sym3(q, v);
  CHECK((unpack_sym3(v) - q).cwiseAbs().maxCoeff() == 0.0);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(v[sym3_index(i, j)] == q(i, j));
  const Mat4 m = testing::random_metric(g);
  pack_sym4(m, v);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) CHECK(v[sym4_index(a, b)] == m(a, b));
}

}
