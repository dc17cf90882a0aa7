#include "hsflow/algebra.hpp"

#include "hsflow/errors.hpp"

#include <cmath>
#include <sstream>

namespace hsflow {

namespace {

// Euclidean (metric-free) dual on the 2-form basis: e01 <-> e23, e02 <-> e31,
// e03 <-> e12.
Form2 flat_dual(const Form2& w) {
  Form2 r;
  r.c = {w.c[3], w.c[4], w.c[5], w.c[0], w.c[1], w.c[2]};
  return r;
}

void require_finite(const Triple2FormPoint& t) {
  for (const auto& f : t.omega)
    for (double v : f.c)
      if (!std::isfinite(v)) throw NonFiniteInput("non-finite 2-form component");
}

// Even permutations of (0,1,2).
constexpr int kCyclic3[3][3] = {{0, 1, 2}, {1, 2, 0}, {2, 0, 1}};

}  // namespace

Mat3 unpack_sym3(const double* v) {
  Mat3 m;
  for (int s = 0; s < 6; ++s) {
    const auto [i, j] = kSym3Pairs[s];
    m(i, j) = m(j, i) = v[s];
  }
  return m;
}

void pack_sym3(const Mat3& m, double* v) {
  for (int s = 0; s < 6; ++s) {
    const auto [i, j] = kSym3Pairs[s];
    v[s] = 0.5 * (m(i, j) + m(j, i));
  }
}

Mat4 unpack_sym4(const double* v) {
  Mat4 m;
  for (int s = 0; s < 10; ++s) {
    const auto [a, b] = kSym4Pairs[s];
    m(a, b) = m(b, a) = v[s];
  }
  return m;
}

void pack_sym4(const Mat4& m, double* v) {
  for (int s = 0; s < 10; ++s) {
    const auto [a, b] = kSym4Pairs[s];
    v[s] = 0.5 * (m(a, b) + m(b, a));
  }
}

Mat4 Form2::full() const {
  Mat4 w = Mat4::Zero();
  for (int s = 0; s < 6; ++s) {
    const auto [a, b] = kForm2Pairs[s];
    w(a, b) = c[s];
    w(b, a) = -c[s];
  }
  return w;
}

Form2 Form2::from_full(const Mat4& w) {
  Form2 f;
  for (int s = 0; s < 6; ++s) {
    const auto [a, b] = kForm2Pairs[s];
    f.c[s] = 0.5 * (w(a, b) - w(b, a));
  }
  return f;
}

Form2& Form2::operator+=(const Form2& o) {
  for (int s = 0; s < 6; ++s) c[s] += o.c[s];
  return *this;
}

Form2 operator-(Form2 a, const Form2& b) {
  for (int s = 0; s < 6; ++s) a.c[s] -= b.c[s];
  return a;
}

Form2 operator*(double s, Form2 a) {
  for (double& v : a.c) v *= s;
  return a;
}

double Form2::max_abs() const {
  double m = 0.0;
  for (double v : c) m = std::max(m, std::abs(v));
  return m;
}

double wedge(const Form2& a, const Form2& b) {
  return a.c[0] * b.c[3] + a.c[3] * b.c[0] + a.c[1] * b.c[4] + a.c[4] * b.c[1] +
         a.c[2] * b.c[5] + a.c[5] * b.c[2];
}

Triple2FormPoint standard_triple() {
  Triple2FormPoint t;
  for (int i = 0; i < 3; ++i) {
    t.omega[i].c[i] = 1.0;
    t.omega[i].c[i + 3] = 1.0;
  }
  return t;
}

SPD3 wedge_gram(const Triple2FormPoint& triple, Volume4 mu) {
  require_finite(triple);
  if (!(mu.m > 0.0) || !std::isfinite(mu.m)) throw DomainError("volume coefficient must be positive");
  SPD3 q;
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j)
      q.mat(i, j) = q.mat(j, i) = wedge(triple.omega[i], triple.omega[j]) / (2.0 * mu.m);
  return q;
}

HypersymplecticCheck is_hypersymplectic(const Triple2FormPoint& triple) {
  for (const auto& f : triple.omega)
    for (double v : f.c)
      if (!std::isfinite(v)) return {false, -std::numeric_limits<double>::infinity()};
  const Mat3 gram = wedge_gram(triple, Volume4{1.0}).mat;
  const Eigen::SelfAdjointEigenSolver<Mat3> es(gram, Eigen::EigenvaluesOnly);
  const double margin = es.eigenvalues()(0);
  const double tol = 1e-12 * (1.0 + gram.cwiseAbs().rowwise().sum().maxCoeff());
  const bool ok = min_cholesky_pivot<3>(gram) > tol && margin > 0.0;
  return {ok, margin};
}

NormalizedVolume normalize_volume(const Triple2FormPoint& triple) {
  const auto check = is_hypersymplectic(triple);
  if (!check.ok) {
    std::ostringstream os;
    os << "wedge Gram matrix not positive definite (margin " << check.margin << ")";
    throw NotHypersymplectic(os.str(), NotHypersymplectic::npos, check.margin);
  }
  const SPD3 base = wedge_gram(triple, Volume4{1.0});
  const double m = std::cbrt(base.mat.determinant());
  return {Volume4{m}, SPD3{base.mat / m}};
}

Mat4 metric_from_triple_unchecked(const Triple2FormPoint& triple, double mu) {
  std::array<Mat4, 3> w;
  std::array<Mat4, 3> p;
  for (int i = 0; i < 3; ++i) {
    w[i] = triple.omega[i].full();
    p[i] = flat_dual(triple.omega[i]).full();
  }
  // iota_u w_i ^ iota_v w_j ^ w_k = (W_i P_k W_j^T)(u, v) on coordinate vectors.
  // The odd permutation (j, i, k) contributes the transpose of the even (i, j, k).
  Mat4 x = Mat4::Zero();
  for (const auto& perm : kCyclic3) x.noalias() += w[perm[0]] * p[perm[2]] * w[perm[1]].transpose();
  return (x + x.transpose()) / (6.0 * mu);
}

Metric4 metric_from_triple(const Triple2FormPoint& triple) {
  const auto nv = normalize_volume(triple);
  return Metric4{metric_from_triple_unchecked(triple, nv.mu.m)};
}

Form2 hodge_star_2(const Mat4& ginv, double sqrt_det, const Form2& w) {
  const Mat4 raised = ginv * w.full() * ginv;
  Form2 r = flat_dual(Form2::from_full(raised));
  for (double& v : r.c) v *= sqrt_det;
  return r;
}

Form2 hodge_star_2(const Metric4& g, const Form2& w) {
  const double pivot = min_cholesky_pivot<4>(g.mat);
  if (!(pivot > 0.0)) throw DegenerateMetric("metric not positive definite");
  return hodge_star_2(g.mat.inverse(), std::sqrt(g.mat.determinant()), w);
}

std::array<double, 4> hodge_star_3(const Mat4& g, double sqrt_det, const std::array<double, 4>& beta) {
  // beta = iota_v e0123 with v^o = (-1)^o beta_o; then *beta = -(1/sqrt g) g v.
  Eigen::Vector4d v(beta[0], -beta[1], beta[2], -beta[3]);
  const Eigen::Vector4d r = -(g * v) / sqrt_det;
  return {r(0), r(1), r(2), r(3)};
}

double inner_2(const Mat4& ginv, const Form2& a, const Form2& b) {
  const Mat4 raised = ginv * b.full() * ginv;
  return 0.5 * a.full().cwiseProduct(raised).sum();
}

Mat7 seven_metric(const Metric4& g, const SPD3& q) {
  Mat7 m = Mat7::Zero();
  m.topLeftCorner<4, 4>() = g.mat;
  m.bottomRightCorner<3, 3>() = q.mat;
  return m;
}

double seven_volume_density(const Metric4& g, const SPD3& q) {
  return std::sqrt(g.mat.determinant()) * std::sqrt(q.mat.determinant());
}

}  // namespace hsflow
