#include "hsflow/spd3.hpp"

#include "hsflow/errors.hpp"

namespace hsflow {

Mat3 spd_inverse(const Mat3& p) {
  const double scale = 1.0 + p.cwiseAbs().rowwise().sum().maxCoeff();
  if (!(min_cholesky_pivot<3>(p) >= 1e-13 * scale)) throw SingularBase("base point is not positive definite");
  return p.llt().solve(Mat3::Identity());
}

double p_inner_with_inverse(const Mat3& pinv, const TangentSPD3& a, const TangentSPD3& b) {
  return (pinv * a * pinv * b).trace();
}

double p_inner(const Mat3& p, const TangentSPD3& a, const TangentSPD3& b) {
  return p_inner_with_inverse(spd_inverse(p), a, b);
}

Mat4 dq_outer(const QJet& jet) {
  const Mat3 qinv = spd_inverse(jet.q);
  std::array<Mat3, 4> y;
  for (int a = 0; a < 4; ++a) y[a] = qinv * jet.dq[a];
  Mat4 out;
  for (int a = 0; a < 4; ++a)
    for (int b = a; b < 4; ++b) out(a, b) = out(b, a) = (y[a] * y[b]).trace();
  return out;
}

double dq_norm_sq(const QJet& jet) {
  const Mat4 ginv = jet.g.mat.inverse();
  return ginv.cwiseProduct(dq_outer(jet)).sum();
}

TangentSPD3 harmonic_laplacian(const QJet& jet, const Christoffel& gamma) {
  const Mat3 qinv = spd_inverse(jet.q);
  const Mat4 ginv = jet.g.mat.inverse();
  Mat3 out = Mat3::Zero();
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) {
      Mat3 second = jet.d2q[sym4_index(a, b)];
      for (int c = 0; c < 4; ++c) second -= christoffel(gamma, c, a, b) * jet.dq[c];
      out += ginv(a, b) * (second - jet.dq[a] * qinv * jet.dq[b]);
    }
  }
  return 0.5 * (out + out.transpose());
}

std::array<Mat3, 10> harmonic_hessian(const QJet& jet, const Mat3& qinv, const Christoffel& gamma) {
  std::array<Mat3, 10> h;
  for (int s = 0; s < 10; ++s) {
    const auto [a, b] = kSym4Pairs[s];
    Mat3 m = jet.d2q[s];
    for (int c = 0; c < 4; ++c) m -= christoffel(gamma, c, a, b) * jet.dq[c];
    m -= 0.5 * (jet.dq[a] * qinv * jet.dq[b] + jet.dq[b] * qinv * jet.dq[a]);
    h[s] = m;
  }
  return h;
}

Christoffel flat_christoffel() {
  Christoffel g{};
  g.fill(0.0);
  return g;
}

}  // namespace hsflow
