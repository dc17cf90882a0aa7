#pragma once

// Geometry of the space P of positive-definite symmetric 3x3 matrices with the
// invariant metric <A, B>_P = tr(P^-1 A P^-1 B), and of maps Q : R^4 -> P.

#include "hsflow/algebra.hpp"

#include <array>

namespace hsflow {

/// Element of T_P P, a symmetric 3x3 matrix.
using TangentSPD3 = Mat3;

/// Christoffel symbols Gamma^c_ab of a 4-metric, slot c * 10 + sym4_index(a, b).
using Christoffel = std::array<double, 40>;

inline double christoffel(const Christoffel& gamma, int c, int a, int b) {
  return gamma[c * 10 + sym4_index(a, b)];
}

/// Two-jet of Q at a point together with the base metric there.
struct QJet {
  Mat3 q = Mat3::Identity();
  std::array<Mat3, 4> dq{};    // d_a Q
  std::array<Mat3, 10> d2q{};  // d_a d_b Q, slot sym4_index(a, b)
  Metric4 g;

  QJet() {
    for (auto& m : dq) m.setZero();
    for (auto& m : d2q) m.setZero();
  }
};

/// Inverse via Cholesky; throws SingularBase when the smallest pivot is
/// below 1e-13 (1 + |P|_inf).
Mat3 spd_inverse(const Mat3& p);

double p_inner(const Mat3& p, const TangentSPD3& a, const TangentSPD3& b);
/// Same with P^-1 already available.
double p_inner_with_inverse(const Mat3& pinv, const TangentSPD3& a, const TangentSPD3& b);

/// |dQ|^2_Q = g^ab <d_a Q, d_b Q>_Q.
double dq_norm_sq(const QJet& jet);

/// Symmetric 2-tensor <d_a Q, d_b Q>_Q.
Mat4 dq_outer(const QJet& jet);

/// Tension field Laplace-Beltrami(Q) - g^ab d_a Q Q^-1 d_b Q.
TangentSPD3 harmonic_laplacian(const QJet& jet, const Christoffel& gamma);

/// Hessian of Q as a map into P:
/// d_a d_b Q - Gamma^c_ab d_c Q - 1/2 (d_a Q Q^-1 d_b Q + d_b Q Q^-1 d_a Q).
std::array<Mat3, 10> harmonic_hessian(const QJet& jet, const Mat3& qinv, const Christoffel& gamma);

/// Pull-back connection on Q^*TP: d_a V - 1/2 (d_a Q Q^-1 V + V Q^-1 d_a Q).
inline Mat3 pullback_derivative(const Mat3& da_v, const Mat3& v, const Mat3& da_q, const Mat3& qinv) {
  return da_v - 0.5 * (da_q * qinv * v + v * qinv * da_q);
}

/// Christoffel-free zero connection, for flat comparisons.
Christoffel flat_christoffel();

}  // namespace hsflow
