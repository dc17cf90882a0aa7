#pragma once

// Pointwise linear algebra of hypersymplectic triples on R^4.
//
// Conventions used throughout the library:
//   * 2-forms are stored on the basis (e01, e02, e03, e23, e31, e12).
//   * The orientation is e0123 > 0.
//   * 3-forms are stored by omitted index: slot o holds the coefficient of
//     the increasing wedge of the three remaining coordinate covectors.
//   * Symmetric 3x3 matrices are stored as (11, 22, 33, 23, 13, 12).
//   * Symmetric 4x4 matrices are stored upper-triangular row-major:
//     (00, 01, 02, 03, 11, 12, 13, 22, 23, 33).

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <utility>

namespace hsflow {

using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Mat7 = Eigen::Matrix<double, 7, 7>;

inline constexpr std::array<std::pair<int, int>, 6> kForm2Pairs{
    {{0, 1}, {0, 2}, {0, 3}, {2, 3}, {3, 1}, {1, 2}}};

inline constexpr std::array<std::pair<int, int>, 6> kSym3Pairs{
    {{0, 0}, {1, 1}, {2, 2}, {1, 2}, {0, 2}, {0, 1}}};

inline constexpr std::array<std::pair<int, int>, 10> kSym4Pairs{
    {{0, 0}, {0, 1}, {0, 2}, {0, 3}, {1, 1}, {1, 2}, {1, 3}, {2, 2}, {2, 3}, {3, 3}}};

/// Slot of (a, b) in the packed symmetric 4x4 layout.
constexpr int sym4_index(int a, int b) {
  if (a > b) std::swap(a, b);
  constexpr int row_start[4] = {0, 4, 7, 9};
  return row_start[a] + (b - a);
}

constexpr int sym3_index(int i, int j) {
  if (i == j) return i;
  const int s = i + j;  // 1 -> (0,1), 2 -> (0,2), 3 -> (1,2)
  return s == 1 ? 5 : (s == 2 ? 4 : 3);
}

Mat3 unpack_sym3(const double* v);
void pack_sym3(const Mat3& m, double* v);
Mat4 unpack_sym4(const double* v);
void pack_sym4(const Mat4& m, double* v);

/// Smallest Cholesky pivot of a symmetric matrix, or a non-positive value if
/// the factorisation breaks down.
template <int N>
double min_cholesky_pivot(const Eigen::Matrix<double, N, N>& m) {
  Eigen::Matrix<double, N, N> l = Eigen::Matrix<double, N, N>::Zero();
  double min_pivot = std::numeric_limits<double>::infinity();
  for (int j = 0; j < N; ++j) {
    double d = m(j, j);
    for (int k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    min_pivot = std::min(min_pivot, d);
    if (!(d > 0.0)) return d;
    l(j, j) = std::sqrt(d);
    for (int i = j + 1; i < N; ++i) {
      double s = m(i, j);
      for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return min_pivot;
}

struct Form2 {
  std::array<double, 6> c{};

  static Form2 basis(int slot) {
    Form2 f;
    f.c[slot] = 1.0;
    return f;
  }
  /// Antisymmetric 4x4 coefficient matrix W with form = 1/2 W_ab e^a ^ e^b.
  Mat4 full() const;
  static Form2 from_full(const Mat4& w);

  Form2& operator+=(const Form2& o);
  friend Form2 operator+(Form2 a, const Form2& b) { return a += b; }
  friend Form2 operator-(Form2 a, const Form2& b);
  friend Form2 operator*(double s, Form2 a);
  double max_abs() const;
};

/// Coefficient of e0123 in a ^ b.
double wedge(const Form2& a, const Form2& b);

struct Triple2FormPoint {
  std::array<Form2, 3> omega;
};

/// e01+e23, e02+e31, e03+e12.
Triple2FormPoint standard_triple();

struct Volume4 {
  double m = 1.0;
};

struct SPD3 {
  Mat3 mat = Mat3::Identity();
};

struct Metric4 {
  Mat4 mat = Mat4::Identity();
};

/// Q(mu)_ij = (omega_i ^ omega_j) / (2 mu).
SPD3 wedge_gram(const Triple2FormPoint& triple, Volume4 mu);

struct NormalizedVolume {
  Volume4 mu;
  SPD3 q;
};

/// The unique volume form with det Q = 1, by cube-root rescaling.
NormalizedVolume normalize_volume(const Triple2FormPoint& triple);

Metric4 metric_from_triple(const Triple2FormPoint& triple);
/// Same formula with mu_omega already known; skips the positivity checks.
Mat4 metric_from_triple_unchecked(const Triple2FormPoint& triple, double mu);

struct HypersymplecticCheck {
  bool ok = false;
  double margin = 0.0;  // smallest eigenvalue of the wedge Gram matrix w.r.t. e0123
};

HypersymplecticCheck is_hypersymplectic(const Triple2FormPoint& triple);

Form2 hodge_star_2(const Metric4& g, const Form2& w);
/// Star on 2-forms from a precomputed inverse metric and sqrt(det g).
Form2 hodge_star_2(const Mat4& ginv, double sqrt_det, const Form2& w);

/// Star of a 3-form (omitted-index basis) to a 1-form.
std::array<double, 4> hodge_star_3(const Mat4& g, double sqrt_det, const std::array<double, 4>& beta);

/// Inner product on 2-forms induced by g: 1/2 W_ab V^ab.
double inner_2(const Mat4& ginv, const Form2& a, const Form2& b);

/// Block-diagonal 7-metric g + Q_ij dt^i dt^j.
Mat7 seven_metric(const Metric4& g, const SPD3& q);

/// sqrt(det g) * sqrt(det Q).
double seven_volume_density(const Metric4& g, const SPD3& q);

}  // namespace hsflow
