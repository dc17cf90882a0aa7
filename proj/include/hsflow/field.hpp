#pragma once

// Discrete fields on a 4D lattice. The flow runs on the periodic torus
// (Grid4); charts built from local potentials use non-periodic lattices.
// Storage is component-major, each component row-major in (x0, x1, x2, x3)
// with x3 fastest.

#include <array>
#include <cstddef>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace hsflow {

struct Lattice {
  std::array<int, 4> n{1, 1, 1, 1};
  std::array<double, 4> h{1.0, 1.0, 1.0, 1.0};
  std::array<double, 4> origin{0.0, 0.0, 0.0, 0.0};
  std::array<bool, 4> periodic{true, true, true, true};

  std::size_t size() const { return static_cast<std::size_t>(n[0]) * n[1] * n[2] * n[3]; }
  std::size_t stride(int axis) const;
  std::array<int, 4> unflatten(std::size_t p) const;
  std::size_t flatten(const std::array<int, 4>& i) const;
  double coord(int axis, int i) const { return origin[axis] + i * h[axis]; }
  double extent(int axis) const { return n[axis] * h[axis]; }
  double cell_volume() const { return h[0] * h[1] * h[2] * h[3]; }
  bool fully_periodic() const;
  /// Smallest spacing, the h entering discretisation error budgets.
  double min_spacing() const;

  friend bool operator==(const Lattice&, const Lattice&) = default;
};

/// The periodic grid on T^4 = (R / L Z)^4 with N points per axis.
struct Grid4 {
  int N = 16;
  double L = 2.0 * std::numbers::pi;

  /// Throws ConfigError unless N >= 8, N even and L > 0.
  void validate() const;
  double h() const { return L / N; }
  Lattice lattice() const;
};

class Field {
 public:
  Field() = default;
  Field(const Lattice& lattice, int components, double fill = 0.0);

  const Lattice& lattice() const { return lattice_; }
  int components() const { return components_; }
  std::size_t points() const { return lattice_.size(); }

  double* comp(int c) { return data_.data() + static_cast<std::size_t>(c) * points(); }
  const double* comp(int c) const { return data_.data() + static_cast<std::size_t>(c) * points(); }
  double& at(int c, std::size_t p) { return comp(c)[p]; }
  double at(int c, std::size_t p) const { return comp(c)[p]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  double max_abs() const;
  Field& operator+=(const Field& o);
  /// this += s * o
  Field& axpy(double s, const Field& o);
  Field& scale(double s);

 private:
  Lattice lattice_;
  int components_ = 0;
  std::vector<double> data_;
};

enum class Backend { Spectral, FD4 };

std::string to_string(Backend b);
/// "spectral" or "fd4"; throws ConfigError otherwise.
Backend backend_from_string(const std::string& s);

struct DerivTerm {
  int input;
  int axis;
  double coeff;
};

/// Derivative backend bound to a lattice.
///
/// Spectral: FFT differentiation on a fully periodic lattice, Nyquist modes
/// dropped and the 2/3 truncation applied to every differentiated input, so
/// pointwise products are de-aliased before they are differentiated.
/// FD4: centred 4th-order stencils; non-periodic axes use 4th-order one-sided
/// stencils in the two boundary layers.
class Derivatives {
 public:
  virtual ~Derivatives() = default;

  /// Throws ConfigError for spectral on a non-periodic lattice.
  static std::shared_ptr<const Derivatives> make(const Lattice& lattice, Backend backend);

  Backend backend() const { return backend_; }
  const Lattice& lattice() const { return lattice_; }

  /// out[o] = sum over terms[o] of coeff * d_axis in[input].
  virtual void first_order(std::span<const double* const> in, std::span<const std::vector<DerivTerm>> terms,
                           std::span<double* const> out) const = 0;

  /// Second derivatives d_a d_b f in packed symmetric 4x4 order.
  virtual void hessian(const double* f, std::span<double* const> out) const = 0;

  void gradient(const double* f, std::span<double* const> out) const;
  void partial(const double* f, int axis, double* out) const;

 protected:
  Derivatives(const Lattice& lattice, Backend backend) : lattice_(lattice), backend_(backend) {}

  Lattice lattice_;
  Backend backend_;
};

/// FD4 first derivative of one scalar array along an axis; the building block
/// shared with the curvature stencils.
void fd4_first(const Lattice& lattice, const double* f, int axis, double* out);
/// FD4 pure second derivative along an axis.
void fd4_second(const Lattice& lattice, const double* f, int axis, double* out);

/// Single-point versions of the same stencils.
double fd4_first_at(const Lattice& lattice, const double* f, std::size_t p, int axis);
double fd4_second_at(const Lattice& lattice, const double* f, std::size_t p, int axis);

}  // namespace hsflow
