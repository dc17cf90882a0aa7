#include "hsflow/field.hpp"

#include "hsflow/algebra.hpp"
#include "hsflow/errors.hpp"
#include "hsflow/parallel.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>

namespace hsflow {

std::size_t Lattice::stride(int axis) const {
  std::size_t s = 1;
  for (int a = 3; a > axis; --a) s *= static_cast<std::size_t>(n[a]);
  return s;
}

std::array<int, 4> Lattice::unflatten(std::size_t p) const {
  std::array<int, 4> i{};
  for (int a = 3; a >= 0; --a) {
    i[a] = static_cast<int>(p % n[a]);
    p /= n[a];
  }
  return i;
}

std::size_t Lattice::flatten(const std::array<int, 4>& i) const {
  std::size_t p = 0;
  for (int a = 0; a < 4; ++a) p = p * n[a] + i[a];
  return p;
}

bool Lattice::fully_periodic() const {
  return std::all_of(periodic.begin(), periodic.end(), [](bool b) { return b; });
}

double Lattice::min_spacing() const {
  double m = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 4; ++a)
    if (n[a] > 1) m = std::min(m, h[a]);
  return m;
}

void Grid4::validate() const {
  if (N < 8 || N % 2 != 0) throw ConfigError("grid N must be even and at least 8");
  if (!(L > 0.0) || !std::isfinite(L)) throw ConfigError("grid period L must be positive");
}

Lattice Grid4::lattice() const {
  validate();
  Lattice lat;
  lat.n = {N, N, N, N};
  lat.h = {h(), h(), h(), h()};
  return lat;
}

Field::Field(const Lattice& lattice, int components, double fill)
    : lattice_(lattice), components_(components), data_(lattice.size() * components, fill) {}

double Field::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

Field& Field::operator+=(const Field& o) { return axpy(1.0, o); }

Field& Field::axpy(double s, const Field& o) {
  if (o.data_.size() != data_.size()) throw Error("field shape mismatch");
  double* d = data_.data();
  const double* od = o.data_.data();
  parallel_for(data_.size(), [&](std::size_t i) { d[i] += s * od[i]; });
  return *this;
}

Field& Field::scale(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

std::string to_string(Backend b) { return b == Backend::Spectral ? "spectral" : "fd4"; }

Backend backend_from_string(const std::string& s) {
  if (s == "spectral") return Backend::Spectral;
  if (s == "fd4") return Backend::FD4;
  throw ConfigError("unknown backend '" + s + "'");
}

// ---------------------------------------------------------------------------
// FD4 stencils

namespace {

struct LineIndex {
  std::size_t stride;
  int n;
  bool periodic;
};

inline std::size_t shift(std::size_t p, int i, int k, const LineIndex& li) {
  int j = i + k;
  if (li.periodic) j = ((j % li.n) + li.n) % li.n;
  return p + static_cast<std::ptrdiff_t>(j - i) * static_cast<std::ptrdiff_t>(li.stride);
}

double first_at(const double* f, std::size_t p, int i, const LineIndex& li, double h) {
  if (li.n == 1) return 0.0;
  auto v = [&](int k) { return f[shift(p, i, k, li)]; };
  if (li.periodic || (i >= 2 && i <= li.n - 3)) return (v(-2) - 8.0 * v(-1) + 8.0 * v(1) - v(2)) / (12.0 * h);
  if (i == 0) return (-25.0 * v(0) + 48.0 * v(1) - 36.0 * v(2) + 16.0 * v(3) - 3.0 * v(4)) / (12.0 * h);
  if (i == 1) return (-3.0 * v(-1) - 10.0 * v(0) + 18.0 * v(1) - 6.0 * v(2) + v(3)) / (12.0 * h);
  if (i == li.n - 1) return -(-25.0 * v(0) + 48.0 * v(-1) - 36.0 * v(-2) + 16.0 * v(-3) - 3.0 * v(-4)) / (12.0 * h);
  return -(-3.0 * v(1) - 10.0 * v(0) + 18.0 * v(-1) - 6.0 * v(-2) + v(-3)) / (12.0 * h);
}

double second_at(const double* f, std::size_t p, int i, const LineIndex& li, double h) {
  if (li.n == 1) return 0.0;
  auto v = [&](int k) { return f[shift(p, i, k, li)]; };
  const double h2 = 12.0 * h * h;
  if (li.periodic || (i >= 2 && i <= li.n - 3))
    return (-v(-2) + 16.0 * v(-1) - 30.0 * v(0) + 16.0 * v(1) - v(2)) / h2;
  if (i == 0) return (45.0 * v(0) - 154.0 * v(1) + 214.0 * v(2) - 156.0 * v(3) + 61.0 * v(4) - 10.0 * v(5)) / h2;
  if (i == 1) return (10.0 * v(-1) - 15.0 * v(0) - 4.0 * v(1) + 14.0 * v(2) - 6.0 * v(3) + v(4)) / h2;
  if (i == li.n - 1)
    return (45.0 * v(0) - 154.0 * v(-1) + 214.0 * v(-2) - 156.0 * v(-3) + 61.0 * v(-4) - 10.0 * v(-5)) / h2;
  return (10.0 * v(1) - 15.0 * v(0) - 4.0 * v(-1) + 14.0 * v(-2) - 6.0 * v(-3) + v(-4)) / h2;
}

void check_line(const Lattice& lat, int axis) {
  if (!lat.periodic[axis] && lat.n[axis] > 1 && lat.n[axis] < 6)
    throw ConfigError("non-periodic FD4 axis needs at least 6 points");
}

}  // namespace

double fd4_first_at(const Lattice& lat, const double* f, std::size_t p, int axis) {
  const LineIndex li{lat.stride(axis), lat.n[axis], lat.periodic[axis]};
  return first_at(f, p, static_cast<int>((p / li.stride) % li.n), li, lat.h[axis]);
}

double fd4_second_at(const Lattice& lat, const double* f, std::size_t p, int axis) {
  const LineIndex li{lat.stride(axis), lat.n[axis], lat.periodic[axis]};
  return second_at(f, p, static_cast<int>((p / li.stride) % li.n), li, lat.h[axis]);
}

void fd4_first(const Lattice& lat, const double* f, int axis, double* out) {
  check_line(lat, axis);
  const LineIndex li{lat.stride(axis), lat.n[axis], lat.periodic[axis]};
  const double h = lat.h[axis];
  parallel_for(lat.size(), [&](std::size_t p) {
    const int i = static_cast<int>((p / li.stride) % li.n);
    out[p] = first_at(f, p, i, li, h);
  });
}

void fd4_second(const Lattice& lat, const double* f, int axis, double* out) {
  check_line(lat, axis);
  const LineIndex li{lat.stride(axis), lat.n[axis], lat.periodic[axis]};
  const double h = lat.h[axis];
  parallel_for(lat.size(), [&](std::size_t p) {
    const int i = static_cast<int>((p / li.stride) % li.n);
    out[p] = second_at(f, p, i, li, h);
  });
}

void Derivatives::gradient(const double* f, std::span<double* const> out) const {
  const double* in[1] = {f};
  std::vector<std::vector<DerivTerm>> terms(4);
  for (int a = 0; a < 4; ++a) terms[a] = {{0, a, 1.0}};
  first_order(in, terms, out);
}

void Derivatives::partial(const double* f, int axis, double* out) const {
  const double* in[1] = {f};
  std::vector<std::vector<DerivTerm>> terms{{{0, axis, 1.0}}};
  double* o[1] = {out};
  first_order(in, terms, o);
}

namespace {

class FD4Derivatives final : public Derivatives {
 public:
  explicit FD4Derivatives(const Lattice& lat) : Derivatives(lat, Backend::FD4) {
    for (int a = 0; a < 4; ++a) check_line(lat, a);
  }

  void first_order(std::span<const double* const> in, std::span<const std::vector<DerivTerm>> terms,
                   std::span<double* const> out) const override {
    const std::size_t n = lattice_.size();
    std::vector<double> tmp(n);
    for (std::size_t o = 0; o < out.size(); ++o) {
      std::fill(out[o], out[o] + n, 0.0);
      for (const auto& t : terms[o]) {
        fd4_first(lattice_, in[t.input], t.axis, tmp.data());
        double* dst = out[o];
        const double c = t.coeff;
        parallel_for(n, [&](std::size_t p) { dst[p] += c * tmp[p]; });
      }
    }
  }

  void hessian(const double* f, std::span<double* const> out) const override {
    const std::size_t n = lattice_.size();
    std::vector<double> tmp(n);
    for (int a = 0; a < 4; ++a) {
      fd4_second(lattice_, f, a, out[sym4_index(a, a)]);
      fd4_first(lattice_, f, a, tmp.data());
      for (int b = a + 1; b < 4; ++b) fd4_first(lattice_, tmp.data(), b, out[sym4_index(a, b)]);
    }
  }
};

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwDeleter {
  void operator()(void* p) const { fftw_free(p); }
};

class SpectralDerivatives final : public Derivatives {
 public:
  explicit SpectralDerivatives(const Lattice& lat) : Derivatives(lat, Backend::Spectral) {
    if (!lat.fully_periodic()) throw ConfigError("spectral backend requires a periodic lattice");
    real_size_ = lat.size();
    complex_size_ = static_cast<std::size_t>(lat.n[0]) * lat.n[1] * lat.n[2] * (lat.n[3] / 2 + 1);
    for (int a = 0; a < 4; ++a) {
      const int n = lat.n[a];
      const int len = a == 3 ? n / 2 + 1 : n;
      wave_[a].assign(len, 0.0);
      keep_[a].assign(len, 0);
      const double unit = 2.0 * std::numbers::pi / lat.extent(a);
      for (int i = 0; i < len; ++i) {
        const int k = (i <= n / 2) ? i : i - n;
        const bool nyquist = (n % 2 == 0) && (i == n / 2);
        wave_[a][i] = nyquist ? 0.0 : unit * k;
        keep_[a][i] = (!nyquist && 3 * std::abs(k) < n) ? 1 : 0;
      }
    }
    // Flattened per-mode tables for the inner loops.
    const double norm = 1.0 / static_cast<double>(real_size_);
    scale_.assign(complex_size_, 0.0);
    for (auto& w : mode_wave_) w.assign(complex_size_, 0.0);
    for_each_mode([&](std::size_t idx, const std::array<int, 4>& m) {
      const bool keep = keep_[0][m[0]] && keep_[1][m[1]] && keep_[2][m[2]] && keep_[3][m[3]];
      scale_[idx] = keep ? norm : 0.0;
      for (int a = 0; a < 4; ++a) mode_wave_[a][idx] = wave_[a][m[a]];
    });
    auto r = alloc_real();
    auto c = alloc_complex();
    const int dims[4] = {lat.n[0], lat.n[1], lat.n[2], lat.n[3]};
    std::lock_guard lock(fftw_planner_mutex());
    forward_ = fftw_plan_dft_r2c(4, dims, r.get(), reinterpret_cast<fftw_complex*>(c.get()), FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_c2r(4, dims, reinterpret_cast<fftw_complex*>(c.get()), r.get(), FFTW_ESTIMATE);
  }

  ~SpectralDerivatives() override {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(inverse_);
  }

  void first_order(std::span<const double* const> in, std::span<const std::vector<DerivTerm>> terms,
                   std::span<double* const> out) const override {
    std::vector<std::unique_ptr<std::complex<double>[], FftwDeleter>> spec(in.size());
    std::vector<char> used(in.size(), 0);
    for (const auto& ts : terms)
      for (const auto& t : ts) used[t.input] = 1;
    const long long nin = static_cast<long long>(in.size());
#pragma omp parallel for schedule(static) num_threads(workers())
    for (long long i = 0; i < nin; ++i) {
      if (!used[i]) continue;
      spec[i] = to_spectral(in[i]);
    }
    const long long nout = static_cast<long long>(out.size());
#pragma omp parallel for schedule(static) num_threads(workers())
    for (long long o = 0; o < nout; ++o) {
      auto acc = alloc_complex();
      std::fill(acc.get(), acc.get() + complex_size_, std::complex<double>(0.0, 0.0));
      for (const auto& t : terms[o]) accumulate_derivative(spec[t.input].get(), t.axis, t.coeff, acc.get());
      to_real(acc.get(), out[o]);
    }
  }

  void hessian(const double* f, std::span<double* const> out) const override {
    auto spec = to_spectral(f);
    const long long nout = 10;
#pragma omp parallel for schedule(static) num_threads(workers())
    for (long long s = 0; s < nout; ++s) {
      const auto [a, b] = kSym4Pairs[s];
      auto acc = alloc_complex();
      const double* wa = mode_wave_[a].data();
      const double* wb = mode_wave_[b].data();
      const double* in = reinterpret_cast<const double*>(spec.get());
      double* o = reinterpret_cast<double*>(acc.get());
      for (std::size_t idx = 0; idx < complex_size_; ++idx) {
        const double k2 = -wa[idx] * wb[idx];
        o[2 * idx] = k2 * in[2 * idx];
        o[2 * idx + 1] = k2 * in[2 * idx + 1];
      }
      to_real(acc.get(), out[s]);
    }
  }

 private:
  std::unique_ptr<double[], FftwDeleter> alloc_real() const {
    return std::unique_ptr<double[], FftwDeleter>(fftw_alloc_real(real_size_));
  }
  std::unique_ptr<std::complex<double>[], FftwDeleter> alloc_complex() const {
    return std::unique_ptr<std::complex<double>[], FftwDeleter>(
        reinterpret_cast<std::complex<double>*>(fftw_alloc_complex(complex_size_)));
  }

  template <class F>
  void for_each_mode(F&& f) const {
    const int n0 = lattice_.n[0], n1 = lattice_.n[1], n2 = lattice_.n[2], n3 = lattice_.n[3] / 2 + 1;
    std::size_t idx = 0;
    for (int i0 = 0; i0 < n0; ++i0)
      for (int i1 = 0; i1 < n1; ++i1)
        for (int i2 = 0; i2 < n2; ++i2)
          for (int i3 = 0; i3 < n3; ++i3, ++idx) f(idx, std::array<int, 4>{i0, i1, i2, i3});
  }

  std::unique_ptr<std::complex<double>[], FftwDeleter> to_spectral(const double* f) const {
    auto r = alloc_real();
    std::copy(f, f + real_size_, r.get());
    auto c = alloc_complex();
    fftw_execute_dft_r2c(forward_, r.get(), reinterpret_cast<fftw_complex*>(c.get()));
    double* v = reinterpret_cast<double*>(c.get());
    for (std::size_t idx = 0; idx < complex_size_; ++idx) {
      v[2 * idx] *= scale_[idx];
      v[2 * idx + 1] *= scale_[idx];
    }
    return c;
  }

  void accumulate_derivative(const std::complex<double>* spec, int axis, double coeff,
                             std::complex<double>* acc) const {
    // acc += i k spec
    const double* w = mode_wave_[axis].data();
    const double* in = reinterpret_cast<const double*>(spec);
    double* o = reinterpret_cast<double*>(acc);
    for (std::size_t idx = 0; idx < complex_size_; ++idx) {
      const double k = coeff * w[idx];
      o[2 * idx] -= k * in[2 * idx + 1];
      o[2 * idx + 1] += k * in[2 * idx];
    }
  }

  // Consumes the spectral buffer.
  void to_real(std::complex<double>* spec, double* out) const {
    auto r = alloc_real();
    fftw_execute_dft_c2r(inverse_, reinterpret_cast<fftw_complex*>(spec), r.get());
    std::copy(r.get(), r.get() + real_size_, out);
  }

  std::size_t real_size_ = 0;
  std::size_t complex_size_ = 0;
  std::array<std::vector<double>, 4> wave_;
  std::array<std::vector<char>, 4> keep_;
  std::vector<double> scale_;  // normalisation times the truncation mask
  std::array<std::vector<double>, 4> mode_wave_;
  fftw_plan forward_ = nullptr;
  fftw_plan inverse_ = nullptr;
};

}  // namespace

std::shared_ptr<const Derivatives> Derivatives::make(const Lattice& lattice, Backend backend) {
  if (backend == Backend::Spectral) return std::make_shared<SpectralDerivatives>(lattice);
  return std::make_shared<FD4Derivatives>(lattice);
}

}  // namespace hsflow
