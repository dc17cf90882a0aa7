#include "hsflow/forms.hpp"

#include "hsflow/errors.hpp"
#include "hsflow/parallel.hpp"

#include <cmath>
#include <vector>

namespace hsflow {

namespace {

struct SignedSlot {
  int slot;
  double sign;
};

// Slot of the 2-form coefficient beta_xy (x < y) in the Form2 basis.
constexpr SignedSlot pair_slot(int x, int y) {
  if (x == 0) return {y - 1, 1.0};
  if (x == 1 && y == 2) return {5, 1.0};
  if (x == 1 && y == 3) return {4, -1.0};
  return {3, 1.0};
}

// Increasing triple complementary to the omitted index.
constexpr std::array<int, 3> triple_without(int o) {
  std::array<int, 3> t{};
  int k = 0;
  for (int a = 0; a < 4; ++a)
    if (a != o) t[k++] = a;
  return t;
}

int blocks_of(const Field& f, int degree) {
  const int per = form_components(degree);
  if (f.components() % per != 0 || f.components() == 0) throw Error("field is not a stack of degree-k forms");
  return f.components() / per;
}

}  // namespace

Metric4Field Metric4Field::from_metric(Field g) {
  Metric4Field m;
  const Lattice& lat = g.lattice();
  m.ginv = Field(lat, 10);
  m.sqrt_det = Field(lat, 1);
  std::vector<char> bad(lat.size(), 0);
  parallel_for(lat.size(), [&](std::size_t p) {
    double v[10];
    for (int s = 0; s < 10; ++s) v[s] = g.at(s, p);
    const Mat4 gm = unpack_sym4(v);
    if (!(min_cholesky_pivot<4>(gm) > 1e-14 * (1.0 + gm.cwiseAbs().maxCoeff()))) {
      bad[p] = 1;
      return;
    }
    const Mat4 inv = gm.inverse();
    pack_sym4(inv, v);
    for (int s = 0; s < 10; ++s) m.ginv.at(s, p) = v[s];
    m.sqrt_det.at(0, p) = std::sqrt(gm.determinant());
  });
  for (std::size_t p = 0; p < bad.size(); ++p)
    if (bad[p]) throw DegenerateMetric("metric not positive definite at grid point " + std::to_string(p));
  m.g = std::move(g);
  return m;
}

Metric4Field Metric4Field::flat(const Lattice& lattice) {
  Field g(lattice, 10);
  for (int a = 0; a < 4; ++a) std::fill_n(g.comp(sym4_index(a, a)), lattice.size(), 1.0);
  return from_metric(std::move(g));
}

Mat4 Metric4Field::at(std::size_t p) const {
  double v[10];
  for (int s = 0; s < 10; ++s) v[s] = g.at(s, p);
  return unpack_sym4(v);
}

Mat4 Metric4Field::inverse_at(std::size_t p) const {
  double v[10];
  for (int s = 0; s < 10; ++s) v[s] = ginv.at(s, p);
  return unpack_sym4(v);
}

Form2 form2_at(const Field& w, int block, std::size_t p) {
  Form2 f;
  for (int s = 0; s < 6; ++s) f.c[s] = w.at(6 * block + s, p);
  return f;
}

void set_form2(Field& w, int block, std::size_t p, const Form2& v) {
  for (int s = 0; s < 6; ++s) w.at(6 * block + s, p) = v.c[s];
}

Field ext_d(const Derivatives& d, const Field& form, int degree) {
  if (degree < 0 || degree > 2) throw Error("ext_d supports degrees 0, 1, 2");
  const int nb = blocks_of(form, degree);
  const int in_per = form_components(degree);
  const int out_per = form_components(degree + 1);
  Field out(form.lattice(), nb * out_per);

  std::vector<const double*> in(form.components());
  for (int c = 0; c < form.components(); ++c) in[c] = form.comp(c);
  std::vector<double*> outs(out.components());
  for (int c = 0; c < out.components(); ++c) outs[c] = out.comp(c);
  std::vector<std::vector<DerivTerm>> terms(out.components());

  for (int b = 0; b < nb; ++b) {
    const int ib = b * in_per;
    const int ob = b * out_per;
    if (degree == 0) {
      for (int a = 0; a < 4; ++a) terms[ob + a] = {{ib, a, 1.0}};
    } else if (degree == 1) {
      for (int s = 0; s < 6; ++s) {
        const auto [x, y] = kForm2Pairs[s];
        terms[ob + s] = {{ib + y, x, 1.0}, {ib + x, y, -1.0}};
      }
    } else {
      for (int o = 0; o < 4; ++o) {
        const auto [a, bb, c] = triple_without(o);
        const SignedSlot bc = pair_slot(bb, c), ac = pair_slot(a, c), ab = pair_slot(a, bb);
        terms[ob + o] = {{ib + bc.slot, a, bc.sign}, {ib + ac.slot, bb, -ac.sign}, {ib + ab.slot, c, ab.sign}};
      }
    }
  }
  d.first_order(in, terms, outs);
  return out;
}

Field hodge_star_2_field(const Metric4Field& g, const Field& w) {
  const int nb = blocks_of(w, 2);
  Field out(w.lattice(), w.components());
  parallel_for(w.points(), [&](std::size_t p) {
    const Mat4 ginv = g.inverse_at(p);
    const double sd = g.sqrt_det.at(0, p);
    for (int b = 0; b < nb; ++b) set_form2(out, b, p, hodge_star_2(ginv, sd, form2_at(w, b, p)));
  });
  return out;
}

Field codifferential_2(const Derivatives& d, const Metric4Field& g, const Field& w) {
  const int nb = blocks_of(w, 2);
  const Field dstar = ext_d(d, hodge_star_2_field(g, w), 2);
  Field out(w.lattice(), 4 * nb);
  parallel_for(w.points(), [&](std::size_t p) {
    const Mat4 gm = g.at(p);
    const double sd = g.sqrt_det.at(0, p);
    for (int b = 0; b < nb; ++b) {
      std::array<double, 4> beta;
      for (int o = 0; o < 4; ++o) beta[o] = dstar.at(4 * b + o, p);
      const auto r = hodge_star_3(gm, sd, beta);
      for (int a = 0; a < 4; ++a) out.at(4 * b + a, p) = -r[a];
    }
  });
  return out;
}

double integrate(const Field& density, int component) {
  const double* f = density.comp(component);
  return density.lattice().cell_volume() * pairwise_sum(std::span<const double>(f, density.points()));
}

double integrate_weighted(const Field& f, int component, const Field& density) {
  std::vector<double> v(f.points());
  const double* a = f.comp(component);
  const double* m = density.comp(0);
  parallel_for(v.size(), [&](std::size_t p) { v[p] = a[p] * m[p]; });
  return f.lattice().cell_volume() * pairwise_sum(v);
}

std::array<double, 6> cohomology_pairings(const Field& w, int block) {
  const Lattice& lat = w.lattice();
  std::array<double, 6> out{};
  const double n = static_cast<double>(w.points());
  for (int s = 0; s < 6; ++s) {
    const auto [a, b] = kForm2Pairs[s];
    const double* f = w.comp(6 * block + s);
    const double mean = pairwise_sum(std::span<const double>(f, w.points())) / n;
    out[s] = lat.extent(a) * lat.extent(b) * mean;
  }
  return out;
}

}  // namespace hsflow
