#include "hsflow/curvature.hpp"

#include "hsflow/errors.hpp"
#include "hsflow/parallel.hpp"

#include <cmath>

namespace hsflow {

namespace {

int bivector_index(int a, int b) {
  // a < b
  constexpr int start[3] = {0, 3, 5};
  return start[a] + (b - a - 1);
}

int riemann_slot(int i, int j) {
  if (i > j) std::swap(i, j);
  constexpr int start[6] = {0, 6, 11, 15, 18, 20};
  return start[i] + (j - i);
}

// Signed lookup of R_abcd from the packed bivector matrix.
double riemann_lookup(const double* r, int a, int b, int c, int d) {
  if (a == b || c == d) return 0.0;
  double s = 1.0;
  if (a > b) {
    std::swap(a, b);
    s = -s;
  }
  if (c > d) {
    std::swap(c, d);
    s = -s;
  }
  return s * r[riemann_slot(bivector_index(a, b), bivector_index(c, d))];
}

Field metric_first_derivatives(const Metric4Field& g) {
  const Lattice& lat = g.lattice();
  Field dg(lat, 40);
  for (int c = 0; c < 4; ++c)
    for (int s = 0; s < 10; ++s) fd4_first(lat, g.g.comp(s), c, dg.comp(c * 10 + s));
  return dg;
}

struct PointGeometry {
  Mat4 gm, ginv;
  double dg[4][4][4];   // d_c g_ab as dg[c][a][b]
  double gam1[4][4][4]; // Gamma_{e,ab} as gam1[e][a][b]
  double gam2[4][4][4]; // Gamma^e_ab as gam2[e][a][b]
};

void load_geometry(const Metric4Field& g, const Field& dg, std::size_t p, PointGeometry& pg) {
  pg.gm = g.at(p);
  pg.ginv = g.inverse_at(p);
  for (int c = 0; c < 4; ++c)
    for (int a = 0; a < 4; ++a)
      for (int b = a; b < 4; ++b) pg.dg[c][a][b] = pg.dg[c][b][a] = dg.at(c * 10 + sym4_index(a, b), p);
  for (int e = 0; e < 4; ++e)
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) pg.gam1[e][a][b] = 0.5 * (pg.dg[a][e][b] + pg.dg[b][e][a] - pg.dg[e][a][b]);
  for (int e = 0; e < 4; ++e)
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) {
        double s = 0.0;
        for (int f = 0; f < 4; ++f) s += pg.ginv(e, f) * pg.gam1[f][a][b];
        pg.gam2[e][a][b] = s;
      }
}

}  // namespace

Christoffel CurvatureBundle::christoffel_at(std::size_t p) const {
  Christoffel c;
  for (int i = 0; i < 40; ++i) c[i] = christoffel.at(i, p);
  return c;
}

Mat4 CurvatureBundle::ricci_at(std::size_t p) const {
  double v[10];
  for (int s = 0; s < 10; ++s) v[s] = ricci.at(s, p);
  return unpack_sym4(v);
}

std::array<double, 256> CurvatureBundle::riemann_at(std::size_t p) const {
  double r[21];
  for (int i = 0; i < 21; ++i) r[i] = riemann.at(i, p);
  std::array<double, 256> out{};
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (int c = 0; c < 4; ++c)
        for (int d = 0; d < 4; ++d) out[((a * 4 + b) * 4 + c) * 4 + d] = riemann_lookup(r, a, b, c, d);
  return out;
}

Field christoffel_field(const Metric4Field& g) {
  const Field dg = metric_first_derivatives(g);
  Field out(g.lattice(), 40);
  parallel_for(g.lattice().size(), [&](std::size_t p) {
    PointGeometry pg;
    load_geometry(g, dg, p, pg);
    for (int e = 0; e < 4; ++e)
      for (int s = 0; s < 10; ++s) {
        const auto [a, b] = kSym4Pairs[s];
        out.at(e * 10 + s, p) = pg.gam2[e][a][b];
      }
  });
  return out;
}

CurvatureBundle curvature_of(const Metric4Field& g) {
  const Lattice& lat = g.lattice();
  for (std::size_t p = 0; p < lat.size(); ++p)
    if (!(g.sqrt_det.at(0, p) > 0.0)) throw DegenerateMetric("metric not positive definite");
  const Field dg = metric_first_derivatives(g);
  CurvatureBundle cb{Field(lat, 40), Field(lat, 21), Field(lat, 10), Field(lat, 1)};

  parallel_for(lat.size(), [&](std::size_t p) {
    PointGeometry pg;
    load_geometry(g, dg, p, pg);
    for (int e = 0; e < 4; ++e)
      for (int s = 0; s < 10; ++s) {
        const auto [a, b] = kSym4Pairs[s];
        cb.christoffel.at(e * 10 + s, p) = pg.gam2[e][a][b];
      }

    // d_a d_b g_s; mixed partials averaged over both orders.
    double d2[10][10];
    for (int q = 0; q < 10; ++q) {
      const auto [a, b] = kSym4Pairs[q];
      for (int s = 0; s < 10; ++s) {
        if (a == b)
          d2[q][s] = fd4_second_at(lat, g.g.comp(s), p, a);
        else
          d2[q][s] = 0.5 * (fd4_first_at(lat, dg.comp(b * 10 + s), p, a) + fd4_first_at(lat, dg.comp(a * 10 + s), p, b));
      }
    }
    auto dd = [&](int a, int b, int i, int j) { return d2[sym4_index(a, b)][sym4_index(i, j)]; };

    double r[21];
    for (int I = 0; I < 6; ++I)
      for (int J = I; J < 6; ++J) {
        const auto [a, b] = kBivectorPairs[I];
        const auto [c, d] = kBivectorPairs[J];
        double v = 0.5 * (dd(b, c, a, d) + dd(a, d, b, c) - dd(a, c, b, d) - dd(b, d, a, c));
        for (int f = 0; f < 4; ++f) v += pg.gam1[f][b][c] * pg.gam2[f][a][d] - pg.gam1[f][b][d] * pg.gam2[f][a][c];
        r[riemann_slot(I, J)] = v;
      }
    for (int i = 0; i < 21; ++i) cb.riemann.at(i, p) = r[i];

    Mat4 ric = Mat4::Zero();
    for (int b = 0; b < 4; ++b)
      for (int d = b; d < 4; ++d) {
        double s = 0.0;
        for (int a = 0; a < 4; ++a)
          for (int c = 0; c < 4; ++c) s += pg.ginv(a, c) * riemann_lookup(r, a, b, c, d);
        ric(b, d) = ric(d, b) = s;
      }
    double packed[10];
    pack_sym4(ric, packed);
    for (int s = 0; s < 10; ++s) cb.ricci.at(s, p) = packed[s];
    cb.scalar.at(0, p) = pg.ginv.cwiseProduct(ric).sum();
  });
  return cb;
}

CurvatureNorms curvature_norms(const CurvatureBundle& bundle, const Metric4Field& g, const Field& mu) {
  const Lattice& lat = g.lattice();
  const std::size_t n = lat.size();
  std::vector<double> rm2(n), ric2(n), rm2w(n), ric4w(n);
  parallel_for(n, [&](std::size_t p) {
    const auto r = bundle.riemann_at(p);
    const Mat4 gi = g.inverse_at(p);
    // Raise one index at a time.
    std::array<double, 256> up = r, tmp{};
    for (int slot = 0; slot < 4; ++slot) {
      for (int i = 0; i < 256; ++i) {
        int idx[4] = {i >> 6, (i >> 4) & 3, (i >> 2) & 3, i & 3};
        double s = 0.0;
        for (int e = 0; e < 4; ++e) {
          int j[4] = {idx[0], idx[1], idx[2], idx[3]};
          j[slot] = e;
          s += gi(idx[slot], e) * up[((j[0] * 4 + j[1]) * 4 + j[2]) * 4 + j[3]];
        }
        tmp[i] = s;
      }
      up = tmp;
    }
    double s = 0.0;
    for (int i = 0; i < 256; ++i) s += r[i] * up[i];
    rm2[p] = std::max(s, 0.0);
    const Mat4 ric = bundle.ricci_at(p);
    const double rc = std::max((gi * ric * gi * ric).trace(), 0.0);
    ric2[p] = rc;
    rm2w[p] = rm2[p] * mu.at(0, p);
    ric4w[p] = rc * rc * mu.at(0, p);
  });
  CurvatureNorms out;
  out.sup_rm = std::sqrt(max_of(rm2));
  out.sup_ric = std::sqrt(max_of(ric2));
  out.int_rm2 = lat.cell_volume() * pairwise_sum(rm2w);
  out.int_ric4 = lat.cell_volume() * pairwise_sum(ric4w);
  return out;
}

double bianchi_residual(const CurvatureBundle& bundle) {
  double m = 0.0;
  const int i01 = bivector_index(0, 1), i23 = bivector_index(2, 3), i02 = bivector_index(0, 2),
            i13 = bivector_index(1, 3), i03 = bivector_index(0, 3), i12 = bivector_index(1, 2);
  for (std::size_t p = 0; p < bundle.riemann.points(); ++p) {
    const double v = bundle.riemann.at(riemann_slot(i01, i23), p) - bundle.riemann.at(riemann_slot(i02, i13), p) +
                     bundle.riemann.at(riemann_slot(i03, i12), p);
    m = std::max(m, std::abs(v));
  }
  return m;
}

double trace_residual(const CurvatureBundle& bundle, const Metric4Field& g) {
  double m = 0.0;
  for (std::size_t p = 0; p < bundle.ricci.points(); ++p) {
    const double tr = g.inverse_at(p).cwiseProduct(bundle.ricci_at(p)).sum();
    m = std::max(m, std::abs(tr - bundle.scalar.at(0, p)));
  }
  return m;
}

double laplace_beltrami(const Mat4& ginv, const Christoffel& gamma, const std::array<double, 4>& df,
                        const std::array<double, 10>& d2f) {
  double s = 0.0;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      double v = d2f[sym4_index(a, b)];
      for (int c = 0; c < 4; ++c) v -= christoffel(gamma, c, a, b) * df[c];
      s += ginv(a, b) * v;
    }
  return s;
}

}  // namespace hsflow
