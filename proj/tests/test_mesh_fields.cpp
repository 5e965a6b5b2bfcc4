#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "atx/fields.hpp"
#include "atx/mesh.hpp"
#include "atx/rng.hpp"

using namespace atx;

namespace {

MetricModel conformal(double amp, double width = 0.2) {
  MetricModel m;
  m.family = MetricFamily::ConformalBump;
  m.bump = {{0, 0}, amp, width};
  return m;
}

MetricModel generic() {
  MetricModel m;
  m.family = MetricFamily::GenericAnalytic;
  m.bump = {{0.1, -0.15}, 0.15, 0.25};
  return m;
}

AttenuationModel no_att() { return {}; }

double radial_quintic(double r, double r0, double r1) {
  // 1 for r<=r0, 0 for r>=r1, C^2 transition
  if (r <= r0) return 1.0;
  if (r >= r1) return 0.0;
  double t = (r - r0) / (r1 - r0);
  return 1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
}

}  // namespace

TEST_CASE("mesh: circle rings exact, quality, conformity") {
  DiskDomain dom;
  DiskMesh m = DiskMesh::build(dom, 1.0 / 32);

  CHECK(m.circle_inner.size() > 100);
  CHECK(m.circle_mid.size() > 100);
  CHECK(m.circle_outer.size() > 100);
  for (int i : m.circle_inner) CHECK(std::abs(norm(m.xy[i]) - 1.0) < 1e-12);
  for (int i : m.circle_mid) CHECK(std::abs(norm(m.xy[i]) - 1.1) < 1e-12);
  for (int i : m.circle_outer) CHECK(std::abs(norm(m.xy[i]) - 1.2) < 1e-12);

  CHECK(m.min_angle_deg() >= 20.0);
  for (int t = 0; t < m.n_tris(); ++t) CHECK(m.tri_area(t) > 0);

  // conforming: every edge bounds one or two triangles; single-sided edges
  // form exactly the outer circle
  std::map<std::pair<int, int>, int> edges;
  for (const auto& t : m.tris) {
    int e[3][2] = {{t.a, t.b}, {t.b, t.c}, {t.c, t.a}};
    for (auto& ed : e) edges[{std::min(ed[0], ed[1]), std::max(ed[0], ed[1])}]++;
  }
  int boundary_edges = 0;
  for (auto& [e, c] : edges) {
    CHECK(c <= 2);
    if (c == 1) {
      ++boundary_edges;
      CHECK(std::abs(norm(m.xy[e.first]) - 1.2) < 1e-12);
      CHECK(std::abs(norm(m.xy[e.second]) - 1.2) < 1e-12);
    }
  }
  CHECK(boundary_edges == (int)m.circle_outer.size());
  // Euler characteristic of the disk
  CHECK(m.n_nodes() - (int)edges.size() + m.n_tris() == 1);
}

TEST_CASE("mesh: locate finds containing triangles") {
  DiskMesh m = DiskMesh::build({}, 1.0 / 16);
  Rng rng(3);
  for (int k = 0; k < 300; ++k) {
    double r = std::sqrt(rng.uniform()) * 1.19;
    double th = rng.uniform(0, 2 * M_PI);
    Vec2 p{r * std::cos(th), r * std::sin(th)};
    DiskMesh::Loc loc;
    REQUIRE(m.locate(p, loc));
    const Tri& T = m.tris[loc.tri];
    Vec2 q = loc.b[0] * m.xy[T.a] + loc.b[1] * m.xy[T.b] + loc.b[2] * m.xy[T.c];
    CHECK(norm(q - p) < 1e-10);
  }
  // points on the outer circle (outside the polygon) still resolve by clamping
  for (int k = 0; k < 50; ++k) {
    double th = rng.uniform(0, 2 * M_PI);
    Vec2 p{1.2 * std::cos(th), 1.2 * std::sin(th)};
    DiskMesh::Loc loc;
    CHECK(m.locate(p, loc));
  }
  DiskMesh::Loc loc;
  CHECK(!m.locate({1.5, 0.4}, loc));
}

TEST_CASE("fields: P1 interpolation and least-squares gradients exact on linears") {
  DiskMesh m = DiskMesh::build({}, 1.0 / 16);
  GradientOp grad = GradientOp::build(m);
  CovScalarPair W(m);
  cplx c0{0.3, -1.1}, cx{2.0, 0.5}, cy{-0.7, 0.25};
  for (int i = 0; i < m.n_nodes(); ++i) {
    Vec2 p = m.xy[i];
    W.at(i, 0) = c0 + cx * p.x + cy * p.y;
    W.at(i, 1) = 1.0 + 2.0 * p.x - 3.0 * p.y;
    W.at(i, 2) = cplx{0, 1} * (p.x + p.y);
  }
  Rng rng(5);
  for (int k = 0; k < 100; ++k) {
    double r = std::sqrt(rng.uniform()) * 1.19;
    double th = rng.uniform(0, 2 * M_PI);
    Vec2 p{r * std::cos(th), r * std::sin(th)};
    auto vals = W.interp_at(p);
    CHECK(std::abs(vals[0] - (c0 + cx * p.x + cy * p.y)) < 1e-12);
  }
  // gradients at every node
  for (int i = 0; i < m.n_nodes(); ++i) {
    cplx gx = 0, gy = 0;
    cplx ui = W.at(i, 0);
    for (const auto& e : grad.rows[i]) {
      gx += e.wx * (W.at(e.j, 0) - ui);
      gy += e.wy * (W.at(e.j, 0) - ui);
    }
    CHECK(std::abs(gx - cx) < 1e-11);
    CHECK(std::abs(gy - cy) < 1e-11);
  }
}

TEST_CASE("norms: metric pair and coordinate phantom against closed forms") {
  DiskMesh m = DiskMesh::build({}, 1.0 / 32);
  MetricModel eu;

  // [g, 0]: |g|_g^2 = 2 pointwise, so the squared norm is 2 * vol(M) = 2 pi
  PairField G(m);
  for (int i = 0; i < m.n_nodes(); ++i) {
    Sym2 gm = eu.metric(m.xy[i]);
    G.at(i, 0) = gm.a11;
    G.at(i, 1) = gm.a12;
    G.at(i, 2) = gm.a22;
  }
  double n2 = norm_l2(eu, G, kInner);
  CHECK(n2 * n2 == doctest::Approx(2.0 * M_PI).epsilon(2e-3));

  // f11 = x^1: squared norm = int_disk x^2 = pi/4
  PairField F(m);
  for (int i = 0; i < m.n_nodes(); ++i) F.at(i, 0) = m.xy[i].x;
  double nf = norm_l2(eu, F, kInner);
  CHECK(nf * nf == doctest::Approx(M_PI / 4.0).epsilon(3e-3));

  // conformal metric: squared norm of [g,0] = 2 * conformal volume
  MetricModel cf = conformal(0.1);
  PairField Gc(m);
  for (int i = 0; i < m.n_nodes(); ++i) {
    Sym2 gm = cf.metric(m.xy[i]);
    Gc.at(i, 0) = gm.a11;
    Gc.at(i, 1) = gm.a12;
    Gc.at(i, 2) = gm.a22;
  }
  // dense polar oracle for the volume
  double vol = 0;
  int nr = 400, nt = 400;
  for (int i = 0; i < nr; ++i) {
    double r = (i + 0.5) / nr;
    for (int j = 0; j < nt; ++j) {
      double th = 2 * M_PI * (j + 0.5) / nt;
      Vec2 p{r * std::cos(th), r * std::sin(th)};
      vol += std::sqrt(cf.metric(p).det()) * r * (1.0 / nr) * (2 * M_PI / nt);
    }
  }
  double nc = norm_l2(cf, Gc, kInner);
  CHECK(nc * nc == doctest::Approx(2.0 * vol).epsilon(3e-3));
}

TEST_CASE("apply_d_a: exact on linear generators in the euclidean metric") {
  DiskMesh m = DiskMesh::build({}, 1.0 / 16);
  GradientOp grad = GradientOp::build(m);
  MetricModel eu;
  AttenuationModel a0 = no_att();

  CovScalarPair W(m);
  // w = (3x - y + 2i, x + 5y), phi = 7x + iy
  for (int i = 0; i < m.n_nodes(); ++i) {
    Vec2 p = m.xy[i];
    W.at(i, 0) = 3.0 * p.x - p.y + cplx{0, 2};
    W.at(i, 1) = p.x + 5.0 * p.y;
    W.at(i, 2) = 7.0 * p.x + cplx{0, 1} * p.y;
  }
  PairField D = apply_d_a(eu, a0, grad, W);
  for (int i = 0; i < m.n_nodes(); ++i) {
    CHECK(std::abs(D.at(i, 0) - 3.0) < 1e-11);                 // d1 w1
    CHECK(std::abs(D.at(i, 1) - 0.5 * (1.0 - 1.0)) < 1e-11);   // (d1 w2 + d2 w1)/2
    CHECK(std::abs(D.at(i, 2) - 5.0) < 1e-11);                 // d2 w2
    CHECK(std::abs(D.at(i, 3) - 7.0) < 1e-11);                 // d1 phi
    CHECK(std::abs(D.at(i, 4) - cplx{0, 1}) < 1e-11);          // d2 phi
  }

  // constant attenuation couples the slots through a phi g and a w
  AttenuationModel ac;
  ac.constant = {0.4, -0.3};
  PairField Dc = apply_d_a(eu, ac, grad, W);
  for (int i : {17, 203, 900}) {
    cplx phi = W.at(i, 2);
    CHECK(std::abs(Dc.at(i, 0) - (D.at(i, 0) + ac.constant * phi)) < 1e-12);
    CHECK(std::abs(Dc.at(i, 1) - D.at(i, 1)) < 1e-12);  // g12 = 0
    CHECK(std::abs(Dc.at(i, 3) - (D.at(i, 3) + ac.constant * W.at(i, 0))) < 1e-12);
  }
}

TEST_CASE("apply_d_a is exact on quadratic generators over a curved metric") {
  MetricModel g = generic();
  AttenuationModel a;
  a.constant = {0.2, 0.1};
  a.bumps.push_back({{{0.05, -0.1}, 1.0, 0.3}, {0.3, 0.2}});

  auto nodal_error = [&](double h) {
    DiskMesh m = DiskMesh::build({}, h);
    GradientOp grad = GradientOp::build(m);
    CovScalarPair W(m);
    for (int i = 0; i < m.n_nodes(); ++i) {
      Vec2 p = m.xy[i];
      W.at(i, 0) = p.x * p.x - 0.5 * p.y + cplx{0, 1} * p.x * p.y;
      W.at(i, 1) = 0.3 * p.y * p.y + 2.0 * p.x;
      W.at(i, 2) = p.x * p.y + cplx{0, 0.5} * p.x * p.x;
    }
    PairField D = apply_d_a(g, a, grad, W);
    double err2 = 0, cnt = 0;
    for (int i = 0; i < m.n_nodes(); ++i) {
      Vec2 p = m.xy[i];
      // closed-form d_a of the quadratic generator
      cplx w1 = p.x * p.x - 0.5 * p.y + cplx{0, 1} * p.x * p.y;
      cplx w2 = 0.3 * p.y * p.y + 2.0 * p.x;
      cplx phi = p.x * p.y + cplx{0, 0.5} * p.x * p.x;
      cplx d1w1 = 2.0 * p.x + cplx{0, 1} * p.y, d2w1 = -0.5 + cplx{0, 1} * p.x;
      cplx d1w2 = 2.0, d2w2 = 0.6 * p.y;
      cplx d1phi = p.y + cplx{0, 1} * p.x, d2phi = p.x;
      auto gam = g.christoffel(p);
      Sym2 gm = g.metric(p);
      cplx av = a.value(p);
      cplx e0 = d1w1 - gam[0](0, 0) * w1 - gam[1](0, 0) * w2 + av * phi * gm.a11 - D.at(i, 0);
      cplx e1 = 0.5 * (d1w2 + d2w1) - gam[0](0, 1) * w1 - gam[1](0, 1) * w2 +
                av * phi * gm.a12 - D.at(i, 1);
      cplx e2 = d2w2 - gam[0](1, 1) * w1 - gam[1](1, 1) * w2 + av * phi * gm.a22 - D.at(i, 2);
      cplx e3 = d1phi + av * w1 - D.at(i, 3);
      cplx e4 = d2phi + av * w2 - D.at(i, 4);
      err2 += std::norm(e0) + std::norm(e1) + std::norm(e2) + std::norm(e3) + std::norm(e4);
      cnt += 1;
    }
    return std::sqrt(err2 / cnt);
  };

  // gradients reproduce quadratics, so only roundoff remains
  CHECK(nodal_error(1.0 / 12) < 1e-10);
  CHECK(nodal_error(1.0 / 24) < 1e-10);
}

TEST_CASE("apply_d_a is second order on smooth non-polynomial generators") {
  MetricModel g = generic();
  AttenuationModel a;
  a.constant = {0.2, 0.1};

  auto nodal_error = [&](double h) {
    DiskMesh m = DiskMesh::build({}, h);
    GradientOp grad = GradientOp::build(m);
    CovScalarPair W(m);
    for (int i = 0; i < m.n_nodes(); ++i) {
      Vec2 p = m.xy[i];
      W.at(i, 0) = std::sin(2.0 * p.x) * std::cos(p.y);
      W.at(i, 1) = std::exp(0.5 * p.x) * std::sin(p.y);
      W.at(i, 2) = cplx{0, 1} * std::cos(2.0 * p.x + p.y);
    }
    PairField D = apply_d_a(g, a, grad, W);
    double err2 = 0;
    int cnt = 0;
    for (int i = 0; i < m.n_nodes(); ++i) {
      Vec2 p = m.xy[i];
      cplx w1 = std::sin(2.0 * p.x) * std::cos(p.y);
      cplx w2 = std::exp(0.5 * p.x) * std::sin(p.y);
      cplx phi = cplx{0, 1} * std::cos(2.0 * p.x + p.y);
      cplx d1w1 = 2.0 * std::cos(2.0 * p.x) * std::cos(p.y);
      cplx d2w1 = -std::sin(2.0 * p.x) * std::sin(p.y);
      cplx d1w2 = 0.5 * std::exp(0.5 * p.x) * std::sin(p.y);
      cplx d2w2 = std::exp(0.5 * p.x) * std::cos(p.y);
      cplx d1phi = cplx{0, -2} * std::sin(2.0 * p.x + p.y);
      cplx d2phi = cplx{0, -1} * std::sin(2.0 * p.x + p.y);
      auto gam = g.christoffel(p);
      Sym2 gm = g.metric(p);
      cplx av = a.value(p);
      cplx e0 = d1w1 - gam[0](0, 0) * w1 - gam[1](0, 0) * w2 + av * phi * gm.a11 - D.at(i, 0);
      cplx e1 = 0.5 * (d1w2 + d2w1) - gam[0](0, 1) * w1 - gam[1](0, 1) * w2 +
                av * phi * gm.a12 - D.at(i, 1);
      cplx e2 = d2w2 - gam[0](1, 1) * w1 - gam[1](1, 1) * w2 + av * phi * gm.a22 - D.at(i, 2);
      cplx e3 = d1phi + av * w1 - D.at(i, 3);
      cplx e4 = d2phi + av * w2 - D.at(i, 4);
      err2 += std::norm(e0) + std::norm(e1) + std::norm(e2) + std::norm(e3) + std::norm(e4);
      cnt += 1;
    }
    return std::sqrt(err2 / cnt);
  };

  double e1 = nodal_error(1.0 / 12), e2 = nodal_error(1.0 / 24);
  CHECK(e1 / e2 > 3.0);
}

TEST_CASE("duality: (d_a W, F) = -(W, delta_a F) for interior-supported fields") {
  MetricModel g = conformal(0.1);
  AttenuationModel a;
  a.constant = {0.1, 0.2};
  a.bumps.push_back({{{-0.1, 0.2}, 1.0, 0.25}, {0.2, -0.4}});

  auto defect = [&](double h) {
    DiskMesh m = DiskMesh::build({}, h);
    GradientOp grad = GradientOp::build(m);
    CovScalarPair W(m);
    PairField F(m);
    for (int i = 0; i < m.n_nodes(); ++i) {
      Vec2 p = m.xy[i];
      double chi = radial_quintic(norm(p), 0.45, 0.85);
      W.at(i, 0) = chi * (std::sin(2 * p.x) + cplx{0, 1} * p.y);
      W.at(i, 1) = chi * (p.x * p.y - 0.3);
      W.at(i, 2) = chi * std::cos(1.5 * p.y);
      F.at(i, 0) = chi * (p.y + cplx{0, 0.5});
      F.at(i, 1) = chi * std::sin(p.x + p.y);
      F.at(i, 2) = chi * (0.2 - p.x);
      F.at(i, 3) = chi * cplx{0, 1} * std::cos(2 * p.x);
      F.at(i, 4) = chi * (p.x * p.x - p.y);
    }
    cplx lhs = inner_product_l2(g, apply_d_a(g, a, grad, W), F, kInner);
    CovScalarPair dF = apply_delta_a(g, a, grad, F);
    cplx rhs = -inner_product_l2(g, W, dF, kInner);
    double scale = norm_l2(g, W, kInner) * norm_l2(g, F, kInner);
    return std::abs(lhs - rhs) / scale;
  };
  double d16 = defect(1.0 / 16), d32 = defect(1.0 / 32);
  CHECK(d16 < 5e-2);
  CHECK(d32 < d16);
}

TEST_CASE("eval_on_sphere and zero extension") {
  DiskMesh m = DiskMesh::build({}, 1.0 / 16);
  PairField F(m);
  for (int i = 0; i < m.n_nodes(); ++i) {
    F.at(i, 0) = 1.0;
    F.at(i, 1) = 2.0;
    F.at(i, 2) = -1.0;
    F.at(i, 3) = cplx{0, 1};
    F.at(i, 4) = 0.5;
  }
  Vec2 v{0.3, -0.8};
  cplx want = v.x * v.x + 2.0 * 2.0 * v.x * v.y - v.y * v.y + cplx{0, 1} * v.x + 0.5 * v.y;
  auto vals = F.interp_at({0.2, 0.1});
  CHECK(std::abs(eval_on_sphere(vals, v) - want) < 1e-12);

  PairField Z = extend_by_zero(F, kInner);
  for (int i = 0; i < m.n_nodes(); ++i) {
    if (norm(m.xy[i]) > 1.0 + 1e-12)
      for (int c = 0; c < 5; ++c) CHECK(Z.at(i, c) == cplx{0, 0});
    if (norm(m.xy[i]) < 1.0 - 1e-12)
      for (int c = 0; c < 5; ++c) CHECK(Z.at(i, c) == F.at(i, c));
  }
}

TEST_CASE("random smooth fields are deterministic per seed") {
  DiskMesh m = DiskMesh::build({}, 1.0 / 16);
  auto A = random_smooth_field<5>(m, 42, 2, kInner);
  auto B = random_smooth_field<5>(m, 42, 2, kInner);
  auto C = random_smooth_field<5>(m, 43, 2, kInner);
  CHECK(A.v == B.v);
  bool same = true;
  for (size_t i = 0; i < A.v.size(); ++i) same = same && A.v[i] == C.v[i];
  CHECK(!same);
}

TEST_CASE("mesh sizes scale like 1/h^2 and build is deterministic") {
  DiskMesh a = DiskMesh::build({}, 1.0 / 16);
  DiskMesh b = DiskMesh::build({}, 1.0 / 32);
  double ratio = (double)b.n_nodes() / a.n_nodes();
  CHECK(ratio > 3.0);
  CHECK(ratio < 5.0);
  DiskMesh c = DiskMesh::build({}, 1.0 / 16);
  CHECK(a.xy.size() == c.xy.size());
  for (size_t i = 0; i < a.xy.size(); ++i) {
    CHECK(a.xy[i].x == c.xy[i].x);
    CHECK(a.xy[i].y == c.xy[i].y);
  }
}
