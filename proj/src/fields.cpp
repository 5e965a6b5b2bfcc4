#include "atx/fields.hpp"

#include <cmath>

#include "atx/rng.hpp"

namespace atx {

namespace {

// nodal complex gradient of component c through the least-squares weights
inline std::array<cplx, 2> nodal_grad(const GradientOp& grad, const Field<3>& W, int i, int c) {
  std::array<cplx, 2> g{};
  cplx ui = W.at(i, c);
  for (const auto& e : grad.rows[i]) {
    cplx d = W.at(e.j, c) - ui;
    g[0] += e.wx * d;
    g[1] += e.wy * d;
  }
  return g;
}

inline std::array<cplx, 2> nodal_grad5(const GradientOp& grad, const Field<5>& F, int i, int c) {
  std::array<cplx, 2> g{};
  cplx ui = F.at(i, c);
  for (const auto& e : grad.rows[i]) {
    cplx d = F.at(e.j, c) - ui;
    g[0] += e.wx * d;
    g[1] += e.wy * d;
  }
  return g;
}

}  // namespace

PairField apply_d_a(const MetricModel& g, const AttenuationModel& a, const GradientOp& grad,
                    const CovScalarPair& W) {
  PairField out(*W.mesh);
  const int n = W.mesh->n_nodes();
  for (int i = 0; i < n; ++i) {
    Vec2 p = W.mesh->xy[i];
    auto gam = g.christoffel(p);
    Sym2 gm = g.metric(p);
    cplx av = a.value(p);
    auto dw1 = nodal_grad(grad, W, i, 0);
    auto dw2 = nodal_grad(grad, W, i, 1);
    auto dphi = nodal_grad(grad, W, i, 2);
    cplx w[2] = {W.at(i, 0), W.at(i, 1)};
    cplx phi = W.at(i, 2);
    // (d^s w)_ij = (d_i w_j + d_j w_i)/2 - Gamma^k_ij w_k
    cplx dsw11 = dw1[0] - gam[0](0, 0) * w[0] - gam[1](0, 0) * w[1];
    cplx dsw12 = 0.5 * (dw2[0] + dw1[1]) - gam[0](0, 1) * w[0] - gam[1](0, 1) * w[1];
    cplx dsw22 = dw2[1] - gam[0](1, 1) * w[0] - gam[1](1, 1) * w[1];
    out.at(i, 0) = dsw11 + av * phi * gm.a11;
    out.at(i, 1) = dsw12 + av * phi * gm.a12;
    out.at(i, 2) = dsw22 + av * phi * gm.a22;
    out.at(i, 3) = dphi[0] + av * w[0];
    out.at(i, 4) = dphi[1] + av * w[1];
  }
  return out;
}

CovScalarPair apply_delta_a(const MetricModel& g, const AttenuationModel& a,
                            const GradientOp& grad, const PairField& F) {
  CovScalarPair out(*F.mesh);
  const int n = F.mesh->n_nodes();
  for (int i = 0; i < n; ++i) {
    Vec2 p = F.mesh->xy[i];
    auto gam = g.christoffel(p);
    Sym2 gi = g.metric(p).inverse();
    cplx ab = std::conj(a.value(p));
    cplx f[2][2] = {{F.at(i, 0), F.at(i, 1)}, {F.at(i, 1), F.at(i, 2)}};
    cplx al[2] = {F.at(i, 3), F.at(i, 4)};
    std::array<cplx, 2> df[3] = {nodal_grad5(grad, F, i, 0), nodal_grad5(grad, F, i, 1),
                                 nodal_grad5(grad, F, i, 2)};
    std::array<cplx, 2> dal[2] = {nodal_grad5(grad, F, i, 3), nodal_grad5(grad, F, i, 4)};
    auto dfc = [&](int j, int k, int i2) -> cplx {  // d_j f_{k i2}
      int c = (k == 0 && i2 == 0) ? 0 : (k == 1 && i2 == 1) ? 2 : 1;
      return df[c][j];
    };
    // (div f)_i = g^{jk} (d_j f_{ki} - Gamma^l_{jk} f_{li} - Gamma^l_{ji} f_{kl})
    for (int i2 = 0; i2 < 2; ++i2) {
      cplx s = 0;
      for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k) {
          cplx t = dfc(j, k, i2);
          for (int l = 0; l < 2; ++l) t -= gam[l](j, k) * f[l][i2] + gam[l](j, i2) * f[k][l];
          s += gi(j, k) * t;
        }
      out.at(i, i2) = s - ab * al[i2];
    }
    // div alpha = g^{jk} (d_j alpha_k - Gamma^l_{jk} alpha_l)
    cplx da = 0;
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) {
        cplx t = dal[k][j];
        for (int l = 0; l < 2; ++l) t -= gam[l](j, k) * al[l];
        da += gi(j, k) * t;
      }
    cplx trf = gi.a11 * f[0][0] + 2.0 * gi.a12 * f[0][1] + gi.a22 * f[1][1];
    out.at(i, 2) = da - ab * trf;
  }
  return out;
}

cplx pair_dot(const Sym2& gi, const std::array<cplx, 5>& F, const std::array<cplx, 5>& G) {
  // <f, conj g>_g = g^{ik} g^{jl} f_ij conj(g_kl), plus <alpha, conj beta>_g
  cplx f[2][2] = {{F[0], F[1]}, {F[1], F[2]}};
  cplx h[2][2] = {{std::conj(G[0]), std::conj(G[1])}, {std::conj(G[1]), std::conj(G[2])}};
  cplx s = 0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k)
        for (int l = 0; l < 2; ++l) s += gi(i, k) * gi(j, l) * f[i][j] * h[k][l];
  cplx a[2] = {F[3], F[4]}, b[2] = {std::conj(G[3]), std::conj(G[4])};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) s += gi(i, j) * a[i] * b[j];
  return s;
}

cplx covscalar_dot(const Sym2& gi, const std::array<cplx, 3>& W, const std::array<cplx, 3>& V) {
  cplx s = 0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) s += gi(i, j) * W[i] * std::conj(V[j]);
  s += W[2] * std::conj(V[2]);
  return s;
}

namespace {

template <int NC>
cplx comp_dot(const Sym2& gi, const std::array<cplx, NC>& A, const std::array<cplx, NC>& B) {
  if constexpr (NC == 5)
    return pair_dot(gi, A, B);
  else if constexpr (NC == 3)
    return covscalar_dot(gi, A, B);
  else {
    cplx s = 0;
    for (int c = 0; c < NC; ++c) s += A[c] * std::conj(B[c]);
    return s;
  }
}

template <int NC>
std::array<cplx, NC> tri_value(const Field<NC>& A, const Tri& T, int e) {
  // edge midpoints: e=0 -> (a+b)/2, e=1 -> (b+c)/2, e=2 -> (c+a)/2
  int n0 = e == 0 ? T.a : e == 1 ? T.b : T.c;
  int n1 = e == 0 ? T.b : e == 1 ? T.c : T.a;
  std::array<cplx, NC> out;
  for (int c = 0; c < NC; ++c) out[c] = 0.5 * (A.at(n0, c) + A.at(n1, c));
  return out;
}

}  // namespace

template <int NC>
cplx inner_product_l2(const MetricModel& g, const Field<NC>& A, const Field<NC>& B,
                      Region region) {
  const DiskMesh& mesh = *A.mesh;
  cplx total = 0;
  for (int t = 0; t < mesh.n_tris(); ++t) {
    if (mesh.tri_region[t] > region) continue;
    const Tri& T = mesh.tris[t];
    double area = mesh.tri_area(t);
    Vec2 pa = mesh.xy[T.a], pb = mesh.xy[T.b], pc = mesh.xy[T.c];
    Vec2 mid[3] = {0.5 * (pa + pb), 0.5 * (pb + pc), 0.5 * (pc + pa)};
    for (int e = 0; e < 3; ++e) {
      Sym2 gm = g.metric(mid[e]);
      double w = area / 3.0 * std::sqrt(gm.det());
      total += w * comp_dot<NC>(gm.inverse(), tri_value(A, T, e), tri_value(B, T, e));
    }
  }
  return total;
}

template <int NC>
double norm_l2(const MetricModel& g, const Field<NC>& A, Region region) {
  return std::sqrt(std::max(0.0, inner_product_l2(g, A, A, region).real()));
}

template <int NC>
double norm_h1(const MetricModel& g, const Field<NC>& A, Region region) {
  const DiskMesh& mesh = *A.mesh;
  double total = inner_product_l2(g, A, A, region).real();
  for (int t = 0; t < mesh.n_tris(); ++t) {
    if (mesh.tri_region[t] > region) continue;
    const Tri& T = mesh.tris[t];
    double area = mesh.tri_area(t);
    Vec2 gb[3];
    mesh.p1_gradients(t, gb);
    int nd[3] = {T.a, T.b, T.c};
    Vec2 centroid = (1.0 / 3.0) * (mesh.xy[T.a] + mesh.xy[T.b] + mesh.xy[T.c]);
    Sym2 gm = g.metric(centroid);
    Sym2 gi = gm.inverse();
    double w = area * std::sqrt(gm.det());
    // per-component constant gradients; contract derivative index with g^{mn}
    // and component indices through the same pair product
    std::array<cplx, NC> dx{}, dy{};
    for (int k = 0; k < 3; ++k)
      for (int c = 0; c < NC; ++c) {
        dx[c] += gb[k].x * A.at(nd[k], c);
        dy[c] += gb[k].y * A.at(nd[k], c);
      }
    cplx gxx = comp_dot<NC>(gi, dx, dx), gxy = comp_dot<NC>(gi, dx, dy),
         gyx = comp_dot<NC>(gi, dy, dx), gyy = comp_dot<NC>(gi, dy, dy);
    total += w * (gi.a11 * gxx + gi.a12 * (gxy + gyx) + gi.a22 * gyy).real();
  }
  return std::sqrt(std::max(0.0, total));
}

template <int NC>
Field<NC> extend_by_zero(const Field<NC>& F, Region region) {
  Field<NC> out = F;
  for (int i = 0; i < F.mesh->n_nodes(); ++i)
    if (F.mesh->node_region[i] > region)
      for (int c = 0; c < NC; ++c) out.at(i, c) = 0;
  return out;
}

cplx eval_on_sphere(const std::array<cplx, 5>& F, Vec2 vv) {
  return F[0] * vv.x * vv.x + 2.0 * F[1] * vv.x * vv.y + F[2] * vv.y * vv.y + F[3] * vv.x +
         F[4] * vv.y;
}

template <int NC>
Field<NC> random_smooth_field(const DiskMesh& mesh, uint64_t seed, int passes, Region region) {
  Rng rng(seed);
  Field<NC> F(mesh);
  for (int i = 0; i < mesh.n_nodes(); ++i)
    for (int c = 0; c < NC; ++c) F.at(i, c) = rng.cgaussian();
  for (int p = 0; p < passes; ++p) {
    Field<NC> G(mesh);
    for (int i = 0; i < mesh.n_nodes(); ++i) {
      for (int c = 0; c < NC; ++c) {
        cplx s = F.at(i, c);
        for (int j : mesh.nbrs[i]) s += F.at(j, c);
        G.at(i, c) = s / (double)(1 + mesh.nbrs[i].size());
      }
    }
    F = std::move(G);
  }
  return extend_by_zero(F, region);
}

template cplx inner_product_l2<5>(const MetricModel&, const Field<5>&, const Field<5>&, Region);
template cplx inner_product_l2<3>(const MetricModel&, const Field<3>&, const Field<3>&, Region);
template double norm_l2<5>(const MetricModel&, const Field<5>&, Region);
template double norm_l2<3>(const MetricModel&, const Field<3>&, Region);
template double norm_h1<5>(const MetricModel&, const Field<5>&, Region);
template double norm_h1<3>(const MetricModel&, const Field<3>&, Region);
template Field<5> extend_by_zero<5>(const Field<5>&, Region);
template Field<3> extend_by_zero<3>(const Field<3>&, Region);
template Field<5> random_smooth_field<5>(const DiskMesh&, uint64_t, int, Region);
template Field<3> random_smooth_field<3>(const DiskMesh&, uint64_t, int, Region);

}  // namespace atx
