#pragma once
#include <array>
#include <vector>

#include "atx/geometry.hpp"
#include "atx/mesh.hpp"
#include "atx/types.hpp"

namespace atx {

// Complex nodal field with NC components per node, P1-interpolated.
template <int NC>
struct Field {
  const DiskMesh* mesh = nullptr;
  std::vector<cplx> v;  // node-major: v[node*NC + c]

  Field() = default;
  explicit Field(const DiskMesh& m) : mesh(&m), v((size_t)m.n_nodes() * NC, cplx{0, 0}) {}

  cplx& at(int node, int c) { return v[(size_t)node * NC + c]; }
  cplx at(int node, int c) const { return v[(size_t)node * NC + c]; }

  std::array<cplx, NC> interp(const DiskMesh::Loc& loc) const {
    std::array<cplx, NC> out{};
    const Tri& T = mesh->tris[loc.tri];
    int nd[3] = {T.a, T.b, T.c};
    for (int k = 0; k < 3; ++k)
      for (int c = 0; c < NC; ++c) out[c] += loc.b[k] * at(nd[k], c);
    return out;
  }
  // Interpolate at a point; zero outside the mesh.
  std::array<cplx, NC> interp_at(Vec2 p) const {
    DiskMesh::Loc loc;
    if (!mesh->locate(p, loc)) return {};
    return interp(loc);
  }

  void axpy(cplx alpha, const Field& other) {
    for (size_t i = 0; i < v.size(); ++i) v[i] += alpha * other.v[i];
  }
  void scale(cplx alpha) {
    for (auto& x : v) x *= alpha;
  }
};

// Pair [f, alpha]: symmetric 2-tensor (f11, f12, f22) and 1-form (a1, a2),
// covariant components throughout.
using PairField = Field<5>;
// Generator pair [w, phi]: 1-form (w1, w2) and scalar phi.
using CovScalarPair = Field<3>;

// d_a [w, phi] = [sym nabla w + a phi g, d phi + a w]
PairField apply_d_a(const MetricModel& g, const AttenuationModel& a, const GradientOp& grad,
                    const CovScalarPair& W);

// delta_a [f, alpha] = [div f - conj(a) alpha, div alpha - conj(a) tr f]
CovScalarPair apply_delta_a(const MetricModel& g, const AttenuationModel& a,
                            const GradientOp& grad, const PairField& F);

// Pointwise Hermitian pair product <F, conj G>_g (indices raised with g).
cplx pair_dot(const Sym2& gi, const std::array<cplx, 5>& F, const std::array<cplx, 5>& G);
cplx covscalar_dot(const Sym2& gi, const std::array<cplx, 3>& W, const std::array<cplx, 3>& V);

// Triangle 3-point (edge midpoint) quadrature over the submesh of `region`.
template <int NC>
cplx inner_product_l2(const MetricModel& g, const Field<NC>& A, const Field<NC>& B, Region region);
template <int NC>
double norm_l2(const MetricModel& g, const Field<NC>& A, Region region);
// L2 plus the broken P1 gradient seminorm (all indices metric-contracted).
template <int NC>
double norm_h1(const MetricModel& g, const Field<NC>& A, Region region);

// Zero all nodal values outside `region`.
template <int NC>
Field<NC> extend_by_zero(const Field<NC>& F, Region region);

// [f, alpha](x, v) = f_ij v^i v^j + alpha_i v^i for a contravariant v.
cplx eval_on_sphere(const std::array<cplx, 5>& F, Vec2 vv);

// Smooth random fields: iid complex gaussians smoothed by neighbour-averaging
// passes, restricted to `region`.
template <int NC>
Field<NC> random_smooth_field(const DiskMesh& mesh, uint64_t seed, int passes, Region region);

}  // namespace atx
