#include "atx/solenoidal.hpp"

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <algorithm>
#include <cmath>

#include "atx/rng.hpp"
#include "atx/xray.hpp"

namespace atx {

namespace {

using Trip = Eigen::Triplet<cplx>;

const std::vector<int>& loop_nodes(const DiskMesh& mesh, Region manifold) {
  switch (manifold) {
    case Region::kInner:
      return mesh.circle_inner;
    case Region::kMid:
      return mesh.circle_mid;
    default:
      return mesh.circle_outer;
  }
}

double loop_radius_of(const DiskMesh& mesh, Region manifold) {
  switch (manifold) {
    case Region::kInner:
      return mesh.domain.r_inner;
    case Region::kMid:
      return mesh.domain.r_mid;
    default:
      return mesh.domain.r_outer;
  }
}

// Same stencil as apply_d_a, in matrix form: rows are pair components
// (5 per node), columns covscalar components (3 per node).
SpMat assemble_d_a(const MetricModel& g, const AttenuationModel& a, const DiskMesh& mesh,
                   const GradientOp& grad) {
  const int n = mesh.n_nodes();
  std::vector<Trip> tr;
  tr.reserve((size_t)n * 90);
  for (int i = 0; i < n; ++i) {
    Vec2 p = mesh.xy[i];
    auto gam = g.christoffel(p);
    Sym2 gm = g.metric(p);
    cplx av = a.value(p);
    double sx = 0, sy = 0;
    for (const auto& e : grad.rows[i]) {
      sx += e.wx;
      sy += e.wy;
    }
    auto add = [&](int c, int node, int comp, cplx val) {
      if (val != cplx{0, 0}) tr.emplace_back(5 * i + c, 3 * node + comp, val);
    };
    for (const auto& e : grad.rows[i]) {
      add(0, e.j, 0, e.wx);
      add(1, e.j, 1, 0.5 * e.wx);
      add(1, e.j, 0, 0.5 * e.wy);
      add(2, e.j, 1, e.wy);
      add(3, e.j, 2, e.wx);
      add(4, e.j, 2, e.wy);
    }
    add(0, i, 0, -sx - gam[0](0, 0));
    add(0, i, 1, -gam[1](0, 0));
    add(0, i, 2, av * gm.a11);
    add(1, i, 0, -0.5 * sy - gam[0](0, 1));
    add(1, i, 1, -0.5 * sx - gam[1](0, 1));
    add(1, i, 2, av * gm.a12);
    add(2, i, 0, -gam[0](1, 1));
    add(2, i, 1, -sy - gam[1](1, 1));
    add(2, i, 2, av * gm.a22);
    add(3, i, 2, -sx);
    add(3, i, 0, av);
    add(4, i, 2, -sy);
    add(4, i, 1, av);
  }
  SpMat D(5 * n, 3 * n);
  D.setFromTriplets(tr.begin(), tr.end());
  D.makeCompressed();
  return D;
}

// Same quadrature as inner_product_l2: edge midpoints, metric and fiber
// product evaluated there.
template <int NC>
SpMat assemble_gram(const MetricModel& g, const DiskMesh& mesh, Region region) {
  const int n = mesh.n_nodes();
  std::vector<Trip> tr;
  std::array<cplx, NC> unit[NC];
  for (int c = 0; c < NC; ++c) {
    unit[c] = {};
    unit[c][c] = 1;
  }
  for (int t = 0; t < mesh.n_tris(); ++t) {
    if (mesh.tri_region[t] > region) continue;
    const Tri& T = mesh.tris[t];
    double area = mesh.tri_area(t);
    int nd[3] = {T.a, T.b, T.c};
    Vec2 pa = mesh.xy[T.a], pb = mesh.xy[T.b], pc = mesh.xy[T.c];
    Vec2 mid[3] = {0.5 * (pa + pb), 0.5 * (pb + pc), 0.5 * (pc + pa)};
    for (int e = 0; e < 3; ++e) {
      Sym2 gm = g.metric(mid[e]);
      Sym2 gi = gm.inverse();
      double w = area / 3.0 * std::sqrt(gm.det());
      double B[NC][NC];
      for (int c = 0; c < NC; ++c)
        for (int c2 = 0; c2 < NC; ++c2) {
          if constexpr (NC == 5)
            B[c][c2] = pair_dot(gi, unit[c2], unit[c]).real();
          else
            B[c][c2] = covscalar_dot(gi, unit[c2], unit[c]).real();
        }
      int p0 = nd[e], p1 = nd[(e + 1) % 3];
      for (int pi : {p0, p1})
        for (int qi : {p0, p1})
          for (int c = 0; c < NC; ++c)
            for (int c2 = 0; c2 < NC; ++c2)
              if (B[c][c2] != 0)
                tr.emplace_back(NC * pi + c, NC * qi + c2, cplx{0.25 * w * B[c][c2], 0});
    }
  }
  SpMat M(NC * n, NC * n);
  M.setFromTriplets(tr.begin(), tr.end());
  M.makeCompressed();
  return M;
}

// P1 element assembly of the stiffness (d_a W, d_a V) and of the load map
// f -> (interp f, d_a V), edge-midpoint quadrature. Element-wise derivatives
// make the pair adjoint-consistent: solving with them converges at second
// order where the nodal-stencil Galerkin matrix does not.
void assemble_fem(const MetricModel& g, const AttenuationModel& a, const DiskMesh& mesh,
                  Region region, SpMat& Kf_full, SpMat& Lf) {
  const int n = mesh.n_nodes();
  std::vector<Trip> ktr, ltr;
  using Mat9 = Eigen::Matrix<cplx, 9, 9>;
  using Mat59 = Eigen::Matrix<cplx, 5, 9>;
  using Mat515 = Eigen::Matrix<cplx, 5, 15>;
  using Mat915 = Eigen::Matrix<cplx, 9, 15>;
  for (int t = 0; t < mesh.n_tris(); ++t) {
    if (mesh.tri_region[t] > region) continue;
    const Tri& T = mesh.tris[t];
    int nd[3] = {T.a, T.b, T.c};
    Vec2 p[3] = {mesh.xy[T.a], mesh.xy[T.b], mesh.xy[T.c]};
    double area = mesh.tri_area(t);
    double a2 = 2.0 * area;
    // gradients of the hat functions (CCW triangles)
    Vec2 gb[3] = {{(p[1].y - p[2].y) / a2, (p[2].x - p[1].x) / a2},
                  {(p[2].y - p[0].y) / a2, (p[0].x - p[2].x) / a2},
                  {(p[0].y - p[1].y) / a2, (p[1].x - p[0].x) / a2}};
    Mat9 kloc = Mat9::Zero();
    Mat915 lloc = Mat915::Zero();
    for (int e = 0; e < 3; ++e) {
      Vec2 m = 0.5 * (p[e] + p[(e + 1) % 3]);
      double lam[3] = {0, 0, 0};
      lam[e] = 0.5;
      lam[(e + 1) % 3] = 0.5;
      Sym2 gm = g.metric(m);
      Sym2 gi = gm.inverse();
      auto gam = g.christoffel(m);
      cplx av = a.value(m);
      double w = area / 3.0 * std::sqrt(gm.det());
      Mat59 dloc = Mat59::Zero();
      Mat515 eloc = Mat515::Zero();
      for (int k = 0; k < 3; ++k) {
        double wx = gb[k].x, wy = gb[k].y, l = lam[k];
        dloc(0, 3 * k + 0) = wx - gam[0](0, 0) * l;
        dloc(0, 3 * k + 1) = -gam[1](0, 0) * l;
        dloc(0, 3 * k + 2) = av * gm.a11 * l;
        dloc(1, 3 * k + 0) = 0.5 * wy - gam[0](0, 1) * l;
        dloc(1, 3 * k + 1) = 0.5 * wx - gam[1](0, 1) * l;
        dloc(1, 3 * k + 2) = av * gm.a12 * l;
        dloc(2, 3 * k + 0) = -gam[0](1, 1) * l;
        dloc(2, 3 * k + 1) = wy - gam[1](1, 1) * l;
        dloc(2, 3 * k + 2) = av * gm.a22 * l;
        dloc(3, 3 * k + 2) = wx;
        dloc(3, 3 * k + 0) = av * l;
        dloc(4, 3 * k + 2) = wy;
        dloc(4, 3 * k + 1) = av * l;
        for (int c = 0; c < 5; ++c) eloc(c, 5 * k + c) = l;
      }
      // fiber Gram of pair components at the quadrature point
      Eigen::Matrix<cplx, 5, 5> B;
      std::array<cplx, 5> unit[5];
      for (int c = 0; c < 5; ++c) {
        unit[c] = {};
        unit[c][c] = 1;
      }
      for (int c = 0; c < 5; ++c)
        for (int c2 = 0; c2 < 5; ++c2) B(c, c2) = w * pair_dot(gi, unit[c2], unit[c]).real();
      kloc += dloc.adjoint() * B * dloc;
      lloc += dloc.adjoint() * B * eloc;
    }
    for (int r = 0; r < 9; ++r)
      for (int c = 0; c < 9; ++c)
        if (kloc(r, c) != cplx{0, 0})
          ktr.emplace_back(3 * nd[r / 3] + r % 3, 3 * nd[c / 3] + c % 3, kloc(r, c));
    for (int r = 0; r < 9; ++r)
      for (int c = 0; c < 15; ++c)
        if (lloc(r, c) != cplx{0, 0})
          ltr.emplace_back(3 * nd[r / 3] + r % 3, 5 * nd[c / 5] + c % 5, lloc(r, c));
  }
  Kf_full.resize(3 * n, 3 * n);
  Kf_full.setFromTriplets(ktr.begin(), ktr.end());
  Kf_full.makeCompressed();
  Lf.resize(3 * n, 5 * n);
  Lf.setFromTriplets(ltr.begin(), ltr.end());
  Lf.makeCompressed();
}

Eigen::VectorXcd pack3(const CovScalarPair& W) {
  const int n = W.mesh->n_nodes();
  Eigen::VectorXcd v(3 * n);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) v(3 * i + c) = W.at(i, c);
  return v;
}

Eigen::VectorXcd pack5(const PairField& F) {
  const int n = F.mesh->n_nodes();
  Eigen::VectorXcd v(5 * n);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 5; ++c) v(5 * i + c) = F.at(i, c);
  return v;
}

Eigen::VectorXcd gather_unknowns(const EllipticSystem& sys, const Eigen::VectorXcd& full) {
  Eigen::VectorXcd v(sys.n_unknowns());
  for (size_t u = 0; u < sys.node_of_unknown.size(); ++u)
    for (int c = 0; c < 3; ++c) v(3 * u + c) = full(3 * sys.node_of_unknown[u] + c);
  return v;
}

// Angular position and interpolation along an ordered boundary loop of
// uniformly spaced ring nodes.
struct LoopInterp {
  const DiskMesh* mesh;
  const std::vector<int>* loop;
  double offset;
  explicit LoopInterp(const DiskMesh& m, const std::vector<int>& l) : mesh(&m), loop(&l) {
    Vec2 p0 = m.xy[l[0]];
    offset = std::atan2(p0.y, p0.x);
  }
  // value at angle theta from nodal values indexed by loop position
  std::array<cplx, 3> eval(double theta, const std::vector<std::array<cplx, 3>>& vals) const {
    int cnt = (int)loop->size();
    double d = std::fmod(theta - offset, 2.0 * M_PI);
    if (d < 0) d += 2.0 * M_PI;
    double s = d * cnt / (2.0 * M_PI);
    int k = (int)std::floor(s);
    double f = s - k;
    k %= cnt;
    int k1 = (k + 1) % cnt;
    std::array<cplx, 3> out;
    for (int c = 0; c < 3; ++c) out[c] = (1.0 - f) * vals[k][c] + f * vals[k1][c];
    return out;
  }
};

}  // namespace

EllipticSystem build_elliptic_system(const MetricModel& g, const AttenuationModel& a,
                                     const DiskMesh& mesh, const GradientOp& grad,
                                     Region manifold, bool force_iterative) {
  EllipticSystem sys;
  sys.mesh = &mesh;
  sys.g = g;
  sys.a = a;
  sys.manifold = manifold;
  sys.loop_radius = loop_radius_of(mesh, manifold);
  const int n = mesh.n_nodes();

  std::vector<char> on_loop(n, 0);
  for (int i : loop_nodes(mesh, manifold)) on_loop[i] = 1;
  sys.unknown_of_node.assign(n, -1);
  for (int i = 0; i < n; ++i) {
    if (mesh.node_region[i] > (int8_t)manifold || on_loop[i]) continue;
    sys.unknown_of_node[i] = (int)sys.node_of_unknown.size();
    sys.node_of_unknown.push_back(i);
  }

  sys.D = assemble_d_a(g, a, mesh, grad);
  sys.M = assemble_gram<5>(g, mesh, manifold);
  sys.Mc = assemble_gram<3>(g, mesh, manifold);
  sys.DtM = (sys.D.adjoint() * sys.M).pruned();

  const int nu = (int)sys.node_of_unknown.size();
  SpMat P(3 * n, 3 * nu);
  {
    std::vector<Trip> tr;
    tr.reserve(3 * nu);
    for (int u = 0; u < nu; ++u)
      for (int c = 0; c < 3; ++c) tr.emplace_back(3 * sys.node_of_unknown[u] + c, 3 * u + c, 1.0);
    P.setFromTriplets(tr.begin(), tr.end());
  }
  SpMat Dint = (sys.D * P).pruned();
  sys.K = (Dint.adjoint() * (sys.M * Dint).eval()).pruned();
  sys.K.makeCompressed();
  SpMat McInt = (P.adjoint() * (sys.Mc * P).eval()).pruned();

  assemble_fem(g, a, mesh, manifold, sys.Kf_full, sys.Lf);
  sys.Kf = (P.adjoint() * (sys.Kf_full * P).eval()).pruned();
  sys.Kf.makeCompressed();

  sys.direct = !force_iterative && 3 * nu <= 200000;
  if (sys.direct) {
    sys.kfact = std::make_shared<Eigen::SimplicialLDLT<SpMat>>();
    sys.kfact->compute(sys.K);
    if (sys.kfact->info() != Eigen::Success)
      throw NumericalError("stiffness factorization failed");
    sys.kffact = std::make_shared<Eigen::SimplicialLDLT<SpMat>>();
    sys.kffact->compute(sys.Kf);
    if (sys.kffact->info() != Eigen::Success)
      throw NumericalError("stiffness factorization failed");
  }
  sys.mfact = std::make_shared<Eigen::SimplicialLDLT<SpMat>>();
  sys.mfact->compute(McInt);
  if (sys.mfact->info() != Eigen::Success) throw NumericalError("mass factorization failed");
  return sys;
}

Eigen::VectorXcd weak_load_pair(const EllipticSystem& sys, const PairField& F) {
  return sys.Lf * pack5(F);
}

Eigen::VectorXcd weak_load_covscalar(const EllipticSystem& sys, const CovScalarPair& rho) {
  return sys.Mc * pack3(rho);
}

namespace {

// interior Dirichlet solve against one of the two stiffness frames
Eigen::VectorXcd solve_interior(const EllipticSystem& sys, const SpMat& K,
                                const Eigen::SimplicialLDLT<SpMat>* fact,
                                const Eigen::VectorXcd& bi, double* rel_residual) {
  double bnorm = bi.norm();
  Eigen::VectorXcd wi = Eigen::VectorXcd::Zero(sys.n_unknowns());
  double res = 0;
  if (bnorm > 0) {
    if (sys.direct) {
      wi = fact->solve(bi);
    } else {
      Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper> cg;
      cg.setTolerance(1e-10);
      cg.setMaxIterations(std::max<Eigen::Index>(2000, 4 * sys.n_unknowns()));
      cg.compute(K);
      wi = cg.solve(bi);
    }
    res = (K * wi - bi).norm() / bnorm;
    if (!(res <= 1e-8))
      throw NumericalError("elliptic solve did not converge: relative residual " +
                           std::to_string(res));
  }
  if (rel_residual) *rel_residual = res;
  return wi;
}

}  // namespace

CovScalarPair elliptic_solve(const EllipticSystem& sys, const Eigen::VectorXcd& load,
                             const CovScalarPair* boundary, double* rel_residual) {
  const DiskMesh& mesh = *sys.mesh;
  const int n = mesh.n_nodes();
  if (load.size() != 3 * n) throw ConfigError("elliptic load has the wrong size");

  Eigen::VectorXcd wlift = Eigen::VectorXcd::Zero(3 * n);
  if (boundary) {
    const auto& loop = loop_nodes(mesh, sys.manifold);
    std::vector<std::array<cplx, 3>> vals(loop.size());
    for (size_t k = 0; k < loop.size(); ++k)
      for (int c = 0; c < 3; ++c) vals[k][c] = boundary->at(loop[k], c);
    for (size_t k = 0; k < loop.size(); ++k)
      for (int c = 0; c < 3; ++c) wlift(3 * loop[k] + c) = vals[k][c];
    // smooth angular extension in a thin outside collar keeps the lifted
    // field continuous where interior gradient stencils can reach
    LoopInterp li(mesh, loop);
    double rmax = sys.loop_radius + 3.5 * mesh.target_h;
    for (int i = 0; i < n; ++i) {
      double r = norm(mesh.xy[i]);
      if (r <= sys.loop_radius * (1 + 1e-12) || r > rmax) continue;
      auto v = li.eval(std::atan2(mesh.xy[i].y, mesh.xy[i].x), vals);
      for (int c = 0; c < 3; ++c) wlift(3 * i + c) = v[c];
    }
  }

  Eigen::VectorXcd b = load;
  if (boundary) b -= sys.Kf_full * wlift;
  Eigen::VectorXcd bi = gather_unknowns(sys, b);
  Eigen::VectorXcd wi = solve_interior(sys, sys.Kf, sys.kffact.get(), bi, rel_residual);

  CovScalarPair out(mesh);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) out.at(i, c) = wlift(3 * i + c);
  for (size_t u = 0; u < sys.node_of_unknown.size(); ++u)
    for (int c = 0; c < 3; ++c) out.at(sys.node_of_unknown[u], c) = wi(3 * u + c);
  return out;
}

DecompositionResult project(const EllipticSystem& sys, const PairField& F) {
  const DiskMesh& mesh = *sys.mesh;
  Eigen::VectorXcd bi = gather_unknowns(sys, sys.DtM * pack5(F));
  double solres = 0;
  Eigen::VectorXcd wi = solve_interior(sys, sys.K, sys.kfact.get(), bi, &solres);
  CovScalarPair W(mesh);
  for (size_t u = 0; u < sys.node_of_unknown.size(); ++u)
    for (int c = 0; c < 3; ++c) W.at(sys.node_of_unknown[u], c) = wi(3 * u + c);
  Eigen::VectorXcd p = sys.D * pack3(W);
  const int n = sys.mesh->n_nodes();
  DecompositionResult R{PairField(*sys.mesh), PairField(*sys.mesh), std::move(W)};
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 5; ++c) {
      R.potential.at(i, c) = p(5 * i + c);
      R.solenoidal.at(i, c) = F.at(i, c) - R.potential.at(i, c);
    }
  R.solver_residual = solres;
  double nf = norm_l2(sys.g, F, sys.manifold);
  R.weak_residual_rel =
      nf > 0 ? weak_divergence_dual_norm(sys, R.solenoidal) / nf : 0.0;
  return R;
}

namespace {

PairField unpack5(const DiskMesh& mesh, const Eigen::VectorXcd& v) {
  PairField out(mesh);
  for (int i = 0; i < mesh.n_nodes(); ++i)
    for (int c = 0; c < 5; ++c) out.at(i, c) = v(5 * i + c);
  return out;
}

Eigen::VectorXcd scatter_unknowns(const EllipticSystem& sys, const Eigen::VectorXcd& wi) {
  Eigen::VectorXcd full = Eigen::VectorXcd::Zero(3 * sys.mesh->n_nodes());
  for (size_t u = 0; u < sys.node_of_unknown.size(); ++u)
    for (int c = 0; c < 3; ++c) full(3 * sys.node_of_unknown[u] + c) = wi(3 * u + c);
  return full;
}

}  // namespace

PairField project_solenoidal(const EllipticSystem& sys, const PairField& F) {
  Eigen::VectorXcd bi = gather_unknowns(sys, sys.DtM * pack5(F));
  Eigen::VectorXcd wi = solve_interior(sys, sys.K, sys.kfact.get(), bi, nullptr);
  return unpack5(*sys.mesh, pack5(F) - sys.D * scatter_unknowns(sys, wi));
}

PairField project_solenoidal_adjoint(const EllipticSystem& sys, const PairField& F) {
  Eigen::VectorXcd bi = gather_unknowns(sys, sys.D.adjoint() * pack5(F));
  Eigen::VectorXcd wi = solve_interior(sys, sys.K, sys.kfact.get(), bi, nullptr);
  return unpack5(*sys.mesh, pack5(F) - sys.DtM.adjoint() * scatter_unknowns(sys, wi));
}

double weak_divergence_dual_norm(const EllipticSystem& sys, const PairField& F) {
  Eigen::VectorXcd r = gather_unknowns(sys, sys.DtM * pack5(F));
  Eigen::VectorXcd z = sys.mfact->solve(r);
  return std::sqrt(std::max(0.0, r.dot(z).real()));
}

TraceRecovery boundary_trace_recover(const MetricModel& g, const AttenuationModel& a,
                                     const DiskMesh& mesh, const PairField& G, int n_rays,
                                     uint64_t seed, double dt) {
  if (n_rays < 6) throw ConfigError("trace recovery needs at least 6 rays per node");
  const auto& loop = mesh.circle_inner;
  const int L = (int)loop.size();
  const double r_in = mesh.domain.r_inner;
  const double r_mid = mesh.domain.r_mid;
  TraceRecovery R;
  R.trace = CovScalarPair(mesh);
  R.n_rays = n_rays;
  std::vector<std::array<cplx, 3>> vals(L, std::array<cplx, 3>{});
  std::vector<char> ok(L, 0);

  Rng base(seed);
  for (int k = 0; k < L; ++k) {
    int node = loop[k];
    Vec2 x = mesh.xy[node];
    Vec2 nout = (1.0 / norm(x)) * x;
    Vec2 tv = perp(nout);
    Rng rng = base.fork((uint64_t)k);
    Eigen::Matrix3d AtA = Eigen::Matrix3d::Zero();
    Eigen::Vector3cd Aty = Eigen::Vector3cd::Zero();
    int m = 0;
    for (int tries = 0; tries < 8 * n_rays && m < n_rays; ++tries) {
      double psi = rng.uniform(-M_PI / 2 + 0.02, M_PI / 2 - 0.02);
      Vec2 v = g.gnormalize(x, std::cos(psi) * nout + std::sin(psi) * tv);
      bool dipped = false;
      cplx s = 0;
      walk_ray(g, a, mesh, x, v, r_mid, dt, [&](const RaySample& rs) {
        if (dot(rs.x, rs.x) < r_in * r_in * (1 - 1e-9)) dipped = true;
        if (rs.loc.tri >= 0) s += rs.w * rs.expA * eval_on_sphere(G.interp(rs.loc), rs.v);
      });
      if (dipped) continue;
      // transported value at the node: w_1 v^1 + w_2 v^2 + phi
      Eigen::Vector3d row(v.x, v.y, 1.0);
      AtA += row * row.transpose();
      Aty += row * s;
      ++m;
    }
    if (m >= 6) {
      Eigen::Vector3cd sol = AtA.ldlt().solve(Aty);
      vals[k] = {sol(0), sol(1), sol(2)};
      ok[k] = 1;
    } else {
      R.flagged.push_back(k);
    }
  }

  // fill flagged positions from the nearest recovered neighbors along the loop
  if (!R.flagged.empty() && (int)R.flagged.size() < L) {
    for (int k : R.flagged) {
      int prev = k, next = k;
      for (int s = 1; s < L; ++s)
        if (ok[(k - s % L + L) % L]) {
          prev = (k - s % L + L) % L;
          break;
        }
      for (int s = 1; s < L; ++s)
        if (ok[(k + s) % L]) {
          next = (k + s) % L;
          break;
        }
      int dp = (k - prev + L) % L, dn = (next - k + L) % L;
      double f = dp + dn > 0 ? (double)dp / (dp + dn) : 0.5;
      for (int c = 0; c < 3; ++c) vals[k][c] = (1.0 - f) * vals[prev][c] + f * vals[next][c];
    }
  }
  for (int k = 0; k < L; ++k)
    for (int c = 0; c < 3; ++c) R.trace.at(loop[k], c) = vals[k][c];
  return R;
}

}  // namespace atx
