#include "atx/recon.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "atx/parallel.hpp"
#include "atx/rng.hpp"
#include "atx/xray.hpp"

namespace atx {

namespace {

double l2sq(const PairField& F) {
  double s = 0;
  for (const cplx& z : F.v) s += std::norm(z);
  return s;
}

PairField normalized_sample(const DiskMesh& mesh, const MetricModel& g, uint64_t seed) {
  PairField F = random_smooth_field<5>(mesh, seed, 2, Region::kInner);
  double n = norm_l2<5>(g, F, Region::kInner);
  F.scale({1.0 / n, 0});
  return F;
}

}  // namespace

ForwardOperator::ForwardOperator(const MetricModel& g, const AttenuationModel& a,
                                 const DiskMesh& mesh, const FanBeamGrid& grid, double dt)
    : mesh_(&mesh), grid_(grid) {
  const int nr = grid_.size();
  std::vector<std::vector<Sample>> per_ray(nr);
  mu_.resize(nr);
  parallel_for(grid_.n_beta, [&](int64_t lo, int64_t hi) {
    for (int64_t i = lo; i < hi; ++i)
      for (int j = 0; j < grid_.n_theta; ++j) {
        const int r = grid_.index((int)i, j);
        mu_[r] = grid_.mu_weight(g, (int)i, j);
        Vec2 x, v;
        grid_.ray(g, (int)i, j, x, v);
        auto& vec = per_ray[r];
        walk_ray(g, a, mesh, x, v, grid_.radius, dt, [&](const RaySample& s) {
          if (s.loc.tri < 0) return;
          vec.push_back({s.loc.tri, {s.loc.b[0], s.loc.b[1], s.loc.b[2]}, s.w * s.expA, s.v});
        });
      }
  });
  offset_.resize(nr + 1);
  offset_[0] = 0;
  for (int r = 0; r < nr; ++r) offset_[r + 1] = offset_[r] + per_ray[r].size();
  samples_.resize(offset_[nr]);
  for (int r = 0; r < nr; ++r)
    std::copy(per_ray[r].begin(), per_ray[r].end(), samples_.begin() + offset_[r]);
}

FanBeamData ForwardOperator::apply(const PairField& F) const {
  FanBeamData out(grid_);
  parallel_for(grid_.size(), [&](int64_t lo, int64_t hi) {
    for (int64_t r = lo; r < hi; ++r) {
      cplx sum{0, 0};
      for (size_t k = offset_[r]; k < offset_[r + 1]; ++k) {
        const Sample& s = samples_[k];
        const Tri& T = mesh_->tris[s.tri];
        const int nd[3] = {T.a, T.b, T.c};
        std::array<cplx, 5> c{};
        for (int m = 0; m < 3; ++m)
          for (int q = 0; q < 5; ++q) c[q] += s.b[m] * F.at(nd[m], q);
        sum += s.wE * eval_on_sphere(c, s.v);
      }
      out.values[r] = sum;
    }
  });
  return out;
}

PairField ForwardOperator::apply_transpose(const FanBeamData& d) const {
  PairField out(*mesh_);
  for (int r = 0; r < grid_.size(); ++r) {
    const cplx dr = mu_[r] * d.values[r];
    if (dr == cplx{0, 0}) continue;
    for (size_t k = offset_[r]; k < offset_[r + 1]; ++k) {
      const Sample& s = samples_[k];
      const cplx c = std::conj(s.wE) * dr;
      const double cw[5] = {s.v.x * s.v.x, 2.0 * s.v.x * s.v.y, s.v.y * s.v.y, s.v.x, s.v.y};
      const Tri& T = mesh_->tris[s.tri];
      const int nd[3] = {T.a, T.b, T.c};
      for (int m = 0; m < 3; ++m) {
        const cplx cb = s.b[m] * c;
        for (int q = 0; q < 5; ++q) out.at(nd[m], q) += cb * cw[q];
      }
    }
  }
  return out;
}

ReconOutput reconstruct_solenoidal(const EllipticSystem& sys, const ForwardOperator& op,
                                   const FanBeamData& data, const ReconOptions& opt,
                                   const PairField* truth) {
  if (data.values.size() != (size_t)op.grid().size())
    throw ConfigError("data does not match the operator's fan-beam grid");
  const DiskMesh& mesh = op.mesh();
  const MetricModel& g = sys.g;
  const int nr = op.grid().size();

  auto mu_norm = [&](const FanBeamData& u) {
    double s = 0;
    for (int r = 0; r < nr; ++r) s += op.mu_weight(r) * std::norm(u.values[r]);
    return std::sqrt(s);
  };

  FanBeamData b = data;
  ReconOutput out{{}, PairField(mesh)};
  out.report.noise_level = opt.noise;
  if (opt.noise > 0) {
    Rng rng(opt.seed);
    FanBeamData eta(op.grid());
    for (auto& z : eta.values) z = rng.cgaussian();
    double ne = mu_norm(eta);
    if (ne > 0) b.axpy({opt.noise * mu_norm(b) / ne, 0}, eta);
  }

  // CGLS on the gauge-projected forward map A o S: the unprojected map is
  // near-singular across the whole gauge subspace (ray sums of d_a W fields
  // range from roundoff for smooth W to order one for rough W), which stalls
  // plain CGLS; restricted to the solenoidal subspace the singular values
  // are bounded below by the discrete stability constant.
  auto apply_s = [&](const PairField& y) { return op.apply(project_solenoidal(sys, y)); };
  auto transpose_s = [&](const FanBeamData& d) {
    return project_solenoidal_adjoint(sys, op.apply_transpose(d));
  };

  PairField x(mesh);
  FanBeamData r = b;
  PairField s = transpose_s(r);
  PairField p = s;
  double gamma = l2sq(s);
  const double gamma0 = gamma;
  out.report.residual_history.push_back(mu_norm(r));

  if (gamma0 > 0) {
    for (int it = 0; it < opt.max_iter; ++it) {
      FanBeamData q = apply_s(p);
      double delta = 0;
      for (int k = 0; k < nr; ++k) delta += op.mu_weight(k) * std::norm(q.values[k]);
      if (delta == 0) break;
      const double alpha = gamma / delta;
      x.axpy({alpha, 0}, p);
      r.axpy({-alpha, 0}, q);

      const double res = mu_norm(r);
      const double prev = out.report.residual_history.back();
      out.report.residual_history.push_back(res);
      out.report.iterations = it + 1;
      if (res > 10.0 * out.report.residual_history.front())
        throw NumericalError("least-squares iteration diverged: transpose mismatch");
      if (res > prev * (1.0 + 1e-10))
        throw NumericalError("least-squares residual increased");

      s = transpose_s(r);
      const double gnew = l2sq(s);
      out.report.normal_residual_rel = std::sqrt(gnew / gamma0);
      if (std::sqrt(gnew) <= opt.tol * std::sqrt(gamma0)) break;
      p.scale({gnew / gamma, 0});
      p.axpy({1, 0}, s);
      gamma = gnew;
    }
  }

  DecompositionResult dec = project(sys, x);
  out.recovered = dec.solenoidal;
  double nrec = norm_l2<5>(g, out.recovered, sys.manifold);
  if (nrec > 0)
    out.report.divfree_dual_rel = weak_divergence_dual_norm(sys, out.recovered) / nrec;
  if (truth) {
    PairField st = project(sys, *truth).solenoidal;
    PairField diff = out.recovered;
    diff.axpy({-1, 0}, st);
    out.report.rel_error =
        norm_l2<5>(g, diff, sys.manifold) / norm_l2<5>(g, st, sys.manifold);
  }
  return out;
}

StabilityStats stability_ratio_experiment(const EllipticSystem& sys, int n_samples,
                                          uint64_t seed, int n_dir, double dt) {
  const DiskMesh& mesh = *sys.mesh;
  const MetricModel& g = sys.g;
  std::vector<PairField> fields;
  fields.reserve(n_samples);
  for (int k = 0; k < n_samples; ++k)
    fields.push_back(random_smooth_field<5>(mesh, seed + (uint64_t)k, 2, Region::kInner));
  std::vector<const PairField*> ptrs;
  for (auto& f : fields) ptrs.push_back(&f);
  std::vector<PairField> NF =
      normal_apply_direct_batch(sys.g, sys.a, ptrs, mesh, Region::kOuter, n_dir, dt);

  StabilityStats st;
  for (int k = 0; k < n_samples; ++k) {
    double ns = norm_l2<5>(g, project(sys, fields[k]).solenoidal, Region::kInner);
    if (ns < 1e-8) {
      ++st.rejected;
      continue;
    }
    st.ratios.push_back(ns / norm_h1<5>(g, NF[k], Region::kOuter));
  }
  if (!st.ratios.empty()) {
    auto [mn, mx] = std::minmax_element(st.ratios.begin(), st.ratios.end());
    st.min_ratio = *mn;
    st.max_ratio = *mx;
    st.spread = *mx / *mn;
  }
  return st;
}

namespace {

// max over a 64x64 probe grid of all central finite-difference derivatives
// d^i/dx^i d^j/dy^j with i + j <= 3
double c3_proxy(const std::function<double(Vec2)>& f) {
  const int n = 64;
  const double lo = -1.2, hs = 2.4 / (n - 1);
  std::vector<double> val((size_t)n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      val[(size_t)i * n + j] = f({lo + i * hs, lo + j * hs});

  // stencils on offsets -2..2 for derivative orders 0..3
  const double st[4][5] = {{0, 0, 1, 0, 0},
                           {0, -0.5, 0, 0.5, 0},
                           {0, 1, -2, 1, 0},
                           {-0.5, 1, 0, -1, 0.5}};
  double m = 0;
  for (int i = 2; i < n - 2; ++i)
    for (int j = 2; j < n - 2; ++j)
      for (int oi = 0; oi <= 3; ++oi)
        for (int oj = 0; oi + oj <= 3; ++oj) {
          double s = 0;
          for (int u = -2; u <= 2; ++u)
            for (int w = -2; w <= 2; ++w)
              s += st[oi][u + 2] * st[oj][w + 2] * val[(size_t)(i + u) * n + (j + w)];
          m = std::max(m, std::abs(s) / std::pow(hs, oi + oj));
        }
  return m;
}

// Krylov estimate of the smallest singular value of S_a N_a on the discrete
// solenoidal subspace, in the L2(M) geometry: 20 Lanczos steps with full
// reorthogonalization build an M-orthonormal basis, and the floor is the
// smallest Ritz singular value sqrt(lambda_min) of the M-Gram of the operator
// images (nonnegative by construction; no operator adjoint needed, which the
// direct kernel does not provide). The quadrature is pinned coarse so the
// estimate stays cheap; it is a comparative diagnostic across models.
double solenoidal_floor(const EllipticSystem& sys, uint64_t seed) {
  const int kDirs = 64;
  const double kDt = 1.0 / 32;
  const DiskMesh& mesh = *sys.mesh;
  const int nv = 5 * mesh.n_nodes();
  auto pack = [&](const PairField& F) {
    return Eigen::Map<const Eigen::VectorXcd>(F.v.data(), nv).eval();
  };
  auto unpack = [&](const Eigen::VectorXcd& v) {
    PairField F(mesh);
    Eigen::Map<Eigen::VectorXcd>(F.v.data(), nv) = v;
    return F;
  };
  auto dotM = [&](const Eigen::VectorXcd& u, const Eigen::VectorXcd& w) -> cplx {
    return u.dot(sys.M * w);  // Eigen dot conjugates the left argument
  };
  auto apply_op = [&](const Eigen::VectorXcd& v) {
    PairField NF =
        normal_apply_direct(sys.g, sys.a, unpack(v), mesh, sys.manifold, kDirs, kDt);
    return pack(project_solenoidal(sys, NF));
  };

  Eigen::VectorXcd q =
      pack(project_solenoidal(sys, random_smooth_field<5>(mesh, seed, 2, Region::kInner)));
  q /= std::sqrt(dotM(q, q).real());
  const int steps = 20;
  std::vector<Eigen::VectorXcd> basis{q};
  std::vector<Eigen::VectorXcd> image;
  for (int k = 0; k < steps; ++k) {
    Eigen::VectorXcd w = apply_op(basis[k]);
    image.push_back(w);
    if (k + 1 == steps) break;
    for (int pass = 0; pass < 2; ++pass)  // full reorthogonalization
      for (const auto& b : basis) w -= dotM(b, w) * b;
    double nb = std::sqrt(dotM(w, w).real());
    if (nb < 1e-13) break;
    basis.push_back(w / nb);
  }
  const int m = (int)image.size();
  Eigen::MatrixXcd G(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) G(i, j) = dotM(image[i], image[j]);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(G);
  return std::sqrt(std::max(es.eigenvalues()(0), 0.0));
}

}  // namespace

PerturbationReport perturbation_study(const MetricModel& g, const AttenuationModel& a,
                                      const GaussBump& dg_dir, const ComplexBump& da_dir,
                                      const std::vector<double>& eps_list, const DiskMesh& mesh,
                                      const GradientOp& grad, int n_dir, double dt,
                                      uint64_t seed) {
  if (g.conformal_extra.amplitude != 0)
    throw ConfigError("base metric already uses the conformal perturbation hook");

  PerturbationReport rep;
  rep.eps = eps_list;
  rep.c3_unit = std::max(
      {c3_proxy([&](Vec2 p) { return dg_dir.value(p); }),
       c3_proxy([&](Vec2 p) { return (da_dir.scale * da_dir.shape.value(p)).real(); }),
       c3_proxy([&](Vec2 p) { return (da_dir.scale * da_dir.shape.value(p)).imag(); })});
  if (rep.c3_unit <= 0) throw ConfigError("perturbation direction is identically zero");

  const int batch = 20;
  std::vector<PairField> F;
  std::vector<const PairField*> ptrs;
  F.reserve(batch);
  for (int i = 0; i < batch; ++i) F.push_back(normalized_sample(mesh, g, seed + 100 + i));
  for (auto& f : F) ptrs.push_back(&f);

  EllipticSystem sys0 = build_elliptic_system(g, a, mesh, grad, Region::kInner);
  std::vector<PairField> NF0 =
      normal_apply_direct_batch(g, a, ptrs, mesh, Region::kOuter, n_dir, dt);
  std::vector<PairField> S0;
  S0.reserve(batch);
  for (int i = 0; i < batch; ++i) S0.push_back(project(sys0, F[i]).solenoidal);
  rep.sv_floor.push_back(solenoidal_floor(sys0, seed));

  for (double eps : eps_list) {
    const double t = eps / rep.c3_unit;
    MetricModel ge = g;
    ge.conformal_extra = dg_dir;
    ge.conformal_extra.amplitude = t * dg_dir.amplitude;
    AttenuationModel ae = a;
    ae.bumps.push_back({da_dir.shape, t * da_dir.scale});

    SimplicityReport sr = simplicity_check(ge, mesh.domain.r_outer, dt);
    if (!sr.simple())
      throw SimplicityError(std::string("perturbed metric fails simplicity: ") +
                            (sr.boundary_convex ? "conjugate points appear"
                                                : "boundary convexity is lost"));

    EllipticSystem syse = build_elliptic_system(ge, ae, mesh, grad, Region::kInner);
    std::vector<PairField> NFe =
        normal_apply_direct_batch(ge, ae, ptrs, mesh, Region::kOuter, n_dir, dt);
    double dn = 0, ds = 0;
    for (int i = 0; i < batch; ++i) {
      PairField dN = NFe[i];
      dN.axpy({-1, 0}, NF0[i]);
      dn = std::max(dn, norm_h1<5>(g, dN, Region::kOuter));
      PairField dS = project(syse, F[i]).solenoidal;
      dS.axpy({-1, 0}, S0[i]);
      ds = std::max(ds, norm_l2<5>(g, dS, Region::kInner));
    }
    rep.dist_normal.push_back(dn);
    rep.dist_sol.push_back(ds);
    rep.sv_floor.push_back(solenoidal_floor(syse, seed));
  }
  return rep;
}

}  // namespace atx
