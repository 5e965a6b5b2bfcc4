#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "atx/fields.hpp"
#include "atx/rng.hpp"
#include "atx/solenoidal.hpp"

using namespace atx;

namespace {

MetricModel conformal() {
  MetricModel g;
  g.family = MetricFamily::ConformalBump;
  g.bump = {{0.15, -0.1}, 0.1, 0.2};
  return g;
}

AttenuationModel bump_att() {
  AttenuationModel a;
  a.constant = {0.1, 0.05};
  a.bumps.push_back({{{-0.2, 0.3}, 1.0, 0.2}, {0.3, -0.2}});
  return a;
}

Eigen::VectorXcd pack_cov(const CovScalarPair& W) {
  Eigen::VectorXcd v(3 * W.mesh->n_nodes());
  for (int i = 0; i < W.mesh->n_nodes(); ++i)
    for (int c = 0; c < 3; ++c) v(3 * i + c) = W.at(i, c);
  return v;
}

Eigen::VectorXcd pack_pair(const PairField& F) {
  Eigen::VectorXcd v(5 * F.mesh->n_nodes());
  for (int i = 0; i < F.mesh->n_nodes(); ++i)
    for (int c = 0; c < 5; ++c) v(5 * i + c) = F.at(i, c);
  return v;
}

// smooth generator with nonzero boundary values
CovScalarPair analytic_generator(const DiskMesh& mesh) {
  CovScalarPair W(mesh);
  for (int n = 0; n < mesh.n_nodes(); ++n) {
    Vec2 p = mesh.xy[n];
    W.at(n, 0) = cplx{std::sin(2 * p.x) * std::cos(p.y), 0.3 * p.x * p.y};
    W.at(n, 1) = cplx{std::cos(p.x + 2 * p.y), -0.2 * std::sin(p.x)};
    W.at(n, 2) = cplx{p.x * p.x - 0.5 * p.y, 0.4 * std::cos(2 * p.x)};
  }
  return W;
}

// smooth generator vanishing identically near the unit circle
CovScalarPair cutoff_generator(const DiskMesh& mesh) {
  CovScalarPair W(mesh);
  for (int n = 0; n < mesh.n_nodes(); ++n) {
    Vec2 p = mesh.xy[n];
    double chi = quintic_cutoff(norm(p), 0.45, 0.9);
    W.at(n, 0) = chi * cplx{std::sin(2 * p.x), 0.2 * p.y};
    W.at(n, 1) = chi * cplx{p.y, -0.1};
    W.at(n, 2) = chi * cplx{std::cos(2 * p.y), 0.3 * p.x};
  }
  return W;
}

double rel_err_cov(const MetricModel& g, const CovScalarPair& got, const CovScalarPair& want,
                   Region reg) {
  CovScalarPair diff = got;
  diff.axpy({-1, 0}, want);
  return norm_l2(g, diff, reg) / norm_l2(g, want, reg);
}

}  // namespace

TEST_CASE("elliptic system matrices replicate the nodal operators") {
  DiskDomain dom;
  MetricModel g = conformal();
  AttenuationModel a = bump_att();
  DiskMesh mesh = DiskMesh::build(dom, 1.0 / 8);
  GradientOp grad = GradientOp::build(mesh);
  EllipticSystem sys = build_elliptic_system(g, a, mesh, grad, Region::kInner);

  CovScalarPair W = random_smooth_field<3>(mesh, 5, 1, Region::kOuter);
  PairField dW = apply_d_a(g, a, grad, W);
  Eigen::VectorXcd dv = sys.D * pack_cov(W);
  double emax = 0;
  for (int i = 0; i < mesh.n_nodes(); ++i)
    for (int c = 0; c < 5; ++c) emax = std::max(emax, std::abs(dv(5 * i + c) - dW.at(i, c)));
  CHECK(emax < 1e-12);

  PairField F = random_smooth_field<5>(mesh, 6, 1, Region::kOuter);
  PairField G = random_smooth_field<5>(mesh, 7, 1, Region::kOuter);
  cplx ip_mat = pack_pair(G).dot(sys.M * pack_pair(F));
  cplx ip_lib = inner_product_l2(g, F, G, Region::kInner);
  CHECK(std::abs(ip_mat - ip_lib) < 1e-12 * std::abs(ip_lib));
}

TEST_CASE("stiffness matrices are Hermitian and positive definite") {
  DiskDomain dom;
  MetricModel g = conformal();
  AttenuationModel a = bump_att();
  DiskMesh mesh = DiskMesh::build(dom, 1.0 / 16);
  GradientOp grad = GradientOp::build(mesh);
  EllipticSystem sys = build_elliptic_system(g, a, mesh, grad, Region::kInner);

  SpMat herm_def = SpMat(sys.Kf.adjoint()) - sys.Kf;
  CHECK(herm_def.coeffs().abs().maxCoeff() < 1e-12 * sys.Kf.coeffs().abs().maxCoeff());
  SpMat herm_def2 = SpMat(sys.K.adjoint()) - sys.K;
  CHECK(herm_def2.coeffs().abs().maxCoeff() < 1e-12 * sys.K.coeffs().abs().maxCoeff());

  // smallest eigenvalue by 30 rounds of inverse power iteration
  Rng rng(31);
  Eigen::VectorXcd v(sys.n_unknowns());
  for (int i = 0; i < v.size(); ++i) v(i) = rng.cgaussian();
  v.normalize();
  for (int it = 0; it < 30; ++it) {
    v = sys.kffact->solve(v);
    v.normalize();
  }
  double lam = v.dot(sys.Kf * v).real();
  CHECK(lam > 0);
  CHECK(std::abs(v.dot(sys.Kf * v).imag()) < 1e-12 * lam);
}

TEST_CASE("projection satisfies the decomposition identities to solver precision") {
  DiskDomain dom;
  MetricModel g = conformal();
  AttenuationModel a = bump_att();
  DiskMesh mesh = DiskMesh::build(dom, 1.0 / 16);
  GradientOp grad = GradientOp::build(mesh);
  EllipticSystem sys = build_elliptic_system(g, a, mesh, grad, Region::kInner);

  PairField F = random_smooth_field<5>(mesh, 9, 2, Region::kInner);
  double nf = norm_l2(g, F, Region::kInner);
  DecompositionResult R = project(sys, F);

  CHECK(R.weak_residual_rel < 1e-10);
  CHECK(R.solver_residual < 1e-10);
  double comp = 0;
  for (size_t i = 0; i < F.v.size(); ++i)
    comp = std::max(comp, std::abs(R.solenoidal.v[i] + R.potential.v[i] - F.v[i]));
  CHECK(comp < 1e-12);

  // generator vanishes on and outside the Dirichlet loop
  for (int node : mesh.circle_inner)
    for (int c = 0; c < 3; ++c) CHECK(R.generator.at(node, c) == cplx{0, 0});

  // idempotence and the orthogonal splitting bound
  DecompositionResult R2 = project(sys, R.solenoidal);
  PairField d2 = R2.solenoidal;
  d2.axpy({-1, 0}, R.solenoidal);
  CHECK(norm_l2(g, d2, Region::kInner) < 1e-10 * nf);
  double ratio = norm_l2(g, R.solenoidal, Region::kInner) / nf;
  CHECK(ratio <= 1.0 + 1e-9);
  CHECK(ratio > 0.1);

  // gradients of interior generators are annihilated
  CovScalarPair W0 = cutoff_generator(mesh);
  PairField dW0 = apply_d_a(g, a, grad, W0);
  DecompositionResult R3 = project(sys, dW0);
  CHECK(norm_l2(g, R3.solenoidal, Region::kInner) <
        1e-10 * norm_l2(g, dW0, Region::kInner));
  CHECK(weak_divergence_dual_norm(sys, R.solenoidal) < 1e-10 * nf);
}

TEST_CASE("dirichlet solve recovers a manufactured solution at second order") {
  DiskDomain dom;
  MetricModel g = conformal();
  AttenuationModel a = bump_att();
  double err[2];
  for (int lvl = 0; lvl < 2; ++lvl) {
    DiskMesh mesh = DiskMesh::build(dom, lvl == 0 ? 1.0 / 16 : 1.0 / 32);
    GradientOp grad = GradientOp::build(mesh);
    EllipticSystem sys = build_elliptic_system(g, a, mesh, grad, Region::kInner);
    CovScalarPair Wstar = analytic_generator(mesh);
    PairField dW = apply_d_a(g, a, grad, Wstar);
    CovScalarPair rho = apply_delta_a(g, a, grad, dW);
    for (auto& x : rho.v) x = -x;
    CovScalarPair Wh = elliptic_solve(sys, weak_load_covscalar(sys, rho), &Wstar);
    // boundary reproduction is exact at loop nodes
    for (int node : mesh.circle_inner)
      for (int c = 0; c < 3; ++c) CHECK(Wh.at(node, c) == Wstar.at(node, c));
    err[lvl] = rel_err_cov(g, Wh, Wstar, Region::kInner);
  }
  CHECK(err[0] < 1.5e-2);
  CHECK(err[1] < 4e-3);
  CHECK(std::log2(err[0] / err[1]) > 1.8);
}

TEST_CASE("zero load and zero boundary give the zero solution") {
  DiskDomain dom;
  MetricModel g = conformal();
  AttenuationModel a = bump_att();
  DiskMesh mesh = DiskMesh::build(dom, 1.0 / 8);
  GradientOp grad = GradientOp::build(mesh);
  EllipticSystem sys = build_elliptic_system(g, a, mesh, grad, Region::kInner);
  Eigen::VectorXcd zero = Eigen::VectorXcd::Zero(3 * mesh.n_nodes());
  CovScalarPair Wh = elliptic_solve(sys, zero);
  for (auto& x : Wh.v) CHECK(x == cplx{0, 0});
  CHECK_THROWS_AS(elliptic_solve(sys, Eigen::VectorXcd::Zero(7)), ConfigError);
}

TEST_CASE("iterative fallback matches the direct factorization") {
  DiskDomain dom;
  MetricModel g = conformal();
  AttenuationModel a = bump_att();
  DiskMesh mesh = DiskMesh::build(dom, 1.0 / 8);
  GradientOp grad = GradientOp::build(mesh);
  EllipticSystem dsys = build_elliptic_system(g, a, mesh, grad, Region::kInner);
  EllipticSystem isys = build_elliptic_system(g, a, mesh, grad, Region::kInner, true);
  CHECK(dsys.direct);
  CHECK(!isys.direct);

  CovScalarPair Wstar = analytic_generator(mesh);
  PairField dW = apply_d_a(g, a, grad, Wstar);
  Eigen::VectorXcd load = weak_load_pair(dsys, dW);
  CovScalarPair Wd = elliptic_solve(dsys, load, &Wstar);
  CovScalarPair Wi = elliptic_solve(isys, load, &Wstar);
  CHECK(rel_err_cov(g, Wi, Wd, Region::kInner) < 1e-8);

  PairField F = random_smooth_field<5>(mesh, 3, 2, Region::kInner);
  DecompositionResult R = project(isys, F);
  CHECK(R.weak_residual_rel < 1e-8);
}

TEST_CASE("annulus transport integrals recover the boundary trace") {
  DiskDomain dom;
  MetricModel g = conformal();
  AttenuationModel a = bump_att();
  DiskMesh mesh = DiskMesh::build(dom, 1.0 / 32);
  GradientOp grad = GradientOp::build(mesh);

  // manufactured generator vanishing on the middle circle
  CovScalarPair W(mesh);
  double rm2 = dom.r_mid * dom.r_mid;
  for (int n = 0; n < mesh.n_nodes(); ++n) {
    Vec2 p = mesh.xy[n];
    double q = rm2 - dot(p, p);
    W.at(n, 0) = q * cplx{std::sin(p.x + p.y), 0.2};
    W.at(n, 1) = q * cplx{std::cos(2 * p.x), -0.3 * p.y};
    W.at(n, 2) = q * cplx{0.5 * p.x, 0.4 * std::cos(p.y)};
  }
  PairField G = apply_d_a(g, a, grad, W);
  for (auto& x : G.v) x = -x;

  TraceRecovery TR = boundary_trace_recover(g, a, mesh, G, 16, 77, 1.0 / 64);
  CHECK(TR.flagged.empty());
  double num = 0, den = 0;
  for (int node : mesh.circle_inner)
    for (int c = 0; c < 3; ++c) {
      num += std::norm(TR.trace.at(node, c) - W.at(node, c));
      den += std::norm(W.at(node, c));
    }
  CHECK(std::sqrt(num / den) < 2e-2);

  // chaining the recovered trace through the interior solve reproduces W
  EllipticSystem sys = build_elliptic_system(g, a, mesh, grad, Region::kInner);
  PairField dW = apply_d_a(g, a, grad, W);
  CovScalarPair Wh = elliptic_solve(sys, weak_load_pair(sys, dW), &TR.trace);
  CHECK(rel_err_cov(g, Wh, W, Region::kInner) < 2e-2);
}

TEST_CASE("trace recovery edge cases") {
  DiskDomain dom;
  MetricModel g = conformal();
  AttenuationModel a = bump_att();
  DiskMesh mesh = DiskMesh::build(dom, 1.0 / 8);
  PairField zero(mesh);
  TraceRecovery TR = boundary_trace_recover(g, a, mesh, zero, 16, 11, 1.0 / 32);
  for (int node : mesh.circle_inner)
    for (int c = 0; c < 3; ++c) CHECK(std::abs(TR.trace.at(node, c)) < 1e-12);
  CHECK_THROWS_AS(boundary_trace_recover(g, a, mesh, zero, 5, 11, 1.0 / 32), ConfigError);
}
