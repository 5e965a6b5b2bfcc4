#pragma once
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <memory>
#include <vector>

#include "atx/fields.hpp"
#include "atx/geometry.hpp"
#include "atx/mesh.hpp"

namespace atx {

using SpMat = Eigen::SparseMatrix<cplx>;

// Dirichlet system for the weighted elliptic operator delta_a d_a on one of
// the nested disks. It carries the weak form (d_a., d_a.) in two discrete
// frames with different jobs:
//  - solver frame (Kf, Lf): P1 finite elements, element-wise derivatives and
//    edge-midpoint quadrature. Adjoint-consistent, so Dirichlet solves
//    converge at second order. Used by elliptic_solve.
//  - projection frame (D, M, K): replicates apply_d_a and inner_product_l2
//    entry for entry, so the decomposition residuals reported by project are
//    algebraic identities of the same discrete operators the rest of the
//    library uses (exact at solver precision, not just O(h)).
struct EllipticSystem {
  const DiskMesh* mesh = nullptr;
  MetricModel g;
  AttenuationModel a;
  Region manifold = Region::kInner;
  double loop_radius = 0;
  std::vector<int> unknown_of_node;  // -1 when constrained (loop node or outside)
  std::vector<int> node_of_unknown;
  SpMat D;    // (5N x 3N) nodal d_a
  SpMat M;    // (5N x 5N) pair-field Gram over the manifold
  SpMat DtM;  // D^H M
  SpMat Mc;   // (3N x 3N) covscalar Gram over the manifold
  SpMat K;    // projection stiffness D^H M D restricted to unknowns
  SpMat Kf_full;  // (3N x 3N) P1 element stiffness, all nodes
  SpMat Kf;       // element stiffness restricted to unknowns, Hermitian PD
  SpMat Lf;       // (3N x 5N) element load map: (Lf f)(v) = (interp f, d_a v)
  bool direct = true;
  std::shared_ptr<Eigen::SimplicialLDLT<SpMat>> kfact;   // of K
  std::shared_ptr<Eigen::SimplicialLDLT<SpMat>> kffact;  // of Kf
  std::shared_ptr<Eigen::SimplicialLDLT<SpMat>> mfact;   // of Mc on unknowns
  int n_unknowns() const { return (int)(3 * node_of_unknown.size()); }
};

// Direct factorization up to 2e5 unknowns, diagonally preconditioned CG
// beyond (or when forced, for testing the iterative path).
EllipticSystem build_elliptic_system(const MetricModel& g, const AttenuationModel& a,
                                     const DiskMesh& mesh, const GradientOp& grad,
                                     Region manifold, bool force_iterative = false);

// Weak loads b(V) as full 3N coefficient vectors for elliptic_solve:
// (F, d_a V) in the solver frame, and (rho, V).
Eigen::VectorXcd weak_load_pair(const EllipticSystem& sys, const PairField& F);
Eigen::VectorXcd weak_load_covscalar(const EllipticSystem& sys, const CovScalarPair& rho);

// Solves (d_a W, d_a V) = b(V) for all interior V in the solver frame, with
// optional Dirichlet data on the manifold's boundary loop. Throws
// NumericalError if the solver residual exceeds 1e-8 relative. The returned
// field carries the boundary values and a smooth angular extension in a thin
// outside collar (the lift), zero elsewhere.
CovScalarPair elliptic_solve(const EllipticSystem& sys, const Eigen::VectorXcd& load,
                             const CovScalarPair* boundary = nullptr,
                             double* rel_residual = nullptr);

struct DecompositionResult {
  PairField solenoidal;     // S_a F
  PairField potential;      // P_a F = d_a W
  CovScalarPair generator;  // W, zero on and outside the loop
  double weak_residual_rel = 0;  // dual norm of delta_a(solenoidal) / |F|
  double solver_residual = 0;
};
// L2-orthogonal splitting F = solenoidal + d_a W with W Dirichlet-zero,
// computed in the projection frame: potential = apply_d_a(W) nodally and the
// weak residual is the exact normal-equation residual of the fit.
DecompositionResult project(const EllipticSystem& sys, const PairField& F);

// The projector of the splitting alone (S F = F - d_a W), without the
// diagnostic norms, plus its adjoint in the plain nodal pairing: S is
// orthogonal in the L2(M) Gram, hence oblique nodally, and least-squares
// iterations on the projected forward map need the exact nodal adjoint.
PairField project_solenoidal(const EllipticSystem& sys, const PairField& F);
PairField project_solenoidal_adjoint(const EllipticSystem& sys, const PairField& F);

// Dual norm over interior test functions of V -> (F, d_a V): the discrete
// negative-order norm of delta_a F.
double weak_divergence_dual_norm(const EllipticSystem& sys, const PairField& F);

// Recovers [w1, w2, phi] on the inner boundary loop from G = -d_a[w,phi]
// given on the annulus, assuming [w,phi] vanishes on the middle circle.
// Each loop node least-squares fits the 3 unknowns from transport integrals
// along annulus-only geodesics; nodes with fewer than 6 admissible
// directions are flagged and filled by angular interpolation.
struct TraceRecovery {
  CovScalarPair trace;       // values at inner loop nodes, zero elsewhere
  std::vector<int> flagged;  // loop positions lacking admissible directions
  int n_rays = 16;
};
TraceRecovery boundary_trace_recover(const MetricModel& g, const AttenuationModel& a,
                                     const DiskMesh& mesh, const PairField& G, int n_rays,
                                     uint64_t seed, double dt);

}  // namespace atx
