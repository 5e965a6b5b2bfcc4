#pragma once
#include <array>
#include <vector>

#include "atx/fanbeam.hpp"
#include "atx/fields.hpp"
#include "atx/geometry.hpp"
#include "atx/mesh.hpp"
#include "atx/types.hpp"

namespace atx {

// Normal operator N = (adjoint o forward) on the extended disk, evaluated by
// the direct kernel: at each node x and direction v, the full chord through
// (x, v) is integrated against exp(int_0^t a) and weighted by
// exp(2 Re int of a over the incoming segment); fiber moments v (x) v and v
// are then lowered with g. Input fields should be supported in the inner disk
// (zero-extended); output covers nodes of `out_region`. The batch variant
// shares all geodesic traces across inputs. n_dir must be even.
std::vector<PairField> normal_apply_direct_batch(const MetricModel& g, const AttenuationModel& a,
                                                 const std::vector<const PairField*>& Fs,
                                                 const DiskMesh& mesh, Region out_region,
                                                 int n_dir, double dt);
PairField normal_apply_direct(const MetricModel& g, const AttenuationModel& a, const PairField& F,
                              const DiskMesh& mesh, Region out_region, int n_dir, double dt);
// Single-point evaluation (x need not be a mesh node).
std::array<cplx, 5> normal_apply_direct_at(const MetricModel& g, const AttenuationModel& a,
                                           const PairField& F, Vec2 x, double radius, int n_dir,
                                           double dt);

// N as the literal composition: fan-beam forward on the extended boundary
// followed by the fiberwise adjoint. Independent discretization of the same
// operator; used to cross-check the direct kernel.
std::vector<PairField> normal_apply_composed_batch(const MetricModel& g,
                                                   const AttenuationModel& a,
                                                   const std::vector<const PairField*>& Fs,
                                                   const DiskMesh& mesh, Region out_region,
                                                   const FanBeamGrid& grid, int n_dir, double dt);
PairField normal_apply_composed(const MetricModel& g, const AttenuationModel& a,
                                const PairField& F, const DiskMesh& mesh, Region out_region,
                                const FanBeamGrid& grid, int n_dir, double dt);

// Principal symbol of N at (x, xi): the fiber delta-integral collapses onto
// the two unit directions +/- w perpendicular to xi, each weighted by
// 2 pi * exp(2 Re int a) / |xi|_g. Acting on coefficient vectors
// (f11, f12, f22, a1, a2).
struct SymbolMatrix {
  Vec2 x;
  Vec2 xi;
  double xi_norm = 0;                       // |xi|_g
  std::array<std::array<cplx, 5>, 5> Q{};   // quadratic form on coefficients
  std::array<std::array<cplx, 5>, 5> N{};   // action returning lowered components

  std::array<cplx, 5> apply(const std::array<cplx, 5>& c) const {
    std::array<cplx, 5> r{};
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) r[i] += N[i][j] * c[j];
    return r;
  }
  // c^H Q c
  cplx qform(const std::array<cplx, 5>& u, const std::array<cplx, 5>& v) const {
    cplx s = 0;
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) s += std::conj(u[i]) * Q[i][j] * v[j];
    return s;
  }
  // ascending eigenvalues of the quadratic form
  std::array<double, 5> eigenvalues() const;
};

SymbolMatrix principal_symbol(const MetricModel& g, const AttenuationModel& a, Vec2 x, Vec2 xi,
                              double radius, double dt);

// Smallest eigenvalue of the symbol restricted to {f . xi = 0, alpha . xi = 0}
// over random interior samples with |xi|_g = 1.
struct EllipticityReport {
  double min_restricted_eig = 0;
  Vec2 argmin_x{0, 0};
  Vec2 argmin_xi{0, 0};
  int n_samples = 0;
};
EllipticityReport ellipticity_check(const MetricModel& g, const AttenuationModel& a, double radius,
                                    int n_samples, uint64_t seed, double dt);
// Restricted 2x2 form of one symbol matrix; returns its two eigenvalues.
std::array<double, 2> restricted_symbol_eigs(const MetricModel& g, const SymbolMatrix& S);

// Order -1 oscillatory check: N applied to chi(y) e^{i lambda (y-x).xi} P0,
// scaled by lambda, against the symbol action on chi(x) P0. Returns the
// relative defect. Throws NumericalError when lambda is unresolvable
// (lambda * h > 1).
double symbol_oscillatory_defect(const MetricModel& g, const AttenuationModel& a,
                                 const DiskMesh& mesh, Vec2 x, Vec2 xi, double lambda,
                                 const std::array<cplx, 5>& P0, int n_dir, double dt);

}  // namespace atx
