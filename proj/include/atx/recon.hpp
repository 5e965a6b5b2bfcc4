#pragma once
#include <cstdint>
#include <vector>

#include "atx/fanbeam.hpp"
#include "atx/fields.hpp"
#include "atx/normal_op.hpp"
#include "atx/solenoidal.hpp"

namespace atx {

// Frozen quadrature of the fan-beam transform: every grid ray is traced once
// and its samples cached, so repeated applications cost a sparse sweep.
// apply reproduces forward_transform; apply_transpose is its exact conjugate
// transpose with the L2_mu data weights folded in, so
//   <apply(F), d>_mu == <F, apply_transpose(d)>   (nodal l2, to roundoff).
class ForwardOperator {
 public:
  ForwardOperator(const MetricModel& g, const AttenuationModel& a, const DiskMesh& mesh,
                  const FanBeamGrid& grid, double dt);

  FanBeamData apply(const PairField& F) const;
  PairField apply_transpose(const FanBeamData& d) const;

  const FanBeamGrid& grid() const { return grid_; }
  const DiskMesh& mesh() const { return *mesh_; }
  double mu_weight(int ray) const { return mu_[ray]; }

 private:
  struct Sample {
    int tri;
    double b[3];
    cplx wE;  // quadrature weight times exp(int_0^t a)
    Vec2 v;
  };
  const DiskMesh* mesh_;
  FanBeamGrid grid_;
  std::vector<Sample> samples_;
  std::vector<size_t> offset_;  // per-ray sample ranges, size grid.size()+1
  std::vector<double> mu_;      // L2_mu quadrature weight per ray
};

struct ReconReport {
  int iterations = 0;
  // ||apply(x_k) - b||_mu per iteration, starting at x_0 = 0; monotone
  // non-increasing (checked every step)
  std::vector<double> residual_history;
  double normal_residual_rel = 0;  // final |A^T r| / |A^T b|
  double rel_error = -1;           // vs S_a(truth) when truth was given
  double divfree_dual_rel = 0;     // dual norm of delta_a(recovered) / |recovered|
  double noise_level = 0;
};

struct ReconOptions {
  double noise = 0;  // additive complex gaussian, relative to the data norm
  int max_iter = 200;
  double tol = 1e-6;  // stop at this relative normal-equation residual
  uint64_t seed = 1;
};

struct ReconOutput {
  ReconReport report;
  PairField recovered;  // solenoidal part of the least-squares solution
};

// Conjugate-gradient least squares on the cached forward map, started from
// zero; the iterate is post-processed by project() so the output is
// delta_a-free. Throws NumericalError if the data residual grows (transpose
// mismatch) or stops decreasing monotonically.
ReconOutput reconstruct_solenoidal(const EllipticSystem& sys, const ForwardOperator& op,
                                   const FanBeamData& data, const ReconOptions& opt,
                                   const PairField* truth = nullptr);

// Distribution of r(F) = |S_a F|_{L2(M)} / |N_a F|_{H1(Mtilde)} over random
// smooth pairs (white nodal noise, 2 smoothing passes). Samples with
// |S_a F| < 1e-8 are rejected as gauge-degenerate. The normal operator runs
// once as a batch over all samples.
struct StabilityStats {
  std::vector<double> ratios;
  double min_ratio = 0;
  double max_ratio = 0;
  double spread = 0;  // max/min
  int rejected = 0;
};
StabilityStats stability_ratio_experiment(const EllipticSystem& sys, int n_samples,
                                          uint64_t seed, int n_dir, double dt);

// Perturbs (g, a) along a closed-form direction (conformal-exponent bump,
// attenuation bump) scaled so the C3 finite-difference proxy norm of the
// perturbation equals each requested epsilon. Operator distances are sup over
// a fixed batch of 20 random unit pairs; the singular-value floor is the
// smallest Ritz value of 20 Lanczos steps on S_a N_a restricted to the
// discrete solenoidal subspace. Entry [0] of the floors is the unperturbed
// model. Throws SimplicityError when a perturbed model stops being simple.
struct PerturbationReport {
  std::vector<double> eps;
  std::vector<double> dist_normal;  // sup_F |N F - N_eps F|_{H1(Mtilde)}
  std::vector<double> dist_sol;     // sup_F |S F - S_eps F|_{L2(M)}
  std::vector<double> sv_floor;     // [0] = base model, then one per eps
  double c3_unit = 0;               // proxy norm of the unit-amplitude direction
};
PerturbationReport perturbation_study(const MetricModel& g, const AttenuationModel& a,
                                      const GaussBump& dg_dir, const ComplexBump& da_dir,
                                      const std::vector<double>& eps_list, const DiskMesh& mesh,
                                      const GradientOp& grad, int n_dir, double dt,
                                      uint64_t seed);

}  // namespace atx
