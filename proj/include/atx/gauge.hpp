#pragma once
#include "atx/fields.hpp"
#include "atx/geometry.hpp"
#include "atx/mesh.hpp"

namespace atx {

// Result of the boundary-gauge normalization: normalized = input - d_a(generator)
// with the generator vanishing on the unit circle, chosen so the normalized
// pair has vanishing normal components (f_sn, f_nn, alpha_n in boundary normal
// coordinates) in the part of the collar where the cutoff is identically one.
struct GaugeResult {
  PairField normalized;
  CovScalarPair generator;  // zero on and outside the unit circle
  double collar_width = 0;
  // max over the active collar of |f_nn|, |f_sn|, |alpha_n| of `normalized`,
  // measured in the g-orthonormal chart frame
  double max_residual = 0;
};

// Integrates the transport ODEs for (w_n, phi), then the tangential component,
// inward from the unit circle along normal geodesics with zero boundary data,
// and blends the generator to zero across [0.6, 1.0] x collar with a quintic
// cutoff. Throws ConfigError when the collar spans fewer than 3 mesh cells.
GaugeResult boundary_gauge_normalize(const MetricModel& g, const AttenuationModel& a,
                                     const GradientOp& grad, const PairField& F,
                                     double collar = 0.15);

}  // namespace atx
