#pragma once
#include <functional>

#include "atx/fanbeam.hpp"
#include "atx/fields.hpp"
#include "atx/geometry.hpp"
#include "atx/mesh.hpp"
#include "atx/types.hpp"

namespace atx {

// One quadrature sample on a traced ray: position/velocity, composite
// trapezoid weight, accumulated attenuation exponent A(t) = int_0^t a, and the
// interpolation stencil. Samples with stencil.tri < 0 fell outside the mesh.
struct RaySample {
  Vec2 x, v;
  double w;
  cplx expA;
  DiskMesh::Loc loc;
};

// Walk the unit-speed geodesic from (x, v) to its exit through `radius`,
// calling cb at every quadrature node. Returns the exit time. Throws
// NumericalError on trapped rays.
double walk_ray(const MetricModel& g, const AttenuationModel& a, const DiskMesh& mesh, Vec2 x,
                Vec2 v, double radius, double dt,
                const std::function<void(const RaySample&)>& cb);

// Attenuated ray transform of the pair F over all grid rays.
FanBeamData forward_transform(const MetricModel& g, const AttenuationModel& a,
                              const PairField& F, const FanBeamGrid& grid, double dt);

// [w, phi] embedded as the data pair [phi g, w].
PairField embed_covscalar(const MetricModel& g, const CovScalarPair& W);

// Transform of a generator pair: forward of [phi g, w].
FanBeamData forward_lower(const MetricModel& g, const AttenuationModel& a,
                          const CovScalarPair& W, const FanBeamGrid& grid, double dt);

// u(x, v) solving Xu + a u = -[-F] along the forward geodesic with zero value
// on the outgoing boundary; backward integrating-factor recurrence. On
// inward boundary vectors this reproduces the forward transform.
cplx transport_solve_at(const MetricModel& g, const AttenuationModel& a, const PairField& F,
                        Vec2 x, Vec2 v, double radius, double dt);

// U_a(x, v): unique solution of (X + a) U = 0 with U = 1 on inward boundary
// vectors; equals exp(-int of a along the incoming segment).
cplx integrating_factor(const MetricModel& g, const AttenuationModel& a, Vec2 x, Vec2 v,
                        double radius, double dt);

// Fiberwise adjoint of the attenuated transform: angular moments of the
// back-traced data against U_{-conj a}, lowered to covariant components.
// Output nodes limited to `out_region`; direction clip events are counted.
PairField adjoint_transform(const MetricModel& g, const AttenuationModel& a,
                            const FanBeamData& data, const DiskMesh& mesh, Region out_region,
                            int n_dir, double dt, long* clipped = nullptr);

// Batched adjoint: all data sets share one back-trace sweep (the geodesics and
// attenuation weights depend only on the model). Clip events counted once per
// direction, not per data set. All grids must match the first one.
std::vector<PairField> adjoint_transform_batch(const MetricModel& g, const AttenuationModel& a,
                                               const std::vector<const FanBeamData*>& datas,
                                               const DiskMesh& mesh, Region out_region, int n_dir,
                                               double dt, long* clipped = nullptr);

}  // namespace atx
