#include "atx/xray.hpp"

#include <atomic>
#include <cmath>

#include "atx/parallel.hpp"

namespace atx {

double walk_ray(const MetricModel& g, const AttenuationModel& a, const DiskMesh& mesh, Vec2 x,
                Vec2 v, double radius, double dt,
                const std::function<void(const RaySample&)>& cb) {
  Geodesic geo = trace_geodesic(g, x, v, radius, dt);
  if (geo.trapped) throw NumericalError("ray walk hit a trapped geodesic");
  const int m = (int)geo.samples.size();
  if (m < 2) return geo.exit_time;

  const bool az = a.is_zero();
  std::vector<cplx> av;
  if (!az) {
    av.resize(m);
    for (int k = 0; k < m; ++k) av[k] = a.value(geo.samples[k].x);
  }
  std::vector<double> w(m, 0.0);
  for (int k = 0; k + 1 < m; ++k) {
    double h = geo.samples[k + 1].t - geo.samples[k].t;
    w[k] += 0.5 * h;
    w[k + 1] += 0.5 * h;
  }

  cplx A{0, 0};  // cumulative int_0^{t_k} a, per-cell trapezoid
  RaySample s;
  for (int k = 0; k < m; ++k) {
    if (k > 0 && !az) A += 0.5 * (geo.samples[k].t - geo.samples[k - 1].t) * (av[k - 1] + av[k]);
    s.x = geo.samples[k].x;
    s.v = geo.samples[k].v;
    s.w = w[k];
    s.expA = az ? cplx{1, 0} : std::exp(A);
    s.loc = {};
    mesh.locate(s.x, s.loc);
    cb(s);
  }
  return geo.exit_time;
}

FanBeamData forward_transform(const MetricModel& g, const AttenuationModel& a,
                              const PairField& F, const FanBeamGrid& grid, double dt) {
  FanBeamData out(grid);
  const DiskMesh& mesh = *F.mesh;
  parallel_for(grid.n_beta, [&](int lo, int hi) {
    for (int i = lo; i < hi; ++i)
      for (int j = 0; j < grid.n_theta; ++j) {
        Vec2 x, v;
        grid.ray(g, i, j, x, v);
        cplx sum{0, 0};
        walk_ray(g, a, mesh, x, v, grid.radius, dt, [&](const RaySample& s) {
          if (s.loc.tri < 0) return;
          sum += s.w * s.expA * eval_on_sphere(F.interp(s.loc), s.v);
        });
        out.at(i, j) = sum;
      }
  });
  return out;
}

PairField embed_covscalar(const MetricModel& g, const CovScalarPair& W) {
  const DiskMesh& mesh = *W.mesh;
  PairField P(mesh);
  for (int n = 0; n < mesh.n_nodes(); ++n) {
    Sym2 gm = g.metric(mesh.xy[n]);
    cplx phi = W.at(n, 2);
    P.at(n, 0) = phi * gm.a11;
    P.at(n, 1) = phi * gm.a12;
    P.at(n, 2) = phi * gm.a22;
    P.at(n, 3) = W.at(n, 0);
    P.at(n, 4) = W.at(n, 1);
  }
  return P;
}

FanBeamData forward_lower(const MetricModel& g, const AttenuationModel& a,
                          const CovScalarPair& W, const FanBeamGrid& grid, double dt) {
  return forward_transform(g, a, embed_covscalar(g, W), grid, dt);
}

cplx transport_solve_at(const MetricModel& g, const AttenuationModel& a, const PairField& F,
                        Vec2 x, Vec2 v, double radius, double dt) {
  Geodesic geo = trace_geodesic(g, x, v, radius, dt);
  if (geo.trapped) throw NumericalError("transport solve hit a trapped geodesic");
  const int m = (int)geo.samples.size();
  if (m < 2) return {0, 0};
  const bool az = a.is_zero();
  const DiskMesh& mesh = *F.mesh;

  auto src = [&](int k) -> cplx {
    DiskMesh::Loc loc;
    if (!mesh.locate(geo.samples[k].x, loc)) return {0, 0};
    return eval_on_sphere(F.interp(loc), geo.samples[k].v);
  };

  // integrating-factor recurrence from the outgoing boundary inward:
  //   u(t_k) = e^{da_k} u(t_{k+1}) + (h/2) (F_k + e^{da_k} F_{k+1})
  cplx u{0, 0};
  cplx Fnext = src(m - 1);
  cplx anext = az ? cplx{0, 0} : a.value(geo.samples[m - 1].x);
  for (int k = m - 2; k >= 0; --k) {
    double h = geo.samples[k + 1].t - geo.samples[k].t;
    cplx Fk = src(k);
    cplx ak = az ? cplx{0, 0} : a.value(geo.samples[k].x);
    cplx eda = az ? cplx{1, 0} : std::exp(0.5 * h * (ak + anext));
    u = eda * u + 0.5 * h * (Fk + eda * Fnext);
    Fnext = Fk;
    anext = ak;
  }
  return u;
}

cplx integrating_factor(const MetricModel& g, const AttenuationModel& a, Vec2 x, Vec2 v,
                        double radius, double dt) {
  if (a.is_zero()) return {1, 0};
  Geodesic geo = trace_geodesic(g, x, -1.0 * v, radius, dt);
  if (geo.trapped) throw NumericalError("integrating factor hit a trapped geodesic");
  cplx acc{0, 0};
  for (int k = 0; k + 1 < (int)geo.samples.size(); ++k) {
    double h = geo.samples[k + 1].t - geo.samples[k].t;
    acc += 0.5 * h * (a.value(geo.samples[k].x) + a.value(geo.samples[k + 1].x));
  }
  return std::exp(-acc);
}

std::vector<PairField> adjoint_transform_batch(const MetricModel& g, const AttenuationModel& a,
                                               const std::vector<const FanBeamData*>& datas,
                                               const DiskMesh& mesh, Region out_region, int n_dir,
                                               double dt, long* clipped) {
  const int nq = (int)datas.size();
  std::vector<PairField> out(nq, PairField(mesh));
  if (nq == 0) return out;
  const FanBeamGrid& grid = datas[0]->grid;
  const bool az = a.is_zero();
  std::atomic<long> nclip{0};

  parallel_for(mesh.n_nodes(), [&](int lo, int hi) {
    long myclip = 0;
    std::vector<std::array<cplx, 5>> mom(nq);  // M11 M12 M22 q1 q2 per data set
    for (int n = lo; n < hi; ++n) {
      if (mesh.node_region[n] > (int8_t)out_region) continue;
      Vec2 x = mesh.xy[n];
      Sym2 gm = g.metric(x);
      auto fr = g.frame(x);
      for (auto& m : mom) m = {};
      for (int d = 0; d < n_dir; ++d) {
        double phi = 2.0 * M_PI * d / n_dir;
        Vec2 v = std::cos(phi) * fr[0] + std::sin(phi) * fr[1];
        Geodesic geo = trace_geodesic(g, x, -1.0 * v, grid.radius, dt);
        if (geo.trapped) throw NumericalError("adjoint back-trace hit a trapped geodesic");
        const GeodesicSample& end = geo.samples.back();
        auto bt = grid.coords_of(g, end.x, -1.0 * end.v);
        // the theta clip is a property of the footpoint, shared by the batch
        double thi = M_PI / 2 - grid.theta_margin;
        if (bt.theta < -thi || bt.theta > thi) {
          ++myclip;
          continue;
        }
        cplx U{1, 0};
        if (!az) {
          cplx acc{0, 0};
          for (int k = 0; k + 1 < (int)geo.samples.size(); ++k) {
            double h = geo.samples[k + 1].t - geo.samples[k].t;
            acc += 0.5 * h * (a.value(geo.samples[k].x) + a.value(geo.samples[k + 1].x));
          }
          U = std::exp(std::conj(acc));  // U_{-conj a}(x, v)
        }
        for (int q = 0; q < nq; ++q) {
          cplx c = U * datas[q]->sample(bt.beta, bt.theta);
          mom[q][0] += v.x * v.x * c;
          mom[q][1] += v.x * v.y * c;
          mom[q][2] += v.y * v.y * c;
          mom[q][3] += v.x * c;
          mom[q][4] += v.y * c;
        }
      }
      double dsig = 2.0 * M_PI / n_dir;
      for (int q = 0; q < nq; ++q) {
        cplx M11 = dsig * mom[q][0], M12 = dsig * mom[q][1], M22 = dsig * mom[q][2];
        cplx q1 = dsig * mom[q][3], q2 = dsig * mom[q][4];
        // lower both slots with g
        out[q].at(n, 0) =
            gm.a11 * (M11 * gm.a11 + M12 * gm.a12) + gm.a12 * (M12 * gm.a11 + M22 * gm.a12);
        out[q].at(n, 1) =
            gm.a11 * (M11 * gm.a12 + M12 * gm.a22) + gm.a12 * (M12 * gm.a12 + M22 * gm.a22);
        out[q].at(n, 2) =
            gm.a12 * (M11 * gm.a12 + M12 * gm.a22) + gm.a22 * (M12 * gm.a12 + M22 * gm.a22);
        out[q].at(n, 3) = gm.a11 * q1 + gm.a12 * q2;
        out[q].at(n, 4) = gm.a12 * q1 + gm.a22 * q2;
      }
    }
    nclip += myclip;
  });
  if (clipped) *clipped = nclip.load();
  return out;
}

PairField adjoint_transform(const MetricModel& g, const AttenuationModel& a,
                            const FanBeamData& data, const DiskMesh& mesh, Region out_region,
                            int n_dir, double dt, long* clipped) {
  std::vector<const FanBeamData*> one{&data};
  return std::move(adjoint_transform_batch(g, a, one, mesh, out_region, n_dir, dt, clipped)[0]);
}

}  // namespace atx
