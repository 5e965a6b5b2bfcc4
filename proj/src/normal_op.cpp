#include "atx/normal_op.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "atx/parallel.hpp"
#include "atx/rng.hpp"
#include "atx/xray.hpp"

namespace atx {

namespace {

// Half chord from x in direction `dir`: sample stencils, velocities and
// trapezoid weights folded with exp(+-int_0^t a).
struct HalfTrace {
  std::vector<DiskMesh::Loc> loc;
  std::vector<Vec2> v;
  std::vector<cplx> ef;  // w_k * exp(+cum_k)
  std::vector<cplx> eb;  // w_k * exp(-cum_k)
  cplx total{0, 0};      // int of a over the whole half chord
};

void build_half_trace(const MetricModel& g, const AttenuationModel& a, bool az,
                      const DiskMesh& mesh, Vec2 x, Vec2 dir, double radius, double dt,
                      HalfTrace& tr) {
  Geodesic geo = trace_geodesic(g, x, dir, radius, dt);
  if (geo.trapped) throw NumericalError("normal operator hit a trapped geodesic");
  const int m = (int)geo.samples.size();
  tr.loc.clear();
  tr.v.clear();
  tr.ef.clear();
  tr.eb.clear();
  tr.total = {0, 0};
  if (m < 2) return;
  tr.loc.resize(m);
  tr.v.resize(m);
  tr.ef.resize(m);
  tr.eb.resize(m);
  cplx cum{0, 0};
  cplx aprev = az ? cplx{0, 0} : a.value(geo.samples[0].x);
  for (int k = 0; k < m; ++k) {
    const GeodesicSample& s = geo.samples[k];
    if (k > 0 && !az) {
      cplx ak = a.value(s.x);
      cum += 0.5 * (s.t - geo.samples[k - 1].t) * (aprev + ak);
      aprev = ak;
    }
    double w;
    if (k == 0)
      w = 0.5 * (geo.samples[1].t - geo.samples[0].t);
    else if (k == m - 1)
      w = 0.5 * (geo.samples[m - 1].t - geo.samples[m - 2].t);
    else
      w = 0.5 * (geo.samples[k + 1].t - geo.samples[k - 1].t);
    tr.loc[k] = {};
    mesh.locate(s.x, tr.loc[k]);
    tr.v[k] = s.v;
    if (az) {
      tr.ef[k] = w;
      tr.eb[k] = w;
    } else {
      cplx e = std::exp(cum);
      tr.ef[k] = w * e;
      tr.eb[k] = w / e;
    }
  }
  tr.total = cum;
}

struct DirectWorkspace {
  std::vector<HalfTrace> tr;
  std::vector<double> wout;
  std::vector<cplx> P, Q;
};

// Raw contravariant fiber moments (M11, M12, M22, q1, q2) of N at x, one
// 5-vector per input field. Caller lowers indices.
void direct_moments_at(const MetricModel& g, const AttenuationModel& a, const DiskMesh& mesh,
                       const std::vector<const PairField*>& Fs, Vec2 x, double radius, int n_dir,
                       double dt, DirectWorkspace& ws, std::vector<std::array<cplx, 5>>& mom) {
  const bool az = a.is_zero();
  const int nq = (int)Fs.size();
  auto fr = g.frame(x);
  ws.tr.resize(n_dir);
  ws.wout.resize(n_dir);
  ws.P.assign(n_dir, cplx{0, 0});
  ws.Q.assign(n_dir, cplx{0, 0});
  for (int d = 0; d < n_dir; ++d) {
    double phi = 2.0 * M_PI * d / n_dir;
    Vec2 v = std::cos(phi) * fr[0] + std::sin(phi) * fr[1];
    build_half_trace(g, a, az, mesh, x, v, radius, dt, ws.tr[d]);
  }
  // incoming segment of direction d is the trace of the opposite direction
  for (int d = 0; d < n_dir; ++d)
    ws.wout[d] = std::exp(2.0 * ws.tr[(d + n_dir / 2) % n_dir].total.real());

  mom.assign(nq, {});
  const double dsig = 2.0 * M_PI / n_dir;
  for (int q = 0; q < nq; ++q) {
    const PairField& F = *Fs[q];
    // per half trace: P = forward-role integral, Q = backward-role integral
    for (int d = 0; d < n_dir; ++d) {
      const HalfTrace& t = ws.tr[d];
      cplx Pd{0, 0}, Qd{0, 0};
      for (size_t k = 0; k < t.loc.size(); ++k) {
        if (t.loc[k].tri < 0) continue;
        auto Fc = F.interp(t.loc[k]);
        Vec2 v = t.v[k];
        cplx even = Fc[0] * (v.x * v.x) + Fc[1] * (2.0 * v.x * v.y) + Fc[2] * (v.y * v.y);
        cplx odd = Fc[3] * v.x + Fc[4] * v.y;
        Pd += t.ef[k] * (even + odd);
        Qd += t.eb[k] * (even - odd);
      }
      ws.P[d] = Pd;
      ws.Q[d] = Qd;
    }
    std::array<cplx, 5>& m = mom[q];
    for (int d = 0; d < n_dir; ++d) {
      double phi = 2.0 * M_PI * d / n_dir;
      Vec2 v = std::cos(phi) * fr[0] + std::sin(phi) * fr[1];
      cplx chord = ws.Q[(d + n_dir / 2) % n_dir] + ws.P[d];
      cplx c = dsig * ws.wout[d] * chord;
      m[0] += v.x * v.x * c;
      m[1] += v.x * v.y * c;
      m[2] += v.y * v.y * c;
      m[3] += v.x * c;
      m[4] += v.y * c;
    }
  }
}

void lower_moments(const Sym2& gm, const std::array<cplx, 5>& m, std::array<cplx, 5>& out) {
  cplx M11 = m[0], M12 = m[1], M22 = m[2], q1 = m[3], q2 = m[4];
  out[0] = gm.a11 * (M11 * gm.a11 + M12 * gm.a12) + gm.a12 * (M12 * gm.a11 + M22 * gm.a12);
  out[1] = gm.a11 * (M11 * gm.a12 + M12 * gm.a22) + gm.a12 * (M12 * gm.a12 + M22 * gm.a22);
  out[2] = gm.a12 * (M11 * gm.a12 + M12 * gm.a22) + gm.a22 * (M12 * gm.a12 + M22 * gm.a22);
  out[3] = gm.a11 * q1 + gm.a12 * q2;
  out[4] = gm.a12 * q1 + gm.a22 * q2;
}

}  // namespace

std::vector<PairField> normal_apply_direct_batch(const MetricModel& g, const AttenuationModel& a,
                                                 const std::vector<const PairField*>& Fs,
                                                 const DiskMesh& mesh, Region out_region,
                                                 int n_dir, double dt) {
  if (n_dir < 4 || n_dir % 2 != 0) throw ConfigError("normal operator needs an even n_dir >= 4");
  const int nq = (int)Fs.size();
  std::vector<PairField> out(nq, PairField(mesh));
  if (nq == 0) return out;
  const double radius = mesh.domain.r_outer;

  parallel_for(mesh.n_nodes(), [&](int lo, int hi) {
    DirectWorkspace ws;
    std::vector<std::array<cplx, 5>> mom;
    for (int n = lo; n < hi; ++n) {
      if (mesh.node_region[n] > (int8_t)out_region) continue;
      Vec2 x = mesh.xy[n];
      direct_moments_at(g, a, mesh, Fs, x, radius, n_dir, dt, ws, mom);
      Sym2 gm = g.metric(x);
      std::array<cplx, 5> low;
      for (int q = 0; q < nq; ++q) {
        lower_moments(gm, mom[q], low);
        for (int c = 0; c < 5; ++c) out[q].at(n, c) = low[c];
      }
    }
  });
  return out;
}

PairField normal_apply_direct(const MetricModel& g, const AttenuationModel& a, const PairField& F,
                              const DiskMesh& mesh, Region out_region, int n_dir, double dt) {
  std::vector<const PairField*> one{&F};
  return std::move(normal_apply_direct_batch(g, a, one, mesh, out_region, n_dir, dt)[0]);
}

std::array<cplx, 5> normal_apply_direct_at(const MetricModel& g, const AttenuationModel& a,
                                           const PairField& F, Vec2 x, double radius, int n_dir,
                                           double dt) {
  if (n_dir < 4 || n_dir % 2 != 0) throw ConfigError("normal operator needs an even n_dir >= 4");
  DirectWorkspace ws;
  std::vector<std::array<cplx, 5>> mom;
  std::vector<const PairField*> one{&F};
  direct_moments_at(g, a, *F.mesh, one, x, radius, n_dir, dt, ws, mom);
  std::array<cplx, 5> out;
  lower_moments(g.metric(x), mom[0], out);
  return out;
}

std::vector<PairField> normal_apply_composed_batch(const MetricModel& g,
                                                   const AttenuationModel& a,
                                                   const std::vector<const PairField*>& Fs,
                                                   const DiskMesh& mesh, Region out_region,
                                                   const FanBeamGrid& grid, int n_dir, double dt) {
  std::vector<FanBeamData> ds;
  ds.reserve(Fs.size());
  for (const PairField* F : Fs) ds.push_back(forward_transform(g, a, *F, grid, dt));
  std::vector<const FanBeamData*> ptrs;
  ptrs.reserve(ds.size());
  for (const auto& d : ds) ptrs.push_back(&d);
  return adjoint_transform_batch(g, a, ptrs, mesh, out_region, n_dir, dt);
}

PairField normal_apply_composed(const MetricModel& g, const AttenuationModel& a,
                                const PairField& F, const DiskMesh& mesh, Region out_region,
                                const FanBeamGrid& grid, int n_dir, double dt) {
  std::vector<const PairField*> one{&F};
  return std::move(normal_apply_composed_batch(g, a, one, mesh, out_region, grid, n_dir, dt)[0]);
}

std::array<double, 5> SymbolMatrix::eigenvalues() const {
  Eigen::Matrix<cplx, 5, 5> m;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) m(i, j) = Q[i][j];
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<cplx, 5, 5>> es(m);
  std::array<double, 5> out;
  for (int i = 0; i < 5; ++i) out[i] = es.eigenvalues()[i];
  return out;
}

SymbolMatrix principal_symbol(const MetricModel& g, const AttenuationModel& a, Vec2 x, Vec2 xi,
                              double radius, double dt) {
  if (xi.x == 0 && xi.y == 0) throw ConfigError("principal symbol needs a nonzero covector");
  SymbolMatrix S;
  S.x = x;
  S.xi = xi;
  Sym2 gm = g.metric(x);
  Sym2 gi = gm.inverse();
  S.xi_norm = std::sqrt(quad(gi, xi, xi));
  // contravariant unit direction annihilating xi
  Vec2 w = g.gnormalize(x, {-xi.y, xi.x});
  AttenuationModel atw = a.real_scaled(-2.0);
  for (int s = 0; s < 2; ++s) {
    Vec2 om = (s == 0) ? w : -1.0 * w;
    double U = a.is_zero() ? 1.0 : integrating_factor(g, atw, x, om, radius, dt).real();
    Vec2 ol = mul(gm, om);  // lowered
    double mv[5] = {om.x * om.x, 2.0 * om.x * om.y, om.y * om.y, om.x, om.y};
    double nv[5] = {ol.x * ol.x, ol.x * ol.y, ol.y * ol.y, ol.x, ol.y};
    double wgt = 2.0 * M_PI * U / S.xi_norm;
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) {
        S.Q[i][j] += wgt * mv[i] * mv[j];
        S.N[i][j] += wgt * nv[i] * mv[j];
      }
  }
  return S;
}

std::array<double, 2> restricted_symbol_eigs(const MetricModel& g, const SymbolMatrix& S) {
  Sym2 gm = g.metric(S.x);
  Vec2 w = g.gnormalize(S.x, {-S.xi.y, S.xi.x});
  Vec2 ol = mul(gm, w);
  // orthonormal basis of {f . xi = 0, alpha . xi = 0}
  std::array<cplx, 5> e1{ol.x * ol.x, ol.x * ol.y, ol.y * ol.y, 0, 0};
  std::array<cplx, 5> e2{0, 0, 0, ol.x, ol.y};
  double r11 = S.qform(e1, e1).real();
  double r22 = S.qform(e2, e2).real();
  cplx r12 = S.qform(e1, e2);
  double mid = 0.5 * (r11 + r22);
  double rad = std::sqrt(0.25 * (r11 - r22) * (r11 - r22) + std::norm(r12));
  return {mid - rad, mid + rad};
}

EllipticityReport ellipticity_check(const MetricModel& g, const AttenuationModel& a, double radius,
                                    int n_samples, uint64_t seed, double dt) {
  EllipticityReport rep;
  rep.n_samples = n_samples;
  rep.min_restricted_eig = std::numeric_limits<double>::infinity();
  Rng rng{seed};
  for (int k = 0; k < n_samples; ++k) {
    double r = 0.95 * std::sqrt(rng.uniform());
    double ph = rng.uniform(0, 2 * M_PI);
    Vec2 x{r * std::cos(ph), r * std::sin(ph)};
    double xa = rng.uniform(0, 2 * M_PI);
    Vec2 xi{std::cos(xa), std::sin(xa)};
    // normalize |xi|_g = 1 so eigenvalues are comparable across samples
    Sym2 gi = g.metric(x).inverse();
    xi = (1.0 / std::sqrt(quad(gi, xi, xi))) * xi;
    SymbolMatrix S = principal_symbol(g, a, x, xi, radius, dt);
    double lo = restricted_symbol_eigs(g, S)[0];
    if (lo < rep.min_restricted_eig) {
      rep.min_restricted_eig = lo;
      rep.argmin_x = x;
      rep.argmin_xi = xi;
    }
  }
  return rep;
}

double symbol_oscillatory_defect(const MetricModel& g, const AttenuationModel& a,
                                 const DiskMesh& mesh, Vec2 x, Vec2 xi, double lambda,
                                 const std::array<cplx, 5>& P0, int n_dir, double dt) {
  if (lambda * mesh.target_h > 1.0)
    throw NumericalError("oscillation frequency unresolvable on this mesh");
  PairField G(mesh);
  for (int n = 0; n < mesh.n_nodes(); ++n) {
    Vec2 d = mesh.xy[n] - x;
    double chi = quintic_cutoff(norm(d), 0.15, 0.45);
    if (chi == 0) continue;
    cplx ph = std::exp(cplx{0, lambda * dot(d, xi)});
    for (int c = 0; c < 5; ++c) G.at(n, c) = chi * ph * P0[c];
  }
  auto out = normal_apply_direct_at(g, a, G, x, mesh.domain.r_outer, n_dir, dt);
  SymbolMatrix S = principal_symbol(g, a, x, xi, mesh.domain.r_outer, dt);
  auto sp = S.apply(P0);  // chi(x) = 1
  Sym2 gi = g.metric(x).inverse();
  std::array<cplx, 5> diff;
  for (int c = 0; c < 5; ++c) diff[c] = lambda * out[c] - sp[c];
  double num = std::sqrt(std::abs(pair_dot(gi, diff, diff).real()));
  double den = std::sqrt(std::abs(pair_dot(gi, sp, sp).real()));
  return num / den;
}

}  // namespace atx
