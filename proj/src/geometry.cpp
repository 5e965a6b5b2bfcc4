#include "atx/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace atx {

namespace {

struct ConformalParts {
  double lam, beta;
  Vec2 dlam, dbeta;
  Sym2 hlam, hbeta;
};

ConformalParts parts(const MetricModel& m, Vec2 p) {
  ConformalParts c{};
  if (m.family == MetricFamily::ConformalBump) {
    m.bump.eval(p, c.lam, c.dlam, c.hlam);
  } else if (m.family == MetricFamily::GenericAnalytic) {
    m.bump.eval(p, c.beta, c.dbeta, c.hbeta);
  }
  if (m.conformal_extra.amplitude != 0) {
    double v;
    Vec2 dv;
    Sym2 hv;
    m.conformal_extra.eval(p, v, dv, hv);
    c.lam += v;
    c.dlam = c.dlam + dv;
    c.hlam = c.hlam + hv;
  }
  return c;
}

}  // namespace

Sym2 MetricModel::metric(Vec2 p) const {
  ConformalParts c = parts(*this, p);
  double e = std::exp(2.0 * c.lam);
  Vec2 s = shear_dir;
  return {e * (1.0 + c.beta * s.x * s.x), e * (c.beta * s.x * s.y), e * (1.0 + c.beta * s.y * s.y)};
}

std::array<Sym2, 2> MetricModel::dmetric(Vec2 p) const {
  ConformalParts c = parts(*this, p);
  double e = std::exp(2.0 * c.lam);
  Vec2 s = shear_dir;
  Sym2 B{1.0 + c.beta * s.x * s.x, c.beta * s.x * s.y, 1.0 + c.beta * s.y * s.y};
  Sym2 S{s.x * s.x, s.x * s.y, s.y * s.y};
  std::array<Sym2, 2> d;
  for (int k = 0; k < 2; ++k)
    d[k] = e * ((2.0 * c.dlam[k]) * B + c.dbeta[k] * S);
  return d;
}

std::array<std::array<Sym2, 2>, 2> MetricModel::d2metric(Vec2 p) const {
  ConformalParts c = parts(*this, p);
  double e = std::exp(2.0 * c.lam);
  Vec2 s = shear_dir;
  Sym2 B{1.0 + c.beta * s.x * s.x, c.beta * s.x * s.y, 1.0 + c.beta * s.y * s.y};
  Sym2 S{s.x * s.x, s.x * s.y, s.y * s.y};
  std::array<std::array<Sym2, 2>, 2> d2;
  for (int l = 0; l < 2; ++l)
    for (int k = 0; k < 2; ++k) {
      double cll = 4.0 * c.dlam[l] * c.dlam[k] + 2.0 * c.hlam(l, k);
      double cross = 2.0 * (c.dlam[k] * c.dbeta[l] + c.dlam[l] * c.dbeta[k]);
      d2[l][k] = e * (cll * B + (cross + c.hbeta(l, k)) * S);
    }
  return d2;
}

std::array<Sym2, 2> MetricModel::christoffel(Vec2 p) const {
  // g = e^{2 lam} B with B = I + beta s s^T; the conformal factor cancels
  // between g^{-1} and dg, so no exponential is evaluated here.
  ConformalParts c = parts(*this, p);
  Vec2 s = shear_dir;
  Sym2 B{1.0 + c.beta * s.x * s.x, c.beta * s.x * s.y, 1.0 + c.beta * s.y * s.y};
  Sym2 S{s.x * s.x, s.x * s.y, s.y * s.y};
  Sym2 Bi = B.inverse();
  // Gamma_{lij} = (d_i g_jl + d_j g_il - d_l g_ij) / (2 e^{2 lam}), then raise
  // l with e^{2 lam} g^{-1} = B^{-1}.
  auto low = [&](int l, int i, int j) {
    return c.dlam[i] * B(j, l) + c.dlam[j] * B(i, l) - c.dlam[l] * B(i, j) +
           0.5 * (c.dbeta[i] * S(j, l) + c.dbeta[j] * S(i, l) - c.dbeta[l] * S(i, j));
  };
  std::array<Sym2, 2> gam;
  for (int k = 0; k < 2; ++k) {
    double v11 = Bi(k, 0) * low(0, 0, 0) + Bi(k, 1) * low(1, 0, 0);
    double v12 = Bi(k, 0) * low(0, 0, 1) + Bi(k, 1) * low(1, 0, 1);
    double v22 = Bi(k, 0) * low(0, 1, 1) + Bi(k, 1) * low(1, 1, 1);
    gam[k] = {v11, v12, v22};
  }
  return gam;
}

double MetricModel::gauss_curvature(Vec2 p) const {
  Sym2 g = metric(p);
  Sym2 gi = g.inverse();
  auto dg = dmetric(p);
  auto d2g = d2metric(p);
  auto gam = christoffel(p);

  // d_m g^{kl} = -(g^-1 d_m g g^-1)^{kl}
  auto dginv = [&](int m, int k, int l) {
    double v = 0;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) v -= gi(k, a) * dg[m](a, b) * gi(b, l);
    return v;
  };
  // d_m Gamma^k_ij
  auto dgam = [&](int m, int k, int i, int j) {
    double v = 0;
    for (int l = 0; l < 2; ++l) {
      double low = 0.5 * (dg[i](j, l) + dg[j](i, l) - dg[l](i, j));
      double dlow = 0.5 * (d2g[m][i](j, l) + d2g[m][j](i, l) - d2g[m][l](i, j));
      v += dginv(m, k, l) * low + gi(k, l) * dlow;
    }
    return v;
  };
  // R^l_{122} = d_1 Gamma^l_22 - d_2 Gamma^l_12 + Gamma^l_1m Gamma^m_22 - Gamma^l_2m Gamma^m_12
  double K = 0;
  for (int l = 0; l < 2; ++l) {
    double r = dgam(0, l, 1, 1) - dgam(1, l, 0, 1);
    for (int m = 0; m < 2; ++m) r += gam[l](0, m) * gam[m](1, 1) - gam[l](1, m) * gam[m](0, 1);
    K += g(0, l) * r;
  }
  return K / g.det();
}

std::array<Vec2, 2> MetricModel::frame(Vec2 p) const {
  Sym2 g = metric(p);
  Vec2 e1{1, 0};
  e1 = (1.0 / std::sqrt(quad(g, e1, e1))) * e1;
  Vec2 e2{0, 1};
  e2 = e2 - quad(g, e2, e1) * e1;
  e2 = (1.0 / std::sqrt(quad(g, e2, e2))) * e2;
  if (cross(e1, e2) < 0) e2 = -e2;
  return {e1, e2};
}

bool AttenuationModel::is_zero() const {
  if (std::abs(constant) > 0) return false;
  for (const auto& b : bumps)
    if (std::abs(b.scale) * std::abs(b.shape.amplitude) > 0) return false;
  return true;
}

namespace {

struct State {
  Vec2 x, v;
};

inline State geo_rhs(const MetricModel& g, const State& s) {
  auto gam = g.christoffel(s.x);
  Vec2 a{-quad(gam[0], s.v, s.v), -quad(gam[1], s.v, s.v)};
  return {s.v, a};
}

inline State axpy(const State& s, double h, const State& d) {
  return {s.x + h * d.x, s.v + h * d.v};
}

inline State rk4_step(const MetricModel& g, const State& s, double h) {
  State k1 = geo_rhs(g, s);
  State k2 = geo_rhs(g, axpy(s, 0.5 * h, k1));
  State k3 = geo_rhs(g, axpy(s, 0.5 * h, k2));
  State k4 = geo_rhs(g, axpy(s, h, k3));
  State out = s;
  out.x = out.x + (h / 6.0) * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
  out.v = out.v + (h / 6.0) * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v);
  return out;
}

}  // namespace

Geodesic trace_geodesic(const MetricModel& g, Vec2 x0, Vec2 v0, double radius, double dt,
                        int max_steps) {
  Geodesic geo;
  State s{x0, g.gnormalize(x0, v0)};
  double t = 0;
  geo.samples.reserve((size_t)std::min<double>(max_steps, 4.0 * radius / dt) + 2);
  geo.samples.push_back({t, s.x, s.v});
  double r2 = radius * radius;

  // Tangent departure: already on the circle and not moving inward.
  if (dot(s.x, s.x) >= r2 * (1.0 - 1e-14) && dot(s.x, s.v) >= 0) {
    geo.exit_time = 0;
    return geo;
  }

  for (int step = 0; step < max_steps; ++step) {
    State next = rk4_step(g, s, dt);
    if (dot(next.x, next.x) >= r2) {
      // Bisect the step length so the exit lands on the circle.
      double lo = 0, hi = dt;
      State exit_state = next;
      for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (lo + hi);
        State trial = rk4_step(g, s, mid);
        if (dot(trial.x, trial.x) >= r2) {
          hi = mid;
          exit_state = trial;
        } else {
          lo = mid;
        }
        if (std::abs(std::sqrt(dot(exit_state.x, exit_state.x)) - radius) < 1e-12) break;
      }
      geo.exit_time = t + hi;
      geo.samples.push_back({geo.exit_time, exit_state.x, exit_state.v});
      return geo;
    }
    s = next;
    t += dt;
    geo.samples.push_back({t, s.x, s.v});
  }
  geo.trapped = true;
  geo.exit_time = t;
  return geo;
}

double exit_time(const MetricModel& g, Vec2 x, Vec2 v, double radius, double dt) {
  Geodesic geo = trace_geodesic(g, x, v, radius, dt);
  if (geo.trapped) throw NumericalError("trapped geodesic in exit_time");
  return geo.exit_time;
}

SimplicityReport simplicity_check(const MetricModel& g, double radius, double dt,
                                  int n_geodesics) {
  SimplicityReport rep;

  // Boundary convexity: <nabla_T T, nu_in>_g > 0 for the g-unit tangent T.
  double min_conv = 1e300;
  int nb = 256;
  for (int i = 0; i < nb; ++i) {
    double th = 2.0 * M_PI * i / nb;
    Vec2 c{radius * std::cos(th), radius * std::sin(th)};
    Vec2 cp{-radius * std::sin(th), radius * std::cos(th)};
    Vec2 cpp = -c;
    Sym2 gm = g.metric(c);
    auto gam = g.christoffel(c);
    Vec2 acc{cpp.x + quad(gam[0], cp, cp), cpp.y + quad(gam[1], cp, cp)};
    Vec2 nu = -c;
    nu = nu - (quad(gm, nu, cp) / quad(gm, cp, cp)) * cp;
    nu = (1.0 / std::sqrt(quad(gm, nu, nu))) * nu;
    min_conv = std::min(min_conv, quad(gm, acc, nu) / quad(gm, cp, cp));
  }
  rep.min_boundary_convexity = min_conv;
  rep.boundary_convex = min_conv > 0;

  // Jacobi sweep: J'' + K J = 0, J(0)=0, J'(0)=1, integrated with the ray.
  rep.conjugate_point_free = true;
  double min_j = 1e300;
  const double golden = 0.6180339887498949;
  for (int i = 0; i < n_geodesics; ++i) {
    double beta = 2.0 * M_PI * i / n_geodesics;
    double u = std::fmod(golden * i + 0.12, 1.0);
    double theta = (-M_PI / 2 + 0.05) + (M_PI - 0.1) * u;
    Vec2 x{radius * std::cos(beta), radius * std::sin(beta)};
    Sym2 gm = g.metric(x);
    Vec2 tan{-std::sin(beta), std::cos(beta)};
    Vec2 nu = -1.0 * x;
    nu = nu - (quad(gm, nu, tan) / quad(gm, tan, tan)) * tan;
    nu = (1.0 / std::sqrt(quad(gm, nu, nu))) * nu;
    Vec2 tt = tan;
    tt = tt - (quad(gm, tt, nu) / quad(gm, nu, nu)) * nu;
    tt = (1.0 / std::sqrt(quad(gm, tt, tt))) * tt;
    Vec2 v = std::cos(theta) * nu + std::sin(theta) * tt;

    // 6-dim RK4: (x, v, J, J').
    struct JS {
      State s;
      double J, Jp;
    };
    auto rhs = [&](const JS& y) {
      State d = geo_rhs(g, y.s);
      double K = g.gauss_curvature(y.s.x);
      return JS{d, y.Jp, -K * y.J};
    };
    auto step = [&](JS y, double h) {
      JS k1 = rhs(y);
      JS y2{axpy(y.s, 0.5 * h, k1.s), y.J + 0.5 * h * k1.J, y.Jp + 0.5 * h * k1.Jp};
      JS k2 = rhs(y2);
      JS y3{axpy(y.s, 0.5 * h, k2.s), y.J + 0.5 * h * k2.J, y.Jp + 0.5 * h * k2.Jp};
      JS k3 = rhs(y3);
      JS y4{axpy(y.s, h, k3.s), y.J + h * k3.J, y.Jp + h * k3.Jp};
      JS k4 = rhs(y4);
      JS out;
      out.s.x = y.s.x + (h / 6.0) * (k1.s.x + 2.0 * k2.s.x + 2.0 * k3.s.x + k4.s.x);
      out.s.v = y.s.v + (h / 6.0) * (k1.s.v + 2.0 * k2.s.v + 2.0 * k3.s.v + k4.s.v);
      out.J = y.J + (h / 6.0) * (k1.J + 2.0 * k2.J + 2.0 * k3.J + k4.J);
      out.Jp = y.Jp + (h / 6.0) * (k1.Jp + 2.0 * k2.Jp + 2.0 * k3.Jp + k4.Jp);
      return out;
    };

    JS y{{x, g.gnormalize(x, v)}, 0.0, 1.0};
    if (dot(y.s.x, y.s.v) >= 0) continue;
    double r2 = radius * radius;
    std::vector<std::pair<double, double>> hist;  // (t, J)
    double t = 0;
    bool exited = false;
    for (int k = 0; k < 60000; ++k) {
      JS next = step(y, dt);
      t += dt;
      hist.push_back({t, next.J});
      y = next;
      if (dot(y.s.x, y.s.x) >= r2) {
        exited = true;
        break;
      }
    }
    if (!exited) {
      rep.conjugate_point_free = false;
      continue;
    }
    double texit = t;
    for (auto [tt2, J] : hist) {
      if (J <= 0) rep.conjugate_point_free = false;
      if (tt2 >= 0.2 * texit) min_j = std::min(min_j, std::abs(J));
    }
  }
  rep.min_jacobi = min_j;
  return rep;
}

// ---------------------------------------------------------------------------

BoundaryCollar::BoundaryCollar(const MetricModel& g, double radius, double depth, double dt)
    : g_(&g), radius_(radius), depth_(depth), dt_(dt), ntab_(4096) {
  cum_.resize(ntab_ + 1);
  cum_[0] = 0;
  double dth = 2.0 * M_PI / ntab_;
  auto speed = [&](double th) {
    Vec2 c{radius_ * std::cos(th), radius_ * std::sin(th)};
    Vec2 cp{-radius_ * std::sin(th), radius_ * std::cos(th)};
    return std::sqrt(quad(g_->metric(c), cp, cp));
  };
  for (int i = 0; i < ntab_; ++i) {
    double a = i * dth, m = (i + 0.5) * dth, b = (i + 1) * dth;
    cum_[i + 1] = cum_[i] + dth / 6.0 * (speed(a) + 4.0 * speed(m) + speed(b));
  }
  length_ = cum_[ntab_];
}

double BoundaryCollar::s_of_theta(double theta) const {
  double th = std::fmod(theta, 2.0 * M_PI);
  if (th < 0) th += 2.0 * M_PI;
  double u = th / (2.0 * M_PI) * ntab_;
  int i = std::min((int)u, ntab_ - 1);
  double f = u - i;
  return cum_[i] + f * (cum_[i + 1] - cum_[i]);
}

double BoundaryCollar::theta_of_s(double s) const {
  double sm = std::fmod(s, length_);
  if (sm < 0) sm += length_;
  auto it = std::upper_bound(cum_.begin(), cum_.end(), sm);
  int i = std::max(0, (int)(it - cum_.begin()) - 1);
  i = std::min(i, ntab_ - 1);
  double f = (sm - cum_[i]) / (cum_[i + 1] - cum_[i]);
  return (i + f) * 2.0 * M_PI / ntab_;
}

Vec2 BoundaryCollar::inward_normal(double theta) const {
  Vec2 c{radius_ * std::cos(theta), radius_ * std::sin(theta)};
  Vec2 cp{-std::sin(theta), std::cos(theta)};
  Sym2 gm = g_->metric(c);
  Vec2 nu = -1.0 * c;
  nu = nu - (quad(gm, nu, cp) / quad(gm, cp, cp)) * cp;
  return (1.0 / std::sqrt(quad(gm, nu, nu))) * nu;
}

namespace {
// Integrate the normal geodesic for exactly time d (backwards when d < 0)
// with step size <= dt.
State normal_ray(const MetricModel& g, Vec2 x0, Vec2 v0, double d, double dt) {
  State s{x0, v0};
  if (d == 0) return s;
  int n = std::max(1, (int)std::ceil(std::abs(d) / dt));
  double h = d / n;
  for (int i = 0; i < n; ++i) s = rk4_step(g, s, h);
  return s;
}
}  // namespace

Vec2 BoundaryCollar::point(double s, double d) const {
  double th = theta_of_s(s);
  return normal_ray(*g_, boundary_point(th), inward_normal(th), d, dt_).x;
}

std::array<Vec2, 2> BoundaryCollar::chart_frame(double s, double d) const {
  double hs = 1e-6 * std::max(1.0, length_);
  Vec2 xp = point(s + hs, d), xm = point(s - hs, d);
  Vec2 es = (1.0 / (2.0 * hs)) * (xp - xm);
  double th = theta_of_s(s);
  State end = normal_ray(*g_, boundary_point(th), inward_normal(th), d, dt_);
  return {es, end.v};  // dx/dd is the exact ray velocity
}

std::array<double, 3> BoundaryCollar::chart_metric(double s, double d) const {
  auto fr = chart_frame(s, d);
  Sym2 gm = g_->metric(point(s, d));
  return {quad(gm, fr[0], fr[0]), quad(gm, fr[0], fr[1]), quad(gm, fr[1], fr[1])};
}

double BoundaryCollar::gamma_tan(double s, double d) const {
  // Gamma^s_{sd} = d_d g_ss / (2 g_ss) in the chart (g_sd = 0, g_dd = 1).
  double h = 1e-5;
  double gss = chart_metric(s, d)[0];
  double deriv;
  if (d >= h) {
    deriv = (chart_metric(s, d + h)[0] - chart_metric(s, d - h)[0]) / (2 * h);
  } else {
    // one-sided second-order difference at the boundary edge
    double g0 = gss, g1 = chart_metric(s, d + h)[0], g2 = chart_metric(s, d + 2 * h)[0];
    deriv = (-3 * g0 + 4 * g1 - g2) / (2 * h);
  }
  return deriv / (2.0 * gss);
}

BoundaryCollar::Coords BoundaryCollar::locate(Vec2 x, double dmin) const {
  double th = std::atan2(x.y, x.x);
  Vec2 rhat = (1.0 / std::max(norm(x), 1e-12)) * x;
  double grr = std::sqrt(quad(g_->metric(x), rhat, rhat));
  double d = (radius_ - norm(x)) * grr;
  Coords out{0, 0, false};
  for (int it = 0; it < 40; ++it) {
    // negative depths trace the normal geodesic backwards, outside the circle
    State end = normal_ray(*g_, boundary_point(th), inward_normal(th), d, dt_);
    Vec2 r = end.x - x;
    if (norm(r) < 1e-11) {
      if (d < dmin - 1e-9 || d > depth_ * (1 + 1e-9)) return out;
      out = {s_of_theta(th), d, true};
      return out;
    }
    double hth = 1e-7;
    State endp = normal_ray(*g_, boundary_point(th + hth), inward_normal(th + hth), d, dt_);
    Vec2 jth = (1.0 / hth) * (endp.x - end.x);
    Vec2 jd = end.v;
    // solve [jth jd] * [dth, dd]^T = -r
    double det = jth.x * jd.y - jd.x * jth.y;
    if (std::abs(det) < 1e-14) return out;
    double dth = (-r.x * jd.y + jd.x * r.y) / det;
    double dd = (-jth.x * r.y + r.x * jth.y) / det;
    dth = std::clamp(dth, -0.5, 0.5);
    dd = std::clamp(dd, -0.1, 0.1);
    th += dth;
    d += dd;
    if (d > depth_ + 0.1 || d < dmin - 0.05) return out;
  }
  return out;
}

}  // namespace atx
