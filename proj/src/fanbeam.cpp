#include "atx/fanbeam.hpp"

#include <cmath>

namespace atx {

void FanBeamGrid::boundary_frame(const MetricModel& g, double beta_angle, Vec2& nu,
                                 Vec2& that) const {
  Vec2 c{radius * std::cos(beta_angle), radius * std::sin(beta_angle)};
  Vec2 tang{-std::sin(beta_angle), std::cos(beta_angle)};
  Sym2 gm = g.metric(c);
  nu = -1.0 * c;
  nu = nu - (quad(gm, nu, tang) / quad(gm, tang, tang)) * tang;
  nu = (1.0 / std::sqrt(quad(gm, nu, nu))) * nu;
  that = tang;
  that = that - quad(gm, that, nu) * nu;  // nu is g-unit
  that = (1.0 / std::sqrt(quad(gm, that, that))) * that;
}

void FanBeamGrid::ray(const MetricModel& g, int i, int j, Vec2& x, Vec2& v) const {
  double b = beta(i);
  x = {radius * std::cos(b), radius * std::sin(b)};
  Vec2 nu, that;
  boundary_frame(g, b, nu, that);
  double t = theta(j);
  v = std::cos(t) * nu + std::sin(t) * that;
}

double FanBeamGrid::mu_weight(const MetricModel& g, int i, int j) const {
  double b = beta(i);
  Vec2 c{radius * std::cos(b), radius * std::sin(b)};
  Vec2 cp{-radius * std::sin(b), radius * std::cos(b)};
  double jac = std::sqrt(quad(g.metric(c), cp, cp));  // boundary arclength / dbeta
  double dbeta = 2.0 * M_PI / n_beta;
  double dtheta = (M_PI - 2.0 * theta_margin) / (n_theta - 1);
  double wt = (j == 0 || j == n_theta - 1) ? 0.5 * dtheta : dtheta;
  return std::cos(theta(j)) * jac * dbeta * wt;
}

FanBeamGrid::BT FanBeamGrid::coords_of(const MetricModel& g, Vec2 x, Vec2 v) const {
  double b = std::atan2(x.y, x.x);
  if (b < 0) b += 2.0 * M_PI;
  Vec2 nu, that;
  boundary_frame(g, b, nu, that);
  Sym2 gm = g.metric(x);
  double cn = quad(gm, v, nu), ct = quad(gm, v, that);
  return {b, std::atan2(ct, cn)};
}

cplx FanBeamData::sample(double beta, double theta, bool* clipped) const {
  if (clipped) *clipped = false;
  double lo = -M_PI / 2 + grid.theta_margin, hi = M_PI / 2 - grid.theta_margin;
  if (theta < lo || theta > hi) {
    if (clipped) *clipped = true;
    return {0, 0};
  }
  double bu = beta / (2.0 * M_PI / grid.n_beta);
  int i0 = (int)std::floor(bu);
  double fb = bu - i0;
  i0 = ((i0 % grid.n_beta) + grid.n_beta) % grid.n_beta;
  int i1 = (i0 + 1) % grid.n_beta;
  double tu = (theta - lo) / ((hi - lo) / (grid.n_theta - 1));
  int j0 = std::min((int)std::floor(tu), grid.n_theta - 2);
  double ft = tu - j0;
  cplx v00 = at(i0, j0), v01 = at(i0, j0 + 1), v10 = at(i1, j0), v11 = at(i1, j0 + 1);
  return (1 - fb) * ((1 - ft) * v00 + ft * v01) + fb * ((1 - ft) * v10 + ft * v11);
}

cplx data_dot(const MetricModel& g, const FanBeamData& A, const FanBeamData& B) {
  cplx s = 0;
  for (int i = 0; i < A.grid.n_beta; ++i)
    for (int j = 0; j < A.grid.n_theta; ++j)
      s += A.grid.mu_weight(g, i, j) * A.at(i, j) * std::conj(B.at(i, j));
  return s;
}

double data_norm(const MetricModel& g, const FanBeamData& A) {
  return std::sqrt(std::max(0.0, data_dot(g, A, A).real()));
}

}  // namespace atx
