#pragma once
#include <vector>

#include "atx/geometry.hpp"
#include "atx/types.hpp"

namespace atx {

// Inward-pointing boundary directions of the disk of `radius`, indexed by the
// boundary angle beta (uniform, periodic) and the fan angle theta measured
// from the inward g-unit normal (uniform on (-pi/2+margin, pi/2-margin)).
struct FanBeamGrid {
  double radius = 1.0;
  int n_beta = 180;
  int n_theta = 90;
  double theta_margin = 0.05;

  double beta(int i) const { return 2.0 * M_PI * i / n_beta; }
  double theta(int j) const {
    double lo = -M_PI / 2 + theta_margin, hi = M_PI / 2 - theta_margin;
    return lo + (hi - lo) * j / (n_theta - 1);
  }
  int index(int i, int j) const { return i * n_theta + j; }
  int size() const { return n_beta * n_theta; }

  // boundary point and g-unit inward direction for ray (i, j)
  void ray(const MetricModel& g, int i, int j, Vec2& x, Vec2& v) const;
  // g-orthonormal inward frame (nu, that) at boundary angle beta
  void boundary_frame(const MetricModel& g, double beta_angle, Vec2& nu, Vec2& that) const;

  // L2_mu quadrature weight: cos(theta) * |c'(beta)|_g * dbeta * w_theta,
  // trapezoid in theta, periodic rectangle in beta.
  double mu_weight(const MetricModel& g, int i, int j) const;

  // (beta, theta) coordinates of an arbitrary inward boundary vector; used to
  // look up data at geodesic footpoints.
  struct BT {
    double beta, theta;
  };
  BT coords_of(const MetricModel& g, Vec2 x, Vec2 v) const;
};

// Complex data samples over a FanBeamGrid.
struct FanBeamData {
  FanBeamGrid grid;
  std::vector<cplx> values;

  explicit FanBeamData(const FanBeamGrid& g) : grid(g), values(g.size(), cplx{0, 0}) {}
  cplx& at(int i, int j) { return values[grid.index(i, j)]; }
  cplx at(int i, int j) const { return values[grid.index(i, j)]; }

  // bilinear in (beta, theta), periodic in beta; zero outside the theta range
  cplx sample(double beta, double theta, bool* clipped = nullptr) const;

  void axpy(cplx alpha, const FanBeamData& other) {
    for (size_t k = 0; k < values.size(); ++k) values[k] += alpha * other.values[k];
  }
};

// weighted data norms and inner product
cplx data_dot(const MetricModel& g, const FanBeamData& A, const FanBeamData& B);
double data_norm(const MetricModel& g, const FanBeamData& A);

}  // namespace atx
