#pragma once
#include <array>
#include <vector>

#include "atx/types.hpp"

namespace atx {

// Gaussian profile A * exp(-|x-c|^2 / w) with closed-form derivatives.
struct GaussBump {
  Vec2 center{0, 0};
  double amplitude = 0;
  double width = 0.2;
  double value(Vec2 p) const {
    if (amplitude == 0) return 0;
    Vec2 d = p - center;
    return amplitude * std::exp(-dot(d, d) / width);
  }
  Vec2 grad(Vec2 p) const {
    if (amplitude == 0) return {0, 0};
    Vec2 d = p - center;
    return (-2.0 / width * value(p)) * d;
  }
  Sym2 hess(Vec2 p) const {
    if (amplitude == 0) return {0, 0, 0};
    Vec2 d = p - center;
    double v = value(p);
    double c = -2.0 / width;
    return {v * (c + c * c * d.x * d.x), v * c * c * d.x * d.y, v * (c + c * c * d.y * d.y)};
  }
  // value, gradient and Hessian from a single exponential
  void eval(Vec2 p, double& v, Vec2& dv, Sym2& hv) const {
    if (amplitude == 0) {
      v = 0;
      dv = {0, 0};
      hv = {0, 0, 0};
      return;
    }
    Vec2 d = p - center;
    v = amplitude * std::exp(-dot(d, d) / width);
    double c = -2.0 / width;
    dv = (c * v) * d;
    hv = {v * (c + c * c * d.x * d.x), v * c * c * d.x * d.y, v * (c + c * c * d.y * d.y)};
  }
};

struct ComplexBump {
  GaussBump shape;  // shape.amplitude carries the profile scale
  cplx scale{0, 0};
};

enum class MetricFamily { Euclidean, ConformalBump, GenericAnalytic };

// Analytic metric g on R^2 with closed-form first and second derivatives.
//   Euclidean:       g = I
//   ConformalBump:   g = e^{2 lam} I,                  lam = bump
//   GenericAnalytic: g = e^{2 lam} (I + beta s s^T),   beta = bump, s fixed unit
// conformal_extra adds to lam in every family; it is the perturbation hook.
struct MetricModel {
  MetricFamily family = MetricFamily::Euclidean;
  GaussBump bump;
  GaussBump conformal_extra;
  Vec2 shear_dir{0.8, 0.6};

  Sym2 metric(Vec2 p) const;
  std::array<Sym2, 2> dmetric(Vec2 p) const;                 // [k] = d_k g
  std::array<std::array<Sym2, 2>, 2> d2metric(Vec2 p) const; // [l][k] = d_l d_k g
  std::array<Sym2, 2> christoffel(Vec2 p) const;             // [k](i,j) = Gamma^k_ij
  double gauss_curvature(Vec2 p) const;

  double gnorm(Vec2 p, Vec2 v) const { return std::sqrt(quad(metric(p), v, v)); }
  Vec2 gnormalize(Vec2 p, Vec2 v) const { return (1.0 / gnorm(p, v)) * v; }
  // g-orthonormal frame (e1,e2) at p, positively oriented.
  std::array<Vec2, 2> frame(Vec2 p) const;
};

// Complex attenuation a(x) = constant + sum of complex Gaussian bumps.
struct AttenuationModel {
  cplx constant{0, 0};
  std::vector<ComplexBump> bumps;
  cplx value(Vec2 p) const {
    cplx a = constant;
    for (const auto& b : bumps) a += b.scale * b.shape.value(p);
    return a;
  }
  AttenuationModel conjugated() const {  // x -> conj(a(x))
    AttenuationModel m;
    m.constant = std::conj(constant);
    for (const auto& b : bumps) m.bumps.push_back({b.shape, std::conj(b.scale)});
    return m;
  }
  AttenuationModel negated() const {
    AttenuationModel m;
    m.constant = -constant;
    for (const auto& b : bumps) m.bumps.push_back({b.shape, -b.scale});
    return m;
  }
  AttenuationModel real_scaled(double s) const {  // x -> s * Re a(x)
    AttenuationModel m;
    m.constant = {s * constant.real(), 0};
    for (const auto& b : bumps) m.bumps.push_back({b.shape, {s * b.scale.real(), 0}});
    return m;
  }
  bool is_zero() const;
};

// C^2 cutoff: 1 for r <= r0, 0 for r >= r1, quintic smoothstep between.
inline double quintic_cutoff(double r, double r0, double r1) {
  if (r <= r0) return 1.0;
  if (r >= r1) return 0.0;
  double t = (r - r0) / (r1 - r0);
  return 1.0 - t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
}

// Nested disks: the working manifold (r_inner), the recovery annulus edge
// (r_mid) and the extended manifold (r_outer).
struct DiskDomain {
  double r_inner = 1.0;
  double r_mid = 1.1;
  double r_outer = 1.2;
  void validate() const {
    if (!(0 < r_inner && r_inner < r_mid && r_mid < r_outer))
      throw ConfigError("disk radii must satisfy 0 < inner < mid < outer");
  }
};

struct GeodesicSample {
  double t;
  Vec2 x;
  Vec2 v;
};

struct Geodesic {
  std::vector<GeodesicSample> samples;  // uniform dt, plus the exit sample
  double exit_time = 0;
  bool trapped = false;
};

// Unit-speed geodesic from (x0, v0) until |x| crosses `radius`. v0 is
// g-normalized internally. Fixed-step RK4; the final partial step is bisected
// so the exit point sits on the circle to 1e-10.
Geodesic trace_geodesic(const MetricModel& g, Vec2 x0, Vec2 v0, double radius, double dt,
                        int max_steps = 200000);

// Exit time tau(x, v) of the forward geodesic through radius `radius`.
double exit_time(const MetricModel& g, Vec2 x, Vec2 v, double radius, double dt);

struct SimplicityReport {
  bool boundary_convex = false;
  bool conjugate_point_free = false;
  double min_jacobi = 0;             // min |J| past the initial fifth of each geodesic
  double min_boundary_convexity = 0; // min of <nabla_T T, nu_in>_g over boundary samples
  bool simple() const { return boundary_convex && conjugate_point_free; }
};

// Convexity of the circle `radius` plus a Jacobi-field sweep over n_geodesics
// fan rays. Trapped rays count as failures of conjugate_point_free.
SimplicityReport simplicity_check(const MetricModel& g, double radius, double dt,
                                  int n_geodesics = 64);

// Boundary normal coordinates (s, d): s = g-arclength along the circle
// `radius`, d = g-distance travelled inward along the normal geodesic.
// Valid for 0 <= d <= depth (the collar).
class BoundaryCollar {
 public:
  BoundaryCollar(const MetricModel& g, double radius, double depth, double dt);

  double boundary_length() const { return length_; }
  double depth() const { return depth_; }

  Vec2 point(double s, double d) const;
  // Coordinate frame: column 0 = dx/ds, column 1 = dx/dd (cartesian components).
  std::array<Vec2, 2> chart_frame(double s, double d) const;
  // Pulled-back metric components [g_ss, g_sd, g_dd] at (s, d).
  std::array<double, 3> chart_metric(double s, double d) const;
  // Gamma^s_{s d} of the chart; the only Christoffel entering the tangential
  // transport equation in these coordinates.
  double gamma_tan(double s, double d) const;

  struct Coords {
    double s;
    double d;
    bool ok;
  };
  // Newton inversion; ok=false outside d in [dmin, depth]. Negative dmin
  // admits points just outside the circle (the chart extends smoothly).
  Coords locate(Vec2 x, double dmin = 0) const;

  double theta_of_s(double s) const;
  double s_of_theta(double theta) const;
  // inward g-unit normal at boundary angle theta
  Vec2 inward_normal(double theta) const;
  Vec2 boundary_point(double theta) const { return {radius_ * std::cos(theta), radius_ * std::sin(theta)}; }

 private:
  const MetricModel* g_;
  double radius_, depth_, dt_, length_;
  std::vector<double> cum_;  // cumulative arclength at uniform theta samples
  int ntab_;
};

}  // namespace atx
