#pragma once
#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

namespace atx {

using cplx = std::complex<double>;

struct Vec2 {
  double x = 0, y = 0;
  double& operator[](int i) { return i == 0 ? x : y; }
  double operator[](int i) const { return i == 0 ? x : y; }
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline Vec2 operator-(Vec2 a) { return {-a.x, -a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 a) { return std::sqrt(dot(a, a)); }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline Vec2 perp(Vec2 a) { return {-a.y, a.x}; }

// Symmetric real 2x2 matrix; used for metrics and one Christoffel layer.
struct Sym2 {
  double a11 = 0, a12 = 0, a22 = 0;
  double operator()(int i, int j) const {
    return (i == 0) ? (j == 0 ? a11 : a12) : (j == 0 ? a12 : a22);
  }
  double det() const { return a11 * a22 - a12 * a12; }
  Sym2 inverse() const {
    double d = det();
    return {a22 / d, -a12 / d, a11 / d};
  }
};

inline Sym2 operator+(Sym2 a, Sym2 b) { return {a.a11 + b.a11, a.a12 + b.a12, a.a22 + b.a22}; }
inline Sym2 operator*(double s, Sym2 a) { return {s * a.a11, s * a.a12, s * a.a22}; }
inline Vec2 mul(const Sym2& m, Vec2 v) {
  return {m.a11 * v.x + m.a12 * v.y, m.a12 * v.x + m.a22 * v.y};
}
inline double quad(const Sym2& m, Vec2 u, Vec2 v) { return dot(u, mul(m, v)); }

// Error hierarchy mirrored by CLI exit codes.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& m) : std::runtime_error(m) {}
};
struct SimplicityError : std::runtime_error {
  explicit SimplicityError(const std::string& m) : std::runtime_error(m) {}
};
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& m) : std::runtime_error(m) {}
};

}  // namespace atx
