/// @file geom.hpp
/// @brief Points and elementary vector geometry. Points always store three
/// coordinates; planar data keeps z = 0 and the chain types carry the ambient
/// dimension (2 or 3).
#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace cf {

/// Global geometric tolerance at unit-disk scale. Two points are the same
/// geometric point iff their Euclidean distance is <= eps_geom(). Initialized
/// to 1e-9, overridable once at startup via the CHAINFORGE_EPS_GEOM
/// environment variable or set_eps_geom().
double eps_geom();
void set_eps_geom(double e);

struct Pt {
  std::array<double, 3> c{0.0, 0.0, 0.0};

  Pt() = default;
  Pt(double x, double y) : c{x, y, 0.0} {}
  Pt(double x, double y, double z) : c{x, y, z} {}

  double x() const { return c[0]; }
  double y() const { return c[1]; }
  double z() const { return c[2]; }
  double& operator[](std::size_t i) { return c[i]; }
  double operator[](std::size_t i) const { return c[i]; }
};

inline Pt operator+(const Pt& a, const Pt& b) {
  return {a.c[0] + b.c[0], a.c[1] + b.c[1], a.c[2] + b.c[2]};
}
inline Pt operator-(const Pt& a, const Pt& b) {
  return {a.c[0] - b.c[0], a.c[1] - b.c[1], a.c[2] - b.c[2]};
}
inline Pt operator*(double s, const Pt& a) {
  return {s * a.c[0], s * a.c[1], s * a.c[2]};
}
inline double dot(const Pt& a, const Pt& b) {
  return a.c[0] * b.c[0] + a.c[1] * b.c[1] + a.c[2] * b.c[2];
}
inline Pt cross(const Pt& a, const Pt& b) {
  return {a.c[1] * b.c[2] - a.c[2] * b.c[1],
          a.c[2] * b.c[0] - a.c[0] * b.c[2],
          a.c[0] * b.c[1] - a.c[1] * b.c[0]};
}
inline double norm2(const Pt& a) { return dot(a, a); }
inline double norm(const Pt& a) { return std::sqrt(norm2(a)); }
inline double dist(const Pt& a, const Pt& b) { return norm(a - b); }
inline Pt lerp(const Pt& a, const Pt& b, double t) {
  return {a.c[0] + t * (b.c[0] - a.c[0]), a.c[1] + t * (b.c[1] - a.c[1]),
          a.c[2] + t * (b.c[2] - a.c[2])};
}

Pt normalized(const Pt& a);

/// Strict lexicographic order on raw coordinates; the deterministic canonical
/// order used by all chain types.
inline bool lex_less(const Pt& a, const Pt& b) {
  if (a.c[0] != b.c[0]) return a.c[0] < b.c[0];
  if (a.c[1] != b.c[1]) return a.c[1] < b.c[1];
  return a.c[2] < b.c[2];
}

/// Geometric identity: Euclidean distance <= eps_geom().
inline bool pt_eq(const Pt& a, const Pt& b) {
  double e = eps_geom();
  return norm2(a - b) <= e * e;
}

/// Distance from p to the closed segment [a,b].
double dist_point_segment(const Pt& p, const Pt& a, const Pt& b);

/// Parameter t in [0,1] of the point of [a,b] closest to p.
double closest_param_on_segment(const Pt& p, const Pt& a, const Pt& b);

/// Angle in [0,pi] between unit-scale vectors (inputs are normalized first).
double angle_between(const Pt& a, const Pt& b);

}  // namespace cf
