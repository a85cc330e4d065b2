#include "chainforge/geom.hpp"

#include <algorithm>
#include <cstdlib>

namespace cf {

namespace {
double initial_eps() {
  if (const char* env = std::getenv("CHAINFORGE_EPS_GEOM")) {
    char* end = nullptr;
    double v = std::strtod(env, &end);
    if (end != env && v > 0.0 && v < 1.0) return v;
  }
  return 1e-9;
}
double g_eps = initial_eps();
}  // namespace

double eps_geom() { return g_eps; }
void set_eps_geom(double e) { g_eps = e; }

Pt normalized(const Pt& a) {
  double n = norm(a);
  if (n == 0.0) return a;
  return (1.0 / n) * a;
}

double closest_param_on_segment(const Pt& p, const Pt& a, const Pt& b) {
  Pt d = b - a;
  double len2 = norm2(d);
  if (len2 == 0.0) return 0.0;
  return std::clamp(dot(p - a, d) / len2, 0.0, 1.0);
}

double dist_point_segment(const Pt& p, const Pt& a, const Pt& b) {
  return dist(p, lerp(a, b, closest_param_on_segment(p, a, b)));
}

double angle_between(const Pt& a, const Pt& b) {
  double na = norm(a), nb = norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  double c = std::clamp(dot(a, b) / (na * nb), -1.0, 1.0);
  return std::acos(c);
}

}  // namespace cf
