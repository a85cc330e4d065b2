/// @file fill.cpp
/// @brief Radial ray fillings in a ball, skeleton deformation, cap avoidance,
/// ball-avoiding hyperplanes, and the parametric filling driver.

#include "chainforge/fill.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "chainforge/errors.hpp"
#include "chainforge/rng.hpp"

namespace cf {
namespace {

constexpr double kPi = 3.14159265358979323846;

// Tolerance for deciding that a coordinate sits on an integer grid wall and
// that a point sits on a sphere, relative to the grid unit.
constexpr double kSnapTol = 1e-7;

std::string key_of(const std::vector<int>& v) { return vertex_key_string(v); }

// ------------------------------------------------------------ line geometry

// Distance from the infinite line {P + t u : t in R} (u unit) to the closed
// segment [a, b]; degenerate segments are treated as points.
double dist_line_segment(const Pt& P, const Pt& u, const Pt& a, const Pt& b) {
  const Pt d = b - a;
  const Pt w = a - P;
  const Pt wp = w - dot(w, u) * u;
  const double dd = norm2(d);
  if (dd < 1e-24) return norm(wp);
  const Pt dp = d - dot(d, u) * u;
  const double dpp = norm2(dp);
  double s = 0.0;
  if (dpp > 1e-18 * dd) s = std::clamp(-dot(wp, dp) / dpp, 0.0, 1.0);
  double best = norm(wp + s * dp);
  // Guard the near-parallel branch by also checking both endpoints.
  best = std::min(best, norm(wp));
  best = std::min(best, norm(wp + dp));
  return best;
}

// Distance between the infinite line {P + t u} and the infinite line through
// a with direction d (not necessarily unit). Near-parallel pairs fall back to
// the perpendicular offset between the lines.
double dist_line_line(const Pt& P, const Pt& u, const Pt& a, const Pt& d) {
  const Pt n = cross(u, d);
  const double nn = norm(n);
  const Pt w = a - P;
  if (nn < 1e-12 * std::max(1.0, norm(d))) {
    return norm(w - dot(w, u) * u);
  }
  return std::abs(dot(w, n)) / nn;
}

// Closest distance between the closed segments [p1,q1] and [p2,q2].
double dist_segment_segment(const Pt& p1, const Pt& q1, const Pt& p2,
                            const Pt& q2) {
  const Pt d1 = q1 - p1;
  const Pt d2 = q2 - p2;
  const Pt r = p1 - p2;
  const double a = norm2(d1), e = norm2(d2), f = dot(d2, r);
  double s = 0.0, t = 0.0;
  if (a < 1e-24 && e < 1e-24) return norm(r);
  if (a < 1e-24) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = dot(d1, r);
    if (e < 1e-24) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = dot(d1, d2);
      const double den = a * e - b * b;
      if (den > 1e-18 * a * e) s = std::clamp((b * f - c * e) / den, 0.0, 1.0);
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  return dist(p1 + s * d1, p2 + t * d2);
}

// --------------------------------------------------- dual-window bookkeeping

// Diameter of {t : dist(P + t u, L) < eps} for the line L carrying a dual
// piece. Point pieces use the chordal formula, segment pieces divide by the
// sine of the crossing angle; a near-parallel approach within eps yields an
// unbounded window.
double window_diameter(const Pt& P, const Pt& u, const Seg& piece,
                       double eps) {
  const Pt d = piece.b - piece.a;
  const double dd = norm(d);
  if (dd < 1e-12) {  // point piece
    const Pt w = piece.a - P;
    const double d0 = norm(w - dot(w, u) * u);
    if (d0 >= eps) return 0.0;
    return 2.0 * std::sqrt(std::max(0.0, eps * eps - d0 * d0));
  }
  const Pt dh = (1.0 / dd) * d;
  const double sin2 = std::max(0.0, 1.0 - dot(u, dh) * dot(u, dh));
  const double dmin = dist_line_line(P, u, piece.a, d);
  if (dmin >= eps) return 0.0;
  if (sin2 < 1e-18) return std::numeric_limits<double>::infinity();
  return 2.0 * std::sqrt((eps * eps - dmin * dmin) / sin2);
}

// Largest admissible eps for one (line, piece) pair so that the window stays
// below diameter 1: point pieces allow sqrt(d0^2 + 1/4), segment pieces
// sqrt(dline^2 + sin^2/4).
double window_eps_budget(const Pt& P, const Pt& u, const Seg& piece) {
  const Pt d = piece.b - piece.a;
  const double dd = norm(d);
  if (dd < 1e-12) {
    const Pt w = piece.a - P;
    const double d0 = norm(w - dot(w, u) * u);
    return std::sqrt(d0 * d0 + 0.25);
  }
  const Pt dh = (1.0 / dd) * d;
  const double sin2 = std::max(0.0, 1.0 - dot(u, dh) * dot(u, dh));
  const double dmin = dist_line_line(P, u, piece.a, d);
  if (sin2 < 1e-18) return dmin;  // parallel: must never be met at all
  return std::sqrt(dmin * dmin + 0.25 * sin2);
}

// Uniform point in the closed ball of radius R (rejection from the cube).
Pt sample_in_ball(Rng& rng, int dim, double R) {
  for (;;) {
    Pt p{rng.uniform(-R, R), rng.uniform(-R, R),
         dim == 3 ? rng.uniform(-R, R) : 0.0};
    if (norm(p) <= R) return p;
  }
}

// In-ball chord of the line P + t*u against the sphere of radius R.
// Returns false when the line misses the sphere or only meets it behind P.
bool chord_through(const Pt& P, const Pt& u, double R, Pt& c0, Pt& c1) {
  const double pu = dot(P, u);
  const double disc = pu * pu - (norm2(P) - R * R);
  if (disc <= 0.0) return false;
  const double s = std::sqrt(disc);
  const double t0 = -pu - s;
  const double t1 = -pu + s;
  if (t1 <= 0.0) return false;
  c0 = P + std::max(t0, 0.0) * u;
  c1 = P + t1 * u;
  return true;
}

// Met/window statistics of one sight chord against every dual piece.  A piece
// counts as met when the chord passes within eps of it; the window is the
// (conservative, full-line) extent of that eps-neighbourhood along the sight
// line.
struct LineCheck {
  int worst_class_count = 0;  // max pieces met within one transversality class
  int total_met = 0;
  double max_window = 0.0;
};

LineCheck check_chord(const Pt& P, const Pt& u, const Pt& c0, const Pt& c1,
                      const GridSkeleton& grid, double eps) {
  LineCheck out;
  std::array<int, 3> per_class{0, 0, 0};
  for (std::size_t i = 0; i < grid.dual_count(); ++i) {
    const Seg& piece = grid.dual_piece(i);
    const double d0 = dist_segment_segment(c0, c1, piece.a, piece.b);
    if (d0 < eps) {
      ++per_class[static_cast<std::size_t>(grid.dual_class(i))];
      ++out.total_met;
      out.max_window = std::max(out.max_window, window_diameter(P, u, piece, eps));
    }
  }
  for (int c : per_class) out.worst_class_count = std::max(out.worst_class_count, c);
  return out;
}

// ------------------------------------------------------------- deform pieces

struct PushPiece {
  Pt a, b;
  int mark_a = -1;  // 2 * input-segment index + side, or -1
  int mark_b = -1;
};

void snap_integer_coords(Pt& p, int dim) {
  for (int i = 0; i < dim; ++i) {
    const double r = std::round(p[i]);
    if (std::abs(p[i] - r) <= kSnapTol) p[i] = r;
  }
}

// Number of axes along which the whole piece lies on one integer wall.
int wall_count(const Pt& a, const Pt& b, int dim) {
  int w = 0;
  for (int i = 0; i < dim; ++i) {
    const double ra = std::round(a[i]);
    if (std::abs(a[i] - ra) <= kSnapTol && std::abs(b[i] - ra) <= kSnapTol) ++w;
  }
  return w;
}

// Scale factor pushing x away from c until it hits the boundary of the box
// {lo[ax] <= y[ax] <= hi[ax] : ax in axes}. Assumes c strictly inside and x
// inside the closed box; the hit coordinate is written exactly.
Pt project_to_box_boundary(const Pt& x, const Pt& c,
                           const std::vector<int>& axes,
                           const std::array<double, 3>& lo,
                           const std::array<double, 3>& hi) {
  double s = std::numeric_limits<double>::infinity();
  int hit_axis = -1;
  double hit_wall = 0.0;
  for (int ax : axes) {
    const double v = x[ax] - c[ax];
    if (std::abs(v) < 1e-14) continue;
    const double wall = v > 0 ? hi[static_cast<std::size_t>(ax)]
                              : lo[static_cast<std::size_t>(ax)];
    const double sa = (wall - c[ax]) / v;
    if (sa < s) {
      s = sa;
      hit_axis = ax;
      hit_wall = wall;
    }
  }
  hard_assert(hit_axis >= 0 && std::isfinite(s),
              "radial push found no boundary wall");
  Pt out = c + s * (x - c);
  out[hit_axis] = hit_wall;
  return out;
}

// Radial image of the segment [p, q] seen from the interior center c, pushed
// onto the boundary of the axis box spanned by `axes` (other coordinates ride
// along unchanged). Returns the full polyline from image(p) to image(q); the
// sweep is monotone because c sits off the carrier line of [p, q].
std::vector<Pt> push_polyline(const Pt& p, const Pt& q, const Pt& c,
                              const std::vector<int>& axes,
                              const std::array<double, 3>& lo,
                              const std::array<double, 3>& hi) {
  const Pt vp = p - c;
  const Pt vq = q - c;
  // Orthonormal frame of the fan plane through c, p, q.
  const Pt e1 = normalized(vp);
  Pt n;
  if (axes.size() == 3) {
    n = normalized(cross(vp, vq));
  } else {
    // Two free axes: the fan plane is the coordinate plane itself.
    Pt axis{0, 0, 0};
    const int fixed = 3 - axes[0] - axes[1];
    axis[fixed] = 1.0;
    n = axis;
    if (dot(cross(vp, vq), n) < 0) n = -1.0 * n;
  }
  const Pt e2 = cross(n, e1);
  const double phi_q = std::atan2(dot(vq, e2), dot(vq, e1));

  // Candidate corner/crossing vertices of the fan-plane section of the box.
  std::vector<Pt> poly;
  if (axes.size() == 2) {
    for (double xa : {lo[static_cast<std::size_t>(axes[0])],
                      hi[static_cast<std::size_t>(axes[0])]}) {
      for (double xb : {lo[static_cast<std::size_t>(axes[1])],
                        hi[static_cast<std::size_t>(axes[1])]}) {
        Pt v = p;  // riding coordinates match the piece
        v[axes[0]] = xa;
        v[axes[1]] = xb;
        poly.push_back(v);
      }
    }
  } else {
    // Intersect the fan plane with the 12 box edges.
    for (int ax = 0; ax < 3; ++ax) {
      const int o1 = (ax + 1) % 3, o2 = (ax + 2) % 3;
      for (double w1 : {lo[static_cast<std::size_t>(o1)], hi[static_cast<std::size_t>(o1)]}) {
        for (double w2 : {lo[static_cast<std::size_t>(o2)], hi[static_cast<std::size_t>(o2)]}) {
          Pt A, B;
          A[ax] = lo[static_cast<std::size_t>(ax)];
          B[ax] = hi[static_cast<std::size_t>(ax)];
          A[o1] = B[o1] = w1;
          A[o2] = B[o2] = w2;
          const double sA = dot(n, A - c), sB = dot(n, B - c);
          if ((sA < 0 && sB < 0) || (sA > 0 && sB > 0)) continue;
          if (std::abs(sA - sB) < 1e-15) continue;
          const double t = sA / (sA - sB);
          if (t < -1e-12 || t > 1.0 + 1e-12) continue;
          Pt v = lerp(A, B, std::clamp(t, 0.0, 1.0));
          v[o1] = w1;  // keep the two edge coordinates exact
          v[o2] = w2;
          bool dup = false;
          for (const Pt& u : poly)
            if (dist(u, v) < 1e-9) dup = true;
          if (!dup) poly.push_back(v);
        }
      }
    }
  }

  struct AngVert {
    double phi;
    Pt v;
  };
  std::vector<AngVert> between;
  for (const Pt& v : poly) {
    const Pt w = v - c;
    const double phi = std::atan2(dot(w, e2), dot(w, e1));
    const double margin = 1e-12;
    if (phi_q > 0 ? (phi > margin && phi < phi_q - margin)
                  : (phi < -margin && phi > phi_q + margin))
      between.push_back({phi, v});
  }
  std::sort(between.begin(), between.end(),
            [&](const AngVert& x, const AngVert& y) {
              return phi_q > 0 ? x.phi < y.phi : x.phi > y.phi;
            });

  std::vector<Pt> out;
  out.push_back(project_to_box_boundary(p, c, axes, lo, hi));
  for (const AngVert& av : between) out.push_back(av.v);
  out.push_back(project_to_box_boundary(q, c, axes, lo, hi));
  return out;
}

// Draw a push center inside the box, rejecting draws that come closer than an
// adaptive clearance to the carrier line of any local piece.
Pt draw_push_center(const Pt& box_center, const std::vector<int>& axes,
                    const std::vector<const PushPiece*>& local,
                    std::uint64_t seed, int* rejected) {
  const double h0 =
      std::min(0.05, 0.1 / std::max<std::size_t>(std::size_t{1}, local.size()));
  Rng rng(seed);
  for (int attempt = 0; attempt < 40; ++attempt) {
    Pt c = box_center;
    for (int ax : axes) c[ax] += rng.uniform(-0.25, 0.25);
    bool ok = true;
    for (const PushPiece* pc : local) {
      Pt d = pc->b - pc->a;
      const double len = norm(d);
      if (len < 1e-12) continue;
      d = (1.0 / len) * d;
      const Pt w = c - pc->a;
      const double off = norm(w - dot(w, d) * d);
      if (off < h0) {
        ok = false;
        break;
      }
    }
    if (ok) return c;
    ++*rejected;
  }
  throw DegenerateCenter("no admissible push center after 40 draws");
}

}  // namespace

// ---------------------------------------------------------------- skeleton

GridSkeleton::GridSkeleton(int dim, int R) : dim_(dim), R_(R) {
  if (dim != 2 && dim != 3) throw BadSpec("grid skeleton needs dimension 2 or 3");
  if (R < 2) throw BadSpec("grid skeleton needs radius at least 2");
  const double Rd = static_cast<double>(R);

  // Length of [a,b] inside the closed ball of radius `rad`.
  auto clipped_length = [](const Pt& a, const Pt& b, double rad) {
    const Pt d = b - a;
    const double A = norm2(d);
    if (A < 1e-24) return 0.0;
    const double B = 2.0 * dot(a, d);
    const double C = norm2(a) - rad * rad;
    const double disc = B * B - 4.0 * A * C;
    if (disc <= 0.0) return 0.0;
    const double sd = std::sqrt(disc);
    const double t0 = std::clamp((-B - sd) / (2.0 * A), 0.0, 1.0);
    const double t1 = std::clamp((-B + sd) / (2.0 * A), 0.0, 1.0);
    return (t1 - t0) * std::sqrt(A);
  };

  const int lo = -R - 1, hi = R + 1;
  auto consider_edge = [&](const Pt& a, const Pt& b) {
    const double len = clipped_length(a, b, Rd);
    const double mind = dist_point_segment(Pt{0, 0, 0}, a, b);
    if (mind <= Rd) {
      edges_.push_back(Seg{a, b});
      skel_mass_ += len;
    }
  };
  if (dim == 2) {
    for (int i = lo; i <= hi; ++i)
      for (int j = lo; j <= hi; ++j) {
        const Pt v{double(i), double(j), 0.0};
        if (i < hi) consider_edge(v, Pt{double(i + 1), double(j), 0.0});
        if (j < hi) consider_edge(v, Pt{double(i), double(j + 1), 0.0});
      }
    // Transversality targets: cell centers within reach of the viewpoint cone.
    for (int i = lo - 1; i <= hi; ++i)
      for (int j = lo - 1; j <= hi; ++j) {
        const Pt c{i + 0.5, j + 0.5, 0.0};
        if (norm(c) <= Rd + 1.0) {
          dual_.push_back(Seg{c, c});
          dual_class_.push_back(0);
        }
      }
  } else {
    for (int i = lo; i <= hi; ++i)
      for (int j = lo; j <= hi; ++j)
        for (int k = lo; k <= hi; ++k) {
          const Pt v{double(i), double(j), double(k)};
          if (i < hi) consider_edge(v, Pt{double(i + 1), double(j), double(k)});
          if (j < hi) consider_edge(v, Pt{double(i), double(j + 1), double(k)});
          if (k < hi) consider_edge(v, Pt{double(i), double(j), double(k + 1)});
        }
    // Transversality targets: cell center lines per axis, clipped to R + 1.
    for (int axis = 0; axis < 3; ++axis) {
      const int o1 = (axis + 1) % 3, o2 = (axis + 2) % 3;
      for (int i = lo - 1; i <= hi; ++i)
        for (int j = lo - 1; j <= hi; ++j) {
          const double c1 = i + 0.5, c2 = j + 0.5;
          const double d2 = c1 * c1 + c2 * c2;
          const double rad = Rd + 1.0;
          if (d2 > rad * rad) continue;
          const double span = std::sqrt(rad * rad - d2);
          Pt a{0, 0, 0}, b{0, 0, 0};
          a[axis] = -span;
          b[axis] = span;
          a[o1] = b[o1] = c1;
          a[o2] = b[o2] = c2;
          dual_.push_back(Seg{a, b});
          dual_class_.push_back(axis);
        }
    }
  }
}

double GridSkeleton::density() const {
  return skel_mass_ / std::pow(static_cast<double>(R_), dim_);
}

// ----------------------------------------------------------- generic point

GenericPoint pick_generic_point(const GridSkeleton& grid, const Ball& cap,
                                std::uint64_t seed) {
  const double R = static_cast<double>(grid.R());
  if (std::abs(norm(cap.center) - R) > 1e-6 * R)
    throw BadSpec("viewpoint cap must be centered on the far sphere");
  if (cap.radius <= 1e-3 * R) throw BadSpec("viewpoint cap too small");
  const double alpha =
      2.0 * std::asin(std::clamp(cap.radius / (2.0 * R), 0.0, 1.0));
  if (alpha >= 0.995 * (kPi / 2.0))
    throw BadSpec("viewpoint cap at hemisphere scale: tangency cone degenerates");

  const int dim = grid.dim();
  const Pt chat = normalized(cap.center);
  Rng rng(task_seed(seed, "pick-generic-point"));
  const int kProbes = 1000;

  for (int attempt = 0; attempt < 64; ++attempt) {
    // Viewpoint inside the cap's tangency cone: the visible circle on the
    // sphere has angular radius acos(R/D) <= 0.9 * alpha around the axis.
    const double theta_t = (0.5 + 0.2 * rng.uniform()) * alpha;
    const double D = R / std::cos(theta_t);
    const double theta_off = rng.uniform(0.0, 0.9 * alpha - theta_t);
    Pt tau;
    if (dim == 2) {
      tau = Pt{-chat.y(), chat.x(), 0.0};
      if (rng.uniform() < 0.5) tau = -1.0 * tau;
    } else {
      for (;;) {
        Pt v{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        v = v - dot(v, chat) * chat;
        if (norm(v) > 1e-3) {
          tau = normalized(v);
          break;
        }
      }
    }
    const Pt P = D * (std::cos(theta_off) * chat + std::sin(theta_off) * tau);

    // Exact clearance of P from every degeneracy locus: lines through pairs
    // of dual points in the plane, planes through same-class line pairs in
    // space.
    double vmargin = std::numeric_limits<double>::infinity();
    if (dim == 2) {
      for (std::size_t i = 0; i + 1 < grid.dual_count(); ++i)
        for (std::size_t j = i + 1; j < grid.dual_count(); ++j) {
          const Pt a = grid.dual_piece(i).a;
          const Pt d = grid.dual_piece(j).a - a;
          if (norm(d) < 1e-9) continue;
          const Pt dh = normalized(d);
          const Pt w = P - a;
          vmargin = std::min(vmargin, norm(w - dot(w, dh) * dh));
        }
    } else {
      for (int cls = 0; cls < 3; ++cls) {
        Pt axis{0, 0, 0};
        axis[cls] = 1.0;
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < grid.dual_count(); ++i)
          if (grid.dual_class(i) == cls) idx.push_back(i);
        for (std::size_t a = 0; a + 1 < idx.size(); ++a)
          for (std::size_t b = a + 1; b < idx.size(); ++b) {
            const Pt p1 = grid.dual_piece(idx[a]).a;
            const Pt p2 = grid.dual_piece(idx[b]).a;
            const Pt nrm = cross(axis, p2 - p1);
            const double nn = norm(nrm);
            if (nn < 1e-9) continue;
            vmargin = std::min(vmargin,
                               std::abs(dot(P - p1, nrm)) / nn);
          }
      }
    }
    if (vmargin < 1e-6 * R) continue;

    // Freeze the window scale from probe sight chords plus the clearance
    // budget.  Only the in-ball chord of each sight line matters: deformed
    // pieces always live inside the closed ball.
    double eps = grid.margin();
    eps = std::min(eps, vmargin / (4.0 * (D + R + 1.0)));
    for (int p = 0; p < kProbes; ++p) {
      const Pt target = sample_in_ball(rng, dim, R);
      const Pt u = normalized(target - P);
      Pt c0, c1;
      if (!chord_through(P, u, R, c0, c1)) continue;
      std::array<std::vector<double>, 3> class_dists;
      for (std::size_t i = 0; i < grid.dual_count(); ++i) {
        const Seg& piece = grid.dual_piece(i);
        eps = std::min(eps, 0.9 * window_eps_budget(P, u, piece));
        class_dists[static_cast<std::size_t>(grid.dual_class(i))].push_back(
            dist_segment_segment(c0, c1, piece.a, piece.b));
      }
      for (auto& ds : class_dists) {
        if (ds.size() >= 2) {
          std::nth_element(ds.begin(), ds.begin() + 1, ds.end());
          eps = std::min(eps, 0.95 * ds[1]);
        }
      }
    }
    if (eps < 1e-7) continue;

    // Verify the frozen scale on a fresh probe set.
    bool ok = true;
    int max_met = 0;
    double max_window = 0.0;
    for (int p = 0; p < kProbes && ok; ++p) {
      const Pt target = sample_in_ball(rng, dim, R);
      const Pt u = normalized(target - P);
      Pt c0, c1;
      if (!chord_through(P, u, R, c0, c1)) continue;
      const LineCheck lc = check_chord(P, u, c0, c1, grid, eps);
      if (lc.worst_class_count > 1 || lc.max_window >= 1.0) ok = false;
      max_met = std::max(max_met, lc.total_met);
      max_window = std::max(max_window, lc.max_window);
    }
    if (!ok) continue;

    GenericPoint gp;
    gp.P = P;
    gp.cap = cap;
    gp.epsilon = eps;
    gp.R = R;
    gp.tangent_angle = theta_t;
    gp.v_margin = vmargin;
    gp.samples_used = attempt + 1;
    gp.rays_checked = kProbes;
    gp.max_pieces_per_ray = max_met;
    gp.max_window_diameter = max_window;
    return gp;
  }
  throw ExhaustedSamples("no generic viewpoint found for this cap");
}

// ----------------------------------------------------------------- ray fill

Pt ray_exit(const Pt& q, const GenericPoint& gp) {
  const double R = gp.R;
  hard_assert(norm(q) <= R * (1.0 + kSnapTol),
              "ray exit requested for a point outside the closed ball");
  const Pt u = normalized(q - gp.P);
  const double pu = dot(gp.P, u);
  const double disc = pu * pu - (norm2(gp.P) - R * R);
  if (disc < 1e-12 * R * R)
    throw TangentRay("ray through the viewpoint grazes the sphere");
  const double t = -pu + std::sqrt(disc);
  return gp.P + t * u;
}

OneChain ray_fill(const ZeroChain& z, const GenericPoint& gp) {
  const int dim = z.dim();
  std::vector<Seg> segs;
  std::vector<Pt> exits;
  for (const Pt& q : z.points()) {
    const Pt e = ray_exit(q, gp);
    exits.push_back(e);
    if (dist(q, e) <= kSnapTol * gp.R) continue;  // already at its own exit
    segs.push_back(Seg{q, e});
  }
  OneChain out = OneChain::of(dim, segs);
  const ZeroChain want = add_zero(z, ZeroChain::of(dim, exits));
  hard_assert(boundary_one(out) == want,
              "ray fill boundary must be the input plus its exit points");
  return out;
}

// ------------------------------------------------------------------- deform

DeformResult ff_deform(const OneChain& rays, const GridSkeleton& grid,
                       const GenericPoint& gp, std::uint64_t seed) {
  const int dim = grid.dim();
  const double R = gp.R;
  DeformResult res;
  res.endpoint_images.assign(rays.segments().size(), {Pt{}, Pt{}});
  if (rays.empty()) {
    res.chain = OneChain::of(dim, {});
    return res;
  }

  // Every input segment must lie on a line through the viewpoint, and must
  // re-verify against the frozen window scale.
  for (const Seg& s : rays.segments()) {
    const Pt d = s.b - s.a;
    hard_assert(norm(d) > 1e-12, "deform input segment is degenerate");
    const Pt u = normalized(d);
    const Pt w = gp.P - s.a;
    const double off = norm(w - dot(w, u) * u);
    hard_assert(off <= 1e-6 * std::max(1.0, norm(w)),
                "deform input segment does not point at the viewpoint");
    std::array<int, 3> per_class{0, 0, 0};
    for (std::size_t i = 0; i < grid.dual_count(); ++i) {
      const Seg& piece = grid.dual_piece(i);
      if (dist_segment_segment(s.a, s.b, piece.a, piece.b) < gp.epsilon) {
        ++per_class[static_cast<std::size_t>(grid.dual_class(i))];
        const double wdiam = window_diameter(gp.P, u, piece, gp.epsilon);
        if (wdiam >= 1.0)
          throw DegenerateCenter("ray window too wide at the frozen scale");
      }
    }
    for (int c : per_class)
      if (c > 1)
        throw DegenerateCenter("ray meets two targets of one class");
  }

  // Split every ray at integer walls; junctions land exactly on walls after
  // snapping so later stages agree across neighboring pieces.
  std::vector<PushPiece> pieces;
  for (std::size_t i = 0; i < rays.segments().size(); ++i) {
    const Seg& s = rays.segments()[i];
    std::vector<double> ts{0.0, 1.0};
    for (int ax = 0; ax < dim; ++ax) {
      const double a = s.a[ax], b = s.b[ax];
      const int mlo = static_cast<int>(std::ceil(std::min(a, b) - 1e-9));
      const int mhi = static_cast<int>(std::floor(std::max(a, b) + 1e-9));
      for (int m = mlo; m <= mhi; ++m) {
        if (std::abs(b - a) < 1e-15) continue;
        const double t = (m - a) / (b - a);
        if (t > 1e-12 && t < 1.0 - 1e-12) ts.push_back(t);
      }
    }
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end(),
                         [](double x, double y) { return std::abs(x - y) < 1e-12; }),
             ts.end());
    for (std::size_t t = 0; t + 1 < ts.size(); ++t) {
      PushPiece pc;
      pc.a = lerp(s.a, s.b, ts[t]);
      pc.b = lerp(s.a, s.b, ts[t + 1]);
      snap_integer_coords(pc.a, dim);
      snap_integer_coords(pc.b, dim);
      if (t == 0) pc.a = s.a;
      if (t + 2 == ts.size()) pc.b = s.b;
      if (dist(pc.a, pc.b) < 1e-12) continue;
      if (t == 0) pc.mark_a = static_cast<int>(2 * i);
      if (t + 2 == ts.size()) pc.mark_b = static_cast<int>(2 * i + 1);
      pieces.push_back(pc);
    }
  }

  double max_disp = 0.0;
  std::map<int, Pt> resolved;  // final positions of endpoint marks
  auto run_stage = [&](std::vector<PushPiece>& in, int stage_walls) {
    // stage_walls = 0: push cube-interior pieces to cube boundaries;
    // stage_walls = 1: push face-interior pieces to face boundaries (3D).
    std::map<std::array<int, 4>, std::vector<std::size_t>> groups;
    std::vector<PushPiece> out;
    for (std::size_t i = 0; i < in.size(); ++i) {
      const int w = wall_count(in[i].a, in[i].b, dim);
      if (w != stage_walls) continue;
      const Pt mid = lerp(in[i].a, in[i].b, 0.5);
      std::array<int, 4> key{0, 0, 0, 0};
      if (stage_walls == 0) {
        key[0] = -1;
        for (int ax = 0; ax < dim; ++ax)
          key[static_cast<std::size_t>(1 + ax)] =
              static_cast<int>(std::floor(mid[ax]));
      } else {
        int wall_axis = -1;
        for (int ax = 0; ax < dim; ++ax) {
          const double ra = std::round(in[i].a[ax]);
          if (std::abs(in[i].a[ax] - ra) <= kSnapTol &&
              std::abs(in[i].b[ax] - ra) <= kSnapTol)
            wall_axis = ax;
        }
        key[0] = wall_axis;
        key[1] = static_cast<int>(std::llround(mid[wall_axis]));
        int slot = 2;
        for (int ax = 0; ax < dim; ++ax)
          if (ax != wall_axis)
            key[static_cast<std::size_t>(slot++)] =
                static_cast<int>(std::floor(mid[ax]));
      }
      groups[key].push_back(i);
    }
    for (std::size_t i = 0; i < in.size(); ++i) {
      const int w = wall_count(in[i].a, in[i].b, dim);
      if (w != stage_walls) out.push_back(in[i]);
    }
    for (auto& [key, idxs] : groups) {
      std::vector<int> axes;
      std::array<double, 3> lo{0, 0, 0}, hi{0, 0, 0};
      Pt box_center{0, 0, 0};
      if (key[0] == -1) {
        for (int ax = 0; ax < dim; ++ax) {
          axes.push_back(ax);
          lo[static_cast<std::size_t>(ax)] = key[static_cast<std::size_t>(1 + ax)];
          hi[static_cast<std::size_t>(ax)] = key[static_cast<std::size_t>(1 + ax)] + 1.0;
          box_center[ax] = key[static_cast<std::size_t>(1 + ax)] + 0.5;
        }
      } else {
        const int wall_axis = key[0];
        box_center[wall_axis] = key[1];
        lo[static_cast<std::size_t>(wall_axis)] =
            hi[static_cast<std::size_t>(wall_axis)] = key[1];
        int slot = 2;
        for (int ax = 0; ax < dim; ++ax)
          if (ax != wall_axis) {
            axes.push_back(ax);
            lo[static_cast<std::size_t>(ax)] = key[static_cast<std::size_t>(slot)];
            hi[static_cast<std::size_t>(ax)] = key[static_cast<std::size_t>(slot)] + 1.0;
            box_center[ax] = key[static_cast<std::size_t>(slot)] + 0.5;
            ++slot;
          }
        // Pin face pieces exactly onto the wall so the push stays in-plane.
        for (std::size_t ix : idxs) {
          in[ix].a[wall_axis] = key[1];
          in[ix].b[wall_axis] = key[1];
        }
      }
      std::vector<const PushPiece*> local;
      for (std::size_t ix : idxs) local.push_back(&in[ix]);
      std::string gk = "push";
      for (int kv : key) gk += ":" + std::to_string(kv);
      int rejected = 0;
      const Pt c = draw_push_center(box_center, axes, local,
                                    task_seed(seed, gk), &rejected);
      res.recentered += rejected;
      for (std::size_t ix : idxs) {
        const PushPiece& pc = in[ix];
        const std::vector<Pt> line =
            push_polyline(pc.a, pc.b, c, axes, lo, hi);
        max_disp = std::max(max_disp, dist(line.front(), pc.a));
        max_disp = std::max(max_disp, dist(line.back(), pc.b));
        // Snap and dedup the polyline, then emit sub-pieces with the marks on
        // the outermost surviving endpoints.
        std::vector<Pt> vs;
        for (Pt v : line) {
          snap_integer_coords(v, dim);
          if (vs.empty() || dist(vs.back(), v) >= 1e-12) vs.push_back(v);
        }
        if (vs.size() < 2) {
          // The whole image collapsed to a point.  For a marked piece that
          // would silently freeze the endpoint at a mid-stage position, so
          // abort and let the caller redraw the viewpoint.
          if (pc.mark_a >= 0 || pc.mark_b >= 0)
            throw DegenerateCenter("push collapsed a marked piece");
          continue;
        }
        for (std::size_t v = 0; v + 1 < vs.size(); ++v) {
          PushPiece np;
          np.a = vs[v];
          np.b = vs[v + 1];
          if (v == 0) np.mark_a = pc.mark_a;
          if (v + 2 == vs.size()) np.mark_b = pc.mark_b;
          out.push_back(np);
        }
      }
    }
    in = std::move(out);
  };

  // Every endpoint mark must survive the stages; a collapse of a marked piece
  // aborts the attempt instead of freezing a mid-stage position.
  auto marks_present = [&](const std::vector<PushPiece>& ps) {
    std::set<int> seen;
    for (const PushPiece& pc : ps) {
      if (pc.mark_a >= 0) seen.insert(pc.mark_a);
      if (pc.mark_b >= 0) seen.insert(pc.mark_b);
    }
    return seen;
  };
  const std::set<int> before = marks_present(pieces);

  run_stage(pieces, 0);
  if (dim == 3) run_stage(pieces, 1);

  {
    const std::set<int> after = marks_present(pieces);
    for (int m : before)
      hard_assert(after.count(m) > 0 || resolved.count(m) > 0,
                  "deform lost an endpoint mark");
  }

  // Clip to the closed ball of radius R: split at sphere crossings and remap
  // outside sub-pieces radially onto the sphere.
  std::vector<PushPiece> clipped;
  auto clip_point = [&](const Pt& v) {
    const double nv = norm(v);
    if (nv <= R) return v;
    return (R / nv) * v;
  };
  for (const PushPiece& pc : pieces) {
    const Pt d = pc.b - pc.a;
    std::vector<double> ts{0.0, 1.0};
    const double A = norm2(d);
    if (A > 1e-24) {
      const double B = 2.0 * dot(pc.a, d);
      const double C = norm2(pc.a) - R * R;
      const double disc = B * B - 4.0 * A * C;
      if (disc > 0.0) {
        for (double sgn : {-1.0, 1.0}) {
          const double t = (-B + sgn * std::sqrt(disc)) / (2.0 * A);
          if (t > 1e-12 && t < 1.0 - 1e-12) ts.push_back(t);
        }
      }
    }
    std::sort(ts.begin(), ts.end());
    for (std::size_t t = 0; t + 1 < ts.size(); ++t) {
      PushPiece np;
      np.a = t == 0 ? pc.a : lerp(pc.a, pc.b, ts[t]);
      np.b = t + 2 == ts.size() ? pc.b : lerp(pc.a, pc.b, ts[t + 1]);
      const Pt mid = lerp(np.a, np.b, 0.5);
      if (norm(mid) > R) {
        const Pt ca = clip_point(np.a), cb = clip_point(np.b);
        max_disp = std::max({max_disp, dist(ca, np.a), dist(cb, np.b)});
        np.a = ca;
        np.b = cb;
      }
      if (t == 0) np.mark_a = pc.mark_a;
      if (t + 2 == ts.size()) np.mark_b = pc.mark_b;
      if (dist(np.a, np.b) < 1e-12) {
        if (np.mark_a >= 0) resolved[np.mark_a] = np.a;
        if (np.mark_b >= 0) resolved[np.mark_b] = np.b;
        continue;
      }
      clipped.push_back(np);
    }
  }

  // Resolve endpoint images and assemble the reduced chain.
  for (const PushPiece& pc : clipped) {
    if (pc.mark_a >= 0) resolved[pc.mark_a] = pc.a;
    if (pc.mark_b >= 0) resolved[pc.mark_b] = pc.b;
  }
  std::vector<Seg> segs;
  segs.reserve(clipped.size());
  for (const PushPiece& pc : clipped) segs.push_back(Seg{pc.a, pc.b});
  res.chain = reduce_overlaps(OneChain::of(dim, segs));

  for (std::size_t i = 0; i < rays.segments().size(); ++i) {
    const Seg& s = rays.segments()[i];
    auto ia = resolved.find(static_cast<int>(2 * i));
    auto ib = resolved.find(static_cast<int>(2 * i + 1));
    hard_assert(ia != resolved.end() && ib != resolved.end(),
                "deform endpoint image missing");
    res.endpoint_images[i] = {ia->second, ib->second};
    max_disp = std::max(max_disp, dist(ia->second, s.a));
    max_disp = std::max(max_disp, dist(ib->second, s.b));
  }
  res.max_displacement = max_disp;
  const double denom = static_cast<double>(rays.segments().size()) +
                       std::pow(R, dim);
  res.mass_ratio = res.chain.mass() / denom;
  return res;
}

// -------------------------------------------------------------- bend/cancel

BendCancelResult bend_cancel_fill(const ZeroFamily& F, double r,
                                  const Ball& cap, const Exec& ex,
                                  std::uint64_t seed) {
  if (!(r > 0.0 && r < 1.0)) throw BadSpec("grid width must lie in (0, 1)");
  if (std::abs(norm(cap.center) - 1.0) > 1e-6)
    throw BadSpec("cap must be centered on the unit sphere");
  int dim = 2;
  for (const auto& [k, z] : F.values) {
    (void)k;
    dim = z.dim();
    break;
  }
  if (dim != 2 && dim != 3) throw BadSpec("fillings need dimension 2 or 3");
  for (const auto& [k, z] : F.values) {
    (void)k;
    if (z.dim() != dim) throw BadSpec("mixed value dimensions in one family");
  }

  const int R = std::max(2, static_cast<int>(std::lround(1.0 / r)));
  const double Rd = static_cast<double>(R);
  const double runit = 1.0 / Rd;
  const GridSkeleton grid(dim, R);
  const Ball grid_cap{Rd * cap.center, Rd * cap.radius};
  const double sphere_tol = 1e-7;

  std::vector<std::vector<int>> keys;
  for (const auto& [k, z] : F.values) {
    (void)z;
    keys.push_back(k);
  }
  std::sort(keys.begin(), keys.end());

  struct VertexOut {
    OneChain chain{2};
    double ratio = 0.0;
    double bfactor = 0.0;
    double fbar_mass = 0.0;
    double fill_mass = 0.0;
    double input_mass = 0.0;
    double disp = 0.0;
    double dratio = 0.0;
  };

  BendCancelReport rep;
  rep.dim = dim;
  rep.R = R;
  rep.r = runit;
  rep.cap_angle = 2.0 * std::asin(std::clamp(cap.radius / 2.0, 0.0, 1.0));
  rep.vertices = keys.size();

  std::vector<VertexOut> outs(keys.size());
  for (int attempt = 0;; ++attempt) {
    rep.attempts = attempt + 1;
    try {
      const GenericPoint gp =
          pick_generic_point(grid, grid_cap, task_seed(seed, "viewpoint") + attempt);
      parallel_for(keys.size(), ex, [&](std::size_t vi) {
        const ZeroChain& z = F.values.at(keys[vi]);
        std::vector<Pt> fbar;
        for (const Pt& p : z.points()) {
          const double np = norm(p);
          if (np > 1.0 + sphere_tol)
            throw BadSpec("family value outside the closed unit ball");
          const bool on_sphere = std::abs(np - 1.0) <= sphere_tol;
          if (!on_sphere || dist(p, cap.center) <= cap.radius)
            fbar.push_back(Rd * p);
        }
        const ZeroChain fbar_chain = ZeroChain::of(dim, fbar);
        std::vector<Seg> raysegs;
        for (const Pt& q : fbar_chain.points()) {
          const Pt e = ray_exit(q, gp);
          if (dist(q, e) <= kSnapTol * Rd) continue;
          raysegs.push_back(Seg{q, e});
        }
        const OneChain rays = OneChain::of(dim, raysegs);
        const DeformResult def =
            ff_deform(rays, grid, gp, task_seed(seed, "deform:" + key_of(keys[vi])));

        std::vector<Seg> all;
        for (const Seg& s : def.chain.segments()) all.push_back(s);
        for (std::size_t i = 0; i < rays.segments().size(); ++i) {
          const Seg& s = rays.segments()[i];
          const auto& img = def.endpoint_images[i];
          if (dist(s.a, img[0]) > 1e-9) all.push_back(Seg{s.a, img[0]});
          if (dist(s.b, img[1]) > 1e-9) all.push_back(Seg{s.b, img[1]});
        }
        std::vector<Seg> unit;
        for (const Seg& s : all) unit.push_back(Seg{runit * s.a, runit * s.b});
        const OneChain G = OneChain::of(dim, unit);

        const ZeroChain bd = boundary_one(G);
        const ZeroChain junk = add_zero(bd, z);
        for (const Pt& p : junk.points())
          hard_assert(std::abs(norm(p) - 1.0) <= 1e-6,
                      "filling boundary defect off the unit sphere");
        hard_assert(bd.mass() <= 2 * fbar_chain.mass(),
                    "filling boundary mass exceeds twice the clipped input");

        VertexOut vo;
        vo.chain = G;
        vo.fbar_mass = static_cast<double>(fbar_chain.mass());
        vo.input_mass = static_cast<double>(z.mass());
        vo.fill_mass = G.mass();
        const double denom =
            vo.fbar_mass * runit + std::pow(runit, 1.0 - dim);
        vo.ratio = denom > 0 ? vo.fill_mass / denom : 0.0;
        vo.bfactor = fbar_chain.mass() > 0
                         ? static_cast<double>(bd.mass()) /
                               static_cast<double>(fbar_chain.mass())
                         : 0.0;
        vo.disp = def.max_displacement;
        vo.dratio = def.mass_ratio;
        outs[vi] = std::move(vo);
      });
      break;
    } catch (const TangentRay&) {
      if (attempt + 1 >= 8) throw;
    } catch (const DegenerateCenter&) {
      if (attempt + 1 >= 8) throw;
    }
  }

  OneFamily out;
  out.complex = F.complex;
  out.provenance = "bend-cancel";
  for (std::size_t i = 0; i < keys.size(); ++i) {
    out.values.emplace(keys[i], outs[i].chain);
    rep.max_input_mass = std::max(rep.max_input_mass, outs[i].input_mass);
    rep.max_fill_mass = std::max(rep.max_fill_mass, outs[i].fill_mass);
    rep.c_measured = std::max(rep.c_measured, outs[i].ratio);
    rep.boundary_factor = std::max(rep.boundary_factor, outs[i].bfactor);
    rep.max_displacement = std::max(rep.max_displacement, outs[i].disp);
    rep.max_deform_ratio = std::max(rep.max_deform_ratio, outs[i].dratio);
  }
  return BendCancelResult{std::move(out), rep};
}

// -------------------------------------------------------------- cap avoider

namespace {

bool on_unit_sphere(const Pt& p) { return std::abs(norm(p) - 1.0) <= 1e-7; }

double polar_angle(const Pt& p) {
  const double n = norm(p);
  if (n < 1e-12) return kPi;
  return std::acos(std::clamp(-p.z() / n, -1.0, 1.0));
}

}  // namespace

AvoidResult avoid_boundary_ball(const ZeroFamily& F, const CellCerts& certs,
                                double L, const Exec& ex) {
  const Pt pole{0.0, 0.0, -1.0};
  for (const auto& [k, z] : F.values) {
    (void)k;
    if (z.dim() != 3) throw DimUnsupported("cap avoidance needs ambient dimension 3");
  }
  const int p = F.complex.dim();
  if (p > 2) throw DimUnsupported("cap avoidance supports parameter dimension <= 2");
  if (!(L > 0.0 && L < kPi / 2.0))
    throw BadSpec("cap angular radius must lie in (0, pi/2)");
  if (!F.total()) throw BadSpec("family must define a value at every vertex");

  double delta = 0.0;
  for (const auto& [c, fam] : certs) {
    (void)c;
    delta = std::max(delta, fam.delta);
  }
  const double delta_out = L + (p + 2) * delta;
  if (delta > 0.25)
    throw DeltaTooLarge("certificate scale exceeds the merge budget");
  if (L + (p + 2) * delta >= 1.0)
    throw DeltaTooLarge("enlarged cap scale leaves no room in the ball");
  if (delta >= 2.0 * kPi * std::sin(L + delta))
    throw DeltaTooLarge("certificate scale exceeds the cap ring girth");

  for (const auto& [c, fam] : certs) {
    (void)c;
    hard_assert(fam.valid(), "input certificate family is not admissible");
  }
  {
    const LocalizedReport gate = check_localized(F, certs, ex);
    hard_assert(gate.localized, "input family is not localized by its certificates");
  }

  const double sphere_tol = 1e-7;
  auto in_open_cap = [&](const Pt& q) {
    return on_unit_sphere(q) && polar_angle(q) < L;
  };
  auto keep_part = [&](const ZeroChain& z) {
    std::vector<Pt> keep;
    int cap_count = 0;
    for (const Pt& q : z.points()) {
      if (in_open_cap(q))
        ++cap_count;
      else
        keep.push_back(q);
    }
    return std::make_pair(ZeroChain::of(3, keep), cap_count);
  };

  // Original-vertex transforms and parities.
  std::map<std::vector<int>, ZeroChain> keep0;
  std::map<std::vector<int>, int> par0;
  for (const std::vector<int>& k : F.complex.vertices()) {
    auto [keep, cnt] = keep_part(F.values.at(k));
    keep0.emplace(k, std::move(keep));
    par0.emplace(k, cnt & 1);
  }

  const CubicalComplex Xr = refine(F.complex, 3);
  AvoidResult result;
  result.family.complex = Xr;
  result.family.provenance = "cap-avoid";
  result.report.q = 3;
  result.report.p = p;
  result.report.L = L;
  result.report.delta_in = delta;
  result.report.delta_out = delta_out;

  // Value scheme: the kept part travels from the low corner, the pole parity
  // from the high corner, where low/high are read per axis from the offset
  // within the parent cell (0 -> stay, 1 -> keep low / parity high,
  // 2 -> both high).
  std::map<std::vector<int>, int> pole_of;
  for (const std::vector<int>& u : Xr.vertices()) {
    std::vector<int> LO(u.size()), HI(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
      const int a = u[i] / 3, o = u[i] % 3;
      LO[i] = a + (o == 2 ? 1 : 0);
      HI[i] = a + (o >= 1 ? 1 : 0);
    }
    const ZeroChain& keep = keep0.at(LO);
    const int parity = par0.at(HI);
    std::vector<Pt> pts = keep.points();
    if (parity) pts.push_back(pole);
    result.family.values.emplace(u, ZeroChain::of(3, pts));
    pole_of.emplace(u, parity);
  }

  // Certificates: parent certificate balls plus a pole ball wherever the
  // parity flips inside the refined cell.
  const double flip_r = delta > 0 ? delta / 4.0 : 0.0;
  for (const Cell& c : Xr.cells_sorted()) {
    if (c.dim() == 0) continue;
    const Cell parent = parent_cell(c, 3);
    std::vector<Ball> pool;
    auto it = certs.find(parent);
    if (it != certs.end()) pool = it->second.balls;
    bool flips = false;
    int first = -1;
    for (const auto& v : CubicalComplex::cell_vertices(c)) {
      const int pv = pole_of.at(v);
      if (first < 0) first = pv;
      if (pv != first) flips = true;
    }
    if (flips) {
      hard_assert(flip_r > 0.0, "parity flip without a certificate scale");
      pool.push_back(Ball{pole, flip_r});
      ++result.report.flips;
    }
    if (pool.empty()) continue;
    AdmissibleFamily fam = merge_admissible(pool);
    fam.delta = delta_out;
    hard_assert(fam.valid(), "merged output certificate is not admissible");
    result.certs.emplace(c, std::move(fam));
  }
  result.report.cells = result.certs.size();

  // Postconditions. Original vertices keep their off-cap part and carry the
  // parity pole; refined vertices match a parent corner away from the
  // enlarged ball; masses stay within the per-cell budget.
  for (const std::vector<int>& k : F.complex.vertices()) {
    const ZeroChain& z = F.values.at(k);
    std::vector<int> u(k.size());
    for (std::size_t i = 0; i < k.size(); ++i) u[i] = 3 * k[i];
    const ZeroChain& got = result.family.values.at(u);
    std::vector<Pt> expect = keep0.at(k).points();
    if (par0.at(k)) expect.push_back(pole);
    hard_assert(got == ZeroChain::of(3, expect),
                "vertex transform must remove the cap and track its parity");
    std::vector<Pt> off_new, off_old;
    for (const Pt& q : got.points())
      if (!in_open_cap(q)) off_new.push_back(q);
    for (const Pt& q : z.points())
      if (!in_open_cap(q)) off_old.push_back(q);
    hard_assert(ZeroChain::of(3, off_new) == ZeroChain::of(3, off_old),
                "vertex transform must not move points outside the cap");
  }
  for (const std::vector<int>& u : Xr.vertices()) {
    std::vector<int> LO(u.size());
    std::vector<int> anchor(u.size());
    std::uint32_t axes_mask = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      const int a = u[i] / 3, o = u[i] % 3;
      LO[i] = a + (o == 2 ? 1 : 0);
      anchor[i] = a;
      if (o != 0) axes_mask |= (1u << i);
    }
    const ZeroChain& val = result.family.values.at(u);
    std::vector<Pt> off_new, off_corner;
    for (const Pt& q : val.points())
      if (dist(q, pole) > delta_out) off_new.push_back(q);
    for (const Pt& q : F.values.at(LO).points())
      if (dist(q, pole) > delta_out) off_corner.push_back(q);
    hard_assert(ZeroChain::of(3, off_new) == ZeroChain::of(3, off_corner),
                "refined value must match a parent corner away from the cap");

    // Mass budget relative to the minimal original cell containing the vertex
    // (anchor and axes are already in original-lattice units).
    Cell parent;
    parent.anchor = anchor;
    parent.axes = axes_mask;
    const int k_dim = parent.dim();
    std::size_t mass_c = 0;
    const auto corners = CubicalComplex::cell_vertices(parent);
    for (const auto& w : corners) {
      std::size_t m = 0;
      for (const Pt& q : F.values.at(w).points())
        if (norm(q) < 1.0 - sphere_tol) ++m;
      mass_c = std::max(mass_c, m);
    }
    std::size_t m_int = 0, m_cap = 0;
    for (const Pt& q : val.points()) {
      if (norm(q) < 1.0 - sphere_tol) ++m_int;
      if (in_open_cap(q)) ++m_cap;
    }
    hard_assert(m_int + m_cap <= mass_c + static_cast<std::size_t>(k_dim) + 1,
                "refined value exceeds the per-cell mass budget");
    const double excess = static_cast<double>(m_int + m_cap) -
                          static_cast<double>(mass_c);
    result.report.max_mass_excess =
        std::max(result.report.max_mass_excess, excess);
  }

  // Ring and corridor clearances near the cap: find a radial shell within
  // [L + delta, L + 2 delta] around the pole missing every certificate ball
  // and every transformed support point, then an azimuthal corridor missing
  // the balls that stay clear of that shell. Reported, never asserted.
  result.report.ring_radius_min = L + delta;
  result.report.ring_radius_max = L + 2.0 * delta;
  result.report.ring_clearance = std::numeric_limits<double>::infinity();
  result.report.corridor_clearance = std::numeric_limits<double>::infinity();
  bool any_cell = false;
  for (const auto& [c, fam] : certs) {
    any_cell = true;
    std::vector<std::pair<double, double>> blocked;
    for (const Ball& b : fam.balls) {
      const double d = dist(b.center, pole);
      blocked.emplace_back(d - b.radius, d + b.radius);
    }
    for (const auto& v : CubicalComplex::cell_vertices(c)) {
      std::vector<int> u(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) u[i] = 3 * v[i];
      auto itv = result.family.values.find(u);
      if (itv == result.family.values.end()) continue;
      for (const Pt& q : itv->second.points()) {
        const double d = dist(q, pole);
        blocked.emplace_back(d - 1e-9, d + 1e-9);
      }
    }
    std::sort(blocked.begin(), blocked.end());
    const double lo = L + delta, hi = L + 2.0 * delta;
    double cursor = lo, best_mid = -1.0, best_half = 0.0;
    auto consider_gap = [&](double a, double b) {
      if (b - a > 2.0 * best_half) {
        best_half = (b - a) / 2.0;
        best_mid = (a + b) / 2.0;
      }
    };
    for (const auto& [a, b] : blocked) {
      if (a > cursor) consider_gap(cursor, std::min(a, hi));
      cursor = std::max(cursor, b);
      if (cursor >= hi) break;
    }
    if (cursor < hi) consider_gap(cursor, hi);
    if (best_mid < 0.0) {
      result.report.ring_clearance = 0.0;
      result.report.corridor_clearance = 0.0;
      continue;
    }
    result.report.ring_clearance =
        std::min(result.report.ring_clearance, best_half);

    // Azimuthal corridor avoiding the balls disjoint from the shell ball.
    std::vector<std::pair<double, double>> shadows;
    bool full_shadow = false;
    for (const Ball& b : fam.balls) {
      if (dist(b.center, pole) - b.radius <= best_mid) continue;
      const double dxy = std::hypot(b.center.x(), b.center.y());
      if (dxy <= b.radius) {
        full_shadow = true;
        break;
      }
      const double phi = std::atan2(b.center.y(), b.center.x());
      const double half = std::asin(std::clamp(b.radius / dxy, 0.0, 1.0));
      shadows.emplace_back(phi - half, phi + half);
    }
    if (full_shadow) {
      result.report.corridor_clearance = 0.0;
      continue;
    }
    if (shadows.empty()) {
      result.report.corridor_clearance =
          std::min(result.report.corridor_clearance, kPi);
      continue;
    }
    // Largest circular gap between shadow intervals: bring every interval
    // into [0, 2pi), splitting the ones that spill over the seam, merge
    // overlaps, then scan the gaps including the wraparound one.
    std::vector<std::pair<double, double>> norm_sh;
    for (auto [a, b] : shadows) {
      const double len = b - a;
      double s = std::fmod(a, 2 * kPi);
      if (s < 0) s += 2 * kPi;
      if (s + len <= 2 * kPi) {
        norm_sh.emplace_back(s, s + len);
      } else {
        norm_sh.emplace_back(s, 2 * kPi);
        norm_sh.emplace_back(0.0, s + len - 2 * kPi);
      }
    }
    std::sort(norm_sh.begin(), norm_sh.end());
    std::vector<std::pair<double, double>> merged;
    for (const auto& iv : norm_sh) {
      if (!merged.empty() && iv.first <= merged.back().second)
        merged.back().second = std::max(merged.back().second, iv.second);
      else
        merged.push_back(iv);
    }
    double best = 0.0;
    for (std::size_t i = 0; i < merged.size(); ++i) {
      const double end_i = merged[i].second;
      const double next_start = i + 1 < merged.size()
                                    ? merged[i + 1].first
                                    : merged[0].first + 2 * kPi;
      best = std::max(best, next_start - end_i);
    }
    result.report.corridor_clearance =
        std::min(result.report.corridor_clearance, std::max(0.0, best / 2.0));
  }
  if (!any_cell) {
    result.report.ring_clearance = delta > 0 ? delta / 2.0 : 0.0;
    result.report.corridor_clearance = kPi;
  }

  const LocalizedReport out_loc = check_localized(result.family, result.certs, ex);
  hard_assert(out_loc.localized, "transformed family lost its localization");
  result.report.localization = out_loc;
  return result;
}

// -------------------------------------------------------------- hyperplanes

Hyperplane find_avoiding_hyperplane(const std::vector<Ball>& balls, int dim,
                                    std::uint64_t seed) {
  if (dim != 2 && dim != 3)
    throw DimUnsupported("hyperplane search needs dimension 2 or 3");
  for (const Ball& b : balls) {
    if (b.radius < 0) throw BadSpec("negative ball radius");
    if (dim == 2 && std::abs(b.center.z()) > 1e-9)
      throw BadSpec("planar hyperplane search needs planar centers");
  }
  auto clearance_of = [&](const Pt& n) {
    double m = std::numeric_limits<double>::infinity();
    for (const Ball& b : balls)
      m = std::min(m, std::abs(dot(n, b.center)) - b.radius);
    return m;
  };
  Pt best_n{1, 0, 0};
  double best = clearance_of(best_n);
  auto consider = [&](const Pt& n) {
    const double c = clearance_of(n);
    if (c > best) {
      best = c;
      best_n = n;
    }
  };
  consider(Pt{0, 1, 0});
  if (dim == 3) consider(Pt{0, 0, 1});
  Rng rng(task_seed(seed, "hyperplane-normals"));
  const int kSamples = 4096;
  for (int i = 0; i < kSamples; ++i) {
    if (dim == 2) {
      const double phi = rng.uniform(0.0, kPi);
      consider(Pt{std::cos(phi), std::sin(phi), 0.0});
    } else {
      const double z = rng.uniform(-1.0, 1.0);
      const double phi = rng.uniform(0.0, 2.0 * kPi);
      const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
      consider(Pt{s * std::cos(phi), s * std::sin(phi), z});
    }
  }
  if (!(best > 0.0))
    throw NotFound("no hyperplane through the origin avoids every ball");
  return Hyperplane{best_n, best};
}

DeltaEstimate estimate_hyperplane_budget(int dim, int families_per_iter,
                                         std::uint64_t seed) {
  if (dim != 2 && dim != 3)
    throw DimUnsupported("hyperplane search needs dimension 2 or 3");
  if (families_per_iter < 1) throw BadSpec("need at least one family per step");

  auto random_unit = [&](Rng& rng) {
    if (dim == 2) {
      const double phi = rng.uniform(0.0, 2.0 * kPi);
      return Pt{std::cos(phi), std::sin(phi), 0.0};
    }
    const double z = rng.uniform(-1.0, 1.0);
    const double phi = rng.uniform(0.0, 2.0 * kPi);
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    return Pt{s * std::cos(phi), s * std::sin(phi), z};
  };

  // Adversarial family generator: uniform scatters and great-circle chains
  // whose total diameter equals the tested budget.
  auto make_family = [&](double budget, Rng& rng) {
    const int m = 1 + static_cast<int>(rng.below(12));
    std::vector<double> w(static_cast<std::size_t>(m));
    double tot = 0.0;
    for (double& x : w) {
      x = 0.05 + rng.uniform();
      tot += x;
    }
    std::vector<Ball> balls;
    const bool chain = rng.below(2) == 1;
    Pt u{1, 0, 0}, v{0, 1, 0};
    if (chain && dim == 3) {
      u = random_unit(rng);
      for (;;) {
        Pt t = random_unit(rng);
        t = t - dot(t, u) * u;
        if (norm(t) > 1e-3) {
          v = normalized(t);
          break;
        }
      }
    }
    for (int i = 0; i < m; ++i) {
      const double diam = budget * w[static_cast<std::size_t>(i)] / tot;
      Pt c;
      if (chain) {
        const double phi =
            2.0 * kPi * (i + rng.uniform(-0.2, 0.2)) / m;
        c = std::cos(phi) * u + std::sin(phi) * v;
      } else {
        c = random_unit(rng);
      }
      balls.push_back(Ball{c, diam / 2.0});
    }
    return balls;
  };

  auto safe = [&](double budget, std::uint64_t salt) {
    for (int f = 0; f < families_per_iter; ++f) {
      Rng rng(task_seed(seed, "family") + salt * 1000003ull +
              static_cast<std::uint64_t>(f));
      const std::vector<Ball> balls = make_family(budget, rng);
      try {
        (void)find_avoiding_hyperplane(balls, dim, seed);
      } catch (const NotFound&) {
        return false;
      }
    }
    return true;
  };

  double lo = 0.0, hi = 0.5;
  std::uint64_t salt = 1;
  while (safe(hi, salt++) && hi < 64.0) {
    lo = hi;
    hi *= 2.0;
  }
  const int kIters = 18;
  for (int it = 0; it < kIters; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (safe(mid, salt++))
      lo = mid;
    else
      hi = mid;
  }
  DeltaEstimate est;
  est.dim = dim;
  est.delta_n = lo;
  est.bisect_iters = kIters;
  est.families_per_iter = families_per_iter;
  est.seed = seed;
  return est;
}

// ---------------------------------------------------------- planar complex

PlanarComplex PlanarComplex::graph(std::vector<Pt> vertices,
                                   std::vector<std::array<int, 2>> edges) {
  if (vertices.empty()) throw BadSpec("planar complex needs vertices");
  for (const Pt& v : vertices)
    if (std::abs(v.z()) > 1e-9) throw BadSpec("planar complex must sit in the plane");
  for (std::size_t i = 0; i < vertices.size(); ++i)
    for (std::size_t j = i + 1; j < vertices.size(); ++j)
      if (dist(vertices[i], vertices[j]) < 1e-6)
        throw BadSpec("planar complex vertices must be separated");
  std::set<std::array<int, 2>> seen;
  for (auto& e : edges) {
    const int n = static_cast<int>(vertices.size());
    if (e[0] < 0 || e[1] < 0 || e[0] >= n || e[1] >= n || e[0] == e[1])
      throw BadSpec("edge index out of range");
    std::array<int, 2> key{std::min(e[0], e[1]), std::max(e[0], e[1])};
    if (!seen.insert(key).second) throw BadSpec("duplicate edge");
  }
  PlanarComplex P;
  P.vertices_ = std::move(vertices);
  P.edges_ = std::move(edges);
  return P;
}

PlanarComplex PlanarComplex::triangulated(
    std::vector<Pt> vertices, std::vector<std::array<int, 3>> triangles) {
  if (triangles.empty()) throw BadSpec("triangulation needs triangles");
  std::set<std::array<int, 2>> edge_set;
  const int n = static_cast<int>(vertices.size());
  for (const auto& t : triangles) {
    for (int i : t)
      if (i < 0 || i >= n) throw BadSpec("triangle index out of range");
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
      throw BadSpec("degenerate triangle");
    const Pt a = vertices[static_cast<std::size_t>(t[0])];
    const Pt b = vertices[static_cast<std::size_t>(t[1])];
    const Pt c = vertices[static_cast<std::size_t>(t[2])];
    if (norm(cross(b - a, c - a)) < 1e-12) throw BadSpec("flat triangle");
    for (int e = 0; e < 3; ++e) {
      const int x = t[static_cast<std::size_t>(e)];
      const int y = t[static_cast<std::size_t>((e + 1) % 3)];
      edge_set.insert({std::min(x, y), std::max(x, y)});
    }
  }
  std::vector<std::array<int, 2>> edges(edge_set.begin(), edge_set.end());
  PlanarComplex P = graph(std::move(vertices), std::move(edges));
  P.triangles_ = std::move(triangles);
  return P;
}

PlanarComplex PlanarComplex::cycle(const std::vector<Pt>& loop) {
  if (loop.size() < 3) throw BadSpec("cycle needs at least three vertices");
  std::vector<std::array<int, 2>> edges;
  const int n = static_cast<int>(loop.size());
  for (int i = 0; i < n; ++i) edges.push_back({i, (i + 1) % n});
  return graph(loop, std::move(edges));
}

double PlanarComplex::length() const {
  double s = 0.0;
  for (const auto& e : edges_)
    s += dist(vertices_[static_cast<std::size_t>(e[0])],
              vertices_[static_cast<std::size_t>(e[1])]);
  return s;
}

double PlanarComplex::area() const {
  double s = 0.0;
  for (const auto& t : triangles_) {
    const Pt a = vertices_[static_cast<std::size_t>(t[0])];
    const Pt b = vertices_[static_cast<std::size_t>(t[1])];
    const Pt c = vertices_[static_cast<std::size_t>(t[2])];
    s += 0.5 * norm(cross(b - a, c - a));
  }
  return s;
}

// ----------------------------------------------------------- parametric fill

namespace {

// Spanning-tree routing data on the edge graph of a planar complex.
struct GraphRouting {
  std::vector<int> component;            // per vertex
  std::vector<int> parent;               // tree parent vertex (-1 at roots)
  std::vector<std::vector<int>> order;   // vertices per component, BFS order
  int components = 0;
};

GraphRouting build_routing(const PlanarComplex& P) {
  const int n = static_cast<int>(P.vertices().size());
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  for (const auto& e : P.edges()) {
    adj[static_cast<std::size_t>(e[0])].push_back(e[1]);
    adj[static_cast<std::size_t>(e[1])].push_back(e[0]);
  }
  for (auto& a : adj) std::sort(a.begin(), a.end());
  GraphRouting r;
  r.component.assign(static_cast<std::size_t>(n), -1);
  r.parent.assign(static_cast<std::size_t>(n), -1);
  for (int s = 0; s < n; ++s) {
    if (r.component[static_cast<std::size_t>(s)] >= 0) continue;
    const int cid = r.components++;
    std::vector<int> queue{s};
    r.component[static_cast<std::size_t>(s)] = cid;
    std::vector<int> order;
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
      const int v = queue[qi];
      order.push_back(v);
      for (int w : adj[static_cast<std::size_t>(v)]) {
        if (r.component[static_cast<std::size_t>(w)] >= 0) continue;
        r.component[static_cast<std::size_t>(w)] = cid;
        r.parent[static_cast<std::size_t>(w)] = v;
        queue.push_back(w);
      }
    }
    r.order.push_back(std::move(order));
  }
  return r;
}

// Route one off-tree point: drop a foot onto its assigned edge, then walk the
// smaller-indexed endpoint's tree path to its component root.
void route_point(const PlanarComplex& P, const GraphRouting& rt, const Pt& q,
                 int edge_idx, std::vector<Seg>* out) {
  const auto& e = P.edges()[static_cast<std::size_t>(edge_idx)];
  const Pt a = P.vertices()[static_cast<std::size_t>(e[0])];
  const Pt b = P.vertices()[static_cast<std::size_t>(e[1])];
  const double t = closest_param_on_segment(q, a, b);
  const Pt foot = lerp(a, b, t);
  if (dist(q, foot) > 1e-12) out->push_back(Seg{q, foot});
  const int anchor = std::min(e[0], e[1]);
  const Pt av = P.vertices()[static_cast<std::size_t>(anchor)];
  if (dist(foot, av) > 1e-12) out->push_back(Seg{foot, av});
  int v = anchor;
  while (rt.parent[static_cast<std::size_t>(v)] >= 0) {
    const int w = rt.parent[static_cast<std::size_t>(v)];
    out->push_back(Seg{P.vertices()[static_cast<std::size_t>(v)],
                       P.vertices()[static_cast<std::size_t>(w)]});
    v = w;
  }
}

int nearest_edge(const PlanarComplex& P, const Pt& q, double* d_out) {
  int best = -1;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < P.edges().size(); ++i) {
    const auto& e = P.edges()[i];
    const double d = dist_point_segment(q, P.vertices()[static_cast<std::size_t>(e[0])],
                                        P.vertices()[static_cast<std::size_t>(e[1])]);
    if (d < bd) {
      bd = d;
      best = static_cast<int>(i);
    }
  }
  if (d_out) *d_out = bd;
  return best;
}

// Incenter-radial chart of a triangle onto the closed unit disk.
struct TriangleChart {
  Pt a, b, c, incenter;

  double boundary_scale(const Pt& dir) const {  // |dir| = 1
    double s = std::numeric_limits<double>::infinity();
    const std::array<std::pair<Pt, Pt>, 3> es{{{a, b}, {b, c}, {c, a}}};
    for (const auto& [p, q] : es) {
      const Pt edge = q - p;
      Pt n{edge.y(), -edge.x(), 0.0};
      n = normalized(n);
      if (dot(n, incenter - p) > 0) n = -1.0 * n;  // outward
      const double dn = dot(n, dir);
      if (dn <= 1e-12) continue;
      const double t = dot(n, p - incenter) / dn;
      if (t > 0) s = std::min(s, t);
    }
    return s;
  }
  Pt fwd(const Pt& x) const {
    const Pt v = x - incenter;
    const double nv = norm(v);
    if (nv < 1e-15) return Pt{0, 0, 0};
    const Pt d = (1.0 / nv) * v;
    return (nv / boundary_scale(d)) * d;
  }
  Pt back(const Pt& y) const {
    const double ny = norm(y);
    if (ny < 1e-15) return incenter;
    const Pt d = (1.0 / ny) * y;
    return incenter + (ny * boundary_scale(d)) * d;
  }
  bool contains(const Pt& q, double tol) const {
    const std::array<std::pair<Pt, Pt>, 3> es{{{a, b}, {b, c}, {c, a}}};
    for (const auto& [p, r] : es) {
      const Pt edge = r - p;
      Pt n{edge.y(), -edge.x(), 0.0};
      n = normalized(n);
      if (dot(n, incenter - p) > 0) n = -1.0 * n;
      if (dot(n, q - p) > tol) return false;
    }
    return true;
  }
};

TriangleChart make_chart(const PlanarComplex& P, const std::array<int, 3>& t) {
  TriangleChart ch;
  ch.a = P.vertices()[static_cast<std::size_t>(t[0])];
  ch.b = P.vertices()[static_cast<std::size_t>(t[1])];
  ch.c = P.vertices()[static_cast<std::size_t>(t[2])];
  const double la = dist(ch.b, ch.c), lb = dist(ch.c, ch.a), lc = dist(ch.a, ch.b);
  ch.incenter = (1.0 / (la + lb + lc)) * (la * ch.a + lb * ch.b + lc * ch.c);
  return ch;
}

}  // namespace

ParametricFillResult parametric_fill(const ZeroFamily& F,
                                     const PlanarComplex& P, int p,
                                     const Exec& ex, std::uint64_t seed) {
  const int m = P.m();
  if (p < (m == 1 ? 1 : 2)) throw BadSpec("parameter budget too small");
  for (const auto& [k, z] : F.values) {
    (void)k;
    if (z.dim() != 2) throw DimUnsupported("parametric fill needs planar values");
  }
  const double r = std::pow(static_cast<double>(p), -1.0 / m);
  const GraphRouting routing = build_routing(P);

  std::vector<std::vector<int>> keys;
  for (const auto& [k, z] : F.values) {
    (void)z;
    keys.push_back(k);
  }
  std::sort(keys.begin(), keys.end());

  ParametricReport rep;
  rep.m = m;
  rep.p = p;
  rep.r = r;
  rep.vertices = keys.size();
  rep.cells = F.complex.size();

  const double kOnEdgeTol = 1e-7;

  // Classify every value point: skeleton points route through the edge
  // graph, interior points go to their containing triangle's disk chart.
  struct VertexSplit {
    std::vector<std::pair<Pt, int>> skeleton;           // (point, edge)
    std::vector<std::vector<Pt>> tri;                   // per triangle
  };
  std::vector<VertexSplit> splits(keys.size());
  std::vector<TriangleChart> charts;
  for (const auto& t : P.triangles()) charts.push_back(make_chart(P, t));

  for (std::size_t vi = 0; vi < keys.size(); ++vi) {
    VertexSplit& sp = splits[vi];
    sp.tri.resize(charts.size());
    for (const Pt& q : F.values.at(keys[vi]).points()) {
      double d = 0.0;
      const int e = nearest_edge(P, q, &d);
      if (e >= 0 && d <= kOnEdgeTol) {
        sp.skeleton.emplace_back(q, e);
        continue;
      }
      if (m == 1) throw BadSpec("value point off the graph skeleton");
      int owner = -1;
      for (std::size_t c = 0; c < charts.size(); ++c)
        if (charts[c].contains(q, 1e-9)) {
          owner = static_cast<int>(c);
          break;
        }
      if (owner < 0) throw BadSpec("value point outside the triangulated domain");
      sp.tri[static_cast<std::size_t>(owner)].push_back(q);
    }
  }
  for (std::size_t vi = 0; vi < keys.size(); ++vi)
    rep.mass0 = std::max(
        rep.mass0, static_cast<double>(F.values.at(keys[vi]).mass()));

  // Per-triangle disk fillings for the interior load.
  std::vector<std::vector<OneChain>> tri_fill(
      charts.size(), std::vector<OneChain>(keys.size(), OneChain(2)));
  std::vector<std::vector<ZeroChain>> tri_rim(
      charts.size(), std::vector<ZeroChain>(keys.size(), ZeroChain(2)));
  std::vector<double> tri_c(charts.size(), 0.0);

  auto snap_to_skeleton = [&](const Pt& q) {
    double d = 0.0;
    const int e = nearest_edge(P, q, &d);
    hard_assert(e >= 0 && d <= 1e-5, "rim point strays from the skeleton");
    const auto& ed = P.edges()[static_cast<std::size_t>(e)];
    const Pt a = P.vertices()[static_cast<std::size_t>(ed[0])];
    const Pt b = P.vertices()[static_cast<std::size_t>(ed[1])];
    return std::make_pair(lerp(a, b, closest_param_on_segment(q, a, b)), e);
  };

  for (std::size_t c = 0; c < charts.size(); ++c) {
    const TriangleChart& ch = charts[c];
    ZeroFamily disk;
    disk.complex = F.complex;
    disk.provenance = "triangle-chart";
    std::size_t mass_q = 0;
    bool any = false;
    for (std::size_t vi = 0; vi < keys.size(); ++vi) {
      std::vector<Pt> pts;
      for (const Pt& q : splits[vi].tri[c]) pts.push_back(ch.fwd(q));
      mass_q = std::max(mass_q, pts.size());
      if (!pts.empty()) any = true;
      disk.values.emplace(keys[vi], ZeroChain::of(2, pts));
    }
    if (!any) continue;

    const BendCancelResult bc = bend_cancel_fill(
        disk, r, Ball{Pt{0.0, -1.0, 0.0}, 0.3}, ex,
        task_seed(seed, "triangle:" + std::to_string(c)));

    for (std::size_t vi = 0; vi < keys.size(); ++vi) {
      const OneChain& Gd = bc.filling.values.at(keys[vi]);
      // Map the disk filling back through the chart; near-circle endpoints
      // snap onto the skeleton so rims cancel exactly against the routed
      // remainder.
      // Only genuine circle points (ray exits) snap to the skeleton; interior
      // points that merely sit close to the circle must come back to their
      // exact origin so the boundary cancels against the family value.
      auto map_back = [&](const Pt& y) {
        const Pt x = ch.back(y);
        if (norm(y) >= 1.0 - 1e-8) return snap_to_skeleton(x).first;
        return x;
      };
      std::vector<Seg> segs;
      for (const Seg& s : Gd.segments()) {
        const Pt A = map_back(s.a), B = map_back(s.b);
        if (dist(A, B) > 1e-12) segs.push_back(Seg{A, B});
      }
      tri_fill[c][vi] = OneChain::of(2, segs);

      // Rim: the boundary defect of the disk filling, pulled back and
      // snapped with the same map.
      const ZeroChain defect =
          add_zero(boundary_one(Gd), disk.values.at(keys[vi]));
      std::vector<Pt> rim;
      for (const Pt& y : defect.points()) rim.push_back(map_back(y));
      tri_rim[c][vi] = ZeroChain::of(2, rim);

      const std::size_t rim_mass = tri_rim[c][vi].mass();
      const double rim_cap = 4.0 * (static_cast<double>(mass_q) + p + 1.0);
      hard_assert(static_cast<double>(rim_mass) <= rim_cap,
                  "triangle rim mass exceeds its budget");
      rep.rim_factor = std::max(rep.rim_factor, rim_mass / rim_cap);

      const double denom =
          static_cast<double>(mass_q) * r + 1.0 / r;
      hard_assert(tri_fill[c][vi].mass() <= 64.0 * 4.0 * denom,
                  "triangle fill mass far exceeds its profile");
      tri_c[c] = std::max(tri_c[c], bc.report.c_measured);
    }

    // Chart distortion, sampled over random interior pairs.
    Rng rng(task_seed(seed, "chart-distortion") + c);
    for (int it = 0; it < 200; ++it) {
      const double u1 = rng.uniform(), u2 = rng.uniform();
      const double v1 = rng.uniform(), v2 = rng.uniform();
      auto bary = [&](double s, double t) {
        const double ss = std::min(s, t), tt = std::max(s, t);
        return ch.a + ss * (ch.b - ch.a) + (tt - ss) * (ch.c - ch.a);
      };
      const Pt x = bary(u1, u2), y = bary(v1, v2);
      const double dxy = dist(x, y);
      if (dxy < 1e-6) continue;
      const double dfw = dist(ch.fwd(x), ch.fwd(y));
      if (dfw > 1e-12) {
        rep.lip_fwd = std::max(rep.lip_fwd, dfw / dxy);
        rep.lip_back = std::max(rep.lip_back, dxy / dfw);
      }
    }
  }

  // Assemble per-vertex fillings: triangle pieces plus the routed remainder
  // (skeleton load and snapped rims), with exact boundary checks.
  OneFamily filling;
  filling.complex = F.complex;
  filling.provenance = "parametric-fill";
  std::vector<OneChain> per_vertex(keys.size(), OneChain(2));
  parallel_for(keys.size(), ex, [&](std::size_t vi) {
    std::vector<Seg> segs;
    std::vector<std::pair<Pt, int>> routed = splits[vi].skeleton;
    for (std::size_t c = 0; c < charts.size(); ++c) {
      for (const Seg& s : tri_fill[c][vi].segments()) segs.push_back(s);
      for (const Pt& q : tri_rim[c][vi].points()) {
        double d = 0.0;
        const int e = nearest_edge(P, q, &d);
        routed.emplace_back(q, e);
      }
    }
    // Parity per graph component must close.
    std::vector<int> parity(static_cast<std::size_t>(routing.components), 0);
    for (const auto& [q, e] : routed) {
      (void)q;
      const int comp =
          routing.component[static_cast<std::size_t>(P.edges()[static_cast<std::size_t>(e)][0])];
      parity[static_cast<std::size_t>(comp)] ^= 1;
    }
    for (int par : parity)
      if (par) throw NotContractible("odd point load on a graph component");
    for (const auto& [q, e] : routed) route_point(P, routing, q, e, &segs);
    OneChain G = reduce_overlaps(OneChain::of(2, segs));

    const ZeroChain bd = boundary_one(G);
    hard_assert(add_zero(bd, F.values.at(keys[vi])).empty(),
                "parametric filling boundary must equal the family value");
    if (m == 1)
      hard_assert(G.mass() <= P.length() + 1e-6,
                  "graph filling mass exceeds the skeleton length");
    per_vertex[vi] = std::move(G);
  });

  double graph_len = 0.0;
  for (std::size_t vi = 0; vi < keys.size(); ++vi) {
    rep.max_fill_mass = std::max(rep.max_fill_mass, per_vertex[vi].mass());
    filling.values.emplace(keys[vi], std::move(per_vertex[vi]));
  }
  graph_len = P.length();
  rep.graph_mass = graph_len;
  const double denom = rep.mass0 * std::pow(static_cast<double>(p), -1.0 / m) +
                       std::pow(static_cast<double>(p), (m - 1.0) / m);
  rep.c_measured = denom > 0 ? rep.max_fill_mass / denom : 0.0;
  return ParametricFillResult{std::move(filling), rep};
}

// --------------------------------------------------------------------- json

nlohmann::json bend_cancel_report_to_json(const BendCancelReport& rep) {
  nlohmann::json j;
  j["dim"] = rep.dim;
  j["R"] = rep.R;
  j["r"] = rep.r;
  j["cap_angle"] = rep.cap_angle;
  j["max_input_mass"] = rep.max_input_mass;
  j["max_fill_mass"] = rep.max_fill_mass;
  j["c_measured"] = rep.c_measured;
  j["boundary_factor"] = rep.boundary_factor;
  j["max_displacement"] = rep.max_displacement;
  j["max_deform_ratio"] = rep.max_deform_ratio;
  j["attempts"] = rep.attempts;
  j["vertices"] = rep.vertices;
  return j;
}

nlohmann::json avoid_report_to_json(const AvoidReport& rep) {
  nlohmann::json j;
  j["q"] = rep.q;
  j["p"] = rep.p;
  j["L"] = rep.L;
  j["delta_in"] = rep.delta_in;
  j["delta_out"] = rep.delta_out;
  j["flips"] = rep.flips;
  j["cells"] = rep.cells;
  j["max_mass_excess"] = rep.max_mass_excess;
  j["ring_radius_min"] = rep.ring_radius_min;
  j["ring_radius_max"] = rep.ring_radius_max;
  j["ring_clearance"] = rep.ring_clearance;
  j["corridor_clearance"] = rep.corridor_clearance;
  j["localization"] = localized_report_to_json(rep.localization);
  return j;
}

nlohmann::json parametric_report_to_json(const ParametricReport& rep) {
  nlohmann::json j;
  j["m"] = rep.m;
  j["p"] = rep.p;
  j["r"] = rep.r;
  j["mass0"] = rep.mass0;
  j["max_fill_mass"] = rep.max_fill_mass;
  j["c_measured"] = rep.c_measured;
  j["graph_mass"] = rep.graph_mass;
  j["rim_factor"] = rep.rim_factor;
  j["lip_fwd"] = rep.lip_fwd;
  j["lip_back"] = rep.lip_back;
  j["cells"] = rep.cells;
  j["vertices"] = rep.vertices;
  return j;
}

nlohmann::json delta_estimate_to_json(const DeltaEstimate& est) {
  nlohmann::json j;
  j["dim"] = est.dim;
  j["delta_n"] = est.delta_n;
  j["bisect_iters"] = est.bisect_iters;
  j["families_per_iter"] = est.families_per_iter;
  j["seed"] = est.seed;
  return j;
}

}  // namespace cf
