#include "chainforge/region.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "chainforge/errors.hpp"

namespace cf {

struct Region::Impl {
  virtual ~Impl() = default;
  virtual bool contains(const Pt& p) const = 0;
  /// Appends boundary-crossing parameters (in the open interval (0,1)) of the
  /// segment [a,b]; throws DegenerateCrossing on near-tangency / on-boundary
  /// configurations that make the crossing parity ill-defined.
  virtual void crossings(const Pt& a, const Pt& b,
                         std::vector<double>& out) const = 0;
  virtual bool bbox(Pt& lo, Pt& hi) const = 0;
};

namespace {

// Appends the sphere-crossing parameters of [a,b] against |x - c| = r and
// enforces the degeneracy preconditions shared by balls and caps. `filter`
// may reject individual crossing points (used by caps).
template <class Filter>
void sphere_crossings(const Pt& a, const Pt& b, const Pt& c, double r,
                      std::vector<double>& out, Filter&& filter) {
  const double eps = eps_geom();
  const double da = dist(a, c), db = dist(b, c);
  const double dmin = dist_point_segment(c, a, b);
  if (dmin > r + eps) return;                   // fully clear outside
  if (std::max(da, db) < r - eps) return;       // fully inside (balls convex)
  if (std::abs(da - r) <= eps || std::abs(db - r) <= eps)
    throw DegenerateCrossing("segment endpoint on sphere boundary");
  if (std::abs(dmin - r) <= eps)
    throw DegenerateCrossing("segment tangent to sphere");
  const Pt d = b - a, f = a - c;
  const double A = dot(d, d), B = 2.0 * dot(f, d), C = dot(f, f) - r * r;
  const double disc = B * B - 4.0 * A * C;
  if (disc <= 0.0 || A == 0.0) return;
  const double sq = std::sqrt(disc);
  for (double t : {(-B - sq) / (2.0 * A), (-B + sq) / (2.0 * A)}) {
    if (t > 0.0 && t < 1.0 && filter(lerp(a, b, t))) out.push_back(t);
  }
}

double cross2(const Pt& u, const Pt& v) { return u.x() * v.y() - u.y() * v.x(); }

struct WholeImpl final : Region::Impl {
  bool contains(const Pt&) const override { return true; }
  void crossings(const Pt&, const Pt&, std::vector<double>&) const override {}
  bool bbox(Pt&, Pt&) const override { return false; }
};

struct BallImpl final : Region::Impl {
  Pt c;
  double r;
  bool open;  // open => strict interior (the disk-interior case)
  BallImpl(Pt c_, double r_, bool open_) : c(c_), r(r_), open(open_) {}
  bool contains(const Pt& p) const override {
    double d2 = norm2(p - c);
    return open ? d2 < r * r : d2 <= r * r;
  }
  void crossings(const Pt& a, const Pt& b,
                 std::vector<double>& out) const override {
    sphere_crossings(a, b, c, r, out, [](const Pt&) { return true; });
  }
  bool bbox(Pt& lo, Pt& hi) const override {
    lo = c - Pt{r, r, r};
    hi = c + Pt{r, r, r};
    return true;
  }
};

struct CapImpl final : Region::Impl {
  Pt e;  // unit direction of the cap center
  double L;
  CapImpl(Pt e_, double L_) : e(normalized(e_)), L(L_) {}
  bool on_sphere(const Pt& p) const {
    return std::abs(norm(p) - 1.0) <= eps_geom();
  }
  bool contains(const Pt& p) const override {
    return on_sphere(p) && angle_between(p, e) <= L;
  }
  void crossings(const Pt& a, const Pt& b,
                 std::vector<double>& out) const override {
    // A straight segment meets the cap (a subset of the unit sphere) in the
    // sphere-crossing points that land inside the cap.
    sphere_crossings(a, b, Pt{0, 0, 0}, 1.0, out, [this](const Pt& p) {
      return angle_between(p, e) <= L;
    });
  }
  bool bbox(Pt& lo, Pt& hi) const override {
    lo = Pt{-1, -1, -1};
    hi = Pt{1, 1, 1};
    return true;
  }
};

struct HalfspaceImpl final : Region::Impl {
  Pt n;  // unit normal
  double off;
  HalfspaceImpl(Pt n_, double off_) {
    double len = norm(n_);
    if (len == 0.0) throw BadSpec("halfspace with zero normal");
    n = (1.0 / len) * n_;
    off = off_ / len;
  }
  bool contains(const Pt& p) const override { return dot(n, p) <= off; }
  void crossings(const Pt& a, const Pt& b,
                 std::vector<double>& out) const override {
    const double eps = eps_geom();
    const double g0 = dot(n, a) - off, g1 = dot(n, b) - off;
    if (std::abs(g0) <= eps && std::abs(g1) <= eps)
      throw DegenerateCrossing("segment lies in halfspace boundary plane");
    if ((g0 > eps && g1 > eps) || (g0 < -eps && g1 < -eps)) return;
    if (std::abs(g0) <= eps || std::abs(g1) <= eps)
      throw DegenerateCrossing("segment endpoint on halfspace boundary");
    if ((g0 > 0) == (g1 > 0)) return;
    double t = g0 / (g0 - g1);
    if (t > 0.0 && t < 1.0) out.push_back(t);
  }
  bool bbox(Pt&, Pt&) const override { return false; }
};

struct TriangleImpl final : Region::Impl {
  Pt v[3];  // counterclockwise in the z = 0 plane
  TriangleImpl(Pt a, Pt b, Pt c) {
    double signed2 = cross2(b - a, c - a);
    if (std::abs(signed2) <= eps_geom())
      throw BadSpec("degenerate triangle region");
    if (signed2 < 0) std::swap(b, c);
    v[0] = a;
    v[1] = b;
    v[2] = c;
  }
  bool contains(const Pt& p) const override {
    if (std::abs(p.z()) > eps_geom()) return false;
    const double eps = eps_geom();
    for (int i = 0; i < 3; ++i) {
      const Pt &a = v[i], &b = v[(i + 1) % 3];
      double edge_len = dist(a, b);
      if (cross2(b - a, p - a) < -eps * edge_len) return false;
    }
    return true;
  }
  void crossings(const Pt& a, const Pt& b,
                 std::vector<double>& out) const override {
    const double eps = eps_geom();
    const Pt d = b - a;
    const double dlen = norm(d);
    for (int i = 0; i < 3; ++i) {
      const Pt &e0 = v[i], &e1 = v[(i + 1) % 3];
      const Pt ed = e1 - e0;
      const double elen = norm(ed);
      const double denom = cross2(d, ed);
      if (std::abs(denom) <= eps * dlen * elen) {
        // parallel; degenerate only if the lines are close and spans overlap
        double gap = dist_point_segment(a, e0, e1);
        double gap2 = dist_point_segment(b, e0, e1);
        if (std::min(gap, gap2) <= eps &&
            std::max(gap, gap2) <= 0.5 * std::max(dlen, elen))
          throw DegenerateCrossing("segment collinear with triangle edge");
        continue;
      }
      const double t = cross2(e0 - a, ed) / denom;
      const double u = cross2(e0 - a, d) / denom;
      const double ueps = eps / std::max(elen, eps);
      const double teps = eps / std::max(dlen, eps);
      if (u < -ueps || u > 1.0 + ueps) continue;
      if (t <= -teps || t >= 1.0 + teps) continue;
      if (t <= teps || t >= 1.0 - teps)
        throw DegenerateCrossing("segment endpoint on triangle edge");
      out.push_back(t);
    }
  }
  bool bbox(Pt& lo, Pt& hi) const override {
    for (int k = 0; k < 3; ++k) {
      lo[k] = std::min({v[0][k], v[1][k], v[2][k]});
      hi[k] = std::max({v[0][k], v[1][k], v[2][k]});
    }
    return true;
  }
};

struct ComplementImpl final : Region::Impl {
  std::shared_ptr<const Region::Impl> inner;
  explicit ComplementImpl(std::shared_ptr<const Region::Impl> i)
      : inner(std::move(i)) {}
  bool contains(const Pt& p) const override { return !inner->contains(p); }
  void crossings(const Pt& a, const Pt& b,
                 std::vector<double>& out) const override {
    inner->crossings(a, b, out);
  }
  bool bbox(Pt&, Pt&) const override { return false; }
};

struct ComboImpl final : Region::Impl {
  std::vector<std::shared_ptr<const Region::Impl>> parts;
  bool is_union;  // union of parts; otherwise intersection
  ComboImpl(std::vector<std::shared_ptr<const Region::Impl>> p, bool u)
      : parts(std::move(p)), is_union(u) {}
  bool contains(const Pt& p) const override {
    for (const auto& r : parts) {
      bool in = r->contains(p);
      if (is_union && in) return true;
      if (!is_union && !in) return false;
    }
    return !is_union;
  }
  void crossings(const Pt& a, const Pt& b,
                 std::vector<double>& out) const override {
    for (const auto& r : parts) r->crossings(a, b, out);
  }
  bool bbox(Pt& lo, Pt& hi) const override {
    bool have = false;
    for (const auto& r : parts) {
      Pt l, h;
      if (!r->bbox(l, h)) {
        if (!is_union) continue;  // unbounded member of a union
        return false;
      }
      if (!have) {
        lo = l;
        hi = h;
        have = true;
        continue;
      }
      for (int k = 0; k < 3; ++k) {
        if (is_union) {
          lo[k] = std::min(lo[k], l[k]);
          hi[k] = std::max(hi[k], h[k]);
        } else {
          lo[k] = std::max(lo[k], l[k]);
          hi[k] = std::min(hi[k], h[k]);
        }
      }
    }
    return have;
  }
};

}  // namespace

bool Region::contains(const Pt& p) const { return impl_->contains(p); }

std::vector<double> Region::crossings(const Pt& a, const Pt& b) const {
  std::vector<double> out;
  impl_->crossings(a, b, out);
  std::sort(out.begin(), out.end());
  // merge parameters closer than the geometric tolerance along the segment
  const double teps = eps_geom() / std::max(dist(a, b), eps_geom());
  std::vector<double> merged;
  for (double t : out) {
    if (merged.empty() || t - merged.back() > teps) merged.push_back(t);
  }
  return merged;
}

bool Region::bbox(Pt& lo, Pt& hi) const { return impl_->bbox(lo, hi); }

Region Region::whole() { return Region(std::make_shared<WholeImpl>()); }
Region Region::ball(const Pt& center, double radius) {
  return Region(std::make_shared<BallImpl>(center, radius, false));
}
Region Region::disk_interior() {
  return Region(std::make_shared<BallImpl>(Pt{0, 0, 0}, 1.0, true));
}
Region Region::boundary_cap(const Pt& e, double L) {
  return Region(std::make_shared<CapImpl>(e, L));
}
Region Region::halfspace(const Pt& normal, double offset) {
  return Region(std::make_shared<HalfspaceImpl>(normal, offset));
}
Region Region::triangle(const Pt& a, const Pt& b, const Pt& c) {
  return Region(std::make_shared<TriangleImpl>(a, b, c));
}
Region Region::complement(const Region& r) {
  return Region(std::make_shared<ComplementImpl>(r.impl_));
}
Region Region::intersection(std::vector<Region> rs) {
  std::vector<std::shared_ptr<const Impl>> parts;
  parts.reserve(rs.size());
  for (auto& r : rs) parts.push_back(r.impl_);
  return Region(std::make_shared<ComboImpl>(std::move(parts), false));
}
Region Region::union_of(std::vector<Region> rs) {
  std::vector<std::shared_ptr<const Impl>> parts;
  parts.reserve(rs.size());
  for (auto& r : rs) parts.push_back(r.impl_);
  return Region(std::make_shared<ComboImpl>(std::move(parts), true));
}

}  // namespace cf
