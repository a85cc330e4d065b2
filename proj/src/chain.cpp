#include "chainforge/chain.hpp"

#include <algorithm>
#include <cstring>
#include <string>

#include "chainforge/errors.hpp"

namespace cf {

namespace {

// Sorts items and cancels coincident pairs mod 2. `first_coord` gives the
// leading sort coordinate so candidates for cancellation are confined to a
// window; `eq` is geometric coincidence.
template <class T, class Less, class FirstCoord, class Eq>
std::vector<T> mod2_reduce(std::vector<T> v, Less less, FirstCoord first_coord,
                           Eq eq) {
  std::sort(v.begin(), v.end(), less);
  const double eps = eps_geom();
  std::vector<char> dead(v.size(), 0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (dead[i]) continue;
    for (std::size_t j = i + 1; j < v.size(); ++j) {
      if (first_coord(v[j]) - first_coord(v[i]) > eps) break;
      if (!dead[j] && eq(v[i], v[j])) {
        dead[i] = dead[j] = 1;
        break;
      }
    }
  }
  std::vector<T> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!dead[i]) out.push_back(std::move(v[i]));
  return out;
}

Seg normalize_seg(Seg s) {
  if (lex_less(s.b, s.a)) std::swap(s.a, s.b);
  return s;
}

bool seg_less(const Seg& x, const Seg& y) {
  if (lex_less(x.a, y.a)) return true;
  if (lex_less(y.a, x.a)) return false;
  return lex_less(x.b, y.b);
}

bool seg_eq(const Seg& x, const Seg& y) {
  return pt_eq(x.a, y.a) && pt_eq(x.b, y.b);
}

Tri normalize_tri(Tri t) {
  if (lex_less(t.b, t.a)) std::swap(t.a, t.b);
  if (lex_less(t.c, t.b)) std::swap(t.b, t.c);
  if (lex_less(t.b, t.a)) std::swap(t.a, t.b);
  return t;
}

bool tri_less(const Tri& x, const Tri& y) {
  if (lex_less(x.a, y.a)) return true;
  if (lex_less(y.a, x.a)) return false;
  if (lex_less(x.b, y.b)) return true;
  if (lex_less(y.b, x.b)) return false;
  return lex_less(x.c, y.c);
}

bool tri_eq(const Tri& x, const Tri& y) {
  return pt_eq(x.a, y.a) && pt_eq(x.b, y.b) && pt_eq(x.c, y.c);
}

int join_dims(int da, bool a_empty, int db, bool b_empty) {
  if (a_empty) return db;
  if (b_empty) return da;
  if (da != db) throw BadSpec("mod-2 sum of chains of different ambient dims");
  return da;
}

void append_doubles(std::string& out, const double* d, std::size_t n) {
  const char* raw = reinterpret_cast<const char*>(d);
  out.append(raw, raw + n * sizeof(double));
}

}  // namespace

// ---------------------------------------------------------------- ZeroChain

ZeroChain ZeroChain::of(int dim, std::vector<Pt> pts) {
  ZeroChain z(dim);
  z.pts_ = mod2_reduce(
      std::move(pts), [](const Pt& a, const Pt& b) { return lex_less(a, b); },
      [](const Pt& p) { return p.x(); },
      [](const Pt& a, const Pt& b) { return pt_eq(a, b); });
  return z;
}

bool ZeroChain::operator==(const ZeroChain& o) const {
  if (pts_.size() != o.pts_.size()) return false;
  for (std::size_t i = 0; i < pts_.size(); ++i)
    if (!pt_eq(pts_[i], o.pts_[i])) return false;
  return true;
}

ZeroChain add_zero(const ZeroChain& a, const ZeroChain& b) {
  int dim = join_dims(a.dim(), a.empty(), b.dim(), b.empty());
  std::vector<Pt> pts = a.points();
  pts.insert(pts.end(), b.points().begin(), b.points().end());
  return ZeroChain::of(dim, std::move(pts));
}

// ----------------------------------------------------------------- OneChain

OneChain OneChain::of(int dim, std::vector<Seg> segs) {
  const double eps = eps_geom();
  std::vector<Seg> kept;
  kept.reserve(segs.size());
  for (Seg& s : segs) {
    if (s.length() > eps) kept.push_back(normalize_seg(s));
  }
  OneChain c(dim);
  c.segs_ = mod2_reduce(
      std::move(kept), seg_less, [](const Seg& s) { return s.a.x(); }, seg_eq);
  return c;
}

double OneChain::mass() const {
  double m = 0;
  for (const Seg& s : segs_) m += s.length();
  return m;
}

bool OneChain::operator==(const OneChain& o) const {
  if (segs_.size() != o.segs_.size()) return false;
  for (std::size_t i = 0; i < segs_.size(); ++i)
    if (!seg_eq(segs_[i], o.segs_[i])) return false;
  return true;
}

OneChain add_one(const OneChain& a, const OneChain& b) {
  int dim = join_dims(a.dim(), a.empty(), b.dim(), b.empty());
  std::vector<Seg> segs = a.segments();
  segs.insert(segs.end(), b.segments().begin(), b.segments().end());
  return OneChain::of(dim, std::move(segs));
}

// ----------------------------------------------------------------- TwoChain

double Tri::area() const { return 0.5 * norm(cross(b - a, c - a)); }

TwoChain TwoChain::of(std::vector<Tri> tris) {
  const double eps = eps_geom();
  std::vector<Tri> kept;
  kept.reserve(tris.size());
  for (Tri& t : tris) {
    if (t.area() > eps) kept.push_back(normalize_tri(t));
  }
  TwoChain c;
  c.tris_ = mod2_reduce(
      std::move(kept), tri_less, [](const Tri& t) { return t.a.x(); }, tri_eq);
  return c;
}

double TwoChain::mass() const {
  double m = 0;
  for (const Tri& t : tris_) m += t.area();
  return m;
}

TwoChain add_two(const TwoChain& a, const TwoChain& b) {
  std::vector<Tri> tris = a.triangles();
  tris.insert(tris.end(), b.triangles().begin(), b.triangles().end());
  return TwoChain::of(std::move(tris));
}

// ---------------------------------------------------------------- boundary

ZeroChain boundary_one(const OneChain& c) {
  std::vector<Pt> pts;
  pts.reserve(2 * c.segments().size());
  for (const Seg& s : c.segments()) {
    pts.push_back(s.a);
    pts.push_back(s.b);
  }
  return ZeroChain::of(c.dim(), std::move(pts));
}

OneChain boundary_two(const TwoChain& t) {
  std::vector<Seg> segs;
  segs.reserve(3 * t.triangles().size());
  for (const Tri& tr : t.triangles()) {
    segs.push_back({tr.a, tr.b});
    segs.push_back({tr.b, tr.c});
    segs.push_back({tr.a, tr.c});
  }
  return OneChain::of(t.dim(), std::move(segs));
}

// -------------------------------------------------------------- restriction

ZeroChain restrict_zero(const ZeroChain& z, const Region& A) {
  std::vector<Pt> pts;
  for (const Pt& p : z.points())
    if (A.contains(p)) pts.push_back(p);
  return ZeroChain::of(z.dim(), std::move(pts));
}

OneChain restrict_one(const OneChain& c, const Region& A) {
  const double eps = eps_geom();
  std::vector<Seg> pieces;
  for (const Seg& s : c.segments()) {
    std::vector<double> ts = A.crossings(s.a, s.b);
    ts.push_back(1.0);
    double prev = 0.0;
    for (double t : ts) {
      if (t - prev > 0) {
        Pt pa = lerp(s.a, s.b, prev);
        Pt pb = lerp(s.a, s.b, t);
        if (dist(pa, pb) > eps && A.contains(lerp(s.a, s.b, 0.5 * (prev + t))))
          pieces.push_back({pa, pb});
      }
      prev = t;
    }
  }
  return OneChain::of(c.dim(), std::move(pieces));
}

OneChain reduce_overlaps(const OneChain& c) {
  const double eps = eps_geom();
  const auto& segs = c.segments();
  const std::size_t m = segs.size();
  std::vector<bool> grouped(m, false);
  std::vector<Seg> out;
  for (std::size_t i = 0; i < m; ++i) {
    if (grouped[i]) continue;
    if (segs[i].length() <= eps) {
      grouped[i] = true;
      continue;
    }
    const Pt o = segs[i].a;
    const Pt d = normalized(segs[i].b - segs[i].a);
    auto on_line = [&](const Pt& p) { return norm(cross(d, p - o)) <= eps; };
    std::vector<std::size_t> line;
    for (std::size_t j = i; j < m; ++j) {
      if (grouped[j] || !on_line(segs[j].a) || !on_line(segs[j].b)) continue;
      grouped[j] = true;
      line.push_back(j);
    }
    if (line.size() == 1) {
      out.push_back(segs[i]);
      continue;
    }
    // Cut parameters along the line; remember an original point per cut so
    // merged runs reuse input coordinates instead of reconstructed ones.
    std::vector<std::pair<double, Pt>> cuts;
    for (std::size_t j : line) {
      cuts.emplace_back(dot(segs[j].a - o, d), segs[j].a);
      cuts.emplace_back(dot(segs[j].b - o, d), segs[j].b);
    }
    std::sort(cuts.begin(), cuts.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::pair<double, Pt>> uniq;
    for (const auto& cu : cuts) {
      if (!uniq.empty() && cu.first - uniq.back().first <= eps) {
        if (lex_less(cu.second, uniq.back().second)) uniq.back() = cu;
        continue;
      }
      uniq.push_back(cu);
    }
    std::vector<std::pair<double, double>> spans;
    for (std::size_t j : line) {
      double t0 = dot(segs[j].a - o, d), t1 = dot(segs[j].b - o, d);
      spans.emplace_back(std::min(t0, t1), std::max(t0, t1));
    }
    std::size_t run_start = uniq.size();
    for (std::size_t k = 0; k + 1 < uniq.size(); ++k) {
      const double mid = 0.5 * (uniq[k].first + uniq[k + 1].first);
      int cover = 0;
      for (const auto& sp : spans)
        if (sp.first < mid && mid < sp.second) ++cover;
      const bool odd = (cover % 2) != 0 && uniq[k + 1].first - uniq[k].first > eps;
      if (odd && run_start == uniq.size()) run_start = k;
      if (!odd && run_start != uniq.size()) {
        out.push_back({uniq[run_start].second, uniq[k].second});
        run_start = uniq.size();
      }
    }
    if (run_start != uniq.size())
      out.push_back({uniq[run_start].second, uniq.back().second});
  }
  return OneChain::of(c.dim(), std::move(out));
}

// ------------------------------------------------------------------ slicing

ZeroChain slice_sphere(const OneChain& c, const Pt& center, double s) {
  const double eps = eps_geom();
  std::vector<Pt> pts;
  for (const Seg& seg : c.segments()) {
    const double da = dist(seg.a, center), db = dist(seg.b, center);
    const double dmin = dist_point_segment(center, seg.a, seg.b);
    if (dmin > s + eps) continue;
    if (std::max(da, db) < s - eps) continue;
    if (std::abs(da - s) <= eps || std::abs(db - s) <= eps)
      throw TangencyError("segment endpoint on slicing sphere");
    if (std::abs(dmin - s) <= eps)
      throw TangencyError("segment tangent to slicing sphere");
    const Pt d = seg.b - seg.a, f = seg.a - center;
    const double A = dot(d, d), B = 2.0 * dot(f, d), C = dot(f, f) - s * s;
    const double disc = B * B - 4.0 * A * C;
    if (disc <= 0.0 || A == 0.0) continue;
    const double sq = std::sqrt(disc);
    for (double t : {(-B - sq) / (2.0 * A), (-B + sq) / (2.0 * A)}) {
      if (t > 0.0 && t < 1.0) pts.push_back(lerp(seg.a, seg.b, t));
    }
  }
  return ZeroChain::of(c.dim(), std::move(pts));
}

std::size_t slice_count(const OneChain& c, const Pt& center, double s) {
  std::size_t n = 0;
  for (const Seg& seg : c.segments()) {
    const double da = dist(seg.a, center), db = dist(seg.b, center);
    const double dmin = dist_point_segment(center, seg.a, seg.b);
    if (s <= dmin) continue;
    n += (da > s) + (db > s);
  }
  return n;
}

std::vector<double> slice_breakpoints(const OneChain& c, const Pt& center) {
  std::vector<double> bs;
  for (const Seg& seg : c.segments()) {
    bs.push_back(dist(seg.a, center));
    bs.push_back(dist(seg.b, center));
    double t = closest_param_on_segment(center, seg.a, seg.b);
    if (t > 0.0 && t < 1.0)
      bs.push_back(dist(center, lerp(seg.a, seg.b, t)));
  }
  std::sort(bs.begin(), bs.end());
  return bs;
}

// -------------------------------------------------------------------- cones

OneChain cone_fill(const ZeroChain& z, const Pt& apex) {
  std::vector<Seg> segs;
  segs.reserve(z.mass());
  for (const Pt& p : z.points()) {
    if (!pt_eq(p, apex)) segs.push_back({apex, p});
  }
  return OneChain::of(z.dim(), std::move(segs));
}

TwoChain cone_fill_one(const OneChain& c, const Pt& apex) {
  std::vector<Tri> tris;
  tris.reserve(c.segments().size());
  for (const Seg& s : c.segments()) tris.push_back({apex, s.a, s.b});
  return TwoChain::of(std::move(tris));
}

// --------------------------------------------------------------------- keys

std::string canonical_key(const OneChain& c) {
  std::string out;
  out.reserve(c.segments().size() * 6 * sizeof(double) + 8);
  out.push_back('1');
  out.push_back(static_cast<char>('0' + c.dim()));
  for (const Seg& s : c.segments()) {
    append_doubles(out, s.a.c.data(), 3);
    append_doubles(out, s.b.c.data(), 3);
  }
  return out;
}

std::string canonical_key(const ZeroChain& z) {
  std::string out;
  out.reserve(z.points().size() * 3 * sizeof(double) + 8);
  out.push_back('0');
  out.push_back(static_cast<char>('0' + z.dim()));
  for (const Pt& p : z.points()) append_doubles(out, p.c.data(), 3);
  return out;
}

}  // namespace cf
