/// @file localize.cpp
/// @brief Localization of fine 0-cycle families over cubical complexes,
/// filling of localized families by 1-chains, and filling splits along
/// convex cells. The pipeline refines the parameter complex stage by stage
/// (one stage per parameter dimension), assigns every refined vertex a value
/// that is a per-grid-domain selection of input values plus a small
/// correction, and certifies every refined edge by a short list of balls.

#include "chainforge/localize.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "chainforge/errors.hpp"
#include "chainforge/region.hpp"

namespace cf {

double localize_delta_cap() { return 1.0 / 3.0; }

namespace {

using VKey = std::vector<int>;

/// Deterministic irrational jitter fractions (leading digits of classical
/// constants): reruns are bit-stable, and input data sitting on round
/// coordinates never coincides with a lattice line.
constexpr std::array<double, 8> kJitterFrac = {
    0.318309886183791, 0.563402861514030, 0.693147180559945,
    0.414213562373095, 0.271828182845905, 0.577215664901533,
    0.161803398874990, 0.786151377757423};

int smallest_odd_ge(int n) {
  n = std::max(n, 1);
  return (n % 2 == 1) ? n : n + 1;
}

/// Internal retry request: a capacity check needs a finer first stage.
struct RetryQ {
  int need = 3;
};

ZeroChain zero_chain(int dim) { return ZeroChain::of(dim, {}); }
OneChain one_chain(int dim) { return OneChain::of(dim, {}); }

double mass_of(const ZeroChain& z) { return static_cast<double>(z.mass()); }

/// One-block coordinate squeeze [0, 3m] -> [0, m]: thirds collapse with the
/// upper representative rounding up, so block endpoints map to endpoints.
int squeeze_third(int t) { return t / 3 + (t % 3 == 2 ? 1 : 0); }

/// Coordinate-wise squeeze of a refined vertex key from stage scale qj
/// (a multiple of 3) to stage scale qj/3, block by block.
VKey squeeze_key(const VKey& v, int qj) {
  VKey s(v.size());
  const int q3 = qj / 3;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const int y = v[i];
    const int b = y >= 0 ? y / qj : -((-y + qj - 1) / qj);
    const int t = y - b * qj;
    s[i] = b * q3 + squeeze_third(t);
  }
  return s;
}

/// Integer radial projection of an interior point of the block [0, S]^j onto
/// the block boundary along the sup-metric ray from the block center. Exact
/// (no rounding) on every axis achieving the sup, so the result lies on the
/// boundary; other axes round deterministically.
VKey radial_to_boundary(const VKey& z, int S) {
  int m = 0;
  for (int zi : z) m = std::max(m, std::abs(2 * zi - S));
  hard_assert(m > 0 && m < S, "radial projection expects an interior point");
  VKey s(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const long long num =
        static_cast<long long>(S) * (m + 2LL * z[i] - S);
    const long long den = 2LL * m;
    s[i] = static_cast<int>((num + m) / den);
  }
  return s;
}

/// Total filling of an even 0-chain: the flat-norm matching plus a
/// deterministic pairing of any residual points, so the boundary reproduces
/// the chain exactly.
OneChain total_filling(const ZeroChain& z) {
  if (z.empty()) return one_chain(z.dim());
  const FlatWitness w = flat_norm(z);
  std::vector<Seg> segs;
  segs.reserve(w.matched_pairs.size());
  for (const auto& pr : w.matched_pairs) segs.push_back(Seg{pr.first, pr.second});
  const std::vector<Pt> res = w.residual().points();
  hard_assert(res.size() % 2 == 0, "total filling needs an even chain");
  for (std::size_t i = 0; i + 1 < res.size(); i += 2)
    segs.push_back(Seg{res[i], res[i + 1]});
  OneChain fill = OneChain::of(z.dim(), std::move(segs));
  hard_assert(boundary_one(fill) == z, "total filling boundary mismatch");
  return fill;
}

bool ball_has(const Ball& b, const Pt& p) {
  return dist(p, b.center) <= b.radius + eps_geom();
}

/// Greedy minimal cover of a point set by candidate balls. Hard-fails when
/// the candidates cannot cover: the candidate sets are constructed to carry
/// every legal step, so a gap is a construction bug.
std::vector<Ball> cover_filter_points(const std::vector<Ball>& cand,
                                      const std::vector<Pt>& pts) {
  if (pts.empty()) return {};
  std::vector<bool> covered(pts.size(), false);
  std::vector<Ball> kept;
  std::size_t left = pts.size();
  while (left > 0) {
    std::size_t best = cand.size();
    std::size_t best_gain = 0;
    for (std::size_t i = 0; i < cand.size(); ++i) {
      std::size_t gain = 0;
      for (std::size_t k = 0; k < pts.size(); ++k)
        if (!covered[k] && ball_has(cand[i], pts[k])) ++gain;
      if (gain > best_gain) {
        best_gain = gain;
        best = i;
      }
    }
    hard_assert(best < cand.size(),
                "certificate candidates fail to cover a value step");
    kept.push_back(cand[best]);
    for (std::size_t k = 0; k < pts.size(); ++k)
      if (!covered[k] && ball_has(cand[best], pts[k])) {
        covered[k] = true;
        --left;
      }
  }
  return kept;
}

/// Greedy cover of segments (a segment needs both endpoints, hence by
/// convexity all of it, inside one ball). Segments no candidate spans —
/// support reduction can fuse collinear pieces into runs longer than any
/// recorded step — fall back to their own enclosing balls.
std::vector<Ball> cover_filter_segments(const std::vector<Ball>& cand,
                                        const std::vector<Seg>& segs) {
  if (segs.empty()) return {};
  std::vector<bool> covered(segs.size(), false);
  std::vector<Ball> kept;
  std::size_t left = segs.size();
  auto holds = [&](const Ball& b, const Seg& s) {
    return ball_has(b, s.a) && ball_has(b, s.b);
  };
  while (left > 0) {
    std::size_t best = cand.size();
    std::size_t best_gain = 0;
    for (std::size_t i = 0; i < cand.size(); ++i) {
      std::size_t gain = 0;
      for (std::size_t k = 0; k < segs.size(); ++k)
        if (!covered[k] && holds(cand[i], segs[k])) ++gain;
      if (gain > best_gain) {
        best_gain = gain;
        best = i;
      }
    }
    if (best >= cand.size()) break;
    kept.push_back(cand[best]);
    for (std::size_t k = 0; k < segs.size(); ++k)
      if (!covered[k] && holds(cand[best], segs[k])) {
        covered[k] = true;
        --left;
      }
  }
  for (std::size_t k = 0; k < segs.size(); ++k)
    if (!covered[k])
      kept.push_back(Ball{lerp(segs[k].a, segs[k].b, 0.5),
                          0.5 * segs[k].length() * (1.0 + 1e-9) +
                              10.0 * eps_geom()});
  return kept;
}

/// Budget-free disjointification: dedup, then repeatedly replace two
/// intersecting (or nested) balls by their enclosing ball. The radius sum
/// never grows, so the resulting family is valid at just above its own sum.
AdmissibleFamily disjoint_family(std::vector<Ball> balls) {
  const double eps = eps_geom();
  std::sort(balls.begin(), balls.end(), [](const Ball& a, const Ball& b) {
    if (lex_less(a.center, b.center)) return true;
    if (lex_less(b.center, a.center)) return false;
    return a.radius < b.radius;
  });
  balls.erase(std::unique(balls.begin(), balls.end(),
                          [&](const Ball& a, const Ball& b) {
                            return dist(a.center, b.center) <= eps &&
                                   std::fabs(a.radius - b.radius) <= eps;
                          }),
              balls.end());
  bool merged = true;
  while (merged) {
    merged = false;
    for (std::size_t i = 0; i < balls.size() && !merged; ++i)
      for (std::size_t j = i + 1; j < balls.size() && !merged; ++j) {
        const Ball& a = balls[i];
        const Ball& b = balls[j];
        const double d = dist(a.center, b.center);
        if (d > a.radius + b.radius + eps) continue;
        Ball enc;
        if (d + b.radius <= a.radius) {
          enc = a;
        } else if (d + a.radius <= b.radius) {
          enc = b;
        } else {
          enc.radius = 0.5 * (d + a.radius + b.radius);
          const double t = d > 0 ? 0.5 * (d + b.radius - a.radius) / d : 0.0;
          enc.center = lerp(a.center, b.center, t);
        }
        balls[i] = enc;
        balls.erase(balls.begin() + static_cast<std::ptrdiff_t>(j));
        merged = true;
      }
  }
  AdmissibleFamily fam;
  fam.balls = std::move(balls);
  std::sort(fam.balls.begin(), fam.balls.end(),
            [](const Ball& a, const Ball& b) {
              return lex_less(a.center, b.center) ||
                     (!lex_less(b.center, a.center) && a.radius < b.radius);
            });
  const double sum = fam.radius_sum();
  fam.delta = sum > 0 ? sum * (1.0 + 1e-9) + 1e-12 : 0.0;
  hard_assert(fam.valid(), "disjointified family is not admissible");
  return fam;
}

/// Per-cell certificates from per-edge ball lists: edges keep their own,
/// higher cells pool their facets' certificates (deduplicated by the
/// disjointification), ascending dimension.
CellCerts lift_edge_certs(
    const CubicalComplex& cx,
    const std::unordered_map<Cell, std::vector<Ball>, CellHash>& edge_balls) {
  CellCerts out;
  for (const Cell& c : cx.cells_sorted()) {
    if (c.dim() == 0) continue;
    std::vector<Ball> pool;
    if (c.dim() == 1) {
      auto it = edge_balls.find(c);
      if (it != edge_balls.end()) pool = it->second;
    } else {
      for (const Cell& f : CubicalComplex::faces(c)) {
        if (f.dim() != c.dim() - 1) continue;
        auto it = out.find(f);
        if (it != out.end())
          pool.insert(pool.end(), it->second.balls.begin(),
                      it->second.balls.end());
      }
    }
    if (pool.empty()) continue;
    out.emplace(c, disjoint_family(std::move(pool)));
  }
  return out;
}

/// Crossing points of a 1-chain with the hyperplane {coordinate[axis] = c},
/// as points sorted along the line. Transversal crossings contribute their
/// intersection point; segment endpoints lying on the line are clustered
/// (same in-line coordinate within eps) and contribute one representative
/// point when an odd number of adjacent segments leave to the positive side.
/// A segment running along the line is degenerate (retry with a jitter).
std::vector<Pt> line_crossings(const OneChain& chain, int axis, double c) {
  const double eps = eps_geom();
  const int key = 1 - axis;  // planar: the along-line coordinate
  std::vector<Pt> fulls;
  std::vector<std::pair<Pt, int>> ends;  // on-line endpoint, side of other end
  for (const Seg& s : chain.segments()) {
    const double g0 = s.a[axis] - c;
    const double g1 = s.b[axis] - c;
    const bool on0 = std::fabs(g0) <= eps;
    const bool on1 = std::fabs(g1) <= eps;
    if (on0 && on1)
      throw DegenerateCrossing("segment runs along a lattice line");
    if (on0) {
      ends.push_back({s.a, g1 > 0 ? 1 : -1});
      continue;
    }
    if (on1) {
      ends.push_back({s.b, g0 > 0 ? 1 : -1});
      continue;
    }
    if ((g0 > 0) == (g1 > 0)) continue;
    fulls.push_back(lerp(s.a, s.b, g0 / (g0 - g1)));
  }
  std::sort(ends.begin(), ends.end(),
            [&](const std::pair<Pt, int>& a, const std::pair<Pt, int>& b) {
              return a.first[key] < b.first[key];
            });
  std::size_t i = 0;
  while (i < ends.size()) {
    std::size_t j = i;
    int plus = 0;
    Pt rep = ends[i].first;
    while (j < ends.size() &&
           ends[j].first[key] - ends[i].first[key] <= eps) {
      if (ends[j].second > 0) ++plus;
      if (lex_less(ends[j].first, rep)) rep = ends[j].first;
      ++j;
    }
    if (plus % 2 == 1) fulls.push_back(rep);
    i = j;
  }
  std::sort(fulls.begin(), fulls.end(),
            [&](const Pt& a, const Pt& b) { return a[key] < b[key]; });
  if (fulls.size() % 2 != 0)
    throw DegenerateCrossing("odd crossing parity on a lattice line");
  return fulls;
}

/// Odd-parity intervals of the crossing list clipped to [lo, hi] along the
/// line {coordinate[axis] = c}. Clip endpoints are built from the exact
/// lattice coordinates, so the two cells sharing a wall emit bitwise-equal
/// pieces.
std::vector<Seg> wall_intervals(const std::vector<Pt>& crossings, int axis,
                                double c, double lo, double hi) {
  const double eps = eps_geom();
  const int key = 1 - axis;
  std::vector<Seg> out;
  for (std::size_t k = 0; k + 1 < crossings.size(); k += 2) {
    Pt a = crossings[k];
    Pt b = crossings[k + 1];
    if (b[key] <= lo + eps || a[key] >= hi - eps) continue;
    auto corner = [&](double at) {
      Pt p;
      p[axis] = c;
      p[key] = at;
      p[2] = 0.0;
      return p;
    };
    if (a[key] < lo) a = corner(lo);
    if (b[key] > hi) b = corner(hi);
    if (dist(a, b) > eps) out.push_back(Seg{a, b});
  }
  return out;
}

}  // namespace

// ------------------------------------------------------------ PlanarLattice

PlanarLattice::PlanarLattice(Pt lo, Pt hi, double cell, int jitter,
                             bool half_offset)
    : h_(cell), jitter_(jitter) {
  hard_assert(cell > 0, "lattice cell must be positive");
  const auto frac = [&](int k) {
    return kJitterFrac[static_cast<std::size_t>(((k % 8) + 8) % 8)];
  };
  const double off = half_offset ? 0.5 : 0.0;
  double ox = (std::floor(lo.x() / cell) - 1.0 + frac(jitter) + off) * cell;
  double oy =
      (std::floor(lo.y() / cell) - 1.0 + frac(jitter + 3) + off) * cell;
  while (ox > lo.x() - 0.5 * cell) ox -= cell;
  while (oy > lo.y() - 0.5 * cell) oy -= cell;
  nx_ = std::max(1, static_cast<int>(std::ceil((hi.x() - ox) / cell)) + 1);
  ny_ = std::max(1, static_cast<int>(std::ceil((hi.y() - oy) / cell)) + 1);
  xs_.reserve(static_cast<std::size_t>(nx_) + 1);
  ys_.reserve(static_cast<std::size_t>(ny_) + 1);
  for (int i = 0; i <= nx_; ++i) xs_.push_back(ox + i * cell);
  for (int j = 0; j <= ny_; ++j) ys_.push_back(oy + j * cell);
}

std::pair<int, int> PlanarLattice::cell_of(const Pt& p) const {
  hard_assert(valid(), "lattice not initialized");
  int ix = static_cast<int>(std::floor((p.x() - xs_[0]) / h_));
  int iy = static_cast<int>(std::floor((p.y() - ys_[0]) / h_));
  ix = std::min(std::max(ix, 0), nx_ - 1);
  iy = std::min(std::max(iy, 0), ny_ - 1);
  return {ix, iy};
}

Ball PlanarLattice::cell_ball(int ix, int iy) const {
  Ball b;
  b.center = Pt{xs_[static_cast<std::size_t>(ix)] + 0.5 * h_,
                ys_[static_cast<std::size_t>(iy)] + 0.5 * h_};
  b.radius = h_ * 0.5 * std::sqrt(2.0) * (1.0 + 1e-9) + 4.0 * eps_geom();
  return b;
}

OneChain PlanarLattice::split(const OneChain& c) const {
  hard_assert(valid(), "lattice not initialized");
  hard_assert(c.dim() == 2, "planar lattice splits planar chains");
  const double eps = eps_geom();
  std::vector<Seg> out;
  for (const Seg& s : c.segments()) {
    std::vector<double> ts;
    for (int axis = 0; axis < 2; ++axis) {
      const std::vector<double>& lines = axis == 0 ? xs_ : ys_;
      for (double line : lines) {
        const double g0 = s.a[axis] - line;
        const double g1 = s.b[axis] - line;
        const bool on0 = std::fabs(g0) <= eps;
        const bool on1 = std::fabs(g1) <= eps;
        if (on0 && on1)
          throw DegenerateCrossing("segment runs along a lattice line");
        if (on0 || on1) continue;  // endpoint already on the line
        if ((g0 > 0) == (g1 > 0)) continue;
        ts.push_back(g0 / (g0 - g1));
      }
    }
    std::sort(ts.begin(), ts.end());
    ts.push_back(1.0);
    double prev = 0.0;
    Pt pa = s.a;
    for (double t : ts) {
      if (t <= prev) continue;
      const Pt pb = t >= 1.0 ? s.b : lerp(s.a, s.b, t);
      if (dist(pa, pb) > eps) out.push_back(Seg{pa, pb});
      pa = pb;
      prev = t;
    }
  }
  return OneChain::of(c.dim(), std::move(out));
}

// ------------------------------------------------------------ CycleGridChop

CycleGridChop::CycleGridChop(const PlanarLattice& lat, const OneChain& cycle,
                             const std::vector<int>& schedule_cells) {
  hard_assert(lat.valid(), "lattice not initialized");
  hard_assert(cycle.dim() == 2, "cycle chop expects planar chains");
  hard_assert(boundary_one(cycle).empty(), "cycle chop expects a cycle");

  std::map<int, std::vector<Seg>> groups;
  for (const Seg& s : cycle.segments()) {
    const auto [ix, iy] = lat.cell_of(lerp(s.a, s.b, 0.5));
    groups[lat.cell_id(ix, iy)].push_back(s);
  }

  // Eager pass over every lattice line: crossings, then odd-parity wall
  // intervals shared (bitwise) by the two cells on either side of a wall.
  // A cell interior to the cycle carries wall intervals without owning any
  // cycle segment, so the active set comes from the walls, not the segments.
  std::map<std::tuple<int, int, int>, std::vector<Seg>> walls;
  std::set<int> active;
  for (const auto& [cid, segs] : groups) active.insert(cid);
  for (int axis = 0; axis < 2; ++axis) {
    const int nlines = axis == 0 ? lat.nx() + 1 : lat.ny() + 1;
    const int nspans = axis == 0 ? lat.ny() : lat.nx();
    for (int li = 0; li < nlines; ++li) {
      const double c = axis == 0 ? lat.xline(li) : lat.yline(li);
      const std::vector<Pt> crossings = line_crossings(cycle, axis, c);
      if (crossings.empty()) continue;
      for (int si = 0; si < nspans; ++si) {
        const double lo = axis == 0 ? lat.yline(si) : lat.xline(si);
        const double hi = axis == 0 ? lat.yline(si + 1) : lat.xline(si + 1);
        std::vector<Seg> iv = wall_intervals(crossings, axis, c, lo, hi);
        if (iv.empty()) continue;
        for (int side = -1; side <= 0; ++side) {
          const int ix = axis == 0 ? li + side : si;
          const int iy = axis == 0 ? si : li + side;
          if (ix < 0 || ix >= lat.nx() || iy < 0 || iy >= lat.ny()) continue;
          active.insert(lat.cell_id(ix, iy));
        }
        walls.emplace(std::make_tuple(axis, li, si), std::move(iv));
      }
    }
  }

  if (schedule_cells.empty()) {
    sched_.assign(active.begin(), active.end());
  } else {
    sched_ = schedule_cells;
    const std::set<int> have(sched_.begin(), sched_.end());
    for (int cid : active)
      hard_assert(have.count(cid) == 1,
                  "chop schedule misses an active lattice cell");
  }

  auto wall = [&](int axis, int li, int si) -> const std::vector<Seg>& {
    static const std::vector<Seg> none;
    auto it = walls.find({axis, li, si});
    return it == walls.end() ? none : it->second;
  };

  partials_.push_back(one_chain(cycle.dim()));
  for (int cid : sched_) {
    const auto [ix, iy] = lat.cell_at(cid);
    std::vector<Seg> segs;
    auto git = groups.find(cid);
    if (git != groups.end()) segs = git->second;
    for (const auto& piece_set :
         {wall(0, ix, iy), wall(0, ix + 1, iy), wall(1, iy, ix),
          wall(1, iy + 1, ix)})
      segs.insert(segs.end(), piece_set.begin(), piece_set.end());
    OneChain piece = OneChain::of(cycle.dim(), std::move(segs));
    if (!boundary_one(piece).empty())
      throw DegenerateCrossing("lattice cell piece failed to close");
    balls_.push_back(lat.cell_ball(ix, iy));
    partials_.push_back(add_one(partials_.back(), piece));
    pieces_.push_back(std::move(piece));
  }
  if (!(partials_.back() == cycle))
    throw DegenerateCrossing("lattice pieces do not reassemble the cycle");
}

// -------------------------------------------------------- interpolate_edge

EdgeInterpolation interpolate_edge(const ZeroChain& Fv, const ZeroChain& Fw,
                                   const OneChain& tau, const Grid& grid) {
  if (!(boundary_one(tau) == add_zero(Fv, Fw)))
    throw BoundaryMismatch("filling boundary must match the value pair");
  const std::size_t L = grid.size();
  EdgeInterpolation out;
  out.steps.reserve(L + 1);
  out.steps.push_back(Fv);
  if (L == 0) {
    if (!(Fv == Fw))
      throw BadSpec("an empty grid cannot carry a value transition");
    out.mass_cap = mass_of(Fv);
    out.max_step_mass = mass_of(Fv);
    return out;
  }
  const double r =
      grid.r > 0
          ? grid.r
          : 0.5 * *std::min_element(grid.radii.begin(), grid.radii.end());
  std::vector<ZeroChain> dz;
  dz.reserve(L);
  for (std::size_t l = 0; l < L; ++l)
    dz.push_back(boundary_one(restrict_one(tau, grid.domain(l))));
  for (std::size_t l = 0; l < L; ++l) {
    for (const Pt& q : dz[l].points())
      hard_assert(dist(q, grid.centers[l]) <= grid.radii[l] + 10 * eps_geom(),
                  "interpolation step left its grid ball");
    out.steps.push_back(add_zero(out.steps.back(), dz[l]));
  }
  hard_assert(out.steps.back() == Fw,
              "grid interpolation missed the far value");
  ZeroChain back = Fw;
  for (std::size_t l = L; l-- > 0;) {
    back = add_zero(back, dz[l]);
    hard_assert(back == out.steps[l],
                "backward interpolation disagrees with the forward one");
  }
  out.mass_cap = std::max(mass_of(Fv), mass_of(Fw)) +
                 2.0 * static_cast<double>(L) * tau.mass() / r + 1e-9;
  for (const ZeroChain& z : out.steps) {
    out.max_step_mass = std::max(out.max_step_mass, mass_of(z));
    hard_assert(mass_of(z) <= out.mass_cap,
                "interpolation mass exceeded its cap");
  }
  return out;
}

// ------------------------------------------------------- localize pipeline

namespace {

/// Stage-by-stage construction shared state. One instance per
/// localize_family call; build() may be retried with a finer first stage or
/// another lattice jitter.
struct ZPipe {
  const ZeroFamily& F;
  double eps;
  double delta;
  Exec ex;

  const CubicalComplex& X;
  int p = 0;
  int ambient = 2;
  bool fb2 = false;  // cell centers fall back to the sweep path at stage 2
  std::string path = "inductive";
  double max_mass_in = 0.0;

  // pairwise fillings over original cells and the ball grid
  std::vector<std::pair<VKey, VKey>> pkeys;
  std::vector<OneChain> pfills;
  std::map<std::pair<VKey, VKey>, std::size_t> pindex;
  CoverCenters cover;
  Grid grid;
  std::size_t L = 0;
  std::vector<Region> doms;
  Pt anchor_pt;  // teleport target of the sweep path: the last grid center

  std::map<std::pair<VKey, VKey>, std::vector<ZeroChain>> J;
  std::unordered_map<VKey, std::vector<ZeroChain>, VecIntHash> parts;
  std::unordered_map<Cell, std::vector<VKey>, CellHash> mins;
  std::unordered_map<Cell, VKey, CellHash> least;
  std::unordered_map<Cell, EdgeInterpolation, CellHash> einterp;

  struct Row {
    std::vector<VKey> assign;
    ZeroChain corr;
  };
  struct Layer {
    int q = 1;
    CubicalComplex cx;
    std::unordered_map<VKey, ZeroChain, VecIntHash> val;
    std::unordered_map<VKey, Row, VecIntHash> rows;
  };
  std::vector<Layer> layers;

  PlanarLattice lat;
  int cur_q1 = 3;
  std::map<std::vector<VKey>, ZeroChain> sel_memo;

  ZPipe(const ZeroFamily& f, double e, double d, const Exec& x)
      : F(f), eps(e), delta(d), ex(x), X(f.complex) {}

  ZeroChain zero0() const { return zero_chain(ambient); }

  // ---- preparation -------------------------------------------------------

  void prepare() {
    p = X.dim();
    ambient = 2;
    for (const auto& [k, z] : F.values) ambient = std::max(ambient, z.dim());
    fb2 = (ambient == 3 && p >= 2);
    if (p == 0)
      path = "trivial";
    else if (fb2)
      path = "cone-fallback";
    else if (p == 3)
      path = "inductive+cone-fallback(stage3)";
    else
      path = "inductive";

    std::vector<Pt> pts;
    for (const auto& [k, z] : F.values) {
      max_mass_in = std::max(max_mass_in, mass_of(z));
      for (const Pt& q : z.points()) pts.push_back(q);
    }

    for (const Cell& c : X.cells_sorted()) {
      if (c.dim() == 0) continue;
      const auto vs = CubicalComplex::cell_vertices(c);
      for (std::size_t i = 0; i < vs.size(); ++i)
        for (std::size_t j = i + 1; j < vs.size(); ++j) {
          const auto key = std::make_pair(vs[i], vs[j]);
          if (pindex.count(key)) continue;
          const FlatWitness w =
              flat_distance(F.at(vs[i]), F.at(vs[j]),
                            FlatDomain::whole(ambient), FlatMode::absolute);
          hard_assert(w.dropped.empty(),
                      "an eps-fine pair dropped a point in its matching");
          std::vector<Seg> segs;
          for (const auto& pr : w.matched_pairs)
            segs.push_back(Seg{pr.first, pr.second});
          pindex[key] = pfills.size();
          pkeys.push_back(key);
          pfills.push_back(OneChain::of(ambient, std::move(segs)));
        }
    }

    Pt lo, hi;
    if (pts.empty()) {
      lo = hi = Pt{0.0, 0.0, 0.0};
    } else {
      lo = hi = pts.front();
      for (const Pt& q : pts)
        for (int i = 0; i < 3; ++i) {
          lo[i] = std::min(lo[i], q[i]);
          hi[i] = std::max(hi[i], q[i]);
        }
    }
    const Pt center = lerp(lo, hi, 0.5);
    const double rad =
        0.5 * dist(lo, hi) * (1.0 + 1e-9) + std::max(1e-12, 0.01 * delta);
    cover = cover_centers(FlatDomain::disk(center, rad, ambient), delta);
    const std::vector<double> radii = select_radii(
        cover, pfills, static_cast<int>(std::max<std::size_t>(1, pfills.size())),
        ex);
    grid = make_grid(cover.points, radii, cover.r);
    L = grid.size();
    doms.clear();
    doms.reserve(L);
    for (std::size_t l = 0; l < L; ++l) doms.push_back(grid.domain(l));
    anchor_pt = grid.centers.empty() ? Pt{0.0, 0.0, 0.0} : grid.centers.back();

    for (const VKey& v : X.vertices()) {
      auto& ps = parts[v];
      ps.reserve(L);
      ZeroChain acc = zero0();
      for (std::size_t l = 0; l < L; ++l) {
        ps.push_back(restrict_zero(F.at(v), doms[l]));
        acc = add_zero(acc, ps.back());
      }
      hard_assert(acc == F.at(v), "ball grid does not partition a value");
    }

    for (std::size_t i = 0; i < pkeys.size(); ++i) {
      std::vector<ZeroChain> js;
      js.reserve(L);
      for (std::size_t l = 0; l < L; ++l)
        js.push_back(boundary_one(restrict_one(pfills[i], doms[l])));
      J.emplace(pkeys[i], std::move(js));
    }

    for (const Cell& c : X.cells_sorted()) {
      const auto vs = CubicalComplex::cell_vertices(c);
      least[c] = vs.front();
      if (c.dim() == 0) continue;
      std::vector<VKey> m(L);
      for (std::size_t l = 0; l < L; ++l) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < vs.size(); ++i)
          if (parts.at(vs[i])[l].mass() < parts.at(vs[best])[l].mass())
            best = i;
        m[l] = vs[best];
      }
      mins.emplace(c, std::move(m));
    }
  }

  int base_q1() const {
    const int Li = static_cast<int>(L);
    return smallest_odd_ge(fb2 ? 6 * Li + 3 : 3 * Li + 3);
  }

  void set_lattice(int jitter) {
    Pt lo{0.0, 0.0, 0.0}, hi{0.0, 0.0, 0.0};
    bool any = false;
    for (const auto& [k, z] : F.values)
      for (const Pt& q : z.points()) {
        if (!any) {
          lo = hi = q;
          any = true;
        }
        for (int i = 0; i < 2; ++i) {
          lo[i] = std::min(lo[i], q[i]);
          hi[i] = std::max(hi[i], q[i]);
        }
      }
    // grid-sphere noise reaches up to two ball radii beyond the raw support
    const double m = 3.0 * delta;
    lat = PlanarLattice(Pt{lo.x() - m, lo.y() - m}, Pt{hi.x() + m, hi.y() + m},
                        delta, jitter);
  }

  // ---- shared row algebra -------------------------------------------------

  const ZeroChain& selection_sum(const std::vector<VKey>& assign) {
    auto it = sel_memo.find(assign);
    if (it != sel_memo.end()) return it->second;
    ZeroChain acc = zero0();
    for (std::size_t l = 0; l < L; ++l)
      acc = add_zero(acc, parts.at(assign[l])[l]);
    return sel_memo.emplace(assign, std::move(acc)).first->second;
  }

  ZeroChain make_corr(const ZeroChain& value,
                      const std::vector<VKey>& assign) {
    return add_zero(value, selection_sum(assign));
  }

  ZeroChain swap_term(const VKey& u, const VKey& w, std::size_t l) const {
    if (u == w) return zero_chain(ambient);
    const auto key = u < w ? std::make_pair(u, w) : std::make_pair(w, u);
    auto it = J.find(key);
    hard_assert(it != J.end(), "missing pairwise filling");
    return it->second[l];
  }

  static int depth_in_cell(const Cell& c, const VKey& v, int qj) {
    int d = qj;
    for (std::size_t ax = 0; ax < c.anchor.size(); ++ax) {
      if (!((c.axes >> ax) & 1u)) continue;
      const int g = v[ax] - c.anchor[ax] * qj;
      d = std::min(d, std::min(g, qj - g));
    }
    return d;
  }

  // ---- per-kind rows ------------------------------------------------------

  const EdgeInterpolation& edge_interp(const Cell& E) {
    auto it = einterp.find(E);
    if (it != einterp.end()) return it->second;
    int ax = 0;
    while (!((E.axes >> ax) & 1u)) ++ax;
    VKey va = E.anchor;
    VKey vb = va;
    vb[static_cast<std::size_t>(ax)] += 1;
    const auto key = std::make_pair(va, vb);
    EdgeInterpolation ei =
        interpolate_edge(F.at(va), F.at(vb), pfills[pindex.at(key)], grid);
    return einterp.emplace(E, std::move(ei)).first->second;
  }

  void edge_row(Layer& lay, const Cell& E, const VKey& v, int qj) {
    const EdgeInterpolation& ei = edge_interp(E);
    int ax = 0;
    while (!((E.axes >> ax) & 1u)) ++ax;
    VKey va = E.anchor;
    VKey vb = va;
    vb[static_cast<std::size_t>(ax)] += 1;
    const int i = v[static_cast<std::size_t>(ax)] -
                  E.anchor[static_cast<std::size_t>(ax)] * qj;
    const int mid = (qj - 1) / 2;
    const std::size_t idx =
        i <= mid ? std::min<std::size_t>(static_cast<std::size_t>(i), L) : L;
    lay.val[v] = ei.steps[idx];
    Row r;
    r.assign.reserve(L);
    for (std::size_t l = 0; l < L; ++l)
      r.assign.push_back(l < idx ? vb : va);
    r.corr = make_corr(lay.val[v], r.assign);
    lay.rows[v] = std::move(r);
  }

  void prec_row(Layer& lay, const Cell& C, const VKey& v, int qj) {
    const auto vs = CubicalComplex::cell_vertices(C);
    const VKey& vc = least.at(C);
    int lb = qj;  // sup distance to the cell boundary
    for (std::size_t ax = 0; ax < C.anchor.size(); ++ax) {
      if (!((C.axes >> ax) & 1u)) continue;
      const int g = v[ax] - C.anchor[ax] * qj;
      lb = std::min(lb, std::min(g, qj - g));
    }
    // nearest corner in the sup metric, ties to the first (lex-least)
    std::size_t ustar = 0;
    int dstar = std::numeric_limits<int>::max();
    for (std::size_t i = 0; i < vs.size(); ++i) {
      int d = 0;
      for (std::size_t ax = 0; ax < C.anchor.size(); ++ax) {
        if (!((C.axes >> ax) & 1u)) continue;
        d = std::max(d, std::abs(v[ax] - vs[i][ax] * qj));
      }
      if (d < dstar) {
        dstar = d;
        ustar = i;
      }
    }
    const auto& m = mins.at(C);
    ZeroChain val = F.at(vc);
    Row r;
    r.assign.reserve(L);
    for (std::size_t l = 0; l < L; ++l) {
      VKey t;
      if (static_cast<int>(l) < lb)
        t = m[l];
      else if (static_cast<int>(l) >= dstar)
        t = vs[ustar];
      else
        t = vc;
      if (t != vc) val = add_zero(val, swap_term(vc, t, l));
      r.assign.push_back(std::move(t));
    }
    r.corr = make_corr(val, r.assign);
    lay.val[v] = std::move(val);
    lay.rows[v] = std::move(r);
  }

  void collar_row(Layer& lay, const Layer& prev, const Cell& C, const VKey& v,
                  int qj) {
    const VKey s = squeeze_key(v, qj);
    const Row& base = prev.rows.at(s);
    const ZeroChain& bval = prev.val.at(s);
    const int d = depth_in_cell(C, v, qj);
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(d), L);
    const auto& m = mins.at(C);
    ZeroChain val = bval;
    Row r;
    r.assign = base.assign;
    for (std::size_t l = 0; l < k; ++l) {
      if (base.assign[l] == m[l]) continue;
      val = add_zero(val, swap_term(base.assign[l], m[l], l));
      r.assign[l] = m[l];
    }
    r.corr = make_corr(val, r.assign);
    lay.val[v] = std::move(val);
    lay.rows[v] = std::move(r);
  }

  // ---- cell centers: planar inductive path --------------------------------

  struct RingCtx {
    int S = 0;
    int P = 0;
    ZeroChain zc;
    std::vector<OneChain> tp;  // ring fillings with the closure redistributed
    std::unique_ptr<Chopper> chopper;
    OneChain deep;  // chop of tp[0] at full level (constant deep value)
  };

  VKey cell_key(const Cell& C, int qj, const VKey& local) const {
    VKey v(C.anchor.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = C.anchor[i] * qj;
    std::size_t li = 0;
    for (std::size_t ax = 0; ax < v.size(); ++ax)
      if ((C.axes >> ax) & 1u) v[ax] += local[li++];
    return v;
  }

  static std::pair<int, int> ring_point(int s, int S) {
    if (s < S) return {s, 0};
    if (s < 2 * S) return {S, s - S};
    if (s < 3 * S) return {3 * S - s, S};
    return {0, 4 * S - s};
  }

  static int ring_index(int x, int y, int S) {
    if (y == 0 && x < S) return x;
    if (x == S && y < S) return S + y;
    if (y == S && x > 0) return 2 * S + (S - x);
    return 3 * S + (S - y);
  }

  ZeroChain anchor_value(const Cell& C) {
    const VKey& vc = least.at(C);
    const auto& m = mins.at(C);
    ZeroChain zc = F.at(vc);
    for (std::size_t l = 0; l < L; ++l)
      if (m[l] != vc) zc = add_zero(zc, swap_term(vc, m[l], l));
    return zc;
  }

  RingCtx make_ring_ctx(const Layer& lay, const Cell& C, int qj) {
    RingCtx ctx;
    ctx.S = qj / 3;
    ctx.P = 4 * ctx.S;
    ctx.zc = anchor_value(C);
    std::vector<ZeroChain> zeta(static_cast<std::size_t>(ctx.P));
    for (int s = 0; s < ctx.P; ++s) {
      const auto [lx, ly] = ring_point(s, ctx.S);
      zeta[static_cast<std::size_t>(s)] =
          lay.val.at(cell_key(C, qj, {ctx.S + lx, ctx.S + ly}));
    }
    std::vector<OneChain> w(static_cast<std::size_t>(ctx.P));
    for (int s = 0; s < ctx.P; ++s)
      w[static_cast<std::size_t>(s)] = lat.split(total_filling(add_zero(
          zeta[static_cast<std::size_t>(s)],
          zeta[static_cast<std::size_t>((s + 1) % ctx.P)])));
    std::vector<OneChain> tau(static_cast<std::size_t>(ctx.P));
    tau[0] = lat.split(total_filling(add_zero(zeta[0], ctx.zc)));
    for (int s = 1; s < ctx.P; ++s)
      tau[static_cast<std::size_t>(s)] = add_one(
          tau[static_cast<std::size_t>(s - 1)], w[static_cast<std::size_t>(s - 1)]);
    OneChain eta0 = one_chain(2);
    for (int s = 0; s < ctx.P; ++s)
      eta0 = add_one(eta0, w[static_cast<std::size_t>(s)]);
    const CycleGridChop chop(lat, eta0);
    const std::size_t S0 = chop.steps();
    if (static_cast<std::size_t>(ctx.P) < S0 + 1)
      throw RetryQ{smallest_odd_ge(
          std::max(cur_q1 + 2, static_cast<int>((S0 + 4) / 4)))};
    ctx.tp.resize(static_cast<std::size_t>(ctx.P));
    for (int s = 0; s < ctx.P; ++s) {
      const std::size_t lvl =
          S0 >= static_cast<std::size_t>(s) ? S0 - static_cast<std::size_t>(s)
                                            : 0;
      ctx.tp[static_cast<std::size_t>(s)] =
          add_one(tau[static_cast<std::size_t>(s)], chop.partial(lvl));
      hard_assert(
          boundary_one(ctx.tp[static_cast<std::size_t>(s)]) ==
              add_zero(zeta[static_cast<std::size_t>(s)], ctx.zc),
          "ring filling boundary drifted");
    }
    ctx.chopper = std::make_unique<Chopper>(cover);
    ctx.deep = ctx.chopper->chop(ctx.tp[0], L);
    return ctx;
  }

  void center_row_inductive(Layer& lay, const Cell& C, RingCtx& ctx,
                            const VKey& v, int qj) {
    const int S = ctx.S;
    VKey z;
    for (std::size_t ax = 0; ax < C.anchor.size(); ++ax)
      if ((C.axes >> ax) & 1u)
        z.push_back(v[ax] - C.anchor[ax] * qj - S);
    const int dC = depth_in_cell(C, v, qj) - S;
    hard_assert(dC >= 1, "center row outside the central block");
    const std::size_t t = std::min<std::size_t>(
        static_cast<std::size_t>(dC - 1), L);
    OneChain chopped;
    if (t >= L) {
      chopped = ctx.deep;
    } else {
      const VKey sb = radial_to_boundary(z, S);
      const int s = ring_index(sb[0], sb[1], S);
      chopped = ctx.chopper->chop(ctx.tp[static_cast<std::size_t>(s)], t);
    }
    ZeroChain val = add_zero(ctx.zc, boundary_one(chopped));
    Row r;
    r.assign = mins.at(C);
    r.corr = make_corr(val, r.assign);
    lay.val[v] = std::move(val);
    lay.rows[v] = std::move(r);
  }

  // ---- cell centers: sweep fallback path -----------------------------------

  struct FbCtx {
    int S = 0;
    ZeroChain zc;
    std::map<VKey, std::vector<ZeroChain>> parts_memo;  // by boundary point
  };

  FbCtx make_fb_ctx(const Cell& C, int qj) {
    FbCtx ctx;
    ctx.S = qj / 3;
    ctx.zc = anchor_value(C);
    return ctx;
  }

  const std::vector<ZeroChain>& fb_parts(FbCtx& ctx, const Layer& lay,
                                         const Cell& C, int qj,
                                         const VKey& sb) {
    auto it = ctx.parts_memo.find(sb);
    if (it != ctx.parts_memo.end()) return it->second;
    VKey local(sb.size());
    for (std::size_t i = 0; i < sb.size(); ++i) local[i] = ctx.S + sb[i];
    const ZeroChain ibar =
        add_zero(lay.val.at(cell_key(C, qj, local)), ctx.zc);
    std::vector<ZeroChain> ps;
    ps.reserve(L);
    ZeroChain acc = zero0();
    for (std::size_t l = 0; l < L; ++l) {
      ps.push_back(restrict_zero(ibar, doms[l]));
      acc = add_zero(acc, ps.back());
    }
    hard_assert(acc == ibar, "ball grid does not partition a ring value");
    return ctx.parts_memo.emplace(sb, std::move(ps)).first->second;
  }

  void center_row_fallback(Layer& lay, const Cell& C, FbCtx& ctx,
                           const VKey& v, int qj) {
    const int S = ctx.S;
    VKey z;
    for (std::size_t ax = 0; ax < C.anchor.size(); ++ax)
      if ((C.axes >> ax) & 1u)
        z.push_back(v[ax] - C.anchor[ax] * qj - S);
    const int dC = depth_in_cell(C, v, qj) - S;
    hard_assert(dC >= 1, "center row outside the central block");
    const std::size_t k = std::min<std::size_t>(
        static_cast<std::size_t>(dC - 1), 2 * L);
    ZeroChain val = ctx.zc;
    if (k < 2 * L) {
      const VKey sb = radial_to_boundary(z, S);
      const auto& ps = fb_parts(ctx, lay, C, qj, sb);
      // teleport phase: the lex-least point of every odd-mass part seen so
      // far moves to the shared anchor (pairs of anchor points cancel);
      // kill phase: teleported parts are removed one domain at a time
      const std::size_t tele_upto = std::min(k, L);
      const std::size_t killed = k > L ? k - L : 0;
      std::size_t odd_so_far = 0;
      for (std::size_t l = 0; l < L; ++l) {
        const bool odd = ps[l].mass() % 2 == 1;
        const bool teleported = l < tele_upto || k > L;
        if (teleported && odd) ++odd_so_far;
        if (l < killed) continue;
        ZeroChain piece = ps[l];
        if (teleported && odd)
          piece = add_zero(piece,
                           ZeroChain::of(ambient, {piece.points().front()}));
        val = add_zero(val, piece);
      }
      if (k <= L && odd_so_far % 2 == 1)
        val = add_zero(val, ZeroChain::of(ambient, {anchor_pt}));
    }
    Row r;
    r.assign = mins.at(C);
    r.corr = make_corr(val, r.assign);
    lay.val[v] = std::move(val);
    lay.rows[v] = std::move(r);
  }

  // ---- stages -------------------------------------------------------------

  void build_stage(int j, int qj) {
    Layer lay;
    lay.q = qj;
    lay.cx = refine(X, qj);
    const Layer& prev = layers.back();
    std::map<Cell, std::vector<VKey>, bool (*)(const Cell&, const Cell&)>
        centers(cell_less);
    for (const VKey& v : lay.cx.vertices()) {
      const Cell carrier = parent_cell(Cell{v, 0}, qj);
      const int dc = carrier.dim();
      if (dc == 0) {
        const VKey orig = carrier.anchor;
        lay.val[v] = F.at(orig);
        Row r;
        r.assign.assign(L, orig);
        r.corr = zero0();
        lay.rows[v] = std::move(r);
      } else if (dc < j) {
        const VKey s = squeeze_key(v, qj);
        lay.val[v] = prev.val.at(s);
        lay.rows[v] = prev.rows.at(s);
      } else if (dc > j) {
        prec_row(lay, carrier, v, qj);
      } else if (j == 1) {
        edge_row(lay, carrier, v, qj);
      } else if (depth_in_cell(carrier, v, qj) <= qj / 3) {
        collar_row(lay, prev, carrier, v, qj);
      } else {
        centers[carrier].push_back(v);
      }
    }
    const bool fallback_here = fb2 || j == 3;
    for (auto& [C, keys] : centers) {
      if (fallback_here) {
        FbCtx ctx = make_fb_ctx(C, qj);
        for (const VKey& v : keys) center_row_fallback(lay, C, ctx, v, qj);
      } else {
        RingCtx ctx = make_ring_ctx(lay, C, qj);
        for (const VKey& v : keys) center_row_inductive(lay, C, ctx, v, qj);
      }
    }
    layers.push_back(std::move(lay));
  }

  void build(int q1) {
    cur_q1 = q1;
    layers.clear();
    sel_memo.clear();
    einterp.clear();
    Layer l0;
    l0.q = 1;
    l0.cx = X;
    for (const VKey& v : X.vertices()) {
      l0.val[v] = F.at(v);
      Row r;
      r.assign.assign(L, v);
      r.corr = zero0();
      l0.rows[v] = std::move(r);
    }
    layers.push_back(std::move(l0));
    int qj = 1;
    for (int j = 1; j <= p; ++j) {
      qj = (j == 1) ? q1 : qj * 3;
      build_stage(j, qj);
    }
  }

  // ---- output assembly -----------------------------------------------------

  LocalizeResult assemble() {
    const Layer& top = layers.back();
    LocalizeResult out;
    out.family.complex = top.cx;
    out.family.values = top.val;
    out.family.provenance =
        F.provenance.empty() ? "localized" : F.provenance + "|localized";

    out.state.grid = grid;
    out.state.pair_keys = pkeys;
    out.state.pair_fillings = pfills;
    for (const auto& [v, r] : top.rows) {
      InterpolationState::Row row;
      row.assign = r.assign;
      row.correction = r.corr;
      out.state.rows.emplace(v, std::move(row));
    }

    // certificate candidates: the doubled grid balls (every step the
    // construction takes is supported in one of them)
    std::vector<Ball> cand;
    cand.reserve(L);
    const double pad = 1e-6 * cover.r + 10 * eps_geom();
    for (std::size_t l = 0; l < L; ++l)
      cand.push_back(Ball{grid.centers[l], 2.0 * cover.r + pad});

    const auto edges = top.cx.cells_of_dim(1);
    std::vector<std::vector<Ball>> eballs(edges.size());
    parallel_for(edges.size(), ex, [&](std::size_t i) {
      const auto vs = CubicalComplex::cell_vertices(edges[i]);
      const ZeroChain diff = add_zero(top.val.at(vs[0]), top.val.at(vs[1]));
      if (diff.empty()) return;
      eballs[i] = cover_filter_points(cand, diff.points());
    });
    std::unordered_map<Cell, std::vector<Ball>, CellHash> edge_map;
    for (std::size_t i = 0; i < edges.size(); ++i)
      if (!eballs[i].empty()) edge_map.emplace(edges[i], std::move(eballs[i]));
    out.certs = lift_edge_certs(top.cx, edge_map);

    // report
    LocalizeReport rep;
    rep.q = top.q;
    rep.L = L;
    rep.eps_in = eps;
    rep.delta_in = delta;
    rep.path = path;
    rep.max_mass_in = max_mass_in;

    std::unordered_map<Cell, double, CellHash> cell_max;
    for (const Cell& c : X.cells_sorted()) {
      double mx = 0.0;
      for (const VKey& u : CubicalComplex::cell_vertices(c))
        mx = std::max(mx, mass_of(F.at(u)));
      cell_max.emplace(c, mx);
    }
    double slack = 0.0;
    for (const auto& [v, z] : top.val) {
      rep.max_mass_out = std::max(rep.max_mass_out, mass_of(z));
      const Cell carrier = parent_cell(Cell{v, 0}, top.q);
      slack = std::max(slack, mass_of(z) - cell_max.at(carrier));
    }
    rep.slack = std::max(0.0, slack);
    if (p >= 1) {
      const double scale = std::pow(
          static_cast<double>(std::max<std::size_t>(L, 1)) / delta,
          profile_exponent(0, p, ambient));
      rep.measured_C = rep.slack / (scale * std::max(eps, 1e-300));
    }
    for (const auto& [c, fam] : out.certs) {
      rep.N_declared = std::max(rep.N_declared, fam.balls.size());
      rep.delta_declared = std::max(rep.delta_declared, fam.delta);
    }
    const double fine_eps =
        eps + (rep.max_mass_out + 2.0) * rep.delta_declared + 1e-9;
    rep.fineness_out = check_fineness(out.family, fine_eps,
                                      FlatDomain::whole(ambient),
                                      FlatMode::absolute, ex);
    rep.localization = check_localized(out.family, out.certs, ex);
    hard_assert(rep.localization.localized,
                "localized family failed its own certificate check");
    out.report = std::move(rep);
    return out;
  }
};

}  // namespace

LocalizeResult localize_family(const ZeroFamily& F, double eps, double delta,
                               const Exec& ex) {
  if (!(eps > 0.0) || !(delta > 0.0))
    throw BadSpec("localization needs positive eps and delta");
  if (delta >= localize_delta_cap())
    throw DeltaTooLarge("localization scale exceeds the domain cap 1/3");
  if (!F.total()) throw BadSpec("family must assign a value to every vertex");
  const int p = F.complex.dim();
  int ambient = 2;
  for (const auto& [k, z] : F.values) ambient = std::max(ambient, z.dim());
  if (p > 3 || ambient > 3)
    throw DimUnsupported("localization supports up to 3 parameters in"
                         " ambient dimension up to 3");
  {
    const FinenessReport fin = check_fineness(
        F, eps, FlatDomain::whole(ambient), FlatMode::absolute, ex);
    if (!fin.fine) {
      std::ostringstream msg;
      msg << "family is not eps-fine: largest pairwise flat distance "
          << fin.max_value << " > " << eps;
      throw NotFine(msg.str());
    }
  }

  ZPipe pipe(F, eps, delta, ex);
  pipe.prepare();
  int q1 = pipe.base_q1();
  for (int jitter = 0; jitter < 8; ++jitter) {
    pipe.set_lattice(jitter);
    bool degenerate = false;
    for (int attempt = 0; attempt < 5; ++attempt) {
      try {
        pipe.build(q1);
        return pipe.assemble();
      } catch (const RetryQ& r) {
        q1 = smallest_odd_ge(std::max(r.need, q1 + 2));
      } catch (const DegenerateCrossing&) {
        degenerate = true;
        break;
      }
    }
    if (!degenerate)
      throw TooLarge("ring capacity failed to stabilize after retries");
  }
  throw ExhaustedSamples("every lattice jitter hit a degenerate crossing");
}

// ------------------------------------------------- check_interpolation_state

StateCheckReport check_interpolation_state(const ZeroFamily& input,
                                           const ZeroFamily& output,
                                           const InterpolationState& state,
                                           const Exec& ex) {
  StateCheckReport rep;
  const std::size_t L = state.grid.size();
  std::vector<Region> doms;
  doms.reserve(L);
  for (std::size_t l = 0; l < L; ++l) doms.push_back(state.grid.domain(l));

  const int qin = std::max(1, input.complex.q());
  const int qout = std::max(1, output.complex.q());
  hard_assert(qout % qin == 0, "state scales are incompatible");
  const int qq = qout / qin;

  std::vector<const VKey*> keys;
  std::vector<const InterpolationState::Row*> rows;
  keys.reserve(state.rows.size());
  for (const auto& [v, r] : state.rows) {
    keys.push_back(&v);
    rows.push_back(&r);
  }
  std::vector<unsigned char> fail(keys.size(), 0);
  std::vector<unsigned char> bound(keys.size(), 1);
  std::vector<double> selected(keys.size(), 0.0);
  std::vector<double> corrs(keys.size(), 0.0);
  parallel_for(keys.size(), ex, [&](std::size_t i) {
    const VKey& v = *keys[i];
    const InterpolationState::Row& row = *rows[i];
    auto out_it = output.values.find(v);
    if (out_it == output.values.end() || row.assign.size() != L) {
      fail[i] = 1;
      return;
    }
    ZeroChain acc = ZeroChain::of(out_it->second.dim(), {});
    double sel = 0.0;
    for (std::size_t l = 0; l < L; ++l) {
      const ZeroChain part = restrict_zero(input.at(row.assign[l]), doms[l]);
      sel += mass_of(part);
      acc = add_zero(acc, part);
    }
    selected[i] = sel;
    corrs[i] = mass_of(row.correction);
    if (!(add_zero(acc, row.correction) == out_it->second)) fail[i] = 1;
    const Cell carrier = parent_cell(Cell{v, 0}, qq);
    double mx = 0.0;
    for (const VKey& u : CubicalComplex::cell_vertices(carrier))
      mx = std::max(mx, mass_of(input.at(u)));
    if (sel > mx + 1e-9) bound[i] = 0;
  });
  rep.rows_checked = keys.size();
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (fail[i]) ++rep.reassembly_failures;
    if (!bound[i]) rep.selection_bound_ok = false;
    rep.max_selected_mass = std::max(rep.max_selected_mass, selected[i]);
    rep.max_correction_mass = std::max(rep.max_correction_mass, corrs[i]);
  }
  rep.ok = rep.reassembly_failures == 0 && rep.selection_bound_ok;
  return rep;
}

// ---------------------------------------------------------------- profiles

int profile_exponent(int k, int p, int ambient) {
  hard_assert(k >= 0 && p >= 1 && ambient >= 1, "profile arguments");
  if (k >= ambient - 1) return 0;
  if (p <= 1) return 1;
  return profile_exponent(k + 1, p - 1, ambient) +
         profile_exponent(k, p - 1, ambient) + 1;
}

double fill_profile_constant(int k, int p, int ambient) {
  hard_assert(k >= 0 && p >= 1 && ambient >= 1, "profile arguments");
  if (k >= ambient - 1) return 1.0;
  if (p <= 1) return 18.0;
  return 9.0 * fill_profile_constant(k + 1, p - 1, ambient) *
         fill_profile_constant(k, p - 1, ambient);
}

double fill_profile_K(double N, int k, int p, int ambient) {
  hard_assert(k >= 0 && p >= 1 && ambient >= 1, "profile arguments");
  if (k >= ambient - 1) return N;
  if (p <= 1) return 12.0;
  const double kj = fill_profile_K(N, k, p - 1, ambient);
  const double k1 = fill_profile_K(kj, k + 1, p - 1, ambient) * kj;
  const double k2 = 12.0 * (k1 + 1.0);
  return 3.0 * (k2 + 1.0);
}

double fallback_mass_constant(int l) {
  hard_assert(l >= 0, "negative fallback depth");
  double c = 1.0;
  for (int i = 0; i < l; ++i) c = 3.0 * c + 4.0;
  return c;
}

// -------------------------------------------------------------------- JSON

namespace {

nlohmann::json fineness_to_json(const FinenessReport& r) {
  return nlohmann::json{{"fine", r.fine},
                        {"eps", r.eps},
                        {"max_value", r.max_value},
                        {"pairs_checked", r.pairs_checked},
                        {"violations", r.violations.size()}};
}

}  // namespace

nlohmann::json localize_report_to_json(const LocalizeReport& rep) {
  return nlohmann::json{{"q", rep.q},
                        {"L", rep.L},
                        {"eps_in", rep.eps_in},
                        {"delta_in", rep.delta_in},
                        {"path", rep.path},
                        {"max_mass_in", rep.max_mass_in},
                        {"max_mass_out", rep.max_mass_out},
                        {"slack", rep.slack},
                        {"measured_C", rep.measured_C},
                        {"N_declared", rep.N_declared},
                        {"delta_declared", rep.delta_declared},
                        {"fineness_out", fineness_to_json(rep.fineness_out)},
                        {"localization",
                         localized_report_to_json(rep.localization)}};
}

nlohmann::json fill_report_to_json(const FillReport& rep) {
  return nlohmann::json{{"q", rep.q},
                        {"path", rep.path},
                        {"eta_in", rep.eta_in},
                        {"eps_in", rep.eps_in},
                        {"delta", rep.delta},
                        {"extent", rep.extent},
                        {"max_mass", rep.max_mass},
                        {"measured_c", rep.measured_c},
                        {"N_out", rep.N_out},
                        {"delta_out", rep.delta_out},
                        {"localization",
                         localized_report_to_json(rep.localization)}};
}

// ------------------------------------------------------------------- fills

namespace {

int cell_depth(const Cell& c, const VKey& v, int q) {
  int d = q;
  for (std::size_t ax = 0; ax < c.anchor.size(); ++ax) {
    if (!((c.axes >> ax) & 1u)) continue;
    const int g = v[ax] - c.anchor[ax] * q;
    d = std::min(d, std::min(g, q - g));
  }
  return d;
}

VKey cell_vertex_key(const Cell& C, int q, const VKey& local) {
  VKey v(C.anchor.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = C.anchor[i] * q;
  std::size_t li = 0;
  for (std::size_t ax = 0; ax < v.size(); ++ax)
    if ((C.axes >> ax) & 1u) v[ax] += local[li++];
  return v;
}

std::vector<Ball> segment_balls(const OneChain& c, double pad) {
  std::vector<Ball> out;
  out.reserve(c.segments().size());
  for (const Seg& s : c.segments())
    out.push_back(
        Ball{lerp(s.a, s.b, 0.5), 0.5 * s.length() * (1.0 + 1e-9) + pad});
  return out;
}

Ball enclosing_ball(const OneChain& c, double pad) {
  Pt lo = c.segments().front().a;
  Pt hi = lo;
  for (const Seg& s : c.segments())
    for (const Pt* p : {&s.a, &s.b})
      for (int i = 0; i < 3; ++i) {
        lo[i] = std::min(lo[i], (*p)[i]);
        hi[i] = std::max(hi[i], (*p)[i]);
      }
  Ball b;
  b.center = lerp(lo, hi, 0.5);
  b.radius = 0.5 * dist(lo, hi) * (1.0 + 1e-9) + pad;
  return b;
}

/// Connected components of a 1-chain; endpoints within eps are identified.
/// A component of a cycle is itself a cycle, so components can be removed
/// whole without disturbing the boundary.
std::vector<OneChain> chain_components(const OneChain& c) {
  const auto& segs = c.segments();
  if (segs.empty()) return {};
  const double eps = eps_geom();
  std::vector<Pt> pts;
  pts.reserve(2 * segs.size());
  for (const Seg& s : segs) {
    pts.push_back(s.a);
    pts.push_back(s.b);
  }
  std::vector<std::size_t> up(pts.size());
  std::iota(up.begin(), up.end(), std::size_t{0});
  auto find = [&](std::size_t i) {
    while (up[i] != i) {
      up[i] = up[up[i]];
      i = up[i];
    }
    return i;
  };
  for (std::size_t i = 0; i < segs.size(); ++i) up[find(2 * i)] = find(2 * i + 1);
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      if (dist(pts[i], pts[j]) <= eps) up[find(i)] = find(j);
  std::map<std::size_t, std::vector<Seg>> groups;
  for (std::size_t i = 0; i < segs.size(); ++i)
    groups[find(2 * i)].push_back(segs[i]);
  std::vector<OneChain> out;
  out.reserve(groups.size());
  for (auto& [root, g] : groups)
    out.push_back(OneChain::of(c.dim(), std::move(g)));
  return out;
}

double component_key_x(const OneChain& comp) {
  double k = std::numeric_limits<double>::infinity();
  for (const Seg& s : comp.segments())
    k = std::min({k, s.a.x(), s.b.x()});
  return k;
}

/// Kill schedule of a closed cycle: killed(0) is empty, killed(T) the whole
/// cycle, every prefix closed, and each increment carried by one recorded
/// ball.
struct KillPlan {
  std::size_t T = 0;
  std::vector<OneChain> killed;  // T + 1 entries
  std::vector<Ball> balls;
};

KillPlan chop_plan(const PlanarLattice& lat, const OneChain& eta,
                   const std::vector<int>& sched) {
  CycleGridChop chop(lat, eta, sched);
  KillPlan k;
  k.T = chop.steps();
  k.killed.reserve(k.T + 1);
  for (std::size_t t = 0; t <= k.T; ++t) k.killed.push_back(chop.partial(t));
  for (std::size_t t = 0; t < k.T; ++t) k.balls.push_back(chop.step_ball(t));
  return k;
}

/// Kill schedule for chains that the planar lattice cannot chop (ambient
/// dimension 3, or three parameters): whole connected components die as a
/// threshold plane sweeps across the x-axis in steps of the localization
/// scale. A component whose least x-coordinate sits numerically on a
/// threshold is degenerate; the caller retries with a nudged offset.
struct Sweeper {
  double x0 = 0.0;
  double step = 1.0;
  std::size_t D = 0;
  double pad = 0.0;

  KillPlan plan(const OneChain& eta) const {
    KillPlan k;
    k.T = D;
    if (eta.empty()) {
      k.killed.assign(D + 1, OneChain::of(eta.dim(), {}));
      return k;
    }
    const std::vector<OneChain> comps = chain_components(eta);
    std::vector<double> keys;
    keys.reserve(comps.size());
    for (const OneChain& c : comps) {
      hard_assert(boundary_one(c).empty(),
                  "a component of a seam cycle must itself be closed");
      const double key = component_key_x(c);
      for (std::size_t d = 0; d <= D; ++d)
        if (std::fabs(key - (x0 + step * static_cast<double>(d))) < 1e-12)
          throw DegenerateCrossing("sweep threshold hit a component");
      keys.push_back(key);
      k.balls.push_back(enclosing_ball(c, pad));
    }
    k.killed.reserve(D + 1);
    for (std::size_t d = 0; d <= D; ++d) {
      const double theta = x0 + step * static_cast<double>(d);
      OneChain acc = OneChain::of(eta.dim(), {});
      for (std::size_t i = 0; i < comps.size(); ++i)
        if (keys[i] < theta) acc = add_one(acc, comps[i]);
      k.killed.push_back(std::move(acc));
    }
    hard_assert(k.killed.back() == eta,
                "sweep failed to exhaust a seam cycle");
    return k;
  }
};

/// Filling pipeline. Every vertex of the refined complex receives a 1-chain
/// whose boundary is exactly the refined family value. Original vertices
/// keep a direct filling of their value; edge vertices run a plateau, one
/// transition, and a kill phase that dismantles the edge seam cycle one step
/// at a time; vertices of higher cells either project to the cell boundary
/// (the collar) or anchor to a corner filling plus the surviving part of a
/// seam cycle selected by integer radial projection.
struct FPipe {
  const ZeroFamily& F;
  Exec ex;
  const CubicalComplex& X;

  int p = 0;
  int ambient = 2;
  bool inductive = false;
  std::string path = "witness";
  double delta = 0.0;
  double eta_in = 0.0;
  double eps_in = 0.0;
  double extent = 0.0;
  Pt blo{0.0, 0.0, 0.0};
  Pt bhi{0.0, 0.0, 0.0};
  double pad = 0.0;

  PlanarLattice latA, latB;
  Sweeper sweep;
  std::vector<int> U;  // shared offset-lattice schedule for block seams
  std::size_t Tmax = 0;

  std::unordered_map<VKey, OneChain, VecIntHash> tau0;

  struct EdgeCtx {
    VKey a, b;    // near / far original endpoints
    OneChain W;   // filling of F(a) + F(b)
    OneChain B;   // tau0(a) + W: the far-plateau base
    KillPlan plan;  // kill schedule of the seam tau0(a) + W + tau0(b)
  };
  std::map<Cell, EdgeCtx, bool (*)(const Cell&, const Cell&)> edges;

  struct BlockCtx {
    VKey vc;  // anchor corner of the cell
    std::map<VKey, OneChain> corner;  // corner-anchored fillings
    // seam cycle and kill plan, keyed by the central-block boundary point
    std::map<VKey, std::pair<OneChain, KillPlan>> seam;
    std::size_t T = 0;
  };
  std::map<Cell, BlockCtx, bool (*)(const Cell&, const Cell&)> blocks;

  int Q = 1;
  CubicalComplex XQ;
  std::unordered_map<VKey, OneChain, VecIntHash> val;

  FPipe(const ZeroFamily& f, const Exec& x)
      : F(f), ex(x), X(f.complex), edges(cell_less), blocks(cell_less) {}

  // ---- jitter-independent preparation -------------------------------------

  void prepare(const CellCerts& certs_in) {
    p = X.dim();
    ambient = 2;
    for (const auto& [k, z] : F.values) ambient = std::max(ambient, z.dim());
    inductive = (ambient == 2 && p <= 2);
    path = p == 0 ? "witness" : (inductive ? "inductive" : "cone-fallback");

    bool any = false;
    for (const auto& [k, z] : F.values) {
      eta_in = std::max(eta_in, flat_norm(z).value);
      for (const Pt& q : z.points()) {
        if (!any) {
          blo = bhi = q;
          any = true;
        }
        for (int i = 0; i < 3; ++i) {
          blo[i] = std::min(blo[i], q[i]);
          bhi[i] = std::max(bhi[i], q[i]);
        }
      }
    }
    extent = any ? dist(blo, bhi) : 0.0;

    for (const Cell& c : X.cells_sorted()) {
      if (c.dim() == 0) continue;
      const auto vs = CubicalComplex::cell_vertices(c);
      for (std::size_t i = 0; i < vs.size(); ++i)
        for (std::size_t j = i + 1; j < vs.size(); ++j)
          eps_in = std::max(
              eps_in, flat_distance(F.at(vs[i]), F.at(vs[j]),
                                    FlatDomain::whole(ambient),
                                    FlatMode::absolute)
                          .value);
    }

    for (const auto& [c, fam] : certs_in) delta = std::max(delta, fam.delta);
    if (!(delta > 0.0))
      delta = extent > 0.0 ? 0.25 * extent + eps_geom() : 1.0;
    pad = 1e-7 * std::max(extent, delta) + 10.0 * eps_geom();
  }

  // ---- per-jitter construction ---------------------------------------------

  OneChain split2(OneChain c) const {
    if (!inductive || p < 1) return c;
    c = latA.split(c);
    if (p == 2) c = latB.split(c);
    return c;
  }

  void build(int jitter) {
    edges.clear();
    blocks.clear();
    tau0.clear();
    val.clear();
    U.clear();
    Tmax = 0;

    if (inductive && p >= 1) {
      const double m = 3.0 * delta;
      const Pt lo{blo.x() - m, blo.y() - m};
      const Pt hi{bhi.x() + m, bhi.y() + m};
      latA = PlanarLattice(lo, hi, delta, jitter, false);
      if (p == 2) latB = PlanarLattice(lo, hi, delta, jitter, true);
    }
    if (!inductive && p >= 1) {
      sweep.step = delta;
      sweep.x0 = blo.x() - (0.437521 + 0.0731 * jitter) * delta;
      sweep.D = static_cast<std::size_t>(
                    std::ceil((bhi.x() - sweep.x0) / delta)) +
                1;
      sweep.pad = pad;
    }

    for (const VKey& v : X.vertices())
      tau0.emplace(v, split2(total_filling(F.at(v))));

    std::size_t edgeT = 0;
    for (const Cell& E : X.cells_of_dim(1)) {
      EdgeCtx ec;
      const auto vs = CubicalComplex::cell_vertices(E);
      ec.a = vs.front();
      ec.b = vs.back();
      ec.W = split2(total_filling(add_zero(F.at(ec.a), F.at(ec.b))));
      ec.B = add_one(tau0.at(ec.a), ec.W);
      OneChain eta = add_one(ec.B, tau0.at(ec.b));
      hard_assert(boundary_one(eta).empty(), "edge seam failed to close");
      ec.plan = inductive ? chop_plan(latA, eta, {}) : sweep.plan(eta);
      edgeT = std::max(edgeT, ec.plan.T);
      Tmax = std::max(Tmax, ec.plan.T);
      edges.emplace(E, std::move(ec));
    }

    for (const Cell& C : X.cells_sorted()) {
      if (C.dim() < 2) continue;
      BlockCtx bc;
      const auto vs = CubicalComplex::cell_vertices(C);
      bc.vc = vs.front();
      for (const VKey& u : vs) {
        if (u == bc.vc)
          bc.corner.emplace(u, tau0.at(bc.vc));
        else
          bc.corner.emplace(
              u, add_one(tau0.at(bc.vc),
                         split2(total_filling(add_zero(F.at(bc.vc), F.at(u))))));
      }
      blocks.emplace(C, std::move(bc));
    }

    if (inductive && p == 2) {
      // Shared kill schedule for block seams: a seam anchored at corner u
      // joins the corner filling with either u's own plateau or the far
      // plateau base of an edge ending at u, so those few cycles already
      // enumerate every lattice cell a seam can touch.
      std::set<int> uset;
      for (auto& [C, bc] : blocks) {
        for (const auto& [u, qc] : bc.corner) {
          {
            OneChain etau = latB.split(add_one(tau0.at(u), qc));
            hard_assert(boundary_one(etau).empty(),
                        "corner seam failed to close");
            CycleGridChop chop(latB, etau);
            for (int cid : chop.schedule()) uset.insert(cid);
          }
          for (const Cell& E : CubicalComplex::faces(C)) {
            if (E.dim() != 1) continue;
            const auto evs = CubicalComplex::cell_vertices(E);
            if (evs.back() != u) continue;
            OneChain etab = latB.split(add_one(edges.at(E).B, qc));
            hard_assert(boundary_one(etab).empty(),
                        "edge-base seam failed to close");
            CycleGridChop chop(latB, etab);
            for (int cid : chop.schedule()) uset.insert(cid);
          }
        }
      }
      U.assign(uset.begin(), uset.end());
    }

    if (p == 0) {
      Q = 1;
    } else if (p == 1) {
      Q = smallest_odd_ge(
          std::max(3, 2 * static_cast<int>(edgeT) + 3));
    } else {
      const std::size_t Tc = inductive ? U.size() : sweep.D;
      // block side >= 3T+3 keeps the radial projection drift bounded and
      // the dead zone reachable; >= edgeT keeps ring values on the plateau
      const int q1 = smallest_odd_ge(std::max(
          {3 * static_cast<int>(Tc) + 3, static_cast<int>(edgeT), 3}));
      Q = 3 * q1;
    }

    XQ = refine(X, Q);

    std::vector<std::vector<std::pair<Cell, VKey>>> buck(
        static_cast<std::size_t>(p) + 1);
    for (const VKey& v : XQ.vertices()) {
      const Cell carrier = parent_cell(Cell{v, 0}, Q);
      buck[static_cast<std::size_t>(carrier.dim())].push_back({carrier, v});
    }

    for (const auto& [c, v] : buck[0]) val.emplace(v, tau0.at(c.anchor));

    if (p >= 1) {
      const int mid = (Q - 1) / 2;
      for (const auto& [E, v] : buck[1]) {
        const EdgeCtx& ec = edges.at(E);
        int ax = 0;
        while (!((E.axes >> ax) & 1u)) ++ax;
        const int i = v[static_cast<std::size_t>(ax)] - E.anchor[static_cast<std::size_t>(ax)] * Q;
        if (i <= mid) {
          val.emplace(v, tau0.at(ec.a));
        } else {
          const std::size_t back = static_cast<std::size_t>(Q - i);
          const std::size_t lvl = ec.plan.T > back ? ec.plan.T - back : 0;
          val.emplace(v, add_one(ec.B, ec.plan.killed[lvl]));
        }
      }
    }

    for (int j = 2; j <= p; ++j) {
      const int S = Q / 3;
      std::vector<std::pair<Cell, VKey>> centers;
      for (const auto& [C, v] : buck[static_cast<std::size_t>(j)]) {
        if (cell_depth(C, v, Q) <= S)
          val.emplace(v, val.at(collar_proj(C, v)));
        else
          centers.push_back({C, v});
      }
      for (const auto& [C, v] : centers) center_value(C, v);
    }
  }

  /// Side-preserving projection of a collar vertex to the cell boundary:
  /// the axis realizing the depth is clamped to its near side, every other
  /// coordinate is kept, so the nearest original corner never changes.
  VKey collar_proj(const Cell& C, const VKey& v) const {
    int best_ax = -1;
    int best_d = Q + 1;
    bool near = true;
    for (std::size_t ax = 0; ax < C.anchor.size(); ++ax) {
      if (!((C.axes >> ax) & 1u)) continue;
      const int g = v[ax] - C.anchor[ax] * Q;
      const int d = std::min(g, Q - g);
      if (d < best_d) {
        best_d = d;
        best_ax = static_cast<int>(ax);
        near = g < Q - g;
      }
    }
    hard_assert(best_ax >= 0, "collar projection outside its cell");
    VKey out = v;
    out[static_cast<std::size_t>(best_ax)] =
        C.anchor[static_cast<std::size_t>(best_ax)] * Q + (near ? 0 : Q);
    return out;
  }

  VKey block_corner(const Cell& C, const VKey& local, int S) const {
    VKey u = C.anchor;
    std::size_t li = 0;
    for (std::size_t ax = 0; ax < C.anchor.size(); ++ax) {
      if (!((C.axes >> ax) & 1u)) continue;
      if (local[li] > (S - 1) / 2) u[ax] += 1;
      ++li;
    }
    return u;
  }

  void center_value(const Cell& C, const VKey& v) {
    BlockCtx& bc = blocks.at(C);
    const int S = Q / 3;
    bc.T = inductive ? U.size() : sweep.D;
    VKey z;
    for (std::size_t ax = 0; ax < C.anchor.size(); ++ax)
      if ((C.axes >> ax) & 1u)
        z.push_back(v[ax] - C.anchor[ax] * Q - S);
    const int dC = cell_depth(C, v, Q) - S;
    hard_assert(dC >= 1, "center row outside the central block");
    const VKey lam = block_corner(C, z, S);
    const std::size_t t =
        std::min<std::size_t>(static_cast<std::size_t>(dC - 1), bc.T);
    if (t >= bc.T) {
      val.emplace(v, bc.corner.at(lam));
      return;
    }
    const VKey sb = radial_to_boundary(z, S);
    hard_assert(block_corner(C, sb, S) == lam,
                "radial projection switched quadrants");
    auto it = bc.seam.find(sb);
    if (it == bc.seam.end()) {
      VKey local(sb.size());
      for (std::size_t i = 0; i < sb.size(); ++i) local[i] = S + sb[i];
      OneChain eta =
          add_one(val.at(cell_vertex_key(C, Q, local)), bc.corner.at(lam));
      if (inductive) eta = latB.split(eta);
      hard_assert(boundary_one(eta).empty(), "block seam failed to close");
      KillPlan plan =
          inductive ? chop_plan(latB, eta, U) : sweep.plan(eta);
      hard_assert(plan.T == bc.T, "block kill plans must share one length");
      Tmax = std::max(Tmax, plan.T);
      it = bc.seam
               .emplace(sb, std::make_pair(std::move(eta), std::move(plan)))
               .first;
    }
    val.emplace(v, add_one(bc.corner.at(lam),
                           add_one(it->second.first,
                                   it->second.second.killed[t])));
  }

  // ---- output assembly -----------------------------------------------------

  FillResult assemble() {
    FillResult out;
    out.tau.complex = XQ;
    out.tau.values = val;
    out.tau.provenance =
        F.provenance.empty() ? "filled" : F.provenance + "|filled";

    // the boundary of every output filling reproduces the refined family
    const ZeroFamily RF = refine_family(F, Q);
    for (const auto& [v, c] : val)
      hard_assert(boundary_one(c) == RF.at(v),
                  "filling boundary must reproduce the refined family");

    std::vector<Ball> cand;
    // pool both the split pieces and their fused collinear runs: support
    // reduction of a transition can merge pieces across interior lattice cuts
    auto pool = [&](const OneChain& c) {
      for (const Ball& b : segment_balls(c, pad)) cand.push_back(b);
      for (const Ball& b : segment_balls(reduce_overlaps(c), pad))
        cand.push_back(b);
    };
    for (const auto& [v, c] : tau0) pool(c);
    for (const auto& [E, ec] : edges) {
      pool(ec.W);
      cand.insert(cand.end(), ec.plan.balls.begin(), ec.plan.balls.end());
    }
    for (const auto& [C, bc] : blocks) {
      for (const auto& [u, qc] : bc.corner) pool(qc);
      for (const auto& [sb, sp] : bc.seam)
        cand.insert(cand.end(), sp.second.balls.begin(),
                    sp.second.balls.end());
    }
    {
      const double eps = eps_geom();
      std::sort(cand.begin(), cand.end(), [](const Ball& a, const Ball& b) {
        if (lex_less(a.center, b.center)) return true;
        if (lex_less(b.center, a.center)) return false;
        return a.radius < b.radius;
      });
      cand.erase(std::unique(cand.begin(), cand.end(),
                             [&](const Ball& a, const Ball& b) {
                               return dist(a.center, b.center) <= eps &&
                                      std::fabs(a.radius - b.radius) <= eps;
                             }),
                 cand.end());
    }

    const auto edges1 = XQ.cells_of_dim(1);
    std::vector<std::vector<Ball>> eballs(edges1.size());
    parallel_for(edges1.size(), ex, [&](std::size_t i) {
      const auto vs = CubicalComplex::cell_vertices(edges1[i]);
      const OneChain diff =
          reduce_overlaps(add_one(val.at(vs[0]), val.at(vs[1])));
      if (diff.empty()) return;
      eballs[i] = cover_filter_segments(cand, diff.segments());
    });
    std::unordered_map<Cell, std::vector<Ball>, CellHash> edge_map;
    for (std::size_t i = 0; i < edges1.size(); ++i)
      if (!eballs[i].empty())
        edge_map.emplace(edges1[i], std::move(eballs[i]));
    out.certs = lift_edge_certs(XQ, edge_map);

    FillReport rep;
    rep.q = Q;
    rep.path = path;
    rep.eta_in = eta_in;
    rep.eps_in = eps_in;
    rep.delta = delta;
    rep.extent = extent;
    for (const auto& [v, c] : val)
      rep.max_mass = std::max(rep.max_mass, c.mass());
    const double scale = std::max(1.0, static_cast<double>(Tmax)) *
                         std::max({eta_in, eps_in, 1e-300});
    rep.measured_c = rep.max_mass > 0.0 ? rep.max_mass / scale : 0.0;
    for (const auto& [c, fam] : out.certs) {
      rep.N_out = std::max(rep.N_out, fam.balls.size());
      rep.delta_out = std::max(rep.delta_out, fam.delta);
    }
    rep.localization = check_localized(out.tau, out.certs, ex);
    hard_assert(rep.localization.localized,
                "filled family failed its own certificate check");
    out.report = std::move(rep);
    return out;
  }
};

}  // namespace

FillResult fill_small_family(const ZeroFamily& F, const CellCerts& certs,
                             const Exec& ex) {
  if (!F.total()) throw BadSpec("family must assign a value to every vertex");
  for (const auto& [v, z] : F.values)
    if (z.mass() % 2 != 0)
      throw OddParity("every value needs even mass to admit a filling");
  const int p = F.complex.dim();
  int ambient = 2;
  for (const auto& [k, z] : F.values) ambient = std::max(ambient, z.dim());
  if (p > 3 || ambient > 3)
    throw DimUnsupported("filling supports up to 3 parameters in ambient"
                         " dimension up to 3");

  FPipe pipe(F, ex);
  pipe.prepare(certs);
  for (int jitter = 0; jitter < 8; ++jitter) {
    try {
      pipe.build(jitter);
      return pipe.assemble();
    } catch (const DegenerateCrossing&) {
      continue;
    }
  }
  throw ExhaustedSamples("every jitter hit a degenerate seam configuration");
}

// ----------------------------------------------------------- split_filling

namespace {

/// Perimeter walk of a convex polygon: cumulative arc-length parameters,
/// point location on the boundary, and the shorter arc between two boundary
/// points as polygon-edge subsegments (ties resolved counterclockwise).
struct PerimeterWalk {
  std::vector<Pt> poly;
  std::vector<double> cum;  // cum[i] = arc length of vertex i; cum[n] = total
  double total = 0.0;

  explicit PerimeterWalk(const std::vector<Pt>& verts) : poly(verts) {
    const std::size_t n = poly.size();
    cum.assign(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      cum[i + 1] = cum[i] + dist(poly[i], poly[(i + 1) % n]);
    total = cum[n];
  }

  double locate(const Pt& x) const {
    const std::size_t n = poly.size();
    double best_d = std::numeric_limits<double>::infinity();
    double best_s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Pt& a = poly[i];
      const Pt& b = poly[(i + 1) % n];
      const double t = closest_param_on_segment(x, a, b);
      const double d = dist(x, lerp(a, b, t));
      if (d < best_d) {
        best_d = d;
        best_s = cum[i] + t * dist(a, b);
      }
    }
    hard_assert(best_d <= 10.0 * eps_geom(),
                "corrector endpoint is off the cell perimeter");
    return best_s;
  }

  Pt point_at(double s) const {
    const std::size_t n = poly.size();
    s = std::fmod(s, total);
    if (s < 0.0) s += total;
    for (std::size_t i = 0; i < n; ++i) {
      const double len = cum[i + 1] - cum[i];
      if (s <= cum[i + 1] || i + 1 == n) {
        const double t = len > 0.0 ? (s - cum[i]) / len : 0.0;
        return lerp(poly[i], poly[(i + 1) % n], t);
      }
    }
    return poly.front();
  }

  std::vector<Seg> arc(const Pt& A, const Pt& B) const {
    const double eps = eps_geom();
    const double s1 = locate(A);
    const double s2 = locate(B);
    double fwd = s2 - s1;
    if (fwd < 0.0) fwd += total;
    const double bwd = total - fwd;
    const bool ccw = fwd <= bwd + eps;
    const double span = ccw ? fwd : bwd;
    // breakpoints: polygon vertices strictly inside the chosen arc
    std::vector<double> rel;
    for (std::size_t k = 0; k < poly.size(); ++k) {
      double r = ccw ? cum[k] - s1 : s1 - cum[k];
      if (r < 0.0) r += total;
      if (r > eps && r < span - eps) rel.push_back(r);
    }
    std::sort(rel.begin(), rel.end());
    std::vector<Pt> stops;
    stops.push_back(A);
    for (double r : rel) stops.push_back(point_at(ccw ? s1 + r : s1 - r));
    stops.push_back(B);
    std::vector<Seg> out;
    for (std::size_t i = 0; i + 1 < stops.size(); ++i)
      if (dist(stops[i], stops[i + 1]) > eps)
        out.push_back(Seg{stops[i], stops[i + 1]});
    return out;
  }
};

}  // namespace

SplitResult split_filling(const OneFamily& G, const FlatDomain& Q,
                          const CellCerts& certs, const Exec& ex) {
  if (!G.total()) throw BadSpec("family must assign a value to every vertex");
  if (!Q.has_boundary() || Q.polygon().empty())
    throw BadSpec("splitting needs a convex polygonal cell");
  for (const Cell& c : G.complex.cells_sorted()) {
    if (c.dim() == 0) continue;
    const auto vs = CubicalComplex::cell_vertices(c);
    bool varies = false;
    for (std::size_t i = 1; i < vs.size() && !varies; ++i)
      varies = !(G.at(vs[i]) == G.at(vs[0]));
    if (varies && certs.find(c) == certs.end())
      throw CertMissing("a varying cell carries no localization certificate");
  }

  const Region reg = Q.region();
  const PerimeterWalk walk(Q.polygon());

  SplitResult out;
  out.inside.complex = G.complex;
  out.inside.provenance =
      G.provenance.empty() ? "split-inside" : G.provenance + "|split-inside";
  out.outside.complex = G.complex;
  out.outside.provenance =
      G.provenance.empty() ? "split-outside" : G.provenance + "|split-outside";

  for (const auto& [v, g] : G.values) {
    OneChain ins = restrict_one(g, reg);
    // corrector: consecutive crossing points of each segment are joined by
    // the shorter perimeter arc, so spurious boundary points cancel in pairs
    std::vector<Seg> arcs;
    for (const Seg& s : g.segments()) {
      const std::vector<double> ts = reg.crossings(s.a, s.b);
      for (std::size_t k = 0; k + 1 < ts.size(); k += 2) {
        const Pt a = lerp(s.a, s.b, ts[k]);
        const Pt b = lerp(s.a, s.b, ts[k + 1]);
        const std::vector<Seg> piece = walk.arc(a, b);
        arcs.insert(arcs.end(), piece.begin(), piece.end());
      }
    }
    ins = add_one(ins, OneChain::of(g.dim(), std::move(arcs)));

    for (const Seg& s : ins.segments())
      hard_assert(reg.contains(lerp(s.a, s.b, 0.5)),
                  "split kept a segment outside the cell");
    const ZeroChain drift =
        add_zero(boundary_one(ins), restrict_zero(boundary_one(g), reg));
    for (const Pt& pt : drift.points())
      hard_assert(std::fabs(Q.boundary_distance(pt)) <= 10.0 * eps_geom(),
                  "split boundary escaped the cell perimeter");

    out.outside.values.emplace(v, add_one(g, ins));
    out.inside.values.emplace(v, std::move(ins));
  }

  for (const auto& [c, fam] : certs) {
    std::vector<Ball> balls = fam.balls;
    for (Ball& b : balls) b.radius *= 3.0;
    out.certs.emplace(c, disjoint_family(std::move(balls)));
  }

  out.localization = check_localized(out.inside, out.certs, ex);
  hard_assert(out.localization.localized,
              "split family failed its certificate check");
  return out;
}

}  // namespace cf
