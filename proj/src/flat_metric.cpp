#include "chainforge/flat_metric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/graph/adjacency_list.hpp>
#include <boost/graph/maximum_weighted_matching.hpp>

#include "chainforge/chain_io.hpp"

namespace cf {

// --------------------------------------------------------------- FlatDomain

namespace {

double cross2(const Pt& u, const Pt& v) { return u.x() * v.y() - u.y() * v.x(); }

double polygon_signed_area(const std::vector<Pt>& v) {
  double a = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Pt& p = v[i];
    const Pt& q = v[(i + 1) % v.size()];
    a += cross2(p, q);
  }
  return 0.5 * a;
}

}  // namespace

FlatDomain FlatDomain::whole(int dim) {
  FlatDomain d;
  d.kind_ = Kind::whole;
  d.dim_ = dim;
  return d;
}

FlatDomain FlatDomain::disk(Pt center, double radius, int dim) {
  if (!(radius > 0)) throw BadSpec("disk radius must be positive");
  FlatDomain d;
  d.kind_ = Kind::disk;
  d.dim_ = dim;
  d.center_ = center;
  d.radius_ = radius;
  return d;
}

FlatDomain FlatDomain::box(Pt lo, Pt hi) {
  if (!(lo.x() < hi.x() && lo.y() < hi.y()))
    throw BadSpec("box corners must be strictly ordered");
  return convex_polygon(
      {lo, Pt{hi.x(), lo.y()}, hi, Pt{lo.x(), hi.y()}});
}

FlatDomain FlatDomain::triangle(Pt a, Pt b, Pt c) {
  return convex_polygon({a, b, c});
}

FlatDomain FlatDomain::convex_polygon(std::vector<Pt> verts) {
  if (verts.size() < 3) throw BadSpec("polygon needs at least 3 vertices");
  for (const Pt& p : verts)
    if (std::abs(p.z()) > eps_geom())
      throw BadSpec("polygon domains are planar (z = 0)");
  double area = polygon_signed_area(verts);
  if (std::abs(area) <= eps_geom())
    throw NonConvexDomain("polygon is degenerate (zero area)");
  if (area < 0) std::reverse(verts.begin(), verts.end());
  const std::size_t n = verts.size();
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    scale = std::max(scale, dist(verts[i], verts[(i + 1) % n]));
  for (std::size_t i = 0; i < n; ++i) {
    const Pt& a = verts[i];
    const Pt& b = verts[(i + 1) % n];
    const Pt& c = verts[(i + 2) % n];
    if (cross2(b - a, c - b) < -eps_geom() * scale * scale)
      throw NonConvexDomain("polygon has a reflex vertex");
  }
  FlatDomain d;
  d.kind_ = Kind::polygon;
  d.dim_ = 2;
  d.verts_ = std::move(verts);
  return d;
}

bool FlatDomain::contains(const Pt& p) const {
  switch (kind_) {
    case Kind::whole:
      return true;
    case Kind::disk:
      return dist(p, center_) <= radius_ + eps_geom();
    case Kind::polygon: {
      const std::size_t n = verts_.size();
      for (std::size_t i = 0; i < n; ++i) {
        const Pt& a = verts_[i];
        const Pt& b = verts_[(i + 1) % n];
        if (cross2(b - a, p - a) < -eps_geom() * std::max(1.0, dist(a, b)))
          return false;
      }
      return true;
    }
  }
  return false;
}

double FlatDomain::boundary_distance(const Pt& p) const {
  switch (kind_) {
    case Kind::whole:
      throw BadSpec("unbounded domain has no boundary");
    case Kind::disk:
      return std::abs(radius_ - dist(p, center_));
    case Kind::polygon: {
      double best = std::numeric_limits<double>::infinity();
      const std::size_t n = verts_.size();
      for (std::size_t i = 0; i < n; ++i)
        best = std::min(best,
                        dist_point_segment(p, verts_[i], verts_[(i + 1) % n]));
      return best;
    }
  }
  return 0.0;
}

Pt FlatDomain::boundary_foot(const Pt& p) const {
  switch (kind_) {
    case Kind::whole:
      throw BadSpec("unbounded domain has no boundary");
    case Kind::disk: {
      Pt v = p - center_;
      if (norm(v) <= eps_geom()) v = Pt{1.0, 0.0, 0.0};
      return center_ + radius_ * normalized(v);
    }
    case Kind::polygon: {
      double best = std::numeric_limits<double>::infinity();
      Pt foot = verts_[0];
      const std::size_t n = verts_.size();
      for (std::size_t i = 0; i < n; ++i) {
        const Pt& a = verts_[i];
        const Pt& b = verts_[(i + 1) % n];
        double d = dist_point_segment(p, a, b);
        if (d < best) {
          best = d;
          foot = lerp(a, b, closest_param_on_segment(p, a, b));
        }
      }
      return foot;
    }
  }
  return p;
}

void FlatDomain::bbox(Pt& lo, Pt& hi) const {
  switch (kind_) {
    case Kind::whole:
      throw BadSpec("unbounded domain has no bounding box");
    case Kind::disk: {
      const double ext = dim_ == 3 ? radius_ : 0.0;
      lo = center_ - Pt{radius_, radius_, ext};
      hi = center_ + Pt{radius_, radius_, ext};
      return;
    }
    case Kind::polygon: {
      lo = hi = verts_[0];
      for (const Pt& p : verts_)
        for (int i = 0; i < 3; ++i) {
          lo[i] = std::min(lo[i], p[i]);
          hi[i] = std::max(hi[i], p[i]);
        }
      return;
    }
  }
}

double FlatDomain::volume() const {
  switch (kind_) {
    case Kind::whole:
      throw BadSpec("unbounded domain has no volume");
    case Kind::disk:
      return dim_ == 3 ? 4.0 / 3.0 * M_PI * radius_ * radius_ * radius_
                       : M_PI * radius_ * radius_;
    case Kind::polygon:
      return polygon_signed_area(verts_);  // positive: vertices are ccw
  }
  return 0.0;
}

Region FlatDomain::region() const {
  switch (kind_) {
    case Kind::whole:
      return Region::whole();
    case Kind::disk:
      return Region::ball(center_, radius_);
    case Kind::polygon: {
      std::vector<Region> halves;
      const std::size_t n = verts_.size();
      for (std::size_t i = 0; i < n; ++i) {
        const Pt& a = verts_[i];
        const Pt& b = verts_[(i + 1) % n];
        Pt d = b - a;
        Pt normal{d.y(), -d.x(), 0.0};  // outward for ccw order
        halves.push_back(Region::halfspace(normal, dot(normal, a)));
      }
      return Region::intersection(std::move(halves));
    }
  }
  return Region::whole();
}

// -------------------------------------------------------------- FlatWitness

double FlatWitness::recompute() const {
  double v = 0.0;
  for (const auto& [p, q] : matched_pairs) v += dist(p, q);
  v += static_cast<double>(dropped.size());
  for (const auto& [p, f] : boundary_projected) v += dist(p, f);
  return v;
}

OneChain FlatWitness::filling() const {
  std::vector<Seg> segs;
  for (const auto& [p, q] : matched_pairs)
    if (!pt_eq(p, q)) segs.push_back({p, q});
  for (const auto& [p, f] : boundary_projected)
    if (!pt_eq(p, f)) segs.push_back({p, f});
  return OneChain::of(dim, std::move(segs));
}

ZeroChain FlatWitness::residual() const { return ZeroChain::of(dim, dropped); }

// ---------------------------------------------------------------- flat_norm

namespace {

struct OptOut {
  double cost;
  bool to_boundary;
  Pt foot;
};

/// Maximum-weight matching on the positive-savings graph of one connected
/// component, exact bitmask dynamic program. Local indices; returns mate
/// (-1 for unmatched).
std::vector<int> match_component_dp(
    const std::vector<std::vector<double>>& w) {
  const int m = static_cast<int>(w.size());
  const int full = (1 << m) - 1;
  std::vector<double> dp(full + 1, 0.0);
  for (int mask = 1; mask <= full; ++mask) {
    const int i = __builtin_ctz(mask);
    const int rest = mask ^ (1 << i);
    double best = dp[rest];  // i stays unmatched
    for (int j = i + 1; j < m; ++j) {
      if (!((mask >> j) & 1) || w[i][j] <= 0) continue;
      best = std::max(best, dp[rest ^ (1 << j)] + w[i][j]);
    }
    dp[mask] = best;
  }
  std::vector<int> mate(m, -1);
  int mask = full;
  while (mask) {
    const int i = __builtin_ctz(mask);
    const int rest = mask ^ (1 << i);
    if (dp[mask] == dp[rest]) {  // exact: dp was assigned from this expression
      mask = rest;
      continue;
    }
    for (int j = i + 1; j < m; ++j) {
      if (!((mask >> j) & 1) || w[i][j] <= 0) continue;
      if (dp[mask] == dp[rest ^ (1 << j)] + w[i][j]) {
        mate[i] = j;
        mate[j] = i;
        mask = rest ^ (1 << j);
        break;
      }
    }
  }
  return mate;
}

/// Blossom matching via boost for components too large for the bitmask DP.
/// Weights are scaled to integers; the loss of 1e-12 relative precision only
/// affects tie-breaking between near-equal matchings.
std::vector<int> match_component_blossom(
    const std::vector<std::vector<double>>& w) {
  using Graph = boost::adjacency_list<
      boost::vecS, boost::vecS, boost::undirectedS, boost::no_property,
      boost::property<boost::edge_weight_t, long long>>;
  const int m = static_cast<int>(w.size());
  Graph g(m);
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j)
      if (w[i][j] > 0)
        boost::add_edge(i, j, static_cast<long long>(std::llround(w[i][j] * 1e12)),
                        g);
  std::vector<boost::graph_traits<Graph>::vertex_descriptor> mate(m);
  boost::maximum_weighted_matching(g, &mate[0]);
  std::vector<int> out(m, -1);
  for (int i = 0; i < m; ++i)
    if (mate[i] != boost::graph_traits<Graph>::null_vertex())
      out[i] = static_cast<int>(mate[i]);
  return out;
}

struct DSU {
  std::vector<int> parent;
  explicit DSU(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

constexpr int kDpLimit = 16;

}  // namespace

FlatWitness flat_norm(const ZeroChain& z, const FlatDomain& domain,
                      FlatMode mode) {
  if (mode == FlatMode::relative) {
    if (!domain.has_boundary())
      throw BadSpec("relative flat norm needs a bounded domain");
    if (!domain.is_disk() && z.dim() != 2)
      throw BadSpec("polygonal domains are planar; chain dimension mismatch");
  }
  FlatWitness wit;
  wit.dim = z.dim();
  const std::vector<Pt>& pts = z.points();
  const int n = static_cast<int>(pts.size());
  if (n == 0) return wit;

  std::vector<OptOut> opt(n);
  for (int i = 0; i < n; ++i) {
    if (mode == FlatMode::relative) {
      double db = domain.boundary_distance(pts[i]);
      if (db < 1.0)
        opt[i] = {db, true, domain.boundary_foot(pts[i])};
      else
        opt[i] = {1.0, false, {}};
    } else {
      opt[i] = {1.0, false, {}};
    }
  }

  // positive-savings edges: pairing i,j beats opting both out
  std::vector<std::vector<double>> savings(n, std::vector<double>(n, 0.0));
  DSU dsu(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double s = opt[i].cost + opt[j].cost - dist(pts[i], pts[j]);
      if (s > 0) {
        savings[i][j] = savings[j][i] = s;
        dsu.unite(i, j);
      }
    }

  std::vector<int> mate(n, -1);
  std::vector<std::vector<int>> comps(n);
  for (int i = 0; i < n; ++i) comps[dsu.find(i)].push_back(i);
  for (const std::vector<int>& comp : comps) {
    if (comp.size() < 2) continue;
    const int m = static_cast<int>(comp.size());
    std::vector<std::vector<double>> w(m, std::vector<double>(m, 0.0));
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) w[a][b] = savings[comp[a]][comp[b]];
    std::vector<int> local =
        m <= kDpLimit ? match_component_dp(w) : match_component_blossom(w);
    for (int a = 0; a < m; ++a)
      if (local[a] >= 0) mate[comp[a]] = comp[local[a]];
  }

  for (int i = 0; i < n; ++i) {
    if (mate[i] >= 0) {
      if (mate[i] > i) wit.matched_pairs.emplace_back(pts[i], pts[mate[i]]);
    } else if (opt[i].to_boundary) {
      wit.boundary_projected.emplace_back(pts[i], opt[i].foot);
    } else {
      wit.dropped.push_back(pts[i]);
    }
  }
  wit.value = wit.recompute();
  return wit;
}

FlatWitness flat_norm(const ZeroChain& z) {
  return flat_norm(z, FlatDomain::whole(z.dim()), FlatMode::absolute);
}

double flat_norm_oracle(const ZeroChain& z, const FlatDomain& domain,
                        FlatMode mode) {
  if (z.mass() > 10) throw TooLarge("oracle accepts at most 10 points");
  if (mode == FlatMode::relative && !domain.has_boundary())
    throw BadSpec("relative flat norm needs a bounded domain");
  const std::vector<Pt>& pts = z.points();
  const int n = static_cast<int>(pts.size());
  std::vector<double> opt(n);
  for (int i = 0; i < n; ++i)
    opt[i] = mode == FlatMode::relative
                 ? std::min(1.0, domain.boundary_distance(pts[i]))
                 : 1.0;

  // exhaustive recursion over partial matchings with opt-outs
  auto rec = [&](auto&& self, unsigned mask) -> double {
    if (!mask) return 0.0;
    const int i = __builtin_ctz(mask);
    const unsigned rest = mask ^ (1u << i);
    double best = opt[i] + self(self, rest);
    for (int j = i + 1; j < n; ++j)
      if ((rest >> j) & 1u)
        best = std::min(best,
                        dist(pts[i], pts[j]) + self(self, rest ^ (1u << j)));
    return best;
  };
  return rec(rec, n ? (1u << n) - 1u : 0u);
}

FlatWitness flat_distance(const ZeroChain& a, const ZeroChain& b,
                          const FlatDomain& domain, FlatMode mode) {
  return flat_norm(add_zero(a, b), domain, mode);
}

// ----------------------------------------------------------- check_fineness

FinenessReport check_fineness(const ZeroFamily& F, double eps,
                              const FlatDomain& domain, FlatMode mode,
                              const Exec& ex) {
  if (!F.total()) throw BadSpec("fineness check requires a total family");
  FinenessReport report;
  report.eps = eps;

  // unique vertex pairs sharing a cell, in deterministic discovery order
  std::vector<std::pair<std::vector<int>, std::vector<int>>> pairs;
  std::unordered_set<std::vector<int>, VecIntHash> seen;
  for (const Cell& c : F.complex.cells_sorted()) {
    if (c.dim() == 0) continue;
    const auto verts = CubicalComplex::cell_vertices(c);
    for (std::size_t i = 0; i < verts.size(); ++i)
      for (std::size_t j = i + 1; j < verts.size(); ++j) {
        std::vector<int> key = verts[i];
        key.insert(key.end(), verts[j].begin(), verts[j].end());
        if (seen.insert(std::move(key)).second)
          pairs.emplace_back(verts[i], verts[j]);
      }
  }

  std::vector<FlatWitness> wits(pairs.size());
  parallel_for(pairs.size(), ex, [&](std::size_t t) {
    wits[t] = flat_distance(F.at(pairs[t].first), F.at(pairs[t].second),
                            domain, mode);
  });

  report.pairs_checked = pairs.size();
  for (std::size_t t = 0; t < pairs.size(); ++t) {
    report.max_value = std::max(report.max_value, wits[t].value);
    if (wits[t].value > eps) {
      FinenessViolation v;
      const auto& [x, y] = pairs[t];
      v.cell.anchor.resize(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) {
        v.cell.anchor[i] = std::min(x[i], y[i]);
        if (x[i] != y[i]) v.cell.axes |= (1u << i);
      }
      v.x = x;
      v.y = y;
      v.witness = wits[t];
      report.violations.push_back(std::move(v));
    }
  }
  report.fine = report.violations.empty();
  return report;
}

// --------------------------------------------------------------------- JSON

namespace {

nlohmann::json pt_json(const Pt& p, int dim) {
  nlohmann::json j = nlohmann::json::array();
  for (int i = 0; i < dim; ++i) j.push_back(p[i]);
  return j;
}

}  // namespace

nlohmann::json witness_to_json(const FlatWitness& w) {
  nlohmann::json j;
  j["value"] = w.value;
  j["dim"] = w.dim;
  nlohmann::json matched = nlohmann::json::array();
  for (const auto& [p, q] : w.matched_pairs)
    matched.push_back({pt_json(p, w.dim), pt_json(q, w.dim)});
  j["matched"] = matched;
  nlohmann::json dropped = nlohmann::json::array();
  for (const Pt& p : w.dropped) dropped.push_back(pt_json(p, w.dim));
  j["dropped"] = dropped;
  nlohmann::json proj = nlohmann::json::array();
  for (const auto& [p, f] : w.boundary_projected)
    proj.push_back({pt_json(p, w.dim), pt_json(f, w.dim)});
  j["boundary_projected"] = proj;
  return j;
}

}  // namespace cf
