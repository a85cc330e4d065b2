#include "chainforge/coarea.hpp"

#include <algorithm>
#include <cmath>

#include "chainforge/rng.hpp"

namespace cf {

// --------------------------------------------------------- AdmissibleFamily

double AdmissibleFamily::radius_sum() const {
  double s = 0.0;
  for (const Ball& b : balls) s += b.radius;
  return s;
}

bool AdmissibleFamily::disjoint() const {
  for (std::size_t i = 0; i < balls.size(); ++i)
    for (std::size_t j = i + 1; j < balls.size(); ++j)
      if (dist(balls[i].center, balls[j].center) <=
          balls[i].radius + balls[j].radius + eps_geom())
        return false;
  return true;
}

bool AdmissibleFamily::valid() const {
  if (!disjoint()) return false;
  double s = radius_sum();
  return s < delta || (s == 0.0 && delta == 0.0);
}

bool AdmissibleFamily::covers(const Pt& p) const {
  for (const Ball& b : balls)
    if (dist(p, b.center) <= b.radius + eps_geom()) return true;
  return false;
}

// ------------------------------------------------------------ cover_centers

CoverCenters cover_centers(const FlatDomain& domain, double r) {
  if (!(r > 0)) throw BadSpec("cover radius must be positive");
  const int n = domain.dim();
  CoverCenters out;
  out.r = r;
  out.ambient_dim = n;
  out.volume = domain.volume();

  // one-ball shortcut: the whole domain inside a single r-ball
  Pt hub{};
  bool one_ball = false;
  if (domain.is_disk()) {
    hub = domain.disk_center();
    one_ball = domain.disk_radius() <= r;
  } else {
    for (const Pt& v : domain.polygon()) hub = hub + v;
    hub = (1.0 / static_cast<double>(domain.polygon().size())) * hub;
    one_ball = true;
    for (const Pt& v : domain.polygon()) one_ball &= dist(hub, v) <= r;
  }
  if (one_ball) {
    out.points = {hub};
    out.measured_c = std::pow(r, n) / out.volume;
    return out;
  }

  // cubic lattice fine enough that every point has a lattice point within
  // 0.999 r; keep lattice points within r of the domain
  const double a = 2.0 * r / std::sqrt(static_cast<double>(n)) * 0.999;
  Pt lo, hi;
  domain.bbox(lo, hi);
  auto keep = [&](const Pt& p) {
    return domain.contains(p) || domain.boundary_distance(p) <= r;
  };
  std::vector<Pt> pts;
  const int zlo = n == 3 ? static_cast<int>(std::floor(lo.z() / a)) - 1 : 0;
  const int zhi = n == 3 ? static_cast<int>(std::ceil(hi.z() / a)) + 1 : 0;
  for (int i = static_cast<int>(std::floor(lo.x() / a)) - 1;
       i <= static_cast<int>(std::ceil(hi.x() / a)) + 1; ++i)
    for (int j = static_cast<int>(std::floor(lo.y() / a)) - 1;
         j <= static_cast<int>(std::ceil(hi.y() / a)) + 1; ++j)
      for (int k = zlo; k <= zhi; ++k) {
        Pt p{i * a, j * a, k * a};
        if (keep(p)) pts.push_back(p);
      }
  std::sort(pts.begin(), pts.end(), lex_less);

  // dense verification sample; the construction covers by the lattice bound,
  // so repairs should never fire — kept as a defensive net
  Rng rng(fnv1a("cover-centers-verify"));
  for (int t = 0; t < 10000; ++t) {
    Pt s;
    do {
      s = Pt{rng.uniform(lo.x(), hi.x()), rng.uniform(lo.y(), hi.y()),
             n == 3 ? rng.uniform(lo.z(), hi.z()) : 0.0};
    } while (!domain.contains(s));
    bool covered = false;
    for (const Pt& p : pts) covered = covered || dist(s, p) <= r;
    if (!covered) {
      Pt q{std::round(s.x() / a) * a, std::round(s.y() / a) * a,
           n == 3 ? std::round(s.z() / a) * a : 0.0};
      pts.push_back(q);
    }
  }
  std::sort(pts.begin(), pts.end(), lex_less);

  out.points = std::move(pts);
  out.measured_c =
      static_cast<double>(out.points.size()) * std::pow(r, n) / out.volume;
  hard_assert(!out.points.empty(), "cover produced no centers");
  return out;
}

// ------------------------------------------------------------- select_radii

namespace {

/// The largest subinterval of [r, 2r] on which every chain's slice count
/// stays within its cap, empty optional when none exists. Slice counts are
/// piecewise constant between breakpoints, so midpoint probing is exact.
std::optional<std::pair<double, double>> feasible_interval(
    const Pt& center, double r, const std::vector<OneChain>& chains,
    const std::vector<double>& caps) {
  std::vector<double> cuts{r, 2.0 * r};
  for (const OneChain& tau : chains)
    for (double b : slice_breakpoints(tau, center))
      if (b > r && b < 2.0 * r) cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());

  std::optional<std::pair<double, double>> best;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double lo = cuts[i], hi = cuts[i + 1];
    if (!(hi > lo)) continue;
    const double mid = 0.5 * (lo + hi);
    bool ok = true;
    for (std::size_t t = 0; t < chains.size() && ok; ++t)
      ok = static_cast<double>(slice_count(chains[t], center, mid)) <= caps[t];
    if (ok && (!best || hi - lo > best->second - best->first))
      best = {lo, hi};
  }
  return best;
}

}  // namespace

std::vector<double> select_radii(const CoverCenters& centers,
                                 const std::vector<OneChain>& chains, int K,
                                 const Exec& ex) {
  if (static_cast<int>(chains.size()) > K)
    throw BadSpec("more chains than the compatibility order K");
  std::vector<double> caps(chains.size());
  for (std::size_t t = 0; t < chains.size(); ++t)
    caps[t] = static_cast<double>(K) * chains[t].mass() / centers.r;

  std::vector<double> radii(centers.size(), 1.5 * centers.r);
  parallel_for(centers.size(), ex, [&](std::size_t l) {
    if (chains.empty()) return;  // any radius works; keep the midpoint
    auto iv = feasible_interval(centers.points[l], centers.r, chains, caps);
    if (!iv)
      throw Infeasible("no feasible slice radius: averaging bound violated");
    radii[l] = 0.5 * (iv->first + iv->second);
  });
  return radii;
}

// --------------------------------------------------------------------- Grid

Region Grid::domain(std::size_t l) const {
  std::vector<Region> parts{Region::ball(centers[l], radii[l])};
  for (std::size_t m = 0; m < l; ++m)
    parts.push_back(Region::complement(Region::ball(centers[m], radii[m])));
  return Region::intersection(std::move(parts));
}

Grid make_grid(std::vector<Pt> centers, std::vector<double> radii,
               double base_r) {
  if (centers.size() != radii.size())
    throw BadSpec("grid needs one radius per center");
  if (base_r <= 0.0 && !radii.empty())
    base_r = 0.5 * *std::min_element(radii.begin(), radii.end());
  return Grid{std::move(centers), std::move(radii), base_r};
}

// ------------------------------------------------------------------ Chopper

double Chopper::radius_for(const OneChain& tau, std::size_t l) const {
  const Pt& x = centers_.points.at(l);
  const double r = centers_.r;
  OneChain local = restrict_one(tau, Region::ball(x, 2.0 * r));
  std::string key = std::to_string(l) + "|" + canonical_key(local);
  {
    std::lock_guard<std::mutex> lock(memo_mutex_);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
  }
  double radius = 1.5 * r;
  if (!local.empty()) {
    auto iv = feasible_interval(x, r, {local},
                                {local.mass() / r});
    if (!iv)
      throw Infeasible("no feasible chop radius: averaging bound violated");
    radius = 0.5 * (iv->first + iv->second);
  }
  std::lock_guard<std::mutex> lock(memo_mutex_);
  memo_.emplace(std::move(key), radius);
  return radius;
}

OneChain Chopper::chop(const OneChain& tau, std::size_t l) const {
  if (l > centers_.size()) throw BadSpec("chop level exceeds cover size");
  if (l == 0 || tau.empty()) return tau;
  std::vector<Region> removed;
  removed.reserve(l);
  for (std::size_t m = 0; m < l; ++m)
    removed.push_back(
        Region::ball(centers_.points[m], radius_for(tau, m)));
  return restrict_one(tau,
                      Region::complement(Region::union_of(std::move(removed))));
}

// --------------------------------------------------------- merge_admissible

AdmissibleFamily merge_admissible(const std::vector<Ball>& balls) {
  double in_sum = 0.0;
  for (const Ball& b : balls) {
    if (b.radius < 0) throw BadSpec("negative ball radius");
    in_sum += b.radius;
  }
  if (in_sum > 1.0 / 3.0)
    throw BudgetExceeded("ball radius sum exceeds the domain scale 1/3");

  std::vector<Ball> work = balls;
  bool merged = true;
  while (merged) {
    merged = false;
    for (std::size_t i = 0; i < work.size() && !merged; ++i)
      for (std::size_t j = i + 1; j < work.size() && !merged; ++j) {
        const Ball& a = work[i];
        const Ball& b = work[j];
        const double d = dist(a.center, b.center);
        if (d > a.radius + b.radius + eps_geom()) continue;  // disjoint
        Ball enclosing;
        if (d + b.radius <= a.radius) {
          enclosing = a;  // b nested in a
        } else if (d + a.radius <= b.radius) {
          enclosing = b;  // a nested in b
        } else {
          enclosing.radius = 0.5 * (d + a.radius + b.radius);
          const double t = d > 0 ? 0.5 * (d + b.radius - a.radius) / d : 0.0;
          enclosing.center = lerp(a.center, b.center, t);
        }
        work[i] = enclosing;
        work.erase(work.begin() + static_cast<std::ptrdiff_t>(j));
        merged = true;
      }
  }

  AdmissibleFamily out;
  out.balls = std::move(work);
  std::sort(out.balls.begin(), out.balls.end(),
            [](const Ball& a, const Ball& b) {
              return lex_less(a.center, b.center) ||
                     (!lex_less(b.center, a.center) && a.radius < b.radius);
            });
  out.delta = 3.0 * in_sum;
  hard_assert(out.balls.size() <= balls.size(),
              "merge increased the ball count");
  hard_assert(out.radius_sum() <= 3.0 * in_sum + eps_geom(),
              "merge violated the 3x radius-sum bound");
  hard_assert(out.disjoint(), "merge left intersecting balls");
  for (const Ball& b : balls)  // coverage: inputs inside some output ball
    hard_assert([&] {
      for (const Ball& o : out.balls)
        if (dist(b.center, o.center) + b.radius <= o.radius + eps_geom())
          return true;
      return false;
    }(), "merge lost an input ball");
  return out;
}

// ---------------------------------------------------------- check_localized

LocalizedReport check_localized(const ZeroFamily& F, const CellCerts& certs,
                                const Exec& ex) {
  if (!F.total()) throw BadSpec("localization check requires a total family");
  LocalizedReport rep;
  for (const auto& [cell, fam] : certs) {
    rep.N = std::max(rep.N, fam.balls.size());
    rep.delta_sum = std::max(rep.delta_sum, fam.radius_sum());
  }

  struct Task {
    Cell cell;
    std::vector<int> x, y;
  };
  std::vector<Task> tasks;
  for (const Cell& c : F.complex.cells_sorted()) {
    if (c.dim() == 0) continue;
    const auto verts = CubicalComplex::cell_vertices(c);
    for (std::size_t i = 0; i < verts.size(); ++i)
      for (std::size_t j = i + 1; j < verts.size(); ++j)
        tasks.push_back({c, verts[i], verts[j]});
  }

  static const AdmissibleFamily kEmpty;
  std::vector<std::vector<LocalizationViolation>> found(tasks.size());
  parallel_for(tasks.size(), ex, [&](std::size_t t) {
    const Task& task = tasks[t];
    auto it = certs.find(task.cell);
    const AdmissibleFamily& fam = it == certs.end() ? kEmpty : it->second;
    ZeroChain diff = add_zero(F.at(task.x), F.at(task.y));
    for (const Pt& p : diff.points())
      if (!fam.covers(p))
        found[t].push_back({task.cell, task.x, task.y, p});
  });

  rep.pairs_checked = tasks.size();
  for (auto& v : found)
    for (auto& viol : v) rep.violations.push_back(std::move(viol));
  rep.localized = rep.violations.empty();
  return rep;
}

LocalizedReport check_localized(const OneFamily& G, const CellCerts& certs,
                                const Exec& ex) {
  if (!G.total()) throw BadSpec("localization check requires a total family");
  LocalizedReport rep;
  for (const auto& [cell, fam] : certs) {
    rep.N = std::max(rep.N, fam.balls.size());
    rep.delta_sum = std::max(rep.delta_sum, fam.radius_sum());
  }

  struct Task {
    Cell cell;
    std::vector<int> x, y;
  };
  std::vector<Task> tasks;
  for (const Cell& c : G.complex.cells_sorted()) {
    if (c.dim() == 0) continue;
    const auto verts = CubicalComplex::cell_vertices(c);
    for (std::size_t i = 0; i < verts.size(); ++i)
      for (std::size_t j = i + 1; j < verts.size(); ++j)
        tasks.push_back({c, verts[i], verts[j]});
  }

  static const AdmissibleFamily kEmpty;
  const double eps = eps_geom();
  std::vector<std::vector<LocalizationViolation>> found(tasks.size());
  parallel_for(tasks.size(), ex, [&](std::size_t t) {
    const Task& task = tasks[t];
    auto it = certs.find(task.cell);
    const AdmissibleFamily& fam = it == certs.end() ? kEmpty : it->second;
    OneChain diff = reduce_overlaps(add_one(G.at(task.x), G.at(task.y)));
    for (const Seg& s : diff.segments()) {
      bool inside = false;
      for (const Ball& b : fam.balls)
        if (dist(s.a, b.center) <= b.radius + eps &&
            dist(s.b, b.center) <= b.radius + eps) {
          inside = true;
          break;
        }
      if (!inside)
        found[t].push_back({task.cell, task.x, task.y, lerp(s.a, s.b, 0.5)});
    }
  });

  rep.pairs_checked = tasks.size();
  for (auto& v : found)
    for (auto& viol : v) rep.violations.push_back(std::move(viol));
  rep.localized = rep.violations.empty();
  return rep;
}

nlohmann::json localized_report_to_json(const LocalizedReport& rep) {
  nlohmann::json j;
  j["localized"] = rep.localized;
  j["N"] = rep.N;
  j["delta_sum"] = rep.delta_sum;
  j["pairs_checked"] = rep.pairs_checked;
  nlohmann::json viols = nlohmann::json::array();
  for (const auto& v : rep.violations) {
    nlohmann::json vj;
    vj["cell_anchor"] = v.cell.anchor;
    vj["cell_axes"] = v.cell.axes;
    vj["x"] = v.x;
    vj["y"] = v.y;
    vj["point"] = {v.point.x(), v.point.y(), v.point.z()};
    viols.push_back(std::move(vj));
  }
  j["violations"] = viols;
  return j;
}

// --------------------------------------------------------------- monotonize

double monotone_constant(int p) {
  if (p < 1) throw BadSpec("profile constant defined for p >= 1");
  double c = 1.0;
  for (int i = 2; i <= p; ++i) c = 3.0 * (1.0 + 2.0 * i * c);
  return c;
}

CellCerts monotonize(const CubicalComplex& X, const CellCerts& certs, int p) {
  if (p < std::max(1, X.dim()))
    throw BadSpec("profile order below the complex dimension");
  std::size_t n_in = 0;
  double delta_in = 0.0;
  for (const auto& [cell, fam] : certs) {
    n_in = std::max(n_in, fam.balls.size());
    delta_in = std::max(delta_in, fam.radius_sum());
  }

  CellCerts out;
  // certificates certify vertex pairs, so they live on cells of dimension
  // >= 1; the recursion pulls facet certificates upward from dimension 2 on
  // (edges have only vertex facets, which carry nothing)
  for (const Cell& c : X.cells_sorted()) {  // ascending dimension
    if (c.dim() == 0) continue;
    std::vector<Ball> pool;
    auto own = certs.find(c);
    if (own != certs.end())
      pool.insert(pool.end(), own->second.balls.begin(),
                  own->second.balls.end());
    if (c.dim() >= 2) {
      for (const Cell& f : CubicalComplex::faces(c)) {
        if (f.dim() != c.dim() - 1) continue;  // facets only
        auto it = out.find(f);
        if (it != out.end())
          pool.insert(pool.end(), it->second.balls.begin(),
                      it->second.balls.end());
      }
    }
    if (pool.empty() && own == certs.end()) continue;
    out.emplace(c, merge_admissible(pool));
  }

  const double cp = monotone_constant(p);
  for (const auto& [cell, fam] : out) {
    hard_assert(static_cast<double>(fam.balls.size()) <=
                    cp * static_cast<double>(std::max<std::size_t>(n_in, 1)),
                "monotone profile exceeded c(p) * N");
    hard_assert(fam.radius_sum() <= cp * std::max(delta_in, eps_geom()),
                "monotone profile exceeded c(p) * delta");
  }
  return out;
}

}  // namespace cf
