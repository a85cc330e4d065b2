#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "chainforge/coarea.hpp"
#include "chainforge/rng.hpp"

using namespace cf;

namespace {

Pt random_in_disk(Rng& rng, double radius) {
  for (;;) {
    Pt p{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    if (norm(p) <= 1.0) return radius * p;
  }
}

OneChain random_segments(Rng& rng, int count, double radius = 0.9) {
  std::vector<Seg> segs;
  for (int i = 0; i < count; ++i)
    segs.push_back({random_in_disk(rng, radius), random_in_disk(rng, radius)});
  return OneChain::of(2, std::move(segs));
}

const FlatDomain kDisk = FlatDomain::disk(Pt{0, 0}, 1.0);

}  // namespace

TEST_CASE("a radius beyond the diameter covers with one ball") {
  CoverCenters cc = cover_centers(kDisk, 2.0);
  CHECK(cc.size() == 1);
  CHECK(cc.points[0].x() == doctest::Approx(0.0));
  CHECK(cc.points[0].y() == doctest::Approx(0.0));
}

TEST_CASE("disk cover at r = 0.5 covers densely with bounded count") {
  CoverCenters cc = cover_centers(kDisk, 0.5);
  CHECK(cc.size() >= 2);
  CHECK(cc.measured_c < 10.0);  // L <= c * Vol / r^2 with a small measured c
  Rng rng(31);
  for (int t = 0; t < 10000; ++t) {
    Pt s = random_in_disk(rng, 1.0);
    bool covered = false;
    for (const Pt& p : cc.points) covered = covered || dist(s, p) <= 0.5;
    CHECK(covered);
  }
}

TEST_CASE("triangle cover at r = 0.3 verifies coverage") {
  FlatDomain tri = FlatDomain::triangle(Pt{0, 0}, Pt{1, 0}, Pt{0, 1});
  CoverCenters cc = cover_centers(tri, 0.3);
  Rng rng(37);
  int inside = 0;
  while (inside < 3000) {
    Pt s{rng.uniform(), rng.uniform()};
    if (!tri.contains(s)) continue;
    ++inside;
    bool covered = false;
    for (const Pt& p : cc.points) covered = covered || dist(s, p) <= 0.3;
    CHECK(covered);
  }
}

TEST_CASE("radius selection with no chains returns midpoints") {
  CoverCenters cc = cover_centers(kDisk, 0.5);
  std::vector<double> radii = select_radii(cc, {}, 3);
  for (double s : radii) CHECK(s == doctest::Approx(0.75));
}

TEST_CASE("diameter segment slice bound at every center") {
  CoverCenters cc = cover_centers(kDisk, 0.25);
  OneChain tau = OneChain::of(2, {Seg{Pt{-1, 0}, Pt{1, 0}}});
  std::vector<double> radii = select_radii(cc, {tau}, 1);
  const double cap = tau.mass() / 0.25;  // = 8
  for (std::size_t l = 0; l < cc.size(); ++l) {
    CHECK(radii[l] >= 0.25);
    CHECK(radii[l] <= 0.5);
    CHECK(static_cast<double>(slice_count(tau, cc.points[l], radii[l])) <= cap);
  }
}

TEST_CASE("selected radii satisfy the slice cap for random chain systems") {
  Rng rng(41);
  CoverCenters cc = cover_centers(kDisk, 0.4);
  for (int trial = 0; trial < 20; ++trial) {
    const int K = 3;
    std::vector<OneChain> chains;
    for (int i = 0; i < K; ++i)
      chains.push_back(random_segments(rng, 1 + static_cast<int>(rng.below(5))));
    std::vector<double> radii = select_radii(cc, chains, K);
    for (std::size_t l = 0; l < cc.size(); ++l)
      for (const OneChain& tau : chains) {
        double cap = K * tau.mass() / cc.r;
        CHECK(static_cast<double>(slice_count(tau, cc.points[l], radii[l])) <=
              cap);
      }
  }
}

TEST_CASE("grid domains partition chain mass") {
  Rng rng(43);
  CoverCenters cc = cover_centers(kDisk, 0.4);
  for (int trial = 0; trial < 15; ++trial) {
    OneChain tau = random_segments(rng, 5);
    std::vector<double> radii = select_radii(cc, {tau}, 1);
    Grid grid = make_grid(cc.points, radii);
    double total = 0.0;
    for (std::size_t l = 0; l < grid.size(); ++l)
      total += restrict_one(tau, grid.domain(l)).mass();
    CHECK(total == doctest::Approx(tau.mass()).epsilon(1e-7));
  }
}

TEST_CASE("chopping at level zero is the identity and at full level empty") {
  Rng rng(47);
  Chopper chopper(cover_centers(kDisk, 0.3));
  for (int trial = 0; trial < 10; ++trial) {
    OneChain tau = random_segments(rng, 4);
    CHECK(chopper.chop(tau, 0) == tau);
    CHECK(chopper.chop(tau, chopper.centers().size()).empty());
  }
}

TEST_CASE("chop radii depend only on the chain near the ball") {
  Rng rng(53);
  Chopper chopper(cover_centers(kDisk, 0.25));
  const CoverCenters& cc = chopper.centers();
  // two chains equal inside B(x_l, 2r) for a center far from the difference
  OneChain shared = OneChain::of(
      2, {Seg{Pt{-0.3, -0.3}, Pt{-0.1, -0.2}}, Seg{Pt{-0.25, 0.0}, Pt{-0.05, 0.1}}});
  OneChain tau = add_one(shared, OneChain::of(2, {Seg{Pt{0.7, 0.7}, Pt{0.8, 0.6}}}));
  OneChain tau2 = add_one(shared, OneChain::of(2, {Seg{Pt{0.7, 0.6}, Pt{0.85, 0.7}}}));
  for (std::size_t l = 0; l < cc.size(); ++l) {
    Pt x = cc.points[l];
    if (dist(x, Pt{0.775, 0.65}) > 2.0 * cc.r + 0.3) {
      CHECK(chopper.radius_for(tau, l) == chopper.radius_for(tau2, l));
    }
  }
  (void)rng;
}

TEST_CASE("chopping stability: differences stay near their source ball") {
  Rng rng(59);
  const double r = 0.12;
  Chopper chopper(cover_centers(kDisk, r));
  const Pt y{0.2, 0.1};
  const double s = 0.15;
  for (int trial = 0; trial < 5; ++trial) {
    OneChain base = random_segments(rng, 5);
    auto inside = [&](Rng& g) {
      return OneChain::of(2, {Seg{y + 0.6 * s * Pt{g.uniform(-1, 1), g.uniform(-1, 1)},
                                  y + 0.6 * s * Pt{g.uniform(-1, 1), g.uniform(-1, 1)}}});
    };
    OneChain tau = add_one(base, inside(rng));
    OneChain tau2 = add_one(base, inside(rng));
    for (std::size_t l : {chopper.centers().size() / 4,
                          chopper.centers().size() / 2,
                          chopper.centers().size()}) {
      OneChain diff = add_one(chopper.chop(tau, l), chopper.chop(tau2, l));
      for (const Seg& seg : diff.segments()) {
        CHECK(dist(seg.a, y) <= s + 4.0 * r + 1e-9);
        CHECK(dist(seg.b, y) <= s + 4.0 * r + 1e-9);
      }
    }
  }
}

TEST_CASE("disjoint ball families pass through the merge") {
  std::vector<Ball> in = {{Pt{0, 0}, 0.05}, {Pt{0.5, 0}, 0.04}, {Pt{0, 0.5}, 0.03}};
  AdmissibleFamily out = merge_admissible(in);
  CHECK(out.balls.size() == 3);
  CHECK(out.radius_sum() == doctest::Approx(0.12));
  CHECK(out.disjoint());
  CHECK(out.valid());
}

TEST_CASE("two overlapping balls merge into their enclosing ball") {
  AdmissibleFamily out =
      merge_admissible({{Pt{0, 0}, 0.1}, {Pt{0.05, 0}, 0.1}});
  REQUIRE(out.balls.size() == 1);
  CHECK(out.balls[0].radius == doctest::Approx(0.125));
  CHECK(out.balls[0].center.x() == doctest::Approx(0.025));
  // contains both inputs
  CHECK(dist(out.balls[0].center, Pt{0, 0}) + 0.1 <= out.balls[0].radius + 1e-12);
  CHECK(dist(out.balls[0].center, Pt{0.05, 0}) + 0.1 <=
        out.balls[0].radius + 1e-12);
}

TEST_CASE("nested balls keep only the outer one") {
  AdmissibleFamily out =
      merge_admissible({{Pt{0, 0}, 0.2}, {Pt{0.05, 0}, 0.05}});
  REQUIRE(out.balls.size() == 1);
  CHECK(out.balls[0].radius == doctest::Approx(0.2));
  CHECK(out.balls[0].center.x() == doctest::Approx(0.0));
}

TEST_CASE("random merges stay disjoint within the radius-sum budget") {
  Rng rng(61);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<Ball> in;
    int n = 1 + static_cast<int>(rng.below(8));
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      Ball b{random_in_disk(rng, 0.8), rng.uniform(0.005, 0.035)};
      sum += b.radius;
      in.push_back(b);
    }
    AdmissibleFamily out = merge_admissible(in);
    CHECK(out.disjoint());
    CHECK(out.balls.size() <= in.size());
    CHECK(out.radius_sum() <= sum + 1e-12);
    CHECK(out.radius_sum() <= 3.0 * sum + 1e-12);
    for (const Ball& b : in) {
      bool contained = false;
      for (const Ball& o : out.balls)
        contained = contained ||
                    dist(b.center, o.center) + b.radius <= o.radius + 1e-9;
      CHECK(contained);
    }
  }
}

TEST_CASE("merging rejects budgets beyond the domain scale") {
  CHECK_THROWS_AS(merge_admissible({{Pt{0, 0}, 0.2}, {Pt{0.5, 0}, 0.2}}),
                  BudgetExceeded);
}

TEST_CASE("constant families are localized with empty certificates") {
  ZeroFamily F;
  F.complex = CubicalComplex::cube(2);
  ZeroChain v = ZeroChain::of(2, {Pt{0.1, 0.1}});
  for (const auto& x : F.complex.vertices()) F.values.emplace(x, v);
  LocalizedReport rep = check_localized(F, {});
  CHECK(rep.localized);
  CHECK(rep.N == 0);
  CHECK(rep.delta_sum == 0.0);
}

TEST_CASE("differences inside certificate balls pass, outside fail") {
  ZeroFamily F;
  F.complex = CubicalComplex::cube(1);
  F.values.emplace(std::vector<int>{0}, ZeroChain::of(2, {Pt{0.1, 0.0}}));
  F.values.emplace(std::vector<int>{1}, ZeroChain::of(2, {Pt{0.15, 0.0}}));
  Cell edge;
  edge.anchor = {0};
  edge.axes = 1;

  CellCerts good;
  good[edge] = AdmissibleFamily{{{Pt{0.12, 0.0}, 0.06}}, 0.2};
  LocalizedReport ok = check_localized(F, good);
  CHECK(ok.localized);
  CHECK(ok.N == 1);
  CHECK(ok.delta_sum == doctest::Approx(0.06));

  CellCerts bad;
  bad[edge] = AdmissibleFamily{{{Pt{-0.5, 0.0}, 0.05}}, 0.2};
  LocalizedReport fail = check_localized(F, bad);
  CHECK(!fail.localized);
  REQUIRE(fail.violations.size() == 2);  // both difference points uncovered
  nlohmann::json j = localized_report_to_json(fail);
  CHECK(j["localized"] == false);
  CHECK(j["violations"].size() == 2);
}

TEST_CASE("profile constants follow the recursion") {
  CHECK(monotone_constant(1) == doctest::Approx(1.0));
  CHECK(monotone_constant(2) == doctest::Approx(15.0));
  CHECK(monotone_constant(3) == doctest::Approx(3.0 * (1.0 + 6.0 * 15.0)));
}

TEST_CASE("monotonization keeps 1-complex certificates unchanged") {
  CubicalComplex X = CubicalComplex::cube(1, 2);
  Cell e0, e1;
  e0.anchor = {0};
  e0.axes = 1;
  e1.anchor = {1};
  e1.axes = 1;
  CellCerts certs;
  certs[e0] = AdmissibleFamily{{{Pt{0.1, 0}, 0.02}, {Pt{0.5, 0}, 0.03}}, 0.2};
  certs[e1] = AdmissibleFamily{{{Pt{-0.4, 0}, 0.01}}, 0.2};
  CellCerts out = monotonize(X, certs, 1);
  REQUIRE(out.count(e0) == 1);
  REQUIRE(out.count(e1) == 1);
  CHECK(out[e0].balls.size() == 2);
  CHECK(out[e0].radius_sum() == doctest::Approx(0.05));
  CHECK(out[e1].balls.size() == 1);
}

TEST_CASE("single-cell certificates are unchanged by monotonization") {
  CubicalComplex X = CubicalComplex::cube(2);
  Cell sq;
  sq.anchor = {0, 0};
  sq.axes = 0b11;
  CellCerts certs;
  certs[sq] = AdmissibleFamily{{{Pt{0.2, 0.2}, 0.04}}, 0.2};
  CellCerts out = monotonize(X, certs, 2);
  REQUIRE(out.count(sq) == 1);
  CHECK(out[sq].balls.size() == 1);
  CHECK(out[sq].radius_sum() == doctest::Approx(0.04));
}

TEST_CASE("monotonized certificates contain their facets' certificates") {
  Rng rng(67);
  CubicalComplex X = CubicalComplex::cube(2, 2);
  CellCerts certs;
  for (const Cell& c : X.cells_sorted()) {
    if (c.dim() == 0) continue;
    std::vector<Ball> balls;
    int n = 1 + static_cast<int>(rng.below(2));
    for (int i = 0; i < n; ++i)
      balls.push_back({random_in_disk(rng, 0.5), rng.uniform(0.004, 0.012)});
    certs[c] = merge_admissible(balls);
  }
  CellCerts out = monotonize(X, certs, 2);
  for (const Cell& c : X.cells_of_dim(2)) {
    REQUIRE(out.count(c) == 1);
    for (const Cell& f : CubicalComplex::faces(c)) {
      if (f.dim() != 1 || !out.count(f)) continue;
      for (const Ball& b : out[f].balls) {
        bool contained = false;
        for (const Ball& o : out[c].balls)
          contained = contained ||
                      dist(b.center, o.center) + b.radius <= o.radius + 1e-9;
        CHECK(contained);
      }
    }
  }
}
