#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "chainforge/chain.hpp"
#include "chainforge/chain_io.hpp"
#include "chainforge/errors.hpp"
#include "chainforge/rng.hpp"

using namespace cf;

namespace {

Pt random_disk_point(Rng& rng, double rmax = 0.95) {
  for (;;) {
    Pt p{rng.uniform(-rmax, rmax), rng.uniform(-rmax, rmax)};
    if (norm(p) < rmax) return p;
  }
}

ZeroChain random_zero(Rng& rng, int k) {
  std::vector<Pt> pts;
  for (int i = 0; i < k; ++i) pts.push_back(random_disk_point(rng));
  return ZeroChain::of(2, std::move(pts));
}

OneChain random_one(Rng& rng, int k) {
  std::vector<Seg> segs;
  for (int i = 0; i < k; ++i)
    segs.push_back({random_disk_point(rng), random_disk_point(rng)});
  return OneChain::of(2, std::move(segs));
}

}  // namespace

TEST_CASE("add_zero identities") {
  ZeroChain empty(2);
  CHECK(add_zero(empty, empty).empty());

  Pt p{0.1, 0.2};
  ZeroChain zp = ZeroChain::of(2, {p});
  CHECK(add_zero(zp, zp).empty());

  // {p,q} + {q,s} = {p,s}: symmetric difference
  Pt q{0.3, -0.4}, s{-0.5, 0.0};
  ZeroChain a = ZeroChain::of(2, {p, q});
  ZeroChain b = ZeroChain::of(2, {q, s});
  ZeroChain want = ZeroChain::of(2, {p, s});
  CHECK(add_zero(a, b) == want);
}

TEST_CASE("add_zero is associative, commutative, self-inverse") {
  Rng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    ZeroChain a = random_zero(rng, rng.uniform_int(0, 6));
    ZeroChain b = random_zero(rng, rng.uniform_int(0, 6));
    ZeroChain c = random_zero(rng, rng.uniform_int(0, 6));
    CHECK(add_zero(a, b) == add_zero(b, a));
    CHECK(add_zero(add_zero(a, b), c) == add_zero(a, add_zero(b, c)));
    CHECK(add_zero(a, a).empty());
  }
}

TEST_CASE("boundary_one") {
  CHECK(boundary_one(OneChain(2)).empty());

  Pt p{-0.2, 0.0}, q{0.2, 0.3}, s{0.6, -0.1};
  OneChain single = OneChain::of(2, {{p, q}});
  CHECK(boundary_one(single) == ZeroChain::of(2, {p, q}));

  // shared endpoint of a two-segment path cancels
  OneChain path = OneChain::of(2, {{p, q}, {q, s}});
  CHECK(boundary_one(path) == ZeroChain::of(2, {p, s}));
}

TEST_CASE("restrict examples") {
  // whole domain: identity
  Rng rng(7);
  OneChain c = random_one(rng, 5);
  CHECK(restrict_one(c, Region::whole()) == c);

  // analytic clip: segment (-0.5,0)-(0.5,0) cut by ball(0,0.25)
  OneChain diam = OneChain::of(2, {{{-0.5, 0.0}, {0.5, 0.0}}});
  OneChain clipped = restrict_one(diam, Region::ball({0, 0}, 0.25));
  REQUIRE(clipped.segments().size() == 1);
  CHECK(clipped.segments()[0].a.x() == doctest::Approx(-0.25).epsilon(1e-12));
  CHECK(clipped.segments()[0].b.x() == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(clipped.mass() == doctest::Approx(0.5).epsilon(1e-12));

  // point outside the ball is removed
  ZeroChain far_pt = ZeroChain::of(2, {{0.9, 0.0}});
  CHECK(restrict_zero(far_pt, Region::ball({0, 0}, 0.5)).empty());
}

TEST_CASE("restrict mass conservation") {
  Rng rng(101);
  for (int trial = 0; trial < 200; ++trial) {
    OneChain c = random_one(rng, rng.uniform_int(1, 8));
    Pt center = random_disk_point(rng, 0.5);
    double radius = rng.uniform(0.05, 0.6);
    Region A = Region::ball(center, radius);
    Region Ac = Region::complement(A);
    try {
      OneChain inside = restrict_one(c, A);
      OneChain outside = restrict_one(c, Ac);
      // crossing count bounds the clipping error
      std::size_t crossings = 0;
      for (const Seg& s : c.segments()) crossings += A.crossings(s.a, s.b).size();
      double tol = eps_geom() * static_cast<double>(crossings + 1) * 10.0;
      CHECK(std::abs(inside.mass() + outside.mass() - c.mass()) <= tol);
    } catch (const DegenerateCrossing&) {
      // legal outcome for tangent configurations; nothing to check
    }
  }
}

TEST_CASE("slice_sphere examples") {
  CHECK(slice_sphere(OneChain(2), {0, 0}, 0.3).empty());

  // diameter through the center cut at s = 0.5: two antipodal points
  OneChain diam = OneChain::of(2, {{{-0.9, 0.0}, {0.9, 0.0}}});
  ZeroChain sl = slice_sphere(diam, {0, 0}, 0.5);
  CHECK(sl.mass() == 2);
  CHECK(sl == ZeroChain::of(2, {{-0.5, 0.0}, {0.5, 0.0}}));

  // segment entirely inside the ball
  OneChain small = OneChain::of(2, {{{-0.1, 0.0}, {0.1, 0.0}}});
  CHECK(slice_sphere(small, {0, 0}, 0.5).empty());

  // tangency raises
  OneChain tangent = OneChain::of(2, {{{-0.4, 0.5}, {0.4, 0.5}}});
  CHECK_THROWS_AS(slice_sphere(tangent, {0, 0}, 0.5), TangencyError);
}

TEST_CASE("slice coarea inequality via exact breakpoints") {
  // (1/r) * integral_r^{2r} mass(slice(c, x, s)) ds <= mass(c) / r,
  // i.e. the integral itself is bounded by mass(c).
  Rng rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    OneChain c = random_one(rng, rng.uniform_int(1, 7));
    Pt center = random_disk_point(rng, 0.6);
    double r = rng.uniform(0.05, 0.45);
    std::vector<double> bs = slice_breakpoints(c, center);
    std::vector<double> knots{r};
    for (double b : bs)
      if (b > r && b < 2 * r) knots.push_back(b);
    knots.push_back(2 * r);
    std::sort(knots.begin(), knots.end());
    double integral = 0;
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
      double mid = 0.5 * (knots[i] + knots[i + 1]);
      integral += static_cast<double>(slice_count(c, center, mid)) *
                  (knots[i + 1] - knots[i]);
    }
    CHECK(integral <= c.mass() + 1e-9);
  }
}

TEST_CASE("slice_count agrees with slice_sphere off breakpoints") {
  Rng rng(555);
  for (int trial = 0; trial < 200; ++trial) {
    OneChain c = random_one(rng, rng.uniform_int(1, 6));
    Pt center = random_disk_point(rng, 0.6);
    double s = rng.uniform(0.05, 1.0);
    try {
      ZeroChain sl = slice_sphere(c, center, s);
      // mod-2 reduction can only lower the raw crossing count by even amounts
      std::size_t raw = slice_count(c, center, s);
      CHECK(sl.mass() <= raw);
      CHECK((raw - sl.mass()) % 2 == 0);
    } catch (const TangencyError&) {
    }
  }
}

TEST_CASE("cone_fill") {
  CHECK(cone_fill(ZeroChain(2), {0, 0}).empty());

  // two points: boundary is the pair (apex copies cancel)
  Pt p{0.4, 0.1}, q{-0.3, 0.2}, apex{0.0, -0.5};
  ZeroChain z = ZeroChain::of(2, {p, q});
  OneChain cone = cone_fill(z, apex);
  CHECK(cone.segments().size() == 2);
  CHECK(boundary_one(cone) == z);

  // 4 corners of a square of side 0.2, apex at the center:
  // mass = 4 * (0.1 * sqrt(2))
  ZeroChain corners = ZeroChain::of(
      2, {{0.1, 0.1}, {0.1, -0.1}, {-0.1, 0.1}, {-0.1, -0.1}});
  OneChain csq = cone_fill(corners, {0, 0});
  CHECK(csq.mass() == doctest::Approx(4 * 0.1 * std::sqrt(2.0)).epsilon(1e-12));
  CHECK(boundary_one(csq) == corners);
}

TEST_CASE("boundary of cone over random even cycles") {
  Rng rng(31337);
  for (int trial = 0; trial < 1000; ++trial) {
    ZeroChain z = random_zero(rng, 2 * rng.uniform_int(0, 5));
    Pt apex = random_disk_point(rng);
    if (z.mass() % 2 != 0) continue;  // collisions during reduction: skip
    OneChain cone = cone_fill(z, apex);
    ZeroChain back = boundary_one(cone);
    CHECK(back == z);
  }
}

TEST_CASE("cone over odd cycle leaves the apex in the boundary") {
  Pt p{0.3, 0.3}, apex{-0.2, 0.0};
  ZeroChain z = ZeroChain::of(2, {p});
  ZeroChain b = boundary_one(cone_fill(z, apex));
  CHECK(b == ZeroChain::of(2, {p, apex}));
}

TEST_CASE("two-chain boundary and cone") {
  Pt a{0, 0}, b{0.4, 0}, c{0.1, 0.3};
  TwoChain t = TwoChain::of({{a, b, c}});
  CHECK(t.mass() == doctest::Approx(0.5 * std::abs(0.4 * 0.3)).epsilon(1e-12));
  OneChain bd = boundary_two(t);
  CHECK(bd.segments().size() == 3);
  CHECK(boundary_one(bd).empty());  // a closed loop

  // cone over a segment chain fills it relative to the cone over its boundary
  OneChain seg = OneChain::of(2, {{{0.2, 0.1}, {0.5, 0.4}}});
  Pt apex{0.0, 0.6};
  TwoChain cone2 = cone_fill_one(seg, apex);
  OneChain want = add_one(seg, cone_fill(boundary_one(seg), apex));
  CHECK(boundary_two(cone2) == want);
}

TEST_CASE("json round trip") {
  Rng rng(9);
  ZeroChain z = random_zero(rng, 5);
  OneChain c = random_one(rng, 4);
  CHECK(zero_from_json(to_json(z)) == z);
  CHECK(one_from_json(to_json(c)) == c);
  nlohmann::json both = chains_to_json(2, z, c);
  CHECK(zero_from_json(both) == z);
  CHECK(one_from_json(both) == c);
}

TEST_CASE("degenerate crossing detection") {
  // segment riding along the boundary circle of a ball
  OneChain graze = OneChain::of(2, {{{-0.3, 0.5}, {0.3, 0.5}}});
  CHECK_THROWS_AS(restrict_one(graze, Region::ball({0, 0}, 0.5)),
                  DegenerateCrossing);
  // segment lying inside a halfspace boundary plane
  OneChain flat = OneChain::of(2, {{{-0.3, 0.0}, {0.3, 0.0}}});
  CHECK_THROWS_AS(restrict_one(flat, Region::halfspace({0, 1}, 0.0)),
                  DegenerateCrossing);
}

TEST_CASE("triangle region restriction") {
  Region tri = Region::triangle({0, 0}, {1, 0}, {0, 1});
  CHECK(tri.contains({0.2, 0.2}));
  CHECK(!tri.contains({0.8, 0.8}));
  OneChain c = OneChain::of(2, {{{-0.5, 0.25}, {1.5, 0.25}}});
  OneChain inside = restrict_one(c, tri);
  REQUIRE(inside.segments().size() == 1);
  // enters at x=0 and leaves at the hypotenuse x+y=1 -> x=0.75
  CHECK(inside.mass() == doctest::Approx(0.75).epsilon(1e-9));
}
