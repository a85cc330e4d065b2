#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "chainforge/localize.hpp"
#include "chainforge/rng.hpp"

using namespace cf;

namespace {

OneChain square_cycle(Pt lo, double side) {
  const Pt a = lo;
  const Pt b{lo.x() + side, lo.y()};
  const Pt c{lo.x() + side, lo.y() + side};
  const Pt d{lo.x(), lo.y() + side};
  return OneChain::of(2, {Seg{a, b}, Seg{b, c}, Seg{c, d}, Seg{d, a}});
}

ZeroChain cloud(Rng& rng, Pt center, double radius, int n) {
  std::vector<Pt> pts;
  pts.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    pts.push_back(Pt{center.x() + rng.uniform(-radius, radius),
                     center.y() + rng.uniform(-radius, radius)});
  return ZeroChain::of(2, std::move(pts));
}

ZeroChain perturb(Rng& rng, const ZeroChain& z, double amount) {
  std::vector<Pt> pts;
  for (const Pt& p : z.points())
    pts.push_back(Pt{p.x() + rng.uniform(-amount, amount),
                     p.y() + rng.uniform(-amount, amount)});
  return ZeroChain::of(z.dim(), std::move(pts));
}

double max_cell_extent(const PlanarLattice& lat, const OneChain& piece,
                       const Ball& ball) {
  double worst = 0.0;
  (void)lat;
  for (const Seg& s : piece.segments()) {
    worst = std::max(worst, dist(s.a, ball.center));
    worst = std::max(worst, dist(s.b, ball.center));
  }
  return worst - ball.radius;
}

}  // namespace

// ---------------------------------------------------------------- lattice

TEST_CASE("lattice split preserves length and boundary") {
  PlanarLattice lat(Pt{0, 0}, Pt{1, 1}, 0.3, 0);
  Rng rng(11);
  std::vector<Seg> segs;
  for (int i = 0; i < 12; ++i)
    segs.push_back(Seg{Pt{rng.uniform(), rng.uniform()},
                       Pt{rng.uniform(), rng.uniform()}});
  const OneChain chain = OneChain::of(2, segs);
  const OneChain cut = lat.split(chain);
  CHECK(cut.mass() == doctest::Approx(chain.mass()).epsilon(1e-9));
  CHECK(boundary_one(cut) == boundary_one(chain));
  CHECK(cut.segments().size() > chain.segments().size());
  // no piece crosses a lattice line strictly
  for (const Seg& s : cut.segments()) {
    const auto [ix, iy] = lat.cell_of(lerp(s.a, s.b, 0.5));
    for (const Pt& e : {s.a, s.b}) {
      CHECK(e.x() >= lat.xline(ix) - 1e-9);
      CHECK(e.x() <= lat.xline(ix + 1) + 1e-9);
      CHECK(e.y() >= lat.yline(iy) - 1e-9);
      CHECK(e.y() <= lat.yline(iy + 1) + 1e-9);
    }
  }
}

TEST_CASE("lattice split tolerates endpoints on lines, rejects overlap") {
  PlanarLattice lat(Pt{0, 0}, Pt{1, 1}, 0.25, 2);
  const double x1 = lat.xline(2);
  // a segment ending exactly on a line is left alone
  const OneChain touching =
      OneChain::of(2, {Seg{Pt{x1, 0.4}, Pt{x1 + 0.05, 0.43}}});
  const OneChain cut = lat.split(touching);
  CHECK(cut == touching);
  // a segment running along a line is degenerate
  const OneChain along = OneChain::of(2, {Seg{Pt{x1, 0.2}, Pt{x1, 0.6}}});
  CHECK_THROWS_AS(lat.split(along), DegenerateCrossing);
}

TEST_CASE("lattice covers the requested box with a margin") {
  PlanarLattice lat(Pt{-0.2, 0.1}, Pt{0.9, 0.8}, 0.2, 5);
  CHECK(lat.valid());
  CHECK(lat.xline(0) < -0.2);
  CHECK(lat.xline(lat.nx()) > 0.9);
  CHECK(lat.yline(0) < 0.1);
  CHECK(lat.yline(lat.ny()) > 0.8);
  const auto [ix, iy] = lat.cell_of(Pt{0.31, 0.42});
  CHECK(lat.xline(ix) <= 0.31);
  CHECK(lat.xline(ix + 1) >= 0.31);
  const Ball b = lat.cell_ball(ix, iy);
  CHECK(dist(Pt{lat.xline(ix), lat.yline(iy)}, b.center) <= b.radius);
}

// --------------------------------------------------------------- cycle chop

TEST_CASE("cycle chop partitions a spanning cycle into closed cell pieces") {
  PlanarLattice lat(Pt{-0.2, -0.2}, Pt{1.2, 1.2}, 0.45, 1);
  const OneChain cycle = lat.split(square_cycle(Pt{0, 0}, 1.0));
  const CycleGridChop chop(lat, cycle);
  REQUIRE(chop.steps() >= 4);  // interior cells must appear as steps too
  CHECK(chop.partial(0).empty());
  CHECK(chop.partial(chop.steps()) == cycle);
  OneChain acc = OneChain::of(2, {});
  double pieces_mass = 0.0;
  for (std::size_t t = 0; t < chop.steps(); ++t) {
    const OneChain& piece = chop.piece(t);
    CHECK(boundary_one(piece).empty());
    pieces_mass += piece.mass();
    acc = add_one(acc, piece);
    CHECK(acc == chop.partial(t + 1));
    CHECK(max_cell_extent(lat, piece, chop.step_ball(t)) <= 1e-9);
  }
  CHECK(acc == cycle);
  // wall intervals appear twice and cancel: pieces carry more length than
  // the cycle itself
  CHECK(pieces_mass > cycle.mass());
}

TEST_CASE("cycle chop accepts a prescribed schedule and rejects gaps") {
  PlanarLattice lat(Pt{-0.1, -0.1}, Pt{0.6, 0.6}, 0.3, 3);
  const OneChain cycle = lat.split(square_cycle(Pt{0.05, 0.05}, 0.4));
  const CycleGridChop base(lat, cycle);
  std::vector<int> sched = base.schedule();
  std::reverse(sched.begin(), sched.end());
  const CycleGridChop rev(lat, cycle, sched);
  CHECK(rev.steps() == base.steps());
  CHECK(rev.partial(rev.steps()) == cycle);
  std::vector<int> missing(sched.begin(), sched.end() - 1);
  CHECK_THROWS_AS(CycleGridChop(lat, cycle, missing), VerificationFailure);
}

TEST_CASE("an empty cycle chops into zero steps") {
  PlanarLattice lat(Pt{0, 0}, Pt{1, 1}, 0.5, 0);
  const CycleGridChop chop(lat, OneChain::of(2, {}));
  CHECK(chop.steps() == 0);
  CHECK(chop.partial(0).empty());
}

// --------------------------------------------------------- edge interpolation

TEST_CASE("edge interpolation walks the grid one ball at a time") {
  const Pt a1{0.0, 0.02}, a2{0.03, 0.0}, b1{1.0, 0.01}, b2{0.97, -0.02};
  const ZeroChain Fv = ZeroChain::of(2, {a1, b1});
  const ZeroChain Fw = ZeroChain::of(2, {a2, b2});
  const OneChain tau = OneChain::of(2, {Seg{a1, a2}, Seg{b1, b2}});
  const Grid grid = make_grid({Pt{0, 0}, Pt{1, 0}}, {0.3, 0.3}, 0.25);

  const EdgeInterpolation ei = interpolate_edge(Fv, Fw, tau, grid);
  REQUIRE(ei.steps.size() == 3);
  CHECK(ei.steps.front() == Fv);
  CHECK(ei.steps.back() == Fw);
  CHECK(ei.steps[1] == ZeroChain::of(2, {a2, b1}));
  CHECK(ei.max_step_mass == doctest::Approx(2.0));
  CHECK(ei.mass_cap >= ei.max_step_mass);

  // a filling whose boundary is not the endpoint pair is rejected
  CHECK_THROWS_AS(
      interpolate_edge(Fv, ZeroChain::of(2, {a2}), tau, grid),
      BoundaryMismatch);
}

TEST_CASE("an empty grid carries only constant transitions") {
  const ZeroChain Fv = ZeroChain::of(2, {Pt{0.1, 0.2}});
  const Grid empty;
  const EdgeInterpolation ei =
      interpolate_edge(Fv, Fv, OneChain::of(2, {}), empty);
  CHECK(ei.steps.size() == 1);
  CHECK(ei.steps[0] == Fv);
  const ZeroChain other = ZeroChain::of(2, {Pt{0.4, 0.2}});
  const OneChain tau = OneChain::of(2, {Seg{Pt{0.1, 0.2}, Pt{0.4, 0.2}}});
  CHECK_THROWS_AS(interpolate_edge(Fv, other, tau, empty), BadSpec);
}

// ------------------------------------------------------------- localization

TEST_CASE("a single-vertex family localizes along the trivial path") {
  ZeroFamily F;
  F.complex = CubicalComplex(1, 1);
  Cell v;
  v.anchor = {0};
  v.axes = 0;
  F.complex.add_cell(v);
  F.values.emplace(std::vector<int>{0},
                   ZeroChain::of(2, {Pt{0.1, 0.1}, Pt{0.12, 0.1}}));
  const LocalizeResult res = localize_family(F, 0.01, 0.05);
  CHECK(res.report.path == "trivial");
  CHECK(res.report.q == 1);
  CHECK(res.family.at({0}) == F.at({0}));
  CHECK(res.certs.empty());
  CHECK(res.report.slack == 0.0);
}

TEST_CASE("a constant family localizes with zero slack and no certificates") {
  ZeroFamily F;
  F.complex = CubicalComplex::cube(1);
  const ZeroChain v = ZeroChain::of(2, {Pt{0.2, 0.3}, Pt{0.25, 0.3}});
  for (const auto& x : F.complex.vertices()) F.values.emplace(x, v);
  const LocalizeResult res = localize_family(F, 1e-3, 0.05);
  CHECK(res.report.path == "inductive");
  CHECK(res.report.slack == 0.0);
  CHECK(res.report.N_declared == 0);
  CHECK(res.certs.empty());
  for (const auto& x : res.family.complex.vertices())
    CHECK(res.family.at(x) == v);
  const StateCheckReport sc =
      check_interpolation_state(F, res.family, res.state);
  CHECK(sc.ok);
  CHECK(sc.rows_checked == res.family.values.size());
}

TEST_CASE("a short move localizes into two plateaus with one hop") {
  ZeroFamily F;
  F.complex = CubicalComplex::cube(1);
  const ZeroChain f0 = ZeroChain::of(2, {Pt{0.0, 0.0}, Pt{0.3, 0.0}});
  const ZeroChain f1 = ZeroChain::of(2, {Pt{0.0, 0.0}, Pt{0.35, 0.0}});
  F.values.emplace(std::vector<int>{0}, f0);
  F.values.emplace(std::vector<int>{1}, f1);

  const LocalizeResult res = localize_family(F, 0.06, 0.2);
  const int q = res.report.q;
  REQUIRE(q >= 3);
  CHECK(res.report.L == 1);  // the whole support fits one grid ball
  CHECK(res.family.at({0}) == f0);
  CHECK(res.family.at({q}) == f1);

  std::set<std::string> distinct;
  int transitions = 0;
  for (int i = 0; i <= q; ++i) {
    const ZeroChain& zi = res.family.at({i});
    distinct.insert(canonical_key(zi));
    CHECK(zi.mass() == 2);  // no intermediate mass increase
    if (i > 0 && !(zi == res.family.at({i - 1}))) ++transitions;
  }
  CHECK(distinct.size() == 2);
  CHECK(transitions == 1);
  CHECK(res.report.slack == 0.0);
  CHECK(res.report.N_declared == 1);
  CHECK(res.report.localization.localized);

  const StateCheckReport sc =
      check_interpolation_state(F, res.family, res.state);
  CHECK(sc.ok);
  CHECK(sc.max_selected_mass <= 2.0 + 1e-9);
}

TEST_CASE("random point-cloud moves localize and recombine") {
  Rng rng(101);
  for (int trial = 0; trial < 3; ++trial) {
    ZeroFamily F;
    F.complex = CubicalComplex::cube(1);
    const ZeroChain base = cloud(rng, Pt{0.5, 0.5}, 0.04, 20);
    F.values.emplace(std::vector<int>{0}, base);
    F.values.emplace(std::vector<int>{1}, perturb(rng, base, 1e-4));

    const double delta = 0.02;
    const double eps = 4e-3;
    const LocalizeResult res = localize_family(F, eps, delta);
    CHECK(res.report.path == "inductive");
    CHECK(res.report.L >= 2);  // support wider than one ball
    CHECK(res.family.at({0}) == F.at({0}));
    CHECK(res.family.at({res.report.q}) == F.at({1}));
    CHECK(res.report.localization.localized);
    CHECK(res.report.fineness_out.fine);
    CHECK(res.report.delta_declared < 10 * delta);

    const StateCheckReport sc =
        check_interpolation_state(F, res.family, res.state);
    CHECK(sc.ok);
    CHECK(sc.reassembly_failures == 0);
    CHECK(sc.rows_checked == res.family.values.size());
  }
}

TEST_CASE("value slack scales down with the input fineness") {
  const double delta = 0.05;
  double prev = std::numeric_limits<double>::infinity();
  for (double f : {0.1, 0.01, 0.001}) {
    const double eps = f * delta;
    Rng rng(7);  // same base cloud each round
    ZeroFamily F;
    F.complex = CubicalComplex::cube(1);
    const ZeroChain base = cloud(rng, Pt{0.0, 0.0}, 0.075, 6);
    F.values.emplace(std::vector<int>{0}, base);
    F.values.emplace(std::vector<int>{1}, perturb(rng, base, eps / 12.0));
    const LocalizeResult res = localize_family(F, eps, delta);
    // steps follow one filling of total length <= eps across L balls
    const double bound =
        2.0 * static_cast<double>(res.report.L) * eps / res.state.grid.r;
    CHECK(res.report.slack <= bound + 1e-9);
    CHECK(res.report.slack <= prev + 1e-12);
    prev = res.report.slack;
  }
}

TEST_CASE("two-parameter families recombine at every refined vertex") {
  Rng rng(23);
  ZeroFamily F;
  F.complex = CubicalComplex::cube(2);
  const ZeroChain base = cloud(rng, Pt{0.5, 0.5}, 0.012, 3);
  for (const auto& x : F.complex.vertices())
    F.values.emplace(x, perturb(rng, base, 2e-4));

  const double delta = 0.02;
  const double eps = 8e-3;
  const LocalizeResult res = localize_family(F, eps, delta);
  CHECK(res.report.path == "inductive");
  CHECK(res.report.q >= 9);

  const int q = res.report.q;
  for (const auto& x : F.complex.vertices()) {
    std::vector<int> key = x;
    for (int& c : key) c *= q;
    CHECK(res.family.at(key) == F.at(x));
  }
  CHECK(res.report.localization.localized);
  CHECK(res.report.fineness_out.fine);

  const StateCheckReport sc =
      check_interpolation_state(F, res.family, res.state);
  CHECK(sc.ok);
  CHECK(sc.reassembly_failures == 0);
  CHECK(sc.rows_checked == res.family.values.size());
  CHECK(sc.selection_bound_ok);
}

TEST_CASE("tampered recombination bookkeeping is caught") {
  ZeroFamily F;
  F.complex = CubicalComplex::cube(1);
  F.values.emplace(std::vector<int>{0},
                   ZeroChain::of(2, {Pt{0.0, 0.0}, Pt{0.3, 0.0}}));
  F.values.emplace(std::vector<int>{1},
                   ZeroChain::of(2, {Pt{0.0, 0.0}, Pt{0.35, 0.0}}));
  const LocalizeResult res = localize_family(F, 0.06, 0.2);

  InterpolationState bad = res.state;
  auto it = bad.rows.begin();
  it->second.correction =
      add_zero(it->second.correction, ZeroChain::of(2, {Pt{9.0, 9.0}}));
  const StateCheckReport sc =
      check_interpolation_state(F, res.family, bad);
  CHECK(!sc.ok);
  CHECK(sc.reassembly_failures >= 1);
}

TEST_CASE("localization rejects bad scales, coarse families, high dims") {
  ZeroFamily F;
  F.complex = CubicalComplex::cube(1);
  F.values.emplace(std::vector<int>{0}, ZeroChain::of(2, {Pt{0.0, 0.0}}));
  F.values.emplace(std::vector<int>{1}, ZeroChain::of(2, {Pt{0.5, 0.0}}));

  CHECK_THROWS_AS(localize_family(F, 0.6, 0.34), DeltaTooLarge);
  CHECK_THROWS_AS(localize_family(F, 0.6, 1.0 / 3.0), DeltaTooLarge);
  CHECK_THROWS_AS(localize_family(F, 0.0, 0.1), BadSpec);
  CHECK_THROWS_AS(localize_family(F, 0.01, 0.1), NotFine);

  ZeroFamily partial;
  partial.complex = CubicalComplex::cube(1);
  partial.values.emplace(std::vector<int>{0},
                         ZeroChain::of(2, {Pt{0.0, 0.0}}));
  CHECK_THROWS_AS(localize_family(partial, 0.1, 0.1), BadSpec);

  ZeroFamily high;
  high.complex = CubicalComplex::cube(4);
  for (const auto& x : high.complex.vertices())
    high.values.emplace(x, ZeroChain::of(2, {Pt{0.1, 0.1}}));
  CHECK_THROWS_AS(localize_family(high, 0.1, 0.1), DimUnsupported);
}

// ------------------------------------------------------------------ profiles

TEST_CASE("refinement exponents follow the two-branch recursion") {
  CHECK(profile_exponent(0, 1, 2) == 1);
  CHECK(profile_exponent(1, 1, 2) == 0);
  CHECK(profile_exponent(0, 2, 2) == 2);
  CHECK(profile_exponent(0, 2, 3) == 3);
  CHECK(profile_exponent(0, 3, 2) == 3);
  CHECK(localize_delta_cap() == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("filling constants follow the product recursion") {
  CHECK(fill_profile_constant(0, 1, 2) == doctest::Approx(18.0));
  CHECK(fill_profile_constant(1, 1, 2) == doctest::Approx(1.0));
  CHECK(fill_profile_constant(0, 2, 2) == doctest::Approx(162.0));
  CHECK(fill_profile_K(5.0, 0, 1, 2) == doctest::Approx(12.0));
  CHECK(fill_profile_K(7.0, 1, 1, 2) == doctest::Approx(7.0));
  CHECK(fallback_mass_constant(0) == doctest::Approx(1.0));
  CHECK(fallback_mass_constant(1) == doctest::Approx(7.0));
  CHECK(fallback_mass_constant(2) == doctest::Approx(25.0));
  CHECK(fallback_mass_constant(3) == doctest::Approx(79.0));
}

TEST_CASE("localization reports serialize") {
  ZeroFamily F;
  F.complex = CubicalComplex::cube(1);
  const ZeroChain v = ZeroChain::of(2, {Pt{0.2, 0.3}});
  for (const auto& x : F.complex.vertices()) F.values.emplace(x, v);
  const LocalizeResult res = localize_family(F, 1e-3, 0.05);
  const nlohmann::json j = localize_report_to_json(res.report);
  CHECK(j["path"] == "inductive");
  CHECK(j["L"].get<std::size_t>() >= 1);
  CHECK(j["slack"].get<double>() == 0.0);
  CHECK(j["fineness_out"]["fine"] == true);
  CHECK(j["localization"]["localized"] == true);
}

// ------------------------------------------------------------------ filling

TEST_CASE("an empty-valued family fills to an empty family") {
  ZeroFamily F;
  F.complex = CubicalComplex::cube(1);
  for (const auto& v : F.complex.vertices())
    F.values.emplace(v, ZeroChain::of(2, {}));
  const FillResult res = fill_small_family(F, {});
  CHECK(res.report.max_mass == 0.0);
  CHECK(res.report.measured_c == 0.0);
  CHECK(res.certs.empty());
  for (const auto& [v, c] : res.tau.values) CHECK(c.empty());
}

TEST_CASE("a single vertex fills its value with one witness segment") {
  ZeroFamily F;
  F.complex = CubicalComplex(1, 1);
  F.complex.add_cell(Cell{{0}, 0});
  F.values.emplace(std::vector<int>{0}, ZeroChain::of(2, {Pt{0.0, 0.0}, Pt{0.1, 0.0}}));
  const FillResult res = fill_small_family(F, {});
  CHECK(res.report.path == "witness");
  CHECK(res.report.q == 1);
  const OneChain& tau = res.tau.at({0});
  REQUIRE(tau.segments().size() == 1);
  CHECK(tau.mass() == doctest::Approx(0.1));
  CHECK(boundary_one(tau) == F.at({0}));
  CHECK(res.report.measured_c == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("odd-mass values cannot be filled") {
  ZeroFamily F;
  F.complex = CubicalComplex(1, 1);
  F.complex.add_cell(Cell{{0}, 0});
  F.values.emplace(std::vector<int>{0}, ZeroChain::of(2, {Pt{0.3, 0.4}}));
  CHECK_THROWS_AS(fill_small_family(F, {}), OddParity);
}

TEST_CASE("a one-parameter pair move fills along the inductive path") {
  ZeroFamily F;
  F.complex = CubicalComplex::cube(1);
  F.values.emplace(std::vector<int>{0},
                   ZeroChain::of(2, {Pt{0.0, 0.0}, Pt{0.1, 0.0}}));
  F.values.emplace(std::vector<int>{1},
                   ZeroChain::of(2, {Pt{0.0, 0.0}, Pt{0.1, 0.02}}));
  CellCerts certs;
  AdmissibleFamily fam;
  fam.balls = {Ball{Pt{0.1, 0.01}, 0.05}};
  fam.delta = 0.051;
  certs.emplace(Cell{{0}, 1u}, fam);

  const FillResult res = fill_small_family(F, certs);
  CHECK(res.report.path == "inductive");
  CHECK(res.report.q >= 3);
  CHECK(res.report.localization.localized);
  CHECK(res.report.measured_c <= 18.0);

  // endpoints of the refined interval keep direct fillings of the inputs
  const int Q = res.report.q;
  CHECK(boundary_one(res.tau.at({0})) == F.at({0}));
  CHECK(boundary_one(res.tau.at({Q})) == F.at({1}));
  // and every refined vertex bounds the refined family exactly
  const ZeroFamily RF = refine_family(F, Q);
  for (const auto& [v, c] : res.tau.values)
    CHECK(boundary_one(c) == RF.at(v));
}

TEST_CASE("a two-parameter family fills with localized transitions") {
  Rng rng(2026'08'15);
  ZeroFamily F;
  F.complex = CubicalComplex::cube(2);
  const ZeroChain base = cloud(rng, Pt{0.5, 0.5}, 0.01, 4);
  for (const auto& v : F.complex.vertices())
    F.values.emplace(v, perturb(rng, base, 0.003));
  CellCerts certs;
  AdmissibleFamily fam;
  fam.balls = {Ball{Pt{0.5, 0.5}, 0.025}};
  fam.delta = 0.05;
  certs.emplace(Cell{{0, 0}, 3u}, fam);

  const FillResult res = fill_small_family(F, certs);
  CHECK(res.report.path == "inductive");
  CHECK(res.report.localization.localized);
  CHECK(res.report.delta == doctest::Approx(0.05));

  const int Q = res.report.q;
  const ZeroFamily RF = refine_family(F, Q);
  for (const auto& [v, c] : res.tau.values)
    CHECK(boundary_one(c) == RF.at(v));
  // original corners keep direct fillings of their own values
  for (const auto& v : F.complex.vertices()) {
    std::vector<int> w = v;
    for (auto& x : w) x *= Q;
    CHECK(boundary_one(res.tau.at(w)) == F.at(v));
  }
  CHECK(res.report.max_mass <
        res.report.eta_in + 200.0 * res.report.eps_in);
}

TEST_CASE("ambient dimension three falls back to the component sweep") {
  ZeroFamily F;
  F.complex = CubicalComplex::cube(1);
  F.values.emplace(std::vector<int>{0},
                   ZeroChain::of(3, {Pt{0.0, 0.0, 0.0}, Pt{0.1, 0.0, 0.0}}));
  F.values.emplace(std::vector<int>{1},
                   ZeroChain::of(3, {Pt{0.0, 0.0, 0.0}, Pt{0.1, 0.0, 0.02}}));
  CellCerts certs;
  AdmissibleFamily fam;
  fam.balls = {Ball{Pt{0.1, 0.0, 0.01}, 0.08}};
  fam.delta = 0.081;
  certs.emplace(Cell{{0}, 1u}, fam);

  const FillResult res = fill_small_family(F, certs);
  CHECK(res.report.path == "cone-fallback");
  CHECK(res.report.localization.localized);
  const int Q = res.report.q;
  const ZeroFamily RF = refine_family(F, Q);
  for (const auto& [v, c] : res.tau.values)
    CHECK(boundary_one(c) == RF.at(v));
}

// ------------------------------------------------------------------- split

TEST_CASE("splitting clips fillings to a cell and closes along its rim") {
  OneFamily G;
  G.complex = CubicalComplex::cube(1);
  const OneChain g0 =
      OneChain::of(2, {Seg{Pt{-0.5, 0.3}, Pt{1.5, 0.3}}});
  const OneChain g1 =
      OneChain::of(2, {Seg{Pt{-0.5, 0.31}, Pt{1.5, 0.31}}});
  G.values.emplace(std::vector<int>{0}, g0);
  G.values.emplace(std::vector<int>{1}, g1);
  const FlatDomain square = FlatDomain::convex_polygon(
      {Pt{0.0, 0.0}, Pt{1.0, 0.0}, Pt{1.0, 1.0}, Pt{0.0, 1.0}});

  CellCerts certs;
  AdmissibleFamily fam;
  fam.balls = {Ball{Pt{0.5, 0.305}, 1.2}};
  fam.delta = 1.21;
  certs.emplace(Cell{{0}, 1u}, fam);

  const SplitResult res = split_filling(G, square, certs);
  // inside part: the clipped chord plus the shorter rim arc through (0,0)
  const OneChain& ins = res.inside.at({0});
  CHECK(ins.mass() == doctest::Approx(1.0 + 1.6));
  const Region reg = square.region();
  for (const Seg& s : ins.segments())
    CHECK(reg.contains(lerp(s.a, s.b, 0.5)));
  // inside + outside reproduces the input exactly
  CHECK(res.outside.at({0}) == add_one(g0, ins));
  CHECK(add_one(res.inside.at({1}), res.outside.at({1})) == g1);
  CHECK(res.localization.localized);
  // certificates are the input ones with tripled radii
  REQUIRE(res.certs.count(Cell{{0}, 1u}) == 1);
  CHECK(res.certs.at(Cell{{0}, 1u}).balls.front().radius ==
        doctest::Approx(3.6));

  CHECK_THROWS_AS(split_filling(G, square, {}), CertMissing);
  CHECK_THROWS_AS(
      split_filling(G, FlatDomain::disk(Pt{0.5, 0.5}, 2.0), certs),
      BadSpec);
}

TEST_CASE("wider two-parameter families keep their kill steps certified") {
  for (unsigned seed = 1; seed <= 3; ++seed) {
    Rng rng(seed);
    ZeroFamily F;
    F.complex = CubicalComplex::cube(2);
    const ZeroChain base = cloud(rng, Pt{0.5, 0.5}, 0.04, 6);
    for (const auto& v : F.complex.vertices())
      F.values.emplace(v, perturb(rng, base, 0.01));
    CellCerts certs;
    AdmissibleFamily fam;
    fam.balls = {Ball{Pt{0.5, 0.5}, 0.06}};
    fam.delta = 0.05;
    certs.emplace(Cell{{0, 0}, 3u}, fam);
    const FillResult res = fill_small_family(F, certs);
    CHECK(res.report.path == "inductive");
    CHECK(res.report.localization.localized);
    const ZeroFamily RF = refine_family(F, res.report.q);
    std::size_t checked = 0;
    for (const auto& [v, c] : res.tau.values) {
      if (checked++ % 97 != 0) continue;  // spot-check the exactness sweep
      CHECK(boundary_one(c) == RF.at(v));
    }
  }
}

TEST_CASE("three parameters fill through the component sweep") {
  Rng rng(7);
  ZeroFamily F;
  F.complex = CubicalComplex::cube(3);
  const ZeroChain base = cloud(rng, Pt{0.5, 0.5}, 0.01, 4);
  for (const auto& v : F.complex.vertices())
    F.values.emplace(v, perturb(rng, base, 0.004));
  CellCerts certs;
  AdmissibleFamily fam;
  fam.balls = {Ball{Pt{0.5, 0.5}, 0.1}};
  fam.delta = 0.08;
  certs.emplace(F.complex.cells_of_dim(3).front(), fam);
  const FillResult res = fill_small_family(F, certs);
  CHECK(res.report.path == "cone-fallback");
  CHECK(res.report.localization.localized);
  const int Q = res.report.q;
  const ZeroFamily RF = refine_family(F, Q);
  // exactness at the original corners and a spot-checked sample elsewhere
  for (const auto& v : F.complex.vertices()) {
    std::vector<int> w = v;
    for (auto& x : w) x *= Q;
    CHECK(boundary_one(res.tau.at(w)) == F.at(v));
  }
}
