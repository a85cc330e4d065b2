#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "chainforge/cubical.hpp"
#include "chainforge/rng.hpp"

using namespace cf;

namespace {

bool same_complex(const CubicalComplex& A, const CubicalComplex& B) {
  return A.d() == B.d() && A.q() == B.q() && A.cells_sorted() == B.cells_sorted();
}

}  // namespace

TEST_CASE("unit cube cell counts in dimensions 1..3") {
  CubicalComplex I1 = CubicalComplex::cube(1);
  CHECK(I1.cells_of_dim(0).size() == 2);
  CHECK(I1.cells_of_dim(1).size() == 1);

  CubicalComplex I2 = CubicalComplex::cube(2);
  CHECK(I2.cells_of_dim(0).size() == 4);
  CHECK(I2.cells_of_dim(1).size() == 4);
  CHECK(I2.cells_of_dim(2).size() == 1);

  CubicalComplex I3 = CubicalComplex::cube(3);
  CHECK(I3.cells_of_dim(0).size() == 8);
  CHECK(I3.cells_of_dim(1).size() == 12);
  CHECK(I3.cells_of_dim(2).size() == 6);
  CHECK(I3.cells_of_dim(3).size() == 1);
  CHECK(I3.size() == 27);
}

TEST_CASE("adding a cell closes under faces") {
  CubicalComplex X(2, 4);
  Cell c;
  c.anchor = {1, 2};
  c.axes = 0b11;
  X.add_cell(c);
  CHECK(X.cells_of_dim(0).size() == 4);
  CHECK(X.cells_of_dim(1).size() == 4);
  CHECK(X.cells_of_dim(2).size() == 1);
  Cell edge;
  edge.anchor = {1, 2};
  edge.axes = 0b01;
  CHECK(X.has(edge));
  Cell far_vertex;
  far_vertex.anchor = {2, 3};
  CHECK(X.has(far_vertex));
}

TEST_CASE("refinement at factor 1 is the identity") {
  CubicalComplex X = CubicalComplex::cube(2);
  CHECK(same_complex(refine(X, 1), X));
}

TEST_CASE("refinement factor must be odd") {
  CubicalComplex X = CubicalComplex::cube(1);
  CHECK_THROWS_AS(refine(X, 2), BadSpec);
  CHECK_THROWS_AS(refine(X, 4), BadSpec);
  CHECK_NOTHROW(refine(X, 5));
}

TEST_CASE("unit segment refined at factor 3 has 3 edges and 4 vertices") {
  CubicalComplex X = refine(CubicalComplex::cube(1), 3);
  CHECK(X.q() == 3);
  CHECK(X.cells_of_dim(1).size() == 3);
  CHECK(X.cells_of_dim(0).size() == 4);
}

TEST_CASE("unit square refined at factor 3 has 9 squares and 16 vertices") {
  CubicalComplex X = refine(CubicalComplex::cube(2), 3);
  CHECK(X.cells_of_dim(2).size() == 9);
  CHECK(X.cells_of_dim(1).size() == 24);
  CHECK(X.cells_of_dim(0).size() == 16);
}

TEST_CASE("skeleton commutes with refinement on the skeleton's support") {
  // Refining creates new low-dimensional cells interior to higher original
  // cells, so refine(skeleton(j)) can only equal the part of
  // skeleton(j)(refine) that lies inside the original j-skeleton.
  CubicalComplex X = CubicalComplex::cube(3);
  for (int j = 0; j <= 3; ++j) {
    CubicalComplex A = refine(X.skeleton(j), 3);
    CubicalComplex B = refine(X, 3).skeleton(j);
    for (const Cell& c : A.cells_sorted()) CHECK(B.has(c));  // containment
    std::vector<Cell> restricted;
    for (const Cell& c : B.cells_sorted())
      if (parent_cell(c, 3).dim() <= j) restricted.push_back(c);
    CHECK(restricted == A.cells_sorted());
  }
  // at top dimension the two sides agree outright
  CHECK(same_complex(refine(X.skeleton(3), 3), refine(X, 3).skeleton(3)));
}

TEST_CASE("parent cell recovers the subdivided cell") {
  CubicalComplex X = refine(CubicalComplex::cube(2), 3);
  Cell inner;  // vertex strictly inside the original square
  inner.anchor = {1, 2};
  CHECK(parent_cell(inner, 3).dim() == 2);
  Cell corner;
  corner.anchor = {3, 0};
  Cell pc = parent_cell(corner, 3);
  CHECK(pc.dim() == 0);
  CHECK(pc.anchor == std::vector<int>{1, 0});
  Cell edge;  // edge along axis 0 sitting on the original bottom edge
  edge.anchor = {1, 0};
  edge.axes = 0b01;
  Cell pe = parent_cell(edge, 3);
  CHECK(pe.axes == 0b01);
  CHECK(pe.anchor == std::vector<int>{0, 0});
}

TEST_CASE("refinement preserves face closure") {
  CubicalComplex X = refine(CubicalComplex::cube(2), 3);
  for (const Cell& c : X.cells_sorted())
    for (const Cell& f : CubicalComplex::faces(c)) CHECK(X.has(f));
}

TEST_CASE("nearest original vertex maps refined blocks back") {
  // level-3 refinement of the unit segment: anchors 0,1 -> 0 and 2,3 -> 1
  CHECK(nearest_original_vertex({0}, 3) == std::vector<int>{0});
  CHECK(nearest_original_vertex({1}, 3) == std::vector<int>{0});
  CHECK(nearest_original_vertex({2}, 3) == std::vector<int>{1});
  CHECK(nearest_original_vertex({3}, 3) == std::vector<int>{1});
  CHECK(nearest_original_vertex({4, 7}, 5) == std::vector<int>{1, 1});
}

TEST_CASE("nearest original vertex is the identity on original vertices") {
  for (int qp : {1, 3, 5, 7}) {
    for (int w = 0; w <= 6; ++w) {
      CHECK(nearest_original_vertex({w * qp}, qp) == std::vector<int>{w});
    }
  }
}

TEST_CASE("refined family is constant on nearest-vertex blocks") {
  ZeroFamily F;
  F.complex = CubicalComplex::cube(1);
  ZeroChain a = ZeroChain::of(2, {Pt{0.1, 0.2}});
  ZeroChain b = ZeroChain::of(2, {Pt{0.7, 0.9}});
  F.values.emplace(std::vector<int>{0}, a);
  F.values.emplace(std::vector<int>{1}, b);

  ZeroFamily G = refine_family(F, 3);
  CHECK(G.total());
  CHECK(G.at({0}) == a);
  CHECK(G.at({1}) == a);
  CHECK(G.at({2}) == b);
  CHECK(G.at({3}) == b);

  ZeroFamily H = refine_family(F, 1);
  CHECK(H.at({0}) == a);
  CHECK(H.at({1}) == b);
  CHECK(H.complex.cells_sorted() == F.complex.cells_sorted());
}

TEST_CASE("refined family agrees with pullback at every new vertex") {
  OneFamily F;
  F.complex = CubicalComplex::cube(2);
  Rng rng(99);
  for (const auto& v : F.complex.vertices()) {
    Pt p{rng.uniform(), rng.uniform()};
    Pt q{rng.uniform(), rng.uniform()};
    F.values.emplace(v, OneChain::of(2, {Seg{p, q}}));
  }
  OneFamily G = refine_family(F, 5);
  CHECK(G.total());
  for (const auto& v : G.complex.vertices()) {
    CHECK(G.at(v) == F.at(nearest_original_vertex(v, 5)));
  }
}

TEST_CASE("squeeze map values") {
  CHECK(phi_squeeze(0.0) == doctest::Approx(0.0));
  CHECK(phi_squeeze(1.0) == doctest::Approx(1.0));
  CHECK(phi_squeeze(0.5) == doctest::Approx(0.5));
  CHECK(phi_squeeze(0.3) == doctest::Approx(0.0));
  CHECK(phi_squeeze(1.0 / 3.0) == doctest::Approx(0.0));
  CHECK(phi_squeeze(2.0 / 3.0) == doctest::Approx(1.0));
  CHECK(phi_squeeze(0.75) == doctest::Approx(1.0));
}

TEST_CASE("coordinate squeeze is idempotent on level-3 vertex coordinates") {
  // vertex coordinates of a 3-refined cell are multiples of 1/3; their images
  // land on {0,1}, which the map fixes
  std::vector<double> grid = {0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0};
  for (double x : grid)
    for (double y : grid) {
      std::vector<double> v = {x, y};
      std::vector<double> once = xi(v);
      std::vector<double> twice = xi(once);
      CHECK(once == twice);
      for (double c : once) CHECK((c == 0.0 || c == 1.0));
    }
}

TEST_CASE("coordinate squeeze maps cell boundary into cell boundary") {
  Rng rng(7);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> v = {rng.uniform(), rng.uniform(), rng.uniform()};
    int face_axis = static_cast<int>(rng.below(3));
    v[face_axis] = rng.below(2) ? 1.0 : 0.0;  // put v on the cube boundary
    std::vector<double> w = xi(v);
    bool on_boundary = false;
    for (double c : w) on_boundary = on_boundary || c == 0.0 || c == 1.0;
    CHECK(on_boundary);
    CHECK((w[face_axis] == 0.0 || w[face_axis] == 1.0));
  }
}

TEST_CASE("central subcell anchors") {
  Cell square;
  square.anchor = {0, 0};
  square.axes = 0b11;
  Cell c = center_subcell(square);
  CHECK(c.anchor == std::vector<int>{1, 1});
  CHECK(c.axes == square.axes);

  Cell edge;
  edge.anchor = {2, 5};
  edge.axes = 0b01;
  Cell ce = center_subcell(edge);
  CHECK(ce.anchor == std::vector<int>{7, 15});
  CHECK(ce.axes == 0b01);

  Cell vertex;
  vertex.anchor = {4};
  vertex.axes = 0;
  CHECK(center_subcell(vertex).anchor == std::vector<int>{12});
}

TEST_CASE("central subcell lies inside the 3-refined cell") {
  CubicalComplex X = CubicalComplex::cube(2);
  CubicalComplex R = refine(X, 3);
  for (const Cell& c : X.cells_sorted()) CHECK(R.has(center_subcell(c)));
}

TEST_CASE("vertex metric examples") {
  CubicalComplex X1 = CubicalComplex::cube(2, 1);
  VertexMetrics same = vertex_metrics(X1, {0, 0}, {0, 0});
  CHECK(same.d0 == doctest::Approx(0.0));
  CHECK(same.d1 == doctest::Approx(0.0));
  CHECK(same.dq == doctest::Approx(0.0));

  VertexMetrics diag = vertex_metrics(X1, {0, 0}, {1, 1});
  CHECK(diag.d0 == doctest::Approx(1.0));
  CHECK(diag.d1 == doctest::Approx(2.0));
  CHECK(diag.dq == doctest::Approx(2.0));

  CubicalComplex X3 = CubicalComplex::cube(2, 3);
  VertexMetrics step = vertex_metrics(X3, {0, 0}, {1, 1});
  CHECK(step.d0 == doctest::Approx(1.0 / 3.0));
  CHECK(step.d1 == doctest::Approx(2.0 / 3.0));
  CHECK(step.dq == doctest::Approx(2.0));
}

TEST_CASE("vertex metrics reject pairs with no common cell") {
  CubicalComplex X1 = CubicalComplex::cube(2, 2);
  CHECK_THROWS_AS(vertex_metrics(X1, {0, 0}, {2, 0}), NotInCommonCell);

  // 1-skeleton of the unit square: diagonal pairs span the missing 2-cell
  CubicalComplex S = CubicalComplex::cube(2).skeleton(1);
  CHECK_THROWS_AS(vertex_metrics(S, {0, 0}, {1, 1}), NotInCommonCell);
  CHECK_NOTHROW(vertex_metrics(S, {0, 0}, {1, 0}));
}

TEST_CASE("complex JSON round trip") {
  CubicalComplex X = refine(CubicalComplex::cube(2), 3).skeleton(1);
  CubicalComplex Y = complex_from_json(complex_to_json(X));
  CHECK(same_complex(X, Y));
}

TEST_CASE("family JSON round trip") {
  ZeroFamily F;
  F.complex = CubicalComplex::cube(2);
  F.provenance = "test";
  Rng rng(5);
  for (const auto& v : F.complex.vertices()) {
    F.values.emplace(v, ZeroChain::of(2, {Pt{rng.uniform(), rng.uniform()},
                                       Pt{rng.uniform(), rng.uniform()}}));
  }
  ZeroFamily G = zero_family_from_json(family_to_json(F));
  CHECK(G.provenance == "test");
  CHECK(G.total());
  for (const auto& v : F.complex.vertices()) CHECK(G.at(v) == F.at(v));
}

TEST_CASE("vertex key string round trip") {
  std::vector<int> v = {3, 0, 12};
  CHECK(vertex_key_parse(vertex_key_string(v)) == v);
  CHECK(vertex_key_string(v) == "3,0,12");
}
