/// @file fill.hpp
/// @brief Isoperimetric fillings in the unit disk and ball: unit-grid
/// skeletons with generic viewpoints, radial ray fillings pushed onto the
/// skeleton where overlapping rays cancel mod 2, per-vertex fillings of
/// families of 0-cycles with boundary control, rerouting of localized
/// families away from a boundary cap, origin hyperplanes avoiding small
/// ball families, and exact fillings of families over metric graphs and
/// triangulated planar domains.
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <json.hpp>

#include "chainforge/chain.hpp"
#include "chainforge/coarea.hpp"
#include "chainforge/cubical.hpp"
#include "chainforge/parallel.hpp"

namespace cf {

// ------------------------------------------------------------ grid skeleton

/// Unit integer grid around the origin in ambient dimension 2 or 3, clipped
/// to the closed ball of radius R: the 1-skeleton (grid edges meeting the
/// ball) and the codimension-2 dual (cell centers in the plane, axis-parallel
/// center-line segments in space). Coordinates are in cell units; callers
/// working at unit-disk scale multiply by R on the way in and by r = 1/R on
/// the way out.
class GridSkeleton {
 public:
  /// dim in {2, 3}, R >= 2; throws BadSpec otherwise.
  GridSkeleton(int dim, int R);

  int dim() const { return dim_; }
  int R() const { return R_; }
  double r() const { return 1.0 / R_; }
  /// Cap on neighborhood scales around the dual pieces; keeps every dual
  /// neighborhood clear of the skeleton (structural separation 1/2).
  double margin() const { return 0.45; }

  /// Unit grid edges meeting the closed ball of radius R.
  const std::vector<Seg>& edges() const { return edges_; }
  /// Total edge length inside the closed ball (edges clipped there).
  double skeleton_mass() const { return skel_mass_; }
  /// skeleton_mass() / R^dim; bounded by a dimension constant as R grows.
  double density() const;

  /// Dual pieces: degenerate segments (cell-center points) in the plane,
  /// center-line segments clipped to the ball of radius R + 1 in space.
  std::size_t dual_count() const { return dual_.size(); }
  const Seg& dual_piece(std::size_t i) const { return dual_[i]; }
  /// Parallel class of a dual piece: 0 in the plane, line axis 0..2 in space.
  int dual_class(std::size_t i) const { return dual_class_[i]; }
  int dual_classes() const { return dim_ == 2 ? 1 : 3; }

 private:
  int dim_ = 2;
  int R_ = 2;
  double skel_mass_ = 0.0;
  std::vector<Seg> edges_;
  std::vector<Seg> dual_;
  std::vector<int> dual_class_;
};

// ------------------------------------------------------------ generic point

/// Viewpoint for radial fillings at grid scale: a point outside the ball of
/// radius R whose sphere-tangency circle lies inside a prescribed boundary
/// cap, in general position with respect to the dual pieces. epsilon is the
/// frozen neighborhood scale: every emitted ray is re-verified to meet at
/// most one epsilon-neighborhood of a dual piece per parallel class, each
/// within a window of diameter below one cell unit.
struct GenericPoint {
  Pt P;                  ///< viewpoint, |P| > R
  Ball cap;              ///< ball centered on the sphere; its trace is the cap
  double epsilon = 0.0;  ///< frozen dual-neighborhood scale, cell units
  double R = 0.0;        ///< ball radius the viewpoint was chosen for
  double tangent_angle = 0.0;  ///< angular radius of the tangency circle
  double v_margin = 0.0;  ///< distance to the nearest degenerate alignment
  int samples_used = 0;   ///< viewpoint candidates drawn
  int rays_checked = 0;   ///< probe rays checked while freezing epsilon
  int max_pieces_per_ray = 0;        ///< most dual pieces met by one probe
  double max_window_diameter = 0.0;  ///< largest met window, cell units
};

/// Draws a viewpoint by rejection sampling: the tangency circle stays inside
/// the cap with margin, alignments with pairs of parallel dual pieces are
/// avoided, and epsilon is frozen from a thousand random probe rays, then
/// re-verified on a fresh thousand. `cap` must be centered on the sphere of
/// radius grid.R() with positive radius below the hemisphere scale (throws
/// BadSpec otherwise). Throws ExhaustedSamples when no candidate passes.
GenericPoint pick_generic_point(const GridSkeleton& grid, const Ball& cap,
                                std::uint64_t seed = 0);

// ----------------------------------------------------------------- ray fill

/// Far sphere exit of the ray from the viewpoint through q (|q| <= R within
/// tolerance, hard assert). Throws TangentRay near tangency.
Pt ray_exit(const Pt& q, const GenericPoint& gp);

/// Radial filling of a 0-chain at grid scale: one segment per point, from
/// the point to its far sphere exit; points already at their own exit drop
/// out. boundary(ray_fill(z)) = z + exits(z) exactly (hard assert).
OneChain ray_fill(const ZeroChain& z, const GenericPoint& gp);

// -------------------------------------------------- deformation to skeleton

/// Result of pushing a chain of viewpoint rays onto the grid skeleton.
struct DeformResult {
  OneChain chain;  ///< supported on grid edges and the sphere
  /// Images of each input segment's endpoints, aligned with input order.
  std::vector<std::array<Pt, 2>> endpoint_images;
  double max_displacement = 0.0;  ///< cell units, over all moved vertices
  double mass_ratio = 0.0;        ///< mass(chain) / (k + R^dim), k = inputs
  int recentered = 0;             ///< rejected push centers, all cells
};

/// Two-stage radial deformation onto the skeleton: every ray piece is pushed
/// from a jittered generic cell center onto the cell boundary and, in
/// dimension 3, from jittered face centers onto face boundaries, exactly as
/// polylines; near-integer coordinates snap, parts pushed outside the ball
/// re-clip onto the sphere, and collinear overlaps cancel mod 2. Every input
/// segment must lie on a line through the viewpoint (hard assert) and is
/// re-verified against the viewpoint's frozen neighborhood scale. Throws
/// DegenerateCenter when no admissible push center is found for some cell or
/// a ray fails re-verification (redraw the viewpoint and retry).
DeformResult ff_deform(const OneChain& rays, const GridSkeleton& grid,
                       const GenericPoint& gp, std::uint64_t seed = 0);

// -------------------------------------------------------- disk/ball filling

struct BendCancelReport {
  int dim = 0;
  int R = 0;            ///< grid radius used (1/r rounded, at least 2)
  double r = 0.0;       ///< realized cell width at unit scale, 1/R
  double cap_angle = 0.0;     ///< angular radius of the boundary cap
  double max_input_mass = 0;  ///< largest mass of a clipped value
  double max_fill_mass = 0.0;          ///< largest filling mass, unit scale
  double c_measured = 0.0;    ///< max mass(G) / (mass(clip F) r + r^(1-dim))
  double boundary_factor = 0.0;        ///< max mass(bd G)/mass(clip F), <= 2
  double max_displacement = 0.0;       ///< cell units, worst vertex
  double max_deform_ratio = 0.0;       ///< worst skeleton-push mass ratio
  int attempts = 1;                    ///< viewpoint draws used
  std::size_t vertices = 0;
};

struct BendCancelResult {
  OneFamily filling;  ///< per vertex: 1-chain in the closed unit ball
  BendCancelReport report;
};

/// Fills each value of a family of 0-cycles in the closed unit ball with a
/// 1-chain whose boundary differs from the value only on the unit sphere.
/// Values are scaled to the grid ball, coned radially from one shared
/// generic viewpoint, pushed onto the grid skeleton where overlapping rays
/// cancel mod 2, and scaled back; straight corrections reconnect each value
/// to its deformed image. `cap` is the unit-scale boundary ball where
/// values may touch the sphere; sphere points outside it stay untouched and
/// enter neither the filling nor the bounds. Requires 0 < r < 1 (BadSpec).
/// Hard-verified per vertex: boundary(G(x)) + F(x) is supported on the unit
/// sphere, and mass(boundary G(x)) <= 2 mass(clipped F(x)).
BendCancelResult bend_cancel_fill(const ZeroFamily& F, double r,
                                  const Ball& cap, const Exec& ex = {},
                                  std::uint64_t seed = 0);

// ------------------------------------------------------- boundary-cap vacate

struct AvoidReport {
  int q = 3;               ///< refinement factor of the output complex
  int p = 0;               ///< parameter dimension
  double L = 0.0;          ///< angular radius of the vacated cap
  double delta_in = 0.0;   ///< input localization scale
  double delta_out = 0.0;  ///< output localization scale, L + (p+2) delta
  std::size_t flips = 0;   ///< pole-parity transitions inserted
  std::size_t cells = 0;   ///< original cells processed
  double max_mass_excess = 0.0;  ///< worst output mass minus cell input max
  double ring_radius_min = 0.0;  ///< smallest vacating ring radius
  double ring_radius_max = 0.0;  ///< largest vacating ring radius
  double ring_clearance = 0.0;   ///< smallest radial half-gap of a ring
  double corridor_clearance = 0.0;  ///< smallest azimuthal half-gap
  LocalizedReport localization;     ///< output check at scale delta_out
};

struct AvoidResult {
  ZeroFamily family;  ///< threefold-refined family off the open cap
  CellCerts certs;    ///< certificates for the refined complex
  AvoidReport report;
};

/// Reroutes a localized family of 0-cycles in the closed unit ball away
/// from the open boundary cap of angular radius L about (0,0,-1): cap
/// points of each value are replaced by the pole itself when their count is
/// odd and dropped otherwise, with the transitions re-certified on a
/// threefold refinement of the parameter complex. Hard-verified: original
/// vertices keep their exact off-cap values; every refined value agrees
/// with a parent-cell corner value outside the enlarged ball of radius
/// L + (p+2) delta about the pole; interior-plus-cap masses exceed the
/// parent-cell input maximum by at most dim(cell) + 1; the output is
/// localized at scale L + (p+2) delta. Ambient dimension 3 with parameter
/// dimension at most 2 only (DimUnsupported otherwise); throws
/// DeltaTooLarge when the scales leave no room on the sphere.
AvoidResult avoid_boundary_ball(const ZeroFamily& F, const CellCerts& certs,
                                double L, const Exec& ex = {});

// ------------------------------------------------------ hyperplane avoidance

/// Origin hyperplane in ambient dimension 2 or 3, with |normal| = 1.
struct Hyperplane {
  Pt normal;
  double clearance = 0.0;  ///< min over balls of |<normal, center>| - radius
};

/// Finds a hyperplane through the origin disjoint from every closed ball,
/// verified exactly (the distance from the plane to each center exceeds the
/// radius). Unit normals are drawn deterministically and the best clearance
/// wins; with no balls the first axis plane is returned. Throws NotFound
/// when no candidate clears every ball — permitted when the total diameter
/// budget exceeds the estimated threshold.
Hyperplane find_avoiding_hyperplane(const std::vector<Ball>& balls, int dim,
                                    std::uint64_t seed = 0);

/// Empirical diameter-budget threshold for find_avoiding_hyperplane, located
/// by bisection: the largest total-diameter budget at which random
/// adversarial families (uniform scatters mixed with great-circle chains)
/// produce zero failures.
struct DeltaEstimate {
  int dim = 0;
  double delta_n = 0.0;       ///< largest safe total-diameter budget found
  int bisect_iters = 0;
  int families_per_iter = 0;
  std::uint64_t seed = 0;
};

DeltaEstimate estimate_hyperplane_budget(int dim, int families_per_iter = 200,
                                         std::uint64_t seed = 1);

// ----------------------------------------------------- parametric fillings

/// Planar domain carrying parametrized families: a metric graph of straight
/// edges (m = 1) or a triangulated polygon (m = 2, edges derived from the
/// triangles). Vertices lie in the plane z = 0.
class PlanarComplex {
 public:
  /// Metric graph; throws BadSpec on degenerate or duplicate edges.
  static PlanarComplex graph(std::vector<Pt> vertices,
                             std::vector<std::array<int, 2>> edges);
  /// Triangulated domain; throws BadSpec on degenerate triangles.
  static PlanarComplex triangulated(std::vector<Pt> vertices,
                                    std::vector<std::array<int, 3>> triangles);
  /// Closed polygon as a cycle graph through the given loop points.
  static PlanarComplex cycle(const std::vector<Pt>& loop);

  int m() const { return triangles_.empty() ? 1 : 2; }
  const std::vector<Pt>& vertices() const { return vertices_; }
  const std::vector<std::array<int, 2>>& edges() const { return edges_; }
  const std::vector<std::array<int, 3>>& triangles() const {
    return triangles_;
  }
  double length() const;  ///< total edge length
  double area() const;    ///< total triangle area, 0 for graphs

 private:
  PlanarComplex() = default;
  std::vector<Pt> vertices_;
  std::vector<std::array<int, 2>> edges_;
  std::vector<std::array<int, 3>> triangles_;
};

struct ParametricReport {
  int m = 0;        ///< domain dimension: 1 graph, 2 triangulated
  int p = 0;        ///< resolution knob; grid width r = p^(-1/m)
  double r = 0.0;
  double mass0 = 0.0;          ///< largest input value mass
  double max_fill_mass = 0.0;  ///< largest output filling mass
  double c_measured = 0.0;  ///< max mass(G)/(mass0 p^(-1/m) + p^((m-1)/m))
  double graph_mass = 0.0;  ///< largest along-edges filling part
  double rim_factor = 0.0;  ///< max rim mass over 4 (cell mass + p + 1), <= 1
  double lip_fwd = 0.0;     ///< worst sampled triangle-to-disk stretch
  double lip_back = 0.0;    ///< worst sampled disk-to-triangle stretch
  std::size_t cells = 0;    ///< triangles (m = 2) or edges (m = 1)
  std::size_t vertices = 0;  ///< family vertices filled
};

struct ParametricFillResult {
  OneFamily filling;  ///< per vertex: 1-chain supported in the domain
  ParametricReport report;
};

/// Fills a family of 0-cycles supported on a planar domain with 1-chains in
/// the domain whose boundaries reproduce the values exactly (hard assert per
/// vertex). On metric graphs the filling routes along tree paths and its
/// mass never exceeds the total edge length (hard assert). On triangulated
/// domains each value is filled triangle by triangle through a radial
/// triangle-to-disk identification at grid width r = p^(-1/m), the rims land
/// on the triangulation edges, and the remainder is routed along the edge
/// graph; per-triangle rim masses stay within 4 (cell mass + p + 1) (hard
/// assert). Values must lie on the domain (points off it throw BadSpec) and
/// be planar (DimUnsupported otherwise); odd parity on a connected component
/// throws NotContractible. p >= 1 on graphs, p >= 2 on triangulations.
ParametricFillResult parametric_fill(const ZeroFamily& F,
                                     const PlanarComplex& P, int p,
                                     const Exec& ex = {},
                                     std::uint64_t seed = 0);

// --------------------------------------------------------------------- JSON

nlohmann::json bend_cancel_report_to_json(const BendCancelReport& rep);
nlohmann::json avoid_report_to_json(const AvoidReport& rep);
nlohmann::json parametric_report_to_json(const ParametricReport& rep);
nlohmann::json delta_estimate_to_json(const DeltaEstimate& est);

}  // namespace cf
