/// @file localize.hpp
/// @brief Localization of fine families of 0-cycles over cubical complexes
/// and the filling of small localized families: grid-domain interpolation
/// between neighboring values, refinement-stage machinery with per-domain
/// assignment bookkeeping, cycle chopping over jittered planar lattices, and
/// the splitting of 1-chain fillings along convex cells.
#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "chainforge/chain.hpp"
#include "chainforge/coarea.hpp"
#include "chainforge/cubical.hpp"
#include "chainforge/flat_metric.hpp"
#include "chainforge/parallel.hpp"

namespace cf {

/// Largest admissible localization scale accepted by localize_family and
/// fill_small_family (certificate merging needs room below the unit scale).
double localize_delta_cap();

// ----------------------------------------------------------- planar lattice

/// Axis-aligned square lattice with an irrational sub-cell origin jitter, so
/// that input data sitting on round coordinates never hugs a lattice line.
/// Eight deterministic jitter choices are available for retry loops; the
/// half_offset variant shifts the whole lattice by half a cell in both axes,
/// which keeps the lines of the two variants uniformly separated.
class PlanarLattice {
 public:
  PlanarLattice() = default;
  /// Covers [lo, hi] with at least one full margin cell on every side.
  PlanarLattice(Pt lo, Pt hi, double cell, int jitter = 0,
                bool half_offset = false);

  bool valid() const { return h_ > 0; }
  double cell() const { return h_; }
  int jitter() const { return jitter_; }
  /// Number of cells per axis; lines per axis = cells + 1.
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double xline(int i) const { return xs_[static_cast<std::size_t>(i)]; }
  double yline(int j) const { return ys_[static_cast<std::size_t>(j)]; }
  /// Cell indices containing p (clamped to the lattice range).
  std::pair<int, int> cell_of(const Pt& p) const;
  int cell_id(int ix, int iy) const { return iy * nx_ + ix; }
  std::pair<int, int> cell_at(int id) const { return {id % nx_, id / nx_}; }
  /// Closed ball covering the closed cell (center, half-diagonal + margin).
  Ball cell_ball(int ix, int iy) const;

  /// Fragments every segment at its lattice-line crossings, so each output
  /// piece lies in one closed cell. Endpoints already on a line are left
  /// alone; a segment running along a line throws DegenerateCrossing (retry
  /// with the next jitter).
  OneChain split(const OneChain& c) const;

 private:
  double h_ = 0.0;
  int nx_ = 0, ny_ = 0, jitter_ = 0;
  std::vector<double> xs_, ys_;
};

/// Cell-by-cell decomposition of a planar 1-cycle along a lattice: piece(c)
/// is the mod-2 boundary of (odd-winding region of the cycle) clipped to the
/// cell c, assembled from the cycle's own segments in c plus the odd-parity
/// intervals of the winding region on the four cell walls. Partial sums over
/// a fixed cell schedule then move between the empty chain and the full
/// cycle in steps that are each a cycle supported in one cell ball.
///
/// The input must be pre-split by the same lattice (see PlanarLattice::split)
/// so that wall intervals and piece endpoints cancel exactly; the
/// constructor hard-checks that every piece is closed and that the pieces
/// sum back to the input.
class CycleGridChop {
 public:
  /// schedule_cells: cell ids processed in order; defaults to the cycle's
  /// own active cells in row-major order. A shared (union) schedule makes
  /// partial sums of nearby cycles comparable step by step.
  CycleGridChop(const PlanarLattice& lat, const OneChain& cycle,
                const std::vector<int>& schedule_cells = {});

  std::size_t steps() const { return sched_.size(); }
  /// partial(0) = empty, partial(steps()) = the full cycle.
  const OneChain& partial(std::size_t t) const { return partials_.at(t); }
  /// Piece added by step t -> t+1 (0-based), supported in step_ball(t).
  const OneChain& piece(std::size_t t) const { return pieces_.at(t); }
  Ball step_ball(std::size_t t) const { return balls_.at(t); }
  const std::vector<int>& schedule() const { return sched_; }

 private:
  std::vector<OneChain> partials_, pieces_;
  std::vector<Ball> balls_;
  std::vector<int> sched_;
};

// -------------------------------------------------------- edge interpolation

/// Interpolation between two neighboring values along a ball grid:
/// steps[0] = Fv, steps[l] = steps[l-1] + boundary(tau restricted to D_l),
/// steps[L] = Fw exactly. Each step's difference lies in the grid ball
/// B(x_l, r_l) (hard assert), and every intermediate mass obeys
/// mass <= max(mass Fv, mass Fw) + 2 L mass(tau) / r (hard assert).
struct EdgeInterpolation {
  std::vector<ZeroChain> steps;  ///< L+1 values from Fv to Fw
  double mass_cap = 0.0;         ///< the asserted bound's value
  double max_step_mass = 0.0;
};

EdgeInterpolation interpolate_edge(const ZeroChain& Fv, const ZeroChain& Fw,
                                   const OneChain& tau, const Grid& grid);

// ------------------------------------------------------ interpolation state

/// Bookkeeping that exhibits every produced value as a per-domain selection
/// of input values plus a small correction: for each output vertex y,
/// value(y) = sum_l input(assign_l) restricted to D_l, plus correction.
/// The selection property bounds the recombined mass by the largest input
/// mass on the carrier cell; the correction carries the interpolation noise.
struct InterpolationState {
  Grid grid;
  /// Original-vertex pairs with their filling chains (flat-norm witnesses).
  std::vector<std::pair<std::vector<int>, std::vector<int>>> pair_keys;
  std::vector<OneChain> pair_fillings;

  struct Row {
    std::vector<std::vector<int>> assign;  ///< per domain: original vertex
    ZeroChain correction;
  };
  std::unordered_map<std::vector<int>, Row, VecIntHash> rows;  ///< by vertex
};

struct StateCheckReport {
  bool ok = true;
  std::size_t rows_checked = 0;
  std::size_t reassembly_failures = 0;  ///< recombination != stored value
  bool selection_bound_ok = true;       ///< recombined mass <= carrier max
  double max_selected_mass = 0.0;
  double max_correction_mass = 0.0;
};

/// Recomputes every row of the state from the input family and compares
/// against the output values canonically; also verifies the per-domain
/// selection mass bound against the row's carrier cell.
StateCheckReport check_interpolation_state(const ZeroFamily& input,
                                           const ZeroFamily& output,
                                           const InterpolationState& state,
                                           const Exec& ex = {});

// ----------------------------------------------------------- localize_family

struct LocalizeReport {
  int q = 1;             ///< output refinement factor
  std::size_t L = 0;     ///< number of grid domains
  double eps_in = 0.0, delta_in = 0.0;
  std::string path;      ///< "trivial" | "inductive" | "cone-fallback" | ...
  double max_mass_in = 0.0, max_mass_out = 0.0;
  double slack = 0.0;    ///< max over cells of output excess over input max
  double measured_C = 0.0;  ///< slack / ((L/delta)^profile * eps)
  std::size_t N_declared = 0;
  double delta_declared = 0.0;
  FinenessReport fineness_out;
  LocalizedReport localization;
};

struct LocalizeResult {
  ZeroFamily family;
  CellCerts certs;
  InterpolationState state;
  LocalizeReport report;
};

/// Produces a refined family that agrees with F on original vertices, moves
/// by small steps certified by per-cell ball families, and keeps every mass
/// within the input cell maximum plus a slack proportional to eps. Parameter
/// dimension up to 2 runs the full inductive path in the plane; ambient
/// dimension 3 (or parameter dimension 3) switches the cell centers to the
/// cone-fallback path. Throws NotFine when F is not eps-fine, DeltaTooLarge
/// above the module cap, DimUnsupported beyond the supported dimensions.
LocalizeResult localize_family(const ZeroFamily& F, double eps, double delta,
                               const Exec& ex = {});

// ------------------------------------------------------------------ filling

struct FillReport {
  int q = 1;
  std::string path;  ///< "witness" | "inductive" | "cone-fallback"
  double eta_in = 0.0;    ///< largest single-vertex filling cost
  double eps_in = 0.0;    ///< largest pairwise flat distance
  double delta = 0.0;     ///< localization scale used
  double extent = 0.0;    ///< spatial extent of the family (bbox diagonal)
  double max_mass = 0.0;  ///< largest output filling mass
  double measured_c = 0.0;  ///< max_mass / (kill steps * input scale)
  std::size_t N_out = 0;
  double delta_out = 0.0;
  LocalizedReport localization;
};

struct FillResult {
  OneFamily tau;
  CellCerts certs;
  FillReport report;
};

/// Fills every value of an even-mass family with a 1-chain whose boundary
/// reproduces the (refined) family exactly, with transitions localized by
/// certificate balls. Parameter dimension up to 2 in the plane uses the
/// lattice-chopping inductive path; parameter dimension 3, or ambient
/// dimension 3 with parameter dimension >= 1, uses the component-sweep
/// cone-fallback. Throws OddParity when some value has odd mass.
FillResult fill_small_family(const ZeroFamily& F, const CellCerts& certs,
                             const Exec& ex = {});

// ----------------------------------------------------------- split_filling

struct SplitResult {
  OneFamily inside;   ///< supported in the cell Q
  OneFamily outside;  ///< G + inside
  CellCerts certs;    ///< threefold-inflated input certificates
  LocalizedReport localization;  ///< check of `inside` against certs
};

/// Splits a localized family of 1-chains along a convex polygonal cell Q:
/// inside(x) is G(x) clipped to Q plus a boundary corrector supported on
/// the perimeter of Q, so that inside(x) + G(x) restricted to Q is carried
/// by the perimeter. Throws CertMissing when a varying cell carries no
/// certificate, BadSpec for domains without a polygon boundary.
SplitResult split_filling(const OneFamily& G, const FlatDomain& Q,
                          const CellCerts& certs, const Exec& ex = {});

// -------------------------------------------------------- profile constants

/// Exponent profile n(k, p) of the mass slack in ambient dimension `ambient`
/// for k-cycles over p-parameter families.
int profile_exponent(int k, int p, int ambient);
/// Filling-constant profile c(k, p) (18 at the planar base case).
double fill_profile_constant(int k, int p, int ambient);
/// Localization-profile recursion K(N, k, p).
double fill_profile_K(double N, int k, int p, int ambient);
/// Mass constant of the cone-fallback path: C(0) = 1, C(l) = 3 C(l-1) + 4.
double fallback_mass_constant(int l);

nlohmann::json localize_report_to_json(const LocalizeReport& rep);
nlohmann::json fill_report_to_json(const FillReport& rep);

}  // namespace cf
