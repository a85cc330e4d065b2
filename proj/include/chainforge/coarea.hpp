/// @file coarea.hpp
/// @brief Ball covers, slice-bounded radius selection, the chopping operator
/// with its stability memo, disjoint ball families, grids, and the
/// localization checker for families over cubical complexes.
#pragma once

#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "chainforge/chain.hpp"
#include "chainforge/cubical.hpp"
#include "chainforge/errors.hpp"
#include "chainforge/flat_metric.hpp"
#include "chainforge/parallel.hpp"

namespace cf {

struct Ball {
  Pt center;
  double radius = 0.0;
};

/// A disjoint family of closed balls with a radius-sum budget.
struct AdmissibleFamily {
  std::vector<Ball> balls;
  double delta = 0.0;

  double radius_sum() const;
  bool disjoint() const;
  /// disjoint and radius_sum() < delta (or both zero)
  bool valid() const;
  /// p lies in some closed ball (within eps_geom)
  bool covers(const Pt& p) const;
};

/// Deterministic ball-cover centers of a domain at base radius r.
struct CoverCenters {
  std::vector<Pt> points;
  double r = 0.0;
  int ambient_dim = 2;
  double volume = 0.0;      ///< domain volume used in the density bound
  double measured_c = 0.0;  ///< L * r^n / volume
  std::size_t size() const { return points.size(); }
};

/// Lattice-based cover: every domain point is within r of some center,
/// verified on a dense deterministic sample. Centers are kept within
/// distance r of the domain, so the count stays proportional to volume/r^n.
CoverCenters cover_centers(const FlatDomain& domain, double r);

/// For each center x_l picks a radius in [r, 2r] such that every chain
/// crosses the sphere of that radius at most K*mass(chain)/r times. The
/// feasible set is computed exactly from slice breakpoints; the returned
/// radius is the midpoint of the largest feasible subinterval (leftmost on
/// ties). Throws Infeasible only on tolerance failure: a feasible interval
/// always exists when |chains| <= K by the averaging bound.
std::vector<double> select_radii(const CoverCenters& centers,
                                 const std::vector<OneChain>& chains, int K,
                                 const Exec& ex = {});

/// Successive ball-complement grid: D_l = closure(B_l) minus the earlier
/// open balls. Unions cover every B_l; interiors are pairwise disjoint.
struct Grid {
  std::vector<Pt> centers;
  std::vector<double> radii;
  double r = 0.0;  ///< base radius (radii lie in [r, 2r]); 0 when unknown

  std::size_t size() const { return centers.size(); }
  /// The region D_l (0-based l).
  Region domain(std::size_t l) const;
};

/// base_r is the cover's base radius; when omitted a conservative lower
/// stand-in (half the smallest ball radius) is recorded instead.
Grid make_grid(std::vector<Pt> centers, std::vector<double> radii,
               double base_r = 0.0);

/// The chopping operator d_l: removes the chain's own ball neighborhoods of
/// the first l cover centers. The radius at center l depends only on the
/// chain near that center (its restriction to B(x_l, 2r)), realized by a
/// memo keyed on the canonical bytes of that restriction; the memo behaves
/// as a single-writer-consistent cache under concurrent use.
class Chopper {
 public:
  explicit Chopper(CoverCenters centers) : centers_(std::move(centers)) {}

  const CoverCenters& centers() const { return centers_; }
  /// The chain-dependent radius r_l(tau) in [r, 2r], memoized.
  double radius_for(const OneChain& tau, std::size_t l) const;
  /// d_l(tau): tau restricted away from the first l chopped balls.
  /// d_0 = tau; d_size() = empty.
  OneChain chop(const OneChain& tau, std::size_t l) const;

 private:
  CoverCenters centers_;
  mutable std::mutex memo_mutex_;
  mutable std::unordered_map<std::string, double> memo_;
};

/// Greedy disjointification: intersecting or nested balls are replaced by
/// their enclosing ball until pairwise disjoint. The radius sum never grows
/// (so the 3x budget of the output tag always holds). Throws BudgetExceeded
/// when the input radius sum exceeds the domain scale 1/3.
AdmissibleFamily merge_admissible(const std::vector<Ball>& balls);

using CellCerts = std::unordered_map<Cell, AdmissibleFamily, CellHash>;

struct LocalizationViolation {
  Cell cell;
  std::vector<int> x, y;
  Pt point;  ///< a difference point outside every certificate ball
};

struct LocalizedReport {
  bool localized = true;
  std::size_t N = 0;       ///< max certificate ball count over cells
  double delta_sum = 0.0;  ///< max certificate radius sum over cells
  std::size_t pairs_checked = 0;
  std::vector<LocalizationViolation> violations;
};

/// Verifies that for every cell and every vertex pair in it, the support of
/// the difference chain lies in the cell's certificate balls. Cells without
/// a certificate are treated as having an empty one.
LocalizedReport check_localized(const ZeroFamily& F, const CellCerts& certs,
                                const Exec& ex = {});

/// 1-chain variant: the difference of two values is overlap-reduced and each
/// surviving segment must fit inside one certificate ball (both endpoints in
/// a common ball, hence the segment by convexity).
LocalizedReport check_localized(const OneFamily& G, const CellCerts& certs,
                                const Exec& ex = {});

nlohmann::json localized_report_to_json(const LocalizedReport& rep);

/// Face-monotone closure of per-cell certificates: ascending by dimension,
/// each cell of dimension >= 2 merges its own certificate with its facets'
/// (already monotone) ones; edges keep their own and vertex certificates are
/// ignored (a 0-cell has no vertex pairs to certify). The profile inflation
/// is bounded by the recursion c(1) = 1, c(p) = 3(1 + 2p*c(p-1)) (hard
/// assert).
CellCerts monotonize(const CubicalComplex& X, const CellCerts& certs, int p);

/// The profile constant c(p) of monotonize.
double monotone_constant(int p);

}  // namespace cf
