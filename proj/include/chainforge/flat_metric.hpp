/// @file flat_metric.hpp
/// @brief Flat norm of mod-2 0-cycles over convex planar domains and balls:
/// exact matching-based evaluation (absolute and boundary-relative), a
/// brute-force oracle, flat distance, and fineness checking for families.
#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "chainforge/chain.hpp"
#include "chainforge/cubical.hpp"
#include "chainforge/errors.hpp"
#include "chainforge/parallel.hpp"
#include "chainforge/region.hpp"

namespace cf {

enum class FlatMode { absolute, relative };

/// A bounded convex domain exposing boundary distance and nearest boundary
/// point, plus a Region view for restriction. `whole` has no boundary and
/// only supports absolute-mode evaluation.
class FlatDomain {
 public:
  static FlatDomain whole(int dim = 2);
  static FlatDomain disk(Pt center, double radius, int dim = 2);
  static FlatDomain box(Pt lo, Pt hi);
  static FlatDomain triangle(Pt a, Pt b, Pt c);
  /// Convex polygon; vertices may be given in either orientation. Throws
  /// NonConvexDomain if the vertices do not bound a convex polygon.
  static FlatDomain convex_polygon(std::vector<Pt> verts);

  bool has_boundary() const { return kind_ != Kind::whole; }
  int dim() const { return dim_; }
  bool contains(const Pt& p) const;
  /// Distance from p to the domain boundary (valid inside or outside).
  double boundary_distance(const Pt& p) const;
  /// Nearest point of the boundary to p (deterministic on ties).
  Pt boundary_foot(const Pt& p) const;
  Region region() const;
  /// Tight axis-aligned bounding box; throws BadSpec for `whole`.
  void bbox(Pt& lo, Pt& hi) const;
  /// Area (dim 2) or ball volume (dim 3); throws BadSpec for `whole`.
  double volume() const;
  /// Polygon vertices (ccw) for polygonal domains; empty for disk/whole.
  const std::vector<Pt>& polygon() const { return verts_; }
  bool is_disk() const { return kind_ == Kind::disk; }
  Pt disk_center() const { return center_; }
  double disk_radius() const { return radius_; }

 private:
  enum class Kind { whole, disk, polygon };
  Kind kind_ = Kind::whole;
  int dim_ = 2;
  Pt center_{};
  double radius_ = 0.0;
  std::vector<Pt> verts_;  // ccw
};

/// Optimal decomposition z = alpha + boundary(beta): matched pairs are the
/// segments of beta, dropped points form alpha, boundary-projected points are
/// matched to their nearest boundary foot (relative mode only).
struct FlatWitness {
  double value = 0.0;
  int dim = 2;
  std::vector<std::pair<Pt, Pt>> matched_pairs;
  std::vector<Pt> dropped;
  std::vector<std::pair<Pt, Pt>> boundary_projected;

  /// Total cost recomputed from the decomposition.
  double recompute() const;
  /// The 1-chain beta realizing the witness (matching segments plus
  /// boundary-projection segments).
  OneChain filling() const;
  /// The residual 0-chain alpha (dropped points).
  ZeroChain residual() const;
};

/// Exact flat norm of a mod-2 0-cycle by reduction to maximum-weight
/// matching: each point either pairs with another (cost = distance), stays
/// as residual (cost 1), or — relative mode — projects to the domain
/// boundary (cost = boundary distance).
FlatWitness flat_norm(const ZeroChain& z, const FlatDomain& domain,
                      FlatMode mode);

/// Absolute flat norm with no domain.
FlatWitness flat_norm(const ZeroChain& z);

/// Exhaustive evaluation for cross-checking; throws TooLarge above 10 points.
double flat_norm_oracle(const ZeroChain& z, const FlatDomain& domain,
                        FlatMode mode);

/// Flat distance between two 0-cycles: flat_norm(a + b).
FlatWitness flat_distance(const ZeroChain& a, const ZeroChain& b,
                          const FlatDomain& domain, FlatMode mode);

struct FinenessViolation {
  Cell cell;  ///< minimal cell spanning the offending vertex pair
  std::vector<int> x, y;
  FlatWitness witness;
};

struct FinenessReport {
  bool fine = true;
  double eps = 0.0;
  double max_value = 0.0;  ///< largest pairwise flat distance seen
  std::size_t pairs_checked = 0;
  std::vector<FinenessViolation> violations;
};

/// Checks that the family jumps by flat distance at most eps between any two
/// vertices of a common cell; every unique pair is evaluated once and
/// violations are keyed by the minimal spanning cell.
FinenessReport check_fineness(const ZeroFamily& F, double eps,
                              const FlatDomain& domain, FlatMode mode,
                              const Exec& ex = {});

nlohmann::json witness_to_json(const FlatWitness& w);

}  // namespace cf
