/// @file chain.hpp
/// @brief Mod-2 polyhedral chains: finite point sets (0-chains), segment
/// collections (1-chains) and triangle collections (2-chains, planar only),
/// with boundary, restriction, sphere slicing and cone filling.
///
/// All values are immutable after construction and all operations are pure.
/// Canonical form: lexicographically sorted pieces with parity-cancelled
/// duplicates (coincidence within eps_geom()).
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "chainforge/geom.hpp"
#include "chainforge/region.hpp"

namespace cf {

/// Finite mod-2 weighted point set. mass = cardinality.
class ZeroChain {
 public:
  ZeroChain() = default;
  explicit ZeroChain(int dim) : dim_(dim) {}
  /// Builds the canonical form: sorts and cancels coincident pairs mod 2.
  static ZeroChain of(int dim, std::vector<Pt> pts);

  int dim() const { return dim_; }
  const std::vector<Pt>& points() const { return pts_; }
  std::size_t mass() const { return pts_.size(); }
  bool empty() const { return pts_.empty(); }
  /// Canonical equality (pointwise within eps_geom).
  bool operator==(const ZeroChain& o) const;

 private:
  int dim_ = 2;
  std::vector<Pt> pts_;
};

struct Seg {
  Pt a, b;
  double length() const { return dist(a, b); }
};

/// Finite collection of segments mod 2. mass = total length. Segments equal
/// as unordered endpoint pairs (within eps_geom) cancel; overlapping but
/// unequal segments do not (mass is then an upper bound on flat-chain mass).
class OneChain {
 public:
  OneChain() = default;
  explicit OneChain(int dim) : dim_(dim) {}
  static OneChain of(int dim, std::vector<Seg> segs);

  int dim() const { return dim_; }
  const std::vector<Seg>& segments() const { return segs_; }
  double mass() const;
  bool empty() const { return segs_.empty(); }
  bool operator==(const OneChain& o) const;

 private:
  int dim_ = 2;
  std::vector<Seg> segs_;
};

struct Tri {
  Pt a, b, c;
  double area() const;
};

/// Finite collection of nondegenerate triangles mod 2, planar ambient only.
/// mass = total area.
class TwoChain {
 public:
  TwoChain() = default;
  static TwoChain of(std::vector<Tri> tris);

  int dim() const { return 2; }
  const std::vector<Tri>& triangles() const { return tris_; }
  double mass() const;
  bool empty() const { return tris_.empty(); }

 private:
  std::vector<Tri> tris_;
};

/// Mod-2 sum (symmetric difference) of 0-chains.
ZeroChain add_zero(const ZeroChain& a, const ZeroChain& b);
/// Mod-2 sum of 1-chains (exactly-equal segments cancel).
OneChain add_one(const OneChain& a, const OneChain& b);
/// Mod-2 sum of 2-chains.
TwoChain add_two(const TwoChain& a, const TwoChain& b);

/// Boundary of a 1-chain: mod-2 reduction of all segment endpoints.
ZeroChain boundary_one(const OneChain& c);
/// Boundary of a 2-chain: mod-2 reduction of all triangle edges.
OneChain boundary_two(const TwoChain& t);

/// Restriction of a 0-chain: the points inside A.
ZeroChain restrict_zero(const ZeroChain& z, const Region& A);
/// Restriction of a 1-chain: segments clipped at the region boundary, pieces
/// inside retained. Throws DegenerateCrossing on boundary-hugging segments.
OneChain restrict_one(const OneChain& c, const Region& A);

/// Mod-2 support reduction of collinear overlaps: segments on a common line
/// are fragmented at every endpoint parameter, even-multiplicity fragments
/// cancel, and maximal odd runs are merged back into single segments. After
/// reduction mass() is the exact measure of the mod-2 support, so a + a
/// reduces to empty and partial overlaps leave only the symmetric
/// difference. Segments on distinct lines pass through unchanged.
OneChain reduce_overlaps(const OneChain& c);

/// Transversal intersection of a 1-chain with the sphere |x - center| = s,
/// mod-2 reduced. Throws TangencyError on near-tangent configurations.
ZeroChain slice_sphere(const OneChain& c, const Pt& center, double s);

/// Number of transversal sphere crossings (the mass of slice_sphere) without
/// constructing the chain and without tangency errors: radii at breakpoints
/// are counted by the open-interval rule.
std::size_t slice_count(const OneChain& c, const Pt& center, double s);

/// Radii at which slice_count(c, center, s) changes, sorted ascending. The
/// slice count is piecewise constant between consecutive breakpoints.
std::vector<double> slice_breakpoints(const OneChain& c, const Pt& center);

/// Cone over a 0-chain: one segment apex -> p per point. boundary = z when
/// mass(z) is even (apex copies cancel in pairs); z + {apex} when odd.
OneChain cone_fill(const ZeroChain& z, const Pt& apex);

/// Cone over a 1-chain (planar): one triangle (apex, a, b) per segment;
/// boundary = c + cone_fill(boundary_one(c), apex).
TwoChain cone_fill_one(const OneChain& c, const Pt& apex);

/// Stable byte encoding of the canonical form; used as memo key.
std::string canonical_key(const OneChain& c);
std::string canonical_key(const ZeroChain& z);

}  // namespace cf
