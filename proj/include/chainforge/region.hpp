/// @file region.hpp
/// @brief Regions of the ambient domain with a total membership predicate and
/// exact segment-crossing parameters — the support machinery for restriction
/// and slicing of chains.
#pragma once

#include <memory>
#include <vector>

#include "chainforge/geom.hpp"

namespace cf {

class Region {
 public:
  /// Total, deterministic membership predicate.
  bool contains(const Pt& p) const;

  /// Parameters t in (0,1), sorted and deduplicated, where the segment [a,b]
  /// crosses the region boundary. Throws DegenerateCrossing when [a,b] hugs a
  /// boundary surface over positive length (near-tangency, on-plane lies).
  std::vector<double> crossings(const Pt& a, const Pt& b) const;

  /// Conservative axis-aligned bounding box; false when unbounded.
  bool bbox(Pt& lo, Pt& hi) const;

  /// Everything (the ambient domain itself).
  static Region whole();
  /// Closed Euclidean ball.
  static Region ball(const Pt& center, double radius);
  /// Open unit ball (the disk interior int(D^n)).
  static Region disk_interior();
  /// Closed geodesic cap on the unit sphere S^{n-1}: points p with |p| = 1
  /// (within tolerance) and angle(p, e) <= L.
  static Region boundary_cap(const Pt& e, double L);
  /// Closed halfspace normal·x <= offset.
  static Region halfspace(const Pt& normal, double offset);
  /// Closed planar triangle (z = 0).
  static Region triangle(const Pt& a, const Pt& b, const Pt& c);
  static Region complement(const Region& r);
  static Region intersection(std::vector<Region> rs);
  static Region union_of(std::vector<Region> rs);

  struct Impl;

 private:
  std::shared_ptr<const Impl> impl_;
  explicit Region(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
};

}  // namespace cf
