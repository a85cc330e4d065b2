/// @file cubical.hpp
/// @brief Parameter-side combinatorics: sparse cubical complexes on the unit
/// cube, refinement, skeleta, the squeeze map, vertex metrics, and total
/// vertex-to-chain assignments (discrete families).
#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "chainforge/chain.hpp"
#include "chainforge/errors.hpp"

namespace cf {

/// One axis-aligned cell of the grid on [0,1]^d at refinement level q.
/// `anchor` is the lexicographically least vertex in units of 1/q; `axes` is
/// the bitmask of directions the cell extends along (by one grid step).
struct Cell {
  std::vector<int> anchor;
  std::uint32_t axes = 0;

  int dim() const { return __builtin_popcount(axes); }
  bool operator==(const Cell&) const = default;
};

bool cell_less(const Cell& a, const Cell& b);

struct CellHash {
  std::size_t operator()(const Cell& c) const;
};

struct VecIntHash {
  std::size_t operator()(const std::vector<int>& v) const;
};

/// Face-closed set of cells of I^d(q).
class CubicalComplex {
 public:
  CubicalComplex() = default;
  CubicalComplex(int d, int q);

  int d() const { return d_; }
  int q() const { return q_; }
  /// Maximum cell dimension present.
  int dim() const;
  std::size_t size() const { return cells_.size(); }

  /// Inserts the cell and all of its faces.
  void add_cell(const Cell& c);
  bool has(const Cell& c) const { return cells_.count(c) > 0; }

  /// All cells in deterministic (dimension, lexicographic) order.
  std::vector<Cell> cells_sorted() const;
  std::vector<Cell> cells_of_dim(int j) const;
  /// Vertex anchors, sorted.
  std::vector<std::vector<int>> vertices() const;

  /// The j-skeleton as a complex.
  CubicalComplex skeleton(int j) const;

  /// All 2^dim vertices of a cell, sorted.
  static std::vector<std::vector<int>> cell_vertices(const Cell& c);
  /// All proper faces of a cell (every dimension below dim(c)).
  static std::vector<Cell> faces(const Cell& c);

  /// The full cube [0,1]^d at refinement level q (every cell).
  static CubicalComplex cube(int d, int q = 1);

 private:
  int d_ = 1;
  int q_ = 1;
  std::unordered_set<Cell, CellHash> cells_;
};

/// q'-refinement: the same polyhedron as a subcomplex of I^d(q*q').
/// q' must be odd (so nearest-original-vertex lookups are unique).
CubicalComplex refine(const CubicalComplex& X, int qprime);

/// Nearest original-lattice vertex of a refined vertex, in original units:
/// component-wise nearest integer to v_i / q'. Unique because q' is odd.
std::vector<int> nearest_original_vertex(const std::vector<int>& v, int qprime);

/// The minimal cell of the unrefined lattice containing a level-(q*q')
/// cell (anchors in original units). Its dimension is at least dim(c).
Cell parent_cell(const Cell& c, int qprime);

/// The piecewise-linear squeeze: 0 on [0,1/3], 3(x-1/3) on [1/3,2/3], 1 after.
double phi_squeeze(double x);
/// Coordinate-wise squeeze of a point of a cell identified with [0,1]^j.
std::vector<double> xi(const std::vector<double>& x);

/// The closed central subcell of C under 3-refinement: the points of C at
/// sup-distance >= 1/3 from the cell boundary (anchor in units of 1/(3q)).
Cell center_subcell(const Cell& c);

struct VertexMetrics {
  double d0;  ///< max coordinate gap
  double d1;  ///< sum of coordinate gaps
  double dq;  ///< q * d1 = lattice hop count
};

/// Metrics between two vertices of a common cell of X (anchors at level q).
/// Throws NotInCommonCell otherwise.
VertexMetrics vertex_metrics(const CubicalComplex& X, const std::vector<int>& x,
                             const std::vector<int>& y);

/// Total assignment of chains to the 0-skeleton of a complex.
template <class ChainT>
struct VertexMap {
  CubicalComplex complex;
  std::unordered_map<std::vector<int>, ChainT, VecIntHash> values;
  std::string provenance;

  const ChainT& at(const std::vector<int>& v) const {
    auto it = values.find(v);
    if (it == values.end()) throw BadSpec("family undefined at a vertex");
    return it->second;
  }

  bool total() const {
    for (const auto& v : complex.vertices())
      if (!values.count(v)) return false;
    return true;
  }
};

using ZeroFamily = VertexMap<ZeroChain>;
using OneFamily = VertexMap<OneChain>;

/// R^{q'}F: the refined-complex family constant on the nearest-original-vertex
/// blocks. q' must be odd.
template <class ChainT>
VertexMap<ChainT> refine_family(const VertexMap<ChainT>& F, int qprime) {
  VertexMap<ChainT> out;
  out.complex = refine(F.complex, qprime);
  out.provenance = F.provenance.empty() ? "refined" : F.provenance + "|refined";
  for (const auto& v : out.complex.vertices()) {
    std::vector<int> orig = nearest_original_vertex(v, qprime);
    out.values.emplace(v, F.at(orig));
  }
  return out;
}

// ------------------------------------------------------------------- JSON IO

nlohmann::json complex_to_json(const CubicalComplex& X);
CubicalComplex complex_from_json(const nlohmann::json& j);

std::string vertex_key_string(const std::vector<int>& v);
std::vector<int> vertex_key_parse(const std::string& s);

nlohmann::json family_to_json(const ZeroFamily& F);
ZeroFamily zero_family_from_json(const nlohmann::json& j);
nlohmann::json family_to_json(const OneFamily& F);
OneFamily one_family_from_json(const nlohmann::json& j);

}  // namespace cf
