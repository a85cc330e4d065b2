#include "chainforge/cubical.hpp"

#include <algorithm>
#include <sstream>

#include "chainforge/chain_io.hpp"

namespace cf {

bool cell_less(const Cell& a, const Cell& b) {
  if (a.dim() != b.dim()) return a.dim() < b.dim();
  if (a.anchor != b.anchor) return a.anchor < b.anchor;
  return a.axes < b.axes;
}

std::size_t CellHash::operator()(const Cell& c) const {
  std::size_t h = 1469598103934665603ull;
  auto mix = [&h](std::size_t v) {
    h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  };
  for (int a : c.anchor) mix(static_cast<std::size_t>(a) + 0x9e37);
  mix(c.axes);
  return h;
}

std::size_t VecIntHash::operator()(const std::vector<int>& v) const {
  std::size_t h = 1469598103934665603ull;
  for (int a : v) {
    h ^= static_cast<std::size_t>(a) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  }
  return h;
}

CubicalComplex::CubicalComplex(int d, int q) : d_(d), q_(q) {
  if (d < 1 || d > 8) throw BadSpec("embedding dimension out of range");
  if (q < 1) throw BadSpec("refinement level must be >= 1");
}

int CubicalComplex::dim() const {
  int m = 0;
  for (const Cell& c : cells_) m = std::max(m, c.dim());
  return m;
}

void CubicalComplex::add_cell(const Cell& c) {
  if (static_cast<int>(c.anchor.size()) != d_)
    throw BadSpec("cell anchor size does not match complex dimension");
  for (int i = 0; i < d_; ++i) {
    int hi = c.anchor[i] + (((c.axes >> i) & 1u) ? 1 : 0);
    if (c.anchor[i] < 0 || hi > q_) throw BadSpec("cell outside [0,1]^d grid");
  }
  if (!cells_.insert(c).second) return;  // already present with its faces
  for (const Cell& f : faces(c)) cells_.insert(f);
}

std::vector<Cell> CubicalComplex::cells_sorted() const {
  std::vector<Cell> out(cells_.begin(), cells_.end());
  std::sort(out.begin(), out.end(), cell_less);
  return out;
}

std::vector<Cell> CubicalComplex::cells_of_dim(int j) const {
  std::vector<Cell> out;
  for (const Cell& c : cells_)
    if (c.dim() == j) out.push_back(c);
  std::sort(out.begin(), out.end(), cell_less);
  return out;
}

std::vector<std::vector<int>> CubicalComplex::vertices() const {
  std::vector<std::vector<int>> out;
  for (const Cell& c : cells_)
    if (c.axes == 0) out.push_back(c.anchor);
  std::sort(out.begin(), out.end());
  return out;
}

CubicalComplex CubicalComplex::skeleton(int j) const {
  CubicalComplex out(d_, q_);
  for (const Cell& c : cells_)
    if (c.dim() <= j) out.cells_.insert(c);
  return out;
}

std::vector<std::vector<int>> CubicalComplex::cell_vertices(const Cell& c) {
  std::vector<std::vector<int>> out;
  const int k = c.dim();
  std::vector<int> axis_ids;
  for (int i = 0; i < 32; ++i)
    if ((c.axes >> i) & 1u) axis_ids.push_back(i);
  for (int b = 0; b < (1 << k); ++b) {
    std::vector<int> v = c.anchor;
    for (int t = 0; t < k; ++t)
      if ((b >> t) & 1) v[axis_ids[t]] += 1;
    out.push_back(std::move(v));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Cell> CubicalComplex::faces(const Cell& c) {
  std::vector<Cell> out;
  const int k = c.dim();
  std::vector<int> axis_ids;
  for (int i = 0; i < 32; ++i)
    if ((c.axes >> i) & 1u) axis_ids.push_back(i);
  // choose a proper subset of axes to keep, and a side for each dropped axis
  for (int keep = 0; keep < (1 << k); ++keep) {
    if (keep == (1 << k) - 1) continue;  // the cell itself
    std::vector<int> dropped;
    std::uint32_t axes = 0;
    for (int t = 0; t < k; ++t) {
      if ((keep >> t) & 1)
        axes |= (1u << axis_ids[t]);
      else
        dropped.push_back(axis_ids[t]);
    }
    const int nd = static_cast<int>(dropped.size());
    for (int side = 0; side < (1 << nd); ++side) {
      Cell f;
      f.anchor = c.anchor;
      f.axes = axes;
      for (int t = 0; t < nd; ++t)
        if ((side >> t) & 1) f.anchor[dropped[t]] += 1;
      out.push_back(std::move(f));
    }
  }
  return out;
}

CubicalComplex CubicalComplex::cube(int d, int q) {
  CubicalComplex out(d, q);
  // insert all top cells; faces come with closure
  std::vector<int> idx(d, 0);
  for (;;) {
    Cell top;
    top.anchor = idx;
    top.axes = (1u << d) - 1u;
    out.add_cell(top);
    int i = 0;
    for (; i < d; ++i) {
      if (++idx[i] < q) break;
      idx[i] = 0;
    }
    if (i == d) break;
  }
  return out;
}

CubicalComplex refine(const CubicalComplex& X, int qprime) {
  if (qprime < 1 || qprime % 2 == 0)
    throw BadSpec("refinement factor must be odd and >= 1");
  CubicalComplex out(X.d(), X.q() * qprime);
  for (const Cell& c : X.cells_sorted()) {
    const int k = c.dim();
    std::vector<int> axis_ids;
    for (int i = 0; i < 32; ++i)
      if ((c.axes >> i) & 1u) axis_ids.push_back(i);
    std::vector<int> off(k, 0);
    for (;;) {
      Cell sub;
      sub.anchor.resize(c.anchor.size());
      for (std::size_t i = 0; i < c.anchor.size(); ++i)
        sub.anchor[i] = c.anchor[i] * qprime;
      for (int t = 0; t < k; ++t) sub.anchor[axis_ids[t]] += off[t];
      sub.axes = c.axes;
      out.add_cell(sub);
      int t = 0;
      for (; t < k; ++t) {
        if (++off[t] < qprime) break;
        off[t] = 0;
      }
      if (t == k) break;
    }
  }
  return out;
}

std::vector<int> nearest_original_vertex(const std::vector<int>& v, int qprime) {
  if (qprime < 1 || qprime % 2 == 0)
    throw BadSpec("refinement factor must be odd and >= 1");
  std::vector<int> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] < 0) throw BadSpec("negative lattice coordinate");
    out[i] = (v[i] + (qprime - 1) / 2) / qprime;
  }
  return out;
}

Cell parent_cell(const Cell& c, int qprime) {
  if (qprime < 1) throw BadSpec("refinement factor must be >= 1");
  Cell out;
  out.anchor.resize(c.anchor.size());
  for (std::size_t i = 0; i < c.anchor.size(); ++i) {
    const int a = c.anchor[i];
    if (a < 0) throw BadSpec("negative lattice coordinate");
    out.anchor[i] = a / qprime;
    const bool extends = (c.axes >> i) & 1u;
    if (extends || a % qprime != 0) out.axes |= (1u << i);
  }
  return out;
}

double phi_squeeze(double x) {
  if (x <= 1.0 / 3.0) return 0.0;
  if (x >= 2.0 / 3.0) return 1.0;
  return 3.0 * (x - 1.0 / 3.0);
}

std::vector<double> xi(const std::vector<double>& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = phi_squeeze(x[i]);
  return out;
}

Cell center_subcell(const Cell& c) {
  Cell out;
  out.anchor.resize(c.anchor.size());
  for (std::size_t i = 0; i < c.anchor.size(); ++i) {
    out.anchor[i] = 3 * c.anchor[i];
    if ((c.axes >> i) & 1u) out.anchor[i] += 1;
  }
  out.axes = c.axes;
  return out;
}

VertexMetrics vertex_metrics(const CubicalComplex& X, const std::vector<int>& x,
                             const std::vector<int>& y) {
  if (x.size() != y.size() || static_cast<int>(x.size()) != X.d())
    throw BadSpec("vertex coordinate size mismatch");
  Cell common;
  common.anchor.resize(x.size());
  int dmax = 0, dsum = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    int lo = std::min(x[i], y[i]);
    int gap = std::abs(x[i] - y[i]);
    if (gap > 1) throw NotInCommonCell("vertices more than one lattice step apart");
    common.anchor[i] = lo;
    if (gap == 1) common.axes |= (1u << i);
    dmax = std::max(dmax, gap);
    dsum += gap;
  }
  if (!X.has(common)) throw NotInCommonCell("spanning cell not in complex");
  const double q = static_cast<double>(X.q());
  return {dmax / q, dsum / q, static_cast<double>(dsum)};
}

// -------------------------------------------------------------------- JSON

nlohmann::json complex_to_json(const CubicalComplex& X) {
  nlohmann::json j;
  j["d"] = X.d();
  j["q"] = X.q();
  nlohmann::json cells = nlohmann::json::array();
  for (const Cell& c : X.cells_sorted()) {
    nlohmann::json cj;
    cj["anchor"] = c.anchor;
    nlohmann::json axes = nlohmann::json::array();
    for (int i = 0; i < 32; ++i)
      if ((c.axes >> i) & 1u) axes.push_back(i);
    cj["axes"] = axes;
    cells.push_back(std::move(cj));
  }
  j["cells"] = cells;
  return j;
}

CubicalComplex complex_from_json(const nlohmann::json& j) {
  CubicalComplex X(j.at("d").get<int>(), j.at("q").get<int>());
  for (const auto& cj : j.at("cells")) {
    Cell c;
    c.anchor = cj.at("anchor").get<std::vector<int>>();
    for (int a : cj.at("axes").get<std::vector<int>>()) {
      if (a < 0 || a >= X.d()) throw BadSpec("cell axis out of range");
      c.axes |= (1u << a);
    }
    X.add_cell(c);
  }
  return X;
}

std::string vertex_key_string(const std::vector<int>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ",";
    os << v[i];
  }
  return os.str();
}

std::vector<int> vertex_key_parse(const std::string& s) {
  std::vector<int> out;
  std::istringstream is(s);
  std::string tok;
  while (std::getline(is, tok, ',')) out.push_back(std::stoi(tok));
  return out;
}

namespace {

template <class ChainT, class ToJson>
nlohmann::json family_to_json_impl(const VertexMap<ChainT>& F, ToJson to) {
  nlohmann::json j;
  j["complex"] = complex_to_json(F.complex);
  j["provenance"] = F.provenance;
  nlohmann::json vals = nlohmann::json::object();
  // deterministic key order
  for (const auto& v : F.complex.vertices()) {
    auto it = F.values.find(v);
    if (it != F.values.end()) vals[vertex_key_string(v)] = to(it->second);
  }
  j["values"] = vals;
  return j;
}

}  // namespace

nlohmann::json family_to_json(const ZeroFamily& F) {
  return family_to_json_impl(F, [](const ZeroChain& z) { return to_json(z); });
}

nlohmann::json family_to_json(const OneFamily& F) {
  return family_to_json_impl(F, [](const OneChain& c) { return to_json(c); });
}

ZeroFamily zero_family_from_json(const nlohmann::json& j) {
  ZeroFamily F;
  F.complex = complex_from_json(j.at("complex"));
  F.provenance = j.value("provenance", "");
  for (const auto& [key, val] : j.at("values").items())
    F.values.emplace(vertex_key_parse(key), zero_from_json(val));
  return F;
}

OneFamily one_family_from_json(const nlohmann::json& j) {
  OneFamily F;
  F.complex = complex_from_json(j.at("complex"));
  F.provenance = j.value("provenance", "");
  for (const auto& [key, val] : j.at("values").items())
    F.values.emplace(vertex_key_parse(key), one_from_json(val));
  return F;
}

}  // namespace cf
