#include "chainforge/chain_io.hpp"

#include <fstream>

#include "chainforge/errors.hpp"

namespace cf {

namespace {

nlohmann::json point_to_json(const Pt& p, int dim) {
  nlohmann::json a = nlohmann::json::array();
  for (int k = 0; k < dim; ++k) a.push_back(p[k]);
  return a;
}

Pt point_from_json(const nlohmann::json& j, int dim) {
  if (!j.is_array() || static_cast<int>(j.size()) != dim)
    throw BadSpec("point with wrong coordinate count");
  Pt p;
  for (int k = 0; k < dim; ++k) p[k] = j[k].get<double>();
  return p;
}

int dim_of(const nlohmann::json& j) {
  int dim = j.value("dim", 2);
  if (dim != 2 && dim != 3) throw BadSpec("ambient dim must be 2 or 3");
  return dim;
}

}  // namespace

nlohmann::json to_json(const ZeroChain& z) {
  nlohmann::json j;
  j["dim"] = z.dim();
  nlohmann::json pts = nlohmann::json::array();
  for (const Pt& p : z.points()) pts.push_back(point_to_json(p, z.dim()));
  j["zero"] = pts;
  return j;
}

nlohmann::json to_json(const OneChain& c) {
  nlohmann::json j;
  j["dim"] = c.dim();
  nlohmann::json segs = nlohmann::json::array();
  for (const Seg& s : c.segments())
    segs.push_back(nlohmann::json::array(
        {point_to_json(s.a, c.dim()), point_to_json(s.b, c.dim())}));
  j["one"] = segs;
  return j;
}

nlohmann::json chains_to_json(int dim, const ZeroChain& z, const OneChain& c) {
  nlohmann::json j = to_json(z);
  j["dim"] = dim;
  j["one"] = to_json(c)["one"];
  return j;
}

ZeroChain zero_from_json(const nlohmann::json& j) {
  int dim = dim_of(j);
  std::vector<Pt> pts;
  if (j.contains("zero")) {
    for (const auto& pj : j.at("zero")) pts.push_back(point_from_json(pj, dim));
  }
  return ZeroChain::of(dim, std::move(pts));
}

OneChain one_from_json(const nlohmann::json& j) {
  int dim = dim_of(j);
  std::vector<Seg> segs;
  if (j.contains("one")) {
    for (const auto& sj : j.at("one")) {
      if (!sj.is_array() || sj.size() != 2)
        throw BadSpec("segment must be a pair of points");
      segs.push_back({point_from_json(sj[0], dim), point_from_json(sj[1], dim)});
    }
  }
  return OneChain::of(dim, std::move(segs));
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw BadSpec("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw BadSpec("cannot open: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw BadSpec("invalid JSON in " + path + ": " + e.what());
  }
  return j;
}

}  // namespace cf
