/// @file chain_io.hpp
/// @brief JSON serialization of chains:
///   {"dim": n, "zero": [[x,y,(z)],...], "one": [[[x1,...],[x2,...]],...]}
/// Coordinates are decimal doubles; planar data carries two coordinates.
#pragma once

#include <string>

#include <json.hpp>

#include "chainforge/chain.hpp"

namespace cf {

nlohmann::json to_json(const ZeroChain& z);
nlohmann::json to_json(const OneChain& c);
/// Combined form holding a 0-chain and/or a 1-chain of the same dimension.
nlohmann::json chains_to_json(int dim, const ZeroChain& z, const OneChain& c);

ZeroChain zero_from_json(const nlohmann::json& j);
OneChain one_from_json(const nlohmann::json& j);

void write_json_file(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::string& path);

}  // namespace cf
