#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "uds/graph.hpp"

namespace uds {

// Interchange format version written by this build. Readers accept any
// "1.x" and reject other major versions.
inline constexpr std::string_view kFormatVersion = "1.0";

// Throws UNSUPPORTED_VERSION for an unknown major version.
void check_format_version(std::string_view version);

nlohmann::json graph_to_json(const UDSGraph& g);
UDSGraph graph_from_json(const nlohmann::json& j);

std::string dump_graph_line(const UDSGraph& g);
UDSGraph parse_graph_line(std::string_view line);

void write_graphs(std::ostream& out, const std::vector<UDSGraph>& graphs);
void write_graphs_file(const std::string& path, const std::vector<UDSGraph>& graphs);

nlohmann::json attributes_to_json(const AttributeMap& attrs);
AttributeMap attributes_from_json(const nlohmann::json& j);

}  // namespace uds
