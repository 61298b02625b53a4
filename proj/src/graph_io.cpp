#include "uds/graph_io.hpp"

#include <fstream>
#include <map>
#include <ostream>

#include "uds/error.hpp"

namespace uds {

using nlohmann::json;

void check_format_version(std::string_view version) {
  auto dot = version.find('.');
  std::string_view major = version.substr(0, dot);
  if (major != "1") {
    throw Error(ErrorCode::kUnsupportedVersion,
                "format_version '" + std::string(version) + "' is not supported (expected 1.x)");
  }
}

json attributes_to_json(const AttributeMap& attrs) {
  json out = json::object();
  for (const auto& [name, rec] : attrs) {
    out[name] = {{"value", rec.value}, {"confidence", rec.confidence}};
  }
  return out;
}

AttributeMap attributes_from_json(const json& j) {
  AttributeMap out;
  if (j.is_null()) return out;
  if (!j.is_object()) throw Error(ErrorCode::kParseError, "attributes must be an object");
  for (const auto& [name, rec] : j.items()) {
    if (!rec.is_object() || !rec.contains("value")) {
      throw Error(ErrorCode::kParseError, "attribute '" + name + "' needs a value");
    }
    AttributeRecord r;
    r.value = rec.at("value").get<double>();
    r.confidence = rec.value("confidence", 1.0);
    out.emplace(name, r);
  }
  return out;
}

json graph_to_json(const UDSGraph& g) {
  json j;
  j["format_version"] = std::string(kFormatVersion);
  j["sentence_id"] = g.sentence_id;
  json tokens = json::array();
  for (const auto& t : g.tokens) tokens.push_back({{"form", t.form}, {"pos", t.pos}});
  j["tokens"] = std::move(tokens);

  json nodes = json::array();
  for (const auto& n : g.nodes) {
    json node = {{"id", n.id}, {"kind", std::string(to_string(n.kind))}};
    if (n.label) node["label"] = *n.label;
    if (n.performative) node["performative"] = true;
    node["attributes"] = attributes_to_json(n.attributes);
    nodes.push_back(std::move(node));
  }
  j["semantics_nodes"] = std::move(nodes);

  json edges = json::array();
  for (const auto& e : g.edges) {
    edges.push_back({{"head", g.nodes.at(e.head).id},
                     {"dependent", g.nodes.at(e.dependent).id},
                     {"kind", "argument"},
                     {"attributes", attributes_to_json(e.attributes)}});
  }
  j["semantics_edges"] = std::move(edges);

  json instances = json::array();
  for (const auto& i : g.instances) {
    instances.push_back({{"node", g.nodes.at(i.node).id}, {"token", i.token}, {"head", i.head}});
  }
  j["instance_edges"] = std::move(instances);
  if (g.semantics_only) j["semantics_only"] = true;
  if (g.predicted) j["predicted"] = true;
  if (!g.split.empty()) j["split"] = g.split;
  return j;
}

UDSGraph graph_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kParseError, "graph record must be a JSON object");
  if (!j.contains("format_version")) {
    throw Error(ErrorCode::kParseError, "missing required field 'format_version'");
  }
  check_format_version(j.at("format_version").get<std::string>());

  UDSGraph g;
  try {
    g.sentence_id = j.at("sentence_id").get<std::string>();
    for (const auto& t : j.value("tokens", json::array())) {
      g.tokens.push_back({t.at("form").get<std::string>(), t.value("pos", std::string())});
    }
    std::map<std::string, std::size_t> index;
    for (const auto& n : j.value("semantics_nodes", json::array())) {
      SemanticNode node;
      node.id = n.at("id").get<std::string>();
      const auto kind = n.at("kind").get<std::string>();
      if (kind == "predicate") {
        node.kind = SemanticKind::kPredicate;
      } else if (kind == "argument") {
        node.kind = SemanticKind::kArgument;
      } else {
        throw Error(ErrorCode::kParseError, "unknown semantics node kind '" + kind + "'");
      }
      if (n.contains("label")) node.label = n.at("label").get<std::string>();
      node.performative = n.value("performative", false);
      node.attributes = attributes_from_json(n.value("attributes", json::object()));
      index.emplace(node.id, g.nodes.size());
      g.nodes.push_back(std::move(node));
    }
    auto lookup = [&](const json& id) {
      auto it = index.find(id.get<std::string>());
      if (it == index.end()) {
        throw Error(ErrorCode::kParseError, "reference to unknown node '" + id.get<std::string>() + "'");
      }
      return it->second;
    };
    for (const auto& e : j.value("semantics_edges", json::array())) {
      if (e.value("kind", std::string("argument")) != "argument") {
        throw Error(ErrorCode::kParseError, "semantics edge kind must be 'argument'");
      }
      g.edges.push_back({lookup(e.at("head")), lookup(e.at("dependent")),
                         attributes_from_json(e.value("attributes", json::object()))});
    }
    for (const auto& i : j.value("instance_edges", json::array())) {
      g.instances.push_back(
          {lookup(i.at("node")), i.at("token").get<std::size_t>(), i.value("head", false)});
    }
    g.semantics_only = j.value("semantics_only", false);
    g.predicted = j.value("predicted", false);
    g.split = j.value("split", std::string());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
  return g;
}

std::string dump_graph_line(const UDSGraph& g) { return graph_to_json(g).dump(); }

UDSGraph parse_graph_line(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
  return graph_from_json(j);
}

void write_graphs(std::ostream& out, const std::vector<UDSGraph>& graphs) {
  for (const auto& g : graphs) out << dump_graph_line(g) << '\n';
}

void write_graphs_file(const std::string& path, const std::vector<UDSGraph>& graphs) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  write_graphs(out, graphs);
}

}  // namespace uds
