#include "uds/graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_set>

#include "uds/error.hpp"

namespace uds {

std::string_view to_string(SemanticKind kind) {
  return kind == SemanticKind::kPredicate ? "predicate" : "argument";
}

std::string_view to_string(Violation v) {
  switch (v) {
    case Violation::kDuplicateId: return "DUPLICATE_ID";
    case Violation::kMissingInstance: return "MISSING_INSTANCE";
    case Violation::kMissingHead: return "MISSING_HEAD";
    case Violation::kMultipleHeads: return "MULTIPLE_HEADS";
    case Violation::kDuplicateInstance: return "DUPLICATE_INSTANCE";
    case Violation::kTokenRange: return "TOKEN_RANGE";
    case Violation::kNodeRange: return "NODE_RANGE";
    case Violation::kSelfLoop: return "SELF_LOOP";
    case Violation::kDuplicateEdge: return "DUPLICATE_EDGE";
    case Violation::kUnknownAttr: return "UNKNOWN_ATTR";
    case Violation::kMisplacedAttr: return "MISPLACED_ATTR";
    case Violation::kValueRange: return "VALUE_RANGE";
    case Violation::kConfidenceRange: return "CONFIDENCE_RANGE";
    case Violation::kMissingLabel: return "MISSING_LABEL";
    case Violation::kSyntaxInSemanticsOnly: return "SYNTAX_IN_SEMANTICS_ONLY";
  }
  return "UNKNOWN";
}

std::optional<std::size_t> UDSGraph::find_node(std::string_view id) const {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].id == id) return i;
  }
  return std::nullopt;
}

bool ValidationReport::has(Violation code) const {
  return std::any_of(errors.begin(), errors.end(),
                     [code](const ValidationError& e) { return e.code == code; });
}

std::string ValidationReport::summary() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (i) out << "; ";
    out << to_string(errors[i].code) << " at " << errors[i].location << ": " << errors[i].message;
  }
  return out.str();
}

namespace {

enum class Carrier { kNode, kEdge };

void check_attributes(const AttributeMap& attrs, Carrier carrier, const std::string& where,
                      std::vector<ValidationError>& errors) {
  for (const auto& [name, rec] : attrs) {
    const std::string loc = where + "/" + name;
    const bool is_node = AttributeInventory::node_index(name).has_value();
    const bool is_edge = AttributeInventory::edge_index(name).has_value();
    if (!is_node && !is_edge) {
      errors.push_back({Violation::kUnknownAttr, loc, "property not in inventory"});
      continue;
    }
    if ((carrier == Carrier::kNode && !is_node) || (carrier == Carrier::kEdge && !is_edge)) {
      errors.push_back({Violation::kMisplacedAttr, loc,
                        carrier == Carrier::kNode ? "edge property on a node"
                                                  : "node property on an edge"});
    }
    if (!std::isfinite(rec.value) || rec.value < kMinAttributeValue ||
        rec.value > kMaxAttributeValue) {
      errors.push_back({Violation::kValueRange, loc, "value outside [-3,3]"});
    }
    if (!std::isfinite(rec.confidence) || rec.confidence < 0.0 || rec.confidence > 1.0) {
      errors.push_back({Violation::kConfidenceRange, loc, "confidence outside [0,1]"});
    }
  }
}

}  // namespace

ValidationReport validate_graph(const UDSGraph& g) {
  ValidationReport report;
  auto& errors = report.errors;

  std::set<std::string> ids;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const auto& n = g.nodes[i];
    const std::string where = "node[" + n.id + "]";
    if (!ids.insert(n.id).second) {
      errors.push_back({Violation::kDuplicateId, where, "node id used twice"});
    }
    check_attributes(n.attributes, Carrier::kNode, where, errors);
    if (g.semantics_only && !n.label) {
      errors.push_back({Violation::kMissingLabel, where, "semantics-only node without label"});
    }
  }

  if (g.semantics_only && (!g.tokens.empty() || !g.instances.empty())) {
    errors.push_back({Violation::kSyntaxInSemanticsOnly, "graph",
                      "semantics-only graph carries tokens or instance edges"});
  }

  std::set<std::pair<std::size_t, std::size_t>> edge_keys;
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    const auto& edge = g.edges[e];
    const std::string where = "edge[" + std::to_string(e) + "]";
    if (edge.head >= g.nodes.size() || edge.dependent >= g.nodes.size()) {
      errors.push_back({Violation::kNodeRange, where, "endpoint is not a semantics node"});
      continue;
    }
    if (edge.head == edge.dependent) {
      errors.push_back({Violation::kSelfLoop, where, "semantics edge from a node to itself"});
    }
    if (!edge_keys.insert({edge.head, edge.dependent}).second) {
      errors.push_back({Violation::kDuplicateEdge, where, "parallel semantics edge"});
    }
    check_attributes(edge.attributes, Carrier::kEdge, where, errors);
  }

  if (!g.semantics_only) {
    std::vector<std::size_t> instance_count(g.nodes.size(), 0);
    std::vector<std::size_t> head_count(g.nodes.size(), 0);
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (std::size_t k = 0; k < g.instances.size(); ++k) {
      const auto& inst = g.instances[k];
      const std::string where = "instance[" + std::to_string(k) + "]";
      if (inst.node >= g.nodes.size()) {
        errors.push_back({Violation::kNodeRange, where, "source is not a semantics node"});
        continue;
      }
      if (inst.token >= g.tokens.size()) {
        errors.push_back({Violation::kTokenRange, where, "target token out of range"});
        continue;
      }
      if (!seen.insert({inst.node, inst.token}).second) {
        errors.push_back({Violation::kDuplicateInstance, where, "repeated instance edge"});
        continue;
      }
      ++instance_count[inst.node];
      if (inst.head) ++head_count[inst.node];
    }
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      const std::string where = "node[" + g.nodes[i].id + "]";
      // speaker/addressee placeholders have no tokens
      if (g.nodes[i].performative && instance_count[i] == 0) continue;
      if (instance_count[i] == 0) {
        errors.push_back({Violation::kMissingInstance, where, "no instance edge"});
      } else if (head_count[i] == 0) {
        errors.push_back({Violation::kMissingHead, where, "no head instance edge"});
      } else if (head_count[i] > 1) {
        errors.push_back({Violation::kMultipleHeads, where, "more than one head instance edge"});
      }
    }
  }
  return report;
}

UDSGraph strip_performative_nodes(const UDSGraph& g) {
  UDSGraph out = g;
  out.nodes.clear();
  out.edges.clear();
  out.instances.clear();

  std::vector<std::optional<std::size_t>> remap(g.nodes.size());
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    if (g.nodes[i].performative) continue;
    remap[i] = out.nodes.size();
    out.nodes.push_back(g.nodes[i]);
  }
  auto mapped = [&](std::size_t i) -> std::optional<std::size_t> {
    return i < remap.size() ? remap[i] : std::nullopt;
  };
  for (const auto& e : g.edges) {
    auto h = mapped(e.head);
    auto d = mapped(e.dependent);
    if (h && d) out.edges.push_back({*h, *d, e.attributes});
  }
  for (const auto& inst : g.instances) {
    if (auto n = mapped(inst.node)) out.instances.push_back({*n, inst.token, inst.head});
  }
  return out;
}

std::optional<std::size_t> head_token(const UDSGraph& g, std::size_t node) {
  for (const auto& inst : g.instances) {
    if (inst.node == node && inst.head) return inst.token;
  }
  return std::nullopt;
}

std::vector<std::size_t> node_yield(const UDSGraph& g, std::size_t node) {
  std::vector<std::size_t> out;
  for (const auto& inst : g.instances) {
    if (inst.node == node) out.push_back(inst.token);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool is_embedded_argument(const UDSGraph& g, std::size_t node) {
  if (g.nodes[node].kind != SemanticKind::kArgument) return false;
  return std::any_of(g.edges.begin(), g.edges.end(), [&](const SemanticEdge& e) {
    return e.head == node && e.dependent < g.nodes.size() &&
           g.nodes[e.dependent].kind == SemanticKind::kPredicate;
  });
}

std::string lexical_label(const UDSGraph& g, std::size_t node) {
  const auto& n = g.nodes.at(node);
  if (n.label) return *n.label;
  if (is_embedded_argument(g, node)) return std::string(kSomethingLabel);
  auto head = head_token(g, node);
  if (!head || *head >= g.tokens.size()) {
    throw Error(ErrorCode::kMissingHead, "semantics node '" + n.id + "' has no head token");
  }
  return g.tokens[*head].form;
}

UDSGraph semantic_subgraph(const UDSGraph& g) {
  UDSGraph out;
  out.sentence_id = g.sentence_id;
  out.predicted = g.predicted;
  out.split = g.split;
  out.semantics_only = true;
  out.edges = g.edges;
  out.nodes.reserve(g.nodes.size());
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    SemanticNode n = g.nodes[i];
    n.label = lexical_label(g, i);
    out.nodes.push_back(std::move(n));
  }
  return out;
}

}  // namespace uds
