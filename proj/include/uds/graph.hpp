#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "uds/attributes.hpp"

namespace uds {

inline constexpr std::string_view kSomethingLabel = "SOMETHING";

struct Token {
  std::string form;
  std::string pos;

  bool operator==(const Token&) const = default;
};

enum class SemanticKind { kPredicate, kArgument };

std::string_view to_string(SemanticKind kind);

struct SemanticNode {
  std::string id;
  SemanticKind kind = SemanticKind::kPredicate;
  // Explicit lexical label. Absent for ordinary graphs, where the label is
  // derived from the head token; required for semantics-only graphs.
  std::optional<std::string> label;
  bool performative = false;
  AttributeMap attributes;

  bool operator==(const SemanticNode&) const = default;
};

// Semantics edges are always of kind "argument".
struct SemanticEdge {
  std::size_t head = 0;
  std::size_t dependent = 0;
  AttributeMap attributes;

  bool operator==(const SemanticEdge&) const = default;
};

// Semantics node -> syntax node (token). Exactly one instance edge per
// semantics node carries head = true.
struct InstanceEdge {
  std::size_t node = 0;
  std::size_t token = 0;
  bool head = false;

  bool operator==(const InstanceEdge&) const = default;
};

// Two-level graph: one syntax node per token, semantics nodes tied to tokens
// through instance edges.
struct UDSGraph {
  std::string sentence_id;
  std::vector<Token> tokens;
  std::vector<SemanticNode> nodes;
  std::vector<SemanticEdge> edges;
  std::vector<InstanceEdge> instances;
  // Set by semantic_subgraph: no tokens, no instance edges, explicit labels.
  bool semantics_only = false;
  bool predicted = false;
  std::string split;

  bool operator==(const UDSGraph&) const = default;

  std::optional<std::size_t> find_node(std::string_view id) const;
};

enum class Violation {
  kDuplicateId,
  kMissingInstance,
  kMissingHead,
  kMultipleHeads,
  kDuplicateInstance,
  kTokenRange,
  kNodeRange,
  kSelfLoop,
  kDuplicateEdge,
  kUnknownAttr,
  kMisplacedAttr,
  kValueRange,
  kConfidenceRange,
  kMissingLabel,
  kSyntaxInSemanticsOnly,
};

std::string_view to_string(Violation v);

struct ValidationError {
  Violation code;
  std::string location;
  std::string message;

  bool operator==(const ValidationError&) const = default;
};

struct ValidationReport {
  std::vector<ValidationError> errors;

  bool is_valid() const { return errors.empty(); }
  bool has(Violation code) const;
  std::string summary() const;

  bool operator==(const ValidationReport&) const = default;
};

ValidationReport validate_graph(const UDSGraph& g);

// Removes speaker/author/addressee placeholder nodes (flagged performative)
// together with every incident semantics and instance edge.
UDSGraph strip_performative_nodes(const UDSGraph& g);

// Drops syntax nodes and instance edges. Each semantics node receives an
// explicit label equal to lexical_label() in the input graph.
UDSGraph semantic_subgraph(const UDSGraph& g);

// Head token of a semantics node, if one is designated.
std::optional<std::size_t> head_token(const UDSGraph& g, std::size_t node);

// Tokens tied to a semantics node, ascending and distinct.
std::vector<std::size_t> node_yield(const UDSGraph& g, std::size_t node);

// True for an argument node with an outgoing edge to a predicate
// (clausal embedding).
bool is_embedded_argument(const UDSGraph& g, std::size_t node);

// Explicit label if present, SOMETHING for embedded arguments, otherwise the
// form of the head token. Throws MISSING_HEAD when nothing applies.
std::string lexical_label(const UDSGraph& g, std::size_t node);

}  // namespace uds
