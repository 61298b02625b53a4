#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "uds/graph.hpp"

namespace uds {

inline constexpr std::string_view kRootLabel = "<root>";

enum class NodeKind { kRoot, kPredicate, kArgument, kSyntax };
enum class Relation { kArgument = 0, kNonHead = 1, kRoot = 2 };
inline constexpr std::size_t kRelationCount = 3;

std::string_view to_string(NodeKind kind);
std::string_view to_string(Relation rel);
NodeKind node_kind_from_string(std::string_view s);
Relation relation_from_string(std::string_view s);

inline bool is_semantic(NodeKind k) { return k == NodeKind::kPredicate || k == NodeKind::kArgument; }

struct ArbNode {
  std::string label;
  NodeKind kind = NodeKind::kSyntax;
  std::optional<std::size_t> token;
  // Identity of the source semantics node; empty for root, syntax nodes and
  // duplicates.
  std::string node_id;
  AttributeMap attributes;
  // Set on duplicated (re-entrant) nodes: index of the antecedent.
  std::optional<std::size_t> copy_of;

  bool operator==(const ArbNode&) const = default;
};

struct ArbEdge {
  std::size_t head = 0;
  std::size_t dependent = 0;
  Relation relation = Relation::kArgument;
  AttributeMap attributes;

  bool operator==(const ArbEdge&) const = default;
};

// Single-rooted tree form of a UDSGraph. Node 0 is the synthetic root.
struct Arborescence {
  std::string sentence_id;
  std::vector<Token> tokens;
  std::vector<ArbNode> nodes;
  std::vector<ArbEdge> edges;
  std::size_t root = 0;

  bool operator==(const Arborescence&) const = default;

  // Incoming edge per node (nullopt for the root).
  std::vector<std::optional<std::size_t>> incoming_edges() const;
  std::vector<std::vector<std::size_t>> children() const;
  // Display form of a label: duplicates get a parenthesised ordinal, e.g. "Bush(1)".
  std::string display_label(std::size_t node) const;
  std::size_t duplicate_count() const;
};

// <u, d_u, r, v, d_v> plus the payload needed to rebuild the tree exactly.
struct SemanticRelation {
  std::string head_label;
  std::size_t head_index = 0;
  Relation relation = Relation::kArgument;
  std::string label;
  std::size_t index = 0;
  std::optional<std::size_t> target_copy;

  NodeKind kind = NodeKind::kSyntax;
  std::optional<std::size_t> token;
  std::string node_id;
  AttributeMap node_attributes;
  AttributeMap edge_attributes;

  bool operator==(const SemanticRelation&) const = default;
};

struct ArborescenceOptions {
  // When false, step (c) is skipped and the tree holds semantics nodes only.
  bool include_syntax = true;
};

// Steps (a)-(c): lexical labels with SOMETHING for embedded arguments,
// argument edges with duplicated re-entrant nodes, flattened syntax as
// non-head edges in text order. Performative nodes are stripped first.
Arborescence build_arborescence(const UDSGraph& g, const ArborescenceOptions& options = {});

// Pre-order: a node's non-head children (text order) come first, then its
// argument children ordered by head-token position.
std::vector<SemanticRelation> linearize(const Arborescence& a);

Arborescence delinearize(const std::vector<SemanticRelation>& relations,
                         const std::string& sentence_id = {},
                         const std::vector<Token>& tokens = {});

// Merges duplicates back into re-entrant edges; non-head edges become
// instance edges.
UDSGraph to_graph(const Arborescence& a);

// Node order and edge order normalised so structurally equal graphs compare equal.
UDSGraph canonicalize(const UDSGraph& g);

nlohmann::json arborescence_to_json(const Arborescence& a);
Arborescence arborescence_from_json(const nlohmann::json& j);

nlohmann::json relation_to_json(const SemanticRelation& r);
SemanticRelation relation_from_json(const nlohmann::json& j);

// JSON Lines container: {"format_version", "sentence_id", "tokens", "relations"}.
nlohmann::json relations_to_json(const std::string& sentence_id, const std::vector<Token>& tokens,
                                 const std::vector<SemanticRelation>& relations);

struct RelationSequence {
  std::string sentence_id;
  std::vector<Token> tokens;
  std::vector<SemanticRelation> relations;
};

RelationSequence relations_from_json(const nlohmann::json& j);

}  // namespace uds
