#include "uds/arborescence.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <set>
#include <tuple>

#include "uds/error.hpp"
#include "uds/graph_io.hpp"

namespace uds {

using nlohmann::json;

std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::kRoot: return "root";
    case NodeKind::kPredicate: return "semantic-predicate";
    case NodeKind::kArgument: return "semantic-argument";
    case NodeKind::kSyntax: return "syntax";
  }
  return "syntax";
}

std::string_view to_string(Relation rel) {
  switch (rel) {
    case Relation::kArgument: return "argument";
    case Relation::kNonHead: return "non-head";
    case Relation::kRoot: return "root";
  }
  return "argument";
}

NodeKind node_kind_from_string(std::string_view s) {
  if (s == "root") return NodeKind::kRoot;
  if (s == "semantic-predicate") return NodeKind::kPredicate;
  if (s == "semantic-argument") return NodeKind::kArgument;
  if (s == "syntax") return NodeKind::kSyntax;
  throw Error(ErrorCode::kParseError, "unknown node kind '" + std::string(s) + "'");
}

Relation relation_from_string(std::string_view s) {
  if (s == "argument") return Relation::kArgument;
  if (s == "non-head") return Relation::kNonHead;
  if (s == "root") return Relation::kRoot;
  throw Error(ErrorCode::kParseError, "unknown relation '" + std::string(s) + "'");
}

std::vector<std::optional<std::size_t>> Arborescence::incoming_edges() const {
  std::vector<std::optional<std::size_t>> in(nodes.size());
  for (std::size_t e = 0; e < edges.size(); ++e) in.at(edges[e].dependent) = e;
  return in;
}

std::vector<std::vector<std::size_t>> Arborescence::children() const {
  std::vector<std::vector<std::size_t>> out(nodes.size());
  for (const auto& e : edges) out.at(e.head).push_back(e.dependent);
  return out;
}

std::string Arborescence::display_label(std::size_t node) const {
  const auto& n = nodes.at(node);
  if (!n.copy_of) return n.label;
  std::size_t ordinal = 0;
  for (std::size_t i = 0; i <= node; ++i) {
    if (nodes[i].copy_of == n.copy_of) ++ordinal;
  }
  return n.label + "(" + std::to_string(ordinal) + ")";
}

std::size_t Arborescence::duplicate_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const ArbNode& n) { return n.copy_of.has_value(); }));
}

namespace {

constexpr std::size_t kNoToken = std::numeric_limits<std::size_t>::max();

NodeKind arb_kind(SemanticKind k) {
  return k == SemanticKind::kPredicate ? NodeKind::kPredicate : NodeKind::kArgument;
}

class ArborescenceBuilder {
 public:
  ArborescenceBuilder(const UDSGraph& g, const ArborescenceOptions& options)
      : g_(g), options_(options), out_edges_(g.nodes.size()), arb_index_(g.nodes.size()) {}

  Arborescence build() {
    for (std::size_t e = 0; e < g_.edges.size(); ++e) {
      const auto& edge = g_.edges[e];
      if (edge.head >= g_.nodes.size() || edge.dependent >= g_.nodes.size()) {
        throw Error(ErrorCode::kInvalidArgument, "semantics edge references an unknown node");
      }
      out_edges_[edge.head].push_back(e);
    }
    check_acyclic();

    a_.sentence_id = g_.sentence_id;
    a_.tokens = g_.tokens;
    a_.nodes.push_back({std::string(kRootLabel), NodeKind::kRoot, std::nullopt, {}, {}, std::nullopt});
    a_.root = 0;

    std::vector<std::size_t> in_degree(g_.nodes.size(), 0);
    for (const auto& e : g_.edges) ++in_degree[e.dependent];
    std::vector<std::size_t> tops;
    for (std::size_t i = 0; i < g_.nodes.size(); ++i) {
      if (in_degree[i] == 0) tops.push_back(i);
    }
    sort_by_position(tops);
    for (std::size_t top : tops) visit(top, 0, Relation::kRoot, {});
    return std::move(a_);
  }

 private:
  std::size_t position(std::size_t node) const {
    auto t = head_token(g_, node);
    return t ? *t : kNoToken;
  }

  void sort_by_position(std::vector<std::size_t>& nodes) const {
    std::stable_sort(nodes.begin(), nodes.end(), [&](std::size_t x, std::size_t y) {
      return std::make_tuple(position(x), x) < std::make_tuple(position(y), y);
    });
  }

  void check_acyclic() const {
    enum Color { kWhite, kGray, kBlack };
    std::vector<Color> color(g_.nodes.size(), kWhite);
    // Iterative DFS so pathological inputs cannot exhaust the stack.
    for (std::size_t s = 0; s < g_.nodes.size(); ++s) {
      if (color[s] != kWhite) continue;
      std::vector<std::pair<std::size_t, std::size_t>> stack{{s, 0}};
      color[s] = kGray;
      while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < out_edges_[node].size()) {
          std::size_t child = g_.edges[out_edges_[node][next++]].dependent;
          if (color[child] == kGray) {
            throw Error(ErrorCode::kCycle, "semantics edges of '" + g_.sentence_id +
                                               "' contain a directed cycle through '" +
                                               g_.nodes[child].id + "'");
          }
          if (color[child] == kWhite) {
            color[child] = kGray;
            stack.push_back({child, 0});
          }
        } else {
          color[node] = kBlack;
          stack.pop_back();
        }
      }
    }
  }

  std::size_t add(ArbNode node, std::size_t head, Relation rel, AttributeMap edge_attrs) {
    std::size_t idx = a_.nodes.size();
    a_.nodes.push_back(std::move(node));
    a_.edges.push_back({head, idx, rel, std::move(edge_attrs)});
    return idx;
  }

  void visit(std::size_t node, std::size_t arb_head, Relation rel, AttributeMap edge_attrs) {
    const auto& n = g_.nodes[node];
    if (arb_index_[node]) {
      const std::size_t antecedent = *arb_index_[node];
      ArbNode dup;
      dup.label = a_.nodes[antecedent].label;
      dup.kind = a_.nodes[antecedent].kind;
      dup.token = a_.nodes[antecedent].token;
      dup.copy_of = antecedent;
      add(std::move(dup), arb_head, rel, std::move(edge_attrs));
      return;
    }

    ArbNode arb;
    arb.label = lexical_label(g_, node);
    arb.kind = arb_kind(n.kind);
    arb.node_id = n.id;
    arb.attributes = n.attributes;
    std::optional<std::size_t> head;
    if (!g_.semantics_only) {
      head = head_token(g_, node);
      if (!head) {
        throw Error(ErrorCode::kMissingHead, "semantics node '" + n.id + "' has no head instance edge");
      }
    }
    arb.token = head;
    const std::size_t idx = add(std::move(arb), arb_head, rel, std::move(edge_attrs));
    arb_index_[node] = idx;

    if (options_.include_syntax && head) {
      for (std::size_t tok : node_yield(g_, node)) {
        if (tok == *head) continue;
        if (tok >= g_.tokens.size()) {
          throw Error(ErrorCode::kInvalidArgument, "instance edge token out of range");
        }
        ArbNode syn;
        syn.label = g_.tokens[tok].form;
        syn.kind = NodeKind::kSyntax;
        syn.token = tok;
        add(std::move(syn), idx, Relation::kNonHead, {});
      }
    }

    std::vector<std::size_t> kids;
    for (std::size_t e : out_edges_[node]) kids.push_back(g_.edges[e].dependent);
    sort_by_position(kids);
    for (std::size_t child : kids) {
      const SemanticEdge* edge = nullptr;
      for (std::size_t e : out_edges_[node]) {
        if (g_.edges[e].dependent == child) edge = &g_.edges[e];
      }
      visit(child, idx, Relation::kArgument, edge->attributes);
    }
  }

  const UDSGraph& g_;
  ArborescenceOptions options_;
  std::vector<std::vector<std::size_t>> out_edges_;
  std::vector<std::optional<std::size_t>> arb_index_;
  Arborescence a_;
};

}  // namespace

Arborescence build_arborescence(const UDSGraph& g, const ArborescenceOptions& options) {
  const bool has_performative =
      std::any_of(g.nodes.begin(), g.nodes.end(), [](const SemanticNode& n) { return n.performative; });
  if (has_performative) {
    UDSGraph stripped = strip_performative_nodes(g);
    return ArborescenceBuilder(stripped, options).build();
  }
  return ArborescenceBuilder(g, options).build();
}

std::vector<SemanticRelation> linearize(const Arborescence& a) {
  std::vector<SemanticRelation> out;
  if (a.nodes.empty()) return out;
  const auto incoming = a.incoming_edges();
  auto kids = a.children();

  auto sort_key = [&](std::size_t n) {
    const auto& node = a.nodes[n];
    const bool semantic = node.kind != NodeKind::kSyntax;
    const std::size_t pos = node.token ? *node.token : kNoToken;
    return std::make_tuple(semantic, pos, n);
  };
  for (auto& list : kids) {
    std::sort(list.begin(), list.end(),
              [&](std::size_t x, std::size_t y) { return sort_key(x) < sort_key(y); });
  }

  std::vector<std::size_t> new_index(a.nodes.size(), kNoToken);
  new_index[a.root] = 0;
  std::vector<std::size_t> stack;
  for (auto it = kids[a.root].rbegin(); it != kids[a.root].rend(); ++it) stack.push_back(*it);
  while (!stack.empty()) {
    std::size_t n = stack.back();
    stack.pop_back();
    const auto& node = a.nodes[n];
    const auto& edge = a.edges[*incoming[n]];
    SemanticRelation rel;
    rel.head_label = a.nodes[edge.head].label;
    rel.head_index = new_index[edge.head];
    rel.relation = edge.relation;
    rel.label = node.label;
    rel.index = out.size() + 1;
    if (node.copy_of) rel.target_copy = new_index[*node.copy_of];
    rel.kind = node.kind;
    rel.token = node.token;
    rel.node_id = node.node_id;
    rel.node_attributes = node.attributes;
    rel.edge_attributes = edge.attributes;
    new_index[n] = rel.index;
    out.push_back(std::move(rel));
    for (auto it = kids[n].rbegin(); it != kids[n].rend(); ++it) stack.push_back(*it);
  }
  return out;
}

Arborescence delinearize(const std::vector<SemanticRelation>& relations, const std::string& sentence_id,
                         const std::vector<Token>& tokens) {
  Arborescence a;
  a.sentence_id = sentence_id;
  a.tokens = tokens;
  a.nodes.push_back({std::string(kRootLabel), NodeKind::kRoot, std::nullopt, {}, {}, std::nullopt});
  for (std::size_t i = 0; i < relations.size(); ++i) {
    const auto& r = relations[i];
    const std::size_t idx = i + 1;
    if (r.index != idx) {
      throw Error(ErrorCode::kInvalidArgument, "relation " + std::to_string(i) + " has index " +
                                                   std::to_string(r.index) + ", expected " +
                                                   std::to_string(idx));
    }
    if (r.head_index >= idx) {
      throw Error(ErrorCode::kDanglingHead, "relation " + std::to_string(idx) +
                                                " references unseen head " + std::to_string(r.head_index));
    }
    if (r.target_copy && (*r.target_copy >= idx || *r.target_copy == 0)) {
      throw Error(ErrorCode::kDanglingHead, "relation " + std::to_string(idx) +
                                                " copies unseen node " + std::to_string(*r.target_copy));
    }
    ArbNode node;
    node.label = r.label;
    node.kind = r.kind;
    node.token = r.token;
    node.node_id = r.node_id;
    node.attributes = r.node_attributes;
    node.copy_of = r.target_copy;
    a.nodes.push_back(std::move(node));
    a.edges.push_back({r.head_index, idx, r.relation, r.edge_attributes});
  }
  return a;
}

UDSGraph to_graph(const Arborescence& a) {
  UDSGraph g;
  g.sentence_id = a.sentence_id;
  g.tokens = a.tokens;
  g.semantics_only = a.tokens.empty();

  // Resolve duplicates to their antecedent (chains collapse to the original).
  auto resolve = [&](std::size_t n) {
    std::size_t guard = 0;
    while (a.nodes[n].copy_of && guard++ < a.nodes.size()) n = *a.nodes[n].copy_of;
    return n;
  };

  std::vector<std::optional<std::size_t>> graph_index(a.nodes.size());
  std::set<std::string> used_ids;
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    const auto& n = a.nodes[i];
    if (!is_semantic(n.kind) || n.copy_of) continue;
    SemanticNode sn;
    sn.kind = n.kind == NodeKind::kPredicate ? SemanticKind::kPredicate : SemanticKind::kArgument;
    sn.id = n.node_id.empty() ? "n" + std::to_string(i) : n.node_id;
    while (used_ids.count(sn.id)) sn.id += "'";
    used_ids.insert(sn.id);
    sn.attributes = n.attributes;
    graph_index[i] = g.nodes.size();
    g.nodes.push_back(std::move(sn));
  }

  std::vector<std::optional<std::size_t>> head_tok(g.nodes.size());
  std::vector<std::vector<std::size_t>> extra_tok(g.nodes.size());
  std::set<std::pair<std::size_t, std::size_t>> edge_seen;
  for (const auto& e : a.edges) {
    const auto& dep = a.nodes[e.dependent];
    const auto& head = a.nodes[e.head];
    if (dep.kind == NodeKind::kSyntax) {
      if (!is_semantic(head.kind) || !dep.token || *dep.token >= a.tokens.size()) continue;
      auto h = graph_index[resolve(e.head)];
      if (h) extra_tok[*h].push_back(*dep.token);
      continue;
    }
    if (!is_semantic(dep.kind) || !is_semantic(head.kind)) continue;
    auto h = graph_index[resolve(e.head)];
    auto d = graph_index[resolve(e.dependent)];
    if (!h || !d || *h == *d) continue;
    if (!edge_seen.insert({*h, *d}).second) continue;
    g.edges.push_back({*h, *d, e.attributes});
  }

  if (!g.semantics_only) {
    std::set<std::size_t> used_heads;
    for (std::size_t i = 0; i < a.nodes.size(); ++i) {
      if (!graph_index[i]) continue;
      const auto& tok = a.nodes[i].token;
      if (tok && *tok < a.tokens.size()) {
        head_tok[*graph_index[i]] = *tok;
        used_heads.insert(*tok);
      }
    }
    // Nodes without a token (generated rather than copied): match by form,
    // then SOMETHING takes the head of its first predicate child.
    for (std::size_t i = 0; i < a.nodes.size(); ++i) {
      if (!graph_index[i] || head_tok[*graph_index[i]]) continue;
      const auto& label = a.nodes[i].label;
      std::optional<std::size_t> any_match;
      for (std::size_t t = 0; t < a.tokens.size(); ++t) {
        if (a.tokens[t].form != label) continue;
        if (!any_match) any_match = t;
        if (!used_heads.count(t)) {
          any_match = t;
          break;
        }
      }
      if (any_match) {
        head_tok[*graph_index[i]] = *any_match;
        used_heads.insert(*any_match);
      }
    }
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t n = 0; n < g.nodes.size(); ++n) {
        if (head_tok[n]) continue;
        for (const auto& e : g.edges) {
          if (e.head == n && head_tok[e.dependent]) {
            head_tok[n] = head_tok[e.dependent];
            break;
          }
        }
      }
    }
    for (std::size_t n = 0; n < g.nodes.size(); ++n) {
      if (!head_tok[n] && !a.tokens.empty()) head_tok[n] = 0;
      if (!head_tok[n]) continue;
      g.instances.push_back({n, *head_tok[n], true});
      std::vector<std::size_t> extra = extra_tok[n];
      std::sort(extra.begin(), extra.end());
      extra.erase(std::unique(extra.begin(), extra.end()), extra.end());
      for (std::size_t t : extra) {
        if (t != *head_tok[n]) g.instances.push_back({n, t, false});
      }
    }
  }

  // Labels are stored explicitly only where the derived label would differ.
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    if (!graph_index[i]) continue;
    const std::size_t n = *graph_index[i];
    if (g.semantics_only) {
      g.nodes[n].label = a.nodes[i].label;
      continue;
    }
    if (lexical_label(g, n) != a.nodes[i].label) g.nodes[n].label = a.nodes[i].label;
  }
  return g;
}

UDSGraph canonicalize(const UDSGraph& g) {
  UDSGraph out = g;
  std::vector<std::size_t> order(g.nodes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return g.nodes[x].id < g.nodes[y].id; });
  std::vector<std::size_t> remap(g.nodes.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    remap[order[i]] = i;
    out.nodes[i] = g.nodes[order[i]];
  }
  for (auto& e : out.edges) {
    e.head = remap.at(e.head);
    e.dependent = remap.at(e.dependent);
  }
  for (auto& inst : out.instances) inst.node = remap.at(inst.node);
  std::sort(out.edges.begin(), out.edges.end(), [](const SemanticEdge& x, const SemanticEdge& y) {
    return std::tie(x.head, x.dependent) < std::tie(y.head, y.dependent);
  });
  std::sort(out.instances.begin(), out.instances.end(), [](const InstanceEdge& x, const InstanceEdge& y) {
    return std::tie(x.node, x.token, x.head) < std::tie(y.node, y.token, y.head);
  });
  return out;
}

namespace {

json tokens_to_json(const std::vector<Token>& tokens) {
  json out = json::array();
  for (const auto& t : tokens) out.push_back({{"form", t.form}, {"pos", t.pos}});
  return out;
}

std::vector<Token> tokens_from_json(const json& j) {
  std::vector<Token> out;
  for (const auto& t : j) out.push_back({t.at("form").get<std::string>(), t.value("pos", std::string())});
  return out;
}

}  // namespace

json arborescence_to_json(const Arborescence& a) {
  json j;
  j["format_version"] = std::string(kFormatVersion);
  j["sentence_id"] = a.sentence_id;
  j["tokens"] = tokens_to_json(a.tokens);
  j["root"] = a.root;
  json nodes = json::array();
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    const auto& n = a.nodes[i];
    json node = {{"index", i}, {"label", n.label}, {"kind", std::string(to_string(n.kind))}};
    if (n.copy_of) {
      node["display"] = a.display_label(i);
      node["copy_of"] = *n.copy_of;
    }
    if (n.token) node["token"] = *n.token;
    if (!n.node_id.empty()) node["id"] = n.node_id;
    if (!n.attributes.empty()) node["attributes"] = attributes_to_json(n.attributes);
    nodes.push_back(std::move(node));
  }
  j["nodes"] = std::move(nodes);
  json edges = json::array();
  for (const auto& e : a.edges) {
    json edge = {{"head", e.head}, {"dependent", e.dependent}, {"relation", std::string(to_string(e.relation))}};
    if (!e.attributes.empty()) edge["attributes"] = attributes_to_json(e.attributes);
    edges.push_back(std::move(edge));
  }
  j["edges"] = std::move(edges);
  return j;
}

Arborescence arborescence_from_json(const json& j) {
  try {
    check_format_version(j.at("format_version").get<std::string>());
    Arborescence a;
    a.sentence_id = j.value("sentence_id", std::string());
    a.tokens = tokens_from_json(j.value("tokens", json::array()));
    a.root = j.value("root", std::size_t{0});
    for (const auto& n : j.at("nodes")) {
      ArbNode node;
      node.label = n.at("label").get<std::string>();
      node.kind = node_kind_from_string(n.at("kind").get<std::string>());
      if (n.contains("token")) node.token = n.at("token").get<std::size_t>();
      node.node_id = n.value("id", std::string());
      node.attributes = attributes_from_json(n.value("attributes", json::object()));
      if (n.contains("copy_of")) node.copy_of = n.at("copy_of").get<std::size_t>();
      a.nodes.push_back(std::move(node));
    }
    for (const auto& e : j.at("edges")) {
      a.edges.push_back({e.at("head").get<std::size_t>(), e.at("dependent").get<std::size_t>(),
                         relation_from_string(e.at("relation").get<std::string>()),
                         attributes_from_json(e.value("attributes", json::object()))});
    }
    return a;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
}

json relation_to_json(const SemanticRelation& r) {
  json j = {{"head_label", r.head_label},
            {"head_index", r.head_index},
            {"relation", std::string(to_string(r.relation))},
            {"label", r.label},
            {"index", r.index},
            {"kind", std::string(to_string(r.kind))}};
  if (r.target_copy) j["target_copy"] = *r.target_copy;
  if (r.token) j["token"] = *r.token;
  if (!r.node_id.empty()) j["id"] = r.node_id;
  if (!r.node_attributes.empty()) j["node_attributes"] = attributes_to_json(r.node_attributes);
  if (!r.edge_attributes.empty()) j["edge_attributes"] = attributes_to_json(r.edge_attributes);
  return j;
}

SemanticRelation relation_from_json(const json& j) {
  try {
    SemanticRelation r;
    r.head_label = j.at("head_label").get<std::string>();
    r.head_index = j.at("head_index").get<std::size_t>();
    r.relation = relation_from_string(j.at("relation").get<std::string>());
    r.label = j.at("label").get<std::string>();
    r.index = j.at("index").get<std::size_t>();
    if (j.contains("target_copy")) r.target_copy = j.at("target_copy").get<std::size_t>();
    r.kind = node_kind_from_string(j.value("kind", std::string("syntax")));
    if (j.contains("token")) r.token = j.at("token").get<std::size_t>();
    r.node_id = j.value("id", std::string());
    r.node_attributes = attributes_from_json(j.value("node_attributes", json::object()));
    r.edge_attributes = attributes_from_json(j.value("edge_attributes", json::object()));
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
}

json relations_to_json(const std::string& sentence_id, const std::vector<Token>& tokens,
                       const std::vector<SemanticRelation>& relations) {
  json j;
  j["format_version"] = std::string(kFormatVersion);
  j["sentence_id"] = sentence_id;
  j["tokens"] = tokens_to_json(tokens);
  json rels = json::array();
  for (const auto& r : relations) rels.push_back(relation_to_json(r));
  j["relations"] = std::move(rels);
  return j;
}

}  // namespace uds

namespace uds {

RelationSequence relations_from_json(const json& j) {
  try {
    check_format_version(j.at("format_version").get<std::string>());
    RelationSequence r;
    r.sentence_id = j.value("sentence_id", std::string());
    r.tokens = tokens_from_json(j.value("tokens", json::array()));
    for (const auto& rel : j.at("relations")) r.relations.push_back(relation_from_json(rel));
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
}

}  // namespace uds
