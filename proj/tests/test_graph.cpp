#include <doctest.h>

#include "helpers.hpp"
#include "uds/error.hpp"
#include "uds/graph_io.hpp"

using namespace uds;

TEST_CASE("property inventory is fixed and ordered") {
  auto nodes = AttributeInventory::node_properties();
  auto edges = AttributeInventory::edge_properties();
  REQUIRE(nodes.size() == 44);
  REQUIRE(edges.size() == 14);
  CHECK(nodes.front() == "factuality-factual");
  CHECK(nodes[1] == "genericity-arg-abstract");
  CHECK(nodes[7] == "time-dur-centuries");
  CHECK(nodes[18] == "supersense-noun.Tops");
  CHECK(nodes.back() == "supersense-noun.time");
  CHECK(edges.front() == "awareness");
  CHECK(edges.back() == "was-used");
  CHECK(AttributeInventory::node_index("time-dur-weeks") == 16u);
  CHECK_FALSE(AttributeInventory::node_index("volition"));
  CHECK(AttributeInventory::edge_index("volition") == 11u);

  std::size_t pred = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) pred += AttributeInventory::applies_to_predicate(i);
  CHECK(pred == 1 + 3 + 11);  // factuality, pred-genericity, durations
}

TEST_CASE("validate_graph") {
  SUBCASE("well-formed two-predicate graph") {
    auto g = testing::hand("hand-embedding");
    auto r = validate_graph(g);
    CHECK(r.is_valid());
    CHECK(r.summary().empty() == r.is_valid());
  }
  SUBCASE("value out of range") {
    auto g = testing::fig2();
    g.nodes[0].attributes["factuality-factual"] = {4.0, 1.0};
    auto r = validate_graph(g);
    CHECK(r.has(Violation::kValueRange));
  }
  SUBCASE("confidence out of range") {
    auto g = testing::fig2();
    g.nodes[0].attributes["factuality-factual"] = {1.0, 1.5};
    CHECK(validate_graph(g).has(Violation::kConfidenceRange));
  }
  SUBCASE("edge property on a node") {
    auto g = testing::fig2();
    g.nodes[1].attributes["volition"] = {1.0, 1.0};
    CHECK(validate_graph(g).has(Violation::kMisplacedAttr));
  }
  SUBCASE("unknown property") {
    auto g = testing::fig2();
    g.edges[0].attributes["happiness"] = {1.0, 1.0};
    CHECK(validate_graph(g).has(Violation::kUnknownAttr));
  }
  SUBCASE("self loop and duplicate edge") {
    auto g = testing::fig2();
    g.edges.push_back({0, 0, {}});
    g.edges.push_back(g.edges[1]);
    auto r = validate_graph(g);
    CHECK(r.has(Violation::kSelfLoop));
    CHECK(r.has(Violation::kDuplicateEdge));
  }
  SUBCASE("missing and multiple heads") {
    auto g = testing::fig2();
    std::erase_if(g.instances, [](const InstanceEdge& e) { return e.node == 1; });
    CHECK(validate_graph(g).has(Violation::kMissingInstance));
    g = testing::fig2();
    g.instances.push_back({0, 3, true});
    CHECK(validate_graph(g).has(Violation::kMultipleHeads));
  }
  SUBCASE("token range") {
    auto g = testing::fig2();
    g.instances.push_back({0, 99, false});
    CHECK(validate_graph(g).has(Violation::kTokenRange));
  }
  SUBCASE("duplicate node ids") {
    auto g = testing::fig2();
    g.nodes[1].id = g.nodes[0].id;
    CHECK(validate_graph(g).has(Violation::kDuplicateId));
  }
}

TEST_CASE("strip_performative_nodes") {
  auto plain = testing::fig2();
  CHECK(strip_performative_nodes(plain) == plain);

  auto g = testing::hand("hand-performative");
  REQUIRE(g.nodes.size() == 3);
  auto s = strip_performative_nodes(g);
  CHECK(s.nodes.size() == 1);
  CHECK(s.edges.empty());
  CHECK(s.nodes[0].kind == SemanticKind::kPredicate);
  CHECK(strip_performative_nodes(s) == s);
  CHECK(validate_graph(s).is_valid());
}

TEST_CASE("semantic_subgraph") {
  SUBCASE("object-control fixture keeps five semantics nodes and no syntax") {
    auto g = testing::fig2();
    auto s = semantic_subgraph(g);
    CHECK(s.nodes.size() == 5);
    CHECK(s.tokens.empty());
    CHECK(s.instances.empty());
    CHECK(s.semantics_only);
    CHECK(s.edges.size() == g.edges.size());
    std::vector<std::string> labels;
    for (const auto& n : s.nodes) labels.push_back(n.label.value());
    CHECK(labels == std::vector<std::string>{"nominated", "Bush", "Jones", "SOMETHING", "ambassador"});
    CHECK(validate_graph(s).is_valid());
  }
  SUBCASE("empty graph") {
    UDSGraph g;
    g.sentence_id = "empty";
    g.tokens = {{"Hello", "UH"}};
    auto s = semantic_subgraph(g);
    CHECK(s.nodes.empty());
    CHECK(s.tokens.empty());
  }
  SUBCASE("node count is conserved") {
    for (const auto& g : testing::hand_built()) {
      auto stripped = strip_performative_nodes(g);
      CHECK(semantic_subgraph(stripped).nodes.size() == stripped.nodes.size());
    }
  }
  SUBCASE("missing head designation") {
    auto g = testing::fig2();
    for (auto& i : g.instances)
      if (i.node == 2) i.head = false;
    CHECK_THROWS_AS(semantic_subgraph(g), Error);
    try {
      semantic_subgraph(g);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kMissingHead);
    }
  }
}

TEST_CASE("lexical labels") {
  auto g = testing::fig2();
  CHECK(lexical_label(g, 0) == "nominated");
  CHECK(lexical_label(g, 3) == "SOMETHING");
  CHECK(is_embedded_argument(g, 3));
  CHECK_FALSE(is_embedded_argument(g, 1));
  CHECK(node_yield(g, 4) == std::vector<std::size_t>{3, 4, 5});
  CHECK(head_token(g, 4) == 5u);
}

TEST_CASE("interchange format") {
  auto g = testing::fig2();
  auto line = dump_graph_line(g);
  CHECK(parse_graph_line(line) == g);

  auto j = graph_to_json(g);
  j["format_version"] = "1.7";
  CHECK(graph_from_json(j) == g);

  j["format_version"] = "2.0";
  try {
    graph_from_json(j);
    FAIL("expected UNSUPPORTED_VERSION");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUnsupportedVersion);
  }

  j.erase("format_version");
  CHECK_THROWS_AS(graph_from_json(j), Error);
  CHECK_THROWS_AS(parse_graph_line("{not json"), Error);

  // attribute values survive bit-exactly
  g.nodes[0].attributes["factuality-factual"] = {0.1 + 0.2, 1.0 / 3.0};
  CHECK(parse_graph_line(dump_graph_line(g)) == g);
}
