#include <doctest.h>

#include <fstream>
#include <set>

#include "helpers.hpp"
#include "uds/arborescence.hpp"
#include "uds/error.hpp"

using namespace uds;

namespace {

Arborescence golden_fig2() {
  std::ifstream in(testing::fixture("fig2.arborescence.json"));
  REQUIRE(in);
  return arborescence_from_json(nlohmann::json::parse(in));
}

std::size_t count_relation(const Arborescence& a, Relation r) {
  std::size_t n = 0;
  for (const auto& e : a.edges) n += e.relation == r;
  return n;
}

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::kIo;
}

}  // namespace

TEST_CASE("object-control fixture matches the golden arborescence") {
  auto a = build_arborescence(testing::fig2());
  auto golden = golden_fig2();
  CHECK(a == golden);
  CHECK(arborescence_to_json(a) == arborescence_to_json(golden));

  std::vector<std::string> shown;
  for (std::size_t i = 0; i < a.nodes.size(); ++i) shown.push_back(a.display_label(i));
  CHECK(std::count(shown.begin(), shown.end(), "Bush(1)") == 1);
  CHECK(a.duplicate_count() == 1);

  // SOMETHING dominates the embedded predicate
  auto kids = a.children();
  bool found = false;
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    if (a.nodes[i].label != "SOMETHING") continue;
    CHECK(a.nodes[i].kind == NodeKind::kArgument);
    for (auto c : kids[i]) {
      const auto& dep = a.nodes[c];
      if (dep.kind == NodeKind::kPredicate && dep.label == "ambassador") found = true;
    }
  }
  CHECK(found);
}

TEST_CASE("build_arborescence shapes") {
  SUBCASE("single predicate and argument") {
    auto a = build_arborescence(testing::hand("hand-intransitive"));
    CHECK(a.nodes.size() == 3);
    CHECK(count_relation(a, Relation::kNonHead) == 0);
    CHECK(a.nodes[0].kind == NodeKind::kRoot);
  }
  SUBCASE("three-token yield gives two ordered non-head edges") {
    auto a = build_arborescence(testing::hand("hand-spans"));
    std::vector<std::size_t> toks;
    for (const auto& e : a.edges)
      if (e.relation == Relation::kNonHead && a.nodes[e.head].label == "dog") toks.push_back(*a.nodes[e.dependent].token);
    CHECK(toks == std::vector<std::size_t>{0, 1});
  }
  SUBCASE("duplicates share their antecedent's label") {
    auto a = build_arborescence(testing::hand("hand-double-reentrancy"));
    CHECK(a.duplicate_count() == 2);
    for (const auto& n : a.nodes)
      if (n.copy_of) CHECK(n.label == a.nodes[*n.copy_of].label);
    CHECK(a.display_label(a.nodes.size() - 1) == "Kim(2)");
  }
  SUBCASE("performative nodes are stripped first") {
    auto a = build_arborescence(testing::hand("hand-performative"));
    CHECK(a.nodes.size() == 3);
  }
  SUBCASE("semantics only") {
    ArborescenceOptions opts;
    opts.include_syntax = false;
    auto a = build_arborescence(testing::fig2(), opts);
    CHECK(count_relation(a, Relation::kNonHead) == 0);
    CHECK(a.nodes.size() == 7);  // root + 5 + one duplicate
  }
  SUBCASE("every non-root node has one incoming edge") {
    for (const auto& g : testing::hand_built()) {
      auto a = build_arborescence(g);
      auto in = a.incoming_edges();
      CHECK_FALSE(in[0]);
      for (std::size_t i = 1; i < a.nodes.size(); ++i) CHECK(in[i].has_value());
      for (const auto& e : a.edges)
        if (e.relation == Relation::kNonHead) CHECK(a.nodes[e.dependent].kind == NodeKind::kSyntax);
    }
  }
  SUBCASE("cycle") {
    auto g = testing::hand("hand-intransitive");
    g.edges.push_back({1, 0, {}});
    CHECK(code_of([&] { build_arborescence(g); }) == ErrorCode::kCycle);
  }
}

TEST_CASE("linearize") {
  auto a = golden_fig2();
  auto rels = linearize(a);
  CHECK(rels.size() == a.nodes.size() - 1);
  std::size_t bush = 0, bush_copy = 0;
  for (const auto& r : rels) {
    if (r.label == "Bush" && !r.target_copy) bush = r.index;
    if (r.label == "Bush" && r.target_copy) bush_copy = r.index;
  }
  CHECK(bush > 0);
  CHECK(bush < bush_copy);
  CHECK(rels[0].head_label == kRootLabel);
  CHECK(rels[0].relation == Relation::kRoot);

  auto small = build_arborescence(testing::hand("hand-intransitive"));
  CHECK(linearize(small).size() == 2);

  // syntax children come before argument children
  auto ctl = linearize(build_arborescence(testing::fig2()));
  std::vector<std::string> under_emb;
  for (const auto& r : ctl)
    if (r.head_label == "ambassador") under_emb.push_back(r.label);
  CHECK(under_emb == std::vector<std::string>{"to", "be", "Bush"});
}

TEST_CASE("delinearize") {
  auto a = golden_fig2();
  CHECK(delinearize(linearize(a), a.sentence_id, a.tokens) == a);

  auto empty = delinearize({});
  CHECK(empty.nodes.size() == 1);
  CHECK(empty.edges.empty());

  auto rels = linearize(a);
  rels[2].head_index = rels[2].index;
  CHECK(code_of([&] { delinearize(rels); }) == ErrorCode::kDanglingHead);

  rels = linearize(a);
  rels[1].head_index = 40;
  CHECK(code_of([&] { delinearize(rels); }) == ErrorCode::kDanglingHead);
}

TEST_CASE("to_graph") {
  SUBCASE("hand-built graphs round trip") {
    for (const auto& g : testing::hand_built()) {
      auto back = to_graph(build_arborescence(g));
      CHECK_MESSAGE(canonicalize(back) == canonicalize(strip_performative_nodes(g)), g.sentence_id);
    }
  }
  SUBCASE("one duplicate gives one re-entrant node") {
    auto g = to_graph(golden_fig2());
    std::map<std::size_t, int> parents;
    for (const auto& e : g.edges) ++parents[e.dependent];
    int reentrant = 0;
    for (auto& [n, k] : parents) reentrant += k > 1;
    CHECK(reentrant == 1);
    CHECK(g.nodes.size() == 5);
  }
  SUBCASE("attributes survive bit-exactly") {
    auto g = testing::fig2();
    g.nodes[1].attributes["genericity-arg-kind"] = {0.1 + 0.2, 0.7};
    g.edges[1].attributes["awareness"] = {-1.0 / 3.0, 1.0 / 7.0};
    auto back = to_graph(build_arborescence(g));
    CHECK(canonicalize(back) == canonicalize(g));
  }
}

TEST_CASE("synthetic round trips") {
  SyntheticGrammarConfig cfg;
  cfg.sentences = 120;
  cfg.seed = 11;
  cfg.density = 0.7;
  for (auto g : generate_synthetic(cfg).graphs) {
    g.split.clear();  // split labels live in the corpus, not the tree
    auto a = build_arborescence(g);
    CHECK(delinearize(linearize(a), a.sentence_id, a.tokens) == a);
    CHECK(canonicalize(to_graph(a)) == canonicalize(g));
    CHECK(arborescence_from_json(arborescence_to_json(a)) == a);
  }
}

TEST_CASE("relation files") {
  auto a = golden_fig2();
  auto j = relations_to_json(a.sentence_id, a.tokens, linearize(a));
  auto seq = relations_from_json(j);
  CHECK(seq.sentence_id == a.sentence_id);
  CHECK(seq.tokens == a.tokens);
  CHECK(seq.relations == linearize(a));
}
