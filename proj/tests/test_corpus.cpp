#include <doctest.h>

#include <fstream>
#include <set>

#include "helpers.hpp"
#include "uds/analysis.hpp"
#include "uds/arborescence.hpp"
#include "uds/corpus.hpp"
#include "uds/error.hpp"
#include "uds/graph_io.hpp"

using namespace uds;

namespace {

void write(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::size_t reentrant_nodes(const UDSGraph& g) {
  std::map<std::size_t, int> parents;
  for (const auto& e : g.edges) ++parents[e.dependent];
  std::size_t n = 0;
  for (auto& [node, k] : parents) n += k > 1;
  return n;
}

}  // namespace

TEST_CASE("loading corpora") {
  testing::TempDir dir("corpus");
  SUBCASE("empty file") {
    write(dir.file("empty.jsonl"), "");
    CHECK(load_corpus(dir.file("empty.jsonl")).graphs.empty());
  }
  SUBCASE("malformed line is reported with its number") {
    std::ifstream in(testing::fixture("fig2.jsonl"));
    std::string first;
    std::getline(in, first);
    write(dir.file("bad.jsonl"), first + "\n\n{\"format_version\": \"1.0\", oops\n");
    try {
      load_corpus(dir.file("bad.jsonl"));
      FAIL("expected PARSE_ERROR");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kParseError);
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
  }
  SUBCASE("invalid graph") {
    auto g = testing::fig2();
    g.nodes[0].attributes["factuality-factual"] = {9.0, 1.0};
    write(dir.file("invalid.jsonl"), dump_graph_line(g) + "\n");
    try {
      load_corpus(dir.file("invalid.jsonl"));
      FAIL("expected VALIDATION_ERROR");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kValidationError);
    }
  }
  SUBCASE("duplicate ids") {
    auto line = dump_graph_line(testing::fig2());
    write(dir.file("dup.jsonl"), line + "\n" + line + "\n");
    CHECK_THROWS_AS(load_corpus(dir.file("dup.jsonl")), Error);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_corpus(dir.file("nope.jsonl")), Error); }
  SUBCASE("save and load round trip") {
    Corpus c{testing::hand_built()};
    save_corpus(dir.file("rt.jsonl"), c);
    CHECK(load_corpus(dir.file("rt.jsonl")).graphs == c.graphs);
  }
}

TEST_CASE("splits") {
  SyntheticGrammarConfig cfg;
  cfg.sentences = 20;
  cfg.train_fraction = 0.5;
  cfg.dev_fraction = 0.25;
  auto c = generate_synthetic(cfg);
  CHECK(c.split("train").size() == 10);
  CHECK(c.split("dev").size() == 5);
  CHECK(c.split("test").size() == 5);

  testing::TempDir dir("split");
  save_corpus(dir.file("c.jsonl"), c);
  CHECK(load_corpus(dir.file("c.jsonl"), "dev").graphs.size() == 5);
}

TEST_CASE("synthetic grammar") {
  SUBCASE("object control only") {
    SyntheticGrammarConfig cfg;
    cfg.sentences = 10;
    cfg.transitive = cfg.multiword = cfg.embedding = 0;
    cfg.control = 1;
    for (const auto& g : generate_synthetic(cfg).graphs) {
      CHECK(reentrant_nodes(g) == 1);
      CHECK(build_arborescence(g).duplicate_count() == 1);
    }
  }
  SUBCASE("every construction validates and ids are unique") {
    SyntheticGrammarConfig cfg;
    cfg.sentences = 200;
    cfg.seed = 8;
    std::set<std::string> ids;
    for (const auto& g : generate_synthetic(cfg).graphs) {
      CHECK_MESSAGE(validate_graph(g).is_valid(), g.sentence_id);
      ids.insert(g.sentence_id);
    }
    CHECK(ids.size() == 200);
  }
  SUBCASE("same seed, same corpus") {
    SyntheticGrammarConfig cfg;
    cfg.sentences = 30;
    cfg.seed = 4;
    CHECK(generate_synthetic(cfg).graphs == generate_synthetic(cfg).graphs);
    auto other = cfg;
    other.seed = 5;
    CHECK(generate_synthetic(other).graphs != generate_synthetic(cfg).graphs);
  }
  SUBCASE("requested correlation is realised") {
    SyntheticGrammarConfig cfg;
    cfg.sentences = 2000;
    cfg.seed = 12;
    cfg.density = 1.0;
    cfg.correlations = {{"volition", "instigation", 0.8}};
    auto m = attribute_matrix(generate_synthetic(cfg).graphs, Carrier::kEdge);
    auto j = *AttributeInventory::edge_index("volition");
    auto k = *AttributeInventory::edge_index("instigation");
    std::vector<double> a, b;
    for (const auto& row : m.cells)
      if (row[j] && row[k]) {
        a.push_back(row[j]->value);
        b.push_back(row[k]->value);
      }
    REQUIRE(a.size() > 500);
    auto r = pearson(a, b);
    CHECK(r.rho > 0.7);
    CHECK(r.rho < 0.9);
  }
  SUBCASE("invalid configurations") {
    SyntheticGrammarConfig cfg;
    cfg.control = 0.5;
    CHECK_THROWS_AS(generate_synthetic(cfg), Error);
    cfg = {};
    cfg.correlations = {{"volition", "awareness", 1.5}};
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.correlations = {{"volition", "factuality-factual", 0.5}};
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.correlations = {{"volition", "instigation", 0.9}, {"volition", "sentient", 0.9},
                        {"instigation", "sentient", -0.9}};
    CHECK_THROWS_AS(generate_synthetic(cfg), Error);  // not positive definite
  }
}

TEST_CASE("configuration files") {
  auto c = parse_tool_config(R"(
# comment
[synthetic]
sentences = 12
seed = 3
correlations = volition instigation 0.8; awareness sentient -0.2

[model]
hidden = 10
tied_attribute_heads = true

[training]
gamma = 2.5
mode = binary
epochs = 4
)");
  CHECK(c.synthetic.sentences == 12);
  CHECK(c.synthetic.seed == 3);
  REQUIRE(c.synthetic.correlations.size() == 2);
  CHECK(c.synthetic.correlations[1].rho == -0.2);
  CHECK(c.model.hidden == 10);
  CHECK(c.model.tied_attribute_heads);
  CHECK(c.training.gamma == 2.5);
  CHECK(c.training.mode == AttributeMode::kBinary);
  CHECK(c.training.epochs == 4);

  auto code = [](const std::string& text) {
    try {
      parse_tool_config(text);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kIo;
  };
  CHECK(code("[model]\nwidth = 3\n") == ErrorCode::kInvalidArgument);
  CHECK(code("[extras]\nx = 1\n") == ErrorCode::kInvalidArgument);
  CHECK(code("[training]\nepochs = many\n") == ErrorCode::kInvalidArgument);
  CHECK(code("[training\n") == ErrorCode::kParseError);
  CHECK(code("[training]\nlearning_rate = -1\n") == ErrorCode::kInvalidArgument);

  CHECK(parse_correlations("").empty());
  CHECK_THROWS_AS(parse_correlations("volition 0.5"), Error);
}
