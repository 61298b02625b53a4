#include <doctest.h>

#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "uds/error.hpp"
#include "uds/numerics/ops.hpp"
#include "uds/training.hpp"

using namespace uds;
using namespace uds::num;

namespace {

const std::vector<double> kNu{0.5, -1.2, 2.0, 0.1, -0.3, 1.7};
const std::vector<double> kGold{1.0, -2.0, 2.5, -0.4, 0.0, 1.0};
const std::vector<double> kConf{1.0, 0.5, 0.8, 0.0, 0.3, 1.0};

AttributeLossParts parts(Tape& t, const std::vector<double>& nu, const std::vector<double>& gold,
                         const std::vector<double>& conf, double gamma, AttributeMode mode) {
  return attribute_loss_parts(t.constant(Tensor::vector(nu)), Tensor::vector(gold), Tensor::vector(conf), gamma,
                              mode);
}

std::vector<UDSGraph> tiny_corpus() {
  SyntheticGrammarConfig cfg;
  cfg.sentences = 4;
  cfg.seed = 5;
  return generate_synthetic(cfg).graphs;
}

}  // namespace

TEST_CASE("tau") {
  CHECK(tau(-0.5) == 0.0);
  CHECK(tau(0.0) == 0.0);
  CHECK(tau(1e-300) == 1.0);
  CHECK(tau(2.0) == 1.0);
}

TEST_CASE("attribute loss matches the reference values") {
  Tape t;
  auto c = parts(t, kNu, kGold, kConf, 1.5, AttributeMode::kConfidence);
  CHECK(c.mse.item() == doctest::Approx(0.2145).epsilon(1e-12));
  CHECK(c.bce.item() == doctest::Approx(0.17355887156838742).epsilon(1e-12));
  CHECK(c.combined.item() == doctest::Approx(0.2878046142918165).epsilon(1e-12));

  auto b = parts(t, kNu, kGold, kConf, 1.5, AttributeMode::kBinary);
  CHECK(b.mse.item() == doctest::Approx(0.2866666666666667).epsilon(1e-12));
  CHECK(b.bce.item() == doctest::Approx(0.2644047894026506).epsilon(1e-12));
  CHECK(b.combined.item() == doctest::Approx(0.4126290998778881).epsilon(1e-12));

  CHECK(attribute_loss(t.constant(Tensor::vector(kNu)), Tensor::vector(kGold), Tensor::vector(kConf), 1.5,
                       AttributeMode::kConfidence)
            .item() == c.combined.item());
}

TEST_CASE("attribute loss identities") {
  Tape t;
  SUBCASE("binary equals confidence mode on 0/1 confidences") {
    std::vector<double> conf{1, 0, 1, 1, 0, 1};
    auto a = parts(t, kNu, kGold, conf, 0.7, AttributeMode::kConfidence);
    auto b = parts(t, kNu, kGold, conf, 0.7, AttributeMode::kBinary);
    CHECK(std::abs(a.combined.item() - b.combined.item()) < 1e-12);
  }
  SUBCASE("combined equals gamma times a shared value") {
    Tape t2;
    auto m = t2.variable(Tensor::scalar(0.37));
    auto h = harmonic_combine(m, m);
    CHECK(std::abs(scale(h, 2.5).item() - 2.5 * 0.37) < 1e-12);
  }
  SUBCASE("zero at an exact sign-agreeing match") {
    // large |nu| makes the surrogate BCE vanish; equal values zero the MSE
    std::vector<double> v{40.0, -40.0, 45.0};
    std::vector<double> g = v;
    auto p = parts(t, v, g, {1, 1, 1}, 1.0, AttributeMode::kConfidence);
    CHECK(std::abs(p.combined.item()) < 1e-12);
    CHECK(p.mse.item() == 0.0);
  }
  SUBCASE("unannotated cells contribute nothing") {
    auto p = parts(t, kNu, kGold, std::vector<double>(6, 0.0), 1.0, AttributeMode::kConfidence);
    CHECK(p.mse.item() == 0.0);
    CHECK(p.bce.item() == 0.0);
    CHECK(p.combined.item() == 0.0);
  }
  SUBCASE("edge loss uses rows of fourteen") {
    std::vector<double> lam(28, 0.4), gold(28, -1.0), conf(28, 1.0);
    auto e = edge_attribute_loss(t.constant(Tensor::matrix(2, 14, lam)), Tensor::matrix(2, 14, gold),
                                 Tensor::matrix(2, 14, conf), 1.0, AttributeMode::kConfidence);
    auto n = attribute_loss(t.constant(Tensor::vector(lam)), Tensor::vector(gold), Tensor::vector(conf), 1.0,
                            AttributeMode::kConfidence);
    CHECK(e.item() == doctest::Approx(n.item()).epsilon(1e-14));
    CHECK_THROWS_AS(edge_attribute_loss(t.constant(Tensor::vector(std::vector<double>(13, 0.0))),
                                        Tensor::vector(std::vector<double>(13, 0.0)),
                                        Tensor::vector(std::vector<double>(13, 1.0)), 1.0, AttributeMode::kBinary),
                    Error);
  }
  SUBCASE("size mismatch") {
    CHECK_THROWS_AS(parts(t, kNu, {1, 2}, kConf, 1.0, AttributeMode::kConfidence), Error);
  }
}

TEST_CASE("mask loss") {
  Tape t;
  auto l = mask_loss(t.constant(Tensor::vector({0, 0, 0, 0})), Tensor::vector({1, 0, 1, 1}));
  CHECK(l.item() == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(mask_loss(Tensor::vector({0.5, 0.5}), Tensor::vector({0, 1})) == doctest::Approx(std::log(2.0)));
  // clamped, so certain mistakes stay finite
  CHECK(std::isfinite(mask_loss(Tensor::vector({1.0, 0.0}), Tensor::vector({0, 1}))));
}

TEST_CASE("structural loss") {
  auto g = testing::fig2();
  auto ex = make_example(g);
  std::vector<Arborescence> trees{build_arborescence(g)};
  Parser p(testing::tiny_model(), build_vocabularies(trees));
  Tape t;
  auto trace = p.teacher_force(t, ex.sentence, ex.relations);
  auto s = structural_loss(p, trace, ex.sentence, ex.relations);
  for (auto v : {s.node, s.head, s.relation, s.coverage}) {
    CHECK(v.item() >= 0.0);
    CHECK(std::isfinite(v.item()));
  }
  // an untrained model is close to uniform over relations
  CHECK(s.relation.item() == doctest::Approx(std::log(double(kRelationCount))).epsilon(0.5));

  auto fewer = ex.relations;
  fewer.pop_back();
  try {
    structural_loss(p, trace, ex.sentence, fewer);
    FAIL("expected LENGTH_MISMATCH");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kLengthMismatch);
  }

  UDSGraph empty;
  empty.sentence_id = "none";
  CHECK_THROWS_AS(make_example(empty), Error);
}

TEST_CASE("example loss") {
  auto graphs = tiny_corpus();
  std::vector<Arborescence> trees;
  for (const auto& g : graphs) trees.push_back(build_arborescence(g));
  Parser p(testing::tiny_model(), build_vocabularies(trees));
  auto ex = make_example(graphs[0]);

  SUBCASE("total is the sum of its parts") {
    TrainingConfig cfg;
    Tape t;
    auto l = example_loss(t, p, ex, cfg).values();
    CHECK(l.total == doctest::Approx(l.node_xent + l.head_xent + l.relation_xent + l.coverage + l.mask_bce +
                                     l.attr_combined)
                         .epsilon(1e-12));
  }
  SUBCASE("gamma zero leaves the value heads untouched") {
    TrainingConfig cfg;
    cfg.gamma = 0.0;
    Tape t;
    p.parameters().zero_grad();
    t.backward(example_loss(t, p, ex, cfg).total);
    for (auto* param : p.component_parameters("attr.node.value")) {
      for (double gv : param->grad.values()) CHECK(gv == 0.0);
    }
    double mask_grad = 0;
    for (auto* param : p.component_parameters("attr.node.mask"))
      for (double gv : param->grad.values()) mask_grad += std::abs(gv);
    CHECK(mask_grad > 0.0);
  }
  SUBCASE("deterministic") {
    TrainingConfig cfg;
    Tape t1, t2;
    auto a = example_loss(t1, p, ex, cfg).values();
    auto b = example_loss(t2, p, ex, cfg).values();
    CHECK(a.total == b.total);
  }
}

TEST_CASE("training") {
  auto graphs = tiny_corpus();
  TrainingConfig cfg;
  cfg.epochs = 6;
  cfg.learning_rate = 0.01;
  std::vector<std::size_t> seen;
  auto r = train(graphs, testing::tiny_model(), cfg, graphs,
                 [&](std::size_t epoch, const LossBreakdown&, std::optional<double> dev) {
                   seen.push_back(epoch);
                   CHECK(dev.has_value());
                 });
  REQUIRE(r.log.size() == 6);
  CHECK_FALSE(r.aborted);
  CHECK(seen.size() == 6);
  CHECK(r.log.back().total < r.log.front().total);
  CHECK(r.dev_total.size() == 6);

  // same seed, same log
  auto again = train(graphs, testing::tiny_model(), cfg, graphs);
  for (std::size_t i = 0; i < r.log.size(); ++i) CHECK(again.log[i].total == r.log[i].total);

  std::ostringstream csv;
  write_loss_csv(csv, r);
  auto text = csv.str();
  CHECK(text.rfind("epoch,", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 7);

  CHECK_THROWS_AS(train({}, testing::tiny_model(), cfg), Error);
  cfg.learning_rate = -1;
  CHECK_THROWS_AS(train(graphs, testing::tiny_model(), cfg), Error);
}

TEST_CASE("attribute modes parse") {
  CHECK(attribute_mode_from_string("binary") == AttributeMode::kBinary);
  CHECK(attribute_mode_from_string(to_string(AttributeMode::kConfidence)) == AttributeMode::kConfidence);
  CHECK_THROWS_AS(attribute_mode_from_string("fuzzy"), Error);
}

TEST_CASE("gradient check suite on a small corpus") {
  auto graphs = tiny_corpus();
  graphs.resize(2);
  auto results = gradcheck_suite(graphs, 7);
  CHECK(results.size() >= 5);
  for (const auto& [name, r] : results) {
    CHECK_MESSAGE(r.max_rel_error < 1e-3, name);
    CHECK(r.checked > 0);
  }
}
