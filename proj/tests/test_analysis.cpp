#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "uds/analysis.hpp"
#include "uds/error.hpp"
#include "uds/numerics/rng.hpp"

using namespace uds;

namespace {

const std::vector<double> kX{1.2, -0.5, 2.3, 0.7, -1.1, 0.0, 1.9};
const std::vector<double> kY{0.8, -0.2, 2.9, 0.1, -1.5, 0.4, 1.2};
const std::vector<double> kGoldCol{1.0, 2.0, -1.0, 0.5, -0.5, -2.0, 0.2};

// Dense matrix over the given columns.
AttributeMatrix dense(const std::vector<std::vector<double>>& cols, std::vector<std::string> names = {}) {
  AttributeMatrix m;
  if (names.empty())
    for (std::size_t j = 0; j < cols.size(); ++j) names.push_back("p" + std::to_string(j));
  m.properties = names;
  for (std::size_t i = 0; i < cols[0].size(); ++i) {
    m.add_row("r" + std::to_string(i));
    for (std::size_t j = 0; j < cols.size(); ++j) m.cells.back()[j] = Cell{cols[j][i], 1.0};
  }
  return m;
}

}  // namespace

TEST_CASE("pearson matches the reference values") {
  auto r = pearson(kX, kY);
  CHECK(r.rho == doctest::Approx(0.9200184502816765).epsilon(1e-12));
  CHECK(r.p_value == doctest::Approx(0.0033270674723348825).epsilon(1e-9));
  CHECK(r.n == 7);

  auto w = pearson(kX, {0.3, 0.9, -0.4, 1.1, 0.2, -0.8, 0.5});
  CHECK(w.rho == doctest::Approx(-0.13154434827625094).epsilon(1e-12));
  CHECK(w.p_value == doctest::Approx(0.7786104791136131).epsilon(1e-9));
}

TEST_CASE("pearson edge cases") {
  std::vector<double> neg;
  for (double v : kX) neg.push_back(-2 * v + 1);
  CHECK(pearson(kX, kX).rho == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(pearson(kX, neg).rho == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(pearson(kX, kX).p_value == 0.0);

  try {
    pearson(kX, std::vector<double>(7, 0.4));
    FAIL("expected DEGENERATE");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDegenerate);
  }
  CHECK_THROWS_AS(pearson({1, 2}, {2, 1}), Error);
  CHECK_THROWS_AS(pearson({1, 2, 3}, {2, 1}), Error);
}

TEST_CASE("per-attribute correlation") {
  auto gold = dense({kX, kY});
  auto pred = dense({kY, std::vector<double>(7, 0.0)});
  auto rows = pearson_per_attribute(pred, gold);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].rho.value() == doctest::Approx(0.9200184502816765).epsilon(1e-12));
  CHECK(rows[0].n == 7);
  CHECK_FALSE(rows[1].rho);  // constant prediction
  CHECK(macro_rho(rows).value() == doctest::Approx(0.9200184502816765));
  CHECK_FALSE(macro_rho(rows, 8));

  // absent gold cells are skipped, not zero
  gold.cells[0][0].reset();
  CHECK(pearson_per_attribute(pred, gold)[0].n == 6);
}

TEST_CASE("attribute matrices from graphs") {
  auto g = testing::fig2();
  auto nodes = attribute_matrix({g}, Carrier::kNode);
  CHECK(nodes.column_count() == AttributeInventory::kNodeCount);
  CHECK(nodes.row_count() == 4);  // nodes with at least one annotation
  auto edges = attribute_matrix({g}, Carrier::kEdge);
  CHECK(edges.column_count() == AttributeInventory::kEdgeCount);
  CHECK(edges.row_count() == 2);
  CHECK(edges.rows[0].find('\t') != std::string::npos);

  auto aligned = align_rows(attribute_matrix({}, Carrier::kNode), nodes);
  CHECK(aligned.rows == nodes.rows);
  for (const auto& row : aligned.cells)
    for (const auto& c : row) CHECK_FALSE(c);
}

TEST_CASE("binary scores and thresholds") {
  std::vector<double> inverted;
  for (double v : kGoldCol) inverted.push_back(-v);
  CHECK(binary_score(inverted, kGoldCol, 0).f1.value() == 0.0);

  const std::vector<double> shifted{0.9, 1.5, 0.1, 0.6, -0.7, -1.0, -0.1};
  CHECK(binary_score(shifted, kGoldCol, 0).f1.value() == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(binary_score(shifted, kGoldCol, 0.3).f1.value() == doctest::Approx(0.8571428571428571).epsilon(1e-14));
  CHECK_FALSE(binary_score({-1, -1}, {-1, -2}, 0).f1);

  auto grid = threshold_grid();
  CHECK(grid.size() == 121);
  CHECK(grid.front() == -3.0);
  CHECK(grid.back() == 3.0);

  auto gold = dense({kGoldCol}, {"x"});
  auto pred = dense({shifted}, {"x"});
  auto choice = tune_thresholds(pred, gold);
  REQUIRE(choice.size() == 1);
  // every t in [-0.7, -0.1) keeps the four positives and one negative (F1 8/9); lowest wins
  CHECK(choice[0].threshold == -0.7);
  CHECK(choice[0].dev_f1.value() == doctest::Approx(8.0 / 9.0).epsilon(1e-14));

  // no dev pairs: default threshold
  AttributeMatrix empty_gold = gold;
  for (auto& row : empty_gold.cells) row[0].reset();
  auto none = tune_thresholds(pred, empty_gold);
  CHECK(none[0].threshold == 0.0);
  CHECK_FALSE(none[0].dev_f1);

  auto report = binarized_f1(pred, gold, threshold_map(choice));
  CHECK(report.macro_f1.value() == doctest::Approx(8.0 / 9.0).epsilon(1e-14));
}

TEST_CASE("median baseline") {
  CHECK(median_baseline(dense({{1, 2, 3}}))["p0"] == 2.0);
  CHECK(median_baseline(dense({{3, 1}}))["p0"] == 2.0);

  auto train = dense({kX, kY});
  auto test = dense({kY, kX});
  auto base = median_baseline(train);
  auto pred = apply_baseline(base, test);
  for (const auto& row : pred.cells) CHECK(row[0]->value == base["p0"]);
  for (const auto& r : pearson_per_attribute(pred, test)) CHECK_FALSE(r.rho);
  CHECK_FALSE(macro_rho(pearson_per_attribute(pred, test)));
  CHECK(binarized_f1(pred, test, {}).macro_f1.has_value());
}

TEST_CASE("psi") {
  SUBCASE("reference value") {
    auto gold = dense({{1, 2, -1, .5, -2, 1.5}, {.8, 1.5, -.5, 0, -1.8, 2}});
    auto pred = dense({{.7, 2.4, -1.3, .2, -1.5, 1.1}, {1, 1.1, -.9, .4, -2.2, 1.6}});
    CHECK(psi(pred, gold, 0, 1) == doctest::Approx(0.5887325985462235).epsilon(1e-12));
    CHECK(psi(pred, gold, 1, 0) == psi(pred, gold, 0, 1));
  }
  SUBCASE("uncorrelated residuals give tanh(1)") {
    std::vector<double> gj{1, 2, 0, -1, 0.5}, gk{0.5, 1, 0.2, -1, 0};
    std::vector<double> rj{1, -1, 1, -1, 0}, rk{1, 1, -1, -1, 0};
    std::vector<double> pj, pk;
    for (std::size_t i = 0; i < gj.size(); ++i) {
      pj.push_back(gj[i] - rj[i]);
      pk.push_back(gk[i] - rk[i]);
    }
    CHECK(psi(dense({pj, pk}), dense({gj, gk}), 0, 1) == doctest::Approx(std::tanh(1.0)).epsilon(1e-14));
  }
  SUBCASE("zero predictions on centred gold give zero") {
    std::vector<double> gj{1, -1, 2, -2}, gk{0.5, -0.2, 1.0, -1.3};
    auto zeros = std::vector<double>(4, 0.0);
    CHECK(std::abs(psi(dense({zeros, zeros}), dense({gj, gk}), 0, 1)) < 1e-14);
  }
  SUBCASE("degenerate") {
    auto gold = dense({{1, 2, 3}, {1, 1, 1}});
    CHECK_THROWS_AS(psi(gold, gold, 0, 1), Error);
  }
}

TEST_CASE("psi matrix") {
  num::Rng rng(17);
  std::vector<std::vector<double>> g(4), p(4);
  for (int i = 0; i < 80; ++i) {
    double z = rng.normal();
    for (int j = 0; j < 4; ++j) {
      double v = (j < 2 ? z : 0.0) + rng.normal();
      g[j].push_back(v);
      p[j].push_back(v + 0.5 * rng.normal());
    }
  }
  auto gold = dense(g), pred = dense(p);
  auto r = psi_matrix(pred, gold, 200, 0.05, 3, 2);
  REQUIRE(r.psi.size() == 4);
  for (std::size_t j = 0; j < 4; ++j) {
    CHECK_FALSE(r.defined[j][j]);
    CHECK(r.psi[j][j] == 0.0);
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(std::abs(r.psi[j][k] - r.psi[k][j]) <= 1e-12);
      CHECK(r.significant[j][k] == r.significant[k][j]);
      CHECK(r.pair_count[j][k] == (j == k ? 0u : 80u));
    }
  }
  CHECK(r.tested_pairs == 6);
  CHECK(r.corrected_alpha == doctest::Approx(0.05 / 6));
  CHECK(r.significant[0][1]);
  CHECK(r.psi[0][1] > 0.0);

  // same seed, same answer regardless of threads
  auto again = psi_matrix(pred, gold, 200, 0.05, 3, 1);
  CHECK(again.p_value == r.p_value);
  CHECK(again.psi == r.psi);

  CHECK_THROWS_AS(psi_matrix(dense({{1, 2, 3}}), gold), Error);
}
