#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "uds/graph.hpp"

namespace uds {

struct Cell {
  double value = 0.0;
  double confidence = 1.0;
};

// Rows are annotated node or edge instances, columns are properties in
// inventory order. Absent cells are nullopt (never zero).
struct AttributeMatrix {
  std::vector<std::string> properties;
  std::vector<std::string> rows;
  std::vector<std::vector<std::optional<Cell>>> cells;

  std::size_t row_count() const { return rows.size(); }
  std::size_t column_count() const { return properties.size(); }
  void add_row(std::string key);
};

enum class Carrier { kNode, kEdge };

// Node rows keyed "sentence\tnode-id", edge rows "sentence\thead-id\tdep-id".
// Only cells with confidence > 0 are stored.
AttributeMatrix attribute_matrix(const std::vector<UDSGraph>& graphs, Carrier carrier);

// Restricts pred to the rows of gold (same order); missing rows stay empty.
AttributeMatrix align_rows(const AttributeMatrix& pred, const AttributeMatrix& gold);

struct PearsonResult {
  double rho = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

// Two-sided p from t = rho sqrt((n-2)/(1-rho^2)) with n-2 degrees of freedom.
// Throws DEGENERATE when n < 3 or either side has zero variance.
PearsonResult pearson(const std::vector<double>& x, const std::vector<double>& y);

struct PropertyCorrelation {
  std::string property;
  std::size_t n = 0;
  std::optional<double> rho;  // undefined for constant predictions
  std::optional<double> p_value;
};

// Paired over cells annotated in gold and present in pred.
std::vector<PropertyCorrelation> pearson_per_attribute(const AttributeMatrix& pred, const AttributeMatrix& gold);

// Mean of defined rho over properties with at least min_n pairs.
std::optional<double> macro_rho(const std::vector<PropertyCorrelation>& rows, std::size_t min_n = 1);

struct BinaryScore {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::optional<double> f1;  // undefined when tp + fp + fn == 0
};

BinaryScore binary_score(const std::vector<double>& pred, const std::vector<double>& gold, double threshold);

// Grid on [-3, 3], step 0.05.
std::vector<double> threshold_grid();

struct ThresholdChoice {
  std::string property;
  double threshold = 0.0;
  std::optional<double> dev_f1;
};

// Per property: the grid threshold with the highest dev F1 (positive class:
// gold > 0, pred > threshold); ties go to the lowest threshold. Properties
// without dev pairs get threshold 0.
std::vector<ThresholdChoice> tune_thresholds(const AttributeMatrix& dev_pred, const AttributeMatrix& dev_gold);

struct PropertyF1 {
  std::string property;
  double threshold = 0.0;
  BinaryScore score;
};

struct F1Report {
  std::vector<PropertyF1> properties;
  std::optional<double> macro_f1;  // mean of defined per-property F1
};

F1Report binarized_f1(const AttributeMatrix& pred, const AttributeMatrix& gold,
                      const std::map<std::string, double>& thresholds);

std::map<std::string, double> threshold_map(const std::vector<ThresholdChoice>& choices);

// Median over annotated cells per property (mean of the two middle values
// for even counts). Properties without annotations are absent.
std::map<std::string, double> median_baseline(const AttributeMatrix& train_gold);

// Constant predictions in every cell annotated in gold.
AttributeMatrix apply_baseline(const std::map<std::string, double>& baseline, const AttributeMatrix& gold);

// tanh(1 - |corr(g_j - p_j, g_k - p_k)| / |corr(g_j, g_k)|) over rows where
// both properties are present in pred and gold. The residual correlation is
// uncentred: mean(r_j r_k) / sqrt(mean(r_j^2) mean(r_k^2)); the gold
// correlation is Pearson. Throws DEGENERATE for fewer than 3 rows or a zero
// denominator.
double psi(const AttributeMatrix& pred, const AttributeMatrix& gold, std::size_t j, std::size_t k);

struct PsiReport {
  std::vector<std::string> properties;
  std::vector<std::vector<double>> psi;  // 0 where undefined
  std::vector<std::vector<bool>> defined;
  std::vector<std::vector<bool>> significant;
  std::vector<std::vector<double>> p_value;
  std::vector<std::vector<std::size_t>> pair_count;
  std::size_t tested_pairs = 0;
  double corrected_alpha = 0.0;
};

// Row-resampling bootstrap per pair; p = 2 min(#psi* <= 0, #psi* >= 0) / B,
// significant when p < alpha / (number of defined pairs). Undefined
// replicants count as 0.
PsiReport psi_matrix(const AttributeMatrix& pred, const AttributeMatrix& gold, std::size_t replicants = 1000,
                     double alpha = 0.05, std::uint64_t seed = 0, std::size_t threads = 1);

}  // namespace uds
