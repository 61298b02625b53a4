#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "uds/model.hpp"
#include "uds/numerics/gradcheck.hpp"

namespace uds {

enum class AttributeMode { kConfidence, kBinary };

std::string_view to_string(AttributeMode m);
AttributeMode attribute_mode_from_string(std::string_view s);

struct TrainingConfig {
  double gamma = 1.0;
  AttributeMode mode = AttributeMode::kConfidence;
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t epochs = 10;
  std::size_t batch_size = 1;
  double coverage_weight = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct LossBreakdown {
  double node_xent = 0.0;
  double head_xent = 0.0;
  double relation_xent = 0.0;
  double coverage = 0.0;
  double mask_bce = 0.0;
  double attr_combined = 0.0;
  double total = 0.0;
};

// 0 for x <= 0, else 1.
double tau(double x);

struct AttributeLossParts {
  num::Var mse;
  num::Var bce;
  num::Var combined;  // gamma * 2 mse bce / (mse + bce), 0 when both vanish
};

// nu, gold and confidence hold N*K cells in any layout (same size). BCE is a
// sigmoid surrogate against tau(gold); both terms are weighted by c, or by
// tau(c) in binary mode.
AttributeLossParts attribute_loss_parts(num::Var nu, const num::Tensor& gold, const num::Tensor& confidence,
                                        double gamma, AttributeMode mode);
num::Var attribute_loss(num::Var nu, const num::Tensor& gold, const num::Tensor& confidence, double gamma,
                        AttributeMode mode);
// Same contract, rows of the 14 edge properties.
num::Var edge_attribute_loss(num::Var lambda, const num::Tensor& gold, const num::Tensor& confidence, double gamma,
                             AttributeMode mode);

// Mean BCE over all positions, from logits.
num::Var mask_loss(num::Var logits, const num::Tensor& gold_mask);
// Same on probabilities (clamped away from 0 and 1).
double mask_loss(const num::Tensor& probs, const num::Tensor& gold_mask);

struct StructuralLoss {
  num::Var node;
  num::Var head;
  num::Var relation;
  num::Var coverage;
};

// Per-step means of the node/head/relation cross-entropies and of the
// coverage penalty sum_t min(a_t, coverage_t).
StructuralLoss structural_loss(const Parser& parser, const ForcedTrace& trace, const Sentence& s,
                               const std::vector<SemanticRelation>& relations);

struct TrainingExample {
  Sentence sentence;
  std::vector<SemanticRelation> relations;
};

TrainingExample make_example(const UDSGraph& g);

struct LossVars {
  num::Var node, head, relation, coverage, mask, attr, total;
  LossBreakdown values() const;
};

LossVars example_loss(num::Tape& tape, const Parser& parser, const TrainingExample& ex, const TrainingConfig& cfg,
                      num::Rng* dropout_rng = nullptr);

class Adam {
 public:
  Adam(num::ParameterStore& store, double lr, double beta1, double beta2, double eps);
  // Applies one update from the gradients currently stored in the parameters.
  void step();

 private:
  num::ParameterStore* store_;
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<num::Tensor> m_, v_;
};

struct TrainResult {
  Parser parser;
  std::vector<LossBreakdown> log;
  std::vector<std::optional<double>> dev_total;
  bool aborted = false;
  std::string message;
};

using EpochCallback = std::function<void(std::size_t epoch, const LossBreakdown&, std::optional<double> dev)>;

// Vocabularies come from the training graphs. On a non-finite loss the
// parameters are restored to the end of the last finished epoch and the
// result is marked aborted (NONFINITE_LOSS).
TrainResult train(const std::vector<UDSGraph>& train_set, const ModelConfig& model_cfg, const TrainingConfig& cfg,
                  const std::vector<UDSGraph>& dev_set = {}, const EpochCallback& on_epoch = {});

void write_loss_csv(std::ostream& out, const TrainResult& result);

// Central-difference checks of every model component and the full loss on a
// tiny model built over the given graphs.
std::vector<std::pair<std::string, num::GradCheckResult>> gradcheck_suite(const std::vector<UDSGraph>& graphs,
                                                                           std::uint64_t seed);

}  // namespace uds
