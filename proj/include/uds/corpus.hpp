#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "uds/graph.hpp"
#include "uds/model.hpp"
#include "uds/training.hpp"

namespace uds {

struct Corpus {
  std::vector<UDSGraph> graphs;

  // Graphs whose split label equals name.
  std::vector<UDSGraph> split(std::string_view name) const;
};

// Reads JSON Lines in the interchange format; blank lines are skipped.
// Every graph is validated. When split is non-empty only graphs of that split
// are kept (unlabelled graphs adopt it). Duplicate sentence ids are rejected.
// Errors: PARSE_ERROR / VALIDATION_ERROR / UNSUPPORTED_VERSION with the
// 1-based line number in the message; IO when the file cannot be opened.
Corpus load_corpus(const std::string& path, std::string_view split = {});
void save_corpus(const std::string& path, const Corpus& corpus);

struct CorrelationTarget {
  std::string a;
  std::string b;
  double rho = 0.0;
};

struct SyntheticGrammarConfig {
  std::size_t sentences = 64;
  std::uint64_t seed = 1;
  // Construction mix; must sum to 1.
  double transitive = 0.25;
  double multiword = 0.25;
  double embedding = 0.25;
  double control = 0.25;
  // Requested pairwise correlations between properties of the same carrier.
  std::vector<CorrelationTarget> correlations = {
      {"genericity-arg-particular", "genericity-arg-kind", -0.6},
      {"supersense-noun.person", "genericity-arg-particular", 0.5},
      {"time-dur-days", "time-dur-weeks", 0.7},
      {"factuality-factual", "genericity-pred-particular", 0.5},
      {"volition", "instigation", 0.8},
      {"awareness", "sentient", 0.7},
  };
  // Probability that an applicable property is annotated.
  double density = 0.5;
  double confidence_min = 0.5;
  double confidence_max = 1.0;
  // Split fractions; the remainder after train and dev is test.
  double train_fraction = 1.0;
  double dev_fraction = 0.0;

  void validate() const;
};

// Deterministic given the seed. Sentence templates:
//   transitive   "Smith saw Jones"
//   multiword    "the old dog chased a cat"   (multi-token argument spans)
//   embedding    "Smith said that Jones left Paris"   (SOMETHING argument)
//   control      "Smith persuaded Jones to leave Paris" (one re-entrant node)
// Attribute values: z = L e with L the Cholesky factor of the requested
// correlation matrix, clamped to [-3, 3]. Predicate nodes carry factuality,
// predicate genericity and time; arguments carry argument genericity and
// supersenses; predicate->argument edges carry the protorole properties.
Corpus generate_synthetic(const SyntheticGrammarConfig& cfg);

// INI-style configuration, one file for all commands:
//   [synthetic] sentences, seed, transitive, multiword, embedding, control,
//               density, confidence_min, confidence_max, train_fraction,
//               dev_fraction, correlations = "a b 0.8; c d -0.5"
//   [model]     any ModelConfig field by name
//   [training]  gamma, mode, learning_rate, beta1, beta2, adam_eps, epochs,
//               batch_size, coverage_weight, seed
// Unknown keys are errors (INVALID_ARGUMENT); missing keys keep defaults.
struct ToolConfig {
  SyntheticGrammarConfig synthetic;
  ModelConfig model;
  TrainingConfig training;
};

ToolConfig parse_tool_config(const std::string& text);
ToolConfig load_tool_config(const std::string& path);

std::vector<CorrelationTarget> parse_correlations(std::string_view text);

}  // namespace uds
