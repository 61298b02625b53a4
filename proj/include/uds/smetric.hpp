#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "uds/graph.hpp"

namespace uds {

// Largest possible difference between two attribute values.
inline constexpr double kAttributeSpan = 6.0;

// 1 - ((a - b) / 6)^2, clamped to [0, 1]. Throws VALUE_RANGE outside [-3, 3].
double attribute_similarity(double a, double b);

struct MatchOptions {
  bool include_attributes = true;
  // Score semantic_subgraph() of both sides: semantics nodes only.
  bool semantics_only = false;
  std::size_t restarts = 8;
  std::uint64_t seed = 0;
};

// Triples of one graph over its variables: semantics nodes, then (unless
// semantics-only) one variable per token that is a non-head instance target.
struct TripleSet {
  struct Attr {
    std::string property;
    double value = 0.0;
  };
  struct Edge {
    std::size_t head = 0;
    std::size_t dependent = 0;
    std::string relation;  // "argument" or "non-head"
    std::vector<Attr> attributes;
  };
  std::vector<std::string> labels;               // instance triple per variable
  std::vector<std::vector<Attr>> node_attributes;  // per variable
  std::vector<Edge> edges;

  std::size_t variable_count() const { return labels.size(); }
  std::size_t triple_count(bool include_attributes) const;
};

TripleSet triples_of(const UDSGraph& g, const MatchOptions& options);

struct MatchResult {
  // pred variable -> gold variable
  std::vector<std::optional<std::size_t>> alignment;
  double matched_instance = 0.0;
  double matched_edge = 0.0;
  double matched_attribute = 0.0;
  std::size_t pred_triples = 0;
  std::size_t gold_triples = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  double matched() const { return matched_instance + matched_edge + matched_attribute; }
};

// Hill climbing with reassign/swap moves from a label-greedy start, then
// restarts - 1 seeded random starts.
MatchResult s_score(const UDSGraph& pred, const UDSGraph& gold, const MatchOptions& options = {});

// Exhaustive search over injective alignments of the smaller side. Throws
// TOO_LARGE beyond 8 variables on the smaller side or 2e7 alignments.
MatchResult brute_force_match(const UDSGraph& pred, const UDSGraph& gold, const MatchOptions& options = {});

struct CorpusScore {
  std::vector<std::string> sentence_ids;
  std::vector<MatchResult> sentences;
  double matched = 0.0;
  std::size_t pred_triples = 0;
  std::size_t gold_triples = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Micro-averaged over sentences paired by sentence_id (gold order). Throws
// ID_MISMATCH unless both sides hold the same ids.
CorpusScore corpus_eval(const std::vector<UDSGraph>& pred, const std::vector<UDSGraph>& gold,
                        const MatchOptions& options = {}, std::size_t threads = 1);

}  // namespace uds
