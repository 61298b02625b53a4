#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "uds/arborescence.hpp"
#include "uds/attributes.hpp"
#include "uds/graph.hpp"
#include "uds/numerics/layers.hpp"
#include "uds/numerics/parameters.hpp"
#include "uds/numerics/tape.hpp"

namespace uds {

struct ModelConfig {
  std::size_t token_dim = 32;
  std::size_t pos_dim = 16;
  std::size_t char_dim = 16;
  std::size_t char_filters = 16;
  std::size_t char_window = 3;
  // Width of optional per-token contextual vectors; zeros when a sentence has none.
  std::size_t contextual_dim = 0;
  // Per direction; encoder states and decoder states are 2 * hidden wide.
  std::size_t hidden = 64;
  std::size_t layers = 1;
  std::size_t index_dim = 16;
  std::size_t relation_dim = 16;
  std::size_t max_index = 128;
  std::size_t attention_dim = 64;
  std::size_t z_dim = 64;
  std::size_t arc_dim = 64;
  std::size_t attr_hidden = 64;
  std::size_t edge_dim = 32;
  std::size_t hash_buckets = 64;
  double dropout = 0.0;
  // Ablation: alpha = sigmoid(nu) through one shared head instead of separate heads.
  bool tied_attribute_heads = false;
  double mask_threshold = 0.5;
  // 1 = greedy.
  std::size_t beam = 1;
  std::uint64_t seed = 1;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

nlohmann::json config_to_json(const ModelConfig& c);
ModelConfig config_from_json(const nlohmann::json& j);

class Vocabulary {
 public:
  std::size_t add(const std::string& item);
  std::optional<std::size_t> find(const std::string& item) const;
  const std::string& at(std::size_t i) const { return items_[i]; }
  std::size_t size() const { return items_.size(); }
  const std::vector<std::string>& items() const { return items_; }

  nlohmann::json to_json() const { return items_; }
  static Vocabulary from_json(const nlohmann::json& j);

 private:
  std::vector<std::string> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline constexpr std::string_view kUnknown = "<unk>";
inline constexpr std::string_view kEndLabel = "<end>";

struct Vocabularies {
  Vocabulary tokens;  // known forms; unseen forms hash into extra buckets
  Vocabulary pos;
  Vocabulary chars;   // single bytes plus boundary markers
  Vocabulary labels;  // generation vocabulary: <unk>, <end>, SOMETHING, then node labels
};

Vocabularies build_vocabularies(const std::vector<Arborescence>& corpus);

// Parser input. POS tags are required; contextual vectors are optional.
struct Sentence {
  std::string id;
  std::vector<Token> tokens;
  std::vector<std::vector<double>> contextual;
};

Sentence sentence_of(const UDSGraph& g);

struct EncoderState {
  // states[l][t] = [fwd; bwd] for layer l, token t.
  std::vector<std::vector<num::Var>> states;
  // Per layer [bwd state of token 0; fwd state of token n-1].
  std::vector<num::Var> summary;
  num::Var memory;  // top layer stacked, [n, 2H]
  num::Var keys;    // attention keys, [n, attention_dim]
  // Label embeddings already built on this tape.
  mutable std::map<std::string, num::Var> label_cache;

  std::size_t length() const { return states.empty() ? 0 : states[0].size(); }
};

// One decoded node (index 0 is the root).
struct DecoderNode {
  std::string label;
  NodeKind kind = NodeKind::kRoot;
  std::size_t head = 0;
  Relation relation = Relation::kRoot;
  std::optional<std::size_t> copy_of;
  num::Var h;       // top decoder layer
  num::Var head_start, head_end, rel_src, rel_tgt;
};

struct DecoderState {
  std::vector<num::LstmState> layers;
  std::vector<DecoderNode> nodes;
  num::Var coverage;  // running sum of attention, [n]
};

// Everything computed for node j of a decode.
struct StepOutput {
  // Head and relation of node j (absent for the root).
  num::Var head;
  std::vector<std::size_t> head_candidates;
  num::Var relation;
  num::Var attention;
  num::Var coverage;  // accumulated attention before this step
  num::Var z;
  // P(next node) over vocab ++ source tokens ++ copy_candidates.
  num::Var next_node;
  num::Var switch_probs;  // [p_gen, p_enc, p_dec]
  std::vector<std::size_t> copy_candidates;
};

struct AttributeOutput {
  std::size_t node = 0;  // relation position (1-based), i.e. arborescence pre-order index
  std::size_t head = 0;  // edges only
  num::Var mask_logits;
  num::Var values;
};

struct ForcedTrace {
  std::vector<StepOutput> steps;  // one per node incl. root: relations.size() + 1
  std::vector<AttributeOutput> nodes;
  std::vector<AttributeOutput> edges;
};

struct NodePrediction {
  std::size_t node = 0;
  std::vector<double> alpha;
  std::vector<double> nu;
};

struct EdgePrediction {
  std::size_t head = 0;
  std::size_t dependent = 0;
  std::vector<double> beta;
  std::vector<double> lambda;
};

struct AttributePrediction {
  std::vector<NodePrediction> nodes;
  std::vector<EdgePrediction> edges;
};

struct ForcedDecodeResult {
  AttributePrediction attributes;
  // Gold structure with every property filled: value = nu/lambda clamped,
  // confidence = alpha/beta.
  UDSGraph graph;
};

class Parser {
 public:
  Parser(ModelConfig config, Vocabularies vocab);

  const ModelConfig& config() const { return config_; }
  ModelConfig& mutable_config() { return config_; }
  const Vocabularies& vocab() const { return vocab_; }
  num::ParameterStore& parameters() { return params_; }
  const num::ParameterStore& parameters() const { return params_; }

  // Names of parameters grouped by module, for component gradient checks.
  std::vector<num::Parameter*> component_parameters(const std::string& prefix);

  // dropout_rng non-null enables dropout.
  EncoderState encode(num::Tape& tape, const Sentence& s, num::Rng* dropout_rng = nullptr) const;

  DecoderState initial_state(num::Tape& tape, const EncoderState& enc) const;
  // Feeds node j's label through the decoder and appends it to the state.
  void advance(num::Tape& tape, const EncoderState& enc, DecoderState& state, const std::string& label,
               NodeKind kind, std::optional<std::size_t> copy_of) const;
  // Softmax over candidate heads for the newest node.
  num::Var head_distribution(num::Tape& tape, const DecoderState& state,
                             const std::vector<std::size_t>& candidates) const;
  num::Var relation_distribution(num::Tape& tape, const DecoderState& state, std::size_t head) const;
  // Attention, z and the next-node distribution for the newest node, whose
  // head and relation must already be set.
  void complete(num::Tape& tape, const EncoderState& enc, DecoderState& state, StepOutput& out) const;
  num::Var next_node_distribution(num::Tape& tape, num::Var z, num::Var attention, const DecoderState& state,
                                  const std::vector<std::size_t>& copy_candidates, num::Var* switch_out) const;

  // Teacher-forced step for node relations[j-1] (or the root when j == 0).
  StepOutput decoder_step(num::Tape& tape, const EncoderState& enc, DecoderState& state,
                          const SemanticRelation* rel) const;

  // (mask logits, values) over the 44 node / 14 edge properties.
  std::pair<num::Var, num::Var> node_attributes(num::Tape& tape, num::Var z) const;
  std::pair<num::Var, num::Var> edge_attributes(num::Tape& tape, num::Var h_head, num::Var h_dep) const;

  ForcedTrace teacher_force(num::Tape& tape, const Sentence& s, const std::vector<SemanticRelation>& relations,
                            num::Rng* dropout_rng = nullptr) const;

  // Outcome indices in next_node that realise the given next relation (or END when null).
  std::vector<std::size_t> gold_outcomes(const StepOutput& step, const Sentence& s,
                                         const SemanticRelation* next) const;

  std::vector<SemanticRelation> decode(const Sentence& s) const;
  UDSGraph parse(const Sentence& s) const;
  ForcedDecodeResult forced_decode(const Sentence& s, const Arborescence& gold) const;

  void save(const std::string& path) const;
  static Parser load(const std::string& path);

 private:
  num::Var label_embedding(num::Tape& tape, const EncoderState& enc, const std::string& label) const;
  num::Var char_features(num::Tape& tape, const std::string& word) const;
  std::size_t token_row(const std::string& form) const;
  num::Var index_embedding(num::Tape& tape, std::size_t index) const;

  ModelConfig config_;
  Vocabularies vocab_;
  num::ParameterStore params_;

  num::Parameter* token_emb_ = nullptr;
  num::Parameter* pos_emb_ = nullptr;
  num::Parameter* char_emb_ = nullptr;
  num::Parameter* index_emb_ = nullptr;
  num::Parameter* relation_emb_ = nullptr;
  num::Linear char_conv_;
  std::vector<num::LstmCell> enc_fwd_, enc_bwd_, dec_;
  num::Linear attn_key_, attn_query_;
  num::Parameter* attn_v_ = nullptr;
  num::Mlp z_mlp_;
  num::Linear vocab_out_;
  num::Mlp switch_mlp_;
  num::Parameter* copy_w_ = nullptr;
  num::Mlp head_start_, head_end_;
  num::Biaffine head_scorer_;
  num::Mlp rel_src_, rel_tgt_;
  num::Bilinear rel_scorer_;
  num::Mlp node_mask_, node_attr_;
  num::Mlp edge_mask_src_, edge_mask_tgt_, edge_attr_src_, edge_attr_tgt_;
  num::Bilinear edge_mask_bilinear_, edge_attr_bilinear_;
  num::Mlp edge_mask_, edge_attr_;
};

}  // namespace uds
