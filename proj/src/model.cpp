#include "uds/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "uds/error.hpp"
#include "uds/numerics/checkpoint.hpp"
#include "uds/numerics/ops.hpp"

namespace uds {

using num::Init;
using num::Tape;
using num::Tensor;
using num::Var;

namespace {

constexpr std::string_view kPad = "<pad>";
constexpr std::string_view kBow = "<bow>";
constexpr std::string_view kEow = "<eow>";

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::size_t argmax(const Tensor& t) {
  return static_cast<std::size_t>(std::max_element(t.data(), t.data() + t.size()) - t.data());
}

double safe_log(double p) { return std::log(std::max(p, 1e-300)); }

}  // namespace

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw Error(ErrorCode::kInvalidArgument, std::string("model.") + name + " must be positive");
  };
  positive(token_dim, "token_dim");
  positive(pos_dim, "pos_dim");
  positive(char_dim, "char_dim");
  positive(char_filters, "char_filters");
  positive(char_window, "char_window");
  positive(hidden, "hidden");
  positive(layers, "layers");
  positive(index_dim, "index_dim");
  positive(relation_dim, "relation_dim");
  positive(max_index, "max_index");
  positive(attention_dim, "attention_dim");
  positive(z_dim, "z_dim");
  positive(arc_dim, "arc_dim");
  positive(attr_hidden, "attr_hidden");
  positive(edge_dim, "edge_dim");
  positive(hash_buckets, "hash_buckets");
  positive(beam, "beam");
  if (beam > 5) throw Error(ErrorCode::kInvalidArgument, "model.beam must be at most 5");
  if (dropout < 0.0 || dropout >= 1.0) throw Error(ErrorCode::kInvalidArgument, "model.dropout must be in [0,1)");
  if (mask_threshold < 0.0 || mask_threshold > 1.0) {
    throw Error(ErrorCode::kInvalidArgument, "model.mask_threshold must be in [0,1]");
  }
}

nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"token_dim", c.token_dim},       {"pos_dim", c.pos_dim},
          {"char_dim", c.char_dim},         {"char_filters", c.char_filters},
          {"char_window", c.char_window},   {"contextual_dim", c.contextual_dim},
          {"hidden", c.hidden},             {"layers", c.layers},
          {"index_dim", c.index_dim},       {"relation_dim", c.relation_dim},
          {"max_index", c.max_index},       {"attention_dim", c.attention_dim},
          {"z_dim", c.z_dim},               {"arc_dim", c.arc_dim},
          {"attr_hidden", c.attr_hidden},   {"edge_dim", c.edge_dim},
          {"hash_buckets", c.hash_buckets}, {"dropout", c.dropout},
          {"tied_attribute_heads", c.tied_attribute_heads},
          {"mask_threshold", c.mask_threshold},
          {"beam", c.beam},                 {"seed", c.seed}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("token_dim", c.token_dim);
  get("pos_dim", c.pos_dim);
  get("char_dim", c.char_dim);
  get("char_filters", c.char_filters);
  get("char_window", c.char_window);
  get("contextual_dim", c.contextual_dim);
  get("hidden", c.hidden);
  get("layers", c.layers);
  get("index_dim", c.index_dim);
  get("relation_dim", c.relation_dim);
  get("max_index", c.max_index);
  get("attention_dim", c.attention_dim);
  get("z_dim", c.z_dim);
  get("arc_dim", c.arc_dim);
  get("attr_hidden", c.attr_hidden);
  get("edge_dim", c.edge_dim);
  get("hash_buckets", c.hash_buckets);
  get("dropout", c.dropout);
  get("tied_attribute_heads", c.tied_attribute_heads);
  get("mask_threshold", c.mask_threshold);
  get("beam", c.beam);
  get("seed", c.seed);
  return c;
}

std::size_t Vocabulary::add(const std::string& item) {
  auto it = index_.find(item);
  if (it != index_.end()) return it->second;
  index_.emplace(item, items_.size());
  items_.push_back(item);
  return items_.size() - 1;
}

std::optional<std::size_t> Vocabulary::find(const std::string& item) const {
  auto it = index_.find(item);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Vocabulary Vocabulary::from_json(const nlohmann::json& j) {
  Vocabulary v;
  for (const auto& item : j) v.add(item.get<std::string>());
  return v;
}

Vocabularies build_vocabularies(const std::vector<Arborescence>& corpus) {
  Vocabularies v;
  v.tokens.add(std::string(kRootLabel));
  v.pos.add(std::string(kUnknown));
  for (auto s : {kUnknown, kPad, kBow, kEow}) v.chars.add(std::string(s));
  v.labels.add(std::string(kUnknown));
  v.labels.add(std::string(kEndLabel));
  v.labels.add(std::string(kSomethingLabel));
  for (const auto& a : corpus) {
    for (const auto& t : a.tokens) {
      v.tokens.add(t.form);
      v.pos.add(t.pos);
      for (char c : t.form) v.chars.add(std::string(1, c));
    }
    for (const auto& n : a.nodes) {
      if (n.kind == NodeKind::kRoot) continue;
      v.labels.add(n.label);
      v.tokens.add(n.label);
      for (char c : n.label) v.chars.add(std::string(1, c));
    }
  }
  return v;
}

Sentence sentence_of(const UDSGraph& g) { return {g.sentence_id, g.tokens, {}}; }

Parser::Parser(ModelConfig config, Vocabularies vocab) : config_(std::move(config)), vocab_(std::move(vocab)) {
  config_.validate();
  const auto& c = config_;
  num::Rng rng(c.seed);
  const std::size_t word_dim = c.token_dim + c.char_filters;
  const std::size_t enc_in = word_dim + c.pos_dim + c.contextual_dim;
  const std::size_t state = 2 * c.hidden;
  const std::size_t dec_in = word_dim + c.index_dim;

  token_emb_ = &params_.add("emb.token", {vocab_.tokens.size() + c.hash_buckets, c.token_dim}, Init::kNormal, rng,
                            0.1);
  pos_emb_ = &params_.add("emb.pos", {vocab_.pos.size(), c.pos_dim}, Init::kNormal, rng, 0.1);
  char_emb_ = &params_.add("emb.char", {vocab_.chars.size(), c.char_dim}, Init::kNormal, rng, 0.1);
  char_conv_ = num::Linear(params_, "charcnn", c.char_window * c.char_dim, c.char_filters, rng);
  for (std::size_t l = 0; l < c.layers; ++l) {
    const std::size_t in = l == 0 ? enc_in : state;
    enc_fwd_.emplace_back(params_, "enc.l" + std::to_string(l) + ".fwd", in, c.hidden, rng);
    enc_bwd_.emplace_back(params_, "enc.l" + std::to_string(l) + ".bwd", in, c.hidden, rng);
  }
  for (std::size_t l = 0; l < c.layers; ++l) {
    dec_.emplace_back(params_, "dec.l" + std::to_string(l), l == 0 ? dec_in : state, state, rng);
  }
  index_emb_ = &params_.add("emb.index", {c.max_index, c.index_dim}, Init::kNormal, rng, 0.1);
  relation_emb_ = &params_.add("emb.relation", {kRelationCount, c.relation_dim}, Init::kNormal, rng, 0.1);

  attn_key_ = num::Linear(params_, "attn.key", state, c.attention_dim, rng);
  attn_query_ = num::Linear(params_, "attn.query", state, c.attention_dim, rng);
  attn_v_ = &params_.add("attn.v", {c.attention_dim}, Init::kGlorot, rng);

  const std::size_t z_in = state + state + c.relation_dim + word_dim + c.index_dim;
  z_mlp_ = num::Mlp(params_, "node.z", {z_in, c.z_dim, c.z_dim}, rng, true);
  vocab_out_ = num::Linear(params_, "node.vocab", c.z_dim, vocab_.labels.size(), rng);
  switch_mlp_ = num::Mlp(params_, "node.switch", {c.z_dim, 3}, rng);
  copy_w_ = &params_.add("node.copy.W", {state, c.z_dim}, Init::kGlorot, rng);

  head_start_ = num::Mlp(params_, "head.start", {state, c.arc_dim}, rng, true);
  head_end_ = num::Mlp(params_, "head.end", {state, c.arc_dim}, rng, true);
  head_scorer_ = num::Biaffine(params_, "head.biaffine", c.arc_dim, c.arc_dim, rng);
  rel_src_ = num::Mlp(params_, "rel.src", {state, c.arc_dim}, rng, true);
  rel_tgt_ = num::Mlp(params_, "rel.tgt", {state, c.arc_dim}, rng, true);
  rel_scorer_ = num::Bilinear(params_, "rel.bilinear", c.arc_dim, c.arc_dim, kRelationCount, rng);

  const std::size_t nk = AttributeInventory::kNodeCount;
  const std::size_t ek = AttributeInventory::kEdgeCount;
  node_attr_ = num::Mlp(params_, "attr.node.value", {c.z_dim, c.attr_hidden, nk}, rng);
  edge_attr_src_ = num::Mlp(params_, "attr.edge.value.src", {state, c.edge_dim}, rng, true);
  edge_attr_tgt_ = num::Mlp(params_, "attr.edge.value.tgt", {state, c.edge_dim}, rng, true);
  edge_attr_bilinear_ = num::Bilinear(params_, "attr.edge.value.bilinear", c.edge_dim, c.edge_dim, c.edge_dim, rng);
  edge_attr_ = num::Mlp(params_, "attr.edge.value.mlp", {c.edge_dim, c.attr_hidden, ek}, rng);
  if (!c.tied_attribute_heads) {
    node_mask_ = num::Mlp(params_, "attr.node.mask", {c.z_dim, c.attr_hidden, nk}, rng);
    edge_mask_src_ = num::Mlp(params_, "attr.edge.mask.src", {state, c.edge_dim}, rng, true);
    edge_mask_tgt_ = num::Mlp(params_, "attr.edge.mask.tgt", {state, c.edge_dim}, rng, true);
    edge_mask_bilinear_ =
        num::Bilinear(params_, "attr.edge.mask.bilinear", c.edge_dim, c.edge_dim, c.edge_dim, rng);
    edge_mask_ = num::Mlp(params_, "attr.edge.mask.mlp", {c.edge_dim, c.attr_hidden, ek}, rng);
  }
}

std::vector<num::Parameter*> Parser::component_parameters(const std::string& prefix) {
  std::vector<num::Parameter*> out;
  for (auto* p : params_.all()) {
    if (p->name.rfind(prefix, 0) == 0) out.push_back(p);
  }
  return out;
}

std::size_t Parser::token_row(const std::string& form) const {
  if (auto id = vocab_.tokens.find(form)) return *id;
  return vocab_.tokens.size() + fnv1a(form) % config_.hash_buckets;
}

Var Parser::char_features(Tape& tape, const std::string& word) const {
  auto char_row = [&](std::string_view s) { return vocab_.chars.find(std::string(s)).value_or(0); };
  std::vector<std::size_t> ids{char_row(kBow)};
  for (char ch : word) ids.push_back(char_row(std::string(1, ch)));
  ids.push_back(char_row(kEow));
  while (ids.size() < config_.char_window) ids.push_back(char_row(kPad));
  std::vector<Var> chars;
  for (auto id : ids) chars.push_back(num::lookup(tape, *char_emb_, id));
  std::vector<Var> windows;
  for (std::size_t p = 0; p + config_.char_window <= chars.size(); ++p) {
    std::vector<Var> win(chars.begin() + p, chars.begin() + p + config_.char_window);
    windows.push_back(num::tanh(char_conv_(tape, num::concat(win))));
  }
  return num::maximum(windows);
}

Var Parser::label_embedding(Tape& tape, const EncoderState& enc, const std::string& label) const {
  auto it = enc.label_cache.find(label);
  if (it != enc.label_cache.end()) return it->second;
  Var v = num::concat({num::lookup(tape, *token_emb_, token_row(label)), char_features(tape, label)});
  enc.label_cache.emplace(label, v);
  return v;
}

Var Parser::index_embedding(Tape& tape, std::size_t index) const {
  return num::lookup(tape, *index_emb_, std::min(index, config_.max_index - 1));
}

EncoderState Parser::encode(Tape& tape, const Sentence& s, num::Rng* dropout_rng) const {
  const std::size_t n = s.tokens.size();
  if (n == 0) throw Error(ErrorCode::kEmptyInput, "cannot encode an empty sentence '" + s.id + "'");
  EncoderState enc;
  std::vector<Var> x;
  for (std::size_t t = 0; t < n; ++t) {
    const auto& tok = s.tokens[t];
    std::vector<Var> parts{label_embedding(tape, enc, tok.form),
                           num::lookup(tape, *pos_emb_, vocab_.pos.find(tok.pos).value_or(0))};
    if (config_.contextual_dim > 0) {
      Tensor ctx({config_.contextual_dim});
      if (t < s.contextual.size()) {
        if (s.contextual[t].size() != config_.contextual_dim) {
          throw Error(ErrorCode::kShapeMismatch, "contextual vector width " +
                                                     std::to_string(s.contextual[t].size()) + ", expected " +
                                                     std::to_string(config_.contextual_dim));
        }
        std::copy(s.contextual[t].begin(), s.contextual[t].end(), ctx.data());
      }
      parts.push_back(tape.constant(std::move(ctx)));
    }
    Var xt = num::concat(parts);
    if (dropout_rng) xt = num::dropout(xt, config_.dropout, *dropout_rng);
    x.push_back(xt);
  }
  for (std::size_t l = 0; l < config_.layers; ++l) {
    std::vector<Var> fwd(n), bwd(n);
    num::LstmState st = enc_fwd_[l].zero_state(tape);
    for (std::size_t t = 0; t < n; ++t) fwd[t] = (st = enc_fwd_[l](tape, x[t], st)).h;
    st = enc_bwd_[l].zero_state(tape);
    for (std::size_t t = n; t-- > 0;) bwd[t] = (st = enc_bwd_[l](tape, x[t], st)).h;
    std::vector<Var> layer(n);
    for (std::size_t t = 0; t < n; ++t) layer[t] = num::concat({fwd[t], bwd[t]});
    enc.summary.push_back(num::concat({bwd[0], fwd[n - 1]}));
    enc.states.push_back(layer);
    x = layer;
  }
  enc.memory = num::stack_rows(x);
  std::vector<Var> keys;
  for (const auto& st : x) keys.push_back(attn_key_(tape, st));
  enc.keys = num::stack_rows(keys);
  return enc;
}

DecoderState Parser::initial_state(Tape& tape, const EncoderState& enc) const {
  DecoderState st;
  for (std::size_t l = 0; l < config_.layers; ++l) {
    st.layers.push_back({enc.summary[l], tape.constant(Tensor({2 * config_.hidden}))});
  }
  st.coverage = tape.constant(Tensor({enc.length()}));
  return st;
}

void Parser::advance(Tape& tape, const EncoderState& enc, DecoderState& state, const std::string& label,
                     NodeKind kind, std::optional<std::size_t> copy_of) const {
  const std::size_t j = state.nodes.size();
  Var x = num::concat({label_embedding(tape, enc, label), index_embedding(tape, j)});
  for (std::size_t l = 0; l < dec_.size(); ++l) {
    state.layers[l] = dec_[l](tape, x, state.layers[l]);
    x = state.layers[l].h;
  }
  DecoderNode node;
  node.label = label;
  node.kind = kind;
  node.copy_of = copy_of;
  node.h = x;
  node.head_start = head_start_(tape, x);
  node.head_end = head_end_(tape, x);
  node.rel_src = rel_src_(tape, x);
  node.rel_tgt = rel_tgt_(tape, x);
  state.nodes.push_back(std::move(node));
}

Var Parser::head_distribution(Tape& tape, const DecoderState& state,
                              const std::vector<std::size_t>& candidates) const {
  if (candidates.empty()) throw Error(ErrorCode::kInvalidArgument, "head distribution needs a candidate");
  std::vector<Var> ends;
  for (auto c : candidates) ends.push_back(state.nodes.at(c).head_end);
  return num::softmax(head_scorer_(tape, state.nodes.back().head_start, num::stack_rows(ends)));
}

Var Parser::relation_distribution(Tape& tape, const DecoderState& state, std::size_t head) const {
  return num::softmax(rel_scorer_(tape, state.nodes.at(head).rel_src, state.nodes.back().rel_tgt));
}

Var Parser::next_node_distribution(Tape& tape, Var z, Var attention, const DecoderState& state,
                                   const std::vector<std::size_t>& copy_candidates, Var* switch_out) const {
  Var p_vocab = num::softmax(vocab_out_(tape, z));
  Var logits = switch_mlp_(tape, z);
  Var sw;
  if (copy_candidates.empty()) {
    // No antecedents: renormalise over generate/source-copy.
    sw = num::concat({num::softmax(num::slice(logits, 0, 2)), tape.constant(Tensor({1}))});
  } else {
    sw = num::softmax(logits);
  }
  if (switch_out) *switch_out = sw;
  std::vector<Var> regions{num::scale_by(p_vocab, num::pick(sw, 0)), num::scale_by(attention, num::pick(sw, 1))};
  if (!copy_candidates.empty()) {
    std::vector<Var> hs;
    for (auto c : copy_candidates) hs.push_back(state.nodes.at(c).h);
    Var q = num::matvec(tape.parameter(*copy_w_), z);
    Var a_dec = num::softmax(num::matvec(num::stack_rows(hs), q));
    regions.push_back(num::scale_by(a_dec, num::pick(sw, 2)));
  }
  return num::concat(regions);
}

void Parser::complete(Tape& tape, const EncoderState& enc, DecoderState& state, StepOutput& out) const {
  const std::size_t j = state.nodes.size() - 1;
  const DecoderNode& node = state.nodes.back();
  Var query = attn_query_(tape, node.h);
  Var energy = num::tanh(num::add_rowwise(enc.keys, query));
  Var a = num::softmax(num::matvec(energy, tape.parameter(*attn_v_)));
  out.attention = a;
  out.coverage = state.coverage;
  state.coverage = num::add(state.coverage, a);
  Var ctx = num::matvec_t(enc.memory, a);
  const DecoderNode& head = state.nodes.at(node.head);
  Var rel = num::lookup(tape, *relation_emb_, static_cast<std::size_t>(node.relation));
  Var z = z_mlp_(tape, num::concat({node.h, ctx, rel, label_embedding(tape, enc, head.label),
                                    index_embedding(tape, node.head)}));
  out.z = z;
  out.copy_candidates.clear();
  for (std::size_t k = 1; k <= j; ++k) {
    const auto& prev = state.nodes[k];
    if (is_semantic(prev.kind) && !prev.copy_of) out.copy_candidates.push_back(k);
  }
  out.next_node = next_node_distribution(tape, z, a, state, out.copy_candidates, &out.switch_probs);
}

namespace {

std::vector<std::size_t> head_candidates(const DecoderState& state, bool allow_root) {
  std::vector<std::size_t> out;
  if (allow_root) out.push_back(0);
  for (std::size_t k = 1; k + 1 < state.nodes.size(); ++k) {
    const auto& n = state.nodes[k];
    if (is_semantic(n.kind) && !n.copy_of) out.push_back(k);
  }
  return out;
}

}  // namespace

StepOutput Parser::decoder_step(Tape& tape, const EncoderState& enc, DecoderState& state,
                                const SemanticRelation* rel) const {
  StepOutput out;
  if (!rel) {
    advance(tape, enc, state, std::string(kRootLabel), NodeKind::kRoot, std::nullopt);
    state.nodes.back().head = 0;
    state.nodes.back().relation = Relation::kRoot;
    complete(tape, enc, state, out);
    return out;
  }
  advance(tape, enc, state, rel->label, rel->kind, rel->target_copy);
  out.head_candidates = head_candidates(state, true);
  if (std::find(out.head_candidates.begin(), out.head_candidates.end(), rel->head_index) ==
      out.head_candidates.end()) {
    throw Error(ErrorCode::kInvalidArgument, "relation " + std::to_string(rel->index) + " has head " +
                                                 std::to_string(rel->head_index) + " that cannot take children");
  }
  out.head = head_distribution(tape, state, out.head_candidates);
  out.relation = relation_distribution(tape, state, rel->head_index);
  state.nodes.back().head = rel->head_index;
  state.nodes.back().relation = rel->relation;
  complete(tape, enc, state, out);
  return out;
}

std::pair<Var, Var> Parser::node_attributes(Tape& tape, Var z) const {
  Var values = node_attr_(tape, z);
  if (config_.tied_attribute_heads) return {values, values};
  return {node_mask_(tape, z), values};
}

std::pair<Var, Var> Parser::edge_attributes(Tape& tape, Var h_head, Var h_dep) const {
  Var m_attr = edge_attr_bilinear_(tape, edge_attr_src_(tape, h_head), edge_attr_tgt_(tape, h_dep));
  Var values = edge_attr_(tape, m_attr);
  if (config_.tied_attribute_heads) return {values, values};
  Var m_mask = edge_mask_bilinear_(tape, edge_mask_src_(tape, h_head), edge_mask_tgt_(tape, h_dep));
  return {edge_mask_(tape, m_mask), values};
}

ForcedTrace Parser::teacher_force(Tape& tape, const Sentence& s, const std::vector<SemanticRelation>& relations,
                                  num::Rng* dropout_rng) const {
  ForcedTrace trace;
  EncoderState enc = encode(tape, s, dropout_rng);
  DecoderState state = initial_state(tape, enc);
  trace.steps.push_back(decoder_step(tape, enc, state, nullptr));
  for (std::size_t i = 0; i < relations.size(); ++i) {
    if (relations[i].index != i + 1) {
      throw Error(ErrorCode::kInvalidArgument, "relation sequence is not in pre-order index form");
    }
    trace.steps.push_back(decoder_step(tape, enc, state, &relations[i]));
  }
  for (std::size_t j = 1; j < state.nodes.size(); ++j) {
    const auto& rel = relations[j - 1];
    if (is_semantic(rel.kind) && !rel.target_copy) {
      auto [mask, values] = node_attributes(tape, trace.steps[j].z);
      trace.nodes.push_back({j, 0, mask, values});
    }
    if (rel.relation == Relation::kArgument && rel.head_index != 0 && is_semantic(rel.kind)) {
      auto [mask, values] = edge_attributes(tape, state.nodes[rel.head_index].h, state.nodes[j].h);
      trace.edges.push_back({j, rel.head_index, mask, values});
    }
  }
  return trace;
}

std::vector<std::size_t> Parser::gold_outcomes(const StepOutput& step, const Sentence& s,
                                               const SemanticRelation* next) const {
  const std::size_t v = vocab_.labels.size();
  const std::size_t n = s.tokens.size();
  if (!next) return {*vocab_.labels.find(std::string(kEndLabel))};
  if (next->target_copy) {
    auto it = std::find(step.copy_candidates.begin(), step.copy_candidates.end(), *next->target_copy);
    if (it == step.copy_candidates.end()) {
      throw Error(ErrorCode::kInvalidArgument, "relation " + std::to_string(next->index) +
                                                   " copies a node that is not a copy candidate");
    }
    return {v + n + static_cast<std::size_t>(it - step.copy_candidates.begin())};
  }
  std::vector<std::size_t> out;
  if (auto id = vocab_.labels.find(next->label)) out.push_back(*id);
  for (std::size_t t = 0; t < n; ++t) {
    if (s.tokens[t].form == next->label) out.push_back(v + t);
  }
  if (out.empty()) out.push_back(*vocab_.labels.find(std::string(kUnknown)));
  return out;
}

namespace {

struct Hypothesis {
  DecoderState state;
  std::vector<SemanticRelation> relations;
  std::vector<StepOutput> steps;
  double score = 0.0;
};

struct Outcome {
  double prob = 0.0;
  bool end = false;
  std::string label;
  std::optional<std::size_t> copy;
};

}  // namespace

std::vector<SemanticRelation> Parser::decode(const Sentence& s) const {
  Tape tape;
  EncoderState enc = encode(tape, s);
  const std::size_t n = s.tokens.size();
  const std::size_t limit = 4 * n;
  const std::size_t v = vocab_.labels.size();
  const std::size_t unk = *vocab_.labels.find(std::string(kUnknown));
  const std::size_t end = *vocab_.labels.find(std::string(kEndLabel));
  const std::size_t k = config_.beam;

  Hypothesis start;
  start.state = initial_state(tape, enc);
  start.steps.push_back(decoder_step(tape, enc, start.state, nullptr));

  std::vector<Hypothesis> alive{start};
  std::vector<Hypothesis> finished;

  auto outcomes_of = [&](const Hypothesis& h) {
    const StepOutput& step = h.steps.back();
    const Tensor& p = step.next_node.value();
    std::map<std::string, double> by_label;
    for (std::size_t i = 0; i < v; ++i) {
      if (i == unk || i == end) continue;
      by_label[vocab_.labels.at(i)] += p[i];
    }
    for (std::size_t t = 0; t < n; ++t) by_label[s.tokens[t].form] += p[v + t];
    std::vector<Outcome> out;
    out.push_back({p[end], true, {}, std::nullopt});
    for (auto& [label, prob] : by_label) out.push_back({prob, false, label, std::nullopt});
    for (std::size_t c = 0; c < step.copy_candidates.size(); ++c) {
      out.push_back({p[v + n + c], false, h.state.nodes[step.copy_candidates[c]].label, step.copy_candidates[c]});
    }
    // Stable order keeps decoding deterministic under ties.
    std::stable_sort(out.begin(), out.end(), [](const Outcome& a, const Outcome& b) { return a.prob > b.prob; });
    if (out.size() > k) out.resize(k);
    return out;
  };

  auto expand = [&](const Hypothesis& h, const Outcome& o) {
    Hypothesis next = h;
    const StepOutput& prev = h.steps.back();
    next.score += safe_log(o.prob);
    const std::size_t j = next.state.nodes.size();
    SemanticRelation rel;
    rel.index = j;
    rel.label = o.label;
    StepOutput out;
    if (o.copy) {
      // advance() grows state.nodes, so take the antecedent's kind by value.
      const NodeKind ante_kind = next.state.nodes[*o.copy].kind;
      const SemanticRelation& ante_rel = h.relations[*o.copy - 1];
      advance(tape, enc, next.state, o.label, ante_kind, o.copy);
      out.head_candidates = head_candidates(next.state, false);
      out.head_candidates.erase(std::remove(out.head_candidates.begin(), out.head_candidates.end(), *o.copy),
                                out.head_candidates.end());
      if (out.head_candidates.empty()) return std::optional<Hypothesis>();
      out.head = head_distribution(tape, next.state, out.head_candidates);
      const std::size_t pick = argmax(out.head.value());
      rel.head_index = out.head_candidates[pick];
      next.score += safe_log(out.head.value()[pick]);
      rel.relation = Relation::kArgument;
      rel.kind = ante_kind;
      rel.token = ante_rel.token;
      rel.target_copy = o.copy;
      out.relation = relation_distribution(tape, next.state, rel.head_index);
    } else {
      advance(tape, enc, next.state, o.label, NodeKind::kArgument, std::nullopt);
      out.head_candidates = head_candidates(next.state, true);
      out.head = head_distribution(tape, next.state, out.head_candidates);
      const std::size_t pick = argmax(out.head.value());
      rel.head_index = out.head_candidates[pick];
      next.score += safe_log(out.head.value()[pick]);
      out.relation = relation_distribution(tape, next.state, rel.head_index);
      const Tensor& pr = out.relation.value();
      if (rel.head_index == 0) {
        rel.relation = Relation::kRoot;
      } else {
        const auto a = static_cast<std::size_t>(Relation::kArgument);
        const auto nh = static_cast<std::size_t>(Relation::kNonHead);
        rel.relation = pr[a] >= pr[nh] ? Relation::kArgument : Relation::kNonHead;
        next.score += safe_log(pr[static_cast<std::size_t>(rel.relation)]);
      }
      const NodeKind head_kind = next.state.nodes[rel.head_index].kind;
      switch (rel.relation) {
        case Relation::kRoot: rel.kind = NodeKind::kPredicate; break;
        case Relation::kNonHead: rel.kind = NodeKind::kSyntax; break;
        case Relation::kArgument:
          rel.kind = head_kind == NodeKind::kArgument ? NodeKind::kPredicate : NodeKind::kArgument;
          break;
      }
      next.state.nodes.back().kind = rel.kind;
      // Anchor to the best-attended token with this form, if any.
      const Tensor& att = prev.attention.value();
      std::optional<std::size_t> best;
      for (std::size_t t = 0; t < n; ++t) {
        if (s.tokens[t].form == o.label && (!best || att[t] > att[*best])) best = t;
      }
      rel.token = best;
    }
    rel.head_label = next.state.nodes[rel.head_index].label;
    next.state.nodes.back().head = rel.head_index;
    next.state.nodes.back().relation = rel.relation;
    complete(tape, enc, next.state, out);
    next.steps.push_back(std::move(out));
    next.relations.push_back(std::move(rel));
    return std::optional<Hypothesis>(std::move(next));
  };

  bool overflow = false;
  while (!alive.empty()) {
    std::vector<Hypothesis> candidates;
    for (const auto& h : alive) {
      for (const auto& o : outcomes_of(h)) {
        if (o.end) {
          Hypothesis done = h;
          done.score += safe_log(o.prob);
          finished.push_back(std::move(done));
          continue;
        }
        if (h.relations.size() >= limit) {
          overflow = true;
          continue;
        }
        if (auto next = expand(h, o)) candidates.push_back(std::move(*next));
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Hypothesis& a, const Hypothesis& b) { return a.score > b.score; });
    if (candidates.size() > k) candidates.resize(k);
    if (!finished.empty()) {
      double best_done = finished[0].score;
      for (const auto& f : finished) best_done = std::max(best_done, f.score);
      // Scores only decrease, so nothing alive can overtake a finished hypothesis.
      std::erase_if(candidates, [&](const Hypothesis& h) { return h.score <= best_done; });
      if (finished.size() >= k) candidates.clear();
    }
    alive = std::move(candidates);
  }
  if (finished.empty()) {
    if (overflow) {
      throw Error(ErrorCode::kDecodeOverflow, "decode of '" + s.id + "' exceeded " + std::to_string(limit) +
                                                  " steps");
    }
    return {};
  }
  auto best = std::max_element(finished.begin(), finished.end(),
                               [](const Hypothesis& a, const Hypothesis& b) { return a.score < b.score; });
  Hypothesis& h = *best;

  const auto node_names = AttributeInventory::node_properties();
  const auto edge_names = AttributeInventory::edge_properties();
  auto sigmoid = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  auto clamp = [](double x) { return std::clamp(x, kMinAttributeValue, kMaxAttributeValue); };
  for (std::size_t j = 1; j <= h.relations.size(); ++j) {
    auto& rel = h.relations[j - 1];
    if (is_semantic(rel.kind) && !rel.target_copy) {
      auto [mask, values] = node_attributes(tape, h.steps[j].z);
      for (std::size_t p = 0; p < node_names.size(); ++p) {
        const double alpha = sigmoid(mask[p]);
        if (alpha > config_.mask_threshold) rel.node_attributes[node_names[p]] = {clamp(values[p]), alpha};
      }
    }
    if (rel.relation == Relation::kArgument && rel.head_index != 0 && is_semantic(rel.kind)) {
      auto [mask, values] = edge_attributes(tape, h.state.nodes[rel.head_index].h, h.state.nodes[j].h);
      for (std::size_t p = 0; p < edge_names.size(); ++p) {
        const double beta = sigmoid(mask[p]);
        if (beta > config_.mask_threshold) rel.edge_attributes[edge_names[p]] = {clamp(values[p]), beta};
      }
    }
  }
  return h.relations;
}

UDSGraph Parser::parse(const Sentence& s) const {
  UDSGraph g = to_graph(delinearize(decode(s), s.id, s.tokens));
  g.predicted = true;
  return g;
}

ForcedDecodeResult Parser::forced_decode(const Sentence& s, const Arborescence& gold) const {
  if (gold.tokens.size() != s.tokens.size()) {
    throw Error(ErrorCode::kMisaligned, "gold '" + gold.sentence_id + "' has " + std::to_string(gold.tokens.size()) +
                                            " tokens, sentence has " + std::to_string(s.tokens.size()));
  }
  for (const auto& node : gold.nodes) {
    if (node.token && *node.token >= s.tokens.size()) {
      throw Error(ErrorCode::kMisaligned, "gold '" + gold.sentence_id + "' references token " +
                                              std::to_string(*node.token) + " outside the sentence");
    }
  }
  auto relations = linearize(gold);
  Tape tape;
  ForcedTrace trace = teacher_force(tape, s, relations);
  ForcedDecodeResult result;
  const auto node_names = AttributeInventory::node_properties();
  const auto edge_names = AttributeInventory::edge_properties();
  auto sigmoid = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  auto clamp = [](double x) { return std::clamp(x, kMinAttributeValue, kMaxAttributeValue); };
  for (const auto& out : trace.nodes) {
    NodePrediction np{out.node, {}, {}};
    auto& rel = relations[out.node - 1];
    rel.node_attributes.clear();
    for (std::size_t p = 0; p < node_names.size(); ++p) {
      np.alpha.push_back(sigmoid(out.mask_logits[p]));
      np.nu.push_back(out.values[p]);
      rel.node_attributes[node_names[p]] = {clamp(np.nu.back()), np.alpha.back()};
    }
    result.attributes.nodes.push_back(std::move(np));
  }
  for (const auto& out : trace.edges) {
    EdgePrediction ep{out.head, out.node, {}, {}};
    auto& rel = relations[out.node - 1];
    rel.edge_attributes.clear();
    for (std::size_t p = 0; p < edge_names.size(); ++p) {
      ep.beta.push_back(sigmoid(out.mask_logits[p]));
      ep.lambda.push_back(out.values[p]);
      rel.edge_attributes[edge_names[p]] = {clamp(ep.lambda.back()), ep.beta.back()};
    }
    result.attributes.edges.push_back(std::move(ep));
  }
  result.graph = to_graph(delinearize(relations, gold.sentence_id, gold.tokens));
  result.graph.predicted = true;
  return result;
}

void Parser::save(const std::string& path) const {
  nlohmann::json meta;
  meta["config"] = config_to_json(config_);
  meta["vocab"] = {{"tokens", vocab_.tokens.to_json()},
                   {"pos", vocab_.pos.to_json()},
                   {"chars", vocab_.chars.to_json()},
                   {"labels", vocab_.labels.to_json()}};
  num::save_checkpoint(path, params_, meta);
}

Parser Parser::load(const std::string& path) {
  auto ckpt = num::load_checkpoint(path);
  try {
    const auto& meta = ckpt.meta;
    Vocabularies v;
    v.tokens = Vocabulary::from_json(meta.at("vocab").at("tokens"));
    v.pos = Vocabulary::from_json(meta.at("vocab").at("pos"));
    v.chars = Vocabulary::from_json(meta.at("vocab").at("chars"));
    v.labels = Vocabulary::from_json(meta.at("vocab").at("labels"));
    Parser p(config_from_json(meta.at("config")), std::move(v));
    num::restore_parameters(ckpt, p.params_);
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, "checkpoint metadata: " + std::string(e.what()));
  }
}

}  // namespace uds
