#include "uds/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <span>
#include <tuple>

#include "uds/error.hpp"
#include "uds/numerics/ops.hpp"

namespace uds {

using num::Tape;
using num::Tensor;
using num::Var;

std::string_view to_string(AttributeMode m) { return m == AttributeMode::kBinary ? "binary" : "confidence"; }

AttributeMode attribute_mode_from_string(std::string_view s) {
  if (s == "binary") return AttributeMode::kBinary;
  if (s == "confidence") return AttributeMode::kConfidence;
  throw Error(ErrorCode::kInvalidArgument, "unknown attribute mode '" + std::string(s) + "'");
}

void TrainingConfig::validate() const {
  if (!(gamma >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "train.gamma must be nonnegative");
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::kInvalidArgument, "train.learning_rate must be positive");
  if (batch_size == 0) throw Error(ErrorCode::kInvalidArgument, "train.batch_size must be positive");
  if (coverage_weight < 0.0) throw Error(ErrorCode::kInvalidArgument, "train.coverage_weight must be nonnegative");
}

namespace {
Var neg_log(Var p) { return num::scale(num::log(p), -1.0); }
}  // namespace

double tau(double x) { return x <= 0.0 ? 0.0 : 1.0; }

AttributeLossParts attribute_loss_parts(Var nu, const Tensor& gold, const Tensor& confidence, double gamma,
                                        AttributeMode mode) {
  const Tensor& v = nu.value();
  if (v.size() != gold.size() || v.size() != confidence.size()) {
    throw Error(ErrorCode::kShapeMismatch, "attribute loss: nu " + num::shape_string(v.shape()) + ", gold " +
                                               num::shape_string(gold.shape()) + ", confidence " +
                                               num::shape_string(confidence.shape()));
  }
  Tape& tape = *nu.tape();
  const std::size_t cells = v.size();
  if (cells == 0) {
    Var zero = tape.constant(Tensor::scalar(0.0));
    return {zero, zero, zero};
  }
  Tensor w({cells}), target({cells}), sign({cells});
  for (std::size_t i = 0; i < cells; ++i) {
    w[i] = mode == AttributeMode::kBinary ? tau(confidence[i]) : confidence[i];
    target[i] = gold[i];
    sign[i] = tau(gold[i]);
  }
  Var flat = num::reshape(nu, {cells});
  const double inv = 1.0 / static_cast<double>(cells);
  Var diff = num::sub(flat, tape.constant(target));
  Var mse = num::scale(num::dot(num::square(diff), tape.constant(w)), inv);
  Var bce = num::scale(num::bce_with_logits(flat, sign, w), inv);
  return {mse, bce, num::scale(num::harmonic_combine(mse, bce), gamma)};
}

Var attribute_loss(Var nu, const Tensor& gold, const Tensor& confidence, double gamma, AttributeMode mode) {
  return attribute_loss_parts(nu, gold, confidence, gamma, mode).combined;
}

Var edge_attribute_loss(Var lambda, const Tensor& gold, const Tensor& confidence, double gamma, AttributeMode mode) {
  if (lambda.size() % AttributeInventory::kEdgeCount != 0) {
    throw Error(ErrorCode::kShapeMismatch, "edge attribute loss expects rows of " +
                                               std::to_string(AttributeInventory::kEdgeCount) + " properties");
  }
  return attribute_loss(lambda, gold, confidence, gamma, mode);
}

Var mask_loss(Var logits, const Tensor& gold_mask) {
  const std::size_t n = logits.size();
  if (gold_mask.size() != n) throw Error(ErrorCode::kShapeMismatch, "mask loss: size mismatch");
  Tape& tape = *logits.tape();
  if (n == 0) return tape.constant(Tensor::scalar(0.0));
  Tensor gold({n}, gold_mask.storage());
  Var flat = num::reshape(logits, {n});
  return num::scale(num::bce_with_logits(flat, gold, Tensor({n}, 1.0)), 1.0 / static_cast<double>(n));
}

double mask_loss(const Tensor& probs, const Tensor& gold_mask) {
  if (probs.size() != gold_mask.size()) throw Error(ErrorCode::kShapeMismatch, "mask loss: size mismatch");
  if (probs.size() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], 1e-12, 1.0 - 1e-12);
    total -= gold_mask[i] * std::log(p) + (1.0 - gold_mask[i]) * std::log(1.0 - p);
  }
  return total / static_cast<double>(probs.size());
}

StructuralLoss structural_loss(const Parser& parser, const ForcedTrace& trace, const Sentence& s,
                               const std::vector<SemanticRelation>& relations) {
  if (trace.steps.size() != relations.size() + 1) {
    throw Error(ErrorCode::kLengthMismatch, std::to_string(trace.steps.size()) + " decoder steps for " +
                                                std::to_string(relations.size()) + " relations");
  }
  Tape& tape = *trace.steps[0].z.tape();
  std::vector<Var> node, head, rel, cov;
  for (std::size_t j = 0; j < trace.steps.size(); ++j) {
    const auto& step = trace.steps[j];
    const SemanticRelation* next = j < relations.size() ? &relations[j] : nullptr;
    std::vector<Var> picks;
    for (auto o : parser.gold_outcomes(step, s, next)) picks.push_back(num::pick(step.next_node, o));
    node.push_back(neg_log(num::sum(num::concat(picks))));
    cov.push_back(num::sum(num::minimum(step.attention, step.coverage)));
    if (j == 0) continue;
    const auto& r = relations[j - 1];
    auto it = std::find(step.head_candidates.begin(), step.head_candidates.end(), r.head_index);
    head.push_back(neg_log(num::pick(step.head, static_cast<std::size_t>(it - step.head_candidates.begin()))));
    rel.push_back(neg_log(num::pick(step.relation, static_cast<std::size_t>(r.relation))));
  }
  auto mean_of = [&](const std::vector<Var>& xs) {
    if (xs.empty()) return tape.constant(Tensor::scalar(0.0));
    return num::mean(num::concat(xs));
  };
  return {mean_of(node), mean_of(head), mean_of(rel), mean_of(cov)};
}

TrainingExample make_example(const UDSGraph& g) {
  if (g.tokens.empty()) {
    throw Error(ErrorCode::kEmptyInput, "graph '" + g.sentence_id + "' has no tokens to train on");
  }
  return {sentence_of(g), linearize(build_arborescence(g))};
}

LossBreakdown LossVars::values() const {
  return {node.item(), head.item(), relation.item(), coverage.item(), mask.item(), attr.item(), total.item()};
}

LossVars example_loss(Tape& tape, const Parser& parser, const TrainingExample& ex, const TrainingConfig& cfg,
                      num::Rng* dropout_rng) {
  ForcedTrace trace = parser.teacher_force(tape, ex.sentence, ex.relations, dropout_rng);
  StructuralLoss st = structural_loss(parser, trace, ex.sentence, ex.relations);

  auto gather = [&](const std::vector<AttributeOutput>& outs, std::span<const std::string> names, bool edges) {
    const std::size_t k = names.size();
    Tensor gold({outs.size() * k}), conf({outs.size() * k}), mask({outs.size() * k});
    std::vector<Var> logits, values;
    for (std::size_t i = 0; i < outs.size(); ++i) {
      const auto& rel = ex.relations[outs[i].node - 1];
      const AttributeMap& attrs = edges ? rel.edge_attributes : rel.node_attributes;
      for (std::size_t p = 0; p < k; ++p) {
        auto it = attrs.find(names[p]);
        if (it == attrs.end() || !is_annotated(it->second)) continue;
        gold[i * k + p] = it->second.value;
        conf[i * k + p] = it->second.confidence;
        mask[i * k + p] = 1.0;
      }
      logits.push_back(outs[i].mask_logits);
      values.push_back(outs[i].values);
    }
    return std::make_tuple(gold, conf, mask, logits, values);
  };

  Var zero = tape.constant(Tensor::scalar(0.0));
  Var mask_total = zero, attr_total = zero;
  {
    auto [gold, conf, mask, logits, values] =
        gather(trace.nodes, AttributeInventory::node_properties(), false);
    if (!values.empty()) {
      mask_total = num::add(mask_total, mask_loss(num::concat(logits), mask));
      attr_total = num::add(attr_total, attribute_loss(num::concat(values), gold, conf, cfg.gamma, cfg.mode));
    }
  }
  {
    auto [gold, conf, mask, logits, values] = gather(trace.edges, AttributeInventory::edge_properties(), true);
    if (!values.empty()) {
      mask_total = num::add(mask_total, mask_loss(num::concat(logits), mask));
      attr_total = num::add(attr_total, edge_attribute_loss(num::concat(values), gold, conf, cfg.gamma, cfg.mode));
    }
  }
  LossVars out{st.node, st.head, st.relation, st.coverage, mask_total, attr_total, {}};
  out.total = num::add(num::add(num::add(st.node, st.head), num::add(st.relation, num::scale(st.coverage, cfg.coverage_weight))),
                       num::add(mask_total, attr_total));
  return out;
}

Adam::Adam(num::ParameterStore& store, double lr, double beta1, double beta2, double eps)
    : store_(&store), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto* p : store.all()) {
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto params = store_->all();
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    double* m = m_[k].data();
    double* v = v_[k].data();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      p.value[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

namespace {

void accumulate(LossBreakdown& acc, const LossBreakdown& x) {
  acc.node_xent += x.node_xent;
  acc.head_xent += x.head_xent;
  acc.relation_xent += x.relation_xent;
  acc.coverage += x.coverage;
  acc.mask_bce += x.mask_bce;
  acc.attr_combined += x.attr_combined;
  acc.total += x.total;
}

LossBreakdown divided(LossBreakdown x, double n) {
  if (n == 0) return x;
  x.node_xent /= n;
  x.head_xent /= n;
  x.relation_xent /= n;
  x.coverage /= n;
  x.mask_bce /= n;
  x.attr_combined /= n;
  x.total /= n;
  return x;
}

}  // namespace

TrainResult train(const std::vector<UDSGraph>& train_set, const ModelConfig& model_cfg, const TrainingConfig& cfg,
                  const std::vector<UDSGraph>& dev_set, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.empty()) throw Error(ErrorCode::kEmptyInput, "training corpus is empty");
  std::vector<TrainingExample> examples;
  std::vector<Arborescence> arbs;
  for (const auto& g : train_set) {
    examples.push_back(make_example(g));
    arbs.push_back(build_arborescence(g));
  }
  std::vector<TrainingExample> dev;
  for (const auto& g : dev_set) dev.push_back(make_example(g));

  TrainResult result{Parser(model_cfg, build_vocabularies(arbs)), {}, {}, false, {}};
  Parser& parser = result.parser;
  auto& params = parser.parameters();
  Adam adam(params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps);
  num::Rng order_rng(num::derive_seed(cfg.seed, 1));
  num::Rng dropout_rng(num::derive_seed(cfg.seed, 2));
  num::Rng* drop = model_cfg.dropout > 0.0 ? &dropout_rng : nullptr;

  std::vector<num::Tensor> last_good;
  auto snapshot = [&] {
    last_good.clear();
    for (const auto* p : params.all()) last_good.push_back(p->value);
  };
  auto restore = [&] {
    auto all = params.all();
    for (std::size_t k = 0; k < all.size(); ++k) all[k]->value = last_good[k];
  };
  snapshot();

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    order_rng.shuffle(order.begin(), order.end());
    LossBreakdown sum;
    try {
      for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
        const std::size_t e = std::min(order.size(), b + cfg.batch_size);
        params.zero_grad();
        for (std::size_t i = b; i < e; ++i) {
          Tape tape;
          LossVars loss = example_loss(tape, parser, examples[order[i]], cfg, drop);
          const LossBreakdown vals = loss.values();
          if (!std::isfinite(vals.total)) throw Error(ErrorCode::kNonfinite, "loss is not finite");
          accumulate(sum, vals);
          tape.backward(loss.total);
        }
        if (e - b > 1) {
          const double inv = 1.0 / static_cast<double>(e - b);
          for (auto* p : params.all()) {
            for (auto& g : p->grad.values()) g *= inv;
          }
        }
        adam.step();
        if (!params.all_finite()) throw Error(ErrorCode::kNonfinite, "parameters became non-finite");
      }
    } catch (const Error& err) {
      if (err.code() != ErrorCode::kNonfinite) throw;
      restore();
      result.aborted = true;
      result.message = std::string(to_string(ErrorCode::kNonfiniteLoss)) + ": epoch " + std::to_string(epoch) +
                       ": " + err.what();
      return result;
    }
    const LossBreakdown mean = divided(sum, static_cast<double>(examples.size()));
    std::optional<double> dev_total;
    if (!dev.empty()) {
      double total = 0.0;
      for (const auto& ex : dev) {
        Tape tape;
        total += example_loss(tape, parser, ex, cfg).total.item();
      }
      dev_total = total / static_cast<double>(dev.size());
    }
    result.log.push_back(mean);
    result.dev_total.push_back(dev_total);
    snapshot();
    if (on_epoch) on_epoch(epoch, mean, dev_total);
  }
  return result;
}

void write_loss_csv(std::ostream& out, const TrainResult& result) {
  out << "epoch,node_xent,head_xent,relation_xent,coverage,mask_bce,attr_combined,total,dev_total\n";
  out.precision(17);
  for (std::size_t i = 0; i < result.log.size(); ++i) {
    const auto& l = result.log[i];
    out << i + 1 << ',' << l.node_xent << ',' << l.head_xent << ',' << l.relation_xent << ',' << l.coverage << ','
        << l.mask_bce << ',' << l.attr_combined << ',' << l.total << ',';
    if (i < result.dev_total.size() && result.dev_total[i]) out << *result.dev_total[i];
    out << '\n';
  }
}

std::vector<std::pair<std::string, num::GradCheckResult>> gradcheck_suite(const std::vector<UDSGraph>& graphs,
                                                                           std::uint64_t seed) {
  if (graphs.empty()) throw Error(ErrorCode::kEmptyInput, "gradient check needs at least one graph");
  std::vector<TrainingExample> examples;
  std::vector<Arborescence> arbs;
  for (const auto& g : graphs) {
    examples.push_back(make_example(g));
    arbs.push_back(build_arborescence(g));
  }
  ModelConfig mc;
  mc.token_dim = 6;
  mc.pos_dim = 4;
  mc.char_dim = 4;
  mc.char_filters = 5;
  mc.hidden = 5;
  mc.layers = 2;
  mc.index_dim = 4;
  mc.relation_dim = 3;
  mc.max_index = 16;
  mc.attention_dim = 6;
  mc.z_dim = 8;
  mc.arc_dim = 6;
  mc.attr_hidden = 7;
  mc.edge_dim = 5;
  mc.hash_buckets = 4;
  mc.seed = seed;
  Parser parser(mc, build_vocabularies(arbs));
  // Move away from the zero-initialised biases so every path is exercised.
  num::Rng rng(num::derive_seed(seed, 7));
  for (auto* p : parser.parameters().all()) {
    for (auto& v : p->value.values()) v += 0.1 * rng.normal();
  }
  TrainingConfig tc;
  tc.seed = seed;

  // Fixed random projection of an output, so non-scalar outputs can be checked.
  auto projected = [&](Var x, std::uint64_t stream) {
    num::Rng r(num::derive_seed(seed, 1000 + stream));
    Tensor w({x.size()});
    for (auto& v : w.values()) v = r.normal();
    return num::dot(num::reshape(x, {x.size()}), x.tape()->constant(w));
  };
  auto sum_all = [](Tape& tape, const std::vector<Var>& xs) {
    Var acc = tape.constant(Tensor::scalar(0.0));
    for (const auto& x : xs) acc = num::add(acc, x);
    return acc;
  };
  auto over_examples = [&](const std::function<Var(Tape&, const TrainingExample&, ForcedTrace&)>& f) {
    return [&, f](Tape& tape) {
      std::vector<Var> parts;
      for (const auto& ex : examples) {
        ForcedTrace trace = parser.teacher_force(tape, ex.sentence, ex.relations);
        parts.push_back(f(tape, ex, trace));
      }
      return sum_all(tape, parts);
    };
  };

  num::GradCheckOptions opts;
  opts.seed = seed;
  opts.samples_per_parameter = 12;
  std::vector<std::pair<std::string, num::GradCheckResult>> out;
  auto check = [&](const std::string& name, const num::LossFn& f, const std::vector<std::string>& prefixes) {
    std::vector<num::Parameter*> ps;
    for (const auto& pre : prefixes) {
      for (auto* p : parser.component_parameters(pre)) ps.push_back(p);
    }
    out.emplace_back(name, num::gradient_check(f, ps, opts));
  };

  check("encoder",
        [&](Tape& tape) {
          std::vector<Var> parts;
          for (const auto& ex : examples) {
            EncoderState enc = parser.encode(tape, ex.sentence);
            for (const auto& layer : enc.states)
              for (std::size_t t = 0; t < layer.size(); ++t) parts.push_back(projected(layer[t], t));
          }
          return sum_all(tape, parts);
        },
        {"emb.token", "emb.pos", "emb.char", "charcnn", "enc."});
  check("decoder_step", over_examples([&](Tape& tape, const TrainingExample&, ForcedTrace& tr) {
          std::vector<Var> parts;
          for (std::size_t j = 0; j < tr.steps.size(); ++j) parts.push_back(projected(tr.steps[j].z, j));
          return sum_all(tape, parts);
        }),
        {"dec.", "attn.", "node.z", "emb.index", "emb.relation"});
  check("next_node_distribution", over_examples([&](Tape&, const TrainingExample& ex, ForcedTrace& tr) {
          return structural_loss(parser, tr, ex.sentence, ex.relations).node;
        }),
        {"node.vocab", "node.switch", "node.copy", "node.z"});
  check("head_distribution", over_examples([&](Tape&, const TrainingExample& ex, ForcedTrace& tr) {
          return structural_loss(parser, tr, ex.sentence, ex.relations).head;
        }),
        {"head."});
  check("relation_distribution", over_examples([&](Tape&, const TrainingExample& ex, ForcedTrace& tr) {
          return structural_loss(parser, tr, ex.sentence, ex.relations).relation;
        }),
        {"rel."});
  check("coverage", over_examples([&](Tape&, const TrainingExample& ex, ForcedTrace& tr) {
          return structural_loss(parser, tr, ex.sentence, ex.relations).coverage;
        }),
        {"attn."});
  check("node_attributes", over_examples([&](Tape& tape, const TrainingExample&, ForcedTrace& tr) {
          std::vector<Var> parts;
          for (std::size_t i = 0; i < tr.nodes.size(); ++i) {
            parts.push_back(projected(num::sigmoid(tr.nodes[i].mask_logits), 2 * i));
            parts.push_back(projected(tr.nodes[i].values, 2 * i + 1));
          }
          return sum_all(tape, parts);
        }),
        {"attr.node."});
  check("edge_attributes", over_examples([&](Tape& tape, const TrainingExample&, ForcedTrace& tr) {
          std::vector<Var> parts;
          for (std::size_t i = 0; i < tr.edges.size(); ++i) {
            parts.push_back(projected(num::sigmoid(tr.edges[i].mask_logits), 2 * i));
            parts.push_back(projected(tr.edges[i].values, 2 * i + 1));
          }
          return sum_all(tape, parts);
        }),
        {"attr.edge."});

  // Loss terms on free inputs.
  {
    num::ParameterStore store;
    num::Rng r(num::derive_seed(seed, 11));
    auto& nu = store.add("nu", {3, AttributeInventory::kNodeCount}, num::Init::kNormal, r);
    auto& logits = store.add("logits", {3, AttributeInventory::kNodeCount}, num::Init::kNormal, r);
    Tensor gold(nu.value.shape()), conf(nu.value.shape()), mask(nu.value.shape());
    for (std::size_t i = 0; i < gold.size(); ++i) {
      gold[i] = r.uniform(-3.0, 3.0);
      conf[i] = r.uniform() < 0.3 ? 0.0 : r.uniform();
      mask[i] = conf[i] > 0 ? 1.0 : 0.0;
    }
    for (auto mode : {AttributeMode::kConfidence, AttributeMode::kBinary}) {
      out.emplace_back("attribute_loss/" + std::string(to_string(mode)),
                       num::gradient_check(
                           [&](Tape& tape) { return attribute_loss(tape.parameter(nu), gold, conf, 1.5, mode); },
                           {&nu}, opts));
    }
    out.emplace_back("mask_loss", num::gradient_check(
                                      [&](Tape& tape) { return mask_loss(tape.parameter(logits), mask); }, {&logits},
                                      opts));
  }

  {
    auto all = parser.parameters().all();
    num::GradCheckOptions full = opts;
    full.samples_per_parameter = 6;
    out.emplace_back("full_loss", num::gradient_check(
                                      [&](Tape& tape) {
                                        std::vector<Var> parts;
                                        for (const auto& ex : examples) {
                                          parts.push_back(example_loss(tape, parser, ex, tc).total);
                                        }
                                        return sum_all(tape, parts);
                                      },
                                      all, full));
  }
  return out;
}

}  // namespace uds
