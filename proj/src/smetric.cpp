#include "uds/smetric.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <numeric>
#include <set>
#include <thread>
#include <tuple>

#include "uds/error.hpp"
#include "uds/numerics/rng.hpp"

namespace uds {

double attribute_similarity(double a, double b) {
  if (!(a >= kMinAttributeValue && a <= kMaxAttributeValue && b >= kMinAttributeValue && b <= kMaxAttributeValue)) {
    throw Error(ErrorCode::kValueRange, "attribute values must lie in [-3, 3], got " + std::to_string(a) + " and " +
                                            std::to_string(b));
  }
  const double d = (a - b) / kAttributeSpan;
  return std::clamp(1.0 - d * d, 0.0, 1.0);
}

std::size_t TripleSet::triple_count(bool include_attributes) const {
  std::size_t n = labels.size() + edges.size();
  if (include_attributes) {
    for (const auto& a : node_attributes) n += a.size();
    for (const auto& e : edges) n += e.attributes.size();
  }
  return n;
}

namespace {

std::vector<TripleSet::Attr> annotated(const AttributeMap& m) {
  std::vector<TripleSet::Attr> out;
  for (const auto& [name, rec] : m) {
    if (is_annotated(rec)) out.push_back({name, rec.value});
  }
  return out;
}

double attr_overlap(const std::vector<TripleSet::Attr>& a, const std::vector<TripleSet::Attr>& b) {
  // Both sorted by property name (AttributeMap order).
  double s = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].property < b[j].property) {
      ++i;
    } else if (b[j].property < a[i].property) {
      ++j;
    } else {
      s += attribute_similarity(a[i].value, b[j].value);
      ++i;
      ++j;
    }
  }
  return s;
}

constexpr std::size_t kNone = static_cast<std::size_t>(-1);

// Score of an alignment split into the three triple kinds.
struct Parts {
  double instance = 0.0, edge = 0.0, attribute = 0.0;
  double total() const { return instance + edge + attribute; }
};

class Scorer {
 public:
  Scorer(const TripleSet& pred, const TripleSet& gold, bool attrs)
      : pred_(pred), gold_(gold), attrs_(attrs), np_(pred.variable_count()), ng_(gold.variable_count()) {
    label_.assign(np_ * ng_, 0.0);
    attr_.assign(np_ * ng_, 0.0);
    for (std::size_t p = 0; p < np_; ++p) {
      for (std::size_t g = 0; g < ng_; ++g) {
        label_[p * ng_ + g] = pred.labels[p] == gold.labels[g] ? 1.0 : 0.0;
        if (attrs_) attr_[p * ng_ + g] = attr_overlap(pred.node_attributes[p], gold.node_attributes[g]);
      }
    }
    for (std::size_t e = 0; e < gold.edges.size(); ++e) {
      const auto& ge = gold.edges[e];
      gold_edge_.emplace(std::make_tuple(ge.head, ge.dependent, ge.relation), e);
    }
  }

  std::size_t pred_size() const { return np_; }
  std::size_t gold_size() const { return ng_; }
  double unary(std::size_t p, std::size_t g) const { return label_[p * ng_ + g] + attr_[p * ng_ + g]; }

  Parts parts(const std::vector<std::size_t>& f) const {
    Parts s;
    for (std::size_t p = 0; p < np_; ++p) {
      if (f[p] == kNone) continue;
      s.instance += label_[p * ng_ + f[p]];
      s.attribute += attr_[p * ng_ + f[p]];
    }
    for (const auto& e : pred_.edges) {
      const std::size_t h = f[e.head], d = f[e.dependent];
      if (h == kNone || d == kNone) continue;
      auto it = gold_edge_.find(std::make_tuple(h, d, e.relation));
      if (it == gold_edge_.end()) continue;
      s.edge += 1.0;
      if (attrs_) s.attribute += attr_overlap(e.attributes, gold_.edges[it->second].attributes);
    }
    return s;
  }

  double score(const std::vector<std::size_t>& f) const { return parts(f).total(); }

  MatchResult result(const std::vector<std::size_t>& f) const {
    MatchResult r;
    for (auto g : f) r.alignment.push_back(g == kNone ? std::nullopt : std::optional<std::size_t>(g));
    const Parts s = parts(f);
    r.matched_instance = s.instance;
    r.matched_edge = s.edge;
    r.matched_attribute = s.attribute;
    r.pred_triples = pred_.triple_count(attrs_);
    r.gold_triples = gold_.triple_count(attrs_);
    const double m = s.total();
    if (r.pred_triples == 0 && r.gold_triples == 0) {
      r.precision = r.recall = r.f1 = 1.0;
      return r;
    }
    r.precision = r.pred_triples == 0 ? 0.0 : m / static_cast<double>(r.pred_triples);
    r.recall = r.gold_triples == 0 ? 0.0 : m / static_cast<double>(r.gold_triples);
    r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    return r;
  }

 private:
  const TripleSet& pred_;
  const TripleSet& gold_;
  bool attrs_;
  std::size_t np_, ng_;
  std::vector<double> label_, attr_;
  std::map<std::tuple<std::size_t, std::size_t, std::string>, std::size_t> gold_edge_;
};

// Steepest ascent over reassign (to an unused gold variable or to none) and
// swap moves.
double climb(const Scorer& sc, std::vector<std::size_t>& f) {
  const std::size_t np = sc.pred_size(), ng = sc.gold_size();
  double current = sc.score(f);
  for (;;) {
    std::vector<char> used(ng, 0);
    for (auto g : f)
      if (g != kNone) used[g] = 1;
    double best = current;
    std::vector<std::size_t> best_f;
    std::vector<std::size_t> trial = f;
    for (std::size_t p = 0; p < np; ++p) {
      const std::size_t orig = f[p];
      for (std::size_t g = 0; g <= ng; ++g) {
        const std::size_t target = g == ng ? kNone : g;
        if (target == orig || (target != kNone && used[target])) continue;
        trial[p] = target;
        const double s = sc.score(trial);
        if (s > best + 1e-12) {
          best = s;
          best_f = trial;
        }
      }
      trial[p] = orig;
    }
    for (std::size_t p = 0; p < np; ++p) {
      for (std::size_t q = p + 1; q < np; ++q) {
        if (f[p] == f[q]) continue;
        std::swap(trial[p], trial[q]);
        const double s = sc.score(trial);
        if (s > best + 1e-12) {
          best = s;
          best_f = trial;
        }
        std::swap(trial[p], trial[q]);
      }
    }
    if (best_f.empty()) return current;
    f = std::move(best_f);
    current = best;
  }
}

std::vector<std::size_t> greedy_start(const Scorer& sc) {
  const std::size_t np = sc.pred_size(), ng = sc.gold_size();
  std::vector<std::size_t> f(np, kNone);
  std::vector<char> used(ng, 0);
  for (std::size_t p = 0; p < np; ++p) {
    std::size_t best = kNone;
    double best_u = 0.0;
    for (std::size_t g = 0; g < ng; ++g) {
      if (used[g]) continue;
      const double u = sc.unary(p, g);
      if (u > best_u) {
        best_u = u;
        best = g;
      }
    }
    if (best != kNone) {
      f[p] = best;
      used[best] = 1;
    }
  }
  return f;
}

std::vector<std::size_t> random_start(const Scorer& sc, num::Rng& rng) {
  const std::size_t np = sc.pred_size(), ng = sc.gold_size();
  std::vector<std::size_t> f(np, kNone);
  std::vector<char> used(ng, 0);
  std::vector<std::size_t> order(np);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order.begin(), order.end());
  for (auto p : order) {
    std::vector<std::size_t> matching, free;
    for (std::size_t g = 0; g < ng; ++g) {
      if (used[g]) continue;
      free.push_back(g);
      if (sc.unary(p, g) >= 1.0) matching.push_back(g);
    }
    std::size_t pick = kNone;
    if (!matching.empty()) {
      pick = matching[rng.below(matching.size())];
    } else if (!free.empty() && rng.uniform() < 0.5) {
      pick = free[rng.below(free.size())];
    }
    if (pick != kNone) {
      f[p] = pick;
      used[pick] = 1;
    }
  }
  return f;
}

}  // namespace

TripleSet triples_of(const UDSGraph& g, const MatchOptions& options) {
  // performative placeholders are not scored, same as in the arborescence
  const UDSGraph plain = strip_performative_nodes(g);
  const UDSGraph src = options.semantics_only && !plain.semantics_only ? semantic_subgraph(plain) : plain;
  TripleSet t;
  for (std::size_t i = 0; i < src.nodes.size(); ++i) {
    t.labels.push_back(lexical_label(src, i));
    t.node_attributes.push_back(annotated(src.nodes[i].attributes));
  }
  for (const auto& e : src.edges) {
    t.edges.push_back({e.head, e.dependent, "argument", annotated(e.attributes)});
  }
  if (!options.semantics_only) {
    std::map<std::size_t, std::size_t> token_var;
    std::vector<InstanceEdge> inst = src.instances;
    std::sort(inst.begin(), inst.end(),
              [](const InstanceEdge& a, const InstanceEdge& b) { return std::tie(a.token, a.node) < std::tie(b.token, b.node); });
    for (const auto& ie : inst) {
      if (ie.head || ie.token >= src.tokens.size()) continue;
      auto [it, fresh] = token_var.emplace(ie.token, t.labels.size());
      if (fresh) {
        t.labels.push_back(src.tokens[ie.token].form);
        t.node_attributes.emplace_back();
      }
      t.edges.push_back({ie.node, it->second, "non-head", {}});
    }
  }
  return t;
}

MatchResult s_score(const UDSGraph& pred, const UDSGraph& gold, const MatchOptions& options) {
  const TripleSet tp = triples_of(pred, options);
  const TripleSet tg = triples_of(gold, options);
  Scorer sc(tp, tg, options.include_attributes);
  num::Rng rng(options.seed);
  std::vector<std::size_t> best = greedy_start(sc);
  double best_score = climb(sc, best);
  for (std::size_t r = 1; r < std::max<std::size_t>(options.restarts, 1); ++r) {
    std::vector<std::size_t> f = random_start(sc, rng);
    const double s = climb(sc, f);
    if (s > best_score + 1e-12) {
      best_score = s;
      best = std::move(f);
    }
  }
  return sc.result(best);
}

MatchResult brute_force_match(const UDSGraph& pred, const UDSGraph& gold, const MatchOptions& options) {
  const TripleSet tp = triples_of(pred, options);
  const TripleSet tg = triples_of(gold, options);
  Scorer sc(tp, tg, options.include_attributes);
  const std::size_t np = tp.variable_count(), ng = tg.variable_count();
  const std::size_t small = std::min(np, ng), large = std::max(np, ng);
  if (small > 8) {
    throw Error(ErrorCode::kTooLarge, "brute-force matching supports at most 8 variables on the smaller side, got " +
                                          std::to_string(small));
  }
  double count = 1.0;
  for (std::size_t i = 0; i < small; ++i) count *= static_cast<double>(large - i);
  if (count > 2e7) {
    throw Error(ErrorCode::kTooLarge, "brute-force matching would enumerate " + std::to_string(count) + " alignments");
  }
  // All scores are nonnegative, so some full injection of the smaller side is optimal.
  const bool pred_small = np <= ng;
  std::vector<std::size_t> f(np, kNone), best_f(np, kNone);
  double best = -1.0;
  std::vector<std::size_t> assign(small, kNone);
  std::vector<char> used(large, 0);
  auto evaluate = [&] {
    std::fill(f.begin(), f.end(), kNone);
    for (std::size_t i = 0; i < small; ++i) {
      if (pred_small) {
        f[i] = assign[i];
      } else {
        f[assign[i]] = i;
      }
    }
    const double s = sc.score(f);
    if (s > best + 1e-12) {
      best = s;
      best_f = f;
    }
  };
  auto rec = [&](auto&& self, std::size_t i) -> void {
    if (i == small) {
      evaluate();
      return;
    }
    for (std::size_t j = 0; j < large; ++j) {
      if (used[j]) continue;
      used[j] = 1;
      assign[i] = j;
      self(self, i + 1);
      used[j] = 0;
    }
  };
  rec(rec, 0);
  return sc.result(best_f);
}

CorpusScore corpus_eval(const std::vector<UDSGraph>& pred, const std::vector<UDSGraph>& gold,
                        const MatchOptions& options, std::size_t threads) {
  std::map<std::string, std::size_t> pred_index;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!pred_index.emplace(pred[i].sentence_id, i).second) {
      throw Error(ErrorCode::kIdMismatch, "duplicate predicted sentence_id '" + pred[i].sentence_id + "'");
    }
  }
  std::set<std::string> gold_ids;
  for (const auto& g : gold) {
    if (!gold_ids.insert(g.sentence_id).second) {
      throw Error(ErrorCode::kIdMismatch, "duplicate gold sentence_id '" + g.sentence_id + "'");
    }
    if (!pred_index.count(g.sentence_id)) {
      throw Error(ErrorCode::kIdMismatch, "no prediction for sentence_id '" + g.sentence_id + "'");
    }
  }
  for (const auto& p : pred) {
    if (!gold_ids.count(p.sentence_id)) {
      throw Error(ErrorCode::kIdMismatch, "prediction for unknown sentence_id '" + p.sentence_id + "'");
    }
  }
  CorpusScore out;
  out.sentences.resize(gold.size());
  auto work = [&](std::size_t i) {
    MatchOptions o = options;
    o.seed = num::derive_seed(options.seed, i);
    out.sentences[i] = s_score(pred[pred_index.at(gold[i].sentence_id)], gold[i], o);
  };
  threads = std::max<std::size_t>(threads, 1);
  if (threads == 1) {
    for (std::size_t i = 0; i < gold.size(); ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> failures(threads);
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t i = t; i < gold.size(); i += threads) work(i);
        } catch (...) {
          failures[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& f : failures)
      if (f) std::rethrow_exception(f);
  }
  for (std::size_t i = 0; i < gold.size(); ++i) {
    out.sentence_ids.push_back(gold[i].sentence_id);
    out.matched += out.sentences[i].matched();
    out.pred_triples += out.sentences[i].pred_triples;
    out.gold_triples += out.sentences[i].gold_triples;
  }
  if (out.pred_triples == 0 && out.gold_triples == 0) {
    out.precision = out.recall = out.f1 = 1.0;
  } else {
    out.precision = out.pred_triples ? out.matched / static_cast<double>(out.pred_triples) : 0.0;
    out.recall = out.gold_triples ? out.matched / static_cast<double>(out.gold_triples) : 0.0;
    out.f1 = out.precision + out.recall > 0 ? 2 * out.precision * out.recall / (out.precision + out.recall) : 0.0;
  }
  return out;
}

}  // namespace uds
