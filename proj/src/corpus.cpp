#include "uds/corpus.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "uds/error.hpp"
#include "uds/graph_io.hpp"
#include "uds/numerics/rng.hpp"

namespace uds {

std::vector<UDSGraph> Corpus::split(std::string_view name) const {
  std::vector<UDSGraph> out;
  for (const auto& g : graphs)
    if (g.split == name) out.push_back(g);
  return out;
}

Corpus load_corpus(const std::string& path, std::string_view split) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  Corpus c;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    UDSGraph g;
    try {
      g = parse_graph_line(line);
    } catch (const Error& e) {
      throw Error(e.code(), path + ": line " + std::to_string(lineno) + ": " + e.what());
    }
    auto report = validate_graph(g);
    if (!report.is_valid())
      throw Error(ErrorCode::kValidationError,
                  path + ": line " + std::to_string(lineno) + ": " + report.summary());
    if (!seen.insert(g.sentence_id).second)
      throw Error(ErrorCode::kValidationError,
                  path + ": line " + std::to_string(lineno) + ": duplicate sentence_id '" + g.sentence_id + "'");
    if (!split.empty()) {
      if (g.split.empty()) g.split = std::string(split);
      if (g.split != split) continue;
    }
    c.graphs.push_back(std::move(g));
  }
  return c;
}

void save_corpus(const std::string& path, const Corpus& corpus) { write_graphs_file(path, corpus.graphs); }

void SyntheticGrammarConfig::validate() const {
  auto bad = [](const std::string& m) { throw Error(ErrorCode::kInvalidArgument, m); };
  for (double f : {transitive, multiword, embedding, control})
    if (f < 0.0) bad("construction fractions must be non-negative");
  if (std::abs(transitive + multiword + embedding + control - 1.0) > 1e-9)
    bad("construction fractions must sum to 1");
  if (!(density >= 0.0 && density <= 1.0)) bad("density must lie in [0,1]");
  if (!(confidence_min > 0.0 && confidence_min <= confidence_max && confidence_max <= 1.0))
    bad("confidence range must satisfy 0 < min <= max <= 1");
  if (train_fraction < 0.0 || dev_fraction < 0.0 || train_fraction + dev_fraction > 1.0 + 1e-12)
    bad("split fractions must be non-negative and sum to at most 1");
  for (const auto& c : correlations) {
    if (!(c.rho >= -1.0 && c.rho <= 1.0)) bad("correlation for " + c.a + "/" + c.b + " outside [-1,1]");
    bool node = AttributeInventory::node_index(c.a) && AttributeInventory::node_index(c.b);
    bool edge = AttributeInventory::edge_index(c.a) && AttributeInventory::edge_index(c.b);
    if (!node && !edge) bad("correlation pair " + c.a + "/" + c.b + " is not two properties of one carrier");
    if (c.a == c.b) bad("correlation pair repeats property " + c.a);
  }
}

namespace {

const std::array<const char*, 12> kNames = {"Smith", "Jones", "Bush",  "Kim",   "Lee",   "Garcia",
                                            "Chen",  "Patel", "Nguyen", "Brown", "Miller", "Davis"};
const std::array<const char*, 12> kNouns = {"dog",    "cat",    "senator", "ambassador", "book", "letter",
                                            "farmer", "doctor", "teacher", "car",        "city", "report"};
const std::array<const char*, 6> kAdjectives = {"old", "young", "red", "small", "new", "famous"};
const std::array<const char*, 2> kDeterminers = {"the", "a"};
const std::array<const char*, 8> kTransitive = {"saw", "chased", "visited", "admired",
                                                "found", "helped", "called", "met"};
const std::array<const char*, 4> kSay = {"said", "claimed", "believed", "reported"};
const std::array<const char*, 5> kControl = {"persuaded", "urged", "asked", "forced", "convinced"};
const std::array<const char*, 6> kBase = {"leave", "visit", "help", "call", "meet", "find"};
const std::array<const char*, 6> kPlaces = {"Paris", "Rome", "Boston", "London", "Tokyo", "Lima"};

template <std::size_t N>
const char* pick(num::Rng& rng, const std::array<const char*, N>& words, std::set<std::string>& used) {
  for (;;) {
    const char* w = words[rng.below(N)];
    if (used.insert(w).second) return w;
  }
}

class Builder {
 public:
  explicit Builder(std::string id) { g_.sentence_id = std::move(id); }

  std::size_t token(const std::string& form, const std::string& pos) {
    g_.tokens.push_back({form, pos});
    return g_.tokens.size() - 1;
  }

  std::size_t node(const std::string& prefix, SemanticKind kind, std::size_t head,
                   const std::vector<std::size_t>& extra = {}) {
    SemanticNode n;
    n.id = g_.sentence_id + "-" + prefix + "-" + std::to_string(head + 1);
    n.kind = kind;
    g_.nodes.push_back(std::move(n));
    std::size_t i = g_.nodes.size() - 1;
    g_.instances.push_back({i, head, true});
    for (auto t : extra) g_.instances.push_back({i, t, false});
    return i;
  }

  void edge(std::size_t h, std::size_t d) { g_.edges.push_back({h, d, {}}); }

  UDSGraph& graph() { return g_; }

 private:
  UDSGraph g_;
};

// [det] [adj] noun, returning (head, non-head tokens)
std::pair<std::size_t, std::vector<std::size_t>> noun_phrase(Builder& b, num::Rng& rng, std::set<std::string>& used) {
  std::vector<std::size_t> extra;
  extra.push_back(b.token(kDeterminers[rng.below(kDeterminers.size())], "DT"));
  if (rng.uniform() < 0.5) extra.push_back(b.token(pick(rng, kAdjectives, used), "JJ"));
  std::size_t head = b.token(pick(rng, kNouns, used), "NN");
  return {head, extra};
}

enum class Construction { kTransitive, kMultiword, kEmbedding, kControl };

void build_sentence(Builder& b, Construction c, num::Rng& rng) {
  std::set<std::string> used;
  using K = SemanticKind;
  switch (c) {
    case Construction::kTransitive: {
      auto s = b.token(pick(rng, kNames, used), "NNP");
      auto v = b.token(pick(rng, kTransitive, used), "VBD");
      auto o = b.token(pick(rng, kNames, used), "NNP");
      auto pv = b.node("pred", K::kPredicate, v);
      b.edge(pv, b.node("arg", K::kArgument, s));
      b.edge(pv, b.node("arg", K::kArgument, o));
      break;
    }
    case Construction::kMultiword: {
      auto [s, sx] = noun_phrase(b, rng, used);
      auto v = b.token(pick(rng, kTransitive, used), "VBD");
      auto [o, ox] = noun_phrase(b, rng, used);
      auto pv = b.node("pred", K::kPredicate, v);
      b.edge(pv, b.node("arg", K::kArgument, s, sx));
      b.edge(pv, b.node("arg", K::kArgument, o, ox));
      break;
    }
    case Construction::kEmbedding: {
      auto s = b.token(pick(rng, kNames, used), "NNP");
      auto v = b.token(pick(rng, kSay, used), "VBD");
      auto that = b.token("that", "IN");
      auto s2 = b.token(pick(rng, kNames, used), "NNP");
      auto v2 = b.token(pick(rng, kTransitive, used), "VBD");
      auto o2 = b.token(pick(rng, kPlaces, used), "NNP");
      auto pv = b.node("pred", K::kPredicate, v);
      b.edge(pv, b.node("arg", K::kArgument, s));
      auto emb = b.node("arg", K::kArgument, v2, {that});
      b.edge(pv, emb);
      auto pv2 = b.node("pred", K::kPredicate, v2);
      b.edge(emb, pv2);
      b.edge(pv2, b.node("arg", K::kArgument, s2));
      b.edge(pv2, b.node("arg", K::kArgument, o2));
      break;
    }
    case Construction::kControl: {
      auto s = b.token(pick(rng, kNames, used), "NNP");
      auto v = b.token(pick(rng, kControl, used), "VBD");
      auto o = b.token(pick(rng, kNames, used), "NNP");
      auto to = b.token("to", "TO");
      auto v2 = b.token(pick(rng, kBase, used), "VB");
      auto o2 = b.token(pick(rng, kPlaces, used), "NNP");
      auto pv = b.node("pred", K::kPredicate, v);
      b.edge(pv, b.node("arg", K::kArgument, s));
      auto controllee = b.node("arg", K::kArgument, o);
      b.edge(pv, controllee);
      auto emb = b.node("arg", K::kArgument, v2);
      b.edge(pv, emb);
      auto pv2 = b.node("pred", K::kPredicate, v2, {to});
      b.edge(emb, pv2);
      b.edge(pv2, controllee);  // re-entrancy
      b.edge(pv2, b.node("arg", K::kArgument, o2));
      break;
    }
  }
}

// Lower Cholesky factor of the requested correlation matrix over one carrier.
Eigen::MatrixXd correlation_factor(const std::vector<CorrelationTarget>& targets, bool node) {
  const std::size_t K = node ? AttributeInventory::kNodeCount : AttributeInventory::kEdgeCount;
  Eigen::MatrixXd R = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(K));
  for (const auto& t : targets) {
    auto a = node ? AttributeInventory::node_index(t.a) : AttributeInventory::edge_index(t.a);
    auto b = node ? AttributeInventory::node_index(t.b) : AttributeInventory::edge_index(t.b);
    if (!a || !b) continue;
    R(static_cast<Eigen::Index>(*a), static_cast<Eigen::Index>(*b)) = t.rho;
    R(static_cast<Eigen::Index>(*b), static_cast<Eigen::Index>(*a)) = t.rho;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(R);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorCode::kInvalidArgument, "requested attribute correlations are not positive definite");
  return llt.matrixL();
}

std::vector<double> latent_draw(const Eigen::MatrixXd& L, num::Rng& rng) {
  Eigen::VectorXd e(L.rows());
  for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = rng.normal();
  Eigen::VectorXd z = L * e;
  std::vector<double> out(static_cast<std::size_t>(z.size()));
  for (Eigen::Index i = 0; i < z.size(); ++i)
    out[static_cast<std::size_t>(i)] = std::clamp(z(i), kMinAttributeValue, kMaxAttributeValue);
  return out;
}

}  // namespace

Corpus generate_synthetic(const SyntheticGrammarConfig& cfg) {
  cfg.validate();
  const auto node_L = correlation_factor(cfg.correlations, true);
  const auto edge_L = correlation_factor(cfg.correlations, false);
  const auto node_props = AttributeInventory::node_properties();
  const auto edge_props = AttributeInventory::edge_properties();

  num::Rng rng(cfg.seed);
  const std::size_t n_train = static_cast<std::size_t>(std::llround(cfg.train_fraction * cfg.sentences));
  const std::size_t n_dev = std::min(cfg.sentences - std::min(cfg.sentences, n_train),
                                     static_cast<std::size_t>(std::llround(cfg.dev_fraction * cfg.sentences)));

  auto annotate = [&](AttributeMap& attrs, const std::vector<double>& z, std::size_t j, const std::string& name) {
    if (rng.uniform() >= cfg.density) return;
    double conf = cfg.confidence_min == cfg.confidence_max ? cfg.confidence_min
                                                           : rng.uniform(cfg.confidence_min, cfg.confidence_max);
    attrs[name] = AttributeRecord{z[j], conf};
  };

  Corpus corpus;
  for (std::size_t s = 0; s < cfg.sentences; ++s) {
    char id[32];
    std::snprintf(id, sizeof id, "syn-%05zu", s + 1);
    Builder b(id);
    double u = rng.uniform();
    Construction c = u < cfg.transitive                                   ? Construction::kTransitive
                     : u < cfg.transitive + cfg.multiword                 ? Construction::kMultiword
                     : u < cfg.transitive + cfg.multiword + cfg.embedding ? Construction::kEmbedding
                                                                          : Construction::kControl;
    build_sentence(b, c, rng);
    UDSGraph& g = b.graph();

    for (auto& n : g.nodes) {
      auto z = latent_draw(node_L, rng);
      bool pred = n.kind == SemanticKind::kPredicate;
      for (std::size_t j = 0; j < node_props.size(); ++j)
        if (AttributeInventory::applies_to_predicate(j) == pred) annotate(n.attributes, z, j, node_props[j]);
    }
    for (auto& e : g.edges) {
      if (g.nodes[e.head].kind != SemanticKind::kPredicate || g.nodes[e.dependent].kind != SemanticKind::kArgument)
        continue;
      if (is_embedded_argument(g, e.dependent)) continue;
      auto z = latent_draw(edge_L, rng);
      for (std::size_t j = 0; j < edge_props.size(); ++j) annotate(e.attributes, z, j, edge_props[j]);
    }

    g.split = s < n_train ? "train" : s < n_train + n_dev ? "dev" : "test";
    corpus.graphs.push_back(std::move(g));
  }
  return corpus;
}

std::vector<CorrelationTarget> parse_correlations(std::string_view text) {
  std::vector<CorrelationTarget> out;
  std::string all(text);
  std::stringstream items(all);
  std::string item;
  while (std::getline(items, item, ';')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    std::istringstream in(item);
    CorrelationTarget t;
    std::string extra;
    if (!(in >> t.a >> t.b >> t.rho) || (in >> extra))
      throw Error(ErrorCode::kInvalidArgument, "bad correlation entry '" + item + "' (want: a b rho)");
    out.push_back(std::move(t));
  }
  return out;
}

namespace {

namespace pt = boost::property_tree;

template <typename T>
T convert(const std::string& section, const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    T out{};
    if constexpr (std::is_same_v<T, double>) {
      out = std::stod(value, &pos);
    } else if constexpr (std::is_same_v<T, bool>) {
      if (value == "true" || value == "1") return true;
      if (value == "false" || value == "0") return false;
      throw std::invalid_argument("not a boolean");
    } else {
      if (!value.empty() && value[0] == '-') throw std::invalid_argument("negative");
      out = static_cast<T>(std::stoull(value, &pos));
    }
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return out;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kInvalidArgument, "[" + section + "] " + key + ": cannot parse '" + value + "'");
  }
}

void apply_synthetic(const pt::ptree& sec, SyntheticGrammarConfig& c) {
  for (const auto& [key, node] : sec) {
    const auto v = node.get_value<std::string>();
    const std::string s = "synthetic";
    if (key == "sentences") c.sentences = convert<std::size_t>(s, key, v);
    else if (key == "seed") c.seed = convert<std::uint64_t>(s, key, v);
    else if (key == "transitive") c.transitive = convert<double>(s, key, v);
    else if (key == "multiword") c.multiword = convert<double>(s, key, v);
    else if (key == "embedding") c.embedding = convert<double>(s, key, v);
    else if (key == "control") c.control = convert<double>(s, key, v);
    else if (key == "density") c.density = convert<double>(s, key, v);
    else if (key == "confidence_min") c.confidence_min = convert<double>(s, key, v);
    else if (key == "confidence_max") c.confidence_max = convert<double>(s, key, v);
    else if (key == "train_fraction") c.train_fraction = convert<double>(s, key, v);
    else if (key == "dev_fraction") c.dev_fraction = convert<double>(s, key, v);
    else if (key == "correlations") c.correlations = parse_correlations(v);
    else throw Error(ErrorCode::kInvalidArgument, "[synthetic] unknown key '" + key + "'");
  }
}

// Model fields are converted through the JSON form so new fields need no
// extra plumbing here.
void apply_model(const pt::ptree& sec, ModelConfig& c) {
  auto j = config_to_json(c);
  for (const auto& [key, node] : sec) {
    const auto v = node.get_value<std::string>();
    if (!j.contains(key)) throw Error(ErrorCode::kInvalidArgument, "[model] unknown key '" + key + "'");
    auto& slot = j[key];
    if (slot.is_boolean()) slot = convert<bool>("model", key, v);
    else if (slot.is_number_float()) slot = convert<double>("model", key, v);
    else if (slot.is_number()) slot = convert<std::uint64_t>("model", key, v);
    else slot = v;
  }
  c = config_from_json(j);
}

void apply_training(const pt::ptree& sec, TrainingConfig& c) {
  for (const auto& [key, node] : sec) {
    const auto v = node.get_value<std::string>();
    const std::string s = "training";
    if (key == "gamma") c.gamma = convert<double>(s, key, v);
    else if (key == "mode") c.mode = attribute_mode_from_string(v);
    else if (key == "learning_rate") c.learning_rate = convert<double>(s, key, v);
    else if (key == "beta1") c.beta1 = convert<double>(s, key, v);
    else if (key == "beta2") c.beta2 = convert<double>(s, key, v);
    else if (key == "adam_eps") c.adam_eps = convert<double>(s, key, v);
    else if (key == "epochs") c.epochs = convert<std::size_t>(s, key, v);
    else if (key == "batch_size") c.batch_size = convert<std::size_t>(s, key, v);
    else if (key == "coverage_weight") c.coverage_weight = convert<double>(s, key, v);
    else if (key == "seed") c.seed = convert<std::uint64_t>(s, key, v);
    else throw Error(ErrorCode::kInvalidArgument, "[training] unknown key '" + key + "'");
  }
}

}  // namespace

ToolConfig parse_tool_config(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorCode::kParseError, std::string("config: ") + e.what());
  }
  ToolConfig cfg;
  for (const auto& [name, sec] : tree) {
    if (sec.empty() && !sec.data().empty())
      throw Error(ErrorCode::kInvalidArgument, "config: key '" + name + "' outside a section");
    if (name == "synthetic") apply_synthetic(sec, cfg.synthetic);
    else if (name == "model") apply_model(sec, cfg.model);
    else if (name == "training") apply_training(sec, cfg.training);
    else throw Error(ErrorCode::kInvalidArgument, "config: unknown section [" + name + "]");
  }
  cfg.synthetic.validate();
  cfg.model.validate();
  cfg.training.validate();
  return cfg;
}

ToolConfig load_tool_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_tool_config(ss.str());
}

}  // namespace uds
