#include "uds/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "uds/analysis.hpp"
#include "uds/arborescence.hpp"
#include "uds/corpus.hpp"
#include "uds/error.hpp"
#include "uds/graph_io.hpp"
#include "uds/model.hpp"
#include "uds/smetric.hpp"
#include "uds/training.hpp"

namespace uds {
namespace {

using nlohmann::json;

struct Globals {
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
  std::string format_version{kFormatVersion};
};

std::vector<json> read_json_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  std::vector<json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kParseError, path + ": line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

// Output to a file, or to `out` for "-" / empty.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : os_(&fallback) {
    if (!path.empty() && path != "-") {
      file_.open(path);
      if (!file_) throw Error(ErrorCode::kIo, "cannot open '" + path + "' for writing");
      os_ = &file_;
    }
  }
  std::ostream& operator*() { return *os_; }

 private:
  std::ofstream file_;
  std::ostream* os_;
};

std::string fmt(std::optional<double> v) {
  if (!v) return "undefined";
  std::ostringstream s;
  s << std::setprecision(6) << *v;
  return s.str();
}

json opt_json(std::optional<double> v) { return v ? json(*v) : json(nullptr); }

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create directory '" + dir + "': " + ec.message());
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  return f;
}

ToolConfig config_or_default(const std::string& path) {
  return path.empty() ? ToolConfig{} : load_tool_config(path);
}

void write_psi_csv(const std::string& path, const PsiReport& rep, bool significance) {
  auto f = open_out(path);
  f << "property";
  for (const auto& p : rep.properties) f << ',' << p;
  f << '\n';
  f << std::setprecision(10);
  for (std::size_t i = 0; i < rep.properties.size(); ++i) {
    f << rep.properties[i];
    for (std::size_t j = 0; j < rep.properties.size(); ++j) {
      f << ',';
      if (significance) f << (rep.significant[i][j] ? 1 : 0);
      else f << rep.psi[i][j];
    }
    f << '\n';
  }
}

json thresholds_json(const std::vector<ThresholdChoice>& node, const std::vector<ThresholdChoice>& edge) {
  json j = {{"node", json::object()}, {"edge", json::object()}};
  for (const auto& c : node) j["node"][c.property] = c.threshold;
  for (const auto& c : edge) j["edge"][c.property] = c.threshold;
  return j;
}

std::pair<std::map<std::string, double>, std::map<std::string, double>> load_thresholds(const std::string& path) {
  std::map<std::string, double> node, edge;
  if (path.empty()) return {node, edge};
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  try {
    auto j = json::parse(in);
    for (auto& [k, v] : j.value("node", json::object()).items()) node[k] = v.get<double>();
    for (auto& [k, v] : j.value("edge", json::object()).items()) edge[k] = v.get<double>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, path + ": " + e.what());
  }
  return {node, edge};
}

// --- subcommands ----------------------------------------------------------

struct ConvertArgs {
  std::string in, out, from = "graph", to = "arborescence";
  bool no_syntax = false;
};

int cmd_convert(const ConvertArgs& a, std::ostream& out) {
  ArborescenceOptions opts;
  opts.include_syntax = !a.no_syntax;
  Sink sink(a.out, out);
  for (const auto& j : read_json_lines(a.in)) {
    UDSGraph g;
    std::optional<Arborescence> arb;
    if (a.from == "graph") {
      g = graph_from_json(j);
      auto report = validate_graph(g);
      if (!report.is_valid())
        throw Error(ErrorCode::kValidationError, g.sentence_id + ": " + report.summary());
    } else if (a.from == "arborescence") {
      arb = arborescence_from_json(j);
    } else {
      auto seq = relations_from_json(j);
      arb = delinearize(seq.relations, seq.sentence_id, seq.tokens);
    }
    if (a.to == "graph") {
      *sink << dump_graph_line(arb ? to_graph(*arb) : g) << '\n';
      continue;
    }
    if (!arb) arb = build_arborescence(g, opts);
    if (a.to == "arborescence") *sink << arborescence_to_json(*arb).dump() << '\n';
    else *sink << relations_to_json(arb->sentence_id, arb->tokens, linearize(*arb)).dump() << '\n';
  }
  return kExitOk;
}

struct GenerateArgs {
  std::string config, out;
  std::optional<std::size_t> sentences;
};

int cmd_generate(const GenerateArgs& a, const Globals& g, std::ostream& out) {
  auto cfg = config_or_default(a.config).synthetic;
  if (a.sentences) cfg.sentences = *a.sentences;
  if (g.seed) cfg.seed = *g.seed;
  auto corpus = generate_synthetic(cfg);
  Sink sink(a.out, out);
  write_graphs(*sink, corpus.graphs);
  return kExitOk;
}

struct TrainArgs {
  std::string train, dev, config, model, loss_csv, split;
  std::optional<std::size_t> epochs;
};

int cmd_train(const TrainArgs& a, const Globals& g, std::ostream& out, std::ostream& err) {
  auto cfg = config_or_default(a.config);
  if (a.epochs) cfg.training.epochs = *a.epochs;
  if (g.seed) {
    cfg.training.seed = *g.seed;
    cfg.model.seed = *g.seed;
  }
  auto train_set = load_corpus(a.train, a.split).graphs;
  std::vector<UDSGraph> dev_set;
  if (!a.dev.empty()) dev_set = load_corpus(a.dev).graphs;
  auto result = train(train_set, cfg.model, cfg.training, dev_set,
                      [&](std::size_t epoch, const LossBreakdown& l, std::optional<double> dev) {
                        err << "epoch " << epoch << " total " << l.total << " dev " << fmt(dev) << '\n';
                      });
  if (!a.loss_csv.empty()) {
    auto f = open_out(a.loss_csv);
    write_loss_csv(f, result);
  }
  result.parser.save(a.model);
  if (result.aborted) {
    err << result.message << '\n';
    return kExitData;
  }
  out << "saved " << a.model << '\n';
  return kExitOk;
}

struct PredictArgs {
  std::string model, in, out;
};

int cmd_predict(const PredictArgs& a, std::ostream& out, std::ostream& err) {
  auto parser = Parser::load(a.model);
  auto corpus = load_corpus(a.in);
  Sink sink(a.out, out);
  for (const auto& g : corpus.graphs) {
    auto s = sentence_of(g);
    UDSGraph pred;
    try {
      pred = parser.parse(s);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDecodeOverflow) throw;
      // keep the corpus aligned: a runaway decode becomes an empty analysis
      err << "warning: " << e.what() << "; writing an empty graph\n";
      pred = to_graph(delinearize({}, s.id, s.tokens));
    }
    *sink << dump_graph_line(pred) << '\n';
  }
  return kExitOk;
}

int cmd_forced(const PredictArgs& a, std::ostream& out) {
  auto parser = Parser::load(a.model);
  auto corpus = load_corpus(a.in);
  Sink sink(a.out, out);
  for (const auto& g : corpus.graphs) {
    auto r = parser.forced_decode(sentence_of(g), build_arborescence(g));
    *sink << dump_graph_line(r.graph) << '\n';
  }
  return kExitOk;
}

struct EvalArgs {
  std::string pred, gold, per_sentence;
  bool no_attributes = false, semantics_only = false;
  std::size_t restarts = 8;
};

int cmd_eval(const EvalArgs& a, const Globals& g, std::ostream& out) {
  MatchOptions opts;
  opts.include_attributes = !a.no_attributes;
  opts.semantics_only = a.semantics_only;
  opts.restarts = a.restarts;
  opts.seed = g.seed.value_or(0);
  auto score = corpus_eval(load_corpus(a.pred).graphs, load_corpus(a.gold).graphs, opts, g.threads);
  if (!a.per_sentence.empty()) {
    auto f = open_out(a.per_sentence);
    f << "sentence_id,precision,recall,f1\n";
    for (std::size_t i = 0; i < score.sentences.size(); ++i)
      f << score.sentence_ids[i] << ',' << score.sentences[i].precision << ',' << score.sentences[i].recall << ','
        << score.sentences[i].f1 << '\n';
  }
  json j = {{"precision", score.precision}, {"recall", score.recall},       {"f1", score.f1},
            {"matched", score.matched},     {"pred_triples", score.pred_triples},
            {"gold_triples", score.gold_triples}, {"sentences", score.sentences.size()}};
  out << j.dump(2) << '\n';
  return kExitOk;
}

struct AnalyzeArgs {
  std::string pred, gold, out, thresholds;
  std::size_t replicants = 1000;
  double alpha = 0.05;
};

int cmd_analyze(const AnalyzeArgs& a, const Globals& g, std::ostream& out) {
  auto pred = load_corpus(a.pred).graphs;
  auto gold = load_corpus(a.gold).graphs;
  ensure_dir(a.out);
  auto [node_thr, edge_thr] = load_thresholds(a.thresholds);

  auto attr = open_out(a.out + "/attributes.csv");
  attr << "carrier,property,n,pearson_rho,p_value,threshold,f1\n";
  json summary;
  for (Carrier c : {Carrier::kNode, Carrier::kEdge}) {
    const bool node = c == Carrier::kNode;
    auto gm = attribute_matrix(gold, c);
    auto pm = align_rows(attribute_matrix(pred, c), gm);
    auto rho = pearson_per_attribute(pm, gm);
    auto f1 = binarized_f1(pm, gm, node ? node_thr : edge_thr);
    for (std::size_t j = 0; j < rho.size(); ++j)
      attr << (node ? "node" : "edge") << ',' << rho[j].property << ',' << rho[j].n << ',' << fmt(rho[j].rho) << ','
           << fmt(rho[j].p_value) << ',' << f1.properties[j].threshold << ',' << fmt(f1.properties[j].score.f1)
           << '\n';
    auto psi = psi_matrix(pm, gm, a.replicants, a.alpha, g.seed.value_or(0), g.threads);
    write_psi_csv(a.out + (node ? "/psi.csv" : "/psi_edge.csv"), psi, false);
    write_psi_csv(a.out + (node ? "/psi_significance.csv" : "/psi_edge_significance.csv"), psi, true);
    summary[node ? "node" : "edge"] = {{"macro_rho", opt_json(macro_rho(rho))}, {"macro_f1", opt_json(f1.macro_f1)}};
  }
  json thr = {{"node", node_thr}, {"edge", edge_thr}};
  open_out(a.out + "/thresholds.json") << thr.dump(2) << '\n';
  out << summary.dump(2) << '\n';
  return kExitOk;
}

struct TuneArgs {
  std::string pred, gold, out;
};

int cmd_tune(const TuneArgs& a, std::ostream& out) {
  auto pred = load_corpus(a.pred).graphs;
  auto gold = load_corpus(a.gold).graphs;
  auto tune = [&](Carrier c) {
    auto gm = attribute_matrix(gold, c);
    return tune_thresholds(align_rows(attribute_matrix(pred, c), gm), gm);
  };
  Sink sink(a.out, out);
  *sink << thresholds_json(tune(Carrier::kNode), tune(Carrier::kEdge)).dump(2) << '\n';
  return kExitOk;
}

struct BaselineArgs {
  std::string train, dev, test, out;
};

int cmd_baseline(const BaselineArgs& a, std::ostream& out) {
  auto train_set = load_corpus(a.train).graphs;
  auto dev_set = load_corpus(a.dev.empty() ? a.train : a.dev).graphs;
  auto test_set = load_corpus(a.test).graphs;
  json report;
  json thresholds;
  for (Carrier c : {Carrier::kNode, Carrier::kEdge}) {
    const char* name = c == Carrier::kNode ? "node" : "edge";
    auto medians = median_baseline(attribute_matrix(train_set, c));
    auto dev_gold = attribute_matrix(dev_set, c);
    auto thr = tune_thresholds(apply_baseline(medians, dev_gold), dev_gold);
    auto test_gold = attribute_matrix(test_set, c);
    auto test_pred = apply_baseline(medians, test_gold);
    auto rho = macro_rho(pearson_per_attribute(test_pred, test_gold));
    auto f1 = binarized_f1(test_pred, test_gold, threshold_map(thr));
    report[name] = {{"pearson_rho", rho ? json(*rho) : json("undefined")}, {"macro_f1", opt_json(f1.macro_f1)}};
    for (const auto& t : thr) thresholds[name][t.property] = t.threshold;
  }
  if (!a.out.empty()) {
    ensure_dir(a.out);
    open_out(a.out + "/baseline.json") << report.dump(2) << '\n';
    open_out(a.out + "/thresholds.json") << thresholds.dump(2) << '\n';
  }
  out << report.dump(2) << '\n';
  return kExitOk;
}

struct GradArgs {
  std::string in;
};

int cmd_gradcheck(const GradArgs& a, const Globals& g, std::ostream& out) {
  std::vector<UDSGraph> graphs;
  if (!a.in.empty()) {
    graphs = load_corpus(a.in).graphs;
  } else {
    SyntheticGrammarConfig cfg;
    cfg.sentences = 4;
    cfg.seed = g.seed.value_or(7);
    graphs = generate_synthetic(cfg).graphs;
  }
  auto results = gradcheck_suite(graphs, g.seed.value_or(7));
  double worst = 0;
  for (const auto& [name, r] : results) {
    out << std::left << std::setw(28) << name << " max_rel_error " << std::scientific << std::setprecision(3)
        << r.max_rel_error << std::defaultfloat << " (" << r.checked << " entries)\n";
    worst = std::max(worst, r.max_rel_error);
  }
  out << "max relative error " << std::scientific << worst << std::defaultfloat << '\n';
  return worst < 1e-3 ? kExitOk : kExitData;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semantic graph parsing toolkit", "udsparse"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Random seed (default: per-command)");
  app.add_option("--threads", g.threads, "Worker threads for scoring and bootstrap")->check(CLI::PositiveNumber);
  app.add_option("--format-version", g.format_version, "Interchange format version");

  ConvertArgs conv;
  auto* convert = app.add_subcommand("convert", "Convert between graph, arborescence and relation files");
  convert->add_option("--in", conv.in)->required()->check(CLI::ExistingFile);
  convert->add_option("--out", conv.out);
  convert->add_option("--from", conv.from)->check(CLI::IsMember({"graph", "arborescence", "relations"}));
  convert->add_option("--to", conv.to)->check(CLI::IsMember({"graph", "arborescence", "relations"}));
  convert->add_flag("--no-syntax", conv.no_syntax, "Semantics-only arborescence");

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Generate a synthetic corpus");
  generate->add_option("--config", gen.config)->check(CLI::ExistingFile);
  generate->add_option("--sentences", gen.sentences);
  generate->add_option("--out", gen.out);

  TrainArgs tr;
  auto* trainc = app.add_subcommand("train", "Train a parser");
  trainc->add_option("--train", tr.train)->required()->check(CLI::ExistingFile);
  trainc->add_option("--dev", tr.dev)->check(CLI::ExistingFile);
  trainc->add_option("--split", tr.split, "Keep only this split of --train");
  trainc->add_option("--config", tr.config)->check(CLI::ExistingFile);
  trainc->add_option("--model", tr.model)->required();
  trainc->add_option("--loss-csv", tr.loss_csv);
  trainc->add_option("--epochs", tr.epochs);

  PredictArgs pr;
  auto* predict = app.add_subcommand("predict", "Parse sentences with a trained model");
  predict->add_option("--model", pr.model)->required()->check(CLI::ExistingFile);
  predict->add_option("--in", pr.in)->required()->check(CLI::ExistingFile);
  predict->add_option("--out", pr.out);

  PredictArgs fd;
  auto* forced = app.add_subcommand("forced-decode", "Predict attributes on gold structure");
  forced->add_option("--model", fd.model)->required()->check(CLI::ExistingFile);
  forced->add_option("--in", fd.in)->required()->check(CLI::ExistingFile);
  forced->add_option("--out", fd.out);

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval-s", "S score of predicted against gold graphs");
  eval->add_option("--pred", ev.pred)->required()->check(CLI::ExistingFile);
  eval->add_option("--gold", ev.gold)->required()->check(CLI::ExistingFile);
  eval->add_option("--restarts", ev.restarts);
  eval->add_flag("--no-attributes", ev.no_attributes);
  eval->add_flag("--semantics-only", ev.semantics_only);
  eval->add_option("--per-sentence", ev.per_sentence, "CSV of per-sentence scores");

  AnalyzeArgs an;
  auto* analyze = app.add_subcommand("analyze", "Attribute correlations, F1 and psi matrices");
  analyze->add_option("--pred", an.pred)->required()->check(CLI::ExistingFile);
  analyze->add_option("--gold", an.gold)->required()->check(CLI::ExistingFile);
  analyze->add_option("--out", an.out)->required();
  analyze->add_option("--thresholds", an.thresholds)->check(CLI::ExistingFile);
  analyze->add_option("--replicants", an.replicants)->check(CLI::PositiveNumber);
  analyze->add_option("--alpha", an.alpha)->check(CLI::Range(0.0, 1.0));

  BaselineArgs bl;
  auto* baseline = app.add_subcommand("baseline", "Median baseline with tuned thresholds");
  baseline->add_option("--train", bl.train)->required()->check(CLI::ExistingFile);
  baseline->add_option("--dev", bl.dev)->check(CLI::ExistingFile);
  baseline->add_option("--test", bl.test)->required()->check(CLI::ExistingFile);
  baseline->add_option("--out", bl.out);

  TuneArgs tu;
  auto* tune = app.add_subcommand("tune-thresholds", "Per-property thresholds maximising dev F1");
  tune->add_option("--pred", tu.pred)->required()->check(CLI::ExistingFile);
  tune->add_option("--gold", tu.gold)->required()->check(CLI::ExistingFile);
  tune->add_option("--out", tu.out);

  GradArgs gr;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of all model gradients");
  gradcheck->add_option("--in", gr.in)->check(CLI::ExistingFile);

  std::vector<std::string> argv(args.rbegin(), args.rend());  // CLI11 consumes from the back
  try {
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    check_format_version(g.format_version);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*convert) return cmd_convert(conv, out);
    if (*generate) return cmd_generate(gen, g, out);
    if (*trainc) return cmd_train(tr, g, out, err);
    if (*predict) return cmd_predict(pr, out, err);
    if (*forced) return cmd_forced(fd, out);
    if (*eval) return cmd_eval(ev, g, out);
    if (*analyze) return cmd_analyze(an, g, out);
    if (*baseline) return cmd_baseline(bl, out);
    if (*tune) return cmd_tune(tu, out);
    if (*gradcheck) return cmd_gradcheck(gr, g, out);
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return e.code() == ErrorCode::kInvalidArgument ? kExitUsage : kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace uds
