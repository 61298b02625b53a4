#include "uds/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <numeric>
#include <thread>
#include <unordered_map>

#include <boost/math/distributions/students_t.hpp>

#include "uds/error.hpp"
#include "uds/numerics/rng.hpp"

namespace uds {

void AttributeMatrix::add_row(std::string key) {
  rows.push_back(std::move(key));
  cells.emplace_back(properties.size());
}

AttributeMatrix attribute_matrix(const std::vector<UDSGraph>& graphs, Carrier carrier) {
  AttributeMatrix m;
  auto props = carrier == Carrier::kNode ? AttributeInventory::node_properties()
                                         : AttributeInventory::edge_properties();
  m.properties.assign(props.begin(), props.end());

  auto fill = [&](const AttributeMap& attrs, std::string key) {
    bool any = false;
    std::vector<std::optional<Cell>> row(m.properties.size());
    for (const auto& [name, rec] : attrs) {
      if (!is_annotated(rec)) continue;
      auto idx = carrier == Carrier::kNode ? AttributeInventory::node_index(name)
                                           : AttributeInventory::edge_index(name);
      if (!idx) continue;
      row[*idx] = Cell{rec.value, rec.confidence};
      any = true;
    }
    if (!any) return;
    m.rows.push_back(std::move(key));
    m.cells.push_back(std::move(row));
  };

  for (const auto& g : graphs) {
    if (carrier == Carrier::kNode) {
      for (const auto& n : g.nodes) fill(n.attributes, g.sentence_id + "\t" + n.id);
    } else {
      for (const auto& e : g.edges)
        fill(e.attributes, g.sentence_id + "\t" + g.nodes[e.head].id + "\t" + g.nodes[e.dependent].id);
    }
  }
  return m;
}

AttributeMatrix align_rows(const AttributeMatrix& pred, const AttributeMatrix& gold) {
  if (pred.properties != gold.properties)
    throw Error(ErrorCode::kShapeMismatch, "attribute matrices have different property columns");
  std::unordered_map<std::string, std::size_t> where;
  for (std::size_t i = 0; i < pred.rows.size(); ++i) where.emplace(pred.rows[i], i);
  AttributeMatrix out;
  out.properties = gold.properties;
  for (const auto& key : gold.rows) {
    out.add_row(key);
    auto it = where.find(key);
    if (it != where.end()) out.cells.back() = pred.cells[it->second];
  }
  return out;
}

namespace {

void check_columns(const AttributeMatrix& pred, const AttributeMatrix& gold) {
  if (pred.properties != gold.properties || pred.rows.size() != gold.rows.size())
    throw Error(ErrorCode::kShapeMismatch, "pred and gold matrices are not row-aligned (use align_rows)");
}

// (pred, gold) values for one column over rows annotated in both.
void column_pairs(const AttributeMatrix& pred, const AttributeMatrix& gold, std::size_t j, std::vector<double>& p,
                  std::vector<double>& g) {
  p.clear();
  g.clear();
  for (std::size_t i = 0; i < gold.rows.size(); ++i) {
    const auto& gc = gold.cells[i][j];
    const auto& pc = pred.cells[i][j];
    if (!gc || gc->confidence <= 0.0 || !pc) continue;
    p.push_back(pc->value);
    g.push_back(gc->value);
  }
}

}  // namespace

namespace {

bool is_constant(const std::vector<double>& v) {
  return std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) == v.end();
}

}  // namespace

PearsonResult pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw Error(ErrorCode::kLengthMismatch, "pearson: length mismatch");
  const std::size_t n = x.size();
  if (n < 3) throw Error(ErrorCode::kDegenerate, "pearson: fewer than 3 pairs");
  // checked exactly: a rounded mean leaves a tiny nonzero variance on constants
  if (is_constant(x) || is_constant(y)) throw Error(ErrorCode::kDegenerate, "pearson: zero variance");
  double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) throw Error(ErrorCode::kDegenerate, "pearson: zero variance");
  PearsonResult r;
  r.n = n;
  r.rho = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  if (std::abs(r.rho) >= 1.0) {
    r.p_value = 0.0;
  } else {
    double df = static_cast<double>(n - 2);
    double t = r.rho * std::sqrt(df / (1.0 - r.rho * r.rho));
    boost::math::students_t dist(df);
    r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  }
  return r;
}

std::vector<PropertyCorrelation> pearson_per_attribute(const AttributeMatrix& pred, const AttributeMatrix& gold) {
  check_columns(pred, gold);
  std::vector<PropertyCorrelation> out;
  std::vector<double> p, g;
  for (std::size_t j = 0; j < gold.properties.size(); ++j) {
    column_pairs(pred, gold, j, p, g);
    PropertyCorrelation pc;
    pc.property = gold.properties[j];
    pc.n = p.size();
    try {
      auto r = pearson(p, g);
      pc.rho = r.rho;
      pc.p_value = r.p_value;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerate) throw;
    }
    out.push_back(std::move(pc));
  }
  return out;
}

std::optional<double> macro_rho(const std::vector<PropertyCorrelation>& rows, std::size_t min_n) {
  double sum = 0;
  std::size_t k = 0;
  for (const auto& r : rows) {
    if (r.n < min_n || !r.rho) continue;
    sum += *r.rho;
    ++k;
  }
  if (k == 0) return std::nullopt;
  return sum / static_cast<double>(k);
}

BinaryScore binary_score(const std::vector<double>& pred, const std::vector<double>& gold, double threshold) {
  if (pred.size() != gold.size()) throw Error(ErrorCode::kLengthMismatch, "binary_score: length mismatch");
  BinaryScore s;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    bool p = pred[i] > threshold, g = gold[i] > 0.0;
    if (p && g) ++s.tp;
    else if (p) ++s.fp;
    else if (g) ++s.fn;
    else ++s.tn;
  }
  if (s.tp + s.fp + s.fn > 0)
    s.f1 = 2.0 * static_cast<double>(s.tp) / static_cast<double>(2 * s.tp + s.fp + s.fn);
  return s;
}

std::vector<double> threshold_grid() {
  std::vector<double> grid;
  for (int i = -60; i <= 60; ++i) grid.push_back(i / 20.0);  // exact decimals, unlike i * 0.05
  return grid;
}

std::vector<ThresholdChoice> tune_thresholds(const AttributeMatrix& dev_pred, const AttributeMatrix& dev_gold) {
  check_columns(dev_pred, dev_gold);
  const auto grid = threshold_grid();
  std::vector<ThresholdChoice> out;
  std::vector<double> p, g;
  for (std::size_t j = 0; j < dev_gold.properties.size(); ++j) {
    column_pairs(dev_pred, dev_gold, j, p, g);
    ThresholdChoice c;
    c.property = dev_gold.properties[j];
    if (!p.empty()) {
      std::optional<double> best;
      for (double t : grid) {
        auto f = binary_score(p, g, t).f1;
        if (!f) continue;
        if (!best || *f > *best) {
          best = f;
          c.threshold = t;
        }
      }
      c.dev_f1 = best;
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::map<std::string, double> threshold_map(const std::vector<ThresholdChoice>& choices) {
  std::map<std::string, double> m;
  for (const auto& c : choices) m[c.property] = c.threshold;
  return m;
}

F1Report binarized_f1(const AttributeMatrix& pred, const AttributeMatrix& gold,
                      const std::map<std::string, double>& thresholds) {
  check_columns(pred, gold);
  F1Report rep;
  std::vector<double> p, g;
  double sum = 0;
  std::size_t k = 0;
  for (std::size_t j = 0; j < gold.properties.size(); ++j) {
    column_pairs(pred, gold, j, p, g);
    PropertyF1 row;
    row.property = gold.properties[j];
    auto it = thresholds.find(row.property);
    row.threshold = it == thresholds.end() ? 0.0 : it->second;
    row.score = binary_score(p, g, row.threshold);
    if (row.score.f1) {
      sum += *row.score.f1;
      ++k;
    }
    rep.properties.push_back(std::move(row));
  }
  if (k > 0) rep.macro_f1 = sum / static_cast<double>(k);
  return rep;
}

std::map<std::string, double> median_baseline(const AttributeMatrix& train_gold) {
  std::map<std::string, double> out;
  for (std::size_t j = 0; j < train_gold.properties.size(); ++j) {
    std::vector<double> v;
    for (const auto& row : train_gold.cells)
      if (row[j] && row[j]->confidence > 0.0) v.push_back(row[j]->value);
    if (v.empty()) continue;
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    out[train_gold.properties[j]] = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  }
  return out;
}

AttributeMatrix apply_baseline(const std::map<std::string, double>& baseline, const AttributeMatrix& gold) {
  AttributeMatrix out;
  out.properties = gold.properties;
  for (std::size_t i = 0; i < gold.rows.size(); ++i) {
    out.add_row(gold.rows[i]);
    for (std::size_t j = 0; j < gold.properties.size(); ++j) {
      if (!gold.cells[i][j]) continue;
      auto it = baseline.find(gold.properties[j]);
      if (it != baseline.end()) out.cells.back()[j] = Cell{it->second, 1.0};
    }
  }
  return out;
}

namespace {

// Rows complete for both properties in gold and pred.
struct PairData {
  std::vector<double> gj, gk, pj, pk;
  std::size_t size() const { return gj.size(); }
};

PairData pair_data(const AttributeMatrix& pred, const AttributeMatrix& gold, std::size_t j, std::size_t k) {
  PairData d;
  for (std::size_t i = 0; i < gold.rows.size(); ++i) {
    const auto& a = gold.cells[i][j];
    const auto& b = gold.cells[i][k];
    const auto& c = pred.cells[i][j];
    const auto& e = pred.cells[i][k];
    if (!a || !b || !c || !e || a->confidence <= 0.0 || b->confidence <= 0.0) continue;
    d.gj.push_back(a->value);
    d.gk.push_back(b->value);
    d.pj.push_back(c->value);
    d.pk.push_back(e->value);
  }
  return d;
}

// nullopt where the statistic is undefined. idx selects (resampled) rows.
std::optional<double> psi_of(const PairData& d, const std::vector<std::size_t>* idx) {
  const std::size_t n = idx ? idx->size() : d.size();
  if (n < 3) return std::nullopt;
  auto at = [&](std::size_t i) { return idx ? (*idx)[i] : i; };
  double rjk = 0, rjj = 0, rkk = 0, mj = 0, mk = 0;
  bool varies_j = false, varies_k = false;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = at(i);
    varies_j = varies_j || d.gj[r] != d.gj[at(0)];
    varies_k = varies_k || d.gk[r] != d.gk[at(0)];
    double a = d.gj[r] - d.pj[r], b = d.gk[r] - d.pk[r];
    rjk += a * b;
    rjj += a * a;
    rkk += b * b;
    mj += d.gj[r];
    mk += d.gk[r];
  }
  mj /= static_cast<double>(n);
  mk /= static_cast<double>(n);
  double sjk = 0, sjj = 0, skk = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = at(i);
    double a = d.gj[r] - mj, b = d.gk[r] - mk;
    sjk += a * b;
    sjj += a * a;
    skk += b * b;
  }
  if (!varies_j || !varies_k || rjj <= 0.0 || rkk <= 0.0 || sjj <= 0.0 || skk <= 0.0) return std::nullopt;
  double gold_corr = sjk / std::sqrt(sjj * skk);
  if (gold_corr == 0.0) return std::nullopt;
  double resid_corr = rjk / std::sqrt(rjj * rkk);
  double v = std::tanh(1.0 - std::abs(resid_corr) / std::abs(gold_corr));
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

double psi(const AttributeMatrix& pred, const AttributeMatrix& gold, std::size_t j, std::size_t k) {
  check_columns(pred, gold);
  if (j >= gold.properties.size() || k >= gold.properties.size())
    throw Error(ErrorCode::kInvalidArgument, "psi: property index out of range");
  auto d = pair_data(pred, gold, j, k);
  if (d.size() < 3) throw Error(ErrorCode::kDegenerate, "psi: fewer than 3 complete instances");
  auto v = psi_of(d, nullptr);
  if (!v) throw Error(ErrorCode::kDegenerate, "psi: zero residual or gold correlation");
  return *v;
}

PsiReport psi_matrix(const AttributeMatrix& pred, const AttributeMatrix& gold, std::size_t replicants, double alpha,
                     std::uint64_t seed, std::size_t threads) {
  check_columns(pred, gold);
  if (replicants == 0) throw Error(ErrorCode::kInvalidArgument, "psi_matrix: replicants must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::kInvalidArgument, "psi_matrix: alpha must be in (0,1)");
  const std::size_t K = gold.properties.size();
  PsiReport rep;
  rep.properties = gold.properties;
  rep.psi.assign(K, std::vector<double>(K, 0.0));
  rep.defined.assign(K, std::vector<bool>(K, false));
  rep.significant.assign(K, std::vector<bool>(K, false));
  rep.p_value.assign(K, std::vector<double>(K, 1.0));
  rep.pair_count.assign(K, std::vector<std::size_t>(K, 0));

  struct Job {
    std::size_t j, k, index;
    std::optional<double> value;
    std::size_t n = 0;
    double p = 1.0;
  };
  std::vector<Job> jobs;
  for (std::size_t j = 0; j < K; ++j)
    for (std::size_t k = j + 1; k < K; ++k) jobs.push_back({j, k, jobs.size(), std::nullopt});

  auto run = [&](Job& job) {
    auto d = pair_data(pred, gold, job.j, job.k);
    job.n = d.size();
    job.value = psi_of(d, nullptr);
    if (!job.value) return;
    num::Rng rng(num::derive_seed(seed, job.index));
    std::vector<std::size_t> idx(d.size());
    std::size_t le = 0, ge = 0;
    for (std::size_t b = 0; b < replicants; ++b) {
      for (auto& i : idx) i = rng.below(d.size());
      double v = psi_of(d, &idx).value_or(0.0);
      if (v <= 0.0) ++le;
      if (v >= 0.0) ++ge;
    }
    job.p = std::min(1.0, 2.0 * static_cast<double>(std::min(le, ge)) / static_cast<double>(replicants));
  };

  threads = std::max<std::size_t>(1, threads);
  std::vector<std::exception_ptr> errors(threads);
  auto worker = [&](std::size_t w) {
    try {
      for (std::size_t i = w; i < jobs.size(); i += threads) run(jobs[i]);
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(worker, w);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  for (const auto& job : jobs)
    if (job.value) ++rep.tested_pairs;
  rep.corrected_alpha = rep.tested_pairs ? alpha / static_cast<double>(rep.tested_pairs) : alpha;
  for (const auto& job : jobs) {
    for (auto [a, b] : {std::pair{job.j, job.k}, std::pair{job.k, job.j}}) {
      rep.pair_count[a][b] = job.n;
      if (!job.value) continue;
      rep.defined[a][b] = true;
      rep.psi[a][b] = *job.value;
      rep.p_value[a][b] = job.p;
      rep.significant[a][b] = job.p < rep.corrected_alpha;
    }
  }
  return rep;
}

}  // namespace uds
