#include "uds/numerics/ops.hpp"

#include <algorithm>
#include <cmath>

#include "uds/error.hpp"

namespace uds::num {
namespace {

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw Error(ErrorCode::kShapeMismatch, std::string(op) + ": " + shape_string(a.shape()) + " vs " +
                                             shape_string(b.shape()));
}

void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) shape_error(op, a, b);
}

template <typename Fwd, typename Deriv>
Var unary(Var a, Fwd fwd, Deriv deriv) {
  Tape& t = *a.tape();
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
  const std::size_t ai = a.id();
  return t.record(std::move(y), {a}, [ai, deriv](Tape& tape, std::size_t self) {
    const Tensor& g = tape.grad(self);
    const Tensor& x = tape.value(ai);
    const Tensor& y = tape.value(self);
    Tensor& ga = tape.grad(ai);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * deriv(x[i], y[i]);
  });
}

}  // namespace

Var add(Var a, Var b) {
  require_same("add", a.value(), b.value());
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape()->record(std::move(y), {a, b}, [ai, bi](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    for (std::size_t p : {ai, bi}) {
      if (!t.requires_grad(p)) continue;
      Tensor& gp = t.grad(p);
      for (std::size_t i = 0; i < g.size(); ++i) gp[i] += g[i];
    }
  });
}

Var sub(Var a, Var b) {
  require_same("sub", a.value(), b.value());
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape()->record(std::move(y), {a, b}, [ai, bi](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(ai)) {
      Tensor& ga = t.grad(ai);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.requires_grad(bi)) {
      Tensor& gb = t.grad(bi);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same("mul", a.value(), b.value());
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape()->record(std::move(y), {a, b}, [ai, bi](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& av = t.value(ai);
    const Tensor& bv = t.value(bi);
    if (t.requires_grad(ai)) {
      Tensor& ga = t.grad(ai);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.requires_grad(bi)) {
      Tensor& gb = t.grad(bi);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(Var a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var scale_by(Var a, Var s) {
  const Tensor& x = a.value();
  const double k = s.value().item();
  Tensor y = x;
  for (auto& v : y.values()) v *= k;
  const std::size_t ai = a.id(), si = s.id();
  return a.tape()->record(std::move(y), {a, s}, [ai, si](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(ai)) {
      const double k = t.value(si)[0];
      Tensor& ga = t.grad(ai);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * k;
    }
    if (t.requires_grad(si)) {
      const Tensor& x = t.value(ai);
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * x[i];
      t.grad(si)[0] += acc;
    }
  });
}

Var matvec(Var w, Var x) {
  const Tensor& W = w.value();
  const Tensor& X = x.value();
  if (W.rank() != 2 || X.rank() != 1 || W.cols() != X.size()) shape_error("matvec", W, X);
  const std::size_t m = W.rows(), n = W.cols();
  Tensor y({m});
  const double* wp = W.data();
  const double* xp = X.data();
  for (std::size_t r = 0; r < m; ++r) {
    double acc = 0.0;
    const double* wr = wp + r * n;
    for (std::size_t c = 0; c < n; ++c) acc += wr[c] * xp[c];
    y[r] = acc;
  }
  const std::size_t wi = w.id(), xi = x.id();
  return w.tape()->record(std::move(y), {w, x}, [wi, xi, m, n](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(wi)) {
      const double* xp = t.value(xi).data();
      double* gw = t.grad(wi).data();
      for (std::size_t r = 0; r < m; ++r) {
        const double gr = g[r];
        if (gr == 0.0) continue;
        double* row = gw + r * n;
        for (std::size_t c = 0; c < n; ++c) row[c] += gr * xp[c];
      }
    }
    if (t.requires_grad(xi)) {
      const double* wp = t.value(wi).data();
      double* gx = t.grad(xi).data();
      for (std::size_t r = 0; r < m; ++r) {
        const double gr = g[r];
        if (gr == 0.0) continue;
        const double* row = wp + r * n;
        for (std::size_t c = 0; c < n; ++c) gx[c] += gr * row[c];
      }
    }
  });
}

Var matvec_t(Var m, Var x) {
  const Tensor& M = m.value();
  const Tensor& X = x.value();
  if (M.rank() != 2 || X.rank() != 1 || M.rows() != X.size()) shape_error("matvec_t", M, X);
  const std::size_t n = M.rows(), d = M.cols();
  Tensor y({d});
  for (std::size_t r = 0; r < n; ++r) {
    const double xr = X[r];
    for (std::size_t c = 0; c < d; ++c) y[c] += xr * M.at(r, c);
  }
  const std::size_t mi = m.id(), xi = x.id();
  return m.tape()->record(std::move(y), {m, x}, [mi, xi, n, d](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(mi)) {
      const Tensor& X = t.value(xi);
      Tensor& gm = t.grad(mi);
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < d; ++c) gm.at(r, c) += X[r] * g[c];
      }
    }
    if (t.requires_grad(xi)) {
      const Tensor& M = t.value(mi);
      Tensor& gx = t.grad(xi);
      for (std::size_t r = 0; r < n; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < d; ++c) acc += M.at(r, c) * g[c];
        gx[r] += acc;
      }
    }
  });
}

Var matmul(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.rank() != 2 || B.rank() != 2 || A.cols() != B.rows()) shape_error("matmul", A, B);
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  Tensor y({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A.at(i, p);
      for (std::size_t j = 0; j < n; ++j) y.at(i, j) += aip * B.at(p, j);
    }
  }
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape()->record(std::move(y), {a, b}, [ai, bi, m, k, n](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& A = t.value(ai);
    const Tensor& B = t.value(bi);
    if (t.requires_grad(ai)) {
      Tensor& ga = t.grad(ai);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += g.at(i, j) * B.at(p, j);
          ga.at(i, p) += acc;
        }
    }
    if (t.requires_grad(bi)) {
      Tensor& gb = t.grad(bi);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = A.at(i, p);
          for (std::size_t j = 0; j < n; ++j) gb.at(p, j) += aip * g.at(i, j);
        }
    }
  });
}

Var add_rowwise(Var m, Var v) {
  const Tensor& M = m.value();
  const Tensor& V = v.value();
  if (M.rank() != 2 || V.rank() != 1 || M.cols() != V.size()) shape_error("add_rowwise", M, V);
  const std::size_t n = M.rows(), d = M.cols();
  Tensor y = M;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) y.at(r, c) += V[c];
  const std::size_t mi = m.id(), vi = v.id();
  return m.tape()->record(std::move(y), {m, v}, [mi, vi, n, d](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(mi)) {
      Tensor& gm = t.grad(mi);
      for (std::size_t i = 0; i < g.size(); ++i) gm[i] += g[i];
    }
    if (t.requires_grad(vi)) {
      Tensor& gv = t.grad(vi);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) gv[c] += g.at(r, c);
    }
  });
}

Var concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error(ErrorCode::kShapeMismatch, "concat of zero operands");
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.value().rank() != 1) throw Error(ErrorCode::kShapeMismatch, "concat expects rank-1 operands");
    total += p.size();
  }
  Tensor y({total});
  std::vector<std::size_t> offsets;
  std::vector<std::size_t> ids;
  std::size_t off = 0;
  for (const auto& p : parts) {
    const Tensor& v = p.value();
    std::copy(v.data(), v.data() + v.size(), y.data() + off);
    offsets.push_back(off);
    ids.push_back(p.id());
    off += v.size();
  }
  return parts[0].tape()->record(std::move(y), parts, [offsets, ids](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!t.requires_grad(ids[k])) continue;
      Tensor& gp = t.grad(ids[k]);
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[offsets[k] + i];
    }
  });
}

Var slice(Var a, std::size_t offset, std::size_t length) {
  const Tensor& x = a.value();
  if (offset + length > x.size()) {
    throw Error(ErrorCode::kShapeMismatch, "slice [" + std::to_string(offset) + "," +
                                               std::to_string(offset + length) + ") of " +
                                               shape_string(x.shape()));
  }
  Tensor y({length});
  std::copy(x.data() + offset, x.data() + offset + length, y.data());
  const std::size_t ai = a.id();
  return a.tape()->record(std::move(y), {a}, [ai, offset](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(ai);
    for (std::size_t i = 0; i < g.size(); ++i) ga[offset + i] += g[i];
  });
}

Var stack_rows(const std::vector<Var>& rows) {
  if (rows.empty()) throw Error(ErrorCode::kShapeMismatch, "stack_rows of zero operands");
  const std::size_t d = rows[0].size();
  for (const auto& r : rows) {
    if (r.value().rank() != 1 || r.size() != d) shape_error("stack_rows", rows[0].value(), r.value());
  }
  Tensor y({rows.size(), d});
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Tensor& v = rows[i].value();
    std::copy(v.data(), v.data() + d, y.data() + i * d);
    ids.push_back(rows[i].id());
  }
  return rows[0].tape()->record(std::move(y), rows, [ids, d](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (!t.requires_grad(ids[i])) continue;
      Tensor& gp = t.grad(ids[i]);
      for (std::size_t c = 0; c < d; ++c) gp[c] += g[i * d + c];
    }
  });
}

Var row(Var m, std::size_t r) {
  const Tensor& M = m.value();
  if (M.rank() != 2 || r >= M.rows()) throw Error(ErrorCode::kShapeMismatch, "row index out of range");
  return reshape(slice(reshape(m, {M.size()}), r * M.cols(), M.cols()), {M.cols()});
}

Var reshape(Var a, std::vector<std::size_t> shape) {
  const Tensor& x = a.value();
  if (shape_size(shape) != x.size()) {
    throw Error(ErrorCode::kShapeMismatch, "reshape " + shape_string(x.shape()) + " to " + shape_string(shape));
  }
  Tensor y(std::move(shape), x.storage());
  const std::size_t ai = a.id();
  return a.tape()->record(std::move(y), {a}, [ai](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(ai);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var relu(Var a) {
  return unary(a, [](double x) { return x > 0 ? x : 0.0; }, [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var exp(Var a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var square(Var a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var softmax(Var a) {
  const Tensor& x = a.value();
  if (x.rank() != 1 || x.size() == 0) throw Error(ErrorCode::kShapeMismatch, "softmax expects a nonempty vector");
  Tensor y(x.shape());
  const double mx = *std::max_element(x.data(), x.data() + x.size());
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) z += (y[i] = std::exp(x[i] - mx));
  for (std::size_t i = 0; i < x.size(); ++i) y[i] /= z;
  const std::size_t ai = a.id();
  return a.tape()->record(std::move(y), {a}, [ai](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    double gy = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) gy += g[i] * y[i];
    Tensor& ga = t.grad(ai);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += y[i] * (g[i] - gy);
  });
}

Var log_softmax(Var a) {
  const Tensor& x = a.value();
  if (x.rank() != 1 || x.size() == 0) throw Error(ErrorCode::kShapeMismatch, "log_softmax expects a nonempty vector");
  Tensor y(x.shape());
  const double mx = *std::max_element(x.data(), x.data() + x.size());
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) z += std::exp(x[i] - mx);
  const double lz = mx + std::log(z);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] - lz;
  const std::size_t ai = a.id();
  return a.tape()->record(std::move(y), {a}, [ai](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    double gs = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) gs += g[i];
    Tensor& ga = t.grad(ai);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] - std::exp(y[i]) * gs;
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  const std::size_t ai = a.id();
  return a.tape()->record(Tensor::scalar(s), {a}, [ai](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    Tensor& ga = t.grad(ai);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.size());
  if (n == 0) throw Error(ErrorCode::kShapeMismatch, "mean of an empty tensor");
  return scale(sum(a), 1.0 / n);
}

Var dot(Var a, Var b) {
  require_same("dot", a.value(), b.value());
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape()->record(Tensor::scalar(s), {a, b}, [ai, bi](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    if (t.requires_grad(ai)) {
      const Tensor& y = t.value(bi);
      Tensor& ga = t.grad(ai);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * y[i];
    }
    if (t.requires_grad(bi)) {
      const Tensor& x = t.value(ai);
      Tensor& gb = t.grad(bi);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g * x[i];
    }
  });
}

Var pick(Var a, std::size_t i) {
  const Tensor& x = a.value();
  if (i >= x.size()) throw Error(ErrorCode::kShapeMismatch, "pick index out of range");
  const std::size_t ai = a.id();
  return a.tape()->record(Tensor::scalar(x[i]), {a}, [ai, i](Tape& t, std::size_t self) {
    t.grad(ai)[i] += t.grad(self)[0];
  });
}

Var maximum(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error(ErrorCode::kShapeMismatch, "maximum of zero operands");
  Tensor y = parts[0].value();
  std::vector<std::size_t> arg(y.size(), 0);
  for (std::size_t k = 1; k < parts.size(); ++k) {
    const Tensor& v = parts[k].value();
    require_same("maximum", y, v);
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (v[i] > y[i]) {
        y[i] = v[i];
        arg[i] = k;
      }
    }
  }
  std::vector<std::size_t> ids;
  for (const auto& p : parts) ids.push_back(p.id());
  return parts[0].tape()->record(std::move(y), parts, [ids, arg](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const std::size_t src = ids[arg[i]];
      if (t.requires_grad(src)) t.grad(src)[i] += g[i];
    }
  });
}

Var minimum(Var a, Var b) {
  require_same("minimum", a.value(), b.value());
  const Tensor& x = a.value();
  const Tensor& z = b.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::min(x[i], z[i]);
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape()->record(std::move(y), {a, b}, [ai, bi](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& x = t.value(ai);
    const Tensor& z = t.value(bi);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const std::size_t dst = x[i] <= z[i] ? ai : bi;
      if (t.requires_grad(dst)) t.grad(dst)[i] += g[i];
    }
  });
}

Var lookup(Tape& tape, Parameter& p, std::size_t r) {
  const Tensor& table = p.value;
  if (table.rank() != 2 || r >= table.rows()) {
    throw Error(ErrorCode::kShapeMismatch, "lookup row " + std::to_string(r) + " in " + shape_string(table.shape()));
  }
  const std::size_t d = table.cols();
  Tensor y({d});
  std::copy(table.data() + r * d, table.data() + (r + 1) * d, y.data());
  Parameter* param = &p;
  // A grad-requiring leaf whose backward writes into the parameter row.
  Var leaf = tape.variable(Tensor({1}));
  return tape.record(std::move(y), {leaf}, [param, r, d](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    double* dst = param->grad.data() + r * d;
    for (std::size_t c = 0; c < d; ++c) dst[c] += g[c];
  });
}

Var bilinear(Var x1, Var a, Var x2, Var b) {
  const Tensor& X1 = x1.value();
  const Tensor& A = a.value();
  const Tensor& X2 = x2.value();
  const Tensor& B = b.value();
  if (A.rank() != 3 || X1.rank() != 1 || X2.rank() != 1 || A.shape()[1] != X1.size() ||
      A.shape()[2] != X2.size() || B.size() != A.shape()[0]) {
    throw Error(ErrorCode::kShapeMismatch, "bilinear: x1 " + shape_string(X1.shape()) + ", A " +
                                               shape_string(A.shape()) + ", x2 " + shape_string(X2.shape()) +
                                               ", b " + shape_string(B.shape()));
  }
  const std::size_t out = A.shape()[0], d1 = X1.size(), d2 = X2.size();
  Tensor y({out});
  for (std::size_t k = 0; k < out; ++k) {
    double acc = B[k];
    const double* ak = A.data() + k * d1 * d2;
    for (std::size_t i = 0; i < d1; ++i) {
      double inner = 0.0;
      const double* ai = ak + i * d2;
      for (std::size_t j = 0; j < d2; ++j) inner += ai[j] * X2[j];
      acc += X1[i] * inner;
    }
    y[k] = acc;
  }
  const std::size_t i1 = x1.id(), ia = a.id(), i2 = x2.id(), ib = b.id();
  return x1.tape()->record(std::move(y), {x1, a, x2, b}, [=](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& X1 = t.value(i1);
    const Tensor& A = t.value(ia);
    const Tensor& X2 = t.value(i2);
    const bool g1 = t.requires_grad(i1), ga = t.requires_grad(ia), g2 = t.requires_grad(i2);
    for (std::size_t k = 0; k < out; ++k) {
      const double gk = g[k];
      if (gk == 0.0) continue;
      const double* ak = A.data() + k * d1 * d2;
      for (std::size_t i = 0; i < d1; ++i) {
        const double* ai = ak + i * d2;
        if (g1) {
          double inner = 0.0;
          for (std::size_t j = 0; j < d2; ++j) inner += ai[j] * X2[j];
          t.grad(i1)[i] += gk * inner;
        }
        if (ga) {
          double* gak = t.grad(ia).data() + k * d1 * d2 + i * d2;
          for (std::size_t j = 0; j < d2; ++j) gak[j] += gk * X1[i] * X2[j];
        }
        if (g2) {
          Tensor& gx2 = t.grad(i2);
          for (std::size_t j = 0; j < d2; ++j) gx2[j] += gk * X1[i] * ai[j];
        }
      }
    }
    if (t.requires_grad(ib)) {
      Tensor& gb = t.grad(ib);
      for (std::size_t k = 0; k < out; ++k) gb[k] += g[k];
    }
  });
}

Var harmonic_combine(Var m, Var b) {
  const double mv = m.value().item();
  const double bv = b.value().item();
  const double s = mv + bv;
  const double y = s == 0.0 ? 0.0 : 2.0 * mv * bv / s;
  const std::size_t mi = m.id(), bi = b.id();
  return m.tape()->record(Tensor::scalar(y), {m, b}, [mi, bi, mv, bv, s](Tape& t, std::size_t self) {
    if (s == 0.0) return;
    const double g = t.grad(self)[0];
    // d/dm 2mb/(m+b) = 2b^2/(m+b)^2, symmetric for b.
    if (t.requires_grad(mi)) t.grad(mi)[0] += g * 2.0 * bv * bv / (s * s);
    if (t.requires_grad(bi)) t.grad(bi)[0] += g * 2.0 * mv * mv / (s * s);
  });
}

Var bce_with_logits(Var logits, const Tensor& targets, const Tensor& weights) {
  const Tensor& z = logits.value();
  require_same("bce_with_logits", z, targets);
  require_same("bce_with_logits", z, weights);
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (weights[i] == 0.0) continue;
    // -[t log s(z) + (1-t) log(1-s(z))] = max(z,0) - z t + log(1 + e^{-|z|})
    const double zi = z[i];
    total += weights[i] * (std::max(zi, 0.0) - zi * targets[i] + std::log1p(std::exp(-std::abs(zi))));
  }
  const std::size_t li = logits.id();
  return logits.tape()->record(Tensor::scalar(total), {logits}, [li, targets, weights](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    const Tensor& z = t.value(li);
    Tensor& gz = t.grad(li);
    for (std::size_t i = 0; i < z.size(); ++i) {
      if (weights[i] == 0.0) continue;
      const double s = z[i] >= 0 ? 1.0 / (1.0 + std::exp(-z[i])) : std::exp(z[i]) / (1.0 + std::exp(z[i]));
      gz[i] += g * weights[i] * (s - targets[i]);
    }
  });
}

Var dropout(Var a, double p, Rng& rng) {
  if (p <= 0.0) return a;
  const Tensor& x = a.value();
  Tensor mask(x.shape());
  for (auto& m : mask.values()) m = rng.uniform() < p ? 0.0 : 1.0 / (1.0 - p);
  return mul(a, a.tape()->constant(std::move(mask)));
}

}  // namespace uds::num
