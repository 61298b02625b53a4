#pragma once

#include <cstddef>
#include <vector>

#include "uds/numerics/rng.hpp"
#include "uds/numerics/tape.hpp"

// Differentiable operations over Var. Shapes are explicit: rank-1 vectors,
// rank-2 matrices, no broadcasting. Mismatches throw SHAPE_MISMATCH.
namespace uds::num {

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
// Vector times a scalar Var.
Var scale_by(Var a, Var s);

// [m,n] x [n] -> [m]
Var matvec(Var w, Var x);
// [n,d]^T x [n] -> [d]; weighted sum of the rows of m.
Var matvec_t(Var m, Var x);
// [m,k] x [k,n] -> [m,n]
Var matmul(Var a, Var b);
// [n,d] + [d] added to every row.
Var add_rowwise(Var m, Var v);

Var concat(const std::vector<Var>& parts);
Var slice(Var a, std::size_t offset, std::size_t length);
Var stack_rows(const std::vector<Var>& rows);
Var row(Var m, std::size_t r);
Var reshape(Var a, std::vector<std::size_t> shape);

Var tanh(Var a);
Var sigmoid(Var a);
Var relu(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);

Var softmax(Var a);
Var log_softmax(Var a);

Var sum(Var a);
Var mean(Var a);
Var dot(Var a, Var b);
Var pick(Var a, std::size_t i);

// Elementwise maximum over equally shaped inputs (max-pooling).
Var maximum(const std::vector<Var>& parts);
// Elementwise minimum; ties route the gradient to a.
Var minimum(Var a, Var b);

// Row r of an embedding table; the backward pass writes straight into p.grad.
Var lookup(Tape& tape, Parameter& p, std::size_t r);

// out_k = x1^T A_k x2 + b_k with A of shape [out, d1, d2] and b of shape [out].
Var bilinear(Var x1, Var a, Var x2, Var b);

// 2mb/(m+b) for scalars m, b >= 0; defined as 0 (with zero gradient) when m+b = 0.
Var harmonic_combine(Var m, Var b);

// sum_i w_i * BCE(sigmoid(z_i), t_i), computed stably from logits.
Var bce_with_logits(Var logits, const Tensor& targets, const Tensor& weights);

// Inverted dropout; identity when p == 0.
Var dropout(Var a, double p, Rng& rng);

}  // namespace uds::num
