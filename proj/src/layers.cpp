#include "uds/numerics/layers.hpp"

#include "uds/error.hpp"

namespace uds::num {

Linear::Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng)
    : w_(&store.add(name + ".W", {out, in}, Init::kGlorot, rng)),
      b_(&store.add(name + ".b", {out}, Init::kZero, rng)),
      in_(in),
      out_(out) {}

Var Linear::operator()(Tape& tape, Var x) const {
  return add(matvec(tape.parameter(*w_), x), tape.parameter(*b_));
}

Mlp::Mlp(ParameterStore& store, const std::string& name, const std::vector<std::size_t>& dims, Rng& rng,
         bool squash_output)
    : squash_output_(squash_output) {
  if (dims.size() < 2) throw Error(ErrorCode::kInvalidArgument, "MLP needs at least input and output dims");
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    layers_.emplace_back(store, name + ".l" + std::to_string(i), dims[i], dims[i + 1], rng);
  }
}

Var Mlp::operator()(Tape& tape, Var x) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    x = layers_[i](tape, x);
    if (i + 1 < layers_.size() || squash_output_) x = tanh(x);
  }
  return x;
}

LstmCell::LstmCell(ParameterStore& store, const std::string& name, std::size_t in, std::size_t hidden, Rng& rng)
    : w_(&store.add(name + ".W", {4 * hidden, in + hidden}, Init::kGlorot, rng)),
      b_(&store.add(name + ".b", {4 * hidden}, Init::kZero, rng)),
      in_(in),
      hidden_(hidden) {}

LstmState LstmCell::operator()(Tape& tape, Var x, const LstmState& prev) const {
  const std::size_t h = hidden_;
  Var gates = add(matvec(tape.parameter(*w_), concat({x, prev.h})), tape.parameter(*b_));
  Var i = sigmoid(slice(gates, 0, h));
  Var f = sigmoid(slice(gates, h, h));
  Var g = tanh(slice(gates, 2 * h, h));
  Var o = sigmoid(slice(gates, 3 * h, h));
  Var c = add(mul(f, prev.c), mul(i, g));
  return {mul(o, tanh(c)), c};
}

LstmState LstmCell::zero_state(Tape& tape) const {
  return {tape.constant(Tensor({hidden_})), tape.constant(Tensor({hidden_}))};
}

Bilinear::Bilinear(ParameterStore& store, const std::string& name, std::size_t d1, std::size_t d2,
                   std::size_t out, Rng& rng)
    : a_(&store.add(name + ".A", {out, d1, d2}, Init::kGlorot, rng)),
      b_(&store.add(name + ".b", {out}, Init::kZero, rng)),
      out_(out) {}

Var Bilinear::operator()(Tape& tape, Var x1, Var x2) const {
  return bilinear(x1, tape.parameter(*a_), x2, tape.parameter(*b_));
}

Biaffine::Biaffine(ParameterStore& store, const std::string& name, std::size_t dx, std::size_t dy, Rng& rng)
    : u_(&store.add(name + ".U", {dx, dy}, Init::kGlorot, rng)),
      w_(&store.add(name + ".w", {dy}, Init::kZero, rng)),
      v_(&store.add(name + ".v", {dx}, Init::kZero, rng)),
      b_(&store.add(name + ".b", {1}, Init::kZero, rng)) {}

Var Biaffine::operator()(Tape& tape, Var x, Var candidates) const {
  // x^T U y_j + w^T y_j = (U^T x + w)^T y_j
  Var q = add(matvec_t(tape.parameter(*u_), x), tape.parameter(*w_));
  Var scores = matvec(candidates, q);
  const std::size_t m = candidates.value().rows();
  Var bias = add(dot(tape.parameter(*v_), x), tape.parameter(*b_));
  // The x-only terms shift every candidate equally.
  std::vector<Var> shift(m, bias);
  return add(scores, concat(shift));
}

}  // namespace uds::num
