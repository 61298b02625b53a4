#pragma once

#include <string>
#include <utility>
#include <vector>

#include "uds/numerics/ops.hpp"
#include "uds/numerics/parameters.hpp"

namespace uds::num {

// y = Wx + b
class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng);

  Var operator()(Tape& tape, Var x) const;
  std::size_t in() const { return in_; }
  std::size_t out() const { return out_; }

 private:
  Parameter* w_ = nullptr;
  Parameter* b_ = nullptr;
  std::size_t in_ = 0, out_ = 0;
};

// Linear layers with tanh between them. The output layer is linear unless
// squash_output is set.
class Mlp {
 public:
  Mlp() = default;
  Mlp(ParameterStore& store, const std::string& name, const std::vector<std::size_t>& dims, Rng& rng,
      bool squash_output = false);

  Var operator()(Tape& tape, Var x) const;
  std::size_t out() const { return layers_.empty() ? 0 : layers_.back().out(); }

 private:
  std::vector<Linear> layers_;
  bool squash_output_ = false;
};

struct LstmState {
  Var h;
  Var c;
};

// Standard LSTM cell, gates packed as [i; f; g; o].
class LstmCell {
 public:
  LstmCell() = default;
  LstmCell(ParameterStore& store, const std::string& name, std::size_t in, std::size_t hidden, Rng& rng);

  LstmState operator()(Tape& tape, Var x, const LstmState& prev) const;
  LstmState zero_state(Tape& tape) const;
  std::size_t hidden() const { return hidden_; }
  std::size_t in() const { return in_; }

 private:
  Parameter* w_ = nullptr;
  Parameter* b_ = nullptr;
  std::size_t in_ = 0, hidden_ = 0;
};

// out_k = x1^T A_k x2 + b_k
class Bilinear {
 public:
  Bilinear() = default;
  Bilinear(ParameterStore& store, const std::string& name, std::size_t d1, std::size_t d2, std::size_t out,
           Rng& rng);

  Var operator()(Tape& tape, Var x1, Var x2) const;
  std::size_t out() const { return out_; }

 private:
  Parameter* a_ = nullptr;
  Parameter* b_ = nullptr;
  std::size_t out_ = 0;
};

// score(x, y_j) = x^T U y_j + w^T y_j + v^T x + b, evaluated for every row of Y.
class Biaffine {
 public:
  Biaffine() = default;
  Biaffine(ParameterStore& store, const std::string& name, std::size_t dx, std::size_t dy, Rng& rng);

  // x: [dx], candidates: [m, dy] -> scores [m]
  Var operator()(Tape& tape, Var x, Var candidates) const;

 private:
  Parameter* u_ = nullptr;
  Parameter* w_ = nullptr;
  Parameter* v_ = nullptr;
  Parameter* b_ = nullptr;
};

}  // namespace uds::num
