#pragma once

#include <cstddef>
#include <functional>
#include <deque>
#include <unordered_map>
#include <vector>

#include "uds/numerics/parameters.hpp"
#include "uds/numerics/tensor.hpp"

namespace uds::num {

class Tape;

// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Tensor& value() const;
  double item() const { return value().item(); }
  std::size_t size() const { return value().size(); }
  double operator[](std::size_t i) const { return value()[i]; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode tape. Node ids increase in recording order, so reverse id
// order is a valid topological order for backward.
class Tape {
 public:
  // Called during backward with the node's own id; reads grad(self) and
  // accumulates into parents via grad(parent).
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Leaf that receives a gradient but is not a stored parameter.
  Var variable(Tensor value);
  // One leaf per parameter per tape; gradients flow into Parameter::grad.
  Var parameter(Parameter& p);

  // Records an op result. Requires grad iff any parent does. Throws
  // NONFINITE when the value contains NaN or Inf.
  Var record(Tensor value, std::initializer_list<Var> parents, BackwardFn backward);
  Var record(Tensor value, const std::vector<Var>& parents, BackwardFn backward);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  // Gradient buffer of a node, allocated on first access.
  Tensor& grad(std::size_t id);
  // Gradient of a node after backward; zeros if it was never reached.
  Tensor gradient(Var v) const;

  // Runs backward from a scalar loss and adds parameter gradients into
  // Parameter::grad. Throws NOT_SCALAR for non-scalar losses.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  Var push(Tensor value, bool requires_grad, BackwardFn backward, Parameter* param);

  // deque: references to recorded values stay valid while recording.
  std::deque<Node> nodes_;
  std::unordered_map<Parameter*, std::size_t> param_nodes_;
};

}  // namespace uds::num
