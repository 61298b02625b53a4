#include "uds/numerics/tape.hpp"

#include "uds/error.hpp"

namespace uds::num {

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::push(Tensor value, bool requires_grad, BackwardFn backward, Parameter* param) {
  Node node;
  node.value = std::move(value);
  node.backward = std::move(backward);
  node.param = param;
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) { return push(std::move(value), false, nullptr, nullptr); }

Var Tape::variable(Tensor value) { return push(std::move(value), true, nullptr, nullptr); }

Var Tape::parameter(Parameter& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return Var(this, it->second);
  Var v = push(p.value, true, nullptr, &p);
  param_nodes_.emplace(&p, v.id());
  return v;
}

Var Tape::record(Tensor value, std::initializer_list<Var> parents, BackwardFn backward) {
  return record(std::move(value), std::vector<Var>(parents), std::move(backward));
}

Var Tape::record(Tensor value, const std::vector<Var>& parents, BackwardFn backward) {
  if (!value.all_finite()) {
    throw Error(ErrorCode::kNonfinite, "operation produced a non-finite value");
  }
  bool needs = false;
  for (const auto& p : parents) {
    if (p.tape() != this) throw Error(ErrorCode::kInvalidArgument, "operand recorded on another tape");
    needs = needs || nodes_[p.id()].requires_grad;
  }
  return push(std::move(value), needs, needs ? std::move(backward) : nullptr, nullptr);
}

Tensor& Tape::grad(std::size_t id) {
  auto& node = nodes_[id];
  if (node.grad.size() != node.value.size()) node.grad = Tensor(node.value.shape());
  return node.grad;
}

Tensor Tape::gradient(Var v) const {
  const auto& node = nodes_[v.id()];
  if (node.grad.size() != node.value.size()) return Tensor(node.value.shape());
  return node.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw Error(ErrorCode::kInvalidArgument, "loss recorded on another tape");
  if (value(loss.id()).size() != 1) {
    throw Error(ErrorCode::kNotScalar, "backward requires a scalar loss, got shape " +
                                           shape_string(value(loss.id()).shape()));
  }
  if (!nodes_[loss.id()].requires_grad) return;
  grad(loss.id())[0] += 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    auto& node = nodes_[i];
    if (!node.requires_grad || node.grad.size() == 0) continue;
    if (node.backward) node.backward(*this, i);
    if (node.param) {
      auto& dst = node.param->grad;
      const auto& src = node.grad;
      for (std::size_t k = 0; k < src.size(); ++k) dst[k] += src[k];
    }
  }
}

}  // namespace uds::num
