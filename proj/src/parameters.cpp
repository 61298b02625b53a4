#include "uds/numerics/parameters.hpp"

#include <cmath>

#include "uds/error.hpp"

namespace uds::num {

Parameter& ParameterStore::add(const std::string& name, std::vector<std::size_t> shape, Init init,
                               Rng& rng, double scale) {
  if (index_.count(name)) throw Error(ErrorCode::kInvalidArgument, "duplicate parameter '" + name + "'");
  Parameter p;
  p.name = name;
  p.value = Tensor(shape);
  p.grad = Tensor(shape);
  switch (init) {
    case Init::kZero:
      break;
    case Init::kOne:
      p.value.fill(scale);
      break;
    case Init::kGlorot: {
      const double fan_out = static_cast<double>(shape[0]);
      const double fan_in = shape.size() > 1 ? static_cast<double>(shape_size(shape) / shape[0]) : 1.0;
      const double bound = scale * std::sqrt(6.0 / (fan_in + fan_out));
      for (auto& v : p.value.values()) v = rng.uniform(-bound, bound);
      break;
    }
    case Init::kNormal:
      for (auto& v : p.value.values()) v = scale * rng.normal();
      break;
  }
  index_.emplace(name, params_.size());
  params_.push_back(std::move(p));
  return params_.back();
}

Parameter& ParameterStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error(ErrorCode::kInvalidArgument, "unknown parameter '" + name + "'");
  return params_[it->second];
}

const Parameter& ParameterStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error(ErrorCode::kInvalidArgument, "unknown parameter '" + name + "'");
  return params_[it->second];
}

std::vector<Parameter*> ParameterStore::all() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(&p);
  return out;
}

std::vector<const Parameter*> ParameterStore::all() const {
  std::vector<const Parameter*> out;
  for (const auto& p : params_) out.push_back(&p);
  return out;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.grad.fill(0.0);
}

void ParameterStore::copy_values_from(const ParameterStore& other) {
  for (auto& p : params_) {
    const auto& src = other.get(p.name);
    if (!src.value.same_shape(p.value)) {
      throw Error(ErrorCode::kShapeMismatch, "parameter '" + p.name + "' shape differs");
    }
    p.value = src.value;
  }
}

bool ParameterStore::all_finite() const {
  for (const auto& p : params_) {
    if (!p.value.all_finite()) return false;
  }
  return true;
}

}  // namespace uds::num
