#pragma once

#include <deque>
#include <map>
#include <string>
#include <vector>

#include "uds/numerics/rng.hpp"
#include "uds/numerics/tensor.hpp"

namespace uds::num {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
};

enum class Init { kZero, kGlorot, kNormal, kOne };

// Owns every trainable tensor of a model. Addresses are stable for the
// lifetime of the store.
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;
  ParameterStore(ParameterStore&&) = default;
  ParameterStore& operator=(ParameterStore&&) = default;

  Parameter& add(const std::string& name, std::vector<std::size_t> shape, Init init, Rng& rng,
                 double scale = 1.0);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  std::size_t count() const { return params_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();
  // Copies values (not gradients) from a store with identical names/shapes.
  void copy_values_from(const ParameterStore& other);
  bool all_finite() const;

 private:
  std::deque<Parameter> params_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace uds::num
