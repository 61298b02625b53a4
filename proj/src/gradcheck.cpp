#include "uds/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "uds/numerics/rng.hpp"

namespace uds::num {

GradCheckResult gradient_check(const LossFn& f, const std::vector<Parameter*>& params,
                               const GradCheckOptions& options) {
  for (Parameter* p : params) p->grad.fill(0.0);
  {
    Tape tape;
    tape.backward(f(tape));
  }
  std::vector<Tensor> analytic;
  for (Parameter* p : params) analytic.push_back(p->grad);

  auto eval = [&] {
    Tape tape;
    return f(tape).item();
  };

  Rng rng(options.seed);
  GradCheckResult result;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    std::vector<std::size_t> coords(p.value.size());
    std::iota(coords.begin(), coords.end(), 0);
    if (options.samples_per_parameter > 0 && coords.size() > options.samples_per_parameter) {
      rng.shuffle(coords.begin(), coords.end());
      coords.resize(options.samples_per_parameter);
    }
    for (std::size_t i : coords) {
      const double saved = p.value[i];
      p.value[i] = saved + options.eps;
      const double up = eval();
      p.value[i] = saved - options.eps;
      const double down = eval();
      p.value[i] = saved;
      const double numeric = (up - down) / (2.0 * options.eps);
      const double err = std::abs(analytic[k][i] - numeric) / std::max(1.0, std::abs(numeric));
      ++result.checked;
      if (err > result.max_rel_error || result.worst_parameter.empty()) {
        result.max_rel_error = err;
        result.worst_parameter = p.name;
        result.worst_index = i;
      }
    }
  }
  for (std::size_t k = 0; k < params.size(); ++k) params[k]->grad = analytic[k];
  return result;
}

}  // namespace uds::num
