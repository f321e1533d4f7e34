#include "blm/tensor/adam.hpp"

#include <cmath>

#include "blm/error.hpp"

namespace blm {

template <class T>
AdamState<T> make_adam_state(const std::vector<BasicParameter<T>>& params, AdamOptions options) {
  AdamState<T> state;
  state.options = options;
  state.m.reserve(params.size());
  state.v.reserve(params.size());
  for (const auto& p : params) {
    state.m.emplace_back(p.tensor.numel(), T(0));
    state.v.emplace_back(p.tensor.numel(), T(0));
  }
  return state;
}

template <class T>
void adam_step(std::vector<BasicParameter<T>>& params, AdamState<T>& state) {
  if (state.m.size() != params.size()) {
    throw ContractError("adam_step: optimizer state tracks " + std::to_string(state.m.size()) +
                        " parameters, got " + std::to_string(params.size()));
  }
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) {
      throw ContractError("adam_step: parameter '" + p.name + "' has no gradient");
    }
  }
  const auto& o = state.options;
  ++state.step;
  const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
  const T step_size = static_cast<T>(o.lr / bc1);
  const T inv_sqrt_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));
  const T b1 = static_cast<T>(o.beta1);
  const T b2 = static_cast<T>(o.beta2);
  const T eps = static_cast<T>(o.eps);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& tensor = params[i].tensor;
    if (state.m[i].size() != tensor.numel()) {
      throw ContractError("adam_step: moment buffer size mismatch for '" + params[i].name + "'");
    }
    auto w = tensor.data();
    const auto g = tensor.grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = b1 * m[j] + (T(1) - b1) * g[j];
      v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
      const T denom = std::sqrt(v[j]) * inv_sqrt_bc2 + eps;
      w[j] -= step_size * m[j] / denom;
    }
  }
}

template <class T>
void zero_grads(std::vector<BasicParameter<T>>& params) {
  for (auto& p : params) p.tensor.zero_grad();
}

template AdamState<float> make_adam_state(const std::vector<BasicParameter<float>>&, AdamOptions);
template AdamState<double> make_adam_state(const std::vector<BasicParameter<double>>&, AdamOptions);
template void adam_step(std::vector<BasicParameter<float>>&, AdamState<float>&);
template void adam_step(std::vector<BasicParameter<double>>&, AdamState<double>&);
template void zero_grads(std::vector<BasicParameter<float>>&);
template void zero_grads(std::vector<BasicParameter<double>>&);

}  // namespace blm
