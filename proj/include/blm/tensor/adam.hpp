#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "blm/tensor/tensor.hpp"

namespace blm {

// Trainable tensor with a model-unique dotted path, e.g. "encoder.conv3d_1.weight".
template <class T>
struct BasicParameter {
  std::string name;
  BasicTensor<T> tensor;
};

using Parameter = BasicParameter<float>;

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment buffers mirror the parameter list they were made for.
template <class T>
struct AdamState {
  std::int64_t step = 0;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  AdamOptions options;
};

template <class T>
AdamState<T> make_adam_state(const std::vector<BasicParameter<T>>& params, AdamOptions options = {});

// One bias-corrected Adam update. Gradients are read, never cleared.
// Throws ContractError if a parameter has no gradient buffer.
template <class T>
void adam_step(std::vector<BasicParameter<T>>& params, AdamState<T>& state);

template <class T>
void zero_grads(std::vector<BasicParameter<T>>& params);

}  // namespace blm
