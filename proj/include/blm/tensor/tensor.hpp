#pragma once

// Dense row-major tensors with a reverse-mode tape.
//
// A BasicTensor is a cheap handle onto a shared node, so copies alias the
// same buffer (the usual deep-learning framework convention). Operations
// that take at least one input with requires_grad record a backward closure
// on their output; calling backward() on a scalar walks the recorded graph in
// reverse topological order. Leaf gradients accumulate across calls until
// zero_grad() is invoked.
//
// The element type is a template parameter: float is the production type,
// double backs the finite-difference gradient checks.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace blm {

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

namespace detail {

template <class T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until something accumulates into it
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this node's grad (and value, if needed) and accumulates into inputs.
  std::function<void(const Node&)> backward;

  bool is_leaf() const { return !backward; }
};

}  // namespace detail

template <class T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  // Validates product(shape) == data.size() and that every extent is positive.
  BasicTensor(Shape shape, std::vector<T> data, bool requires_grad = false);

  static BasicTensor zeros(Shape shape, bool requires_grad = false);
  static BasicTensor full(Shape shape, T value, bool requires_grad = false);
  static BasicTensor scalar(T value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::int64_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<T> data();
  std::span<const T> data() const;
  T item() const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);

  bool has_grad() const;
  std::span<T> grad();
  std::span<const T> grad() const;
  // Zero-fills the gradient buffer (allocating it if absent).
  void zero_grad();

  // Reverse sweep from this scalar. Throws ContractError on non-scalars.
  void backward() const;

  // New leaf holding a copy of the values, cut from any graph.
  BasicTensor detach() const;

  explicit BasicTensor(std::shared_ptr<detail::Node<T>> node) : node_(std::move(node)) {}
  const std::shared_ptr<detail::Node<T>>& node() const { return node_; }

 private:
  detail::Node<T>& checked() const;

  std::shared_ptr<detail::Node<T>> node_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

template <class To, class From>
BasicTensor<To> tensor_cast(const BasicTensor<From>& src, bool requires_grad) {
  std::vector<To> out(src.data().begin(), src.data().end());
  return BasicTensor<To>(src.shape(), std::move(out), requires_grad);
}

// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled();

// Hooks for defining differentiable operations in other modules.
namespace autograd {

template <class T>
using BackwardFn = std::function<void(const detail::Node<T>&)>;

// Output tensor for an op. When grad mode is on and any input requires grad,
// the result is connected to `inputs` through `backward`; otherwise it is a
// constant leaf.
template <class T>
BasicTensor<T> make_result(Shape shape, std::vector<T> value,
                           std::vector<BasicTensor<T>> inputs, BackwardFn<T> backward);

// Gradient buffer of `t`, zero-allocated on first use. Empty span when `t`
// does not take gradients.
template <class T>
std::span<T> grad_sink(const BasicTensor<T>& t);

}  // namespace autograd

}  // namespace blm
