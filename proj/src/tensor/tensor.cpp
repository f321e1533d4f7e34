#include "blm/tensor/tensor.hpp"

#include <algorithm>
#include <unordered_set>

#include "blm/error.hpp"

namespace blm {

std::int64_t numel(const Shape& shape) {
  std::int64_t n = 1;
  for (const auto extent : shape) n *= extent;
  return n;
}

std::string to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != 0) out += ", ";
    out += std::to_string(shape[i]);
  }
  out += "]";
  return out;
}

namespace {
thread_local bool t_grad_mode = true;
}  // namespace

NoGradGuard::NoGradGuard() : previous_(t_grad_mode) { t_grad_mode = false; }
NoGradGuard::~NoGradGuard() { t_grad_mode = previous_; }
bool grad_mode_enabled() { return t_grad_mode; }

template <class T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data, bool requires_grad)
    : node_(std::make_shared<detail::Node<T>>()) {
  for (const auto extent : shape) {
    if (extent <= 0) throw DimensionError("tensor extents must be positive, got " + to_string(shape));
  }
  if (static_cast<std::size_t>(blm::numel(shape)) != data.size()) {
    throw DimensionError("shape " + to_string(shape) + " needs " +
                         std::to_string(blm::numel(shape)) + " values, got " +
                         std::to_string(data.size()));
  }
  node_->shape = std::move(shape);
  node_->value = std::move(data);
  node_->requires_grad = requires_grad;
}

template <class T>
BasicTensor<T> BasicTensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T(0), requires_grad);
}

template <class T>
BasicTensor<T> BasicTensor<T>::full(Shape shape, T value, bool requires_grad) {
  const auto n = blm::numel(shape);
  return BasicTensor(std::move(shape), std::vector<T>(static_cast<std::size_t>(std::max<std::int64_t>(n, 0)), value),
                     requires_grad);
}

template <class T>
BasicTensor<T> BasicTensor<T>::scalar(T value, bool requires_grad) {
  return BasicTensor(Shape{1}, std::vector<T>{value}, requires_grad);
}

template <class T>
detail::Node<T>& BasicTensor<T>::checked() const {
  if (!node_) throw ContractError("operation on an undefined tensor");
  return *node_;
}

template <class T>
const Shape& BasicTensor<T>::shape() const {
  return checked().shape;
}

template <class T>
std::int64_t BasicTensor<T>::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " + to_string(s));
  }
  return s[axis];
}

template <class T>
std::size_t BasicTensor<T>::numel() const {
  return checked().value.size();
}

template <class T>
std::span<T> BasicTensor<T>::data() {
  return checked().value;
}

template <class T>
std::span<const T> BasicTensor<T>::data() const {
  return checked().value;
}

template <class T>
T BasicTensor<T>::item() const {
  const auto& n = checked();
  if (n.value.size() != 1) {
    throw ContractError("item() needs a single-element tensor, got " + to_string(n.shape));
  }
  return n.value.front();
}

template <class T>
bool BasicTensor<T>::requires_grad() const {
  return checked().requires_grad;
}

template <class T>
void BasicTensor<T>::set_requires_grad(bool flag) {
  auto& n = checked();
  if (!n.is_leaf()) throw ContractError("requires_grad can only be changed on leaf tensors");
  n.requires_grad = flag;
}

template <class T>
bool BasicTensor<T>::has_grad() const {
  return !checked().grad.empty();
}

template <class T>
std::span<T> BasicTensor<T>::grad() {
  return checked().grad;
}

template <class T>
std::span<const T> BasicTensor<T>::grad() const {
  return checked().grad;
}

template <class T>
void BasicTensor<T>::zero_grad() {
  auto& n = checked();
  n.grad.assign(n.value.size(), T(0));
}

template <class T>
void BasicTensor<T>::backward() const {
  auto& root = checked();
  if (root.value.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " + to_string(root.shape));
  }
  if (!root.requires_grad) {
    throw ContractError("backward() on a tensor that does not require grad");
  }

  // Iterative post-order DFS gives a topological order (inputs before users).
  std::vector<detail::Node<T>*> order;
  std::unordered_set<const detail::Node<T>*> seen;
  std::vector<std::pair<detail::Node<T>*, std::size_t>> stack{{&root, 0}};
  seen.insert(&root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::Node<T>* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
      continue;
    }
    order.push_back(node);
    stack.pop_back();
  }

  for (auto* node : order) {
    if (!node->is_leaf()) node->grad.assign(node->value.size(), T(0));
  }
  if (root.grad.empty()) root.grad.assign(1, T(0));
  root.grad[0] += T(1);

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node<T>* node = *it;
    if (node->is_leaf()) continue;
    node->backward(*node);
    std::vector<T>().swap(node->grad);
  }
}

template <class T>
BasicTensor<T> BasicTensor<T>::detach() const {
  const auto& n = checked();
  return BasicTensor(n.shape, n.value, false);
}

namespace autograd {

template <class T>
BasicTensor<T> make_result(Shape shape, std::vector<T> value, std::vector<BasicTensor<T>> inputs,
                           BackwardFn<T> backward) {
  BasicTensor<T> out(std::move(shape), std::move(value), false);
  if (!grad_mode_enabled()) return out;
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const BasicTensor<T>& t) { return t.requires_grad(); });
  if (!any) return out;
  auto& node = *out.node();
  node.requires_grad = true;
  node.backward = std::move(backward);
  node.inputs.reserve(inputs.size());
  for (auto& in : inputs) node.inputs.push_back(in.node());
  return out;
}

template <class T>
std::span<T> grad_sink(const BasicTensor<T>& t) {
  auto& node = *t.node();
  if (!node.requires_grad) return {};
  if (node.grad.empty()) node.grad.assign(node.value.size(), T(0));
  return node.grad;
}

template BasicTensor<float> make_result(Shape, std::vector<float>, std::vector<BasicTensor<float>>,
                                        BackwardFn<float>);
template BasicTensor<double> make_result(Shape, std::vector<double>,
                                         std::vector<BasicTensor<double>>, BackwardFn<double>);
template std::span<float> grad_sink(const BasicTensor<float>&);
template std::span<double> grad_sink(const BasicTensor<double>&);

}  // namespace autograd

template class BasicTensor<float>;
template class BasicTensor<double>;

}  // namespace blm
