#pragma once

#include <cstddef>
#include <cstring>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "occdist/errors.hpp"

namespace occdist {

inline std::string shape_to_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

// N-dimensional array of T, row-major, with an optional gradient buffer.
// Copies share storage (handle semantics); use clone() for a deep copy.
// Zero-sized dimensions are tolerated as a degenerate boundary case so that
// empty embedding sets remain representable.
template <typename T>
class BasicTensor {
 public:
  BasicTensor() : s_(std::make_shared<Storage>()) {}

  explicit BasicTensor(std::vector<std::size_t> shape, bool requires_grad = false)
      : s_(std::make_shared<Storage>()) {
    s_->shape = std::move(shape);
    s_->data.assign(count(s_->shape), T(0));
    if (requires_grad) set_requires_grad(true);
  }

  static BasicTensor from_data(std::vector<std::size_t> shape, std::vector<T> data,
                               bool requires_grad = false) {
    if (count(shape) != data.size()) {
      throw DimensionError("tensor: shape " + shape_to_string(shape) + " expects " +
                           std::to_string(count(shape)) + " values, got " +
                           std::to_string(data.size()));
    }
    BasicTensor t;
    t.s_->shape = std::move(shape);
    t.s_->data = std::move(data);
    if (requires_grad) t.set_requires_grad(true);
    return t;
  }

  static BasicTensor scalar(T value, bool requires_grad = false) {
    return from_data({1}, {value}, requires_grad);
  }

  const std::vector<std::size_t>& shape() const { return s_->shape; }
  std::size_t rank() const { return s_->shape.size(); }
  std::size_t size() const { return s_->data.size(); }
  std::size_t dim(std::size_t i) const { return s_->shape.at(i); }

  std::vector<T>& data() { return s_->data; }
  const std::vector<T>& data() const { return s_->data; }

  bool requires_grad() const { return s_->requires_grad; }
  void set_requires_grad(bool on) {
    s_->requires_grad = on;
    if (on && s_->grad.size() != s_->data.size()) s_->grad.assign(s_->data.size(), T(0));
    if (!on) s_->grad.clear();
  }

  bool has_grad() const { return !s_->grad.empty(); }
  std::vector<T>& grad() {
    if (s_->grad.empty()) throw ContractError("tensor: gradient buffer not allocated");
    return s_->grad;
  }
  const std::vector<T>& grad() const {
    if (s_->grad.empty()) throw ContractError("tensor: gradient buffer not allocated");
    return s_->grad;
  }
  void zero_grad() {
    std::fill(s_->grad.begin(), s_->grad.end(), T(0));
  }

  T item() const {
    if (size() != 1) {
      throw ContractError("tensor: item() requires a scalar, shape is " +
                          shape_to_string(s_->shape));
    }
    return s_->data[0];
  }

  // Deep copy; gradient buffer and flag are copied too.
  BasicTensor clone() const {
    BasicTensor t;
    *t.s_ = *s_;
    return t;
  }

  // Same storage object (not just equal contents).
  bool same_storage(const BasicTensor& other) const { return s_ == other.s_; }

  // View with a new shape over the same storage. Element count must match.
  BasicTensor reshaped(std::vector<std::size_t> shape) const {
    if (count(shape) != size()) {
      throw DimensionError("tensor: cannot reshape " + shape_to_string(s_->shape) +
                           " to " + shape_to_string(shape));
    }
    BasicTensor t;
    t.s_ = std::make_shared<Storage>(*s_);
    t.s_->shape = std::move(shape);
    return t;
  }

  static std::size_t count(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }

 private:
  struct Storage {
    std::vector<std::size_t> shape;
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> s_;

  template <typename U>
  friend class BasicTape;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

// Wengert list. Operations append their backward rule while the forward pass
// runs, so the node order is already topological: every node's inputs were
// produced by earlier nodes. backward() replays the list once, in reverse.
template <typename T>
class BasicTape {
 public:
  void record(std::function<void()> backward_fn) {
    nodes_.push_back(std::move(backward_fn));
  }

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  // Seeds d(loss)/d(loss) = 1 and accumulates gradients into every
  // requires_grad tensor reachable from the recorded nodes. Unreachable
  // tensors keep their (zero-initialized) gradients.
  void backward(BasicTensor<T>& loss) {
    if (loss.size() != 1) {
      throw ContractError("backward: loss must be scalar, shape is " +
                          shape_to_string(loss.shape()));
    }
    if (!loss.requires_grad()) {
      throw ContractError("backward: loss does not require gradients");
    }
    loss.grad()[0] += T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  }

 private:
  std::vector<std::function<void()>> nodes_;
};

using Tape = BasicTape<float>;
using TapeD = BasicTape<double>;

}  // namespace occdist
