#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fogbench {

/// Raised when a caller breaks an operation's precondition (shapes, ranges).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until a gradient is accumulated
  bool requires_grad = false;
};

/// Shared handle to a dense row-major buffer with an optional gradient.
///
/// Copies of a tensor alias the same node; use clone() for a deep copy.
/// Operations that consume a tensor with requires_grad() record a backward
/// rule on the thread's Tape so gradients can be replayed later.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor();
  BasicTensor(Shape shape, std::vector<T> data, bool requires_grad = false);

  static BasicTensor zeros(Shape shape);
  static BasicTensor full(Shape shape, T value);
  static BasicTensor scalar(T value);

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const;
  std::size_t numel() const { return node_->data.size(); }

  std::span<const T> data() const { return node_->data; }
  std::span<T> mutable_data() { return node_->data; }
  T item() const;
  T at(std::size_t flat_index) const { return node_->data.at(flat_index); }

  bool requires_grad() const { return node_->requires_grad; }
  BasicTensor& set_requires_grad(bool on);

  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad();  // allocates a zero buffer on first use
  void zero_grad() { node_->grad.clear(); }

  /// Same values, no gradient tracking, distinct node.
  BasicTensor detach() const;
  BasicTensor clone() const;

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<U>(node_->data[i]);
    return BasicTensor<U>(shape(), std::move(out));
  }

  bool aliases(const BasicTensor& other) const { return node_ == other.node_; }

  const std::shared_ptr<TensorNode<T>>& node() const { return node_; }

 private:
  std::shared_ptr<TensorNode<T>> node_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

/// Ordered record of backward rules for one thread of execution.
template <typename T>
class Tape {
 public:
  using Rule = std::function<void()>;

  static Tape& current();

  void record(Rule rule) { rules_.push_back(std::move(rule)); }
  std::size_t size() const { return rules_.size(); }
  void clear() { rules_.clear(); }

  /// Seeds d(loss)/d(loss) = 1, replays rules newest-first, then clears.
  void backward(const BasicTensor<T>& loss);

  /// Whether new operations should be recorded on this thread.
  static bool recording();

 private:
  std::vector<Rule> rules_;
};

template <typename T>
void backward(const BasicTensor<T>& loss) {
  Tape<T>::current().backward(loss);
}

/// Disables tape recording on this thread for its lifetime.
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

/// While alive, piecewise-linear ops (relu, leaky relu, abs) hash which side
/// of their kink every input element falls on. Two evaluations with equal
/// signatures lie on the same linear piece.
class KinkTrace {
 public:
  KinkTrace();
  ~KinkTrace();
  KinkTrace(const KinkTrace&) = delete;
  KinkTrace& operator=(const KinkTrace&) = delete;

  std::uint64_t signature() const { return hash_; }
  void fold(std::uint64_t word);

  /// Innermost live trace on this thread, or nullptr.
  static KinkTrace* active();

 private:
  KinkTrace* previous_;
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

/// Builds an op output and registers its backward rule when any input
/// tracks gradients. The rule receives the output gradient buffer.
///
/// This is the extension point every built-in op goes through; tests use it
/// to inject deliberately wrong rules.
template <typename T>
BasicTensor<T> make_result(Shape shape, std::vector<T> values,
                           std::initializer_list<BasicTensor<T>> inputs,
                           std::function<void(std::span<const T> out_grad)> rule);

template <typename T>
void accumulate_grad(const BasicTensor<T>& target, std::span<const T> delta);
/// Moves `delta` in as the gradient when none exists yet.
template <typename T>
void accumulate_grad(const BasicTensor<T>& target, std::vector<T>&& delta);

}  // namespace fogbench
