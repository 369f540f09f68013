#include "fogbench/tensor.hpp"

#include <algorithm>
#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace fogbench {

namespace {
thread_local bool g_grad_enabled = true;

#if defined(__GLIBC__)
// Activation buffers of a few hundred KB are allocated and freed every op. Above
// the default mmap threshold each is a fresh mapping that page-faults on touch.
const bool g_allocator_tuned = [] {
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
  return true;
}();
#endif
}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

bool grad_mode_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

namespace {
thread_local KinkTrace* g_kink_trace = nullptr;
}

KinkTrace::KinkTrace() : previous_(g_kink_trace) { g_kink_trace = this; }
KinkTrace::~KinkTrace() { g_kink_trace = previous_; }
KinkTrace* KinkTrace::active() { return g_kink_trace; }

void KinkTrace::fold(std::uint64_t word) {
  hash_ ^= word;
  hash_ *= 0x100000001b3ULL;
  hash_ ^= hash_ >> 29;
}

template <typename T>
BasicTensor<T>::BasicTensor() : node_(std::make_shared<TensorNode<T>>()) {
  node_->shape = {1};
  node_->data = {T(0)};
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data, bool requires_grad)
    : node_(std::make_shared<TensorNode<T>>()) {
  if (shape.empty()) throw ContractViolation("tensor shape must have at least one dimension");
  for (auto d : shape) {
    if (d == 0) throw ContractViolation("tensor dimensions must be positive, got " + shape_str(shape));
  }
  if (shape_numel(shape) != data.size()) {
    throw ContractViolation("tensor shape " + shape_str(shape) + " holds " +
                            std::to_string(shape_numel(shape)) + " values but buffer has " +
                            std::to_string(data.size()));
  }
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::zeros(Shape shape) {
  return full(std::move(shape), T(0));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::full(Shape shape, T value) {
  const auto n = shape_numel(shape);
  return BasicTensor(std::move(shape), std::vector<T>(n, value));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::scalar(T value) {
  return BasicTensor({1}, {value});
}

template <typename T>
std::size_t BasicTensor<T>::dim(std::size_t i) const {
  if (i >= rank()) {
    throw ContractViolation("dimension index " + std::to_string(i) + " out of range for shape " +
                            shape_str(shape()));
  }
  return node_->shape[i];
}

template <typename T>
T BasicTensor<T>::item() const {
  if (numel() != 1) throw ContractViolation("item() needs a single-element tensor, got " + shape_str(shape()));
  return node_->data[0];
}

template <typename T>
BasicTensor<T>& BasicTensor<T>::set_requires_grad(bool on) {
  node_->requires_grad = on;
  if (!on) node_->grad.clear();
  return *this;
}

template <typename T>
std::span<T> BasicTensor<T>::mutable_grad() {
  if (node_->grad.empty()) node_->grad.assign(node_->data.size(), T(0));
  return node_->grad;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::detach() const {
  return BasicTensor(shape(), node_->data);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::clone() const {
  BasicTensor out(shape(), node_->data, node_->requires_grad);
  out.node_->grad = node_->grad;
  return out;
}

template <typename T>
Tape<T>& Tape<T>::current() {
  thread_local Tape tape;
  return tape;
}

template <typename T>
bool Tape<T>::recording() {
  return g_grad_enabled;
}

template <typename T>
void Tape<T>::backward(const BasicTensor<T>& loss) {
  if (loss.numel() != 1) {
    throw ContractViolation("backward needs a scalar loss, got shape " + shape_str(loss.shape()));
  }
  if (rules_.empty()) {
    throw ContractViolation("backward called on an empty tape; loss does not depend on any tracked tensor");
  }
  auto& node = *loss.node();
  node.grad.assign(1, T(1));
  // Rules may not be re-entered while replaying; move them out first.
  std::vector<Rule> rules;
  rules.swap(rules_);
  for (auto it = rules.rbegin(); it != rules.rend(); ++it) (*it)();
}

template <typename T>
void accumulate_grad(const BasicTensor<T>& target, std::span<const T> delta) {
  auto& node = *target.node();
  if (!node.requires_grad) return;
  if (node.grad.empty()) node.grad.assign(node.data.size(), T(0));
  for (std::size_t i = 0; i < delta.size(); ++i) node.grad[i] += delta[i];
}

template <typename T>
void accumulate_grad(const BasicTensor<T>& target, std::vector<T>&& delta) {
  auto& node = *target.node();
  if (!node.requires_grad) return;
  if (node.grad.empty() && delta.size() == node.data.size()) {
    node.grad = std::move(delta);
    return;
  }
  accumulate_grad<T>(target, std::span<const T>(delta));
}

template <typename T>
BasicTensor<T> make_result(Shape shape, std::vector<T> values,
                           std::initializer_list<BasicTensor<T>> inputs,
                           std::function<void(std::span<const T> out_grad)> rule) {
  bool track = false;
  if (Tape<T>::recording()) {
    track = std::any_of(inputs.begin(), inputs.end(), [](const auto& t) { return t.requires_grad(); });
  }
  BasicTensor<T> out(std::move(shape), std::move(values), track);
  if (track) {
    std::weak_ptr<TensorNode<T>> weak = out.node();
    Tape<T>::current().record([weak, rule = std::move(rule)]() {
      auto node = weak.lock();
      if (!node || node->grad.empty()) return;
      rule(node->grad);
    });
  }
  return out;
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template class Tape<float>;
template class Tape<double>;
template void accumulate_grad<float>(const BasicTensor<float>&, std::span<const float>);
template void accumulate_grad<double>(const BasicTensor<double>&, std::span<const double>);
template void accumulate_grad<float>(const BasicTensor<float>&, std::vector<float>&&);
template void accumulate_grad<double>(const BasicTensor<double>&, std::vector<double>&&);
template BasicTensor<float> make_result<float>(Shape, std::vector<float>, std::initializer_list<BasicTensor<float>>,
                                               std::function<void(std::span<const float>)>);
template BasicTensor<double> make_result<double>(Shape, std::vector<double>,
                                                 std::initializer_list<BasicTensor<double>>,
                                                 std::function<void(std::span<const double>)>);

}  // namespace fogbench
