#pragma once

#include "fogbench/tensor.hpp"

namespace fogbench {

enum class Activation { kRelu, kTanh, kLeakyRelu };

inline constexpr double kLeakySlope = 0.2;

// Layers. Shapes: images are NCHW, conv weights OIKK, dense weights FxG.

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weight, const BasicTensor<T>& bias,
                      std::size_t stride, std::size_t padding);

template <typename T>
BasicTensor<T> dense(const BasicTensor<T>& input, const BasicTensor<T>& weight, const BasicTensor<T>& bias);

template <typename T>
BasicTensor<T> activation(const BasicTensor<T>& input, Activation kind);

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) { return activation(x, Activation::kRelu); }
template <typename T>
BasicTensor<T> tanh(const BasicTensor<T>& x) { return activation(x, Activation::kTanh); }
template <typename T>
BasicTensor<T> leaky_relu(const BasicTensor<T>& x) { return activation(x, Activation::kLeakyRelu); }

/// Per-(sample, channel) standardization over H*W with population variance.
template <typename T>
BasicTensor<T> instance_norm(const BasicTensor<T>& input, double eps = 1e-5);

/// Nearest-neighbour 2x spatial upsampling of an NCHW tensor.
template <typename T>
BasicTensor<T> upsample_nearest2x(const BasicTensor<T>& input);

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& input, Shape shape);

// Elementwise arithmetic. Binary ops require identical shapes.

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& x, double factor);
template <typename T>
BasicTensor<T> add_scalar(const BasicTensor<T>& x, double value);
template <typename T>
BasicTensor<T> abs(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> square(const BasicTensor<T>& x);

// Reductions to a single-element tensor, accumulated sequentially in double.

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> mean_abs_error(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return mean(abs(sub(a, b)));
}

template <typename T>
BasicTensor<T> mse_loss(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return mean(square(sub(a, b)));
}

}  // namespace fogbench
