#include "fogbench/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>

namespace fogbench {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

template <typename T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ContractViolation(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                            shape_str(b.shape()));
  }
}

struct ConvGeometry {
  std::size_t batch, in_ch, in_h, in_w;
  std::size_t out_ch, kh, kw;
  std::size_t stride, pad;
  std::size_t out_h, out_w;
  std::size_t patch() const { return in_ch * kh * kw; }
  std::size_t pixels() const { return out_h * out_w; }
};

// Output columns [lo, hi) whose input column ox*stride + k - pad lies inside [0, in).
inline void valid_range(std::size_t k, const ConvGeometry& g, std::size_t in, std::size_t out, std::size_t& lo,
                        std::size_t& hi) {
  const auto pad = static_cast<std::ptrdiff_t>(g.pad), kk = static_cast<std::ptrdiff_t>(k);
  const auto s = static_cast<std::ptrdiff_t>(g.stride);
  std::ptrdiff_t first = pad > kk ? (pad - kk + s - 1) / s : 0;
  std::ptrdiff_t last = (static_cast<std::ptrdiff_t>(in) - 1 + pad - kk);
  last = last < 0 ? -1 : last / s;
  lo = static_cast<std::size_t>(std::min<std::ptrdiff_t>(first, static_cast<std::ptrdiff_t>(out)));
  hi = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(last + 1, static_cast<std::ptrdiff_t>(lo),
                                                           static_cast<std::ptrdiff_t>(out)));
}

// `cols` must arrive zeroed; only in-bounds taps are written.
template <typename T>
void im2col(const T* image, const ConvGeometry& g, T* cols) {
  const std::size_t pixels = g.pixels();
  for (std::size_t c = 0; c < g.in_ch; ++c) {
    for (std::size_t ky = 0; ky < g.kh; ++ky) {
      std::size_t y_lo, y_hi;
      valid_range(ky, g, g.in_h, g.out_h, y_lo, y_hi);
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        std::size_t x_lo, x_hi;
        valid_range(kx, g, g.in_w, g.out_w, x_lo, x_hi);
        if (x_lo >= x_hi) continue;
        const std::size_t n = x_hi - x_lo;
        T* row = cols + ((c * g.kh + ky) * g.kw + kx) * pixels + x_lo;
        for (std::size_t oy = y_lo; oy < y_hi; ++oy) {
          T* dst = row + oy * g.out_w;
          const T* src = image + (c * g.in_h + oy * g.stride + ky - g.pad) * g.in_w + x_lo * g.stride + kx - g.pad;
          if (g.stride == 1) {
            std::copy(src, src + n, dst);
          } else {
            for (std::size_t i = 0; i < n; ++i) dst[i] = src[i * g.stride];
          }
        }
      }
    }
  }
}

template <typename T>
inline void add_into(T* __restrict dst, const T* __restrict src, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += src[i];
}

template <typename T>
void col2im_add(const T* cols, const ConvGeometry& g, T* image_grad) {
  const std::size_t pixels = g.pixels();
  for (std::size_t c = 0; c < g.in_ch; ++c) {
    for (std::size_t ky = 0; ky < g.kh; ++ky) {
      std::size_t y_lo, y_hi;
      valid_range(ky, g, g.in_h, g.out_h, y_lo, y_hi);
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        std::size_t x_lo, x_hi;
        valid_range(kx, g, g.in_w, g.out_w, x_lo, x_hi);
        if (x_lo >= x_hi) continue;
        const std::size_t n = x_hi - x_lo;
        const T* row = cols + ((c * g.kh + ky) * g.kw + kx) * pixels + x_lo;
        for (std::size_t oy = y_lo; oy < y_hi; ++oy) {
          const T* src = row + oy * g.out_w;
          T* dst = image_grad + (c * g.in_h + oy * g.stride + ky - g.pad) * g.in_w + x_lo * g.stride + kx - g.pad;
          if (g.stride == 1) {
            add_into(dst, src, n);
          } else {
            for (std::size_t i = 0; i < n; ++i) dst[i * g.stride] += src[i];
          }
        }
      }
    }
  }
}

// Folds the kink side (x > 0) of each element into the active KinkTrace.
template <typename T>
void trace_kinks(std::span<const T> x) {
  KinkTrace* trace = KinkTrace::active();
  if (trace == nullptr) return;
  std::uint64_t word = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    word = (word << 1) | (x[i] > T(0) ? 1u : 0u);
    if (i % 64 == 63) {
      trace->fold(word);
      word = 0;
    }
  }
  trace->fold(word ^ (static_cast<std::uint64_t>(x.size()) << 32));
}

template <typename T, typename F>
BasicTensor<T> unary(const BasicTensor<T>& x, F value_and_slope) {
  const auto in = x.data();
  std::vector<T> out(in.size());
  std::vector<T> slope(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    auto [v, d] = value_and_slope(in[i]);
    out[i] = v;
    slope[i] = d;
  }
  return make_result<T>(x.shape(), std::move(out), {x}, [x, slope = std::move(slope)](std::span<const T> g) {
    std::vector<T> dx(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] = g[i] * slope[i];
    accumulate_grad<T>(x, std::move(dx));
  });
}

}  // namespace

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weight, const BasicTensor<T>& bias,
                      std::size_t stride, std::size_t padding) {
  if (input.rank() != 4) throw ContractViolation("conv2d: input must be NCHW, got " + shape_str(input.shape()));
  if (weight.rank() != 4) throw ContractViolation("conv2d: weight must be OIKK, got " + shape_str(weight.shape()));
  if (stride == 0) throw ContractViolation("conv2d: stride must be positive");
  ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), input.dim(3), weight.dim(0), weight.dim(2), weight.dim(3),
                 stride, padding, 0, 0};
  if (weight.dim(1) != g.in_ch) {
    throw ContractViolation("conv2d: input has " + std::to_string(g.in_ch) + " channels but weight " +
                            shape_str(weight.shape()) + " expects " + std::to_string(weight.dim(1)));
  }
  if (bias.numel() != g.out_ch) {
    throw ContractViolation("conv2d: bias has " + std::to_string(bias.numel()) + " entries, weight has " +
                            std::to_string(g.out_ch) + " output channels");
  }
  if (g.in_h + 2 * padding < g.kh || g.in_w + 2 * padding < g.kw) {
    throw ContractViolation("conv2d: kernel " + std::to_string(g.kh) + "x" + std::to_string(g.kw) +
                            " does not fit padded input " + std::to_string(g.in_h + 2 * padding) + "x" +
                            std::to_string(g.in_w + 2 * padding));
  }
  g.out_h = (g.in_h + 2 * padding - g.kh) / stride + 1;
  g.out_w = (g.in_w + 2 * padding - g.kw) / stride + 1;

  const std::size_t patch = g.patch();
  const std::size_t pixels = g.pixels();
  const std::size_t in_plane = g.in_ch * g.in_h * g.in_w;
  const std::size_t out_plane = g.out_ch * pixels;

  std::shared_ptr<T[]> cols(new T[g.batch * patch * pixels]());
  std::vector<T> out(g.batch * out_plane);
  ConstMatMap<T> w(weight.data().data(), g.out_ch, patch);
  const auto b = bias.data();
  for (std::size_t n = 0; n < g.batch; ++n) {
    T* col = cols.get() + n * patch * pixels;
    im2col(input.data().data() + n * in_plane, g, col);
    MatMap<T> y(out.data() + n * out_plane, g.out_ch, pixels);
    y.noalias() = w * ConstMatMap<T>(col, patch, pixels);
    for (std::size_t o = 0; o < g.out_ch; ++o) y.row(o).array() += b[o];
  }

  return make_result<T>(
      {g.batch, g.out_ch, g.out_h, g.out_w}, std::move(out), {input, weight, bias},
      [input, weight, bias, g, cols](std::span<const T> grad) {
        const std::size_t patch = g.patch();
        const std::size_t pixels = g.pixels();
        const std::size_t in_plane = g.in_ch * g.in_h * g.in_w;
        const std::size_t out_plane = g.out_ch * pixels;
        RowMat<T> dw = RowMat<T>::Zero(g.out_ch, patch);
        std::vector<T> db(g.out_ch, T(0));
        std::vector<T> dx;
        if (input.requires_grad()) dx.assign(g.batch * in_plane, T(0));
        ConstMatMap<T> w(weight.data().data(), g.out_ch, patch);
        RowMat<T> dcol(patch, pixels);
        for (std::size_t n = 0; n < g.batch; ++n) {
          ConstMatMap<T> dy(grad.data() + n * out_plane, g.out_ch, pixels);
          ConstMatMap<T> col(cols.get() + n * patch * pixels, patch, pixels);
          if (weight.requires_grad()) dw.noalias() += dy * col.transpose();
          if (bias.requires_grad()) {
            for (std::size_t o = 0; o < g.out_ch; ++o) {
              double acc = 0;
              for (std::size_t p = 0; p < pixels; ++p) acc += dy(o, p);
              db[o] += static_cast<T>(acc);
            }
          }
          if (input.requires_grad()) {
            dcol.noalias() = w.transpose() * dy;
            col2im_add(dcol.data(), g, dx.data() + n * in_plane);
          }
        }
        if (weight.requires_grad()) accumulate_grad<T>(weight, std::span<const T>(dw.data(), dw.size()));
        if (bias.requires_grad()) accumulate_grad<T>(bias, std::move(db));
        if (input.requires_grad()) accumulate_grad<T>(input, std::move(dx));
      });
}

template <typename T>
BasicTensor<T> dense(const BasicTensor<T>& input, const BasicTensor<T>& weight, const BasicTensor<T>& bias) {
  if (input.rank() != 2 || weight.rank() != 2) {
    throw ContractViolation("dense: expected 2-D input and weight, got " + shape_str(input.shape()) + " and " +
                            shape_str(weight.shape()));
  }
  const std::size_t rows = input.dim(0), in_f = input.dim(1), out_f = weight.dim(1);
  if (weight.dim(0) != in_f) {
    throw ContractViolation("dense: input features " + std::to_string(in_f) + " do not match weight " +
                            shape_str(weight.shape()));
  }
  if (bias.numel() != out_f) {
    throw ContractViolation("dense: bias has " + std::to_string(bias.numel()) + " entries, expected " +
                            std::to_string(out_f));
  }
  std::vector<T> out(rows * out_f);
  MatMap<T> y(out.data(), rows, out_f);
  y.noalias() = ConstMatMap<T>(input.data().data(), rows, in_f) * ConstMatMap<T>(weight.data().data(), in_f, out_f);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < out_f; ++c) y(r, c) += bias.data()[c];
  }
  return make_result<T>({rows, out_f}, std::move(out), {input, weight, bias},
                        [input, weight, bias, rows, in_f, out_f](std::span<const T> grad) {
                          ConstMatMap<T> dy(grad.data(), rows, out_f);
                          if (input.requires_grad()) {
                            RowMat<T> dx = dy * ConstMatMap<T>(weight.data().data(), in_f, out_f).transpose();
                            accumulate_grad<T>(input, std::span<const T>(dx.data(), dx.size()));
                          }
                          if (weight.requires_grad()) {
                            RowMat<T> dw = ConstMatMap<T>(input.data().data(), rows, in_f).transpose() * dy;
                            accumulate_grad<T>(weight, std::span<const T>(dw.data(), dw.size()));
                          }
                          if (bias.requires_grad()) {
                            std::vector<T> db(out_f);
                            for (std::size_t c = 0; c < out_f; ++c) {
                              double acc = 0;
                              for (std::size_t r = 0; r < rows; ++r) acc += dy(r, c);
                              db[c] = static_cast<T>(acc);
                            }
                            accumulate_grad<T>(bias, std::move(db));
                          }
                        });
}

template <typename T>
BasicTensor<T> activation(const BasicTensor<T>& input, Activation kind) {
  if (kind != Activation::kTanh) trace_kinks(input.data());
  switch (kind) {
    case Activation::kRelu:
      return unary(input, [](T v) { return std::pair<T, T>{v > T(0) ? v : T(0), v > T(0) ? T(1) : T(0)}; });
    case Activation::kLeakyRelu: {
      const T slope = static_cast<T>(kLeakySlope);
      return unary(input, [slope](T v) { return std::pair<T, T>{v > T(0) ? v : v * slope, v > T(0) ? T(1) : slope}; });
    }
    case Activation::kTanh:
      return unary(input, [](T v) {
        const T y = std::tanh(v);
        return std::pair<T, T>{y, T(1) - y * y};
      });
  }
  throw ContractViolation("activation: unknown kind");
}

template <typename T>
BasicTensor<T> instance_norm(const BasicTensor<T>& input, double eps) {
  if (input.rank() != 4) throw ContractViolation("instance_norm: input must be NCHW, got " + shape_str(input.shape()));
  const std::size_t planes = input.dim(0) * input.dim(1);
  const std::size_t area = input.dim(2) * input.dim(3);
  if (area < 2) throw ContractViolation("instance_norm: needs H*W >= 2, got " + shape_str(input.shape()));
  const auto x = input.data();
  std::vector<T> out(x.size());
  std::vector<T> inv_std(planes);
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = x.data() + p * area;
    double mu = 0;
    for (std::size_t i = 0; i < area; ++i) mu += src[i];
    mu /= static_cast<double>(area);
    double var = 0;
    for (std::size_t i = 0; i < area; ++i) var += (src[i] - mu) * (src[i] - mu);
    var /= static_cast<double>(area);
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[p] = static_cast<T>(inv);
    for (std::size_t i = 0; i < area; ++i) out[p * area + i] = static_cast<T>((src[i] - mu) * inv);
  }
  std::vector<T> normalized = out;
  return make_result<T>(input.shape(), std::move(out), {input},
                        [input, planes, area, inv_std = std::move(inv_std),
                         xhat = std::move(normalized)](std::span<const T> grad) {
                          std::vector<T> dx(grad.size());
                          for (std::size_t p = 0; p < planes; ++p) {
                            const T* g = grad.data() + p * area;
                            const T* h = xhat.data() + p * area;
                            double mean_g = 0, mean_gh = 0;
                            for (std::size_t i = 0; i < area; ++i) {
                              mean_g += g[i];
                              mean_gh += static_cast<double>(g[i]) * h[i];
                            }
                            mean_g /= static_cast<double>(area);
                            mean_gh /= static_cast<double>(area);
                            for (std::size_t i = 0; i < area; ++i) {
                              dx[p * area + i] = static_cast<T>(inv_std[p] * (g[i] - mean_g - h[i] * mean_gh));
                            }
                          }
                          accumulate_grad<T>(input, std::move(dx));
                        });
}

template <typename T>
BasicTensor<T> upsample_nearest2x(const BasicTensor<T>& input) {
  if (input.rank() != 4) throw ContractViolation("upsample: input must be NCHW, got " + shape_str(input.shape()));
  const std::size_t planes = input.dim(0) * input.dim(1), h = input.dim(2), w = input.dim(3);
  const auto x = input.data();
  std::vector<T> out(planes * 4 * h * w);
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t y = 0; y < 2 * h; ++y) {
      for (std::size_t c = 0; c < 2 * w; ++c) out[(p * 2 * h + y) * 2 * w + c] = x[(p * h + y / 2) * w + c / 2];
    }
  }
  return make_result<T>({input.dim(0), input.dim(1), 2 * h, 2 * w}, std::move(out), {input},
                        [input, planes, h, w](std::span<const T> grad) {
                          std::vector<T> dx(planes * h * w, T(0));
                          for (std::size_t p = 0; p < planes; ++p) {
                            for (std::size_t y = 0; y < 2 * h; ++y) {
                              for (std::size_t c = 0; c < 2 * w; ++c) {
                                dx[(p * h + y / 2) * w + c / 2] += grad[(p * 2 * h + y) * 2 * w + c];
                              }
                            }
                          }
                          accumulate_grad<T>(input, std::move(dx));
                        });
}

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& input, Shape shape) {
  if (shape_numel(shape) != input.numel()) {
    throw ContractViolation("reshape: cannot view " + shape_str(input.shape()) + " as " + shape_str(shape));
  }
  std::vector<T> out(input.data().begin(), input.data().end());
  return make_result<T>(std::move(shape), std::move(out), {input},
                        [input](std::span<const T> grad) { accumulate_grad<T>(input, grad); });
}

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "add");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return make_result<T>(a.shape(), std::move(out), {a, b}, [a, b](std::span<const T> grad) {
    accumulate_grad<T>(a, grad);
    accumulate_grad<T>(b, grad);
  });
}

template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "sub");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return make_result<T>(a.shape(), std::move(out), {a, b}, [a, b](std::span<const T> grad) {
    accumulate_grad<T>(a, grad);
    if (b.requires_grad()) {
      std::vector<T> neg(grad.size());
      for (std::size_t i = 0; i < grad.size(); ++i) neg[i] = -grad[i];
      accumulate_grad<T>(b, std::move(neg));
    }
  });
}

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "mul");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return make_result<T>(a.shape(), std::move(out), {a, b}, [a, b](std::span<const T> grad) {
    std::vector<T> d(grad.size());
    if (a.requires_grad()) {
      for (std::size_t i = 0; i < grad.size(); ++i) d[i] = grad[i] * b.data()[i];
      accumulate_grad<T>(a, d);
    }
    if (b.requires_grad()) {
      for (std::size_t i = 0; i < grad.size(); ++i) d[i] = grad[i] * a.data()[i];
      accumulate_grad<T>(b, d);
    }
  });
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& x, double factor) {
  const T f = static_cast<T>(factor);
  std::vector<T> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * f;
  return make_result<T>(x.shape(), std::move(out), {x}, [x, f](std::span<const T> grad) {
    std::vector<T> d(grad.size());
    for (std::size_t i = 0; i < grad.size(); ++i) d[i] = grad[i] * f;
    accumulate_grad<T>(x, std::move(d));
  });
}

template <typename T>
BasicTensor<T> add_scalar(const BasicTensor<T>& x, double value) {
  const T v = static_cast<T>(value);
  std::vector<T> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] + v;
  return make_result<T>(x.shape(), std::move(out), {x},
                        [x](std::span<const T> grad) { accumulate_grad<T>(x, grad); });
}

template <typename T>
BasicTensor<T> abs(const BasicTensor<T>& x) {
  // Subgradient 0 at the origin.
  trace_kinks(x.data());
  return unary(x, [](T v) { return std::pair<T, T>{std::abs(v), v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0))}; });
}

template <typename T>
BasicTensor<T> square(const BasicTensor<T>& x) {
  return unary(x, [](T v) { return std::pair<T, T>{v * v, T(2) * v}; });
}

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x) {
  double acc = 0;
  for (T v : x.data()) acc += v;
  return make_result<T>({1}, {static_cast<T>(acc)}, {x}, [x](std::span<const T> grad) {
    std::vector<T> d(x.numel(), grad[0]);
    accumulate_grad<T>(x, std::move(d));
  });
}

template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& x) {
  double acc = 0;
  for (T v : x.data()) acc += v;
  const double n = static_cast<double>(x.numel());
  return make_result<T>({1}, {static_cast<T>(acc / n)}, {x}, [x, n](std::span<const T> grad) {
    std::vector<T> d(x.numel(), static_cast<T>(grad[0] / n));
    accumulate_grad<T>(x, std::move(d));
  });
}

#define FOGBENCH_INSTANTIATE_OPS(T)                                                                            \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,          \
                                 std::size_t, std::size_t);                                                    \
  template BasicTensor<T> dense(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&);          \
  template BasicTensor<T> activation(const BasicTensor<T>&, Activation);                                       \
  template BasicTensor<T> instance_norm(const BasicTensor<T>&, double);                                        \
  template BasicTensor<T> upsample_nearest2x(const BasicTensor<T>&);                                           \
  template BasicTensor<T> reshape(const BasicTensor<T>&, Shape);                                               \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                                   \
  template BasicTensor<T> sub(const BasicTensor<T>&, const BasicTensor<T>&);                                   \
  template BasicTensor<T> mul(const BasicTensor<T>&, const BasicTensor<T>&);                                   \
  template BasicTensor<T> scale(const BasicTensor<T>&, double);                                                \
  template BasicTensor<T> add_scalar(const BasicTensor<T>&, double);                                           \
  template BasicTensor<T> abs(const BasicTensor<T>&);                                                          \
  template BasicTensor<T> square(const BasicTensor<T>&);                                                       \
  template BasicTensor<T> sum(const BasicTensor<T>&);                                                          \
  template BasicTensor<T> mean(const BasicTensor<T>&);

FOGBENCH_INSTANTIATE_OPS(float)
FOGBENCH_INSTANTIATE_OPS(double)

#undef FOGBENCH_INSTANTIATE_OPS

}  // namespace fogbench
