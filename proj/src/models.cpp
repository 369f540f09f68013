#include "fogbench/models.hpp"

#include <numbers>
#include <random>

namespace fogbench {

namespace {

constexpr double kInitStd = 0.02;

bool is_weight(const std::string& name) { return name.size() > 7 && name.ends_with(".weight"); }

Shape conv_shape(int out, int in) {
  return {static_cast<std::size_t>(out), static_cast<std::size_t>(in), 3, 3};
}
Shape vec_shape(int n) { return {static_cast<std::size_t>(n)}; }

void add_conv(std::vector<ParamSpec>& layout, const std::string& name, int out, int in) {
  layout.push_back({name + ".weight", conv_shape(out, in)});
  layout.push_back({name + ".bias", vec_shape(out)});
}

template <typename T>
void check_image_batch(const BasicTensor<T>& batch, int size, const char* model) {
  if (batch.rank() != 4) {
    throw ContractViolation(std::string(model) + ": expected N x 3 x H x W, got " + shape_str(batch.shape()));
  }
  if (batch.dim(1) != 3) {
    throw ContractViolation(std::string(model) + ": expected 3 channels, got " + std::to_string(batch.dim(1)));
  }
  if (batch.dim(2) != static_cast<std::size_t>(size) || batch.dim(3) != static_cast<std::size_t>(size)) {
    throw ContractViolation(std::string(model) + ": built for " + std::to_string(size) + "x" + std::to_string(size) +
                            " images, got " + shape_str(batch.shape()));
  }
}

template <typename T>
BasicTensor<T> conv(const ParameterSet<T>& p, std::size_t& i, const BasicTensor<T>& x, std::size_t stride) {
  auto out = conv2d(x, p[i], p[i + 1], stride, 1);
  i += 2;
  return out;
}

}  // namespace

template <typename T>
ParameterSet<T>::ParameterSet(const std::vector<ParamSpec>& layout, std::uint64_t init_seed) {
  std::mt19937_64 rng(init_seed);
  std::normal_distribution<double> normal(0.0, kInitStd);
  for (const auto& spec : layout) {
    std::vector<T> values(shape_numel(spec.shape), T(0));
    if (is_weight(spec.name)) {
      for (auto& v : values) v = static_cast<T>(normal(rng));
    }
    names_.push_back(spec.name);
    tensors_.emplace_back(spec.shape, std::move(values));
  }
}

template <typename T>
ParameterSet<T>::ParameterSet(const std::vector<ParamSpec>& layout, std::vector<BasicTensor<T>> tensors) {
  if (layout.size() != tensors.size()) {
    throw ContractViolation("parameter count " + std::to_string(tensors.size()) + " does not match layout size " +
                            std::to_string(layout.size()));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (tensors[i].shape() != layout[i].shape) {
      throw ContractViolation("parameter " + layout[i].name + " has shape " + shape_str(tensors[i].shape()) +
                              ", expected " + shape_str(layout[i].shape));
    }
    names_.push_back(layout[i].name);
  }
  tensors_ = std::move(tensors);
}

template <typename T>
std::size_t ParameterSet<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.numel();
  return n;
}

template <typename T>
void ParameterSet<T>::set_requires_grad(bool on) {
  for (auto& t : tensors_) t.set_requires_grad(on);
}

template <typename T>
ParameterSet<T> ParameterSet<T>::clone() const {
  ParameterSet out;
  out.names_ = names_;
  for (const auto& t : tensors_) out.tensors_.push_back(t.clone());
  return out;
}

// ---------------------------------------------------------------------------
// Steering predictor

template <typename T>
std::vector<ParamSpec> SteeringPredictorT<T>::layout(const Config& config) {
  if (config.image_size < 16 || config.image_size % 16 != 0) {
    throw ContractViolation("steering predictor: image size must be a positive multiple of 16, got " +
                            std::to_string(config.image_size));
  }
  std::vector<ParamSpec> layout;
  add_conv(layout, "conv1", 16, 3);
  add_conv(layout, "conv2", 32, 16);
  add_conv(layout, "conv3", 64, 32);
  add_conv(layout, "conv4", 64, 64);
  const auto side = static_cast<std::size_t>(config.image_size / 16);
  layout.push_back({"fc1.weight", {64 * side * side, 64}});
  layout.push_back({"fc1.bias", {64}});
  layout.push_back({"fc2.weight", {64, 1}});
  layout.push_back({"fc2.bias", {1}});
  return layout;
}

template <typename T>
SteeringPredictorT<T>::SteeringPredictorT(Config config, std::uint64_t init_seed)
    : config_(config), params_(layout(config), init_seed) {}

template <typename T>
SteeringPredictorT<T>::SteeringPredictorT(Config config, ParameterSet<T> params)
    : config_(config), params_(layout(config), std::move(params.tensors())) {}

template <typename T>
BasicTensor<T> SteeringPredictorT<T>::forward(const BasicTensor<T>& batch) const {
  check_image_batch(batch, config_.image_size, "steering predictor");
  std::size_t i = 0;
  auto h = batch;
  for (int layer = 0; layer < 4; ++layer) h = relu(conv(params_, i, h, 2));
  h = reshape(h, {batch.dim(0), h.numel() / batch.dim(0)});
  h = relu(dense(h, params_[i], params_[i + 1]));
  auto z = dense(h, params_[i + 2], params_[i + 3]);
  return scale(tanh(z), std::numbers::pi);
}

template <typename T>
std::string SteeringPredictorT<T>::tag() const {
  return std::string(kArchitecture) + " image=" + std::to_string(config_.image_size);
}

// ---------------------------------------------------------------------------
// Translation generator

template <typename T>
std::vector<ParamSpec> TranslationGeneratorT<T>::layout(const Config& config) {
  if (config.image_size < 8 || config.image_size % 4 != 0) {
    throw ContractViolation("generator: image size must be a multiple of 4 and >= 8, got " +
                            std::to_string(config.image_size));
  }
  if (config.base_channels < 1 || config.residual_blocks < 0) {
    throw ContractViolation("generator: base_channels must be >= 1 and residual_blocks >= 0");
  }
  const int c = config.base_channels;
  std::vector<ParamSpec> layout;
  add_conv(layout, "enc1", c, 3);
  add_conv(layout, "enc2", 2 * c, c);
  for (int b = 0; b < config.residual_blocks; ++b) {
    add_conv(layout, "res" + std::to_string(b) + ".conv1", 2 * c, 2 * c);
    add_conv(layout, "res" + std::to_string(b) + ".conv2", 2 * c, 2 * c);
  }
  add_conv(layout, "dec1", c, 2 * c);
  add_conv(layout, "dec2", 3, c);
  return layout;
}

template <typename T>
TranslationGeneratorT<T>::TranslationGeneratorT(Config config, std::uint64_t init_seed)
    : config_(config), params_(layout(config), init_seed) {}

template <typename T>
TranslationGeneratorT<T>::TranslationGeneratorT(Config config, ParameterSet<T> params)
    : config_(config), params_(layout(config), std::move(params.tensors())) {}

template <typename T>
BasicTensor<T> TranslationGeneratorT<T>::forward(const BasicTensor<T>& batch) const {
  check_image_batch(batch, config_.image_size, "generator");
  std::size_t i = 0;
  auto h = relu(instance_norm(conv(params_, i, batch, 2)));
  h = relu(instance_norm(conv(params_, i, h, 2)));
  for (int b = 0; b < config_.residual_blocks; ++b) {
    auto r = relu(instance_norm(conv(params_, i, h, 1)));
    r = instance_norm(conv(params_, i, r, 1));
    h = add(h, r);
  }
  h = relu(instance_norm(conv(params_, i, upsample_nearest2x(h), 1)));
  return tanh(conv(params_, i, upsample_nearest2x(h), 1));
}

template <typename T>
std::string TranslationGeneratorT<T>::tag() const {
  return std::string(kArchitecture) + " image=" + std::to_string(config_.image_size) +
         " base=" + std::to_string(config_.base_channels) + " blocks=" + std::to_string(config_.residual_blocks);
}

// ---------------------------------------------------------------------------
// Patch discriminator

template <typename T>
std::vector<ParamSpec> PatchDiscriminatorT<T>::layout(const Config& config) {
  if (config.image_size < kReceptiveField) {
    throw ContractViolation("discriminator: image size " + std::to_string(config.image_size) +
                            " is smaller than the receptive field " + std::to_string(kReceptiveField));
  }
  const int c = config.base_channels;
  std::vector<ParamSpec> layout;
  add_conv(layout, "conv1", c, 3);
  add_conv(layout, "conv2", 2 * c, c);
  add_conv(layout, "conv3", 1, 2 * c);
  return layout;
}

template <typename T>
PatchDiscriminatorT<T>::PatchDiscriminatorT(Config config, std::uint64_t init_seed)
    : config_(config), params_(layout(config), init_seed) {}

template <typename T>
PatchDiscriminatorT<T>::PatchDiscriminatorT(Config config, ParameterSet<T> params)
    : config_(config), params_(layout(config), std::move(params.tensors())) {}

template <typename T>
BasicTensor<T> PatchDiscriminatorT<T>::forward(const BasicTensor<T>& batch) const {
  if (batch.rank() == 4 && (batch.dim(2) < static_cast<std::size_t>(kReceptiveField) ||
                            batch.dim(3) < static_cast<std::size_t>(kReceptiveField))) {
    throw ContractViolation("discriminator: input " + shape_str(batch.shape()) + " is smaller than the receptive field " +
                            std::to_string(kReceptiveField));
  }
  check_image_batch(batch, config_.image_size, "discriminator");
  std::size_t i = 0;
  auto h = leaky_relu(conv(params_, i, batch, 2));
  h = leaky_relu(conv(params_, i, h, 2));
  return conv(params_, i, h, 2);
}

template <typename T>
std::string PatchDiscriminatorT<T>::tag() const {
  return std::string(kArchitecture) + " image=" + std::to_string(config_.image_size) +
         " base=" + std::to_string(config_.base_channels);
}

template class ParameterSet<float>;
template class ParameterSet<double>;
template class SteeringPredictorT<float>;
template class SteeringPredictorT<double>;
template class TranslationGeneratorT<float>;
template class TranslationGeneratorT<double>;
template class PatchDiscriminatorT<float>;
template class PatchDiscriminatorT<double>;

// ---------------------------------------------------------------------------
// Checkpoint conversion

namespace {

template <typename Model>
ModelCheckpoint checkpoint_of(const Model& model) {
  ModelCheckpoint ckpt{model.tag(), {}};
  const auto& p = model.params();
  for (std::size_t i = 0; i < p.size(); ++i) ckpt.tensors.emplace_back(p.names()[i], p[i].detach());
  return ckpt;
}

void expect_architecture(const ModelCheckpoint& ckpt, const char* arch) {
  const auto found = tag_architecture(ckpt.tag);
  if (found != arch) {
    throw CheckpointError("architecture tag mismatch: checkpoint holds '" + found + "', expected '" + arch + "'");
  }
}

ParameterSet<float> params_from(const ModelCheckpoint& ckpt, const std::vector<ParamSpec>& layout) {
  if (ckpt.tensors.size() != layout.size()) {
    throw CheckpointError("checkpoint has " + std::to_string(ckpt.tensors.size()) + " tensors, architecture needs " +
                          std::to_string(layout.size()));
  }
  std::vector<Tensor> tensors;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& [name, t] = ckpt.tensors[i];
    if (name != layout[i].name) throw CheckpointError("tensor " + std::to_string(i) + " is '" + name + "', expected '" +
                                                      layout[i].name + "'");
    if (t.shape() != layout[i].shape) {
      throw CheckpointError("tensor " + name + " has shape " + shape_str(t.shape()) + ", expected " +
                            shape_str(layout[i].shape));
    }
    tensors.push_back(t.detach());
  }
  return ParameterSet<float>(layout, std::move(tensors));
}

template <typename F>
auto rethrow_as_checkpoint_error(F&& f) {
  try {
    return f();
  } catch (const ContractViolation& e) {
    throw CheckpointError(std::string("invalid architecture in tag: ") + e.what());
  }
}

}  // namespace

ModelCheckpoint to_checkpoint(const SteeringPredictor& model) { return checkpoint_of(model); }
ModelCheckpoint to_checkpoint(const TranslationGenerator& model) { return checkpoint_of(model); }
ModelCheckpoint to_checkpoint(const PatchDiscriminator& model) { return checkpoint_of(model); }

SteeringPredictor predictor_from_checkpoint(const ModelCheckpoint& ckpt) {
  expect_architecture(ckpt, SteeringPredictor::kArchitecture);
  SteeringPredictor::Config cfg{tag_int(ckpt.tag, "image")};
  const auto layout = rethrow_as_checkpoint_error([&] { return SteeringPredictor::layout(cfg); });
  return SteeringPredictor(cfg, params_from(ckpt, layout));
}

TranslationGenerator generator_from_checkpoint(const ModelCheckpoint& ckpt) {
  expect_architecture(ckpt, TranslationGenerator::kArchitecture);
  TranslationGenerator::Config cfg{tag_int(ckpt.tag, "image"), tag_int(ckpt.tag, "base"), tag_int(ckpt.tag, "blocks")};
  const auto layout = rethrow_as_checkpoint_error([&] { return TranslationGenerator::layout(cfg); });
  return TranslationGenerator(cfg, params_from(ckpt, layout));
}

PatchDiscriminator discriminator_from_checkpoint(const ModelCheckpoint& ckpt) {
  expect_architecture(ckpt, PatchDiscriminator::kArchitecture);
  PatchDiscriminator::Config cfg{tag_int(ckpt.tag, "image"), tag_int(ckpt.tag, "base")};
  const auto layout = rethrow_as_checkpoint_error([&] { return PatchDiscriminator::layout(cfg); });
  return PatchDiscriminator(cfg, params_from(ckpt, layout));
}

}  // namespace fogbench
