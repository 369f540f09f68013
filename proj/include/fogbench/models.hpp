#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fogbench/checkpoint.hpp"
#include "fogbench/ops.hpp"

namespace fogbench {

struct ParamSpec {
  std::string name;
  Shape shape;
};

/// Ordered, named parameter tensors shared by all three networks.
template <typename T>
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const std::vector<ParamSpec>& layout, std::uint64_t init_seed);
  ParameterSet(const std::vector<ParamSpec>& layout, std::vector<BasicTensor<T>> tensors);

  const std::vector<std::string>& names() const { return names_; }
  const std::vector<BasicTensor<T>>& tensors() const { return tensors_; }
  std::vector<BasicTensor<T>>& tensors() { return tensors_; }
  const BasicTensor<T>& operator[](std::size_t i) const { return tensors_[i]; }
  std::size_t size() const { return tensors_.size(); }
  std::size_t scalar_count() const;

  void set_requires_grad(bool on);
  /// Deep copy with independent buffers.
  ParameterSet clone() const;
  template <typename U>
  ParameterSet<U> cast() const;

 private:
  template <typename>
  friend class ParameterSet;
  std::vector<std::string> names_;
  std::vector<BasicTensor<T>> tensors_;
};

template <typename T>
template <typename U>
ParameterSet<U> ParameterSet<T>::cast() const {
  ParameterSet<U> out;
  out.names_ = names_;
  for (const auto& t : tensors_) out.tensors_.push_back(t.template cast<U>());
  return out;
}

/// Steering-angle regressor: four stride-2 3x3 convs (16, 32, 64, 64 channels,
/// ReLU), a 64-unit hidden dense layer, and a pi*tanh head bounding the
/// output to (-pi, pi).
template <typename T>
class SteeringPredictorT {
 public:
  static constexpr const char* kArchitecture = "steering_predictor";
  struct Config {
    int image_size = 64;
  };

  SteeringPredictorT(Config config, std::uint64_t init_seed);
  SteeringPredictorT(Config config, ParameterSet<T> params);

  static std::vector<ParamSpec> layout(const Config& config);

  /// N x 3 x S x S in [-1, 1] -> N x 1 angles in radians.
  BasicTensor<T> forward(const BasicTensor<T>& batch) const;

  const Config& config() const { return config_; }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }
  std::string tag() const;

  SteeringPredictorT clone() const { return SteeringPredictorT(config_, params_.clone()); }
  template <typename U>
  SteeringPredictorT<U> cast() const {
    return SteeringPredictorT<U>(typename SteeringPredictorT<U>::Config{config_.image_size}, params_.template cast<U>());
  }

 private:
  Config config_;
  ParameterSet<T> params_;
};

/// Image-to-image translator: two stride-2 conv encoders, residual blocks at
/// quarter resolution, two nearest-upsample + conv decoders, tanh output.
/// Instance norm follows every conv except the last.
template <typename T>
class TranslationGeneratorT {
 public:
  static constexpr const char* kArchitecture = "translation_generator";
  struct Config {
    int image_size = 64;
    int base_channels = 8;
    int residual_blocks = 3;
  };

  TranslationGeneratorT(Config config, std::uint64_t init_seed);
  TranslationGeneratorT(Config config, ParameterSet<T> params);

  static std::vector<ParamSpec> layout(const Config& config);

  BasicTensor<T> forward(const BasicTensor<T>& batch) const;

  const Config& config() const { return config_; }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }
  std::string tag() const;

  TranslationGeneratorT clone() const { return TranslationGeneratorT(config_, params_.clone()); }
  template <typename U>
  TranslationGeneratorT<U> cast() const {
    return TranslationGeneratorT<U>(
        typename TranslationGeneratorT<U>::Config{config_.image_size, config_.base_channels, config_.residual_blocks},
        params_.template cast<U>());
  }

 private:
  Config config_;
  ParameterSet<T> params_;
};

/// Patch discriminator: three stride-2 3x3 convs, leaky ReLU(0.2) between
/// them, producing a 1-channel map of S/8 x S/8 real/fake scores.
template <typename T>
class PatchDiscriminatorT {
 public:
  static constexpr const char* kArchitecture = "patch_discriminator";
  static constexpr int kReceptiveField = 15;
  struct Config {
    int image_size = 64;
    int base_channels = 16;
  };

  PatchDiscriminatorT(Config config, std::uint64_t init_seed);
  PatchDiscriminatorT(Config config, ParameterSet<T> params);

  static std::vector<ParamSpec> layout(const Config& config);

  BasicTensor<T> forward(const BasicTensor<T>& batch) const;

  const Config& config() const { return config_; }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }
  std::string tag() const;

  PatchDiscriminatorT clone() const { return PatchDiscriminatorT(config_, params_.clone()); }
  template <typename U>
  PatchDiscriminatorT<U> cast() const {
    return PatchDiscriminatorT<U>(typename PatchDiscriminatorT<U>::Config{config_.image_size, config_.base_channels},
                                  params_.template cast<U>());
  }

 private:
  Config config_;
  ParameterSet<T> params_;
};

using SteeringPredictor = SteeringPredictorT<float>;
using TranslationGenerator = TranslationGeneratorT<float>;
using PatchDiscriminator = PatchDiscriminatorT<float>;

ModelCheckpoint to_checkpoint(const SteeringPredictor& model);
ModelCheckpoint to_checkpoint(const TranslationGenerator& model);
ModelCheckpoint to_checkpoint(const PatchDiscriminator& model);

/// Rebuild a model; throws CheckpointError on tag, name, or shape mismatch.
SteeringPredictor predictor_from_checkpoint(const ModelCheckpoint& checkpoint);
TranslationGenerator generator_from_checkpoint(const ModelCheckpoint& checkpoint);
PatchDiscriminator discriminator_from_checkpoint(const ModelCheckpoint& checkpoint);

}  // namespace fogbench
