#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fogbench/adam.hpp"
#include "fogbench/losses.hpp"
#include "fogbench/models.hpp"
#include "fogbench/scenes.hpp"

namespace fogbench {

// ---------------------------------------------------------------------------
// Steering predictor

struct SteeringTrainConfig {
  int epochs = 30;
  int batch_size = 16;
  double learning_rate = 1e-3;
  double test_fraction = 0.2;
  bool mirror_augment = true;  // add the mirrored image with negated angle
  std::uint64_t seed = 0;

  void validate() const;
};

struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Seeded shuffle, then the first (1 - test_fraction) share becomes train.
DatasetSplit split_dataset(std::size_t count, double test_fraction, std::uint64_t seed);

/// Mean squared error in rad^2 of `model` on the listed samples.
double predictor_mse(const SteeringPredictor& model, const std::vector<const LabeledImage*>& samples);

struct FitResult {
  double initial_mse = 0.0;             // over the fit samples, before the first update
  std::vector<double> epoch_mse;        // running mean of batch losses per epoch
};

/// Adam on MSE to the labels, in place. Used for pretraining and fine-tuning.
FitResult fit_predictor(SteeringPredictor& model, const std::vector<const LabeledImage*>& samples,
                        const SteeringTrainConfig& config);

struct SteeringTrainResult {
  SteeringPredictor model;
  DatasetSplit split;
  double initial_train_mse = 0.0;
  double train_mse = 0.0;
  double test_mse = 0.0;
  std::vector<double> epoch_mse;
};

/// Trains a fresh predictor on an 80/20 split. Throws ContractViolation if the
/// dataset has fewer than 20 samples.
SteeringTrainResult train_steering(const Dataset& dataset, const SteeringTrainConfig& config);

// ---------------------------------------------------------------------------
// Attack

struct AttackConfig {
  double alpha = 0.2;
  double theta = 0.5;  // radians
  double lambda_cycle = 10.0;
  double lambda_identity = 3.0;
  int epochs = 150;
  int batch_size = 4;
  double learning_rate = 2e-4;
  std::uint64_t seed = 0;
  bool enable_bregress = false;
  bool clamp_regress = false;
  int generator_base = 8;
  int residual_blocks = 3;
  int discriminator_base = 16;

  void validate() const;
  LossWeights weights() const { return {alpha, theta, lambda_cycle, lambda_identity}; }
  /// key=value pairs in a fixed order, used for log headers and manifests.
  std::vector<std::pair<std::string, std::string>> entries() const;
};

struct TrainLogRecord {
  int epoch = 0;
  double regress = 0.0;
  double cycle = 0.0;
  double identity = 0.0;
  double gan_gen = 0.0;
  double disc_A = 0.0;
  double disc_B = 0.0;
  double total = 0.0;
  double mean_deviation = 0.0;  // |N(phi_AB(x)) - N(x)| over the epoch's training batches
  double seconds = 0.0;
  std::optional<double> bregress;
};

/// Column names in file order; "bregress" is appended when enabled.
std::string train_log_header(bool with_bregress);
std::string format_log_row(const TrainLogRecord& record);
/// "# key=value" lines followed by the column header.
void write_log_preamble(std::ostream& out, const AttackConfig& config);
std::vector<TrainLogRecord> read_train_log(const std::filesystem::path& path);

struct AttackModels {
  TranslationGenerator g_ab;
  TranslationGenerator g_ba;
  PatchDiscriminator d_a;
  PatchDiscriminator d_b;
};

AttackModels init_attack_models(const AttackConfig& config, int image_size);

/// Writes g_ab.fgb, g_ba.fgb, d_a.fgb, d_b.fgb into `dir`.
void save_attack_models(const std::filesystem::path& dir, const AttackModels& models);
/// Throws CheckpointError unless all four share one image size.
AttackModels load_attack_models(const std::filesystem::path& dir);

/// Called after each epoch; return false to stop early.
using EpochCallback = std::function<bool(const TrainLogRecord&, const AttackModels&)>;

struct AttackResult {
  AttackModels models;
  std::vector<TrainLogRecord> log;
};

/// Alternating generator / discriminator updates on the combined loss with a
/// frozen predictor. Starts from `start` when given (resume), numbering epochs
/// from `first_epoch`. Adam state always starts fresh.
AttackResult train_attack(const Dataset& domain_a, const Dataset& domain_b, const SteeringPredictor& predictor,
                          const AttackConfig& config, std::optional<AttackModels> start = std::nullopt,
                          int first_epoch = 1, const EpochCallback& on_epoch = {});

}  // namespace fogbench
