#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fogbench/trainer.hpp"

namespace fogbench {

/// Batch -> batch image translation under evaluation. Wraps a generator or
/// the built-in identity.
struct ImageTransform {
  std::string id;
  std::function<Tensor(const Tensor&)> apply;
  int image_size = 0;  // 0 accepts any size
};

ImageTransform identity_transform();
ImageTransform generator_transform(const TranslationGenerator& generator, std::string id);

struct Stat {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

/// Mean and population std; an infinite entry makes the mean infinite, with
/// std 0 when every entry is the same infinity and NaN otherwise.
Stat summarize(const std::vector<double>& values);

struct SampleRow {
  std::string filename;
  double pred_clean = 0.0;
  double pred_foggy = 0.0;
  double deviation = 0.0;
  double mse = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct EvalReport {
  std::string dataset_id;
  std::string generator_id;
  std::string predictor_id;
  std::optional<std::string> second_generator_id;  // set by compare_generators
  std::size_t n = 0;
  Stat deviation;
  Stat mse;
  Stat psnr;
  Stat ssim;
  std::vector<SampleRow> samples;
  std::vector<std::string> reference_lines;  // published figures, for context only
};

/// deviation = |N(phi(x)) - R(x)| per sample, with R the `clean_reference`
/// predictor when given and N otherwise; IQA compares x with phi(x).
EvalReport deviation_report(const ImageTransform& generator, const SteeringPredictor& predictor,
                            const Dataset& dataset, const std::string& dataset_id,
                            const std::string& predictor_id,
                            const SteeringPredictor* clean_reference = nullptr);

/// Deviation |N(phi_regress(x)) - N(phi_plain(x))| and IQA between the two
/// translated images. pred_clean holds N(phi_plain(x)).
EvalReport compare_generators(const ImageTransform& plain, const ImageTransform& regress,
                              const SteeringPredictor& predictor, const Dataset& dataset,
                              const std::string& dataset_id, const std::string& predictor_id);

/// report.csv, per_sample.csv and summary.txt.
void write_report(const std::filesystem::path& dir, const EvalReport& report);
std::string report_summary(const EvalReport& report);

// ---------------------------------------------------------------------------
// Ablations

enum class SweepParam { kAlpha, kTheta };
SweepParam parse_sweep_param(const std::string& name);
std::string sweep_param_name(SweepParam param);

struct SweepOptions {
  int budget_epochs = 150;
  bool stop_at_threshold = false;  // end an entry once its deviation reaches theta
};

struct SweepEntry {
  double value = 0.0;
  EvalReport report;
  std::optional<int> epochs_to_threshold;  // first epoch whose mean deviation >= theta
  bool diverged = false;                   // non-finite loss seen
  std::vector<TrainLogRecord> log;
};

struct SweepResult {
  SweepParam param = SweepParam::kAlpha;
  std::vector<SweepEntry> entries;  // ascending by value
};

struct AttackData {
  const Dataset* domain_a = nullptr;
  const Dataset* domain_b = nullptr;
  const Dataset* held_out = nullptr;
  const SteeringPredictor* predictor = nullptr;
};

/// Every value is validated before any training. Each entry writes its log,
/// checkpoints and report under out_dir/<param>_<value> when out_dir is set.
SweepResult ablation_sweep(SweepParam param, std::vector<double> values, const AttackConfig& base,
                           const AttackData& data, const SweepOptions& options,
                           const std::optional<std::filesystem::path>& out_dir = std::nullopt);

void write_sweep_summary(const std::filesystem::path& path, const SweepResult& result);

/// Trains an attack while writing train_log.csv and checkpoints into `dir`.
AttackResult run_attack(const AttackData& data, const AttackConfig& config, const std::filesystem::path& dir,
                        const EpochCallback& extra = {});

// ---------------------------------------------------------------------------
// Backward regression loss

struct OscillationStats {
  std::size_t epochs = 0;   // epochs in the tail window
  double variance = 0.0;    // population variance of per-epoch total loss
};

/// Variance of the logged total over the last 20% of epochs (at least one).
OscillationStats loss_oscillation(const std::vector<TrainLogRecord>& log);

struct BregressResult {
  EvalReport report;
  OscillationStats with_bregress;
  OscillationStats baseline;  // paired run without the backward term
  std::size_t image_pairs = 0;
};

/// Paired runs from one seed, with and without the backward term; dumps
/// side-by-side clean|foggy PPMs for the first `dump_pairs` held-out images.
BregressResult backward_regress_experiment(const AttackConfig& config, const AttackData& data,
                                           const std::filesystem::path& out_dir, std::size_t dump_pairs = 8);

// ---------------------------------------------------------------------------
// Defense

struct DefenseConfig {
  SteeringTrainConfig fine_tune{.epochs = 10, .batch_size = 16, .learning_rate = 3e-4};
  bool run_control = true;  // also fine-tune on clean images only
};

struct DefenseResult {
  EvalReport before;
  EvalReport after;
  std::optional<EvalReport> control;
  SteeringPredictor defended;
};

/// Fine-tunes a copy of the predictor on phi(x) for the training images with
/// their ground-truth angles. Deviation is always measured against the
/// original predictor's clean-image predictions.
DefenseResult defense(const SteeringPredictor& predictor, const TranslationGenerator& generator,
                      const Dataset& train, const Dataset& test, const DefenseConfig& config);

}  // namespace fogbench
