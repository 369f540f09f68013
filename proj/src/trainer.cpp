#include "fogbench/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "fogbench/image.hpp"
#include "fogbench/rng.hpp"

namespace fogbench {

namespace {

std::vector<std::size_t> shuffled(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  // Fisher-Yates with an explicit draw so the order does not depend on the
  // standard library's shuffle implementation.
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng() % i;
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

Tensor labels_tensor(const std::vector<const LabeledImage*>& batch) {
  std::vector<float> v;
  v.reserve(batch.size());
  for (const auto* s : batch) v.push_back(static_cast<float>(s->angle));
  return Tensor({batch.size(), 1}, std::move(v));
}

Tensor batch_tensor(const std::vector<const LabeledImage*>& batch) {
  std::vector<const Image*> images;
  images.reserve(batch.size());
  for (const auto* s : batch) images.push_back(&s->image);
  return images_to_tensor(images);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

double elapsed_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

// ---------------------------------------------------------------------------
// Steering predictor

void SteeringTrainConfig::validate() const {
  if (epochs < 0) throw ContractViolation("steering: epochs must be >= 0");
  if (batch_size < 1) throw ContractViolation("steering: batch size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ContractViolation("steering: learning rate must be positive");
  }
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ContractViolation("steering: test fraction must be in (0, 1)");
  }
}

DatasetSplit split_dataset(std::size_t count, double test_fraction, std::uint64_t seed) {
  const auto order = shuffled(count, seed);
  const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(count) * test_fraction));
  DatasetSplit split;
  split.train.assign(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_test));
  split.test.assign(order.end() - static_cast<std::ptrdiff_t>(n_test), order.end());
  return split;
}

double predictor_mse(const SteeringPredictor& model, const std::vector<const LabeledImage*>& samples) {
  if (samples.empty()) throw ContractViolation("predictor_mse: no samples");
  NoGradGuard guard;
  double acc = 0.0;
  constexpr std::size_t kChunk = 32;
  for (std::size_t start = 0; start < samples.size(); start += kChunk) {
    std::vector<const LabeledImage*> chunk(samples.begin() + start,
                                           samples.begin() + std::min(samples.size(), start + kChunk));
    const auto pred = model.forward(batch_tensor(chunk));
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const double d = pred.data()[i] - chunk[i]->angle;
      acc += d * d;
    }
  }
  return acc / static_cast<double>(samples.size());
}

FitResult fit_predictor(SteeringPredictor& model, const std::vector<const LabeledImage*>& samples,
                        const SteeringTrainConfig& config) {
  config.validate();
  if (samples.empty()) throw ContractViolation("fit_predictor: no training samples");

  std::vector<LabeledImage> mirrored;
  std::vector<const LabeledImage*> pool = samples;
  if (config.mirror_augment) {
    mirrored.reserve(samples.size());
    for (const auto* s : samples) mirrored.push_back({mirror_horizontally(s->image), -s->angle});
    for (const auto& m : mirrored) pool.push_back(&m);
  }

  FitResult result;
  result.initial_mse = predictor_mse(model, samples);

  auto& params = model.params().tensors();
  model.params().set_requires_grad(true);
  AdamState adam(params, AdamOptions{.learning_rate = config.learning_rate, .beta1 = 0.9, .beta2 = 0.999});
  const auto m = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto order = shuffled(pool.size(), derive_seed(config.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += m) {
      std::vector<const LabeledImage*> batch;
      for (std::size_t k = start; k < std::min(order.size(), start + m); ++k) batch.push_back(pool[order[k]]);
      auto loss = mse_loss(model.forward(batch_tensor(batch)), labels_tensor(batch));
      loss_sum += loss.item();
      ++batches;
      backward(loss);
      adam_step(params, adam);
    }
    result.epoch_mse.push_back(loss_sum / static_cast<double>(batches));
  }
  model.params().set_requires_grad(false);
  return result;
}

SteeringTrainResult train_steering(const Dataset& dataset, const SteeringTrainConfig& config) {
  config.validate();
  if (dataset.size() < 20) {
    throw ContractViolation("train_steering: need at least 20 samples, got " + std::to_string(dataset.size()));
  }
  SteeringTrainResult out{SteeringPredictor({dataset.image_size()}, derive_seed(config.seed, "init")),
                          split_dataset(dataset.size(), config.test_fraction, derive_seed(config.seed, "split")),
                          0.0, 0.0, 0.0, {}};
  std::vector<const LabeledImage*> train, test;
  for (auto i : out.split.train) train.push_back(&dataset.samples[i]);
  for (auto i : out.split.test) test.push_back(&dataset.samples[i]);

  auto fit = fit_predictor(out.model, train, config);
  out.initial_train_mse = fit.initial_mse;
  out.epoch_mse = std::move(fit.epoch_mse);
  out.train_mse = predictor_mse(out.model, train);
  out.test_mse = predictor_mse(out.model, test);
  return out;
}

// ---------------------------------------------------------------------------
// Attack configuration and log format

void AttackConfig::validate() const {
  weights().validate();
  if (epochs < 0) throw ContractViolation("attack: epochs must be >= 0");
  if (batch_size < 1) throw ContractViolation("attack: batch size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ContractViolation("attack: learning rate must be positive");
  }
  if (generator_base < 1 || residual_blocks < 0 || discriminator_base < 1) {
    throw ContractViolation("attack: invalid network widths");
  }
}

std::vector<std::pair<std::string, std::string>> AttackConfig::entries() const {
  return {{"alpha", fmt(alpha)},
          {"theta", fmt(theta)},
          {"lambda_cycle", fmt(lambda_cycle)},
          {"lambda_identity", fmt(lambda_identity)},
          {"epochs", std::to_string(epochs)},
          {"batch_size", std::to_string(batch_size)},
          {"learning_rate", fmt(learning_rate)},
          {"seed", std::to_string(seed)},
          {"enable_bregress", enable_bregress ? "true" : "false"},
          {"clamp_regress", clamp_regress ? "true" : "false"},
          {"generator_base", std::to_string(generator_base)},
          {"residual_blocks", std::to_string(residual_blocks)},
          {"discriminator_base", std::to_string(discriminator_base)}};
}

std::string train_log_header(bool with_bregress) {
  std::string h = "epoch,regress,cycle,identity,gan_gen,disc_A,disc_B,total,mean_deviation,seconds";
  if (with_bregress) h += ",bregress";
  return h;
}

std::string format_log_row(const TrainLogRecord& r) {
  std::string row = std::to_string(r.epoch);
  for (double v : {r.regress, r.cycle, r.identity, r.gan_gen, r.disc_A, r.disc_B, r.total, r.mean_deviation}) {
    row += "," + fmt(v);
  }
  char secs[32];
  std::snprintf(secs, sizeof secs, ",%.3f", r.seconds);
  row += secs;
  if (r.bregress) row += "," + fmt(*r.bregress);
  return row;
}

void write_log_preamble(std::ostream& out, const AttackConfig& config) {
  for (const auto& [k, v] : config.entries()) out << "# " << k << "=" << v << "\n";
  out << train_log_header(config.enable_bregress) << "\n";
}

std::vector<TrainLogRecord> read_train_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open training log");
  std::string line;
  bool with_bregress = false, header_seen = false;
  std::vector<TrainLogRecord> out;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line == train_log_header(true)) {
        with_bregress = true;
      } else if (line != train_log_header(false)) {
        throw IoError(path, "unexpected training log header");
      }
      header_seen = true;
      continue;
    }
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
    if (v.size() != (with_bregress ? 11u : 10u)) throw IoError(path, "malformed training log row");
    TrainLogRecord r{static_cast<int>(v[0]), v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9], std::nullopt};
    if (with_bregress) r.bregress = v[10];
    out.push_back(r);
  }
  if (!header_seen) throw IoError(path, "training log has no header");
  return out;
}

// ---------------------------------------------------------------------------
// Attack models

AttackModels init_attack_models(const AttackConfig& config, int image_size) {
  const TranslationGenerator::Config g{image_size, config.generator_base, config.residual_blocks};
  const PatchDiscriminator::Config d{image_size, config.discriminator_base};
  return {TranslationGenerator(g, derive_seed(config.seed, "init", 1)),
          TranslationGenerator(g, derive_seed(config.seed, "init", 2)),
          PatchDiscriminator(d, derive_seed(config.seed, "init", 3)),
          PatchDiscriminator(d, derive_seed(config.seed, "init", 4))};
}

void save_attack_models(const std::filesystem::path& dir, const AttackModels& models) {
  std::filesystem::create_directories(dir);
  save_checkpoint(dir / "g_ab.fgb", to_checkpoint(models.g_ab));
  save_checkpoint(dir / "g_ba.fgb", to_checkpoint(models.g_ba));
  save_checkpoint(dir / "d_a.fgb", to_checkpoint(models.d_a));
  save_checkpoint(dir / "d_b.fgb", to_checkpoint(models.d_b));
}

AttackModels load_attack_models(const std::filesystem::path& dir) {
  AttackModels m{generator_from_checkpoint(load_checkpoint(dir / "g_ab.fgb")),
                 generator_from_checkpoint(load_checkpoint(dir / "g_ba.fgb")),
                 discriminator_from_checkpoint(load_checkpoint(dir / "d_a.fgb")),
                 discriminator_from_checkpoint(load_checkpoint(dir / "d_b.fgb"))};
  if (m.g_ab.tag() != m.g_ba.tag() || m.d_a.tag() != m.d_b.tag() ||
      m.g_ab.config().image_size != m.d_a.config().image_size) {
    throw CheckpointError("attack checkpoints in " + dir.string() + " do not share one architecture: " +
                          m.g_ab.tag() + " / " + m.g_ba.tag() + " / " + m.d_a.tag() + " / " + m.d_b.tag());
  }
  return m;
}

// ---------------------------------------------------------------------------
// Attack training loop

AttackResult train_attack(const Dataset& domain_a, const Dataset& domain_b, const SteeringPredictor& predictor,
                          const AttackConfig& config, std::optional<AttackModels> start, int first_epoch,
                          const EpochCallback& on_epoch) {
  config.validate();
  if (domain_a.empty() || domain_b.empty()) throw ContractViolation("train_attack: empty domain dataset");
  const int size = domain_a.image_size();
  if (domain_b.image_size() != size) {
    throw ContractViolation("train_attack: domain image sizes differ (" + std::to_string(size) + " vs " +
                            std::to_string(domain_b.image_size()) + ")");
  }
  if (predictor.config().image_size != size) {
    throw ContractViolation("train_attack: predictor expects " + std::to_string(predictor.config().image_size) +
                            "px images, data is " + std::to_string(size) + "px");
  }
  AttackResult result{start ? std::move(*start) : init_attack_models(config, size), {}};
  auto& models = result.models;
  if (models.g_ab.config().image_size != size || models.d_a.config().image_size != size) {
    throw ContractViolation("train_attack: model image size does not match data");
  }

  // The predictor only ever sees inputs that carry gradients; its own
  // parameters never require them, so no update can reach it.
  const SteeringPredictor frozen(predictor.config(), predictor.params().clone());

  std::vector<Tensor> gen_params = models.g_ab.params().tensors();
  for (const auto& t : models.g_ba.params().tensors()) gen_params.push_back(t);
  auto& da_params = models.d_a.params().tensors();
  auto& db_params = models.d_b.params().tensors();
  const AdamOptions opts{.learning_rate = config.learning_rate};
  AdamState gen_adam(gen_params, opts), da_adam(da_params, opts), db_adam(db_params, opts);
  const auto weights = config.weights();
  const auto m = static_cast<std::size_t>(config.batch_size);
  const std::size_t steps = (std::max(domain_a.size(), domain_b.size()) + m - 1) / m;

  auto set_grad = [](std::vector<Tensor>& ps, bool on) {
    for (auto& p : ps) p.set_requires_grad(on);
  };

  for (int epoch = first_epoch; epoch < first_epoch + config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto e = static_cast<std::uint64_t>(epoch);
    const auto order_a = shuffled(domain_a.size(), derive_seed(config.seed, "shuffle_a", e));
    const auto order_b = shuffled(domain_b.size(), derive_seed(config.seed, "shuffle_b", e));
    TrainLogRecord rec;
    rec.epoch = epoch;
    double bregress_sum = 0.0, deviation_sum = 0.0;
    std::size_t deviation_n = 0;

    for (std::size_t step = 0; step < steps; ++step) {
      std::vector<const Image*> xa, yb;
      for (std::size_t k = 0; k < m; ++k) {
        xa.push_back(&domain_a.samples[order_a[(step * m + k) % order_a.size()]].image);
        yb.push_back(&domain_b.samples[order_b[(step * m + k) % order_b.size()]].image);
      }
      const auto x = images_to_tensor(xa);
      const auto y = images_to_tensor(yb);

      // Generator update.
      set_grad(gen_params, true);
      set_grad(da_params, false);
      set_grad(db_params, false);
      const auto fake_b = models.g_ab.forward(x);
      const auto rec_a = models.g_ba.forward(fake_b);
      const auto fake_a = models.g_ba.forward(y);
      const auto rec_b = models.g_ab.forward(fake_a);
      const auto same_b = models.g_ab.forward(y);
      const auto same_a = models.g_ba.forward(x);

      Tensor pred_clean, pred_y;
      {
        NoGradGuard guard;
        pred_clean = frozen.forward(x);
        if (config.enable_bregress) pred_y = frozen.forward(y);
      }
      const auto pred_adv = frozen.forward(fake_b);
      GeneratorLossParts<float> parts{
          regress_loss(pred_adv, pred_clean, config.theta, config.clamp_regress),
          cycle_loss(x, rec_a, y, rec_b, config.lambda_cycle),
          identity_loss(y, same_b, x, same_a, config.lambda_identity),
          add(gan_generator_loss(models.d_b.forward(fake_b)), gan_generator_loss(models.d_a.forward(fake_a))),
          std::nullopt};
      if (config.enable_bregress) {
        parts.bregress = backward_regress_loss(frozen.forward(fake_a), pred_y, config.theta, config.clamp_regress);
      }
      const auto loss = total_generator_loss(parts, weights);
      backward(loss.total);
      adam_step(gen_params, gen_adam);

      for (std::size_t i = 0; i < m; ++i) deviation_sum += std::abs(pred_adv.data()[i] - pred_clean.data()[i]);
      deviation_n += m;
      rec.regress += loss.regress.item();
      rec.cycle += loss.cycle.item();
      rec.identity += loss.identity.item();
      rec.gan_gen += loss.gan.item();
      rec.total += loss.total.item();
      if (loss.bregress) bregress_sum += loss.bregress->item();

      // Discriminator update on detached fakes.
      set_grad(gen_params, false);
      set_grad(da_params, true);
      set_grad(db_params, true);
      const auto disc_a = gan_discriminator_loss(models.d_a.forward(x), models.d_a.forward(fake_a.detach()));
      const auto disc_b = gan_discriminator_loss(models.d_b.forward(y), models.d_b.forward(fake_b.detach()));
      backward(add(disc_a, disc_b));
      adam_step(da_params, da_adam);
      adam_step(db_params, db_adam);
      rec.disc_A += disc_a.item();
      rec.disc_B += disc_b.item();
    }
    set_grad(da_params, false);
    set_grad(db_params, false);

    const double n = static_cast<double>(steps);
    for (double* v : {&rec.regress, &rec.cycle, &rec.identity, &rec.gan_gen, &rec.total, &rec.disc_A, &rec.disc_B}) {
      *v /= n;
    }
    if (config.enable_bregress) rec.bregress = bregress_sum / n;
    rec.mean_deviation = deviation_sum / static_cast<double>(deviation_n);
    rec.seconds = elapsed_since(t0);
    result.log.push_back(rec);
    if (on_epoch && !on_epoch(rec, models)) break;
  }
  return result;
}

}  // namespace fogbench
