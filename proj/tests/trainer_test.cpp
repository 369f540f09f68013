#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>

#include "fogbench/trainer.hpp"

using namespace fogbench;
namespace fs = std::filesystem;

namespace {

// Small shared fixture: tiny networks and datasets so a few epochs run in
// well under a second each.
struct Tiny {
  Dataset a, b;
  SteeringPredictor predictor{{32}, 5};
  AttackConfig config;

  Tiny() {
    for (std::uint64_t i = 0; i < 8; ++i) {
      a.samples.push_back(generate_scene(SceneParams::sample(100 + i, 32)));
      b.samples.push_back(apply_fog(generate_scene(SceneParams::sample(200 + i, 32)), FogParams{}));
      a.filenames.push_back("a" + std::to_string(i));
      b.filenames.push_back("b" + std::to_string(i));
    }
    // Larger predictor weights so its output actually moves with the input.
    for (auto& t : predictor.params().tensors())
      for (auto& v : t.mutable_data()) v *= 8.0f;
    config.epochs = 2;
    config.generator_base = 4;
    config.residual_blocks = 1;
    config.discriminator_base = 4;
    config.seed = 11;
  }
};

std::vector<std::uint8_t> param_bytes(const SteeringPredictor& p) {
  std::vector<std::uint8_t> out;
  for (const auto& t : p.params().tensors()) {
    const auto d = t.data();
    const auto* raw = reinterpret_cast<const std::uint8_t*>(d.data());
    out.insert(out.end(), raw, raw + d.size_bytes());
  }
  return out;
}

Dataset toy_dataset(std::size_t n, std::uint64_t seed) {
  Dataset ds;
  for (std::size_t i = 0; i < n; ++i) {
    ds.samples.push_back(generate_scene(SceneParams::sample(seed ^ i, 32)));
    ds.filenames.push_back(std::to_string(i));
  }
  return ds;
}

}  // namespace

TEST(Split, PartitionsAllIndices) {
  const auto s = split_dataset(50, 0.2, 3);
  EXPECT_EQ(s.train.size(), 40u);
  EXPECT_EQ(s.test.size(), 10u);
  std::vector<std::size_t> all = s.train;
  all.insert(all.end(), s.test.begin(), s.test.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(all[i], i);
  EXPECT_EQ(split_dataset(50, 0.2, 3).test, s.test);
  EXPECT_NE(split_dataset(50, 0.2, 4).test, s.test);
}

TEST(Steering, ReducesTrainErrorAndIsDeterministic) {
  const auto ds = toy_dataset(40, 9);
  SteeringTrainConfig c;
  c.epochs = 4;
  c.seed = 2;
  const auto r1 = train_steering(ds, c);
  EXPECT_LT(r1.train_mse, r1.initial_train_mse);
  EXPECT_EQ(r1.epoch_mse.size(), 4u);
  const auto r2 = train_steering(ds, c);
  EXPECT_EQ(encode_checkpoint(to_checkpoint(r1.model)), encode_checkpoint(to_checkpoint(r2.model)));
  EXPECT_EQ(r1.test_mse, r2.test_mse);
}

TEST(Steering, RejectsTinyDatasets) {
  EXPECT_THROW(train_steering(toy_dataset(19, 1), SteeringTrainConfig{}), ContractViolation);
  EXPECT_THROW(train_steering(Dataset{}, SteeringTrainConfig{}), ContractViolation);
}

TEST(Steering, PredictorMseMatchesDirectSum) {
  const auto ds = toy_dataset(5, 4);
  SteeringPredictor p({32}, 1);
  std::vector<const LabeledImage*> ptrs;
  double expected = 0;
  for (const auto& s : ds.samples) {
    ptrs.push_back(&s);
    NoGradGuard g;
    const double d = p.forward(image_to_tensor(s.image)).item() - s.angle;
    expected += d * d / 5;
  }
  EXPECT_NEAR(predictor_mse(p, ptrs), expected, 1e-9);
}

TEST(AttackConfig, DefaultsMatchPublishedSettings) {
  AttackConfig c;
  EXPECT_EQ(c.alpha, 0.2);
  EXPECT_EQ(c.theta, 0.5);
  EXPECT_EQ(c.lambda_cycle, 10.0);
  EXPECT_EQ(c.lambda_identity, 3.0);
  EXPECT_EQ(c.epochs, 150);
  EXPECT_EQ(c.batch_size, 4);
  EXPECT_FALSE(c.enable_bregress);
  EXPECT_FALSE(c.clamp_regress);
  EXPECT_NO_THROW(c.validate());
  c.alpha = 1.0;
  EXPECT_THROW(c.validate(), ContractViolation);
  c.alpha = 0.5;
  c.theta = -0.1;
  EXPECT_THROW(c.validate(), ContractViolation);
}

TEST(TrainLog, PreambleEchoesConfigAndHeader) {
  std::ostringstream out;
  write_log_preamble(out, AttackConfig{});
  const auto s = out.str();
  EXPECT_NE(s.find("# alpha=0.2\n"), std::string::npos);
  EXPECT_NE(s.find("# theta=0.5\n"), std::string::npos);
  EXPECT_NE(s.find("\nepoch,regress,cycle,identity,gan_gen,disc_A,disc_B,total,mean_deviation,seconds\n"),
            std::string::npos);
  EXPECT_EQ(train_log_header(true), train_log_header(false) + ",bregress");
}

TEST(TrainLog, RoundTripsThroughFile) {
  const auto path = fs::temp_directory_path() / "fogbench_log_rt.csv";
  AttackConfig c;
  c.enable_bregress = true;
  std::vector<TrainLogRecord> recs{{1, -0.25, 3.5, 1.25, 0.5, 0.75, 0.625, 4.0, 0.75, 1.5, 0.125},
                                   {2, -0.5, 3.0, 1.0, 0.5, 0.5, 0.5, 3.5, 1.0, 1.25, -0.25}};
  {
    std::ofstream out(path);
    write_log_preamble(out, c);
    for (const auto& r : recs) out << format_log_row(r) << "\n";
  }
  const auto back = read_train_log(path);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].epoch, 2);
  EXPECT_EQ(back[1].regress, -0.5);
  EXPECT_EQ(*back[1].bregress, -0.25);
  EXPECT_EQ(back[0].seconds, 1.5);
  fs::remove(path);
}

TEST(Attack, FrozenPredictorDeterministicLogsAndBookkeeping) {
  Tiny t;
  const auto before = param_bytes(t.predictor);
  const auto r1 = train_attack(t.a, t.b, t.predictor, t.config);
  EXPECT_EQ(param_bytes(t.predictor), before);
  for (const auto& p : t.predictor.params().tensors()) EXPECT_FALSE(p.has_grad());

  ASSERT_EQ(r1.log.size(), 2u);
  for (std::size_t i = 0; i < r1.log.size(); ++i) {
    const auto& r = r1.log[i];
    EXPECT_EQ(r.epoch, static_cast<int>(i) + 1);
    const double recomputed = (1 - t.config.alpha) * (r.cycle + r.identity + r.gan_gen) + t.config.alpha * r.regress;
    EXPECT_NEAR(r.total, recomputed, 1e-6);
    EXPECT_FALSE(r.bregress.has_value());
    EXPECT_GE(r.mean_deviation, 0.0);
  }

  const auto r2 = train_attack(t.a, t.b, t.predictor, t.config);
  for (std::size_t i = 0; i < r1.log.size(); ++i) {
    auto a = r1.log[i], b = r2.log[i];
    a.seconds = b.seconds = 0;
    EXPECT_EQ(format_log_row(a), format_log_row(b));
  }
  EXPECT_EQ(encode_checkpoint(to_checkpoint(r1.models.g_ab)), encode_checkpoint(to_checkpoint(r2.models.g_ab)));
  EXPECT_EQ(encode_checkpoint(to_checkpoint(r1.models.d_b)), encode_checkpoint(to_checkpoint(r2.models.d_b)));
}

TEST(Attack, BregressAppearsInEveryRowAndEntersTotal) {
  Tiny t;
  t.config.enable_bregress = true;
  const auto r = train_attack(t.a, t.b, t.predictor, t.config);
  for (const auto& rec : r.log) {
    ASSERT_TRUE(rec.bregress.has_value());
    const double recomputed = (1 - t.config.alpha) * (rec.cycle + rec.identity + rec.gan_gen) +
                              t.config.alpha * (rec.regress + *rec.bregress);
    EXPECT_NEAR(rec.total, recomputed, 1e-6);
  }
}

TEST(Attack, RegressTermMatchesLoggedDeviationUnclamped) {
  // Unclamped regress = theta - mean|dev| batch by batch, so the epoch means
  // obey the same identity.
  Tiny t;
  const auto r = train_attack(t.a, t.b, t.predictor, t.config);
  for (const auto& rec : r.log) EXPECT_NEAR(rec.regress, t.config.theta - rec.mean_deviation, 1e-6);
}

TEST(Attack, SizeMismatchRejectedBeforeTraining) {
  Tiny t;
  SteeringPredictor big({64}, 0);
  EXPECT_THROW(train_attack(t.a, t.b, big, t.config), ContractViolation);
  Dataset empty;
  EXPECT_THROW(train_attack(empty, t.b, t.predictor, t.config), ContractViolation);
}

TEST(Attack, ResumeZeroEpochsKeepsModelsAndContinuesNumbering) {
  Tiny t;
  auto first = train_attack(t.a, t.b, t.predictor, t.config);
  const auto g_before = encode_checkpoint(to_checkpoint(first.models.g_ab));

  auto zero = t.config;
  zero.epochs = 0;
  auto same = train_attack(t.a, t.b, t.predictor, zero, first.models, 3);
  EXPECT_TRUE(same.log.empty());
  EXPECT_EQ(encode_checkpoint(to_checkpoint(same.models.g_ab)), g_before);

  auto more = t.config;
  more.epochs = 1;
  auto resumed = train_attack(t.a, t.b, t.predictor, more, first.models, 3);
  ASSERT_EQ(resumed.log.size(), 1u);
  EXPECT_EQ(resumed.log[0].epoch, 3);
}

TEST(Attack, EarlyStopFromCallback) {
  Tiny t;
  t.config.epochs = 5;
  int calls = 0;
  const auto r = train_attack(t.a, t.b, t.predictor, t.config, std::nullopt, 1,
                              [&](const TrainLogRecord&, const AttackModels&) { return ++calls < 2; });
  EXPECT_EQ(r.log.size(), 2u);
}

TEST(AttackModels, SaveLoadAndMismatch) {
  Tiny t;
  const auto dir = fs::temp_directory_path() / "fogbench_attack_models";
  fs::remove_all(dir);
  auto m = init_attack_models(t.config, 32);
  save_attack_models(dir, m);
  auto back = load_attack_models(dir);
  EXPECT_EQ(encode_checkpoint(to_checkpoint(back.g_ba)), encode_checkpoint(to_checkpoint(m.g_ba)));
  // Replace one generator with a differently sized one.
  auto other = t.config;
  other.generator_base = 8;
  save_checkpoint(dir / "g_ba.fgb", to_checkpoint(init_attack_models(other, 32).g_ba));
  EXPECT_THROW(load_attack_models(dir), CheckpointError);
  fs::remove_all(dir);
}
