#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <random>

#include "fogbench/grad_suite.hpp"
#include "fogbench/image.hpp"
#include "fogbench/models.hpp"
#include "fogbench/checkpoint.hpp"

using namespace fogbench;
namespace fs = std::filesystem;

namespace {

Tensor uniform(Shape shape, std::mt19937_64& rng, float lo = -1.0f, float hi = 1.0f) {
  std::uniform_real_distribution<float> d(lo, hi);
  std::vector<float> v(shape_numel(shape));
  for (auto& x : v) x = d(rng);
  return Tensor(std::move(shape), std::move(v));
}

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / ("fogbench_" + name); }

std::vector<std::uint8_t> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& b) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

// Scales every parameter so the network is far from its near-zero init.
template <typename Model>
void amplify(Model& m, float factor) {
  for (auto& t : m.params().tensors())
    for (auto& v : t.mutable_data()) v *= factor;
}

}  // namespace

TEST(Predictor, OutputShapeAndBound) {
  SteeringPredictor n({64}, 1);
  amplify(n, 50.0f);  // drive the tanh head toward saturation
  std::mt19937_64 rng(2);
  auto y = n.forward(uniform({3, 3, 64, 64}, rng));
  ASSERT_EQ(y.shape(), (Shape{3, 1}));
  for (float v : y.data()) {
    // pi * tanh saturates to float(pi) once tanh rounds to 1
    EXPECT_LE(std::abs(v), std::numbers::pi_v<float>);
    EXPECT_TRUE(std::isfinite(v));
  }
}

TEST(Predictor, ZeroHeadGivesZero) {
  SteeringPredictor n({64}, 3);
  auto& p = n.params().tensors();
  for (auto& v : p[p.size() - 2].mutable_data()) v = 0.0f;
  for (auto& v : p[p.size() - 1].mutable_data()) v = 0.0f;
  std::mt19937_64 rng(4);
  const auto y = n.forward(uniform({2, 3, 64, 64}, rng));
  for (float v : y.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Predictor, ParameterCountNearHundredThousand) {
  SteeringPredictor n({64}, 0);
  EXPECT_GT(n.params().scalar_count(), 80'000u);
  EXPECT_LT(n.params().scalar_count(), 200'000u);
}

TEST(Predictor, WrongChannelCountRejected) {
  SteeringPredictor n({64}, 0);
  EXPECT_THROW(n.forward(Tensor::zeros({1, 1, 64, 64})), ContractViolation);
  EXPECT_THROW(n.forward(Tensor::zeros({1, 3, 32, 32})), ContractViolation);
}

TEST(Predictor, InputGradientMatchesFiniteDifferences) {
  SteeringPredictorT<double> n({16}, 5);
  for (auto& t : n.params().tensors())
    for (auto& v : t.mutable_data()) v *= 20.0;
  std::mt19937_64 rng(6);
  auto x = uniform({1, 3, 16, 16}, rng).cast<double>();
  x.set_requires_grad(true);
  backward(sum(n.forward(x)));
  ASSERT_TRUE(x.has_grad());
  const double h = 1e-6;
  int checked = 0;
  for (std::size_t c = 0; c < x.numel(); c += 37) {
    auto probe = [&](double delta) {
      NoGradGuard guard;
      auto xp = x.detach();
      xp.mutable_data()[c] += delta;
      return n.forward(xp).item();
    };
    const double numeric = (probe(h) - probe(-h)) / (2 * h);
    EXPECT_NEAR(x.grad()[c], numeric, 1e-6 + 1e-4 * std::abs(numeric)) << c;
    ++checked;
  }
  EXPECT_GT(checked, 10);
}

TEST(Generator, ShapeAndRange) {
  TranslationGenerator g({64, 8, 3}, 7);
  amplify(g, 30.0f);
  std::mt19937_64 rng(8);
  auto x = uniform({2, 3, 64, 64}, rng);
  auto y = g.forward(x);
  ASSERT_EQ(y.shape(), x.shape());
  for (float v : y.data()) {
    EXPECT_GE(v, -1.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(Generator, RandomInitChangesImages) {
  TranslationGenerator g({64, 8, 3}, 9);
  std::mt19937_64 rng(10);
  auto x = uniform({1, 3, 64, 64}, rng);
  EXPECT_GT(mean_abs_error(g.forward(x), x).item(), 0.0f);
}

TEST(Generator, ShapeMismatchRejected) {
  TranslationGenerator g({64, 8, 3}, 0);
  EXPECT_THROW(g.forward(Tensor::zeros({1, 3, 32, 32})), ContractViolation);
  EXPECT_THROW(g.forward(Tensor::zeros({3, 64, 64})), ContractViolation);
}

TEST(Discriminator, PatchMapShape) {
  PatchDiscriminator d({64, 16}, 11);
  auto y = d.forward(Tensor::zeros({2, 3, 64, 64}));
  EXPECT_EQ(y.shape(), (Shape{2, 1, 8, 8}));
}

TEST(Discriminator, SmallerThanReceptiveFieldRejected) {
  EXPECT_THROW(PatchDiscriminator({8, 16}, 0), ContractViolation);
  PatchDiscriminator d({64, 16}, 0);
  EXPECT_THROW(d.forward(Tensor::zeros({1, 3, 8, 8})), ContractViolation);
}

TEST(Discriminator, DeterministicAndGradientReachesInput) {
  PatchDiscriminator d({64, 16}, 12);
  std::mt19937_64 rng(13);
  auto x = uniform({1, 3, 64, 64}, rng);
  auto a = d.forward(x), b = d.forward(x);
  EXPECT_TRUE(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
  auto xt = x.detach();
  xt.set_requires_grad(true);
  backward(sum(d.forward(xt)));
  ASSERT_TRUE(xt.has_grad());
  double norm = 0;
  for (float g : xt.grad()) norm += std::abs(g);
  EXPECT_GT(norm, 0.0);
}

TEST(Init, WeightsFollowSmallNormalAndBiasesZero) {
  TranslationGenerator g({64, 8, 3}, 14);
  double sum = 0, sum_sq = 0;
  std::size_t n = 0;
  const auto& names = g.params().names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto& t = g.params()[i];
    if (names[i].ends_with(".bias")) {
      for (float v : t.data()) EXPECT_EQ(v, 0.0f);
      continue;
    }
    for (float v : t.data()) {
      sum += v;
      sum_sq += double(v) * v;
      ++n;
    }
  }
  const double mean = sum / n, sd = std::sqrt(sum_sq / n - mean * mean);
  EXPECT_NEAR(mean, 0.0, 0.002);
  EXPECT_NEAR(sd, 0.02, 0.002);
}

TEST(Init, EqualSeedsGiveIdenticalCheckpoints) {
  EXPECT_EQ(encode_checkpoint(to_checkpoint(SteeringPredictor({64}, 42))),
            encode_checkpoint(to_checkpoint(SteeringPredictor({64}, 42))));
  EXPECT_NE(encode_checkpoint(to_checkpoint(SteeringPredictor({64}, 42))),
            encode_checkpoint(to_checkpoint(SteeringPredictor({64}, 43))));
}

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
  const auto a = temp_file("ckpt_a.fgb"), b = temp_file("ckpt_b.fgb");
  TranslationGenerator g({64, 8, 3}, 15);
  save_checkpoint(a, to_checkpoint(g));
  auto loaded = generator_from_checkpoint(load_checkpoint(a));
  save_checkpoint(b, to_checkpoint(loaded));
  EXPECT_EQ(read_bytes(a), read_bytes(b));
  for (std::size_t i = 0; i < g.params().size(); ++i) {
    const auto x = g.params()[i].data(), y = loaded.params()[i].data();
    EXPECT_EQ(0, std::memcmp(x.data(), y.data(), x.size_bytes()));
  }
  fs::remove(a);
  fs::remove(b);
}

TEST(Checkpoint, HeaderLayout) {
  PatchDiscriminator d({64, 16}, 1);
  const auto bytes = encode_checkpoint(to_checkpoint(d));
  ASSERT_GT(bytes.size(), 10u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "FGB1");
  EXPECT_EQ(bytes[4] | (bytes[5] << 8), 1);
  const std::string tag = d.tag();
  EXPECT_EQ(bytes[6] | (bytes[7] << 8), static_cast<int>(tag.size()));
  EXPECT_EQ(std::string(bytes.begin() + 8, bytes.begin() + 8 + tag.size()), tag);
  EXPECT_EQ(tag, "patch_discriminator image=64 base=16");
}

TEST(Checkpoint, TamperedMagicRejected) {
  const auto p = temp_file("ckpt_magic.fgb");
  save_checkpoint(p, to_checkpoint(SteeringPredictor({64}, 1)));
  auto bytes = read_bytes(p);
  bytes[0] = 'X';
  write_bytes(p, bytes);
  try {
    load_checkpoint(p);
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("magic"), std::string::npos);
  }
  fs::remove(p);
}

TEST(Checkpoint, TruncationAndTrailingBytesRejected) {
  auto bytes = encode_checkpoint(to_checkpoint(PatchDiscriminator({64, 16}, 2)));
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  EXPECT_THROW(decode_checkpoint(truncated), CheckpointError);
  auto extended = bytes;
  extended.push_back(0);
  EXPECT_THROW(decode_checkpoint(extended), CheckpointError);
  auto bad_version = bytes;
  bad_version[4] = 2;
  EXPECT_THROW(decode_checkpoint(bad_version), CheckpointError);
}

TEST(Checkpoint, ArchitectureMismatchRejected) {
  const auto ckpt = to_checkpoint(SteeringPredictor({64}, 1));
  EXPECT_THROW(generator_from_checkpoint(ckpt), CheckpointError);
  EXPECT_THROW(discriminator_from_checkpoint(ckpt), CheckpointError);
  EXPECT_NO_THROW(predictor_from_checkpoint(ckpt));
}

TEST(Checkpoint, ShapeMismatchRejected) {
  auto ckpt = to_checkpoint(TranslationGenerator({64, 8, 3}, 1));
  ckpt.tag = "translation_generator image=64 base=4 blocks=3";
  EXPECT_THROW(generator_from_checkpoint(ckpt), CheckpointError);
}

TEST(Checkpoint, MissingFileNamesPath) {
  EXPECT_THROW(load_checkpoint("/nonexistent/model.fgb"), IoError);
}

TEST(GradSuite, EveryCasePassesOnTenSeeds) {
  for (const auto& row : run_grad_check_suite(10)) {
    EXPECT_TRUE(row.passed) << row.name << " worst " << row.worst_error << " at seed " << row.worst_seed;
    EXPECT_GT(row.coordinates, 0u) << row.name;
  }
}

TEST(GradSuite, CoversOpsAndModels) {
  const auto& names = grad_check_case_names();
  for (const char* expected : {"conv2d_stride1", "conv2d_stride2", "dense", "relu", "leaky_relu", "tanh",
                               "instance_norm", "upsample_nearest2x", "predictor", "generator", "discriminator"}) {
    EXPECT_NE(std::find(names.begin(), names.end(), expected), names.end()) << expected;
  }
  EXPECT_THROW(run_grad_check_case("no_such_op", 0), ContractViolation);
}
