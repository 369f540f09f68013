// End-to-end acceptance run. Prints one PASS/FAIL line per criterion on
// stdout (progress goes to stderr) and exits nonzero if any criterion fails.
//
//   fogbench_acceptance [work_dir] [--only 1,3,...]
//
// The PASS/FAIL lines are also written to work_dir/summary.txt.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fogbench/checkpoint.hpp"
#include "fogbench/cli.hpp"
#include "fogbench/evaluation.hpp"
#include "fogbench/grad_suite.hpp"
#include "fogbench/iqa.hpp"
#include "fogbench/losses.hpp"
#include "fogbench/trainer.hpp"
#include "oracles.hpp"

using namespace fogbench;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// 1. Gradient correctness

Outcome gradients() {
  const auto t0 = Clock::now();
  const auto rows = run_grad_check_suite(100);
  const double secs = seconds_since(t0);
  std::size_t failed = 0;
  double worst = 0;
  std::string worst_name;
  for (const auto& r : rows) {
    if (!r.passed) ++failed;
    if (r.worst_error > worst) {
      worst = r.worst_error;
      worst_name = r.name;
    }
  }
  return {failed == 0 && secs < 60.0,
          fmt("%zu cases x 100 seeds, %zu failed, worst rel error %.2e (%s), %.1fs", rows.size(), failed, worst,
              worst_name.c_str(), secs)};
}

// ---------------------------------------------------------------------------
// 2. Loss arithmetic on hand-computed examples

using D = BasicTensor<double>;

D dvec(std::vector<double> v) {
  const auto n = v.size();
  return D({n}, std::move(v));
}
D dscalar(double v) { return D({1}, {v}); }

Outcome losses() {
  std::vector<std::string> bad;
  auto expect = [&](const std::string& what, double got, double want) {
    if (got != want) bad.push_back(fmt("%s=%.17g want %.17g", what.c_str(), got, want));
  };
  NoGradGuard guard;

  expect("regress(0.3,0.3,0.5)", regress_loss(0.3, 0.3, 0.5), 0.5);
  expect("regress(0.75,0.25,0.5)", regress_loss(0.75, 0.25, 0.5), 0.0);
  expect("regress(1.2,0,0.5)", regress_loss(1.2, 0.0, 0.5), -0.7);
  expect("regress batch", regress_loss(dvec({0.3, 1.2}), dvec({0.3, 0.0}), 0.5).item(), (0.5 + -0.7) / 2);

  const D zeros({1, 3, 2, 2}, std::vector<double>(12, 0.0));
  const D halves({1, 3, 2, 2}, std::vector<double>(12, 0.5));
  expect("cycle", cycle_loss(zeros, halves, zeros, zeros, 10.0).item(), 5.0);
  expect("identity", identity_loss(zeros, halves, zeros, halves, 3.0).item(), 3.0);

  const D half_map({1, 1, 2, 2}, std::vector<double>(4, 0.5));
  const D ones_map({1, 1, 2, 2}, std::vector<double>(4, 1.0));
  const D zero_map({1, 1, 2, 2}, std::vector<double>(4, 0.0));
  expect("gan disc(0.5,0.5)", gan_discriminator_loss(half_map, half_map).item(), 0.5);
  expect("gan gen(0.5)", gan_generator_loss(half_map).item(), 0.25);
  expect("gan disc perfect", gan_discriminator_loss(ones_map, zero_map).item(), 0.0);
  expect("gan gen fooled", gan_generator_loss(ones_map).item(), 0.0);

  const LossWeights w;  // alpha 0.2
  GeneratorLossParts<double> parts{dscalar(0.5), dscalar(0.5), dscalar(0.25), dscalar(0.25), std::nullopt};
  expect("total", total_generator_loss(parts, w).total.item(), 0.9);

  // Linearity of the combined loss in its parts, on random values.
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  double worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    LossWeights lw;
    lw.alpha = std::uniform_real_distribution<double>(0.01, 0.99)(rng);
    const double r = u(rng), c = std::abs(u(rng)), i = std::abs(u(rng)), g = std::abs(u(rng)), b = u(rng);
    const bool with_b = trial % 2 == 0;
    GeneratorLossParts<double> p{dscalar(r), dscalar(c), dscalar(i), dscalar(g),
                                 with_b ? std::optional<D>(dscalar(b)) : std::nullopt};
    const double got = total_generator_loss(p, lw).total.item();
    const double want = (1 - lw.alpha) * (c + i + g) + lw.alpha * (r + (with_b ? b : 0.0));
    worst = std::max(worst, std::abs(got - want));
  }
  if (worst > 1e-6) bad.push_back(fmt("linearity error %.2e", worst));

  std::string detail = bad.empty() ? fmt("13 hand examples exact, linearity max error %.1e", worst) : bad.front();
  return {bad.empty(), detail};
}

// ---------------------------------------------------------------------------
// 3. Image-quality metrics against brute-force oracles

Image random_image(std::mt19937_64& rng, int size) {
  Image im(size, size);
  std::uniform_int_distribution<int> byte(0, 255);
  for (auto& v : im.pixels) v = static_cast<std::uint8_t>(byte(rng));
  return im;
}

Outcome image_quality() {
  std::mt19937_64 rng(23);
  double worst_ssim = 0, worst_mse = 0, worst_psnr = 0;
  for (int trial = 0; trial < 50; ++trial) {
    Image a = random_image(rng, 16), b = a;
    // Mix correlated and independent pairs.
    std::uniform_int_distribution<int> noise(-40, 40);
    for (auto& v : b.pixels) v = static_cast<std::uint8_t>(std::clamp(int(v) + noise(rng), 0, 255));
    if (trial % 5 == 0) b = random_image(rng, 16);
    worst_ssim = std::max(worst_ssim, std::abs(ssim(a, b) - oracle::naive_ssim(a, b)));
    const double m = oracle::naive_mse(a, b);
    worst_mse = std::max(worst_mse, std::abs(mse(a, b) - m));
    worst_psnr = std::max(worst_psnr, std::abs(psnr(a, b) - 10 * std::log10(255.0 * 255.0 / m)));
  }
  Image gray(16, 16), light(16, 16);
  std::fill(gray.pixels.begin(), gray.pixels.end(), std::uint8_t{100});
  std::fill(light.pixels.begin(), light.pixels.end(), std::uint8_t{110});
  const double constant = ssim(gray, light);
  const bool pass = worst_ssim <= 1e-6 && worst_mse <= 1e-6 && worst_psnr <= 1e-6 &&
                    std::abs(constant - 0.99548) <= 1e-4;
  return {pass, fmt("50 pairs: max |dSSIM| %.1e, |dMSE| %.1e, |dPSNR| %.1e; constant-pair SSIM %.5f", worst_ssim,
                    worst_mse, worst_psnr, constant)};
}

// ---------------------------------------------------------------------------
// Shared data for 4-7

struct Shared {
  fs::path work;
  Dataset steer, a, b, h;
  std::optional<SteeringPredictor> predictor;
  std::optional<AttackResult> attack;  // default configuration (criterion 5)
  double attack_seconds = 0;
  std::optional<EvalReport> attack_report;

  AttackData data() const { return {&a, &b, &h, &*predictor}; }
};

Dataset make(const fs::path& dir, std::size_t n, std::optional<FogParams> fog, std::uint64_t seed) {
  build_dataset(n, dir, fog, seed);
  return load_dataset(dir);
}

void ensure_predictor(Shared& s) {
  if (s.predictor) return;
  s.steer = make(s.work / "data/steer", 500, std::nullopt, 7);
  SteeringTrainConfig c;
  c.seed = 1;
  s.predictor = train_steering(s.steer, c).model;
}

// 4. Steering predictor quality and speed
Outcome predictor_quality(Shared& s) {
  s.steer = make(s.work / "data/steer", 500, std::nullopt, 7);
  SteeringTrainConfig c;
  c.seed = 1;
  const auto t0 = Clock::now();
  auto r = train_steering(s.steer, c);
  const double secs = seconds_since(t0);
  s.predictor = r.model;
  save_checkpoint(s.work / "predictor.fgb", to_checkpoint(r.model));
  return {r.test_mse < 0.05 && secs < 300,
          fmt("500 samples, 30 epochs: test MSE %.5f rad^2 (train %.5f), %.1fs", r.test_mse, r.train_mse, secs)};
}

void ensure_domains(Shared& s) {
  if (!s.a.empty()) return;
  s.a = make(s.work / "data/domain_a", 256, std::nullopt, 101);
  s.b = make(s.work / "data/domain_b", 256, FogParams{}, 202);
  s.h = make(s.work / "data/held_out", 64, std::nullopt, 303);
}

// 5. Default attack
Outcome attack_effect(Shared& s) {
  ensure_predictor(s);
  ensure_domains(s);
  AttackConfig c;
  c.seed = 5;
  const auto t0 = Clock::now();
  s.attack = run_attack(s.data(), c, s.work / "attack_default", [](const TrainLogRecord& r, const AttackModels&) {
    if (r.epoch % 10 == 0) std::cerr << "  attack epoch " << r.epoch << " deviation " << r.mean_deviation << "\n";
    return true;
  });
  s.attack_seconds = seconds_since(t0);
  s.attack_report = deviation_report(generator_transform(s.attack->models.g_ab, "g_ab"), *s.predictor, s.h,
                                     "held_out", "predictor");
  write_report(s.work / "attack_default/report", *s.attack_report);
  const auto& r = *s.attack_report;
  return {r.deviation.mean >= 0.25 && r.ssim.mean >= 0.3 && s.attack_seconds < 1800,
          fmt("held-out deviation %.3f +/- %.3f rad, SSIM %.3f, PSNR %.2f dB, %d epochs in %.0fs", r.deviation.mean,
              r.deviation.std, r.ssim.mean, r.psnr.mean, static_cast<int>(s.attack->log.size()), s.attack_seconds)};
}

std::optional<int> first_epoch_reaching(const std::vector<TrainLogRecord>& log, double threshold) {
  for (const auto& r : log)
    if (r.mean_deviation >= threshold) return r.epoch;
  return std::nullopt;
}

// 6. Ablation directions
Outcome ablations(Shared& s) {
  if (!s.attack) attack_effect(s);
  const auto t0 = Clock::now();
  AttackConfig base;
  base.seed = 5;
  const auto data = s.data();

  SweepOptions full;
  full.budget_epochs = 150;
  const auto alpha = ablation_sweep(SweepParam::kAlpha, {0.8}, base, data, full, s.work / "ablate_alpha");
  const double ssim_02 = s.attack_report->ssim.mean, ssim_08 = alpha.entries[0].report.ssim.mean;
  const bool alpha_ok = ssim_08 <= ssim_02;

  // theta = 0 leaves regress = -deviation, negative once the output moves at all.
  SweepOptions shortrun;
  shortrun.budget_epochs = 20;
  const auto theta0 = ablation_sweep(SweepParam::kTheta, {0.0}, base, data, shortrun, s.work / "ablate_theta0");
  const double final_regress = theta0.entries[0].log.back().regress;
  const bool theta0_ok = final_regress < 0;

  SweepOptions until;
  until.budget_epochs = 150;
  until.stop_at_threshold = true;
  const auto theta1 = ablation_sweep(SweepParam::kTheta, {1.0}, base, data, until, s.work / "ablate_theta1");
  const auto e1 = theta1.entries[0].epochs_to_threshold;
  const auto e05 = first_epoch_reaching(s.attack->log, 0.25);
  const bool theta1_ok = e1 && e05 && *e1 >= *e05;

  const double secs = s.attack_seconds + seconds_since(t0);
  auto opt = [](const std::optional<int>& v) { return v ? std::to_string(*v) : std::string("never"); };
  return {alpha_ok && theta0_ok && theta1_ok && secs < 5400,
          fmt("SSIM alpha0.8 %.3f <= alpha0.2 %.3f: %s; theta0 final regress %.3f < 0: %s; epochs to threshold "
              "theta1 %s >= theta0.5 %s: %s; %.0fs",
              ssim_08, ssim_02, alpha_ok ? "yes" : "no", final_regress, theta0_ok ? "yes" : "no", opt(e1).c_str(),
              opt(e05).c_str(), theta1_ok ? "yes" : "no", secs)};
}

// 7. Defense
Outcome defense_effect(Shared& s) {
  if (!s.attack) attack_effect(s);
  const auto r = defense(*s.predictor, s.attack->models.g_ab, s.a, s.h, DefenseConfig{});
  write_report(s.work / "defense/before", r.before);
  write_report(s.work / "defense/after", r.after);
  write_report(s.work / "defense/control", *r.control);
  const double before = r.before.deviation.mean, after = r.after.deviation.mean,
               control = r.control->deviation.mean;
  const bool pass = after <= 0.5 * before && std::abs(control - before) < 0.2 * before;
  return {pass, fmt("deviation before %.3f, after %.3f (ratio %.2f), clean-only control %.3f", before, after,
                    after / before, control)};
}

// ---------------------------------------------------------------------------
// 8. Determinism and formats

// train_log.csv with the wall-clock column removed.
std::string strip_seconds(const std::string& log) {
  std::istringstream in(log);
  std::string line, out;
  int col = -1;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') {
      out += line + "\n";
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ls(line);
    for (std::string f; std::getline(ls, f, ',');) fields.push_back(f);
    if (col < 0) col = static_cast<int>(std::find(fields.begin(), fields.end(), "seconds") - fields.begin());
    if (col < static_cast<int>(fields.size())) fields.erase(fields.begin() + col);
    for (std::size_t i = 0; i < fields.size(); ++i) out += (i ? "," : "") + fields[i];
    out += "\n";
  }
  return out;
}

// Every file under `a` has a byte-identical twin under `b`, and vice versa.
std::vector<std::string> tree_differences(const fs::path& a, const fs::path& b) {
  std::set<std::string> names;
  for (const auto& root : {a, b})
    for (const auto& e : fs::recursive_directory_iterator(root))
      if (e.is_regular_file()) names.insert(fs::relative(e.path(), root).generic_string());
  std::vector<std::string> diffs;
  for (const auto& n : names) {
    if (n == "run_manifest.txt") continue;
    if (!fs::exists(a / n) || !fs::exists(b / n)) {
      diffs.push_back(n + " (missing)");
      continue;
    }
    auto x = slurp(a / n), y = slurp(b / n);
    if (fs::path(n).filename() == "train_log.csv") {
      x = strip_seconds(x);
      y = strip_seconds(y);
    }
    if (x != y) diffs.push_back(n);
  }
  return diffs;
}

Outcome determinism(Shared& s) {
  const fs::path root = s.work / "determinism";
  fs::remove_all(root);
  std::ostringstream sink;
  std::vector<std::string> problems;
  auto cli = [&](std::vector<std::string> args) {
    if (run_cli(args, sink, sink) != kExitOk) problems.push_back("command failed: " + args[0] + " " + sink.str());
  };
  auto p = [&](const std::string& rel) { return (root / rel).string(); };

  cli({"gen-data", "--count", "40", "--seed", "11", "--image-size", "32", "--out", p("a")});
  cli({"gen-data", "--count", "16", "--seed", "12", "--image-size", "32", "--fog-beta", "0.05", "--out", p("b")});
  cli({"gen-data", "--count", "8", "--seed", "13", "--image-size", "32", "--out", p("h")});
  cli({"train-steering", "--data", p("a"), "--epochs", "2", "--seed", "3", "--out", p("pred")});
  cli({"train-attack", "--domain-a", p("a"), "--domain-b", p("b"), "--held-out", p("h"), "--predictor",
       p("pred/predictor.fgb"), "--epochs", "2", "--generator-base", "4", "--residual-blocks", "1", "--disc-base",
       "4", "--seed", "9", "--out", p("attack")});
  cli({"eval", "--generator", p("attack/g_ab.fgb"), "--predictor", p("pred/predictor.fgb"), "--data", p("h"),
       "--out", p("eval")});
  if (!problems.empty()) return {false, problems.front()};

  std::size_t files = 0;
  for (const std::string run : {"a", "b", "h", "pred", "attack", "eval"}) {
    cli({"--config", p(run + "/run_manifest.txt"), "--out", p(run + "_replay")});
    for (const auto& d : tree_differences(p(run), p(run + "_replay"))) problems.push_back(run + "/" + d);
    for (const auto& e : fs::recursive_directory_iterator(p(run))) files += e.is_regular_file();
  }

  // Checkpoint round trips, bit for bit.
  std::size_t checkpoints = 0;
  for (const std::string f : {"pred/predictor.fgb", "attack/g_ab.fgb", "attack/g_ba.fgb", "attack/d_a.fgb",
                              "attack/d_b.fgb"}) {
    const auto bytes = slurp(p(f));
    const auto re = encode_checkpoint(load_checkpoint(p(f)));
    if (std::string(re.begin(), re.end()) != bytes) problems.push_back(f + " does not re-encode identically");
    ++checkpoints;
  }
  {
    const auto g = generator_from_checkpoint(load_checkpoint(p("attack/g_ab.fgb")));
    save_checkpoint(p("g_copy.fgb"), to_checkpoint(g));
    if (slurp(p("g_copy.fgb")) != slurp(p("attack/g_ab.fgb"))) problems.push_back("generator load/save differs");
  }

  // Corruptions that must be rejected with a named defect.
  const auto good = slurp(p("pred/predictor.fgb"));
  std::vector<std::pair<std::string, std::string>> corrupt;
  {
    auto x = good;
    x[0] = 'X';
    corrupt.emplace_back("magic", x);
  }
  {
    auto x = good;
    x[4] = 2;
    corrupt.emplace_back("version", x);
  }
  corrupt.emplace_back("truncated", good.substr(0, good.size() - 3));
  corrupt.emplace_back("trailing", good + "xx");
  corrupt.emplace_back("empty", "");
  std::size_t rejected = 0;
  for (const auto& [name, bytes] : corrupt) {
    try {
      decode_checkpoint(std::vector<std::uint8_t>(bytes.begin(), bytes.end()));
      problems.push_back("accepted corrupted checkpoint (" + name + ")");
    } catch (const CheckpointError&) {
      ++rejected;
    }
  }
  try {
    generator_from_checkpoint(load_checkpoint(p("pred/predictor.fgb")));
    problems.push_back("loaded a predictor checkpoint as a generator");
  } catch (const CheckpointError&) {
    ++rejected;
  }

  if (!problems.empty()) return {false, problems.front() + fmt(" (%zu problems)", problems.size())};
  return {true, fmt("6 CLI runs replayed from manifests, %zu files identical; %zu checkpoints bit-exact; %zu "
                    "corruptions rejected",
                    files, checkpoints, rejected)};
}

}  // namespace

int main(int argc, char** argv) {
  fs::path work = fs::temp_directory_path() / "fogbench_acceptance";
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string t; std::getline(ss, t, ',');) only.insert(std::stoi(t));
    } else {
      work = arg;
    }
  }
  fs::create_directories(work);
  Shared shared;
  shared.work = work;

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradients},
      {"loss arithmetic", losses},
      {"image-quality metrics", image_quality},
      {"steering predictor quality", [&] { return predictor_quality(shared); }},
      {"attack effect", [&] { return attack_effect(shared); }},
      {"ablation directions", [&] { return ablations(shared); }},
      {"defense", [&] { return defense_effect(shared); }},
      {"determinism and formats", [&] { return determinism(shared); }},
  };

  // The same lines also go to summary.txt, since ctest hides output of passing tests.
  std::ofstream summary(work / "summary.txt");
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    std::cerr << "running criterion " << id << " (" << criteria[i].first << ")\n";
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    const std::string line = (o.pass ? "PASS " : "FAIL ") + std::to_string(id) + " " + criteria[i].first + ": " + o.detail;
    std::cout << line << std::endl;
    summary << line << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
