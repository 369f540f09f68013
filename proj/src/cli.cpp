#include "fogbench/cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <chrono>
#include <ctime>
#include <algorithm>
#include <set>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>

#include "fogbench/evaluation.hpp"
#include "fogbench/grad_suite.hpp"
#include "fogbench/image.hpp"

namespace fogbench {

namespace {

namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string text(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}
std::string text(int v) { return std::to_string(v); }
std::string text(unsigned long v) { return std::to_string(v); }
std::string text(bool v) { return v ? "true" : "false"; }
std::string text(const std::string& v) { return v; }
template <typename T>
std::string text(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + text(v[i]);
  return s;
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

template <typename T>
struct is_vector : std::false_type {};
template <typename T>
struct is_vector<std::vector<T>> : std::true_type {};

/// Declares options on a subcommand and remembers how to print each bound
/// value for the run manifest.
class OptionBook {
 public:
  explicit OptionBook(CLI::App* app) : app_(app) {}

  template <typename T>
  CLI::Option* opt(const std::string& key, T& var, const std::string& desc) {
    entries_.emplace_back(key, [&var] { return text(var); });
    auto* o = app_->add_option("--" + key, var, desc)->capture_default_str();
    if constexpr (!is_vector<T>::value) o->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    return o;
  }

  CLI::Option* flag(const std::string& key, bool& var, const std::string& desc) {
    entries_.emplace_back(key, [&var] { return text(var); });
    return app_->add_flag("--" + key, var, desc + " (use --" + key + "=false to disable)")->capture_default_str();
  }

  std::vector<std::pair<std::string, std::string>> values() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& [k, get] : entries_) out.emplace_back(k, get());
    return out;
  }

  CLI::App* app() const { return app_; }

 private:
  CLI::App* app_;
  std::vector<std::pair<std::string, std::function<std::string()>>> entries_;
};

/// The manifest is written before any work and rewritten with end_time after.
class RunManifest {
 public:
  RunManifest(fs::path dir, std::string subcommand, std::vector<std::pair<std::string, std::string>> values)
      : path_(std::move(dir) / "run_manifest.txt"), subcommand_(std::move(subcommand)), values_(std::move(values)),
        start_(utc_now()) {
    write(std::nullopt);
  }
  void finish() { write(utc_now()); }

 private:
  void write(const std::optional<std::string>& end) const {
    fs::create_directories(path_.parent_path());
    std::ofstream out(path_);
    if (!out) throw IoError(path_, "cannot write run manifest");
    out << "subcommand=" << subcommand_ << "\n";
    out << "tool_version=" << kToolVersion << "\n";
    out << "start_time=" << start_ << "\n";
    for (const auto& [k, v] : values_) out << k << "=" << v << "\n";
    if (end) out << "end_time=" << *end << "\n";
  }

  fs::path path_;
  std::string subcommand_;
  std::vector<std::pair<std::string, std::string>> values_;
  std::string start_;
};

const std::set<std::string> kManifestOnlyKeys = {"subcommand", "tool_version", "start_time", "end_time", "config"};

Dataset load_dataset_checked(const std::string& dir) {
  auto ds = load_dataset(dir);
  if (ds.empty()) throw UsageError("dataset " + dir + " is empty");
  return ds;
}

SteeringPredictor load_predictor(const std::string& path) {
  return predictor_from_checkpoint(load_checkpoint(path));
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

// ---------------------------------------------------------------------------
// Subcommands

struct Command {
  std::unique_ptr<OptionBook> book;
  std::function<void()> validate;
  std::function<void(std::ostream&)> run;
};

void add_attack_options(OptionBook& b, AttackConfig& c) {
  b.opt("alpha", c.alpha, "weight of the regression loss, in (0, 1) [published setting 0.2]");
  b.opt("theta", c.theta, "minimum steering deviation in radians, >= 0 [published setting 0.5]");
  b.opt("lambda-cycle", c.lambda_cycle, "cycle-consistency weight [CycleGAN convention 10]");
  b.opt("lambda-identity", c.lambda_identity, "identity-loss weight [published setting 3]");
  b.opt("epochs", c.epochs, "training epochs [published setting 150]");
  b.opt("batch-size", c.batch_size, "images per domain per step");
  b.opt("lr", c.learning_rate, "Adam learning rate (betas 0.5, 0.999)");
  b.opt("seed", c.seed, "run seed; init and shuffle streams derive from it");
  b.flag("bregress", c.enable_bregress, "add the regression loss on the backward generator");
  b.flag("clamp-regress", c.clamp_regress, "clamp each regression term at zero");
  b.opt("generator-base", c.generator_base, "generator base channel count");
  b.opt("residual-blocks", c.residual_blocks, "generator residual blocks");
  b.opt("disc-base", c.discriminator_base, "discriminator base channel count");
}

struct GenData {
  std::size_t count = 0;
  std::string out;
  std::uint64_t seed = 0;
  double fog_beta = 0.0;
  std::vector<double> fog_airlight{230.0, 230.0, 230.0};
  int image_size = 64;

  void declare(OptionBook& b) {
    b.opt("count", count, "number of samples")->required();
    b.opt("out", out, "output dataset directory")->required();
    b.opt("seed", seed, "dataset seed")->required();
    b.opt("fog-beta", fog_beta, "fog density; 0 renders clean images");
    b.opt("fog-airlight", fog_airlight, "airlight colour as one value or R,G,B")->delimiter(',');
    b.opt("image-size", image_size, "square image side in pixels");
  }

  void validate() const {
    if (count == 0) throw UsageError("--count must be positive");
    if (fog_beta < 0.0) throw UsageError("--fog-beta must be >= 0");
    if (fog_airlight.size() != 1 && fog_airlight.size() != 3) throw UsageError("--fog-airlight takes 1 or 3 values");
    if (image_size < 16) throw UsageError("--image-size must be at least 16");
  }

  void run(std::ostream& out_stream) const {
    std::optional<FogParams> fog;
    if (fog_beta > 0.0) {
      FogParams f{.beta = fog_beta};
      for (int c = 0; c < 3; ++c) f.airlight[c] = fog_airlight[fog_airlight.size() == 1 ? 0 : c];
      fog = f;
    }
    const auto summary = build_dataset(count, out, fog, seed, image_size);
    out_stream << "wrote " << summary.count << " samples to " << summary.directory.string() << " (angles "
               << fixed(summary.min_angle) << " .. " << fixed(summary.max_angle) << " rad)\n";
  }
};

struct TrainSteering {
  std::string data;
  std::string out;
  SteeringTrainConfig config;

  void declare(OptionBook& b) {
    b.opt("data", data, "dataset directory")->required()->check(CLI::ExistingDirectory);
    b.opt("out", out, "run directory")->required();
    b.opt("epochs", config.epochs, "training epochs");
    b.opt("batch-size", config.batch_size, "batch size");
    b.opt("lr", config.learning_rate, "Adam learning rate (betas 0.9, 0.999)");
    b.opt("test-fraction", config.test_fraction, "held-out share of the seeded split");
    b.flag("mirror", config.mirror_augment, "augment with mirrored images and negated angles");
    b.opt("seed", config.seed, "run seed");
  }

  void validate() const { config.validate(); }

  void run(std::ostream& os) const {
    const auto ds = load_dataset_checked(data);
    auto r = train_steering(ds, config);
    save_checkpoint(fs::path(out) / "predictor.fgb", to_checkpoint(r.model));
    std::ofstream curve(fs::path(out) / "train_curve.csv");
    curve << "epoch,train_mse\n";
    for (std::size_t i = 0; i < r.epoch_mse.size(); ++i) curve << i + 1 << "," << text(r.epoch_mse[i]) << "\n";
    std::ofstream metrics(fs::path(out) / "metrics.csv");
    metrics << "metric,value\n"
            << "initial_train_mse," << text(r.initial_train_mse) << "\n"
            << "train_mse," << text(r.train_mse) << "\n"
            << "test_mse," << text(r.test_mse) << "\n"
            << "train_count," << r.split.train.size() << "\n"
            << "test_count," << r.split.test.size() << "\n";
    os << "train MSE " << fixed(r.train_mse, 5) << " rad^2, test MSE " << fixed(r.test_mse, 5) << " rad^2 ("
       << r.split.train.size() << "/" << r.split.test.size() << " samples)\n";
  }
};

struct TrainAttack {
  std::string domain_a, domain_b, predictor, out, held_out, resume;
  AttackConfig config;

  void declare(OptionBook& b) {
    b.opt("domain-a", domain_a, "clean-domain dataset directory")->required()->check(CLI::ExistingDirectory);
    b.opt("domain-b", domain_b, "foggy-domain dataset directory")->required()->check(CLI::ExistingDirectory);
    b.opt("predictor", predictor, "frozen predictor checkpoint")->required()->check(CLI::ExistingFile);
    b.opt("out", out, "run directory")->required();
    b.opt("held-out", held_out, "optional clean dataset evaluated after training")->check(CLI::ExistingDirectory);
    b.opt("resume", resume, "run directory to continue; --epochs counts extra epochs")->check(CLI::ExistingDirectory);
    add_attack_options(b, config);
  }

  void validate() const { config.validate(); }

  void run(std::ostream& os) const {
    const auto a = load_dataset_checked(domain_a);
    const auto b = load_dataset_checked(domain_b);
    const auto n = load_predictor(predictor);
    std::optional<Dataset> h;
    if (!held_out.empty()) h = load_dataset_checked(held_out);
    if (n.config().image_size != a.image_size() || b.image_size() != a.image_size()) {
      throw UsageError("image sizes differ: predictor " + std::to_string(n.config().image_size) + ", domain A " +
                       std::to_string(a.image_size()) + ", domain B " + std::to_string(b.image_size()));
    }

    std::optional<AttackModels> start;
    std::vector<TrainLogRecord> previous;
    if (!resume.empty()) {
      start = load_attack_models(resume);
      const auto expected = init_attack_models(config, a.image_size());
      if (start->g_ab.tag() != expected.g_ab.tag() || start->d_a.tag() != expected.d_a.tag()) {
        throw CheckpointError("resume checkpoints (" + start->g_ab.tag() + ", " + start->d_a.tag() +
                              ") do not match the configured architecture (" + expected.g_ab.tag() + ", " +
                              expected.d_a.tag() + ")");
      }
      previous = read_train_log(fs::path(resume) / "train_log.csv");
    }
    const int first_epoch = previous.empty() ? 1 : previous.back().epoch + 1;

    fs::create_directories(out);
    std::ofstream log(fs::path(out) / "train_log.csv");
    if (!log) throw IoError(fs::path(out) / "train_log.csv", "cannot write");
    write_log_preamble(log, config);
    for (const auto& r : previous) log << format_log_row(r) << "\n";
    log.flush();
    auto result = train_attack(a, b, n, config, std::move(start), first_epoch,
                               [&](const TrainLogRecord& rec, const AttackModels&) {
                                 log << format_log_row(rec) << "\n";
                                 log.flush();
                                 os << "epoch " << rec.epoch << " total " << fixed(rec.total) << " regress "
                                    << fixed(rec.regress) << " deviation " << fixed(rec.mean_deviation) << "\n";
                                 return true;
                               });
    save_attack_models(out, result.models);
    if (h) {
      // Relative id so a replay into another directory writes the same report.
      const auto report =
          deviation_report(generator_transform(result.models.g_ab, "g_ab.fgb"), n, *h, held_out, predictor);
      write_report(fs::path(out) / "report", report);
      os << report_summary(report);
    }
  }
};

struct Eval {
  std::string generator = "identity", predictor, data, out;

  void declare(OptionBook& b) {
    b.opt("generator", generator, "generator checkpoint, or 'identity'");
    b.opt("predictor", predictor, "predictor checkpoint")->required()->check(CLI::ExistingFile);
    b.opt("data", data, "clean held-out dataset directory")->required()->check(CLI::ExistingDirectory);
    b.opt("out", out, "report directory")->required();
  }

  void validate() const {
    if (generator != "identity" && !fs::is_regular_file(generator)) {
      throw UsageError("--generator: no such file '" + generator + "' (or use 'identity')");
    }
  }

  void run(std::ostream& os) const {
    const auto n = load_predictor(predictor);
    const auto ds = load_dataset_checked(data);
    const auto phi = generator == "identity"
                         ? identity_transform()
                         : generator_transform(generator_from_checkpoint(load_checkpoint(generator)), generator);
    const auto report = deviation_report(phi, n, ds, data, predictor);
    write_report(out, report);
    os << report_summary(report);
  }
};

struct Compare {
  std::string plain, regress, predictor, data, out;

  void declare(OptionBook& b) {
    b.opt("plain", plain, "generator trained without the regression loss")->required()->check(CLI::ExistingFile);
    b.opt("regress", regress, "generator trained with the regression loss")->required()->check(CLI::ExistingFile);
    b.opt("predictor", predictor, "predictor checkpoint")->required()->check(CLI::ExistingFile);
    b.opt("data", data, "clean held-out dataset directory")->required()->check(CLI::ExistingDirectory);
    b.opt("out", out, "report directory")->required();
  }

  void validate() const {}

  void run(std::ostream& os) const {
    const auto n = load_predictor(predictor);
    const auto ds = load_dataset_checked(data);
    const auto report =
        compare_generators(generator_transform(generator_from_checkpoint(load_checkpoint(plain)), plain),
                           generator_transform(generator_from_checkpoint(load_checkpoint(regress)), regress), n, ds,
                           data, predictor);
    write_report(out, report);
    os << report_summary(report);
  }
};

struct Ablate {
  std::string param = "alpha";
  std::vector<double> values{0.2, 0.5, 0.8};
  std::string domain_a, domain_b, held_out, predictor, out;
  SweepOptions sweep;
  std::size_t pairs = 8;
  AttackConfig config;

  void declare(OptionBook& b) {
    b.opt("param", param, "alpha, theta, or bregress (paired runs with and without the backward term)")
        ->check(CLI::IsMember({"alpha", "theta", "bregress"}));
    b.opt("values", values, "comma-separated values [published sweeps: alpha 0.2,0.5,0.8; theta 0,0.5,1]")
        ->delimiter(',');
    b.opt("domain-a", domain_a, "clean-domain dataset directory")->required()->check(CLI::ExistingDirectory);
    b.opt("domain-b", domain_b, "foggy-domain dataset directory")->required()->check(CLI::ExistingDirectory);
    b.opt("held-out", held_out, "clean held-out dataset directory")->required()->check(CLI::ExistingDirectory);
    b.opt("predictor", predictor, "frozen predictor checkpoint")->required()->check(CLI::ExistingFile);
    b.opt("out", out, "sweep directory")->required();
    b.opt("budget", sweep.budget_epochs, "epoch budget per entry");
    b.flag("stop-at-threshold", sweep.stop_at_threshold, "end an entry once its mean deviation reaches theta");
    b.opt("pairs", pairs, "clean|foggy image pairs dumped by the bregress experiment");
    add_attack_options(b, config);
  }

  void validate() const {
    config.validate();
    if (sweep.budget_epochs < 1) throw UsageError("--budget must be at least 1");
    if (param != "bregress") {
      if (values.empty()) throw UsageError("--values is empty");
      const auto p = parse_sweep_param(param);
      for (double v : values) {
        AttackConfig c = config;
        (p == SweepParam::kAlpha ? c.alpha : c.theta) = v;
        try {
          c.validate();
        } catch (const ContractViolation& e) {
          throw UsageError("--values: " + text(v) + " is not a valid " + param + ": " + e.what());
        }
      }
    }
  }

  void run(std::ostream& os) const {
    const auto a = load_dataset_checked(domain_a);
    const auto b = load_dataset_checked(domain_b);
    const auto h = load_dataset_checked(held_out);
    const auto n = load_predictor(predictor);
    const AttackData data{&a, &b, &h, &n};

    if (param == "bregress") {
      AttackConfig c = config;
      c.epochs = sweep.budget_epochs;
      const auto r = backward_regress_experiment(c, data, out, pairs);
      os << report_summary(r.report);
      os << "total-loss variance over the last " << r.with_bregress.epochs << " epochs: with backward term "
         << text(r.with_bregress.variance) << ", without " << text(r.baseline.variance) << "\n";
      return;
    }
    const auto result = ablation_sweep(parse_sweep_param(param), values, config, data, sweep, fs::path(out));
    write_sweep_summary(fs::path(out) / "sweep.csv", result);
    for (const auto& e : result.entries) {
      os << param << "=" << text(e.value) << ": deviation " << fixed(e.report.deviation.mean) << " +/- "
         << fixed(e.report.deviation.std) << ", SSIM " << fixed(e.report.ssim.mean) << ", epochs to threshold "
         << (e.epochs_to_threshold ? std::to_string(*e.epochs_to_threshold) : "none")
         << (e.diverged ? " (diverged)" : "") << "\n";
    }
  }
};

struct Defend {
  std::string predictor, generator, train, test, out;
  DefenseConfig config;

  void declare(OptionBook& b) {
    b.opt("predictor", predictor, "original predictor checkpoint")->required()->check(CLI::ExistingFile);
    b.opt("generator", generator, "fixed attack generator checkpoint")->required()->check(CLI::ExistingFile);
    b.opt("train", train, "clean training dataset directory")->required()->check(CLI::ExistingDirectory);
    b.opt("test", test, "clean test dataset directory")->required()->check(CLI::ExistingDirectory);
    b.opt("out", out, "run directory")->required();
    b.opt("epochs", config.fine_tune.epochs, "fine-tuning epochs");
    b.opt("batch-size", config.fine_tune.batch_size, "fine-tuning batch size");
    b.opt("lr", config.fine_tune.learning_rate, "fine-tuning learning rate");
    b.flag("mirror", config.fine_tune.mirror_augment, "augment with mirrored images and negated angles");
    b.opt("seed", config.fine_tune.seed, "fine-tuning shuffle seed");
    b.flag("control", config.run_control, "also fine-tune on clean images as a control");
  }

  void validate() const { config.fine_tune.validate(); }

  void run(std::ostream& os) const {
    const auto n = load_predictor(predictor);
    const auto g = generator_from_checkpoint(load_checkpoint(generator));
    const auto tr = load_dataset_checked(train);
    const auto te = load_dataset_checked(test);
    const auto r = defense(n, g, tr, te, config);
    write_report(fs::path(out) / "before", r.before);
    write_report(fs::path(out) / "after", r.after);
    if (r.control) write_report(fs::path(out) / "control", *r.control);
    save_checkpoint(fs::path(out) / "predictor_defended.fgb", to_checkpoint(r.defended));
    std::ofstream summary(fs::path(out) / "defense.csv");
    summary << "phase,deviation_mean,deviation_std,n\n";
    summary << "before," << text(r.before.deviation.mean) << "," << text(r.before.deviation.std) << "," << r.before.n
            << "\n";
    summary << "after," << text(r.after.deviation.mean) << "," << text(r.after.deviation.std) << "," << r.after.n
            << "\n";
    if (r.control) {
      summary << "control," << text(r.control->deviation.mean) << "," << text(r.control->deviation.std) << ","
              << r.control->n << "\n";
    }
    os << "deviation before " << fixed(r.before.deviation.mean) << " +/- " << fixed(r.before.deviation.std)
       << ", after " << fixed(r.after.deviation.mean) << " +/- " << fixed(r.after.deviation.std);
    if (r.control) os << ", clean-only control " << fixed(r.control->deviation.mean);
    os << " rad\n";
  }
};

struct GradCheck {
  std::size_t seeds = 100;
  std::uint64_t first_seed = 0;
  std::vector<std::string> cases;
  std::string out;
  bool failed = false;

  void declare(OptionBook& b) {
    b.opt("seeds", seeds, "random seeds per case");
    b.opt("first-seed", first_seed, "first seed");
    b.opt("case", cases, "restrict to these cases (repeatable)");
    b.opt("out", out, "optional directory for grad_check.csv");
  }

  void validate() const {
    if (seeds == 0) throw UsageError("--seeds must be positive");
    const auto& known = grad_check_case_names();
    for (const auto& c : cases) {
      if (std::find(known.begin(), known.end(), c) == known.end()) throw UsageError("unknown grad-check case " + c);
    }
  }

  void run(std::ostream& os) {
    const auto rows = run_grad_check_suite(seeds, first_seed, cases);
    std::unique_ptr<std::ofstream> csv;
    if (!out.empty()) {
      csv = std::make_unique<std::ofstream>(fs::path(out) / "grad_check.csv");
      *csv << "case,seeds,worst_error,worst_seed,coordinates,skipped,passed\n";
    }
    for (const auto& r : rows) {
      char line[160];
      std::snprintf(line, sizeof line, "%-22s %s  worst %.3g (seed %llu)  %zu coords, %zu skipped\n", r.name.c_str(),
                    r.passed ? "ok  " : "FAIL", r.worst_error, static_cast<unsigned long long>(r.worst_seed),
                    r.coordinates, r.skipped);
      os << line;
      if (csv) {
        *csv << r.name << "," << r.seeds << "," << text(r.worst_error) << "," << r.worst_seed << "," << r.coordinates
             << "," << r.skipped << "," << text(r.passed) << "\n";
      }
      failed = failed || !r.passed;
    }
  }
};

/// Expands --config: entries from the file become --key=value arguments
/// unless the command line already sets that key.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::optional<std::string> config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a path");
      config_path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].starts_with("--config=")) {
      config_path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (!config_path) return args;
  const auto kv = read_key_values(*config_path);

  const bool has_subcommand = !args.empty() && !args.front().starts_with("-");
  if (!has_subcommand) {
    auto it = kv.find("subcommand");
    if (it == kv.end()) throw UsageError("no subcommand given and " + *config_path + " names none");
    args.insert(args.begin(), it->second);
  }
  auto given = [&](const std::string& key) {
    const std::string flag = "--" + key;
    for (const auto& a : args) {
      if (a == flag || a.starts_with(flag + "=")) return true;
    }
    return false;
  };
  for (const auto& [key, value] : kv) {
    if (kManifestOnlyKeys.count(key) || value.empty() || given(key)) continue;
    args.push_back("--" + key + "=" + value);
  }
  return args;
}

}  // namespace

std::map<std::string, std::string> read_key_values(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open config");
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw IoError(path, "line " + std::to_string(lineno) + " is not key=value: " + line);
    }
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

int run_cli(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"fogbench: adversarial fog attacks on a steering-angle regressor", "fogbench"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  app.footer(
      "Every run writes run_manifest.txt into its output directory; pass it back with --config to repeat the run.\n"
      "Exit codes: 0 success, 1 runtime failure, 2 usage or validation error. FOGBENCH_THREADS caps workers.");

  GenData gen_data;
  TrainSteering train_steering_cmd;
  TrainAttack train_attack_cmd;
  Eval eval;
  Compare compare;
  Ablate ablate;
  Defend defend;
  GradCheck grad_check;

  std::map<std::string, Command> commands;
  auto add = [&](const std::string& name, const std::string& desc, auto& cmd) {
    auto* sub = app.add_subcommand(name, desc);
    sub->add_option("--config", "key=value file (e.g. a run manifest); flags given here override it");
    Command c;
    c.book = std::make_unique<OptionBook>(sub);
    cmd.declare(*c.book);
    c.validate = [&cmd] { cmd.validate(); };
    c.run = [&cmd](std::ostream& os) { cmd.run(os); };
    commands.emplace(name, std::move(c));
  };
  add("gen-data", "render a synthetic road dataset", gen_data);
  add("train-steering", "train the steering-angle predictor", train_steering_cmd);
  add("train-attack", "train the fog generator against a frozen predictor", train_attack_cmd);
  add("eval", "deviation and image-quality report for one generator", eval);
  add("compare", "compare a plain and a regress-trained generator", compare);
  add("ablate", "alpha / theta sweeps and the backward-regression experiment", ablate);
  add("defend", "fine-tune the predictor on translated images and re-measure", defend);
  add("grad-check", "finite-difference gradient checks over every op and model", grad_check);

  std::vector<std::string> args;
  try {
    args = expand_config(raw_args);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForVersion& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  const auto* sub = app.get_subcommands().front();
  auto& cmd = commands.at(sub->get_name());
  std::string out_dir;
  for (const auto& [k, v] : cmd.book->values()) {
    if (k == "out") out_dir = v;
  }
  try {
    cmd.validate();
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ContractViolation& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  try {
    std::optional<RunManifest> manifest;
    if (!out_dir.empty()) manifest.emplace(out_dir, sub->get_name(), cmd.book->values());
    cmd.run(out);
    if (manifest) manifest->finish();
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ContractViolation& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  if (sub->get_name() == "grad-check" && grad_check.failed) {
    err << "error: gradient check failed\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace fogbench
