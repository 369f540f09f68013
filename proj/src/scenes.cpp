#include "fogbench/scenes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include "fogbench/rng.hpp"

namespace fogbench {

namespace {

using Rgb = std::array<double, 3>;

Rgb mix(const Rgb& a, const Rgb& b, double t) {
  return {a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t};
}

Rgb tint(const Rgb& c, double jitter) { return {c[0] * (1 + jitter), c[1] * (1 + jitter), c[2] * (1 + jitter)}; }

double coverage(double signed_distance) { return std::clamp(signed_distance + 0.5, 0.0, 1.0); }

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0))); }

}  // namespace

SceneParams SceneParams::sample(std::uint64_t seed, int image_size) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  SceneParams p;
  p.seed = seed;
  p.image_size = image_size;
  p.curvature = unit(rng);
  p.horizon_frac = 0.5 + 0.08 * unit(rng);
  p.sky_jitter = 0.08 * unit(rng);
  p.ground_jitter = 0.1 * unit(rng);
  p.road_jitter = 0.1 * unit(rng);
  return p;
}

double steering_angle_for(double curvature) { return std::numbers::pi / 2.0 * curvature; }

LabeledImage generate_scene(const SceneParams& params) {
  const int size = params.image_size;
  if (size < 16) throw ContractViolation("generate_scene: image_size must be >= 16, got " + std::to_string(size));
  if (params.curvature < -1.0 || params.curvature > 1.0) {
    throw ContractViolation("generate_scene: curvature outside [-1, 1]");
  }
  const double s = size;
  const double horizon = params.horizon_frac * s;
  const Rgb sky_top = tint({90, 140, 215}, params.sky_jitter);
  const Rgb sky_low = tint({185, 205, 230}, params.sky_jitter);
  const Rgb grass_far = tint({95, 125, 70}, params.ground_jitter);
  const Rgb grass_near = tint({60, 135, 50}, params.ground_jitter);
  const Rgb asphalt = tint({100, 100, 108}, params.road_jitter);
  const Rgb paint{240, 240, 235};

  LabeledImage out{Image(size, size), steering_angle_for(params.curvature)};
  for (int r = 0; r < size; ++r) {
    const double y = r + 0.5;
    const double below = std::clamp(r + 1.0 - horizon, 0.0, 1.0);  // fraction of the row under the horizon
    const Rgb sky = mix(sky_top, sky_low, std::clamp(y / horizon, 0.0, 1.0));
    const double v = std::clamp((y - horizon) / (s - horizon), 0.0, 1.0);  // 0 at horizon, 1 at bottom
    const Rgb grass = mix(grass_far, grass_near, v);
    const bool road_row = y > horizon;
    const double half_width = s * (0.03 + 0.42 * v);
    const double bend = s * 0.35 * (1.0 - v) * (1.0 - v);
    const double offset = params.curvature * bend;
    const double line_width = std::max(0.6, 0.03 * s * v);
    const bool dash_on = std::fmod(6.0 / (v + 0.2), 1.0) < 0.5;
    for (int c = 0; c < size; ++c) {
      Rgb color = grass;
      if (road_row) {
        // Only |dx| is used below, which keeps the render mirror-exact under curvature -> -curvature.
        const double dx = std::abs(((c + 0.5) - s / 2.0) - offset);
        color = mix(color, asphalt, coverage(half_width - dx));
        const double edge = std::min(half_width - dx, dx - (half_width - line_width));
        color = mix(color, paint, coverage(edge));
        if (dash_on) color = mix(color, paint, coverage(line_width / 2.0 - dx));
      }
      const Rgb px = mix(sky, color, below);
      for (int ch = 0; ch < 3; ++ch) out.image.at(r, c, ch) = to_byte(px[ch]);
    }
  }
  return out;
}

double fog_depth(int row, int height) {
  const double h = height;
  const double u = std::clamp((h - 1.0 - row) / (h / 2.0), 0.0, 1.0);
  return kMaxFogDepth * (0.25 + 0.75 * u);
}

double fog_transmittance(int row, int height, double beta) { return std::exp(-beta * fog_depth(row, height)); }

std::vector<double> apply_fog_unblurred(const Image& image, const FogParams& fog) {
  if (fog.beta < 0) throw ContractViolation("apply_fog: beta must be >= 0");
  std::vector<double> out(image.pixels.size());
  for (int r = 0; r < image.height; ++r) {
    const double t = fog_transmittance(r, image.height, fog.beta);
    for (int c = 0; c < image.width; ++c)
      for (int ch = 0; ch < 3; ++ch) {
        const std::size_t i = (static_cast<std::size_t>(r) * image.width + c) * 3 + ch;
        out[i] = image.pixels[i] * t + fog.airlight[ch] * (1.0 - t);
      }
  }
  return out;
}

LabeledImage apply_fog(const LabeledImage& input, const FogParams& fog) {
  const Image& img = input.image;
  const auto hazy = apply_fog_unblurred(img, fog);
  LabeledImage out{Image(img.width, img.height), input.angle};
  for (int r = 0; r < img.height; ++r) {
    const double blur_weight = 1.0 - fog_transmittance(r, img.height, fog.beta);
    for (int c = 0; c < img.width; ++c)
      for (int ch = 0; ch < 3; ++ch) {
        double acc = 0;
        int n = 0;
        for (int dr = -1; dr <= 1; ++dr)
          for (int dc = -1; dc <= 1; ++dc) {
            const int rr = r + dr, cc = c + dc;
            if (rr < 0 || cc < 0 || rr >= img.height || cc >= img.width) continue;
            acc += hazy[(static_cast<std::size_t>(rr) * img.width + cc) * 3 + ch];
            ++n;
          }
        const double self = hazy[(static_cast<std::size_t>(r) * img.width + c) * 3 + ch];
        out.image.at(r, c, ch) = to_byte((1.0 - blur_weight) * self + blur_weight * acc / n);
      }
  }
  return out;
}

namespace {

std::string image_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "images/%06zu.ppm", i);
  return buf;
}

}  // namespace

DatasetSummary build_dataset(std::size_t count, const std::filesystem::path& out_dir,
                             const std::optional<FogParams>& fog, std::uint64_t seed, int image_size) {
  if (count == 0) throw ContractViolation("build_dataset: count must be >= 1");
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  if (ec) throw IoError(out_dir / "images", "cannot create directory: " + ec.message());

  std::vector<LabeledImage> samples(count);
  auto render = [&](std::size_t i) {
    LabeledImage s = generate_scene(SceneParams::sample(seed ^ static_cast<std::uint64_t>(i), image_size));
    samples[i] = fog ? apply_fog(s, *fog) : std::move(s);
  };
  const unsigned workers = std::min<unsigned>(worker_threads(), static_cast<unsigned>(count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) render(i);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < count; i += workers) render(i);
      });
    }
  }

  DatasetSummary summary{count, out_dir, samples[0].angle, samples[0].angle};
  std::ostringstream manifest;
  manifest << "filename,steering_rad\n";
  char angle[64];
  for (std::size_t i = 0; i < count; ++i) {
    const std::string name = image_name(i);
    write_ppm(out_dir / name, samples[i].image);
    std::snprintf(angle, sizeof angle, "%.9g", samples[i].angle);
    manifest << name << ',' << angle << '\n';
    summary.min_angle = std::min(summary.min_angle, samples[i].angle);
    summary.max_angle = std::max(summary.max_angle, samples[i].angle);
  }
  const auto manifest_path = out_dir / "manifest.csv";
  std::ofstream out(manifest_path, std::ios::binary);
  if (!out) throw IoError(manifest_path, "cannot open for writing");
  out << manifest.str();
  if (!out) throw IoError(manifest_path, "write failed");
  return summary;
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.csv";
  std::ifstream in(manifest_path);
  if (!in) throw IoError(manifest_path, "cannot open dataset manifest");
  std::string line;
  if (!std::getline(in, line) || line != "filename,steering_rad") {
    throw IoError(manifest_path, "expected header 'filename,steering_rad'");
  }
  Dataset ds;
  ds.root = dir;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw IoError(manifest_path, "line " + std::to_string(line_no) + ": missing comma");
    LabeledImage s;
    try {
      s.angle = std::stod(line.substr(comma + 1));
    } catch (const std::exception&) {
      throw IoError(manifest_path, "line " + std::to_string(line_no) + ": bad angle");
    }
    if (!std::isfinite(s.angle) || std::abs(s.angle) > std::numbers::pi) {
      throw IoError(manifest_path, "line " + std::to_string(line_no) + ": angle outside [-pi, pi]");
    }
    ds.filenames.push_back(line.substr(0, comma));
    s.image = read_ppm(dir / ds.filenames.back());
    if (!ds.samples.empty() && !s.image.same_size(ds.samples.front().image)) {
      throw IoError(dir / ds.filenames.back(), "image size differs from the rest of the dataset");
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace fogbench
