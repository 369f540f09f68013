#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fogbench/image.hpp"

namespace fogbench {

/// Procedural road scene description. Identical params render identical bytes.
struct SceneParams {
  std::uint64_t seed = 0;
  double curvature = 0.0;      // [-1, 1], positive bends right
  double horizon_frac = 0.5;   // (0.3, 0.7)
  double sky_jitter = 0.0;     // relative palette tints, |x| <= 0.1
  double ground_jitter = 0.0;
  double road_jitter = 0.0;
  int image_size = 64;

  /// Draws curvature uniformly from [-1, 1] plus horizon and palette jitter.
  static SceneParams sample(std::uint64_t seed, int image_size = 64);
};

struct LabeledImage {
  Image image;
  double angle = 0.0;  // radians
};

/// Ground-truth steering angle for a road bend: pi/2 * curvature.
double steering_angle_for(double curvature);

LabeledImage generate_scene(const SceneParams& params);

/// Homogeneous fog over a row-only depth map: out = in*t + airlight*(1-t),
/// t = exp(-beta*depth(row)), then a 3x3 box blur mixed in with weight 1-t.
struct FogParams {
  double beta = 0.05;
  std::array<double, 3> airlight{230.0, 230.0, 230.0};
};

/// Depth in reference-row units (image height 64): 32 from the middle row
/// upward, falling linearly to 8 at the bottom row.
double fog_depth(int row, int height);
inline constexpr double kMaxFogDepth = 32.0;

double fog_transmittance(int row, int height, double beta);

/// Scattering blend only (before the blur), as interleaved RGB doubles.
std::vector<double> apply_fog_unblurred(const Image& image, const FogParams& fog);

LabeledImage apply_fog(const LabeledImage& image, const FogParams& fog);

struct DatasetSummary {
  std::size_t count = 0;
  std::filesystem::path directory;
  double min_angle = 0.0;
  double max_angle = 0.0;
};

/// Writes images/%06d.ppm and manifest.csv (filename,steering_rad). Sample i
/// is rendered from SceneParams::sample(seed ^ i).
DatasetSummary build_dataset(std::size_t count, const std::filesystem::path& out_dir,
                             const std::optional<FogParams>& fog, std::uint64_t seed, int image_size = 64);

struct Dataset {
  std::filesystem::path root;
  std::vector<std::string> filenames;  // relative to root, as listed in the manifest
  std::vector<LabeledImage> samples;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  int image_size() const { return samples.empty() ? 0 : samples.front().image.width; }
};

Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace fogbench
