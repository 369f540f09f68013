#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "fogbench/tensor.hpp"

namespace fogbench {

/// File-system failure; what() names the offending path.
class IoError : public std::runtime_error {
 public:
  IoError(const std::filesystem::path& path, const std::string& what)
      : std::runtime_error(path.string() + ": " + what), path_(path) {}
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// 8-bit interleaved RGB raster, row-major.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::uint8_t& at(int row, int col, int ch) { return pixels[(static_cast<std::size_t>(row) * width + col) * 3 + ch]; }
  std::uint8_t at(int row, int col, int ch) const {
    return pixels[(static_cast<std::size_t>(row) * width + col) * 3 + ch];
  }
  bool same_size(const Image& o) const { return width == o.width && height == o.height; }
  friend bool operator==(const Image&, const Image&) = default;
};

Image mirror_horizontally(const Image& image);

/// Binary PPM (P6, maxval 255).
void write_ppm(const std::filesystem::path& path, const Image& image);
Image read_ppm(const std::filesystem::path& path);

/// Stacks images into an N x 3 x H x W tensor scaled to [-1, 1].
Tensor images_to_tensor(const std::vector<const Image*>& images);
Tensor image_to_tensor(const Image& image);

/// Inverse of images_to_tensor for sample `index`: clamps and rounds to 8 bits.
Image tensor_to_image(const Tensor& batch, std::size_t index = 0);

/// Places two equal-height images side by side.
Image side_by_side(const Image& left, const Image& right);

}  // namespace fogbench
