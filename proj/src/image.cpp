#include "fogbench/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

namespace fogbench {

Image mirror_horizontally(const Image& image) {
  Image out(image.width, image.height);
  for (int r = 0; r < image.height; ++r)
    for (int c = 0; c < image.width; ++c)
      for (int ch = 0; ch < 3; ++ch) out.at(r, c, ch) = image.at(r, image.width - 1 - c, ch);
  return out;
}

void write_ppm(const std::filesystem::path& path, const Image& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path, "cannot open for writing");
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw IoError(path, "write failed");
}

namespace {

// Next header token, skipping whitespace and '#' comments.
std::string ppm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

}  // namespace

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open for reading");
  if (ppm_token(in) != "P6") throw IoError(path, "not a binary PPM (P6)");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(ppm_token(in));
    h = std::stoi(ppm_token(in));
    maxval = std::stoi(ppm_token(in));
  } catch (const std::exception&) {
    throw IoError(path, "malformed PPM header");
  }
  if (w <= 0 || h <= 0 || maxval != 255) throw IoError(path, "unsupported PPM geometry or maxval");
  Image image(w, h);
  in.read(reinterpret_cast<char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(image.pixels.size())) throw IoError(path, "truncated pixel data");
  return image;
}

Tensor images_to_tensor(const std::vector<const Image*>& images) {
  if (images.empty()) throw ContractViolation("images_to_tensor: empty batch");
  const int w = images.front()->width, h = images.front()->height;
  const std::size_t plane = static_cast<std::size_t>(w) * h;
  std::vector<float> data(images.size() * 3 * plane);
  for (std::size_t n = 0; n < images.size(); ++n) {
    const Image& img = *images[n];
    if (img.width != w || img.height != h) throw ContractViolation("images_to_tensor: mixed image sizes in batch");
    for (int ch = 0; ch < 3; ++ch)
      for (std::size_t p = 0; p < plane; ++p)
        data[(n * 3 + ch) * plane + p] = static_cast<float>(img.pixels[p * 3 + ch]) / 127.5f - 1.0f;
  }
  return Tensor({images.size(), 3, static_cast<std::size_t>(h), static_cast<std::size_t>(w)}, std::move(data));
}

Tensor image_to_tensor(const Image& image) { return images_to_tensor({&image}); }

Image tensor_to_image(const Tensor& batch, std::size_t index) {
  if (batch.rank() != 4 || batch.dim(1) != 3) {
    throw ContractViolation("tensor_to_image: expected N x 3 x H x W, got " + shape_str(batch.shape()));
  }
  if (index >= batch.dim(0)) throw ContractViolation("tensor_to_image: sample index out of range");
  const int h = static_cast<int>(batch.dim(2)), w = static_cast<int>(batch.dim(3));
  const std::size_t plane = static_cast<std::size_t>(w) * h;
  Image img(w, h);
  const auto d = batch.data();
  for (int ch = 0; ch < 3; ++ch)
    for (std::size_t p = 0; p < plane; ++p) {
      const double v = (static_cast<double>(d[(index * 3 + ch) * plane + p]) + 1.0) * 127.5;
      img.pixels[p * 3 + ch] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
    }
  return img;
}

Image side_by_side(const Image& left, const Image& right) {
  if (left.height != right.height) throw ContractViolation("side_by_side: heights differ");
  Image out(left.width + right.width, left.height);
  for (int r = 0; r < out.height; ++r) {
    for (int c = 0; c < left.width; ++c)
      for (int ch = 0; ch < 3; ++ch) out.at(r, c, ch) = left.at(r, c, ch);
    for (int c = 0; c < right.width; ++c)
      for (int ch = 0; ch < 3; ++ch) out.at(r, left.width + c, ch) = right.at(r, c, ch);
  }
  return out;
}

}  // namespace fogbench
