#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace xvl {

/// 8-bit interleaved RGB image, row-major.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // width * height * 3

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

  bool empty() const { return width <= 0 || height <= 0; }
  std::uint8_t& at(int u, int v, int c) { return pixels[(static_cast<std::size_t>(v) * width + u) * 3 + c]; }
  std::uint8_t at(int u, int v, int c) const { return pixels[(static_cast<std::size_t>(v) * width + u) * 3 + c]; }
};

/// Loads a PNG or binary (P6) PPM, chosen by file signature.
RgbImage load_image(const std::filesystem::path& path);
void save_ppm(const RgbImage& image, const std::filesystem::path& path);

}  // namespace xvl
