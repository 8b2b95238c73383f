#pragma once

#include <filesystem>
#include <vector>

namespace cirlab {

/// RGB image, row-major height x width x 3, channel values in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(int h, int w) : height(h), width(w), pixels(static_cast<std::size_t>(h) * w * 3, 0.0) {}

  double& at(int y, int x, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  double at(int y, int x, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  bool empty() const { return pixels.empty(); }
};

/// Decodes any format OpenCV understands. Throws DataError when the file is missing or unreadable.
Image load_image(const std::filesystem::path& path);
/// Area-resampled to size x size.
Image resize_image(const Image& image, int size);
/// Writes an 8-bit PNG.
void save_image(const std::filesystem::path& path, const Image& image);

}  // namespace cirlab
