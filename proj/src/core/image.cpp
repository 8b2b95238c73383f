#include "cirlab/image.hpp"

#include "cirlab/error.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>

namespace cirlab {

namespace {

Image from_mat(const cv::Mat& bgr) {
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  cv::Mat as_double;
  rgb.convertTo(as_double, CV_64FC3, 1.0 / 255.0);
  Image image(as_double.rows, as_double.cols);
  for (int y = 0; y < image.height; ++y) {
    const auto* row = as_double.ptr<cv::Vec3d>(y);
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < 3; ++c) image.at(y, x, c) = row[x][c];
  }
  return image;
}

cv::Mat to_mat(const Image& image) {
  cv::Mat rgb(image.height, image.width, CV_64FC3);
  for (int y = 0; y < image.height; ++y) {
    auto* row = rgb.ptr<cv::Vec3d>(y);
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < 3; ++c) row[x][c] = image.at(y, x, c);
  }
  return rgb;
}

}  // namespace

Image load_image(const std::filesystem::path& path) {
  const cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw DataError("unreadable image: " + path.string());
  return from_mat(bgr);
}

Image resize_image(const Image& image, int size) {
  if (image.height == size && image.width == size) return image;
  cv::Mat resized;
  cv::resize(to_mat(image), resized, cv::Size(size, size), 0, 0, cv::INTER_AREA);
  Image out(size, size);
  for (int y = 0; y < size; ++y) {
    const auto* row = resized.ptr<cv::Vec3d>(y);
    for (int x = 0; x < size; ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = row[x][c];
  }
  return out;
}

void save_image(const std::filesystem::path& path, const Image& image) {
  cv::Mat bytes(image.height, image.width, CV_8UC3);
  for (int y = 0; y < image.height; ++y) {
    auto* row = bytes.ptr<cv::Vec3b>(y);
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(image.at(y, x, c), 0.0, 1.0);
        row[x][2 - c] = static_cast<unsigned char>(std::lround(v * 255.0));
      }
  }
  if (!cv::imwrite(path.string(), bytes)) throw DataError("cannot write image: " + path.string());
}

}  // namespace cirlab
