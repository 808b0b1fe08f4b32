#pragma once

#include <vector>

#include "sir/geometry.hpp"

namespace sir {

// Planar-interleaved image, pixels in [0, 1], row-major (y, x, c).
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<double> pixels;
  FaceBox faceBox;

  double at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double& at(int y, int x, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  static Image blank(int width, int height, int channels, double value = 0.0) {
    Image img;
    img.width = width;
    img.height = height;
    img.channels = channels;
    img.pixels.assign(static_cast<std::size_t>(width) * height * channels, value);
    return img;
  }

  bool valid() const {
    return width > 0 && height > 0 && (channels == 1 || channels == 3) &&
           pixels.size() == static_cast<std::size_t>(width) * height * channels;
  }
};

// Bilinear sample with clamp-to-edge extrapolation: coordinates are clamped
// to the valid domain, so reads outside the image repeat the border pixel and
// constant images stay constant everywhere.
double bilinear_sample(const Image& img, double x, double y, int c);

}  // namespace sir
