#include "sir/patches.hpp"

#include <algorithm>
#include <cmath>

#include "sir/errors.hpp"

namespace sir {

double bilinear_sample(const Image& img, double x, double y, int c) {
  x = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
  int x0 = static_cast<int>(std::floor(x));
  int y0 = static_cast<int>(std::floor(y));
  int x1 = std::min(x0 + 1, img.width - 1);
  int y1 = std::min(y0 + 1, img.height - 1);
  double fx = x - x0;
  double fy = y - y0;
  double v00 = img.at(y0, x0, c), v01 = img.at(y0, x1, c);
  double v10 = img.at(y1, x0, c), v11 = img.at(y1, x1, c);
  return (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
}

NormalizedFace normalize_face(const Image& image, int faceSize, double margin) {
  if (!image.valid()) throw DataError("normalize_face: invalid image");
  if (!image.faceBox.valid()) throw DataError("normalize_face: zero-area face box");

  const double cropSide = (1.0 + 2.0 * margin) * image.faceBox.side();
  const Point2 center = image.faceBox.center();
  const double cropX = center.x - cropSide / 2.0;
  const double cropY = center.y - cropSide / 2.0;

  ScaleTranslate toNorm;
  toNorm.scale = faceSize / cropSide;
  toNorm.tx = -cropX * toNorm.scale;
  toNorm.ty = -cropY * toNorm.scale;
  ScaleTranslate toRaw = toNorm.inverse();

  NormalizedFace out;
  out.toNormalized = toNorm;
  out.image = Image::blank(faceSize, faceSize, image.channels);
  for (int y = 0; y < faceSize; ++y) {
    for (int x = 0; x < faceSize; ++x) {
      Point2 src = toRaw.apply(Point2{static_cast<double>(x), static_cast<double>(y)});
      for (int c = 0; c < image.channels; ++c) {
        out.image.at(y, x, c) = bilinear_sample(image, src.x, src.y, c);
      }
    }
  }
  out.image.faceBox = toNorm.apply(image.faceBox);
  return out;
}

Tensor extract_patch(const Image& image, Point2 center, const PatchConfig& cfg) {
  if (cfg.patchSize % 2 == 0 || cfg.patchSize <= 0) {
    throw ShapeError("patch size must be odd and positive, got " + std::to_string(cfg.patchSize));
  }
  if (cfg.channels != image.channels) {
    throw ShapeError("patch channels " + std::to_string(cfg.channels) + " != image channels " +
                     std::to_string(image.channels));
  }
  const int p = cfg.patchSize;
  const int half = p / 2;
  Tensor patch({static_cast<std::size_t>(p), static_cast<std::size_t>(p),
                static_cast<std::size_t>(cfg.channels)});
  double* out = patch.data();
  for (int dy = -half; dy <= half; ++dy) {
    for (int dx = -half; dx <= half; ++dx) {
      for (int c = 0; c < cfg.channels; ++c) {
        *out++ = bilinear_sample(image, center.x + dx, center.y + dy, c);
      }
    }
  }
  return patch;
}

std::vector<Tensor> extract_patch_set(const Image& image, const LandmarkSet& landmarks,
                                      const PatchConfig& cfg) {
  std::vector<Tensor> patches;
  patches.reserve(landmarks.count());
  for (const Point2& pt : landmarks.points) patches.push_back(extract_patch(image, pt, cfg));
  return patches;
}

}  // namespace sir
