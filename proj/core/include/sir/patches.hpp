#pragma once

#include <vector>

#include "sir/image.hpp"
#include "sir/tensor.hpp"

namespace sir {

struct PatchConfig {
  int patchSize = 57;  // odd, so the center pixel is well defined
  int channels = 3;
};

// Face crop normalized to a fixed square. `toNormalized` maps raw-image
// coordinates into the crop and is exactly invertible.
struct NormalizedFace {
  Image image;
  ScaleTranslate toNormalized;
};

// Crops the face box with `margin` extra on each side (square crop, side
// (1 + 2*margin) * max(w, h), centered on the box center) and bilinearly
// resizes it to faceSize x faceSize. The output faceBox is the input box
// mapped through the same transform. Throws DataError on a zero-area box.
NormalizedFace normalize_face(const Image& image, int faceSize = 256, double margin = 0.10);

// p x p x C patch bilinearly sampled on the integer-offset grid centered at
// `center`. Any real-valued center is accepted; out-of-bounds samples clamp
// to the nearest edge pixel.
Tensor extract_patch(const Image& image, Point2 center, const PatchConfig& cfg);

// One patch per landmark, order preserving.
std::vector<Tensor> extract_patch_set(const Image& image, const LandmarkSet& landmarks,
                                      const PatchConfig& cfg);

}  // namespace sir
