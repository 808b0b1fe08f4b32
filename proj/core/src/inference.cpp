#include "sir/inference.hpp"

namespace sir {

LandmarkSet initial_location(const Image& image, const ShapeModel& model) {
  return params_to_shape(box_canonical_params(model, image.faceBox), model);
}

}  // namespace sir
