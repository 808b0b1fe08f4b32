#pragma once

#include <vector>

#include "sir/dataset.hpp"
#include "sir/network.hpp"
#include "sir/patches.hpp"
#include "sir/shape_model.hpp"

namespace sir {

// Per-iteration record of the iterative refinement: locations holds
// theta_0 .. theta_K, incrementNorms the pixel-space L2 length of each
// applied update.
struct IterationTrace {
  std::vector<LandmarkSet> locations;
  std::vector<double> incrementNorms;

  int iterations() const { return static_cast<int>(incrementNorms.size()); }
  const LandmarkSet& final_location() const { return locations.back(); }
};

// Mean shape placed at the box-canonical pose (the same placement the
// sampler's mean branch is centered on): alpha = 0, upright, centroid at the
// box center, spanning 90% of the box side.
LandmarkSet initial_location(const Image& image, const ShapeModel& model);

// One refinement step: extract patches at theta, predict the normalized
// increment, denormalize by the face-box side and add.
template <class Net>
LandmarkSet refine_step(const Image& image, const Net& net, const LandmarkSet& theta,
                        double* incrementNorm = nullptr) {
  PatchConfig pc{net.patch_size(), net.channels()};
  std::vector<Tensor> patches = extract_patch_set(image, theta, pc);
  Tensor inc = net.predict(patches);
  const double side = image.faceBox.side();
  LandmarkSet out = theta;
  double normSq = 0.0;
  for (std::size_t j = 0; j < out.count(); ++j) {
    double dx = side * inc[2 * j];
    double dy = side * inc[2 * j + 1];
    out.points[j].x += dx;
    out.points[j].y += dy;
    normSq += dx * dx + dy * dy;
  }
  if (incrementNorm) *incrementNorm = std::sqrt(normSq);
  return out;
}

// Iterative refinement calling the same regressor `iterations` times,
// starting from an explicit location.
template <class Net>
IterationTrace self_iterate_from(const Image& image, const Net& net, const LandmarkSet& start,
                                 int iterations) {
  IterationTrace trace;
  trace.locations.push_back(start);
  for (int k = 0; k < iterations; ++k) {
    double norm = 0.0;
    trace.locations.push_back(refine_step(image, net, trace.locations.back(), &norm));
    trace.incrementNorms.push_back(norm);
  }
  return trace;
}

template <class Net>
IterationTrace self_iterate(const Image& image, const Net& net, const ShapeModel& model,
                            int iterations) {
  return self_iterate_from(image, net, initial_location(image, model), iterations);
}

// Cascade variant: stage k's weights drive step k. The iteration count is
// the number of stages.
template <class Net>
IterationTrace cascade_iterate(const Image& image, const std::vector<Net>& stages,
                               const ShapeModel& model) {
  if (stages.empty()) throw DataError("cascade_iterate: no stage weights");
  IterationTrace trace;
  trace.locations.push_back(initial_location(image, model));
  for (const Net& stage : stages) {
    double norm = 0.0;
    trace.locations.push_back(refine_step(image, stage, trace.locations.back(), &norm));
    trace.incrementNorms.push_back(norm);
  }
  return trace;
}

}  // namespace sir
