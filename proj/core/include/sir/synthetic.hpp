#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "sir/image.hpp"
#include "sir/tensor.hpp"

namespace sir {

// Deterministic synthetic landmark benchmark: each image renders one
// distinctive oriented pattern per landmark (a Gaussian dipole plus an
// oriented ripple, mutually distinguishable and direction-bearing) over a
// smooth background, with exact latent landmark positions as annotations.
// Shapes and poses come from a known linear generative model so recovery can
// be checked against the generator.
struct SyntheticSpec {
  int landmarkCount = 5;
  int imageSize = 64;
  int shapeComponents = 3;
  int channels = 1;
  int count = 200;
  double noiseStd = 0.01;
  double minLandmarkSeparation = 7.0;  // pixels; collisions are resampled
  std::uint64_t seed = 1;
};

struct SyntheticSample {
  Image image;
  LandmarkSet landmarks;
  std::string id;
};

struct SyntheticDataset {
  SyntheticSpec spec;
  std::vector<SyntheticSample> samples;
  // Generator ground truth, exposed for recovery checks.
  Eigen::VectorXd generatorMean;    // canonical frame, zero centroid
  Eigen::MatrixXd generatorBasis;   // 2M x shapeComponents, orthonormal
  Eigen::VectorXd generatorStd;     // per-component std of the latent draw
};

SyntheticDataset generate_dataset(const SyntheticSpec& spec);

// The per-landmark pattern templates on their rendering support, for
// template-matching and distinguishability checks.
std::vector<Tensor> landmark_templates(const SyntheticSpec& spec);

}  // namespace sir
