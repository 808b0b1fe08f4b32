#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sir/dataset.hpp"
#include "sir/patches.hpp"
#include "sir/rng.hpp"
#include "sir/shape_model.hpp"
#include "sir/tensor.hpp"

namespace sir {

// Training-time sampling distribution: an equal-weight-by-default mixture of
// two Gaussians in pose-shape space, one centered on the box-canonical mean
// placement (coarse stage) and one on the ground-truth parameters (fine
// stage). A single scalar sigma scales the per-dimension paramScales of the
// model, so it is comparable across shape, translation, rotation and scale
// dimensions.
struct SamplingConfig {
  double sigma = 0.2;
  double mixtureWeight = 0.5;  // probability of the mean-shape branch
  int periods = 1;             // T; 0 means unbounded
  std::uint64_t seed = 0;
  bool shuffleWithinPeriod = true;
};

enum class SampleBranch { MeanShape, GroundTruth };

struct SampledParams {
  PoseShapeParams params;
  SampleBranch branch = SampleBranch::GroundTruth;
};

// One draw: pick a branch, then perturb every dimension of the branch center
// by sigma * paramScales[d] * N(0,1).
SampledParams sample_params(const PoseShapeParams& groundTruth,
                            const PoseShapeParams& meanCenter, const ShapeModel& model,
                            const SamplingConfig& cfg, Rng& rng);

struct TrainingExample {
  std::vector<Tensor> patches;
  Tensor targetIncrement;  // length 2M, (ground truth - sampled) / faceBoxSide
  int sourceImage = -1;
  SampleBranch branch = SampleBranch::GroundTruth;
};

// Renders one example: synthesize the sampled landmark locations, extract
// patches there, and store the normalized increment back to ground truth.
TrainingExample generate_example(const Image& image, const LandmarkSet& groundTruth,
                                 const PoseShapeParams& sampled, const ShapeModel& model,
                                 const PatchConfig& patchCfg);

// Lazy period-major stream over a prepared dataset: periods x N examples,
// optionally shuffled within each period. Each (period, image) pair owns a
// seed derived from the config seed, so the sequence is reproducible and
// independent of how it is consumed. Multiple workers can own disjoint
// slices of the same stream via (workerIndex, workerCount).
class TrainingStream {
 public:
  TrainingStream(const Dataset& dataset, const ShapeModel& model, SamplingConfig cfg,
                 PatchConfig patchCfg, int workerIndex = 0, int workerCount = 1);

  // nullopt once `periods` are exhausted (never for periods == 0).
  std::optional<TrainingExample> next();

  std::size_t skipped() const { return skipped_; }

 private:
  std::size_t position_in_period(std::size_t slot) const;

  const Dataset* dataset_;
  const ShapeModel* model_;
  SamplingConfig cfg_;
  PatchConfig patchCfg_;
  int workerIndex_;
  int workerCount_;
  std::size_t period_ = 0;
  std::size_t slot_ = 0;  // index into the (possibly shuffled) period order
  std::vector<std::size_t> order_;
  std::size_t skipped_ = 0;
};

}  // namespace sir
