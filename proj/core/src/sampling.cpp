#include "sir/sampling.hpp"

#include <algorithm>
#include <numeric>

#include "sir/errors.hpp"

namespace sir {

SampledParams sample_params(const PoseShapeParams& groundTruth,
                            const PoseShapeParams& meanCenter, const ShapeModel& model,
                            const SamplingConfig& cfg, Rng& rng) {
  if (cfg.sigma <= 0.0) throw NumericError("sampling sigma must be positive");
  if (cfg.mixtureWeight < 0.0 || cfg.mixtureWeight > 1.0) {
    throw NumericError("mixture weight must lie in [0, 1]");
  }
  const int P = model.component_count();
  if (groundTruth.alpha.size() != P) {
    throw ShapeError("ground-truth params do not match the model component count");
  }

  SampledParams out;
  out.branch = rng.bernoulli(cfg.mixtureWeight) ? SampleBranch::MeanShape
                                                : SampleBranch::GroundTruth;
  const PoseShapeParams& center =
      out.branch == SampleBranch::MeanShape ? meanCenter : groundTruth;

  Eigen::VectorXd v = center.to_vector();
  for (int d = 0; d < v.size(); ++d) {
    v[d] += cfg.sigma * model.paramScales[d] * rng.normal();
  }
  out.params = PoseShapeParams::from_vector(v, P);
  // Scale stays positive even under extreme draws.
  out.params.scale = std::max(out.params.scale, 1e-6);
  return out;
}

TrainingExample generate_example(const Image& image, const LandmarkSet& groundTruth,
                                 const PoseShapeParams& sampled, const ShapeModel& model,
                                 const PatchConfig& patchCfg) {
  if (static_cast<int>(groundTruth.count()) != model.landmark_count()) {
    throw ShapeError("ground truth landmark count does not match the model");
  }
  if (!image.faceBox.valid()) throw DataError("generate_example: image has no face box");

  LandmarkSet sampledShape = params_to_shape(sampled, model);
  TrainingExample ex;
  ex.patches = extract_patch_set(image, sampledShape, patchCfg);

  const double side = image.faceBox.side();
  const std::size_t M = groundTruth.count();
  ex.targetIncrement = Tensor({2 * M});
  for (std::size_t j = 0; j < M; ++j) {
    ex.targetIncrement[2 * j] = (groundTruth.points[j].x - sampledShape.points[j].x) / side;
    ex.targetIncrement[2 * j + 1] = (groundTruth.points[j].y - sampledShape.points[j].y) / side;
  }
  return ex;
}

TrainingStream::TrainingStream(const Dataset& dataset, const ShapeModel& model,
                               SamplingConfig cfg, PatchConfig patchCfg, int workerIndex,
                               int workerCount)
    : dataset_(&dataset),
      model_(&model),
      cfg_(cfg),
      patchCfg_(patchCfg),
      workerIndex_(workerIndex),
      workerCount_(workerCount) {
  if (dataset.empty()) throw DataError("training stream over an empty dataset");
  if (workerCount < 1 || workerIndex < 0 || workerIndex >= workerCount) {
    throw DataError("bad training stream worker slice");
  }
  if (static_cast<std::size_t>(workerCount) > dataset.size()) {
    throw DataError("more stream workers than dataset images");
  }
  order_.resize(dataset.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  slot_ = static_cast<std::size_t>(workerIndex_);
}

std::size_t TrainingStream::position_in_period(std::size_t slot) const { return order_[slot]; }

std::optional<TrainingExample> TrainingStream::next() {
  const std::size_t N = dataset_->size();
  for (;;) {
    if (cfg_.periods > 0 && period_ >= static_cast<std::size_t>(cfg_.periods)) {
      return std::nullopt;
    }
    if (slot_ >= N) {
      slot_ = static_cast<std::size_t>(workerIndex_);
      ++period_;
      continue;
    }
    if (slot_ == static_cast<std::size_t>(workerIndex_) && cfg_.shuffleWithinPeriod) {
      // Period-local shuffle, derived so every worker agrees on the order.
      Rng shuffleRng(derive_seed(cfg_.seed, 0x5A5A5A5A00000000ULL + period_));
      std::iota(order_.begin(), order_.end(), std::size_t{0});
      std::shuffle(order_.begin(), order_.end(), shuffleRng.engine());
    }

    std::size_t imageIdx = position_in_period(slot_);
    slot_ += static_cast<std::size_t>(workerCount_);

    const DatasetEntry& entry = dataset_->entries[imageIdx];
    if (!entry.prepared) {
      ++skipped_;
      continue;
    }
    // Every (period, image) draw owns a derived seed: the emitted sequence
    // depends only on (seed, config, dataset order).
    Rng drawRng(derive_seed(cfg_.seed, period_ * N + imageIdx));
    SampledParams sp = sample_params(entry.gtParams, entry.meanCenter, *model_, cfg_, drawRng);
    TrainingExample ex =
        generate_example(entry.image, entry.landmarks, sp.params, *model_, patchCfg_);
    ex.sourceImage = static_cast<int>(imageIdx);
    ex.branch = sp.branch;
    return ex;
  }
}

}  // namespace sir
