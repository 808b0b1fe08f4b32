#pragma once

#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "sir/dataset.hpp"
#include "sir/network.hpp"
#include "sir/sampling.hpp"

namespace sir {

struct TrainConfig {
  int batchSize = 64;
  int maxSteps = 1000;
  double learningRate = 0.1;
  double weightDecay = 1e-4;
  double rho = 0.95;
  double epsilon = 1e-6;
  SamplingConfig sampling;
  int checkpointEvery = 0;  // steps; 0 writes only the final checkpoint
  int logEvery = 50;
  bool deterministic = false;  // single worker, bit-reproducible
  int threads = 0;             // worker count; 0 = hardware concurrency (capped)
  int valExamplesPerImage = 2;
  std::filesystem::path outDir;  // empty = keep everything in memory
};

struct TrainLogRecord {
  int step = 0;
  double meanBatchLoss = 0.0;
  double wallTimeSec = 0.0;
  int meanShapeBranchCount = 0;
  int gtBranchCount = 0;
  double validationLoss = std::numeric_limits<double>::quiet_NaN();
};

std::string train_log_json(const TrainLogRecord& rec);

struct TrainResult {
  std::vector<TrainLogRecord> log;
  double initialLoss = std::numeric_limits<double>::quiet_NaN();
  double finalLoss = std::numeric_limits<double>::quiet_NaN();
  double validationLoss = std::numeric_limits<double>::quiet_NaN();
  int stepsRun = 0;
  bool aborted = false;  // training hit a non-finite loss and stopped
  std::filesystem::path finalCheckpoint;
};

// Minimizes the mean squared increment error over mini-batches drawn from
// the online sampling stream, with Adadelta updates. Weight decay applies to
// weights only. On divergence (non-finite loss) training aborts, keeping the
// last known-good weights in `net` (and on disk when outDir is set).
// Works for both network types.
template <class Net>
TrainResult train_sir(const Dataset& trainSet, const Dataset* valSet, const ShapeModel& model,
                      Net& net, const TrainConfig& cfg);

// Cascaded baseline sharing the LAN architecture: stage 1 trains on
// mean-shape-branch samples only; stage k trains on those same samples pushed
// through stages 1..k-1. The step budget cfg.maxSteps is the cascade total,
// split evenly across stages. Stage k never sees weights of a later stage.
struct CascadeResult {
  std::vector<LanModel> stages;
  std::vector<TrainResult> stageResults;
};
CascadeResult train_cr_baseline(const Dataset& trainSet, const Dataset* valSet,
                                const ShapeModel& model, const LanSpec& spec, int stages,
                                const TrainConfig& cfg);

// Weight-init seed used for cascade stage nets, exposed so a single-stage
// cascade can be reproduced with train_sir exactly.
std::uint64_t cascade_stage_seed(std::uint64_t baseSeed, int stage);

}  // namespace sir
