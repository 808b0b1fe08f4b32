#include "sir/train.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <thread>

#include <nlohmann/json.hpp>

#include "sir/adadelta.hpp"
#include "sir/errors.hpp"
#include "sir/inference.hpp"

namespace sir {

namespace {

constexpr std::uint64_t kValSeedStream = 0x7A11DA7AULL;
constexpr std::uint64_t kStageSeedStream = 0x57A6E000ULL;

struct ExampleSource {
  virtual std::optional<TrainingExample> next() = 0;
  virtual ~ExampleSource() = default;
};

struct StreamSource final : ExampleSource {
  TrainingStream stream;
  StreamSource(const Dataset& ds, const ShapeModel& model, const SamplingConfig& cfg,
               const PatchConfig& pcfg)
      : stream(ds, model, cfg, pcfg) {}
  std::optional<TrainingExample> next() override { return stream.next(); }
};

// Stage-k cascade data: the stage-1 sample pushed through the earlier
// regressors, patches re-extracted at the updated location.
struct CascadeSource final : ExampleSource {
  TrainingStream stream;
  const Dataset* dataset;
  const ShapeModel* model;
  std::vector<const LanModel*> prefix;
  PatchConfig patchCfg;

  CascadeSource(const Dataset& ds, const ShapeModel& m, const SamplingConfig& cfg,
                const PatchConfig& pcfg, std::vector<const LanModel*> prev)
      : stream(ds, m, cfg, pcfg), dataset(&ds), model(&m), prefix(std::move(prev)),
        patchCfg(pcfg) {}

  std::optional<TrainingExample> next() override {
    std::optional<TrainingExample> base = stream.next();
    if (!base || prefix.empty()) return base;

    const DatasetEntry& entry = dataset->entries[base->sourceImage];
    const double side = entry.image.faceBox.side();
    // Reconstruct the sampled location from the stored increment:
    // theta_1 = theta* - side * target.
    LandmarkSet theta = entry.landmarks;
    for (std::size_t j = 0; j < theta.count(); ++j) {
      theta.points[j].x -= side * base->targetIncrement[2 * j];
      theta.points[j].y -= side * base->targetIncrement[2 * j + 1];
    }
    for (const LanModel* stage : prefix) theta = refine_step(entry.image, *stage, theta);

    TrainingExample ex;
    ex.sourceImage = base->sourceImage;
    ex.branch = base->branch;
    ex.patches = extract_patch_set(entry.image, theta, patchCfg);
    ex.targetIncrement = Tensor({2 * theta.count()});
    for (std::size_t j = 0; j < theta.count(); ++j) {
      ex.targetIncrement[2 * j] = (entry.landmarks.points[j].x - theta.points[j].x) / side;
      ex.targetIncrement[2 * j + 1] = (entry.landmarks.points[j].y - theta.points[j].y) / side;
    }
    return ex;
  }
};

// Fixed validation set: `perImage` deterministic draws per held-out image,
// optionally pushed through a cascade prefix.
std::vector<TrainingExample> make_val_examples(const Dataset& val, const ShapeModel& model,
                                               const SamplingConfig& samplingCfg,
                                               const PatchConfig& patchCfg, int perImage,
                                               const std::vector<const LanModel*>& prefix) {
  std::vector<TrainingExample> out;
  if (val.empty() || perImage < 1) return out;
  SamplingConfig cfg = samplingCfg;
  cfg.periods = perImage;
  cfg.seed = derive_seed(samplingCfg.seed, kValSeedStream);
  cfg.shuffleWithinPeriod = false;
  CascadeSource source(val, model, cfg, patchCfg, prefix);
  while (auto ex = source.next()) out.push_back(std::move(*ex));
  return out;
}

template <class Net>
double validation_loss(const Net& net, const std::vector<TrainingExample>& examples) {
  if (examples.empty()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  for (const TrainingExample& ex : examples) {
    total += squared_error_loss(net.predict(ex.patches), ex.targetIncrement).value;
  }
  return total / static_cast<double>(examples.size());
}

int worker_count(const TrainConfig& cfg) {
  if (cfg.deterministic) return 1;
  int w = cfg.threads > 0 ? cfg.threads
                          : static_cast<int>(std::thread::hardware_concurrency());
  w = std::min(w, 8);
  w = std::min(w, cfg.batchSize);
  return std::max(w, 1);
}

template <class Net>
TrainResult run_training(ExampleSource& source, Net& net, const TrainConfig& cfg,
                         const std::vector<TrainingExample>& valExamples,
                         const std::string& checkpointStem) {
  if (cfg.batchSize < 1 || cfg.maxSteps < 1) {
    throw DataError("training needs positive batch size and step count");
  }
  const int W = worker_count(cfg);
  Adadelta optimizer({cfg.learningRate, cfg.weightDecay, cfg.rho, cfg.epsilon});

  std::vector<typename Net::Grads> workerGrads;
  std::vector<typename Net::Workspace> workerTapes(W);
  workerGrads.reserve(W);
  for (int w = 0; w < W; ++w) workerGrads.push_back(net.make_grads());

  std::ofstream logStream;
  if (!cfg.outDir.empty()) {
    std::filesystem::create_directories(cfg.outDir);
    logStream.open(cfg.outDir / (checkpointStem + "_log.ndjson"), std::ios::trunc);
  }

  TrainResult result;
  Net lastGood = net;
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&t0]() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  auto emit = [&](TrainLogRecord rec) {
    if (logStream.is_open()) logStream << train_log_json(rec) << "\n";
    result.log.push_back(std::move(rec));
  };

  std::vector<TrainingExample> batch;
  batch.reserve(cfg.batchSize);
  for (int step = 1; step <= cfg.maxSteps; ++step) {
    batch.clear();
    while (static_cast<int>(batch.size()) < cfg.batchSize) {
      auto ex = source.next();
      if (!ex) break;  // finite stream exhausted
      batch.push_back(std::move(*ex));
    }
    if (batch.empty()) break;
    const double B = static_cast<double>(batch.size());

    std::vector<double> workerLoss(W, 0.0);
    auto work = [&](int w) {
      std::size_t lo = batch.size() * w / W;
      std::size_t hi = batch.size() * (w + 1) / W;
      for (std::size_t i = lo; i < hi; ++i) {
        workerLoss[w] +=
            net.accumulate_example(batch[i].patches, batch[i].targetIncrement, workerGrads[w],
                                   workerTapes[w]);
      }
    };
    for (auto& g : workerGrads) g.set_zero();
    if (W == 1) {
      work(0);
    } else {
      std::vector<std::thread> threads;
      threads.reserve(W);
      for (int w = 0; w < W; ++w) threads.emplace_back(work, w);
      for (auto& t : threads) t.join();
    }

    double batchLoss = 0.0;
    for (double l : workerLoss) batchLoss += l;
    batchLoss /= B;

    int meanBranch = 0;
    for (const TrainingExample& ex : batch) {
      if (ex.branch == SampleBranch::MeanShape) ++meanBranch;
    }

    if (!std::isfinite(batchLoss)) {
      // Divergence: roll back to the last known-good weights and stop.
      net = lastGood;
      result.aborted = true;
      if (!cfg.outDir.empty()) {
        result.finalCheckpoint = cfg.outDir / (checkpointStem + "_last_good.bin");
        net.save(result.finalCheckpoint);
      }
      std::cerr << "training aborted at step " << step << ": non-finite loss\n";
      break;
    }

    if (step == 1) result.initialLoss = batchLoss;
    result.finalLoss = batchLoss;
    result.stepsRun = step;

    // Fixed worker-order reduction keeps updates reproducible for a given
    // worker count.
    net.zero_grads();
    for (int w = 0; w < W; ++w) net.add_grads(workerGrads[w], 1.0 / B);
    optimizer.step(net.params());

    const bool logNow = step == 1 || step == cfg.maxSteps ||
                        (cfg.logEvery > 0 && step % cfg.logEvery == 0);
    const bool checkpointNow = cfg.checkpointEvery > 0 && step % cfg.checkpointEvery == 0;
    if (logNow || checkpointNow) {
      TrainLogRecord rec;
      rec.step = step;
      rec.meanBatchLoss = batchLoss;
      rec.wallTimeSec = elapsed();
      rec.meanShapeBranchCount = meanBranch;
      rec.gtBranchCount = static_cast<int>(batch.size()) - meanBranch;
      if (step == cfg.maxSteps || checkpointNow) {
        rec.validationLoss = validation_loss(net, valExamples);
      }
      emit(std::move(rec));
    }
    if (checkpointNow) {
      lastGood = net;
      if (!cfg.outDir.empty()) {
        char name[64];
        std::snprintf(name, sizeof(name), "%s_ckpt_%06d.bin", checkpointStem.c_str(), step);
        net.save(cfg.outDir / name);
      }
    }
  }

  if (!result.aborted) {
    result.validationLoss = validation_loss(net, valExamples);
    if (!cfg.outDir.empty()) {
      result.finalCheckpoint = cfg.outDir / (checkpointStem + ".bin");
      net.save(result.finalCheckpoint);
    }
  }
  return result;
}

}  // namespace

std::string train_log_json(const TrainLogRecord& rec) {
  nlohmann::json doc;
  doc["step"] = rec.step;
  doc["meanBatchLoss"] = rec.meanBatchLoss;
  doc["wallTimeSec"] = rec.wallTimeSec;
  doc["meanShapeBranchCount"] = rec.meanShapeBranchCount;
  doc["gtBranchCount"] = rec.gtBranchCount;
  if (std::isfinite(rec.validationLoss)) doc["validationLoss"] = rec.validationLoss;
  return doc.dump();
}

template <class Net>
TrainResult train_sir(const Dataset& trainSet, const Dataset* valSet, const ShapeModel& model,
                      Net& net, const TrainConfig& cfg) {
  if (trainSet.empty()) throw DataError("train_sir: empty training set");
  if (trainSet.landmark_count() != net.landmark_count() ||
      model.landmark_count() != net.landmark_count()) {
    throw DataError("train_sir: landmark counts disagree between dataset, model and network");
  }
  PatchConfig pcfg{net.patch_size(), net.channels()};
  SamplingConfig scfg = cfg.sampling;
  scfg.periods = 0;  // online stream, bounded by maxSteps

  StreamSource source(trainSet, model, scfg, pcfg);
  std::vector<TrainingExample> valExamples;
  if (valSet && !valSet->empty()) {
    valExamples =
        make_val_examples(*valSet, model, cfg.sampling, pcfg, cfg.valExamplesPerImage, {});
  }
  return run_training(source, net, cfg, valExamples, "weights");
}

template TrainResult train_sir<LanModel>(const Dataset&, const Dataset*, const ShapeModel&,
                                         LanModel&, const TrainConfig&);
template TrainResult train_sir<StackNetModel>(const Dataset&, const Dataset*, const ShapeModel&,
                                              StackNetModel&, const TrainConfig&);

std::uint64_t cascade_stage_seed(std::uint64_t baseSeed, int stage) {
  return derive_seed(baseSeed, kStageSeedStream + static_cast<std::uint64_t>(stage));
}

CascadeResult train_cr_baseline(const Dataset& trainSet, const Dataset* valSet,
                                const ShapeModel& model, const LanSpec& spec, int stages,
                                const TrainConfig& cfg) {
  if (stages < 1) throw DataError("train_cr_baseline: need at least one stage");
  if (trainSet.empty()) throw DataError("train_cr_baseline: empty training set");

  PatchConfig pcfg{spec.patchSize, spec.channels};
  TrainConfig stageCfg = cfg;
  stageCfg.maxSteps = std::max(1, cfg.maxSteps / stages);
  // Stage 1 samples around the mean placement only; later stages reuse the
  // same draws (same seed) advanced by the trained prefix.
  stageCfg.sampling.mixtureWeight = 1.0;
  SamplingConfig streamCfg = stageCfg.sampling;
  streamCfg.periods = 0;

  CascadeResult result;
  result.stages.reserve(stages);  // prefix holds pointers into this vector
  std::vector<const LanModel*> prefix;
  for (int k = 0; k < stages; ++k) {
    LanModel net(spec, cascade_stage_seed(cfg.sampling.seed, k));
    CascadeSource source(trainSet, model, streamCfg, pcfg, prefix);
    std::vector<TrainingExample> valExamples;
    if (valSet && !valSet->empty()) {
      valExamples = make_val_examples(*valSet, model, stageCfg.sampling, pcfg,
                                      cfg.valExamplesPerImage, prefix);
    }
    TrainResult stageResult =
        run_training(source, net, stageCfg, valExamples, "stage" + std::to_string(k + 1));
    result.stages.push_back(std::move(net));
    result.stageResults.push_back(std::move(stageResult));
    prefix.push_back(&result.stages.back());
    if (result.stageResults.back().aborted) break;
  }
  return result;
}

}  // namespace sir
