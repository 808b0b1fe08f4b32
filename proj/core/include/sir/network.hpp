#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "sir/layers.hpp"

namespace sir {

// Landmarks-attention regressor: one independent convolutional feature
// sub-network per landmark patch, features concatenated landmark-major, then
// two shared fully connected layers producing the 2M location increment.
struct LanSpec {
  int landmarkCount = 0;
  int patchSize = 0;
  int channels = 0;
  int featureDim = 10;
  int hiddenDim = 256;
  StackSpec subnet;  // applied to each patch independently
  StackSpec head;    // fcA -> relu -> fcB over concatenated features

  // Builds the sub-network for a patch size: 3x3 conv to 16 channels, then
  // 2x2 convs to 32 and 64 channels ("same" output sizes, even kernels pad
  // bottom/right), each followed by ceil-mode 2x2/2 pooling, extra pooling
  // until the spatial dim is at most 8, then a fully connected layer to
  // featureDim. At patchSize 57 this reproduces the 57-29-15-8 pyramid.
  static LanSpec make(int landmarkCount, int patchSize, int channels, int featureDim = 10,
                      int hiddenDim = 256);

  int output_dim() const { return 2 * landmarkCount; }
};

std::size_t parameter_count(const LanSpec& spec);

struct LanWeights {
  std::vector<StackWeights> perLandmark;  // landmarkCount entries, not tied
  StackWeights head;

  static LanWeights init(const LanSpec& spec, Rng& rng);
  static LanWeights zeros_like(const LanSpec& spec);
  void set_zero();
};

void add_scaled(StackWeights& dst, const StackWeights& src, double scale);
void add_scaled(LanWeights& dst, const LanWeights& src, double scale);

struct LanTape {
  std::vector<StackTape> subnets;
  StackTape head;
  Tensor features;  // concatenated sub-network outputs
  bool recorded = false;
};

// Forward pass over M patches; records activations in `tape` when given.
Tensor lan_forward(const LanSpec& spec, const LanWeights& w, const std::vector<Tensor>& patches,
                   LanTape* tape = nullptr);
void lan_backward(const LanSpec& spec, const LanWeights& w, const LanTape& tape,
                  const Tensor& gradOut, LanWeights& gradAccum);

void lan_collect_params(const LanSpec& spec, LanWeights& w, LanWeights& grads,
                        std::vector<ParamRef>& out);
void lan_for_each_tensor(const LanSpec& spec, const LanWeights& w,
                         const std::function<void(const std::string&, const Tensor&)>& fn);

// ---------------------------------------------------------------------------
// Ablation network: all landmark patches stacked channel-wise through one
// shared conv tower, parameter-matched to a LAN spec within 1%.
// ---------------------------------------------------------------------------

struct StackNetSpec {
  int landmarkCount = 0;
  int patchSize = 0;
  int channels = 0;  // per patch; the tower input has channels * landmarkCount
  int hiddenDim = 0;
  StackSpec tower;

  // Three conv layers (32, 64, 96 channels) mirroring the LAN kernel/pool
  // geometry, then fc layers with the given hidden width.
  static StackNetSpec make(int landmarkCount, int patchSize, int channels, int hiddenDim);

  // Solves the hidden width so the total parameter count matches
  // `parameter_count(lan)` within 1%. Throws NumericError when no width can
  // satisfy the budget.
  static StackNetSpec make_budget_matched(const LanSpec& lan);

  int output_dim() const { return 2 * landmarkCount; }
};

std::size_t parameter_count(const StackNetSpec& spec);

// Concatenates M patches of shape (p, p, C) into one (p, p, C*M) tensor,
// landmark-major in the channel dimension.
Tensor stack_patches(const std::vector<Tensor>& patches);

// ---------------------------------------------------------------------------
// Model wrappers: spec + weights + gradient buffers + tape, the unit the
// trainer and the iterative predictor operate on. Copyable; copies share
// nothing.
// ---------------------------------------------------------------------------

class LanModel {
 public:
  using Grads = LanWeights;
  using Workspace = LanTape;

  LanModel(LanSpec spec, std::uint64_t seed);
  LanModel(LanSpec spec, LanWeights weights);

  int landmark_count() const { return spec_.landmarkCount; }
  int patch_size() const { return spec_.patchSize; }
  int channels() const { return spec_.channels; }
  std::size_t parameter_count() const { return sir::parameter_count(spec_); }

  const LanSpec& spec() const { return spec_; }
  const LanWeights& weights() const { return weights_; }
  LanWeights& weights() { return weights_; }

  Tensor predict(const std::vector<Tensor>& patches) const;  // no tape
  Tensor forward(const std::vector<Tensor>& patches);        // records tape
  void backward(const Tensor& gradOut);                      // accumulates grads
  void zero_grads();
  std::vector<ParamRef> params();

  // Worker-local training step: forward, squared-error loss against
  // `target`, backward into caller-owned buffers. Safe to call concurrently
  // on one model with distinct grads/workspace per caller.
  Grads make_grads() const { return LanWeights::zeros_like(spec_); }
  double accumulate_example(const std::vector<Tensor>& patches, const Tensor& target,
                            Grads& grads, Workspace& ws) const;
  void add_grads(const Grads& grads, double scale);

  void save(const std::filesystem::path& path) const;
  static LanModel load(const std::filesystem::path& path);

 private:
  LanSpec spec_;
  LanWeights weights_;
  LanWeights grads_;
  LanTape tape_;
};

class StackNetModel {
 public:
  using Grads = StackWeights;
  using Workspace = StackTape;

  StackNetModel(StackNetSpec spec, std::uint64_t seed);
  StackNetModel(StackNetSpec spec, StackWeights weights);

  int landmark_count() const { return spec_.landmarkCount; }
  int patch_size() const { return spec_.patchSize; }
  int channels() const { return spec_.channels; }
  std::size_t parameter_count() const { return sir::parameter_count(spec_); }

  const StackNetSpec& spec() const { return spec_; }
  const StackWeights& weights() const { return weights_; }

  Tensor predict(const std::vector<Tensor>& patches) const;
  Tensor forward(const std::vector<Tensor>& patches);
  void backward(const Tensor& gradOut);
  void zero_grads();
  std::vector<ParamRef> params();

  Grads make_grads() const { return StackWeights::zeros_like(spec_.tower); }
  double accumulate_example(const std::vector<Tensor>& patches, const Tensor& target,
                            Grads& grads, Workspace& ws) const;
  void add_grads(const Grads& grads, double scale);

  void save(const std::filesystem::path& path) const;
  static StackNetModel load(const std::filesystem::path& path);

 private:
  StackNetSpec spec_;
  StackWeights weights_;
  StackWeights grads_;
  StackTape tape_;
};

// Reads the "network" field of a checkpoint without loading the tensors.
std::string checkpoint_network_kind(const std::filesystem::path& path);

}  // namespace sir
