#include "sir/network.hpp"

#include <cmath>
#include <cstring>

#include <nlohmann/json.hpp>

#include "sir/checkpoint.hpp"
#include "sir/errors.hpp"

namespace sir {

namespace {

// Conv/pool pyramid shared by the LAN sub-network and the stack tower.
// Widths differ; kernel geometry and pooling do not.
void append_tower(StackSpec& spec, int channelsIn, const std::vector<int>& widths) {
  std::vector<std::size_t> shape = spec.inputShape;
  int cin = channelsIn;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    int k = i == 0 ? 3 : 2;
    std::string idx = std::to_string(i + 1);
    spec.layers.push_back(LayerSpec::conv2d("conv" + idx, k, k, cin, widths[i],
                                            LayerSpec::same_padding(k, k), 1));
    spec.layers.push_back(LayerSpec::relu("relu" + idx));
    spec.layers.push_back(LayerSpec::maxpool2d("pool" + idx));
    cin = widths[i];
  }
  // Keep pooling until the map is small enough for the fc layer.
  auto spatial = [&spec]() { return spec.shape_chain().back()[0]; };
  int extra = 0;
  while (spatial() > 8) {
    spec.layers.push_back(LayerSpec::maxpool2d("pool_extra" + std::to_string(++extra)));
  }
}

}  // namespace

LanSpec LanSpec::make(int landmarkCount, int patchSize, int channels, int featureDim,
                      int hiddenDim) {
  if (landmarkCount < 1 || patchSize < 5 || patchSize % 2 == 0) {
    throw ShapeError("invalid LAN geometry: landmarks " + std::to_string(landmarkCount) +
                     ", patch " + std::to_string(patchSize));
  }
  LanSpec spec;
  spec.landmarkCount = landmarkCount;
  spec.patchSize = patchSize;
  spec.channels = channels;
  spec.featureDim = featureDim;
  spec.hiddenDim = hiddenDim;

  spec.subnet.inputShape = {static_cast<std::size_t>(patchSize),
                            static_cast<std::size_t>(patchSize),
                            static_cast<std::size_t>(channels)};
  append_tower(spec.subnet, channels, {16, 32, 64});
  auto flat = shape_numel(spec.subnet.output_shape());
  spec.subnet.layers.push_back(
      LayerSpec::fully_connected("fc1", static_cast<int>(flat), featureDim));

  auto outDim = spec.subnet.output_shape();
  if (outDim.size() != 1 || outDim[0] != static_cast<std::size_t>(featureDim)) {
    throw ShapeError("sub-network output is " + shape_str(outDim) + ", expected featureDim " +
                     std::to_string(featureDim));
  }

  spec.head.inputShape = {static_cast<std::size_t>(landmarkCount) * featureDim};
  spec.head.layers.push_back(LayerSpec::fully_connected(
      "fcA", landmarkCount * featureDim, hiddenDim));
  spec.head.layers.push_back(LayerSpec::relu("reluA"));
  spec.head.layers.push_back(LayerSpec::fully_connected("fcB", hiddenDim, 2 * landmarkCount));
  return spec;
}

std::size_t parameter_count(const LanSpec& spec) {
  return static_cast<std::size_t>(spec.landmarkCount) * spec.subnet.parameter_count() +
         spec.head.parameter_count();
}

LanWeights LanWeights::init(const LanSpec& spec, Rng& rng) {
  LanWeights w;
  w.perLandmark.reserve(spec.landmarkCount);
  for (int i = 0; i < spec.landmarkCount; ++i) {
    w.perLandmark.push_back(StackWeights::init(spec.subnet, rng));
  }
  w.head = StackWeights::init(spec.head, rng);
  return w;
}

LanWeights LanWeights::zeros_like(const LanSpec& spec) {
  LanWeights w;
  w.perLandmark.assign(spec.landmarkCount, StackWeights::zeros_like(spec.subnet));
  w.head = StackWeights::zeros_like(spec.head);
  return w;
}

void LanWeights::set_zero() {
  for (StackWeights& sw : perLandmark) sw.set_zero();
  head.set_zero();
}

void add_scaled(StackWeights& dst, const StackWeights& src, double scale) {
  for (std::size_t i = 0; i < dst.weights.size(); ++i) {
    for (std::size_t k = 0; k < dst.weights[i].size(); ++k) {
      dst.weights[i][k] += scale * src.weights[i][k];
    }
    for (std::size_t k = 0; k < dst.biases[i].size(); ++k) {
      dst.biases[i][k] += scale * src.biases[i][k];
    }
  }
}

void add_scaled(LanWeights& dst, const LanWeights& src, double scale) {
  for (std::size_t j = 0; j < dst.perLandmark.size(); ++j) {
    add_scaled(dst.perLandmark[j], src.perLandmark[j], scale);
  }
  add_scaled(dst.head, src.head, scale);
}

Tensor lan_forward(const LanSpec& spec, const LanWeights& w, const std::vector<Tensor>& patches,
                   LanTape* tape) {
  if (static_cast<int>(patches.size()) != spec.landmarkCount) {
    throw ShapeError("lan_forward got " + std::to_string(patches.size()) + " patches, spec has " +
                     std::to_string(spec.landmarkCount) + " landmarks");
  }
  const std::size_t F = spec.featureDim;
  Tensor features({static_cast<std::size_t>(spec.landmarkCount) * F});
  if (tape) {
    tape->subnets.resize(spec.landmarkCount);
    tape->recorded = false;
  }
  for (int j = 0; j < spec.landmarkCount; ++j) {
    Tensor f = stack_forward(spec.subnet, w.perLandmark[j], patches[j],
                             tape ? &tape->subnets[j] : nullptr);
    std::memcpy(features.data() + j * F, f.data(), F * sizeof(double));
  }
  Tensor out = stack_forward(spec.head, w.head, features, tape ? &tape->head : nullptr);
  if (tape) {
    tape->features = std::move(features);
    tape->recorded = true;
  }
  return out;
}

void lan_backward(const LanSpec& spec, const LanWeights& w, const LanTape& tape,
                  const Tensor& gradOut, LanWeights& gradAccum) {
  if (!tape.recorded) throw StateError("lan_backward called before forward");
  Tensor gradFeatures = stack_backward(spec.head, w.head, tape.head, gradOut, gradAccum.head);
  const std::size_t F = spec.featureDim;
  for (int j = 0; j < spec.landmarkCount; ++j) {
    Tensor slice({F});
    std::memcpy(slice.data(), gradFeatures.data() + j * F, F * sizeof(double));
    stack_backward(spec.subnet, w.perLandmark[j], tape.subnets[j], slice,
                   gradAccum.perLandmark[j]);
  }
}

namespace {

std::string lm_prefix(int j) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "lm%03d", j);
  return buf;
}

}  // namespace

void lan_collect_params(const LanSpec& spec, LanWeights& w, LanWeights& grads,
                        std::vector<ParamRef>& out) {
  for (int j = 0; j < spec.landmarkCount; ++j) {
    collect_params(spec.subnet, lm_prefix(j), w.perLandmark[j], grads.perLandmark[j], out);
  }
  collect_params(spec.head, "head", w.head, grads.head, out);
}

void lan_for_each_tensor(const LanSpec& spec, const LanWeights& w,
                         const std::function<void(const std::string&, const Tensor&)>& fn) {
  auto walkStack = [&fn](const StackSpec& ss, const std::string& prefix, const StackWeights& sw) {
    for (std::size_t i = 0; i < ss.layers.size(); ++i) {
      if (!ss.layers[i].has_params()) continue;
      fn(prefix + "/" + ss.layers[i].name + "/weight", sw.weights[i]);
      fn(prefix + "/" + ss.layers[i].name + "/bias", sw.biases[i]);
    }
  };
  for (int j = 0; j < spec.landmarkCount; ++j) {
    walkStack(spec.subnet, lm_prefix(j), w.perLandmark[j]);
  }
  walkStack(spec.head, "head", w.head);
}

// ---------------------------------------------------------------------------
// stack ablation network
// ---------------------------------------------------------------------------

StackNetSpec StackNetSpec::make(int landmarkCount, int patchSize, int channels, int hiddenDim) {
  StackNetSpec spec;
  spec.landmarkCount = landmarkCount;
  spec.patchSize = patchSize;
  spec.channels = channels;
  spec.hiddenDim = hiddenDim;

  const int stackedChannels = channels * landmarkCount;
  spec.tower.inputShape = {static_cast<std::size_t>(patchSize),
                           static_cast<std::size_t>(patchSize),
                           static_cast<std::size_t>(stackedChannels)};
  append_tower(spec.tower, stackedChannels, {32, 64, 96});
  const std::size_t flat = shape_numel(spec.tower.output_shape());
  spec.tower.layers.push_back(
      LayerSpec::fully_connected("fc1", static_cast<int>(flat), hiddenDim));
  spec.tower.layers.push_back(LayerSpec::relu("relu_fc"));
  spec.tower.layers.push_back(LayerSpec::fully_connected("fc2", hiddenDim, spec.output_dim()));
  return spec;
}

StackNetSpec StackNetSpec::make_budget_matched(const LanSpec& lan) {
  const std::size_t budget = sir::parameter_count(lan);

  // Probe tower (no fc) to size the budget equation
  //   budget = conv + h*(flat + 1 + out) + out, solved for hidden width h.
  StackNetSpec probe;
  probe.landmarkCount = lan.landmarkCount;
  probe.patchSize = lan.patchSize;
  probe.channels = lan.channels;
  const int stackedChannels = lan.channels * lan.landmarkCount;
  probe.tower.inputShape = {static_cast<std::size_t>(lan.patchSize),
                            static_cast<std::size_t>(lan.patchSize),
                            static_cast<std::size_t>(stackedChannels)};
  append_tower(probe.tower, stackedChannels, {32, 64, 96});

  const std::size_t convParams = probe.tower.parameter_count();
  const std::size_t flat = shape_numel(probe.tower.output_shape());
  const int outDim = probe.output_dim();
  const double denom = static_cast<double>(flat) + 1.0 + outDim;
  const double numer = static_cast<double>(budget) - static_cast<double>(convParams) - outDim;
  int hidden = static_cast<int>(std::llround(numer / denom));
  if (numer <= 0 || hidden < 1) {
    throw NumericError("stack network cannot match parameter budget " + std::to_string(budget) +
                       ": conv tower alone has " + std::to_string(convParams));
  }

  StackNetSpec spec = make(lan.landmarkCount, lan.patchSize, lan.channels, hidden);
  const double actual = static_cast<double>(parameter_count(spec));
  if (std::abs(actual - static_cast<double>(budget)) > 0.01 * static_cast<double>(budget)) {
    throw NumericError("stack network parameter count " + std::to_string(parameter_count(spec)) +
                       " misses budget " + std::to_string(budget) + " by more than 1%");
  }
  return spec;
}

std::size_t parameter_count(const StackNetSpec& spec) { return spec.tower.parameter_count(); }

Tensor stack_patches(const std::vector<Tensor>& patches) {
  if (patches.empty()) throw ShapeError("stack_patches: no patches");
  const std::size_t p = patches[0].dim(0);
  const std::size_t c = patches[0].dim(2);
  const std::size_t m = patches.size();
  Tensor out({p, p, c * m});
  for (std::size_t j = 0; j < m; ++j) {
    if (!(patches[j].rank() == 3 && patches[j].dim(0) == p && patches[j].dim(1) == p &&
          patches[j].dim(2) == c)) {
      throw ShapeError("stack_patches: patch " + std::to_string(j) + " has shape " +
                       shape_str(patches[j].shape()));
    }
    for (std::size_t y = 0; y < p; ++y) {
      for (std::size_t x = 0; x < p; ++x) {
        const double* src = patches[j].data() + (y * p + x) * c;
        double* dst = out.data() + (y * p + x) * c * m + j * c;
        std::memcpy(dst, src, c * sizeof(double));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// model wrappers + checkpoints
// ---------------------------------------------------------------------------

LanModel::LanModel(LanSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  Rng rng(seed);
  weights_ = LanWeights::init(spec_, rng);
  grads_ = LanWeights::zeros_like(spec_);
}

LanModel::LanModel(LanSpec spec, LanWeights weights)
    : spec_(std::move(spec)), weights_(std::move(weights)) {
  grads_ = LanWeights::zeros_like(spec_);
}

Tensor LanModel::predict(const std::vector<Tensor>& patches) const {
  return lan_forward(spec_, weights_, patches, nullptr);
}

Tensor LanModel::forward(const std::vector<Tensor>& patches) {
  return lan_forward(spec_, weights_, patches, &tape_);
}

void LanModel::backward(const Tensor& gradOut) {
  lan_backward(spec_, weights_, tape_, gradOut, grads_);
}

void LanModel::zero_grads() { grads_.set_zero(); }

std::vector<ParamRef> LanModel::params() {
  std::vector<ParamRef> out;
  lan_collect_params(spec_, weights_, grads_, out);
  return out;
}

double LanModel::accumulate_example(const std::vector<Tensor>& patches, const Tensor& target,
                                    Grads& grads, Workspace& ws) const {
  Tensor out = lan_forward(spec_, weights_, patches, &ws);
  LossValue lv = squared_error_loss(out, target);
  lan_backward(spec_, weights_, ws, lv.grad, grads);
  return lv.value;
}

void LanModel::add_grads(const Grads& grads, double scale) { add_scaled(grads_, grads, scale); }

void LanModel::save(const std::filesystem::path& path) const {
  BinaryContainer c;
  c.kind = PayloadKind::NetworkCheckpoint;
  nlohmann::json meta;
  meta["network"] = "lan";
  meta["landmarkCount"] = spec_.landmarkCount;
  meta["patchSize"] = spec_.patchSize;
  meta["channels"] = spec_.channels;
  meta["featureDim"] = spec_.featureDim;
  meta["hiddenDim"] = spec_.hiddenDim;
  c.metaJson = meta.dump();
  lan_for_each_tensor(spec_, weights_, [&c](const std::string& name, const Tensor& t) {
    c.tensors.push_back({name, t});
  });
  write_container(path, c);
}

LanModel LanModel::load(const std::filesystem::path& path) {
  BinaryContainer c = read_container(path);
  if (c.kind != PayloadKind::NetworkCheckpoint) {
    throw DataError("'" + path.string() + "' does not hold a network checkpoint");
  }
  nlohmann::json meta = nlohmann::json::parse(c.metaJson);
  if (meta.value("network", "") != "lan") {
    throw DataError("'" + path.string() + "' holds a '" + meta.value("network", "?") +
                    "' network, expected 'lan'");
  }
  LanSpec spec = LanSpec::make(meta.at("landmarkCount"), meta.at("patchSize"),
                               meta.at("channels"), meta.at("featureDim"), meta.at("hiddenDim"));
  LanWeights w = LanWeights::zeros_like(spec);
  LanWeights zeroGrads = LanWeights::zeros_like(spec);
  std::vector<ParamRef> refs;
  lan_collect_params(spec, w, zeroGrads, refs);
  for (ParamRef& ref : refs) {
    const NamedTensor* t = c.find(ref.path);
    if (!t) throw DataError("checkpoint '" + path.string() + "' is missing '" + ref.path + "'");
    if (!t->tensor.same_shape(*ref.value)) {
      throw DataError("checkpoint tensor '" + ref.path + "' has shape " +
                      shape_str(t->tensor.shape()) + ", expected " +
                      shape_str(ref.value->shape()));
    }
    *ref.value = t->tensor;
  }
  return LanModel(std::move(spec), std::move(w));
}

StackNetModel::StackNetModel(StackNetSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  Rng rng(seed);
  weights_ = StackWeights::init(spec_.tower, rng);
  grads_ = StackWeights::zeros_like(spec_.tower);
}

StackNetModel::StackNetModel(StackNetSpec spec, StackWeights weights)
    : spec_(std::move(spec)), weights_(std::move(weights)) {
  grads_ = StackWeights::zeros_like(spec_.tower);
}

Tensor StackNetModel::predict(const std::vector<Tensor>& patches) const {
  return stack_forward(spec_.tower, weights_, stack_patches(patches), nullptr);
}

Tensor StackNetModel::forward(const std::vector<Tensor>& patches) {
  return stack_forward(spec_.tower, weights_, stack_patches(patches), &tape_);
}

void StackNetModel::backward(const Tensor& gradOut) {
  stack_backward(spec_.tower, weights_, tape_, gradOut, grads_);
}

void StackNetModel::zero_grads() { grads_.set_zero(); }

std::vector<ParamRef> StackNetModel::params() {
  std::vector<ParamRef> out;
  collect_params(spec_.tower, "stack", weights_, grads_, out);
  return out;
}

double StackNetModel::accumulate_example(const std::vector<Tensor>& patches,
                                         const Tensor& target, Grads& grads,
                                         Workspace& ws) const {
  Tensor out = stack_forward(spec_.tower, weights_, stack_patches(patches), &ws);
  LossValue lv = squared_error_loss(out, target);
  stack_backward(spec_.tower, weights_, ws, lv.grad, grads);
  return lv.value;
}

void StackNetModel::add_grads(const Grads& grads, double scale) {
  add_scaled(grads_, grads, scale);
}

void StackNetModel::save(const std::filesystem::path& path) const {
  BinaryContainer c;
  c.kind = PayloadKind::NetworkCheckpoint;
  nlohmann::json meta;
  meta["network"] = "stack";
  meta["landmarkCount"] = spec_.landmarkCount;
  meta["patchSize"] = spec_.patchSize;
  meta["channels"] = spec_.channels;
  meta["hiddenDim"] = spec_.hiddenDim;
  c.metaJson = meta.dump();
  for (std::size_t i = 0; i < spec_.tower.layers.size(); ++i) {
    if (!spec_.tower.layers[i].has_params()) continue;
    c.tensors.push_back({"stack/" + spec_.tower.layers[i].name + "/weight", weights_.weights[i]});
    c.tensors.push_back({"stack/" + spec_.tower.layers[i].name + "/bias", weights_.biases[i]});
  }
  write_container(path, c);
}

StackNetModel StackNetModel::load(const std::filesystem::path& path) {
  BinaryContainer c = read_container(path);
  if (c.kind != PayloadKind::NetworkCheckpoint) {
    throw DataError("'" + path.string() + "' does not hold a network checkpoint");
  }
  nlohmann::json meta = nlohmann::json::parse(c.metaJson);
  if (meta.value("network", "") != "stack") {
    throw DataError("'" + path.string() + "' holds a '" + meta.value("network", "?") +
                    "' network, expected 'stack'");
  }
  StackNetSpec spec = StackNetSpec::make(meta.at("landmarkCount"), meta.at("patchSize"),
                                         meta.at("channels"), meta.at("hiddenDim"));
  StackWeights w = StackWeights::zeros_like(spec.tower);
  for (std::size_t i = 0; i < spec.tower.layers.size(); ++i) {
    if (!spec.tower.layers[i].has_params()) continue;
    for (bool bias : {false, true}) {
      std::string name =
          "stack/" + spec.tower.layers[i].name + (bias ? "/bias" : "/weight");
      const NamedTensor* t = c.find(name);
      if (!t) throw DataError("checkpoint '" + path.string() + "' is missing '" + name + "'");
      Tensor& dst = bias ? w.biases[i] : w.weights[i];
      if (!t->tensor.same_shape(dst)) {
        throw DataError("checkpoint tensor '" + name + "' has unexpected shape " +
                        shape_str(t->tensor.shape()));
      }
      dst = t->tensor;
    }
  }
  return StackNetModel(std::move(spec), std::move(w));
}

std::string checkpoint_network_kind(const std::filesystem::path& path) {
  BinaryContainer c = read_container(path);
  if (c.kind != PayloadKind::NetworkCheckpoint) {
    throw DataError("'" + path.string() + "' does not hold a network checkpoint");
  }
  return nlohmann::json::parse(c.metaJson).value("network", "");
}

}  // namespace sir
